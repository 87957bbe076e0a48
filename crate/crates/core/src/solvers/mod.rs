//! Convex subproblem solvers.

mod alm;
mod l1;
mod l1_noisy;
mod oracle;
mod thresholding;

pub use alm::{pcp_alm, stable_pcp, Decomposition, SolverConfig};
pub use l1::{certificate_gap, l1_fit, l1_fit_detailed, l1_fit_vector, L1Config, L1Solution};
pub use l1_noisy::l1_fit_noisy;
pub use oracle::bp_residual_oracle;
pub use thresholding::{singular_value_threshold, soft_threshold};
