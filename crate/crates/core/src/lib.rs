//! Randomized low-rank plus sparse matrix decomposition.
//!
//! A data matrix `D = L + S` is split into a low-rank part `L` and a sparse
//! part `S` by learning the column space of `L` from a small sketch of
//! sampled columns and the representation of every column from a small
//! sketch of sampled rows. The sketches are chosen uniformly at random or,
//! for clustered (coherent) data, by greedy informative sampling.
//!
//! All numerical routines are generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`, which is what the file formats and
//! the command line tool use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coherence;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod frames;
pub mod matrix;
pub mod pipelines;
pub mod sampling;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use matrix::{CompactSvd, IndexSet, SubspaceBasis};
pub use scalar::Real;
pub use solvers::{Decomposition, L1Config, SolverConfig};

/// Dense `f64` matrix, the carrier for data, components and sketches.
pub type DenseMatrix = nalgebra::DMatrix<f64>;
/// Dense `f64` vector.
pub type DenseVector = nalgebra::DVector<f64>;
/// Orthonormal `f64` basis.
pub type Basis = SubspaceBasis<f64>;
/// `f64` decomposition result.
pub type Decomposition64 = Decomposition<f64>;
