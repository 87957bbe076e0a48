//! Inexact augmented Lagrange multiplier method for principal component
//! pursuit: `min λ‖S‖₁ + ‖L‖∗  s.t.  L + S = D`, and its noise-budgeted form
//! with `‖L + S − D‖_F ≤ ε`.

use super::thresholding::{soft_threshold, svt_adaptive, SvtState};
use crate::error::{Error, Result};
use crate::matrix::{max_abs, top_singular_triplets};
use crate::scalar::Real;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Parameters of the ALM iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Weight of the ℓ1 term. `None` selects `1/√max(N₁, N₂)`.
    pub lambda: Option<f64>,
    /// Stop once `‖D − L − S‖_F / ‖D‖_F ≤ tol` ...
    pub tol: f64,
    /// ... and the relative duality gap, measured with the multiplier scaled
    /// into the dual feasible set, is at most `gap_tol`. Feasibility alone can
    /// be reached at a non-optimal point once the penalty has grown large.
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Initial penalty. `None` selects `1.25 / ‖D‖₂`.
    pub mu_init: Option<f64>,
    pub mu_growth: f64,
    /// Penalty cap as a multiple of the initial penalty.
    pub mu_max_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: None,
            tol: 1e-7,
            gap_tol: 1e-6,
            max_iter: 1000,
            mu_init: None,
            mu_growth: 1.5,
            mu_max_factor: 1e7,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::precondition("lambda must be positive"));
            }
        }
        if !(self.tol > 0.0) || !(self.gap_tol > 0.0) {
            return Err(Error::precondition("tol must be positive"));
        }
        if !(self.mu_growth > 1.0) {
            return Err(Error::precondition("mu_growth must exceed 1"));
        }
        if let Some(mu) = self.mu_init {
            if !(mu > 0.0) {
                return Err(Error::precondition("mu_init must be positive"));
            }
        }
        if !(self.mu_max_factor >= 1.0) {
            return Err(Error::precondition("mu_max_factor must be at least 1"));
        }
        Ok(())
    }

    /// The ℓ1 weight applied to a matrix of the given shape.
    pub fn lambda_for(&self, rows: usize, cols: usize) -> f64 {
        self.lambda
            .unwrap_or_else(|| 1.0 / (rows.max(cols).max(1) as f64).sqrt())
    }

    /// Configuration for decomposing a sketch with `rows` rows: an unset
    /// `lambda` becomes `1/√rows`.
    pub fn for_sketch(&self, rows: usize) -> SolverConfig {
        SolverConfig {
            lambda: Some(self.lambda.unwrap_or(1.0 / (rows.max(1) as f64).sqrt())),
            ..*self
        }
    }
}

/// Result of a low-rank plus sparse decomposition.
#[derive(Debug, Clone)]
pub struct Decomposition<T: Real> {
    pub l_hat: DMatrix<T>,
    pub s_hat: DMatrix<T>,
    pub iterations: usize,
    /// `‖D − L̂ − Ŝ‖_F / ‖D‖_F`, recomputed from the returned pair.
    pub primal_residual: f64,
    /// Relative duality gap at the returned point when it was measured,
    /// `NaN` otherwise.
    pub duality_gap: f64,
    /// The primal residual is within `tol`.
    pub converged: bool,
}

fn spectral_norm_estimate<T: Real>(d: &DMatrix<T>) -> T {
    let k = d.nrows().min(d.ncols());
    if k <= 256 {
        crate::matrix::spectral_norm(d)
    } else {
        top_singular_triplets(d, 1, None, T::zero(), 1e-12, 100).sigma[0]
    }
}

fn relative_residual<T: Real>(d: &DMatrix<T>, l: &DMatrix<T>, s: &DMatrix<T>) -> f64 {
    let dn = d.norm();
    let r = (d - l - s).norm();
    (r / dn).as_f64()
}

/// Solves principal component pursuit by inexact ALM.
///
/// Each iteration thresholds the singular values of `D − S + Y/μ` at `1/μ`,
/// soft-thresholds `D − L + Y/μ` at `λ/μ`, updates the multiplier
/// `Y ← Y + μ(D − L − S)` and grows `μ` geometrically up to its cap.
/// Non-convergence is reported through [`Decomposition::converged`].
pub fn pcp_alm<T: Real>(d: &DMatrix<T>, cfg: &SolverConfig) -> Result<Decomposition<T>> {
    alm_loop(d, cfg, None)
}

/// Noise-budgeted principal component pursuit:
/// `min λ‖S‖₁ + ‖L‖∗  s.t.  ‖L + S − D‖_F ≤ eps_n`.
///
/// The same ALM loop carries an extra residual block `Z` projected onto the
/// `eps_n` ball; a final projection enforces the budget if the loop stops
/// early. `eps_n = 0` runs exactly the [`pcp_alm`] iteration.
pub fn stable_pcp<T: Real>(d: &DMatrix<T>, cfg: &SolverConfig, eps_n: f64) -> Result<Decomposition<T>> {
    if !(eps_n >= 0.0) || !eps_n.is_finite() {
        return Err(Error::precondition("eps_n must be a finite nonnegative number"));
    }
    if eps_n == 0.0 {
        return alm_loop(d, cfg, None);
    }
    let mut dec = alm_loop(d, cfg, Some(eps_n))?;
    let slack = T::lit(eps_n + cfg.tol * d.norm().as_f64());
    let resid = d - &dec.l_hat - &dec.s_hat;
    let rn = resid.norm();
    if rn > slack {
        // pull S toward D − L until the residual sits on the ε ball
        let shrink = T::one() - T::lit(eps_n) / rn;
        dec.s_hat += resid * shrink;
        dec.primal_residual = relative_residual(d, &dec.l_hat, &dec.s_hat);
    }
    Ok(dec)
}

fn project_ball<T: Real>(x: DMatrix<T>, radius: T) -> DMatrix<T> {
    let n = x.norm();
    if n <= radius {
        x
    } else {
        x * (radius / n)
    }
}

/// Relative gap between `‖L‖∗ + λ‖S‖₁` and the dual value of `Y` after
/// scaling it into `{‖Y‖₂ ≤ 1, ‖Y‖_∞ ≤ λ}`.
fn duality_gap<T: Real>(
    d: &DMatrix<T>,
    s: &DMatrix<T>,
    nuclear: T,
    y: &DMatrix<T>,
    lambda: T,
    radius: Option<T>,
) -> f64 {
    let primal = nuclear + lambda * crate::matrix::l1_norm(s);
    let scale = T::one().max(spectral_norm_estimate(y)).max(max_abs(y) / lambda);
    let mut dual = d.dot(y) / scale;
    if let Some(r) = radius {
        dual -= r * y.norm() / scale;
    }
    ((primal - dual) / primal.max(T::tiny())).as_f64()
}

fn alm_loop<T: Real>(d: &DMatrix<T>, cfg: &SolverConfig, eps_n: Option<f64>) -> Result<Decomposition<T>> {
    cfg.validate()?;
    let (m, n) = d.shape();
    if d.is_empty() || max_abs(d) == T::zero() {
        return Err(Error::ZeroMatrix);
    }
    crate::matrix::ensure_finite(d)?;

    let lambda = T::lit(cfg.lambda_for(m, n));
    let norm_two = spectral_norm_estimate(d);
    let norm_inf = max_abs(d) / lambda;
    let dual_norm = norm_two.max(norm_inf);
    let mut y = d / dual_norm;
    let mut mu = cfg.mu_init.map(T::lit).unwrap_or(T::lit(1.25) / norm_two);
    let mu_max = mu * T::lit(cfg.mu_max_factor);
    let growth = T::lit(cfg.mu_growth);
    let d_norm = d.norm();
    let tol = T::lit(cfg.tol);
    let gap_tol = cfg.gap_tol;
    let mu_start = mu;
    let mut growth = growth;

    let mut l = DMatrix::<T>::zeros(m, n);
    let mut s = DMatrix::<T>::zeros(m, n);
    // Z = 0 for exact PCP; otherwise it absorbs up to eps_n of residual
    let radius = eps_n.map(T::lit);
    let mut z = match radius {
        Some(r) => project_ball(d.clone(), r),
        None => DMatrix::zeros(m, n),
    };
    if let Some(r) = radius {
        if d_norm <= r {
            // zero decomposition is feasible and optimal
            return Ok(Decomposition {
                l_hat: l,
                s_hat: s,
                iterations: 0,
                primal_residual: 1.0,
                duality_gap: 0.0,
                converged: true,
            });
        }
    }

    let mut svt = SvtState::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut last_gap = f64::NAN;
    // feasible iterate with the smallest gap seen so far
    let mut best: Option<(f64, DMatrix<T>, DMatrix<T>)> = None;
    while iterations < cfg.max_iter {
        iterations += 1;
        let inv_mu = T::one() / mu;

        let mut work = d - &s - &z;
        work += &y * inv_mu;
        l = svt_adaptive(&work, inv_mu, &mut svt).0;

        let mut work = d - &l - &z;
        work += &y * inv_mu;
        s = soft_threshold(&work, lambda * inv_mu);

        if let Some(r) = radius {
            let mut work = d - &l - &s;
            work += &y * inv_mu;
            z = project_ball(work, r);
        }

        let resid = d - &l - &s - &z;
        y += &resid * mu;
        mu = (mu * growth).min(mu_max);

        if resid.norm() <= tol * d_norm {
            let gap = duality_gap(d, &s, svt.nuclear, &y, lambda, radius);
            last_gap = gap;
            if gap <= gap_tol {
                converged = true;
                break;
            }
            if best.as_ref().is_none_or(|b| gap < b.0) {
                best = Some((gap, l.clone(), s.clone()));
            }
            // restart the penalty schedule more slowly from the current point
            growth = T::one() + (growth - T::one()) * T::lit(0.5);
            mu = mu_start;
        }
    }

    if !converged {
        if let Some((gap, bl, bs)) = best {
            last_gap = gap;
            l = bl;
            s = bs;
        }
    }
    let primal_residual = relative_residual(d, &l, &s);
    let converged = match radius {
        None => primal_residual <= cfg.tol,
        Some(_) => converged || last_gap.is_finite(),
    };
    Ok(Decomposition {
        l_hat: l,
        s_hat: s,
        iterations,
        primal_residual,
        duality_gap: last_gap,
        converged,
    })
}
