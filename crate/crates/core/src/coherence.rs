//! Coherence diagnostics and sufficient sketch-size calculators.
//!
//! The calculators evaluate the sufficient conditions of the sampling
//! analysis literally. The constants in those conditions are unknown, so
//! they are inputs ([`BoundConstants`]) rather than fixed values.

use crate::error::{Error, Result};
use crate::matrix::svd_compact;
use crate::scalar::Real;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Coherence of the column and row spaces of a low-rank matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    /// `√N₁ · max |U(i,j)|`
    pub gamma_u: f64,
    /// `√N₂ · max |V(i,j)|`
    pub gamma_v: f64,
    /// Smallest `μ` with `max‖Uᵀeᵢ‖² ≤ μr/N₁`, `max‖Vᵀeᵢ‖² ≤ μr/N₂` and
    /// `‖UVᵀ‖²_∞ ≤ μr/(N₁N₂)`.
    pub mu: f64,
    /// `‖UVᵀ‖_∞`
    pub uv_inf: f64,
    pub rank: usize,
}

/// Computes the coherence report of `l` from its compact SVD.
pub fn coherence_of<T: Real>(l: &DMatrix<T>, rank_tol: f64) -> Result<CoherenceReport> {
    let svd = svd_compact(l, rank_tol)?;
    let (n1, n2) = l.shape();
    let r = svd.rank();
    let u = svd.u.matrix().columns(0, r).into_owned();
    let v = svd.v.matrix().columns(0, r).into_owned();
    let max_row_sq = |m: &DMatrix<T>| {
        m.row_iter()
            .map(|row| row.norm_squared().as_f64())
            .fold(0.0, f64::max)
    };
    let uv_inf = (&u * v.transpose()).amax().as_f64();
    let rf = r as f64;
    let (f1, f2) = (n1 as f64, n2 as f64);
    let mu = (f1 / rf * max_row_sq(&u))
        .max(f2 / rf * max_row_sq(&v))
        .max(f1 * f2 / rf * uv_inf * uv_inf);
    Ok(CoherenceReport {
        gamma_u: f1.sqrt() * u.amax().as_f64(),
        gamma_v: f2.sqrt() * v.amax().as_f64(),
        mu,
        uv_inf,
        rank: r,
    })
}

/// Constants of the sufficient conditions. All default to 1 except
/// `rho_s = 0.1`, `beta = 2` and `delta = 0.1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c2: f64,
    pub c3: f64,
    pub c2p: f64,
    pub c3p: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub c9: f64,
    pub rho_r: f64,
    pub rho_s: f64,
    pub beta: f64,
    pub delta: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants {
            c2: 1.0,
            c3: 1.0,
            c2p: 1.0,
            c3p: 1.0,
            c5: 1.0,
            c6: 1.0,
            c7: 1.0,
            c9: 1.0,
            rho_r: 1.0,
            rho_s: 0.1,
            beta: 2.0,
            delta: 0.1,
        }
    }
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 1.0) {
            return Err(Error::precondition("beta must exceed 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::precondition("delta must lie in (0, 1)"));
        }
        let positive = [
            self.c2, self.c3, self.c2p, self.c3p, self.c5, self.c6, self.c7, self.c9, self.rho_r,
            self.rho_s,
        ];
        if positive.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::precondition("bound constants must be positive"));
        }
        Ok(())
    }

    fn kappa_term(&self, r: usize, n1: usize, n2: usize) -> f64 {
        let kappa = (n1 as f64).ln() / r as f64;
        self.c6 * kappa * ((n1 as f64) * (n2 as f64) / self.delta).ln() + 1.0
    }
}

fn ceil_count(x: f64) -> usize {
    if x <= 0.0 {
        0
    } else {
        x.ceil() as usize
    }
}

/// Column count for uniformly sampled columns to span the column space:
/// `r γ²(V) max(c₂ log r, c₃ log(3/δ))`, unrounded.
pub fn span_term_m1(r: usize, gamma_v: f64, consts: &BoundConstants) -> f64 {
    let rf = r as f64;
    rf * gamma_v * gamma_v * (consts.c2 * rf.ln()).max(consts.c3 * (3.0 / consts.delta).ln())
}

/// Column count for the sketch decomposition to be exact:
/// `(r/ρ_r) μ′ (log N₁)²`, unrounded.
pub fn decomposition_term_m1(r: usize, gamma_v: f64, n1: usize, consts: &BoundConstants) -> f64 {
    let rf = r as f64;
    let ln1 = (n1 as f64).ln();
    let mu_p = (consts.c7 * rf.max(ln1) / rf)
        .max(6.0 * gamma_v * gamma_v)
        .max((consts.c9 * gamma_v * ln1).powi(2));
    rf / consts.rho_r * mu_p * ln1 * ln1
}

/// Sufficient number of uniformly sampled columns (maximum of the two terms, rounded up).
pub fn sufficient_m1(r: usize, gamma_v: f64, n1: usize, consts: &BoundConstants) -> usize {
    ceil_count(span_term_m1(r, gamma_v, consts).max(decomposition_term_m1(r, gamma_v, n1, consts)))
}

/// Sufficient number of uniformly sampled rows, rounded up.
pub fn sufficient_m2(r: usize, n1: usize, n2: usize, consts: &BoundConstants) -> usize {
    let rf = r as f64;
    let (f1, f2) = (n1 as f64, n2 as f64);
    let d = consts.delta;
    let b = consts.beta;
    let t1 = rf * f1.ln() * (consts.c2p * rf.ln()).max(consts.c3p * (3.0 / d).ln());
    let t2 = 2.0 * rf * b * (b - 2.0) * (f2 / d).ln() / (3.0 * (b - 1.0).powi(2))
        * consts.kappa_term(r, n1, n2);
    let t3 = consts.c5 * (f1 * f2 / d).ln().powi(2);
    let t4 = (3.0 / d).powf(1.0 / 6.0);
    ceil_count(t1.max(t2).max(t3).max(t4))
}

/// Largest admissible corruption density.
pub fn max_rho(r: usize, n1: usize, n2: usize, consts: &BoundConstants) -> f64 {
    consts
        .rho_s
        .min(0.5 / (r as f64 * consts.beta * consts.kappa_term(r, n1, n2)))
}
