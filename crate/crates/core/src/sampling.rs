//! Column and row selection: uniform sampling without replacement, greedy
//! informative sampling from a low-rank matrix, and the alternating
//! column/row search for data whose columns and rows are both clustered.

use crate::error::{Error, Result};
use crate::matrix::{numerical_rank, select_columns, select_rows, svd_compact, IndexSet};
use crate::scalar::Real;
use crate::solvers::{pcp_alm, SolverConfig};
use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// `m` distinct indices from `0..n`, every `m`-subset equally likely.
pub fn uniform_indices<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<IndexSet> {
    if m > n {
        return Err(Error::precondition(format!(
            "cannot sample {m} distinct indices from {n}"
        )));
    }
    let idx = rand::seq::index::sample(rng, n, m).into_vec();
    IndexSet::new(idx, n)
}

/// Extends `set` with `n_extra` indices drawn uniformly from its complement.
pub fn augment_random<R: Rng + ?Sized>(set: &IndexSet, n_extra: usize, rng: &mut R) -> Result<IndexSet> {
    let free = set.complement();
    if n_extra > free.len() {
        return Err(Error::precondition(format!(
            "only {} indices left, {} requested",
            free.len(),
            n_extra
        )));
    }
    let mut out = set.clone();
    for k in rand::seq::index::sample(rng, free.len(), n_extra) {
        out.push(free[k]);
    }
    Ok(out)
}

/// Novelty threshold for informative sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Tau {
    Absolute(f64),
    /// Multiple of `‖A‖_F`.
    RelativeFrobenius(f64),
}

impl Default for Tau {
    fn default() -> Self {
        Tau::RelativeFrobenius(1e-8)
    }
}

impl Tau {
    fn resolve(self, fro: f64) -> f64 {
        match self {
            Tau::Absolute(t) => t,
            Tau::RelativeFrobenius(t) => t * fro,
        }
    }

    fn is_valid(self) -> bool {
        let t = match self {
            Tau::Absolute(t) | Tau::RelativeFrobenius(t) => t,
        };
        t > 0.0 && t.is_finite()
    }
}

/// How the first column of each repeat is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SeedRule {
    /// Uniform over the remaining nonzero columns.
    #[default]
    Uniform,
    /// Proportional to the row-space leverage scores of the remaining columns.
    Leverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alg2Config {
    /// Number of repeats; each finds one spanning set.
    pub c: usize,
    pub tau: Tau,
    pub seed_rule: SeedRule,
}

impl Default for Alg2Config {
    fn default() -> Self {
        Alg2Config {
            c: 1,
            tau: Tau::default(),
            seed_rule: SeedRule::Uniform,
        }
    }
}

impl Alg2Config {
    pub fn with_repeats(c: usize) -> Self {
        Alg2Config {
            c,
            ..Alg2Config::default()
        }
    }
}

/// Greedy informative column sampling.
///
/// Each repeat seeds with one random nonzero column, then keeps appending
/// the column whose residual after projecting out the selected span has the
/// largest norm, as long as that norm is at least `tau`. Later repeats work
/// on `A` with all previously selected columns zeroed. Ties go to the lowest
/// index.
pub fn informative_columns<T: Real, R: Rng + ?Sized>(
    a: &DMatrix<T>,
    cfg: &Alg2Config,
    rng: &mut R,
) -> Result<IndexSet> {
    if cfg.c == 0 {
        return Err(Error::precondition("repeat count C must be at least 1"));
    }
    if !cfg.tau.is_valid() {
        return Err(Error::precondition("tau must be positive"));
    }
    let n = a.ncols();
    let tau = T::lit(cfg.tau.resolve(a.norm().as_f64()));
    let col_norms: Vec<T> = a.column_iter().map(|c| c.norm()).collect();
    if col_norms.iter().all(|&v| v == T::zero()) {
        return Err(Error::NoNonzeroColumns);
    }

    let mut selected = IndexSet::empty(n);
    let mut taken = vec![false; n];
    for _ in 0..cfg.c {
        let eligible: Vec<usize> = (0..n)
            .filter(|&j| !taken[j] && col_norms[j] > T::zero() && col_norms[j] >= tau)
            .collect();
        if eligible.is_empty() {
            break;
        }
        let seed = match cfg.seed_rule {
            SeedRule::Uniform => eligible[rng.random_range(0..eligible.len())],
            SeedRule::Leverage => leverage_seed(a, &taken, &eligible, rng),
        };

        // residual of the remaining columns against the selected span
        let mut e = a.clone();
        for (j, _) in taken.iter().enumerate().filter(|(_, t)| **t) {
            e.column_mut(j).fill(T::zero());
        }
        let mut pick = seed;
        loop {
            taken[pick] = true;
            selected.push(pick);
            let f = e.column(pick).into_owned();
            let fnorm = f.norm();
            e.column_mut(pick).fill(T::zero());
            if fnorm > T::zero() {
                let q = f / fnorm;
                let coef = q.transpose() * &e;
                e.ger(-T::one(), &q, &coef.transpose(), T::one());
            }
            let mut best: Option<(usize, T)> = None;
            for (j, _) in taken.iter().enumerate().filter(|(_, t)| !**t) {
                let v = e.column(j).norm();
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            match best {
                Some((j, v)) if v >= tau && v > T::zero() => pick = j,
                _ => break,
            }
        }
    }
    Ok(selected)
}

fn leverage_seed<T: Real, R: Rng + ?Sized>(
    a: &DMatrix<T>,
    taken: &[bool],
    eligible: &[usize],
    rng: &mut R,
) -> usize {
    let mut b = a.clone();
    for (j, &t) in taken.iter().enumerate() {
        if t {
            b.column_mut(j).fill(T::zero());
        }
    }
    let weights: Vec<f64> = match svd_compact(&b, 1e-8) {
        Ok(svd) => eligible
            .iter()
            .map(|&j| svd.v.matrix().row(j).norm_squared().as_f64())
            .collect(),
        Err(_) => vec![1.0; eligible.len()],
    };
    match WeightedIndex::new(&weights) {
        Ok(dist) => eligible[dist.sample(rng)],
        Err(_) => eligible[rng.random_range(0..eligible.len())],
    }
}

/// Informative sampling applied to the rows of `a`.
pub fn informative_rows<T: Real, R: Rng + ?Sized>(
    a: &DMatrix<T>,
    cfg: &Alg2Config,
    rng: &mut R,
) -> Result<IndexSet> {
    informative_columns(&a.transpose(), cfg, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alg3Config {
    /// Row sketch multiplier: the initial sketch has `c_r · r_hat` rows.
    pub c_r: usize,
    pub r_hat: usize,
    /// Stop after the rank has not increased for this many consecutive cycles.
    pub t: usize,
    pub max_cycles: usize,
    /// Decomposition applied to each sketch. `None` treats the data as
    /// uncorrupted and samples directly from the sketches.
    pub pcp: Option<SolverConfig>,
    pub tau: Tau,
    pub rank_tol: f64,
}

impl Default for Alg3Config {
    fn default() -> Self {
        Alg3Config {
            c_r: 3,
            r_hat: 1,
            t: 2,
            max_cycles: 10,
            pcp: Some(SolverConfig::default()),
            tau: Tau::default(),
            rank_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Alg3Output<T: Real> {
    /// Rows forming the sketch whose low-rank part is `l_w_hat`.
    pub row_idx: IndexSet,
    /// Columns selected from `l_w_hat`.
    pub col_idx: IndexSet,
    pub l_w_hat: DMatrix<T>,
    /// Numerical rank of the row sketch's low-rank part, one entry per cycle.
    pub rank_trace: Vec<usize>,
    /// Some sketch decomposition did not converge.
    pub pcp_warning: bool,
}

fn low_rank_part<T: Real>(d: &DMatrix<T>, pcp: &Option<SolverConfig>, warn: &mut bool) -> Result<DMatrix<T>> {
    match pcp {
        None => Ok(d.clone()),
        Some(cfg) => {
            let dec = pcp_alm(d, &cfg.for_sketch(d.nrows()))?;
            if !dec.converged {
                *warn = true;
            }
            Ok(dec.l_hat)
        }
    }
}

/// Alternating informative column/row search.
///
/// Starting from uniformly sampled rows, each cycle decomposes the row
/// sketch, samples informative columns of its low-rank part, decomposes the
/// resulting column sketch and samples informative rows of that, which form
/// the next row sketch.
pub fn alternating_sample<T: Real, R: Rng + ?Sized>(
    d: &DMatrix<T>,
    cfg: &Alg3Config,
    rng: &mut R,
) -> Result<Alg3Output<T>> {
    let (n1, n2) = d.shape();
    let m = cfg.c_r * cfg.r_hat;
    if cfg.t < 2 {
        return Err(Error::precondition("T must be at least 2"));
    }
    if cfg.c_r == 0 || cfg.r_hat == 0 || m > n1 || m > n2 {
        return Err(Error::precondition(format!(
            "C_r·r_hat = {m} must be positive and fit in {n1}×{n2}"
        )));
    }
    if cfg.max_cycles == 0 {
        return Err(Error::precondition("max_cycles must be at least 1"));
    }
    let alg2 = Alg2Config {
        c: cfg.c_r,
        tau: cfg.tau,
        seed_rule: SeedRule::Uniform,
    };
    let mut warn = false;
    let mut rows = uniform_indices(n1, m, rng)?;
    let mut trace = Vec::new();
    let mut stale = 0;
    let mut best = 0;
    loop {
        let d_w = select_rows(d, &rows)?;
        let l_w = low_rank_part(&d_w, &cfg.pcp, &mut warn)?;
        let rank = numerical_rank(&l_w, cfg.rank_tol);
        trace.push(rank);
        if rank > best {
            best = rank;
            stale = 0;
        } else {
            stale += 1;
        }
        let cols = informative_columns(&l_w, &alg2, rng)?;
        if stale >= cfg.t || trace.len() >= cfg.max_cycles {
            return Ok(Alg3Output {
                row_idx: rows,
                col_idx: cols,
                l_w_hat: l_w,
                rank_trace: trace,
                pcp_warning: warn,
            });
        }
        let d_c = select_columns(d, &cols)?;
        let l_c = low_rank_part(&d_c, &cfg.pcp, &mut warn)?;
        rows = informative_rows(&l_c, &alg2, rng)?;
    }
}
