//! End-to-end decomposition: uniform column/row sketches, informative
//! sketches for clustered data, and the online tracker for column streams.

use crate::error::{Error, Result};
use crate::matrix::{
    numerical_rank, polar_orthonormalize, select_columns, select_rows, svd_compact, IndexSet, SubspaceBasis,
};
use crate::sampling::{
    alternating_sample, informative_columns, informative_rows, uniform_indices, Alg2Config, Alg3Config, Tau,
};
use crate::scalar::Real;
use crate::solvers::{l1_fit, l1_fit_vector, pcp_alm, L1Config, SolverConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::time::Instant;

/// Solver settings shared by the batch pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub solver: SolverConfig,
    pub l1: L1Config,
    /// Relative singular value cutoff when extracting a basis from a
    /// low-rank estimate.
    pub rank_tol: f64,
    /// Optional cap on the basis dimension.
    pub r_max: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            solver: SolverConfig::default(),
            l1: L1Config::default(),
            rank_tol: 1e-6,
            r_max: None,
        }
    }
}

/// Solver residuals, warnings and wall-clock timings of a pipeline run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub pcp_iterations: usize,
    pub pcp_residual: f64,
    pub pcp_converged: bool,
    /// The row sketch's low-rank part has rank below `r_hat`.
    pub rank_warning: bool,
    /// Rank trace of the alternating search, when used.
    pub alg3_trace: Vec<usize>,
    pub basis_dim: usize,
    pub seconds_sampling: f64,
    pub seconds_pcp: f64,
    pub seconds_l1: f64,
}

/// Output of a batch pipeline. `l_hat` is `basis · representation` and
/// `s_hat` is `D − l_hat`, both formed once from the returned factors.
#[derive(Debug, Clone)]
pub struct PipelineResult<T: Real> {
    pub basis: SubspaceBasis<T>,
    pub representation: DMatrix<T>,
    pub l_hat: DMatrix<T>,
    pub s_hat: DMatrix<T>,
    pub col_idx: IndexSet,
    pub row_idx: IndexSet,
    pub diagnostics: Diagnostics,
}

fn basis_of<T: Real>(l: &DMatrix<T>, rank_tol: f64, cap: Option<usize>) -> Result<SubspaceBasis<T>> {
    let u = svd_compact(l, rank_tol)?.u.into_matrix();
    let k = cap.map_or(u.ncols(), |c| c.min(u.ncols()));
    Ok(SubspaceBasis::new_unchecked(u.columns(0, k).into_owned()))
}

/// Best approximation of `l` with rank at most `k`.
fn truncate_rank<T: Real>(l: &DMatrix<T>, k: usize, rank_tol: f64) -> Result<DMatrix<T>> {
    let svd = svd_compact(l, rank_tol)?;
    if svd.rank() <= k {
        return Ok(l.clone());
    }
    let u = svd.u.matrix().columns(0, k);
    let v = svd.v.matrix().columns(0, k);
    Ok(u * DMatrix::from_diagonal(&svd.sigma.rows(0, k)) * v.transpose())
}

/// Fits the representation on the sampled rows and assembles the result.
fn finish<T: Real>(
    d: &DMatrix<T>,
    basis: SubspaceBasis<T>,
    col_idx: IndexSet,
    row_idx: IndexSet,
    cfg: &PipelineConfig,
    mut diag: Diagnostics,
) -> Result<PipelineResult<T>> {
    let t = Instant::now();
    let u_s2 = select_rows(basis.matrix(), &row_idx)?;
    if numerical_rank(&u_s2, cfg.l1.rank_tol) < basis.dim() {
        return Err(Error::RowSketchLostRank);
    }
    let d_s2 = select_rows(d, &row_idx)?;
    let q = l1_fit(&u_s2, &d_s2, &cfg.l1)?;
    diag.seconds_l1 += t.elapsed().as_secs_f64();
    diag.basis_dim = basis.dim();
    let l_hat = basis.matrix() * &q;
    let s_hat = d - &l_hat;
    Ok(PipelineResult {
        basis,
        representation: q,
        l_hat,
        s_hat,
        col_idx,
        row_idx,
        diagnostics: diag,
    })
}

/// Uniform sketching: decompose `m1` random columns, take the column space
/// of their low-rank part, and fit every column's representation by ℓ1
/// regression on `m2` random rows.
pub fn decompose_uniform<T: Real, R: Rng + ?Sized>(
    d: &DMatrix<T>,
    m1: usize,
    m2: usize,
    cfg: &PipelineConfig,
    rng: &mut R,
) -> Result<PipelineResult<T>> {
    let (n1, n2) = d.shape();
    if m1 == 0 || m1 > n2 || m2 == 0 || m2 > n1 {
        return Err(Error::precondition(format!(
            "sketch sizes m1 = {m1}, m2 = {m2} must lie in 1..={n2} and 1..={n1}"
        )));
    }
    crate::matrix::ensure_finite(d)?;
    let mut diag = Diagnostics::default();
    let t = Instant::now();
    let cols = uniform_indices(n2, m1, rng)?;
    let rows = uniform_indices(n1, m2, rng)?;
    diag.seconds_sampling = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let d_s1 = select_columns(d, &cols)?;
    let dec = pcp_alm(&d_s1, &cfg.solver.for_sketch(n1))?;
    diag.pcp_iterations = dec.iterations;
    diag.pcp_residual = dec.primal_residual;
    diag.pcp_converged = dec.converged;
    let basis = basis_of(&dec.l_hat, cfg.rank_tol, cfg.r_max)?;
    diag.seconds_pcp = t.elapsed().as_secs_f64();
    finish(d, basis, cols, rows, cfg, diag)
}

/// Optional refinement of the column-space estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refinement {
    #[default]
    None,
    /// `V_s1` from a second decomposition of the sampled columns of the
    /// row sketch.
    SketchPcp,
    /// Alternating ℓ1 passes on the column sketch: fit `V` given `Û`, then
    /// `Û` given `V`.
    AlternatingL1(usize),
}

/// Settings of the informative-sampling pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformativeConfig {
    /// Upper bound on the rank.
    pub r_hat: usize,
    /// The row sketch has `c_r · r_hat` rows.
    pub c_r: usize,
    /// Repeats of informative sampling for columns and rows.
    pub c: usize,
    /// Choose the row sketch by the alternating search instead of uniformly.
    pub use_alg3: bool,
    pub alg3_t: usize,
    pub alg3_max_cycles: usize,
    pub tau: Tau,
    pub refine: Refinement,
    pub pipeline: PipelineConfig,
}

impl InformativeConfig {
    pub fn new(r_hat: usize) -> Self {
        InformativeConfig {
            r_hat,
            c_r: 3,
            c: 3,
            use_alg3: false,
            alg3_t: 2,
            alg3_max_cycles: 10,
            tau: Tau::default(),
            refine: Refinement::AlternatingL1(1),
            pipeline: PipelineConfig::default(),
        }
    }
}

/// Informative sketching for data whose columns are clustered.
///
/// The low-rank part of a row sketch `D_w` locates informative columns;
/// their row space `V_s1` gives the column space row by row through
/// `min ‖D_s1 − Û V_s1ᵀ‖₁`; informative rows of `Û` then give the row
/// sketch on which every representation is fit.
pub fn decompose_informative<T: Real, R: Rng + ?Sized>(
    d: &DMatrix<T>,
    cfg: &InformativeConfig,
    rng: &mut R,
) -> Result<PipelineResult<T>> {
    let (n1, n2) = d.shape();
    let m = cfg.c_r * cfg.r_hat;
    if cfg.r_hat == 0 || m == 0 || m > n1.min(n2) {
        return Err(Error::precondition(format!(
            "C_r·r_hat = {m} must be positive and at most {}",
            n1.min(n2)
        )));
    }
    crate::matrix::ensure_finite(d)?;
    let pc = &cfg.pipeline;
    let alg2 = Alg2Config {
        c: cfg.c,
        tau: cfg.tau,
        ..Alg2Config::default()
    };
    let mut diag = Diagnostics::default();

    let t = Instant::now();
    let (l_w, cols, w_rows) = if cfg.use_alg3 {
        let a3 = Alg3Config {
            c_r: cfg.c_r,
            r_hat: cfg.r_hat,
            t: cfg.alg3_t,
            max_cycles: cfg.alg3_max_cycles,
            pcp: Some(pc.solver),
            tau: cfg.tau,
            rank_tol: pc.rank_tol,
        };
        let out = alternating_sample(d, &a3, rng)?;
        diag.alg3_trace = out.rank_trace;
        diag.pcp_converged = !out.pcp_warning;
        let cols = if cfg.c == cfg.c_r {
            out.col_idx
        } else {
            informative_columns(&out.l_w_hat, &alg2, rng)?
        };
        (out.l_w_hat, cols, out.row_idx)
    } else {
        let rows = uniform_indices(n1, m, rng)?;
        let dec = pcp_alm(&select_rows(d, &rows)?, &pc.solver.for_sketch(m))?;
        diag.pcp_iterations = dec.iterations;
        diag.pcp_residual = dec.primal_residual;
        diag.pcp_converged = dec.converged;
        let l_w = truncate_rank(&dec.l_hat, cfg.r_hat, pc.rank_tol)?;
        let cols = informative_columns(&l_w, &alg2, rng)?;
        (l_w, cols, rows)
    };
    diag.rank_warning = numerical_rank(&l_w, pc.rank_tol) < cfg.r_hat;
    diag.seconds_pcp = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let cap = Some(pc.r_max.map_or(cfg.r_hat, |c| c.min(cfg.r_hat)));
    let l_ws = if cfg.refine == Refinement::SketchPcp {
        let d_ws = select_columns(&select_rows(d, &w_rows)?, &cols)?;
        pcp_alm(&d_ws, &pc.solver.for_sketch(d_ws.nrows()))?.l_hat
    } else {
        select_columns(&l_w, &cols)?
    };
    let v_s1 = basis_of(&l_ws.transpose(), pc.rank_tol, cap)?;
    let d_s1 = select_columns(d, &cols)?;
    let mut u_hat = l1_fit(v_s1.matrix(), &d_s1.transpose(), &pc.l1)?.transpose();
    let passes = match cfg.refine {
        Refinement::AlternatingL1(p) => p,
        _ => 0,
    };
    for _ in 0..passes {
        let ub = basis_of(&u_hat, pc.rank_tol, cap)?;
        let v = l1_fit(ub.matrix(), &d_s1, &pc.l1)?.transpose();
        let vb = basis_of(&v, pc.rank_tol, cap)?;
        u_hat = l1_fit(vb.matrix(), &d_s1.transpose(), &pc.l1)?.transpose();
    }
    let basis = basis_of(&u_hat, pc.rank_tol, pc.r_max)?;
    let rows = informative_rows(&u_hat, &alg2, rng)?;
    diag.seconds_l1 = t.elapsed().as_secs_f64();
    finish(d, basis, cols, rows, pc, diag)
}

/// Settings of the online tracker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    /// The basis is re-fit after every `n_u` pushed columns; `usize::MAX`
    /// never re-fits.
    pub n_u: usize,
    /// The re-fit uses the last `n_s · r_hat` columns.
    pub n_s: usize,
    /// The initial batch has `c_r · r_hat` columns.
    pub c_r: usize,
    /// Repeats of informative row sampling on the basis.
    pub c_rows: usize,
    pub r_hat: usize,
    pub solver: SolverConfig,
    pub l1: L1Config,
    pub rank_tol: f64,
    /// Seeds the row sampling.
    pub seed: u64,
}

impl OnlineConfig {
    pub fn new(r_hat: usize) -> Self {
        OnlineConfig {
            n_u: 4,
            n_s: 5,
            c_r: 10,
            c_rows: 20,
            r_hat,
            solver: SolverConfig::default(),
            l1: L1Config::default(),
            rank_tol: 1e-6,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_u == 0 || self.n_s == 0 || self.c_r == 0 || self.c_rows == 0 || self.r_hat == 0 {
            return Err(Error::precondition("n_u, n_s, C_r, C_rows and r_hat must be at least 1"));
        }
        self.solver.validate()
    }

    pub fn window(&self) -> usize {
        self.n_s.saturating_mul(self.r_hat)
    }
}

/// Tracker state: current basis, sampled rows and the pushed history.
#[derive(Debug, Clone)]
pub struct OnlineState<T: Real> {
    pub basis: SubspaceBasis<T>,
    pub row_idx: IndexSet,
    /// One representation per pushed column, in the basis current at push time.
    pub rep_history: DMatrix<T>,
    pub sparse_history: DMatrix<T>,
    /// Number of pushed columns.
    pub t: usize,
    pub cfg: OnlineConfig,
    /// Basis re-fits performed so far.
    pub refits: usize,
    window: VecDeque<(DVector<T>, DVector<T>)>,
    rng: ChaCha8Rng,
}

fn select_basis_rows<T: Real>(basis: &SubspaceBasis<T>, c: usize, rng: &mut ChaCha8Rng) -> Result<IndexSet> {
    informative_rows(basis.matrix(), &Alg2Config::with_repeats(c), rng)
}

/// Decomposes the initial batch and samples rows from its basis.
pub fn online_init<T: Real>(d0: &DMatrix<T>, cfg: &OnlineConfig) -> Result<OnlineState<T>> {
    cfg.validate()?;
    let (n1, n0) = d0.shape();
    if cfg.r_hat >= n1 {
        return Err(Error::precondition(format!("r_hat = {} must be below N1 = {n1}", cfg.r_hat)));
    }
    if n0 != cfg.c_r * cfg.r_hat {
        return Err(Error::precondition(format!(
            "initial batch has {n0} columns, expected C_r·r_hat = {}",
            cfg.c_r * cfg.r_hat
        )));
    }
    crate::matrix::ensure_finite(d0)?;
    let dec = pcp_alm(d0, &cfg.solver.for_sketch(n1))?;
    if !dec.converged {
        return Err(Error::NotConverged {
            iterations: dec.iterations,
            residual: dec.primal_residual,
        });
    }
    let basis = basis_of(&dec.l_hat, cfg.rank_tol, Some(cfg.r_hat))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let row_idx = select_basis_rows(&basis, cfg.c_rows, &mut rng)?;
    let q0 = basis.matrix().transpose() * &dec.l_hat;
    let s0 = d0 - basis.matrix() * &q0;
    let w = cfg.window();
    let window = (n0.saturating_sub(w)..n0)
        .map(|j| (d0.column(j).into_owned(), q0.column(j).into_owned()))
        .collect();
    Ok(OnlineState {
        basis,
        row_idx,
        rep_history: q0,
        sparse_history: s0,
        t: 0,
        cfg: *cfg,
        refits: 0,
        window,
        rng,
    })
}

impl<T: Real> OnlineState<T> {
    /// Re-fits the basis row by row on the window, `min ‖D_t − Û Q_t‖₁`,
    /// then re-orthonormalizes it and resamples rows. Window
    /// representations are carried into the new coordinates.
    fn refit(&mut self) -> Result<()> {
        let w = self.window.len();
        let k = self.basis.dim();
        if w < k {
            return Ok(());
        }
        let n1 = self.basis.ambient_dim();
        let mut dt = DMatrix::zeros(n1, w);
        let mut qt = DMatrix::zeros(k, w);
        for (j, (d, q)) in self.window.iter().enumerate() {
            dt.set_column(j, d);
            qt.set_column(j, q);
        }
        let qtt = qt.transpose();
        if numerical_rank(&qtt, self.cfg.l1.rank_tol) < k {
            return Ok(());
        }
        let u_hat = l1_fit(&qtt, &dt.transpose(), &self.cfg.l1)?.transpose();
        let Ok(basis) = polar_orthonormalize(&u_hat) else {
            return Ok(());
        };
        // Û = U H with H symmetric, so Û q = U (H q)
        let h = basis.matrix().transpose() * &u_hat;
        for (_, q) in self.window.iter_mut() {
            *q = &h * &*q;
        }
        self.basis = basis;
        self.row_idx = select_basis_rows(&self.basis, self.cfg.c_rows, &mut self.rng)?;
        self.refits += 1;
        Ok(())
    }

    /// Decomposes one column against the current basis and updates the
    /// history; returns `(l_t, s_t)`.
    pub fn push(&mut self, d_t: &DVector<T>) -> Result<(DVector<T>, DVector<T>)> {
        let n1 = self.basis.ambient_dim();
        if d_t.len() != n1 {
            return Err(Error::ShapeMismatch(format!("column has {} entries, expected {n1}", d_t.len())));
        }
        let u_s2 = select_rows(self.basis.matrix(), &self.row_idx)?;
        let d_s2 = DVector::from_iterator(self.row_idx.len(), self.row_idx.iter().map(|i| d_t[i]));
        let q = l1_fit_vector(&u_s2, &d_s2, &self.cfg.l1)?.x;
        let l = self.basis.matrix() * &q;
        let s = d_t - &l;
        let c = self.rep_history.ncols();
        self.rep_history = std::mem::replace(&mut self.rep_history, DMatrix::zeros(0, 0)).insert_column(c, T::zero());
        self.rep_history.column_mut(c).copy_from(&q);
        let c = self.sparse_history.ncols();
        self.sparse_history =
            std::mem::replace(&mut self.sparse_history, DMatrix::zeros(0, 0)).insert_column(c, T::zero());
        self.sparse_history.column_mut(c).copy_from(&s);
        self.window.push_back((d_t.clone(), q));
        while self.window.len() > self.cfg.window() {
            self.window.pop_front();
        }
        self.t += 1;
        if self.t.is_multiple_of(self.cfg.n_u) {
            self.refit()?;
        }
        Ok((l, s))
    }
}

/// Functional form of [`OnlineState::push`].
pub fn online_push<T: Real>(
    mut state: OnlineState<T>,
    d_t: &DVector<T>,
) -> Result<(DVector<T>, DVector<T>, OnlineState<T>)> {
    let (l, s) = state.push(d_t)?;
    Ok((l, s, state))
}
