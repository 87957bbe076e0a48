//! Reproduction harness: phase-transition grids, informative versus
//! uniform sampling, alternating-search rank traces and online tracking
//! curves. Every run is a pure function of its parameters and a master
//! seed; trials run in parallel with seeds derived from their position.

use crate::datagen::{imbalanced_layout, ProblemInstance, RotatingStream, StreamSpec};
use crate::error::{Error, Result};
use crate::matrix::relative_error;
use crate::pipelines::{decompose_informative, decompose_uniform, online_init, InformativeConfig, OnlineConfig, PipelineConfig};
use crate::sampling::{alternating_sample, Alg3Config};
use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Seed for the sub-experiment at position `path` under `master`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    for (k, &p) in path.iter().enumerate() {
        rng.set_stream(p.wrapping_add((k as u64) << 48));
        rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
    }
    rng.next_u64()
}

/// Gaussian low-rank plus Bernoulli sparse instance shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub rho: f64,
    pub amplitude: f64,
}

impl GaussianParams {
    pub fn square(n: usize, r: usize, rho: f64) -> Self {
        GaussianParams {
            n1: n,
            n2: n,
            r,
            rho,
            amplitude: 1.0,
        }
    }

    pub fn instance(&self, seed: u64) -> Result<ProblemInstance> {
        ProblemInstance::gaussian(self.n1, self.n2, self.r, self.rho, self.amplitude, seed)
    }
}

/// Success fractions over a grid of sketch sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub m1_values: Vec<usize>,
    pub m2_values: Vec<usize>,
    /// `success_rate[i][j]` belongs to `(m1_values[i], m2_values[j])`.
    pub success_rate: Vec<Vec<f64>>,
    pub trials: usize,
    pub criterion: f64,
}

impl GridResult {
    pub fn rate(&self, m1: usize, m2: usize) -> Option<f64> {
        let i = self.m1_values.iter().position(|&v| v == m1)?;
        let j = self.m2_values.iter().position(|&v| v == m2)?;
        Some(self.success_rate[i][j])
    }
}

/// Relative error of the uniform pipeline on one trial; solver failures
/// count as infinite error.
pub fn uniform_trial(p: &GaussianParams, m1: usize, m2: usize, cfg: &PipelineConfig, instance_seed: u64, sample_seed: u64) -> f64 {
    let Ok(inst) = p.instance(instance_seed) else {
        return f64::INFINITY;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    match decompose_uniform(&inst.d, m1, m2, cfg, &mut rng) {
        Ok(res) => relative_error(&res.l_hat, &inst.l),
        Err(_) => f64::INFINITY,
    }
}

/// Phase-transition grid of the uniform pipeline. Trial `k` uses the same
/// instance in every cell.
pub fn run_phase_transition(
    p: &GaussianParams,
    m1_list: &[usize],
    m2_list: &[usize],
    trials: usize,
    criterion: f64,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<GridResult> {
    if trials == 0 {
        return Err(Error::precondition("trials must be at least 1"));
    }
    let jobs: Vec<(usize, usize, usize)> = (0..m1_list.len())
        .flat_map(|i| (0..m2_list.len()).flat_map(move |j| (0..trials).map(move |k| (i, j, k))))
        .collect();
    let ok: Vec<bool> = jobs
        .par_iter()
        .map(|&(i, j, k)| {
            let inst_seed = derive_seed(seed, &[0, k as u64]);
            let samp_seed = derive_seed(seed, &[1, i as u64, j as u64, k as u64]);
            uniform_trial(p, m1_list[i], m2_list[j], cfg, inst_seed, samp_seed) <= criterion
        })
        .collect();
    let mut hits = vec![vec![0usize; m2_list.len()]; m1_list.len()];
    for (&(i, j, _), &s) in jobs.iter().zip(&ok) {
        hits[i][j] += usize::from(s);
    }
    let success_rate = hits
        .iter()
        .map(|row| row.iter().map(|&h| h as f64 / trials as f64).collect())
        .collect();
    Ok(GridResult {
        m1_values: m1_list.to_vec(),
        m2_values: m2_list.to_vec(),
        success_rate,
        trials,
        criterion,
    })
}

/// Smallest `m` in `m_list` (ascending) with `m1 = m2 = m` reaching
/// `target` success rate.
pub fn smallest_sufficient_m(
    p: &GaussianParams,
    m_list: &[usize],
    trials: usize,
    criterion: f64,
    target: f64,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<Option<usize>> {
    for &m in m_list {
        let g = run_phase_transition(p, &[m], &[m], trials, criterion, cfg, seed)?;
        if g.success_rate[0][0] >= target {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// Column-clustered instance: `n` clusters with a `big : small` column
/// imbalance, the small clusters scaled by `small_scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteredParams {
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub clusters: usize,
    pub big: f64,
    pub small: f64,
    pub small_scale: f64,
    pub rho: f64,
    pub amplitude: f64,
}

impl ClusteredParams {
    pub fn instance(&self, seed: u64) -> Result<ProblemInstance> {
        let (sizes, scales) = imbalanced_layout(self.clusters, self.r, self.n2, self.big, self.small, self.small_scale)?;
        ProblemInstance::clustered(self.n1, self.r, self.clusters, sizes, scales, self.rho, self.amplitude, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Informative,
    UniformBaseline,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Informative => "informative",
            Method::UniformBaseline => "uniform-baseline",
        }
    }
}

/// One trial of the sampling comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub m: usize,
    pub method: Method,
    pub trial: usize,
    pub error: f64,
    pub success: bool,
}

/// Informative versus uniform sketching at equal per-side budgets. The
/// informative pipeline uses `C = max(1, round(m / r))` repeats; the
/// baseline samples `m` columns and `m` rows uniformly. Success means
/// relative error below `criterion`.
pub fn run_sampling_comparison(
    p: &ClusteredParams,
    m_list: &[usize],
    trials: usize,
    criterion: f64,
    seed: u64,
) -> Result<Vec<ComparisonRow>> {
    if trials == 0 {
        return Err(Error::precondition("trials must be at least 1"));
    }
    let jobs: Vec<(usize, Method, usize)> = m_list
        .iter()
        .flat_map(|&m| {
            [Method::Informative, Method::UniformBaseline]
                .into_iter()
                .flat_map(move |meth| (0..trials).map(move |k| (m, meth, k)))
        })
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(m, method, k)| {
            let inst = p.instance(derive_seed(seed, &[0, k as u64]))?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1, m as u64, method as u64, k as u64]));
            let res = match method {
                Method::Informative => {
                    let c = ((m as f64 / p.r as f64).round() as usize).max(1);
                    let cfg = InformativeConfig { c, ..InformativeConfig::new(p.r) };
                    decompose_informative(&inst.d, &cfg, &mut rng)
                }
                Method::UniformBaseline => decompose_uniform(&inst.d, m, m, &PipelineConfig::default(), &mut rng),
            };
            let error = res.map_or(f64::INFINITY, |r| relative_error(&r.l_hat, &inst.l));
            Ok(ComparisonRow {
                m,
                method,
                trial: k,
                error,
                success: error < criterion,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows)
}

/// Doubly clustered instance shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoublyParams {
    pub n: usize,
    pub r: usize,
    pub clusters: usize,
    pub rho: f64,
    pub amplitude: f64,
}

/// One entry of an alternating-search rank trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub trial: usize,
    pub cycle: usize,
    pub rank: usize,
}

/// Rank of the column sketch after each cycle of the alternating search,
/// starting from `c · r` uniformly sampled columns (cycle 0). With
/// `rho = 0` the sketches are used directly; otherwise each is decomposed
/// first.
pub fn run_alg3_trace(p: &DoublyParams, c: usize, max_cycles: usize, trials: usize, seed: u64) -> Result<Vec<TraceRow>> {
    if trials == 0 {
        return Err(Error::precondition("trials must be at least 1"));
    }
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|k| {
            let inst = ProblemInstance::doubly_clustered(
                p.n,
                p.r,
                p.clusters,
                p.rho,
                p.amplitude,
                derive_seed(seed, &[0, k as u64]),
            )?;
            let cfg = Alg3Config {
                c_r: c,
                r_hat: p.r,
                t: 2,
                max_cycles,
                pcp: if p.rho > 0.0 { Some(Default::default()) } else { None },
                ..Alg3Config::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1, k as u64]));
            // columns of D are the rows of Dᵀ
            let out = alternating_sample(&inst.d.transpose(), &cfg, &mut rng)?;
            Ok(out
                .rank_trace
                .iter()
                .enumerate()
                .map(|(cycle, &rank)| TraceRow { trial: k, cycle, rank })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

/// Per-column tracking error of the online tracker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    /// Stream position of the column.
    pub t: usize,
    /// `‖l_t − l̂_t‖₂` over the average column norm of the true `L`.
    pub normalized_error: f64,
}

/// Runs the tracker over a rotating stream: the first `c_r · r_hat`
/// columns initialize it, every later column is pushed.
pub fn run_online_track(spec: &StreamSpec, cfg: &OnlineConfig, seed: u64) -> Result<Vec<TrackRow>> {
    let n0 = cfg.c_r * cfg.r_hat;
    if spec.n2 <= n0 {
        return Err(Error::precondition(format!("stream of {} columns is shorter than the initial batch {n0}", spec.n2)));
    }
    let stream = RotatingStream::new(*spec, derive_seed(seed, &[0]))?;
    let cols: Vec<_> = stream.collect();
    let avg = cols.iter().map(|c| c.l.norm()).sum::<f64>() / cols.len() as f64;
    let mut d0 = DMatrix::zeros(spec.n1, n0);
    for (j, c) in cols[..n0].iter().enumerate() {
        d0.set_column(j, &c.d);
    }
    let cfg = OnlineConfig { seed: derive_seed(seed, &[1]), ..*cfg };
    let mut state = online_init(&d0, &cfg)?;
    let mut out = Vec::with_capacity(cols.len() - n0);
    for (t, c) in cols.iter().enumerate().skip(n0) {
        let (l, _) = state.push(&c.d)?;
        out.push(TrackRow {
            t,
            normalized_error: (&l - &c.l).norm() / avg,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_and_repeat() {
        let a = derive_seed(1, &[0, 3]);
        assert_eq!(a, derive_seed(1, &[0, 3]));
        assert_ne!(a, derive_seed(1, &[3, 0]));
        assert_ne!(a, derive_seed(2, &[0, 3]));
        assert_ne!(derive_seed(1, &[0]), derive_seed(1, &[0, 0]));
    }

    #[test]
    fn full_sketch_grid_succeeds() {
        let p = GaussianParams::square(40, 2, 0.02);
        let g = run_phase_transition(&p, &[40], &[40], 3, 5e-3, &PipelineConfig::default(), 4).unwrap();
        assert_eq!(g.rate(40, 40), Some(1.0));
        assert!(run_phase_transition(&p, &[40], &[40], 0, 5e-3, &PipelineConfig::default(), 4).is_err());
    }

    #[test]
    fn grid_is_reproducible() {
        let p = GaussianParams::square(60, 2, 0.05);
        let run = || run_phase_transition(&p, &[6, 20], &[6, 20], 2, 5e-3, &PipelineConfig::default(), 9).unwrap();
        assert_eq!(run(), run());
    }

    #[test]
    fn comparison_rejects_zero_trials() {
        let p = ClusteredParams {
            n1: 40,
            n2: 60,
            r: 4,
            clusters: 2,
            big: 130.0,
            small: 10.0,
            small_scale: 13.0,
            rho: 0.0,
            amplitude: 1.0,
        };
        assert!(run_sampling_comparison(&p, &[12], 0, 0.01, 0).unwrap_err().is_precondition());
        let rows = run_sampling_comparison(&p, &[12], 1, 0.01, 0).unwrap();
        assert_eq!(rows.len(), 2);
    }
}
