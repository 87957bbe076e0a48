//! Seeded synthetic data: Gaussian low-rank matrices, Bernoulli sparse
//! corruption, column-clustered and doubly clustered low-rank matrices, and
//! a stream whose column space rotates slowly.

use crate::error::{Error, Result};
use crate::matrix::sorted_svd;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

fn gaussian<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
}

/// `U Q` with i.i.d. standard normal `U ∈ R^{N₁×r}`, `Q ∈ R^{r×N₂}`.
pub fn gen_gaussian_lr<R: Rng + ?Sized>(n1: usize, n2: usize, r: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if r > n1.min(n2) {
        return Err(Error::precondition(format!("rank {r} exceeds {n1}×{n2}")));
    }
    let u = gaussian(n1, r, rng);
    let q = gaussian(r, n2, rng);
    Ok(u * q)
}

/// Each entry independently nonzero with probability `rho`, value
/// `±amplitude` with a fair random sign.
pub fn gen_bernoulli_sparse<R: Rng + ?Sized>(
    n1: usize,
    n2: usize,
    rho: f64,
    amplitude: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::precondition("rho must lie in [0, 1]"));
    }
    Ok(DMatrix::from_fn(n1, n2, |_, _| {
        if rng.random::<f64>() < rho {
            if rng.random::<bool>() {
                amplitude
            } else {
                -amplitude
            }
        } else {
            0.0
        }
    }))
}

/// Column counts for `n` clusters totalling `total` columns, where the first
/// `n/2` clusters are `big/small` times larger than the rest. Every cluster
/// gets at least `min_size` columns; rounding uses largest remainders so the
/// counts sum to `total` exactly.
pub fn ratio_sizes(n: usize, total: usize, big: f64, small: f64, min_size: usize) -> Result<Vec<usize>> {
    if n == 0 || !(big > 0.0) || !(small > 0.0) {
        return Err(Error::precondition("cluster count and ratios must be positive"));
    }
    if n * min_size > total {
        return Err(Error::precondition(format!(
            "{total} columns cannot hold {n} clusters of at least {min_size}"
        )));
    }
    let n_big = n / 2;
    let weights: Vec<f64> = (0..n).map(|i| if i < n_big { big } else { small }).collect();
    let wsum: f64 = weights.iter().sum();
    let ideal: Vec<f64> = weights.iter().map(|w| w / wsum * total as f64).collect();
    let mut sizes: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let fa = ideal[a] - ideal[a].floor();
        let fb = ideal[b] - ideal[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let mut left = total - sizes.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    // enforce the minimum by taking columns from the largest clusters
    for i in 0..n {
        while sizes[i] < min_size {
            let donor = (0..n).max_by_key(|&j| (sizes[j], std::cmp::Reverse(j))).unwrap_or(0);
            sizes[donor] -= 1;
            sizes[i] += 1;
        }
    }
    Ok(sizes)
}

/// `[s₁U₁Q₁  s₂U₂Q₂ ... sₙUₙQₙ]` with Gaussian `Uᵢ ∈ R^{N₁×r/n}` and
/// `Qᵢ ∈ R^{r/n×sizesᵢ}`.
pub fn gen_clustered<R: Rng + ?Sized>(
    n1: usize,
    r: usize,
    n: usize,
    sizes: &[usize],
    scales: &[f64],
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if n == 0 || !r.is_multiple_of(n) {
        return Err(Error::precondition(format!("{n} clusters do not divide rank {r}")));
    }
    if sizes.len() != n || scales.len() != n {
        return Err(Error::precondition("need one size and one scale per cluster"));
    }
    let k = r / n;
    let total: usize = sizes.iter().sum();
    let mut g = DMatrix::zeros(n1, total);
    let mut at = 0;
    for (i, &sz) in sizes.iter().enumerate() {
        let u = gaussian(n1, k, rng);
        let q = gaussian(k, sz, rng);
        g.columns_mut(at, sz).copy_from(&((u * q) * scales[i]));
        at += sz;
    }
    Ok(g)
}

/// Top-`r` right singular vectors of a `rows × N` clustered matrix with
/// the 200:5 column imbalance.
fn clustered_right_basis<R: Rng + ?Sized>(big_n: usize, r: usize, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let k = r / n.max(1);
    let small = k.max((big_n as f64 / n as f64 * 10.0 / 205.0).round() as usize);
    let sizes = if n == 1 {
        vec![big_n]
    } else {
        ratio_sizes(n, big_n, 200.0, 5.0, small)?
    };
    let g = gen_clustered(big_n, r, n, &sizes, &vec![1.0; n], rng)?;
    let svd = sorted_svd(&g);
    Ok(svd.v.columns(0, r).into_owned())
}

/// `U_g V_gᵀ`, where `U_g` and `V_g` are the top-`r` right singular vectors
/// of two independent clustered matrices with `N` columns, so both the
/// column and the row space are clustered and coherent.
pub fn gen_doubly_clustered<R: Rng + ?Sized>(big_n: usize, r: usize, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if n == 0 || !r.is_multiple_of(n) {
        return Err(Error::precondition(format!("{n} clusters do not divide rank {r}")));
    }
    if r > big_n {
        return Err(Error::precondition("rank exceeds dimension"));
    }
    let ug = clustered_right_basis(big_n, r, n, rng)?;
    let vg = clustered_right_basis(big_n, r, n, rng)?;
    Ok(ug * vg.transpose())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Structure {
    Gaussian,
    Clustered { n: usize, sizes: Vec<usize>, scales: Vec<f64> },
    DoublyClustered { n: usize },
    Stream { alpha: f64, period: usize },
}

/// Generated `(L, S, D)` with its ground-truth metadata.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub l: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub r_true: usize,
    pub rho: f64,
    pub seed: u64,
    pub structure: Structure,
}

/// Serializable ground-truth summary written next to generated files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub rows: usize,
    pub cols: usize,
    pub r_true: usize,
    pub rho: f64,
    pub seed: u64,
    pub structure: Structure,
}

impl ProblemInstance {
    fn assemble(l: DMatrix<f64>, s: DMatrix<f64>, r: usize, rho: f64, seed: u64, structure: Structure) -> Self {
        let d = &l + &s;
        ProblemInstance {
            l,
            s,
            d,
            r_true: r,
            rho,
            seed,
            structure,
        }
    }

    /// Gaussian low-rank plus Bernoulli sparse.
    pub fn gaussian(n1: usize, n2: usize, r: usize, rho: f64, amplitude: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = gen_gaussian_lr(n1, n2, r, &mut rng)?;
        let s = gen_bernoulli_sparse(n1, n2, rho, amplitude, &mut rng)?;
        Ok(Self::assemble(l, s, r, rho, seed, Structure::Gaussian))
    }

    /// Column-clustered low-rank plus Bernoulli sparse.
    #[allow(clippy::too_many_arguments)]
    pub fn clustered(
        n1: usize,
        r: usize,
        n: usize,
        sizes: Vec<usize>,
        scales: Vec<f64>,
        rho: f64,
        amplitude: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = gen_clustered(n1, r, n, &sizes, &scales, &mut rng)?;
        let s = gen_bernoulli_sparse(n1, l.ncols(), rho, amplitude, &mut rng)?;
        Ok(Self::assemble(l, s, r, rho, seed, Structure::Clustered { n, sizes, scales }))
    }

    /// Doubly clustered low-rank plus Bernoulli sparse.
    pub fn doubly_clustered(big_n: usize, r: usize, n: usize, rho: f64, amplitude: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = gen_doubly_clustered(big_n, r, n, &mut rng)?;
        let s = gen_bernoulli_sparse(big_n, big_n, rho, amplitude, &mut rng)?;
        Ok(Self::assemble(l, s, r, rho, seed, Structure::DoublyClustered { n }))
    }

    pub fn meta(&self) -> InstanceMeta {
        InstanceMeta {
            rows: self.d.nrows(),
            cols: self.d.ncols(),
            r_true: self.r_true,
            rho: self.rho,
            seed: self.seed,
            structure: self.structure.clone(),
        }
    }
}

/// Cluster layout with `n/2` large blocks and `n/2` small blocks
/// (`big : small` columns, the small blocks scaled by `small_scale`), sized
/// to `total` columns.
pub fn imbalanced_layout(
    n: usize,
    r: usize,
    total: usize,
    big: f64,
    small: f64,
    small_scale: f64,
) -> Result<(Vec<usize>, Vec<f64>)> {
    if n == 0 || !r.is_multiple_of(n) {
        return Err(Error::precondition(format!("{n} clusters do not divide rank {r}")));
    }
    let sizes = ratio_sizes(n, total, big, small, r / n)?;
    let scales = (0..n).map(|i| if i < n / 2 { 1.0 } else { small_scale }).collect();
    Ok((sizes, scales))
}

/// Parameters of the rotating-subspace stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub n1: usize,
    pub r: usize,
    /// Rotation step size.
    pub alpha: f64,
    /// The basis rotates after every `period` columns.
    pub period: usize,
    /// Number of columns.
    pub n2: usize,
    pub rho: f64,
    pub amplitude: f64,
}

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        if self.period == 0 {
            return Err(Error::precondition("rotation period must be at least 1"));
        }
        if self.r == 0 || self.r > self.n1 {
            return Err(Error::precondition("rank must lie in 1..=N1"));
        }
        if !(self.alpha >= 0.0) || !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::precondition("alpha must be nonnegative and rho in [0, 1]"));
        }
        Ok(())
    }
}

/// One stream column with its ground truth.
#[derive(Debug, Clone)]
pub struct StreamColumn {
    pub d: DVector<f64>,
    /// `U q` with `U` the basis at emission time.
    pub l: DVector<f64>,
    pub s: DVector<f64>,
}

/// Columns `U qₖ + sₖ`; after every `period` columns
/// `U ← top-r left singular vectors of (U + αE)` with fresh Gaussian `E`.
pub struct RotatingStream {
    spec: StreamSpec,
    basis: DMatrix<f64>,
    emitted: usize,
    rng: ChaCha8Rng,
}

impl RotatingStream {
    pub fn new(spec: StreamSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = gaussian(spec.n1, spec.r, &mut rng);
        let basis = g.qr().q().columns(0, spec.r).into_owned();
        Ok(RotatingStream {
            spec,
            basis,
            emitted: 0,
            rng,
        })
    }

    /// Current orthonormal basis.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn spec(&self) -> &StreamSpec {
        &self.spec
    }
}

impl Iterator for RotatingStream {
    type Item = StreamColumn;

    fn next(&mut self) -> Option<StreamColumn> {
        if self.emitted >= self.spec.n2 {
            return None;
        }
        let r = self.spec.r;
        let q = DVector::from_fn(r, |_, _| self.rng.sample(StandardNormal));
        let l = &self.basis * q;
        let s = gen_bernoulli_sparse(self.spec.n1, 1, self.spec.rho, self.spec.amplitude, &mut self.rng)
            .expect("validated rho")
            .column(0)
            .into_owned();
        self.emitted += 1;
        if self.emitted.is_multiple_of(self.spec.period) && self.spec.alpha > 0.0 {
            let e = gaussian(self.spec.n1, r, &mut self.rng);
            let moved = &self.basis + e * self.spec.alpha;
            self.basis = sorted_svd(&moved).u.columns(0, r).into_owned();
        }
        Some(StreamColumn { d: &l + &s, l, s })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::numerical_rank;

    #[test]
    fn gaussian_rank_and_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = gen_gaussian_lr(100, 100, 5, &mut rng).unwrap();
        let s = sorted_svd(&l).sigma;
        assert!(s[4] > 1e3 * s[5]);
        let one = gen_gaussian_lr(10, 8, 1, &mut rng).unwrap();
        assert_eq!(numerical_rank(&one, 1e-10), 1);
        let full = gen_gaussian_lr(6, 9, 6, &mut rng).unwrap();
        assert_eq!(numerical_rank(&full, 1e-10), 6);
    }

    #[test]
    fn bernoulli_extremes_and_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(gen_bernoulli_sparse(5, 5, 0.0, 1.0, &mut rng).unwrap().amax(), 0.0);
        let full = gen_bernoulli_sparse(5, 5, 1.0, 2.0, &mut rng).unwrap();
        assert!(full.iter().all(|v| v.abs() == 2.0));
        let s = gen_bernoulli_sparse(400, 400, 0.02, 1.0, &mut rng).unwrap();
        let nnz = s.iter().filter(|v| **v != 0.0).count() as f64;
        assert!((nnz - 3200.0).abs() <= 3.0 * (3200.0f64 * 0.98).sqrt());
    }

    #[test]
    fn ratio_sizes_sum_and_order() {
        let s = ratio_sizes(20, 1050, 130.0, 10.0, 1).unwrap();
        assert_eq!(s.iter().sum::<usize>(), 1050);
        assert!(s[..10].iter().all(|&x| x == 97 || x == 98));
        assert!(s[10..].iter().all(|&x| x == 7 || x == 8));
        let s = ratio_sizes(3, 10, 1.0, 1.0, 4);
        assert!(s.is_err());
    }

    #[test]
    fn clustered_rank_and_scales() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (sizes, scales) = imbalanced_layout(4, 8, 200, 130.0, 10.0, 13.0).unwrap();
        let g = gen_clustered(60, 8, 4, &sizes, &scales, &mut rng).unwrap();
        assert_eq!(g.ncols(), 200);
        assert_eq!(numerical_rank(&g, 1e-10), 8);
        assert!(gen_clustered(60, 8, 3, &[1, 1, 1], &[1.0; 3], &mut rng).is_err());
    }

    #[test]
    fn doubly_clustered_has_exact_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l = gen_doubly_clustered(120, 6, 3, &mut rng).unwrap();
        assert_eq!(numerical_rank(&l, 1e-8), 6);
    }

    #[test]
    fn stream_basics() {
        let spec = StreamSpec { n1: 30, r: 3, alpha: 0.0, period: 2, n2: 9, rho: 0.0, amplitude: 1.0 };
        let mut st = RotatingStream::new(spec, 5).unwrap();
        let u0 = st.basis().clone();
        let cols: Vec<_> = st.by_ref().collect();
        assert_eq!(cols.len(), 9);
        assert_eq!(st.basis(), &u0);
        for c in &cols {
            let resid = &c.d - &u0 * (u0.transpose() * &c.d);
            assert!(resid.norm() <= 1e-12 * c.d.norm());
        }
    }

    #[test]
    fn instance_identity_is_exact() {
        let p = ProblemInstance::gaussian(20, 15, 2, 0.1, 1.0, 9).unwrap();
        assert_eq!(&p.l + &p.s, p.d);
        let q = ProblemInstance::gaussian(20, 15, 2, 0.1, 1.0, 9).unwrap();
        assert_eq!(p.d, q.d);
    }
}
