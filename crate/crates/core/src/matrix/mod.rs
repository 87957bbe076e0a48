//! Dense matrix utilities: compact SVD, range bases, complement projections
//! and index-based row/column selection.
//!
//! The dense carrier is [`nalgebra::DMatrix`]. Sampling matrices are never
//! formed explicitly; an [`IndexSet`] records which columns (or rows) were
//! picked, in pick order.

mod io;
mod partial_svd;

pub use io::{read_binary, read_csv, read_matrix, write_binary, write_csv, write_matrix, MAGIC};
pub(crate) use partial_svd::top_singular_triplets;

use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};

/// Relative rank tolerance used when none is supplied.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Ordered, duplicate-free list of sampled indices drawn from `0..domain_size`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexSet {
    indices: Vec<usize>,
    domain_size: usize,
}

impl IndexSet {
    pub fn new(indices: Vec<usize>, domain_size: usize) -> Result<Self> {
        let mut seen = vec![false; domain_size];
        for &i in &indices {
            if i >= domain_size {
                return Err(Error::precondition(format!(
                    "index {i} out of range for domain of size {domain_size}"
                )));
            }
            if seen[i] {
                return Err(Error::precondition(format!("duplicate index {i}")));
            }
            seen[i] = true;
        }
        Ok(IndexSet {
            indices,
            domain_size,
        })
    }

    pub fn empty(domain_size: usize) -> Self {
        IndexSet {
            indices: Vec::new(),
            domain_size,
        }
    }

    /// `0, 1, ..., n-1` in order.
    pub fn full(n: usize) -> Self {
        IndexSet {
            indices: (0..n).collect(),
            domain_size: n,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    /// Appends `i`; returns `false` (and leaves the set unchanged) when `i`
    /// is already present or out of range.
    pub fn push(&mut self, i: usize) -> bool {
        if i >= self.domain_size || self.contains(i) {
            return false;
        }
        self.indices.push(i);
        true
    }

    /// Index set `J` interpreted relative to `self`: the result selects
    /// `self[J[0]], self[J[1]], ...` from the original domain.
    pub fn compose(&self, inner: &IndexSet) -> Result<IndexSet> {
        if inner.domain_size != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "inner index set has domain {} but outer set has {} entries",
                inner.domain_size,
                self.len()
            )));
        }
        Ok(IndexSet {
            indices: inner.iter().map(|j| self.indices[j]).collect(),
            domain_size: self.domain_size,
        })
    }

    /// Indices of the domain not present in the set, ascending.
    pub fn complement(&self) -> Vec<usize> {
        let mut mark = vec![false; self.domain_size];
        for &i in &self.indices {
            mark[i] = true;
        }
        (0..self.domain_size).filter(|&i| !mark[i]).collect()
    }

    /// Set union preserving the order of `self` followed by new entries of `other`.
    pub fn union(&self, other: &IndexSet) -> Result<IndexSet> {
        if other.domain_size != self.domain_size {
            return Err(Error::ShapeMismatch("index sets over different domains".into()));
        }
        let mut out = self.clone();
        for i in other.iter() {
            out.push(i);
        }
        Ok(out)
    }
}

/// Matrix with orthonormal columns spanning a learned subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis<T: Real> {
    matrix: DMatrix<T>,
}

impl<T: Real> SubspaceBasis<T> {
    /// Maximum tolerated deviation of `BᵀB` from the identity.
    pub const GRAM_TOL: f64 = 1e-10;

    /// Wraps `matrix` after checking orthonormality of its columns.
    pub fn new(matrix: DMatrix<T>) -> Result<Self> {
        let dev = gram_deviation(&matrix);
        let tol = if T::eps() > T::lit(1e-10) {
            // f32 cannot meet the f64 bound; scale with precision instead.
            T::eps().as_f64() * 1e3
        } else {
            Self::GRAM_TOL
        };
        if dev.as_f64() > tol {
            return Err(Error::precondition(format!(
                "columns are not orthonormal (gram deviation {:e})",
                dev.as_f64()
            )));
        }
        Ok(SubspaceBasis { matrix })
    }

    pub(crate) fn new_unchecked(matrix: DMatrix<T>) -> Self {
        SubspaceBasis { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.matrix
    }

    /// Dimension of the spanned subspace.
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Dimension of the ambient space.
    pub fn ambient_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn gram_deviation(&self) -> T {
        gram_deviation(&self.matrix)
    }

    /// Orthogonal projection `B Bᵀ x` of each column of `x` onto the subspace.
    pub fn project(&self, x: &DMatrix<T>) -> DMatrix<T> {
        &self.matrix * (self.matrix.transpose() * x)
    }

    /// Orthonormal basis of the orthogonal complement.
    pub fn complement(&self) -> Result<SubspaceBasis<T>> {
        let (n, k) = self.matrix.shape();
        if k >= n {
            return Err(Error::EmptyComplement);
        }
        // Left singular vectors of the full SVD of I - BBᵀ are awkward with
        // thin SVDs; instead project the identity and keep its range.
        let mut p = DMatrix::<T>::identity(n, n);
        p -= &self.matrix * self.matrix.transpose();
        let svd = sorted_svd(&p);
        let cols = n - k;
        Ok(SubspaceBasis::new_unchecked(
            svd.u.columns(0, cols).into_owned(),
        ))
    }
}

/// Max-abs entry of `AᵀA − I`.
pub fn gram_deviation<T: Real>(a: &DMatrix<T>) -> T {
    let g = a.transpose() * a;
    let mut dev = T::zero();
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { T::one() } else { T::zero() };
            dev = dev.max((g[(i, j)] - target).abs());
        }
    }
    dev
}

/// Thin SVD with singular values sorted in descending order.
#[derive(Debug, Clone)]
pub(crate) struct SortedSvd<T: Real> {
    pub u: DMatrix<T>,
    pub sigma: DVector<T>,
    pub v: DMatrix<T>,
}

pub(crate) fn sorted_svd<T: Real>(a: &DMatrix<T>) -> SortedSvd<T> {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return SortedSvd {
            u: DMatrix::zeros(m, 0),
            sigma: DVector::zeros(0),
            v: DMatrix::zeros(n, 0),
        };
    }
    if n >= 2 * m {
        let t = sorted_svd(&a.transpose());
        return SortedSvd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
    }
    if m >= 2 * n {
        // QR first, then the SVD of the small triangular factor
        let qr = a.clone().qr();
        let inner = sorted_svd(&qr.r());
        return SortedSvd {
            u: qr.q() * inner.u,
            sigma: inner.sigma,
            v: inner.v,
        };
    }
    // the nalgebra bidiagonal SVD occasionally returns an inconsistent
    // factorization of rank-deficient input; the transpose or a reflected
    // copy is tried when the reconstruction check fails
    let (u, sigma, v) = raw_svd(a);
    if reconstructs(a, &u, &sigma, &v) {
        return sort_triplets(u, sigma, v);
    }
    let (vt, sigma_t, ut) = raw_svd(&a.transpose());
    if reconstructs(a, &ut, &sigma_t, &vt) {
        return sort_triplets(ut, sigma_t, vt);
    }
    let h = reflector::<T>(n);
    let (u, sigma, w) = raw_svd(&(a * &h));
    sort_triplets(u, sigma, h * w)
}

fn raw_svd<T: Real>(a: &DMatrix<T>) -> (DMatrix<T>, DVector<T>, DMatrix<T>) {
    let svd = nalgebra::SVD::try_new(a.clone(), true, true, T::eps(), 0)
        .unwrap_or_else(|| nalgebra::SVD::new(a.clone(), true, true));
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested Vᵀ").transpose();
    (u, svd.singular_values, v)
}

fn reconstructs<T: Real>(a: &DMatrix<T>, u: &DMatrix<T>, sigma: &DVector<T>, v: &DMatrix<T>) -> bool {
    let mut us = u.clone();
    for (j, s) in sigma.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    let err = (a - us * v.transpose()).norm();
    let dim = T::from_usize(a.nrows().max(a.ncols())).unwrap_or_else(T::one);
    err <= T::lit(64.0) * dim * T::eps() * a.norm()
}

/// Householder reflector `I − 2wwᵀ` for a fixed dense unit vector `w`.
fn reflector<T: Real>(n: usize) -> DMatrix<T> {
    let w = DVector::<T>::from_fn(n, |i, _| T::lit(1.0 + (i as f64 * 0.618_033_988_75).fract()));
    let w = w.normalize();
    DMatrix::identity(n, n) - (&w * w.transpose()) * T::lit(2.0)
}

fn sort_triplets<T: Real>(u: DMatrix<T>, s: DVector<T>, v: DMatrix<T>) -> SortedSvd<T> {
    let k = s.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap_or(std::cmp::Ordering::Equal));
    let sigma = DVector::from_iterator(k, order.iter().map(|&i| s[i]));
    let mut u_sorted = DMatrix::zeros(u.nrows(), k);
    let mut v_sorted = DMatrix::zeros(v.nrows(), k);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
        v_sorted.set_column(dst, &v.column(src));
    }
    SortedSvd {
        u: u_sorted,
        sigma,
        v: v_sorted,
    }
}

/// Minimum-norm least-squares solution of `A X ≈ B`, dropping singular
/// values below `rcond · σ₁`.
pub(crate) fn least_squares<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, rcond: T) -> DMatrix<T> {
    let svd = sorted_svd(a);
    let cut = svd.sigma.get(0).map_or(T::zero(), |&s| s * rcond);
    let mut c = svd.u.transpose() * b;
    for (mut row, &s) in c.row_iter_mut().zip(svd.sigma.iter()) {
        let inv = if s > cut { T::one() / s } else { T::zero() };
        row.scale_mut(inv);
    }
    svd.v * c
}

/// Compact singular value decomposition truncated to numerical rank.
#[derive(Debug, Clone)]
pub struct CompactSvd<T: Real> {
    pub u: SubspaceBasis<T>,
    pub sigma: DVector<T>,
    pub v: SubspaceBasis<T>,
}

impl<T: Real> CompactSvd<T> {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U diag(σ) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<T> {
        let mut us = self.u.matrix().clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.matrix().transpose()
    }
}

/// Compact SVD keeping singular values above `rank_tol · σ₁`.
pub fn svd_compact<T: Real>(a: &DMatrix<T>, rank_tol: f64) -> Result<CompactSvd<T>> {
    if a.is_empty() || max_abs(a) == T::zero() {
        return Err(Error::ZeroMatrix);
    }
    let svd = sorted_svd(a);
    let cut = T::lit(rank_tol) * svd.sigma[0];
    let r = svd.sigma.iter().take_while(|&&s| s > cut).count().max(1);
    Ok(CompactSvd {
        u: SubspaceBasis::new_unchecked(svd.u.columns(0, r).into_owned()),
        sigma: svd.sigma.rows(0, r).into_owned(),
        v: SubspaceBasis::new_unchecked(svd.v.columns(0, r).into_owned()),
    })
}

/// Number of singular values above `rank_tol · σ₁`; zero for a zero matrix.
pub fn numerical_rank<T: Real>(a: &DMatrix<T>, rank_tol: f64) -> usize {
    if a.is_empty() || max_abs(a) == T::zero() {
        return 0;
    }
    let s = sorted_svd(a).sigma;
    let top = s.iter().fold(T::zero(), |m, &v| m.max(v));
    let cut = T::lit(rank_tol) * top;
    s.iter().filter(|&&v| v > cut).count()
}

/// Orthonormal basis for the range of `a` truncated to numerical rank.
pub fn orthonormal_range<T: Real>(a: &DMatrix<T>, rank_tol: f64) -> Result<SubspaceBasis<T>> {
    Ok(svd_compact(a, rank_tol)?.u)
}

/// Closest matrix with orthonormal columns (polar factor). Keeps the
/// coordinate system of `a` when `a` is already nearly orthonormal.
pub fn polar_orthonormalize<T: Real>(a: &DMatrix<T>) -> Result<SubspaceBasis<T>> {
    if a.ncols() > a.nrows() {
        return Err(Error::precondition("polar factor needs a tall matrix"));
    }
    if max_abs(a) == T::zero() {
        return Err(Error::ZeroMatrix);
    }
    let svd = sorted_svd(a);
    let top = svd.sigma[0];
    if svd.sigma[svd.sigma.len() - 1] <= T::lit(DEFAULT_RANK_TOL) * top {
        return Err(Error::RankDeficient);
    }
    Ok(SubspaceBasis::new_unchecked(&svd.u * svd.v.transpose()))
}

/// `(I − P_span(C)) B`. An empty or zero `C` leaves `B` unchanged.
pub fn project_complement<T: Real>(c: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>> {
    if c.nrows() != b.nrows() && c.ncols() > 0 {
        return Err(Error::ShapeMismatch(format!(
            "C has {} rows, B has {}",
            c.nrows(),
            b.nrows()
        )));
    }
    if c.ncols() == 0 || max_abs(c) == T::zero() {
        return Ok(b.clone());
    }
    let q = orthonormal_range(c, DEFAULT_RANK_TOL)?;
    let q = q.matrix();
    let mut e = b - q * (q.transpose() * b);
    // second pass restores orthogonality lost to cancellation
    e -= q * (q.transpose() * &e);
    Ok(e)
}

/// Columns of `a` listed by `idx`, in `idx` order.
pub fn select_columns<T: Real>(a: &DMatrix<T>, idx: &IndexSet) -> Result<DMatrix<T>> {
    if idx.domain_size() != a.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "index set over {} columns applied to matrix with {}",
            idx.domain_size(),
            a.ncols()
        )));
    }
    Ok(a.select_columns(idx.indices()))
}

/// Rows of `a` listed by `idx`, in `idx` order.
pub fn select_rows<T: Real>(a: &DMatrix<T>, idx: &IndexSet) -> Result<DMatrix<T>> {
    if idx.domain_size() != a.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "index set over {} rows applied to matrix with {}",
            idx.domain_size(),
            a.nrows()
        )));
    }
    Ok(a.select_rows(idx.indices()))
}

/// Rejects matrices containing NaN or infinite entries.
pub fn ensure_finite<T: Real>(a: &DMatrix<T>) -> Result<()> {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if !a[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

pub fn max_abs<T: Real>(a: &DMatrix<T>) -> T {
    a.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
}

/// Entrywise ℓ1 norm.
pub fn l1_norm<T: Real>(a: &DMatrix<T>) -> T {
    a.iter().fold(T::zero(), |s, &v| s + v.abs())
}

pub fn nuclear_norm<T: Real>(a: &DMatrix<T>) -> T {
    if a.is_empty() {
        return T::zero();
    }
    sorted_svd(a).sigma.iter().fold(T::zero(), |s, &v| s + v)
}

/// Spectral norm (largest singular value).
pub fn spectral_norm<T: Real>(a: &DMatrix<T>) -> T {
    if a.is_empty() {
        return T::zero();
    }
    sorted_svd(a).sigma.iter().fold(T::zero(), |m, &v| m.max(v))
}

/// `‖a − b‖_F / ‖b‖_F`, the recovery error used throughout the experiments.
pub fn relative_error<T: Real>(estimate: &DMatrix<T>, truth: &DMatrix<T>) -> T {
    let denom = truth.norm();
    let num = (estimate - truth).norm();
    if denom == T::zero() {
        num
    } else {
        num / denom
    }
}

/// Largest principal angle (radians) between the spans of two orthonormal bases.
pub fn max_principal_angle<T: Real>(a: &SubspaceBasis<T>, b: &SubspaceBasis<T>) -> T {
    let m = a.matrix().transpose() * b.matrix();
    if m.is_empty() {
        return T::zero();
    }
    let s = sorted_svd(&m).sigma;
    let smin = s.iter().fold(T::one(), |acc, &v| acc.min(v));
    if a.dim() != b.dim() {
        return T::frac_pi_2();
    }
    smin.min(T::one()).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn sorted_svd_reconstructs_rank_deficient_triangles() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let r = (gaussian(20, 2, &mut rng) * gaussian(2, 8, &mut rng)).qr().r();
            let svd = sorted_svd(&r);
            assert!(reconstructs(&r, &svd.u, &svd.sigma, &svd.v));
            assert!(gram_deviation(&svd.u) < 1e-12);
            assert!(svd.sigma.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn svd_of_diagonal() {
        let a: DMatrix<f64> = dmatrix![1.0, 0.0; 0.0, 3.0];
        let svd = svd_compact(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(svd.rank(), 2);
        assert!((svd.sigma[0] - 3.0).abs() < 1e-14);
        assert!((svd.sigma[1] - 1.0).abs() < 1e-14);
        // leading singular vector is e₂ up to sign
        assert!((svd.u.matrix()[(1, 0)].abs() - 1.0).abs() < 1e-14);
        assert!((svd.v.matrix()[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn svd_of_rank_one_outer_product() {
        let u = DVector::<f64>::from_vec(vec![0.6, 0.8, 0.0]);
        let v = DVector::from_vec(vec![0.0, 1.0]);
        let a = &u * v.transpose();
        let svd = svd_compact(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(svd.rank(), 1);
        assert!((svd.sigma[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn svd_rejects_zero_matrix() {
        let err = svd_compact(&DMatrix::<f64>::zeros(3, 4), DEFAULT_RANK_TOL).unwrap_err();
        assert!(matches!(err, Error::ZeroMatrix));
        assert_eq!(err.to_string(), "zero matrix has no compact SVD");
    }

    #[test]
    fn svd_rank_of_gaussian_product_matches_gram_eigen_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = gaussian(50, 5, &mut rng) * gaussian(5, 50, &mut rng);
        let svd = svd_compact(&a, DEFAULT_RANK_TOL).unwrap();
        // reference: eigenvalues of AᵀA
        let eig = (a.transpose() * &a).symmetric_eigen();
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let gap_rank = ev.iter().filter(|&&e| e > 1e-8 * ev[0]).count();
        assert_eq!(gap_rank, 5);
        assert_eq!(svd.rank(), gap_rank);
        for (i, s) in svd.sigma.iter().enumerate() {
            assert!((s * s - ev[i]).abs() <= 1e-9 * ev[0]);
        }
    }

    #[test]
    fn svd_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(m, n) in &[(7, 4), (4, 9), (20, 20)] {
            let a = gaussian(m, n, &mut rng);
            let svd = svd_compact(&a, DEFAULT_RANK_TOL).unwrap();
            assert!((svd.reconstruct() - &a).norm() <= 1e-10 * a.norm());
            assert!(svd.u.gram_deviation() <= 1e-10);
            assert!(svd.v.gram_deviation() <= 1e-10);
            for w in svd.sigma.as_slice().windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn range_of_duplicate_columns_is_one_dimensional() {
        let a = dmatrix![1.0, 1.0; 2.0, 2.0; -1.0, -1.0];
        let b = orthonormal_range(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(b.dim(), 1);
    }

    #[test]
    fn range_of_identity_is_full() {
        let b = orthonormal_range(&DMatrix::<f64>::identity(6, 6), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(b.dim(), 6);
        assert!(b.gram_deviation() <= 1e-10);
    }

    #[test]
    fn range_of_random_tall_matrix_reproduces_it() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = gaussian(30, 8, &mut rng);
        let b = orthonormal_range(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(b.dim(), 8);
        let resid = &a - b.project(&a);
        assert!(resid.norm() <= 1e-8 * a.norm());
    }

    #[test]
    fn range_rejects_zero_matrix() {
        assert!(orthonormal_range(&DMatrix::<f64>::zeros(2, 2), 1e-8).is_err());
    }

    #[test]
    fn project_complement_cases() {
        let b = dmatrix![1.0; 1.0; 0.0];
        let empty = DMatrix::<f64>::zeros(3, 0);
        assert_eq!(project_complement(&empty, &b).unwrap(), b);

        let c = dmatrix![1.0; 0.0; 0.0];
        let e = project_complement(&c, &b).unwrap();
        assert!((e - dmatrix![0.0; 1.0; 0.0]).norm() < 1e-15);

        let inside = dmatrix![2.0, -1.0; 0.0, 0.0; 0.0, 0.0];
        let e = project_complement(&c, &inside).unwrap();
        assert!(e.norm() <= 1e-10 * inside.norm());
    }

    #[test]
    fn project_complement_is_idempotent_and_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = gaussian(12, 3, &mut rng);
        let b = gaussian(12, 6, &mut rng);
        let once = project_complement(&c, &b).unwrap();
        let twice = project_complement(&c, &once).unwrap();
        assert!((&twice - &once).norm() <= 1e-12 * once.norm());
        let cross = c.transpose() * &once;
        assert!(cross.norm() <= 1e-10 * c.norm() * b.norm());
    }

    #[test]
    fn selection_follows_index_order() {
        let a = DMatrix::<f64>::identity(3, 3);
        let first = select_columns(&a, &IndexSet::new(vec![0], 3).unwrap()).unwrap();
        assert_eq!(first, dmatrix![1.0; 0.0; 0.0]);
        let swapped = select_columns(&a, &IndexSet::new(vec![2, 0], 3).unwrap()).unwrap();
        assert_eq!(swapped, dmatrix![0.0, 1.0; 0.0, 0.0; 1.0, 0.0]);
        assert_eq!(select_columns(&a, &IndexSet::full(3)).unwrap(), a);
        let rows = select_rows(&a, &IndexSet::new(vec![1], 3).unwrap()).unwrap();
        assert_eq!(rows, dmatrix![0.0, 1.0, 0.0]);
    }

    #[test]
    fn index_set_invariants() {
        assert!(IndexSet::new(vec![0, 0], 3).is_err());
        assert!(IndexSet::new(vec![3], 3).is_err());
        let mut s = IndexSet::new(vec![2], 4).unwrap();
        assert!(s.push(0));
        assert!(!s.push(2));
        assert!(!s.push(9));
        assert_eq!(s.indices(), &[2, 0]);
        assert_eq!(s.complement(), vec![1, 3]);
    }

    #[test]
    fn subspace_basis_rejects_non_orthonormal() {
        assert!(SubspaceBasis::new(dmatrix![1.0, 1.0; 0.0, 1.0]).is_err());
        assert!(SubspaceBasis::new(dmatrix![1.0; 0.0]).is_ok());
    }

    #[test]
    fn complement_basis_is_orthogonal() {
        let b = SubspaceBasis::new(dmatrix![1.0; 0.0; 0.0]).unwrap();
        let c = b.complement().unwrap();
        assert_eq!(c.dim(), 2);
        assert!((b.matrix().transpose() * c.matrix()).norm() < 1e-14);
        let full = SubspaceBasis::new(DMatrix::<f64>::identity(2, 2)).unwrap();
        assert!(matches!(full.complement(), Err(Error::EmptyComplement)));
    }

    #[test]
    fn works_in_single_precision() {
        let a = nalgebra::dmatrix![3.0f32, 0.0; 0.0, 1.0];
        let svd = svd_compact(&a, 1e-6).unwrap();
        assert_eq!(svd.rank(), 2);
        assert!((svd.sigma[0] - 3.0).abs() < 1e-6);
    }
}
