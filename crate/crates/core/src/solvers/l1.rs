//! Least absolute deviations regression `min_x ‖b − A x‖₁`.
//!
//! Solved exactly by descent over vertices: a vertex is a set `Z` of
//! `k = cols(A)` rows with zero residual and nonsingular `A_Z`. At each
//! vertex the dual vector `s` (signs of the nonzero residuals, completed on
//! `Z` so that `Aᵀs = 0`) is computed; the vertex is optimal iff
//! `|s_Z| ≤ 1`. Otherwise one row leaves `Z` along the edge that decreases
//! the objective and the entering row is found by an exact weighted-median
//! line search. The dual vector is returned as an optimality certificate.
//!
//! Degenerate vertices are avoided by solving with a tiny deterministic
//! perturbation of `b`; the final coefficients are recomputed from the
//! unperturbed right-hand side on the optimal row set.

use crate::error::{Error, Result};
use crate::matrix::{least_squares, numerical_rank};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Config {
    /// Bound on `‖Aᵀs‖_∞` for the subgradient certificate.
    pub opt_tol: f64,
    /// Hard cap on vertex pivots per column.
    pub max_pivots: usize,
    /// Relative singular value cutoff for the full-column-rank check.
    pub rank_tol: f64,
    /// Solve columns on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for L1Config {
    fn default() -> Self {
        L1Config {
            opt_tol: 1e-6,
            max_pivots: 100_000,
            rank_tol: 1e-10,
            parallel: true,
        }
    }
}

/// Per-column solution with its optimality certificate.
#[derive(Debug, Clone)]
pub struct L1Solution<T: Real> {
    pub x: DVector<T>,
    /// Dual vector `s` with `s ∈ ∂‖b − Ax‖₁` (up to zero-residual rows) and `Aᵀs ≈ 0`.
    pub dual: DVector<T>,
    /// Rows with zero residual defining the optimal vertex.
    pub basis: Vec<usize>,
    pub objective: T,
    pub pivots: usize,
}

/// Checks a certificate: `s` must be a subgradient of `‖r‖₁` (rows with
/// `|rᵢ| ≤ zero_tol` may take any value in `[-1, 1]`). Returns `‖Aᵀs‖_∞`, or
/// `None` if `s` is not a valid subgradient.
pub fn certificate_gap<T: Real>(
    a: &DMatrix<T>,
    residual: &DVector<T>,
    dual: &DVector<T>,
    zero_tol: T,
) -> Option<T> {
    let slack = T::lit(1e-9);
    for (r, s) in residual.iter().zip(dual.iter()) {
        if s.abs() > T::one() + slack {
            return None;
        }
        if r.abs() > zero_tol && (*s - r.signum()).abs() > slack {
            return None;
        }
    }
    Some((a.transpose() * dual).amax())
}

fn check_full_rank<T: Real>(a: &DMatrix<T>, cfg: &L1Config) -> Result<()> {
    let (m, k) = a.shape();
    if k == 0 {
        return Ok(());
    }
    if m < k || numerical_rank(a, cfg.rank_tol) < k {
        return Err(Error::RankDeficient);
    }
    Ok(())
}

/// `X` minimizing `Σ_j ‖b_j − A x_j‖₁`, one independent problem per column of `B`.
pub fn l1_fit<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, cfg: &L1Config) -> Result<DMatrix<T>> {
    let sols = l1_fit_detailed(a, b, cfg)?;
    let mut x = DMatrix::zeros(a.ncols(), b.ncols());
    for (j, s) in sols.into_iter().enumerate() {
        x.set_column(j, &s.x);
    }
    Ok(x)
}

/// Like [`l1_fit`] but returns the per-column certificates.
pub fn l1_fit_detailed<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    cfg: &L1Config,
) -> Result<Vec<L1Solution<T>>> {
    if a.nrows() != b.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "A has {} rows, B has {}",
            a.nrows(),
            b.nrows()
        )));
    }
    check_full_rank(a, cfg)?;
    let solve = |j: usize| solve_column(a, &b.column(j).into_owned(), cfg);
    if cfg.parallel && b.ncols() > 1 {
        (0..b.ncols()).into_par_iter().map(solve).collect()
    } else {
        (0..b.ncols()).map(solve).collect()
    }
}

/// Single right-hand side.
pub fn l1_fit_vector<T: Real>(a: &DMatrix<T>, b: &DVector<T>, cfg: &L1Config) -> Result<L1Solution<T>> {
    if a.nrows() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "A has {} rows, b has {}",
            a.nrows(),
            b.len()
        )));
    }
    check_full_rank(a, cfg)?;
    solve_column(a, b, cfg)
}

/// Deterministic perturbation pattern in `±[0.5, 1]`.
fn jitter(i: usize) -> f64 {
    let mut h = (i as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^= h >> 31;
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    let mag = 0.5 + 0.5 * u;
    if h & 1 == 0 {
        mag
    } else {
        -mag
    }
}

/// Picks `k` rows with small least-squares residual whose rows of `A` are
/// well conditioned, as the starting vertex.
fn initial_basis<T: Real>(a: &DMatrix<T>, b: &DVector<T>) -> Result<Vec<usize>> {
    let (m, k) = a.shape();
    let x_ls = least_squares(a, &DMatrix::from_column_slice(m, 1, b.as_slice()), T::lit(1e-12));
    let x_ls = x_ls.column(0);
    let r = b - a * x_ls;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        r[i].abs()
            .partial_cmp(&r[j].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    for &thresh in &[1e-3, 1e-8, 1e-12] {
        let thresh = T::lit(thresh);
        let mut chosen = Vec::with_capacity(k);
        let mut q: Vec<DVector<T>> = Vec::with_capacity(k);
        for &i in &order {
            let row = a.row(i).transpose();
            let rn = row.norm();
            if rn == T::zero() {
                continue;
            }
            let mut v = row.clone();
            for _ in 0..2 {
                for qv in &q {
                    let c = qv.dot(&v);
                    v.axpy(-c, qv, T::one());
                }
            }
            let vn = v.norm();
            if vn > thresh * rn {
                q.push(v / vn);
                chosen.push(i);
                if chosen.len() == k {
                    return Ok(chosen);
                }
            }
        }
    }
    Err(Error::RankDeficient)
}

fn solve_column<T: Real>(a: &DMatrix<T>, b: &DVector<T>, cfg: &L1Config) -> Result<L1Solution<T>> {
    let (m, k) = a.shape();
    if k == 0 {
        return Ok(L1Solution {
            x: DVector::zeros(0),
            dual: b.map(|v| v.signum()),
            basis: Vec::new(),
            objective: b.iter().fold(T::zero(), |s, v| s + v.abs()),
            pivots: 0,
        });
    }
    let scale = b.amax();
    let eps = T::lit(1e-9) * scale;
    let bp = DVector::from_fn(m, |i, _| b[i] + eps * T::lit(jitter(i)));

    let mut basis = initial_basis(a, &bp)?;
    let mut in_basis = vec![false; m];
    for &i in &basis {
        in_basis[i] = true;
    }

    let mut pivots = 0;
    let mut blocked: Vec<bool> = vec![false; k];
    let (inv, x, dual) = loop {
        let az = a.select_rows(&basis);
        let inv = az.try_inverse().ok_or(Error::RankDeficient)?;
        let bz = DVector::from_iterator(k, basis.iter().map(|&i| bp[i]));
        let x = &inv * bz;
        let mut r = &bp - a * &x;
        for &i in &basis {
            r[i] = T::zero();
        }
        let mut s = r.map(|v| if v > T::zero() { T::one() } else if v < T::zero() { -T::one() } else { T::zero() });
        for &i in &basis {
            s[i] = T::zero();
        }
        // A_Zᵀ s_Z = −A_Nᵀ s_N
        let g = -(a.transpose() * &s);
        let s_z = inv.transpose() * g;
        for (p, &i) in basis.iter().enumerate() {
            s[i] = s_z[p];
        }

        // leaving candidate: largest dual violation not known to be blocked
        let mut leave: Option<usize> = None;
        let mut worst = T::one() + T::lit(1e-11);
        for p in 0..k {
            if !blocked[p] && s_z[p].abs() > worst {
                worst = s_z[p].abs();
                leave = Some(p);
            }
        }
        let Some(p) = leave else {
            break (inv, x, s);
        };
        if pivots >= cfg.max_pivots {
            return Err(Error::NotConverged {
                iterations: pivots,
                residual: f64::NAN,
            });
        }

        let sigma = -s_z[p].signum();
        let d = inv.column(p) * sigma;
        let c = a * &d;
        let mut slope = T::one();
        let mut breaks: Vec<(T, usize)> = Vec::new();
        for i in 0..m {
            if in_basis[i] {
                continue;
            }
            let ci = c[i];
            if ci == T::zero() {
                continue;
            }
            if r[i] == T::zero() {
                slope += ci.abs();
                continue;
            }
            slope -= ci * r[i].signum();
            let t = r[i] / ci;
            if t > T::zero() {
                breaks.push((t, i));
            }
        }
        if slope >= T::zero() {
            // degenerate edge; try another leaving row
            blocked[p] = true;
            continue;
        }
        breaks.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal).then(x.1.cmp(&y.1)));
        let mut enter = None;
        for &(_, i) in &breaks {
            slope += T::lit(2.0) * c[i].abs();
            if slope >= T::zero() {
                enter = Some(i);
                break;
            }
        }
        let Some(i_in) = enter else {
            // objective unbounded below is impossible; treat as numerical stall
            blocked[p] = true;
            continue;
        };
        in_basis[basis[p]] = false;
        in_basis[i_in] = true;
        basis[p] = i_in;
        blocked.iter_mut().for_each(|f| *f = false);
        pivots += 1;
    };
    let _ = x;

    // coefficients from the unperturbed data on the optimal row set
    let bz = DVector::from_iterator(k, basis.iter().map(|&i| b[i]));
    let x = &inv * bz;
    let r = b - a * &x;
    let objective = r.iter().fold(T::zero(), |acc, v| acc + v.abs());
    Ok(L1Solution {
        x,
        dual,
        basis,
        objective,
        pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
    }

    fn l1(v: &DVector<f64>) -> f64 {
        v.iter().map(|x| x.abs()).sum()
    }

    /// Brute force over all k-row subsets: the optimum of an LAD problem is
    /// attained at a vertex where k residuals vanish.
    fn vertex_enumeration(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
        let (m, k) = a.shape();
        let mut best = (DVector::zeros(k), f64::INFINITY);
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            if let Some(inv) = a.select_rows(&idx).try_inverse() {
                let x = inv * DVector::from_iterator(k, idx.iter().map(|&i| b[i]));
                let obj = l1(&(b - a * &x));
                if obj < best.1 {
                    best = (x, obj);
                }
            }
            // next combination
            let mut p = k;
            while p > 0 && idx[p - 1] == m - k + p - 1 {
                p -= 1;
            }
            if p == 0 {
                break;
            }
            idx[p - 1] += 1;
            for q in p..k {
                idx[q] = idx[q - 1] + 1;
            }
        }
        best
    }

    #[test]
    fn exact_fit_recovers_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = gaussian(15, 3, &mut rng);
        let x0 = gaussian(3, 4, &mut rng);
        let x = l1_fit(&a, &(&a * &x0), &L1Config::default()).unwrap();
        assert!((x - x0).amax() <= 1e-8);
    }

    #[test]
    fn identity_design_returns_rhs() {
        let b = dmatrix![1.0, -2.0; 3.0, 0.5; -4.0, 7.0];
        let x = l1_fit(&DMatrix::identity(3, 3), &b, &L1Config::default()).unwrap();
        assert!((x - b).amax() <= 1e-12);
    }

    #[test]
    fn single_corruption_on_orthonormal_design_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gaussian(10, 2, &mut rng).qr().q();
        let q = DVector::from_vec(vec![0.7, -1.3]);
        for pos in 0..10 {
            let mut b = &a * &q;
            b[pos] += 4.0;
            let sol = l1_fit_vector(&a, &b, &L1Config::default()).unwrap();
            let (x_ref, obj_ref) = vertex_enumeration(&a, &b);
            assert!((sol.objective - obj_ref).abs() <= 1e-10);
            assert!((&sol.x - &x_ref).amax() <= 1e-8);
            assert!((&sol.x - &q).amax() <= 1e-8, "corruption at {pos}");
        }
    }

    #[test]
    fn agrees_with_enumeration_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let a = gaussian(9, 3, &mut rng);
            let b = DVector::from_fn(9, |_, _| StandardNormal.sample(&mut rng));
            let sol = l1_fit_vector(&a, &b, &L1Config::default()).unwrap();
            let (_, obj_ref) = vertex_enumeration(&a, &b);
            assert!((sol.objective - obj_ref).abs() <= 1e-10 * (1.0 + obj_ref));
        }
    }

    #[test]
    fn certificate_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = gaussian(40, 5, &mut rng);
        let b = DVector::from_fn(40, |_, _| rng.random::<f64>() * 10.0 - 5.0);
        let sol = l1_fit_vector(&a, &b, &L1Config::default()).unwrap();
        let r = &b - &a * &sol.x;
        let gap = certificate_gap(&a, &r, &sol.dual, 1e-8).expect("valid subgradient");
        assert!(gap <= 1e-6);
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let a = dmatrix![1.0, 2.0; 2.0, 4.0; 3.0, 6.0];
        let b = dmatrix![1.0; 2.0; 3.0];
        let err = l1_fit(&a, &b, &L1Config::default()).unwrap_err();
        assert_eq!(err.to_string(), "design matrix rank-deficient");
    }

    #[test]
    fn local_perturbations_do_not_improve() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = gaussian(25, 4, &mut rng);
        let b = gaussian(25, 3, &mut rng);
        let x = l1_fit(&a, &b, &L1Config::default()).unwrap();
        for j in 0..3 {
            let bj = b.column(j).into_owned();
            let xj = x.column(j).into_owned();
            let base = l1(&(&bj - &a * &xj));
            for _ in 0..100 {
                let dx = DVector::from_fn(4, |_, _| { let g: f64 = StandardNormal.sample(&mut rng); 1e-3 * g });
                assert!(base <= l1(&(&bj - &a * (&xj + dx))) + 1e-12);
            }
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = gaussian(30, 4, &mut rng);
        let b = gaussian(30, 16, &mut rng);
        let par = l1_fit(&a, &b, &L1Config::default()).unwrap();
        let seq = l1_fit(&a, &b, &L1Config { parallel: false, ..L1Config::default() }).unwrap();
        assert_eq!(par, seq);
    }
}
