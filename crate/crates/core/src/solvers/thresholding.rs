//! Proximal operators of the ℓ1 and nuclear norms.

use crate::matrix::{sorted_svd, top_singular_triplets};
use crate::scalar::Real;
use nalgebra::DMatrix;

/// Elementwise soft thresholding `sign(x) · max(|x| − t, 0)`.
pub fn soft_threshold<T: Real>(x: &DMatrix<T>, t: T) -> DMatrix<T> {
    x.map(|v| {
        if v > t {
            v - t
        } else if v < -t {
            v + t
        } else {
            T::zero()
        }
    })
}

/// Below this smaller dimension a dense SVD is cheaper than subspace iteration.
const DENSE_SVD_LIMIT: usize = 256;

/// Carries the rank prediction and warm start between successive
/// thresholding calls inside an iterative solver.
#[derive(Debug, Clone)]
pub(crate) struct SvtState<T: Real> {
    predicted: usize,
    warm: Option<DMatrix<T>>,
    /// Nuclear norm of the last thresholded output.
    pub nuclear: T,
}

impl<T: Real> SvtState<T> {
    pub fn new() -> Self {
        SvtState {
            predicted: 10,
            warm: None,
            nuclear: T::zero(),
        }
    }
}

/// Singular value thresholding `U (Σ − t)₊ Vᵀ` with the number of retained
/// singular values.
pub fn singular_value_threshold<T: Real>(x: &DMatrix<T>, t: T) -> (DMatrix<T>, usize) {
    let (y, keep, _) = svt_dense(x, t);
    (y, keep)
}

fn shrunk_sum<T: Real>(sigma: &nalgebra::DVector<T>, keep: usize, t: T) -> T {
    sigma.iter().take(keep).fold(T::zero(), |acc, &s| acc + (s - t))
}

fn svt_dense<T: Real>(x: &DMatrix<T>, t: T) -> (DMatrix<T>, usize, T) {
    let (m, n) = x.shape();
    if x.is_empty() {
        return (x.clone(), 0, T::zero());
    }
    if m >= 2 * n {
        return svt_tall(x, t);
    }
    if n >= 2 * m {
        let (y, keep, nuc) = svt_tall(&x.transpose(), t);
        return (y.transpose(), keep, nuc);
    }
    let svd = sorted_svd(x);
    let keep = svd.sigma.iter().take_while(|&&s| s > t).count();
    let nuc = shrunk_sum(&svd.sigma, keep, t);
    (assemble(&svd.u, &svd.sigma, &svd.v, keep, t, m, n), keep, nuc)
}

/// Tall input: the right singular vectors come from the triangular QR
/// factor, and `X V diag(1 − t/σ) Vᵀ` avoids forming the left ones.
fn svt_tall<T: Real>(x: &DMatrix<T>, t: T) -> (DMatrix<T>, usize, T) {
    let (m, n) = x.shape();
    let svd = sorted_svd(&x.clone().qr().r());
    let keep = svd.sigma.iter().take_while(|&&s| s > t).count();
    let nuc = shrunk_sum(&svd.sigma, keep, t);
    if keep == 0 {
        return (DMatrix::zeros(m, n), 0, nuc);
    }
    let v = svd.v.columns(0, keep);
    let mut vs = v.into_owned();
    for j in 0..keep {
        vs.column_mut(j).scale_mut(T::one() - t / svd.sigma[j]);
    }
    ((x * vs) * v.transpose(), keep, nuc)
}

fn assemble<T: Real>(
    u: &DMatrix<T>,
    sigma: &nalgebra::DVector<T>,
    v: &DMatrix<T>,
    keep: usize,
    t: T,
    m: usize,
    n: usize,
) -> DMatrix<T> {
    if keep == 0 {
        return DMatrix::zeros(m, n);
    }
    let mut us = u.columns(0, keep).into_owned();
    for j in 0..keep {
        us.column_mut(j).scale_mut(sigma[j] - t);
    }
    us * v.columns(0, keep).transpose()
}

/// Thresholding that switches to partial SVD on large inputs, growing the
/// requested number of triplets until one falls below the threshold.
pub(crate) fn svt_adaptive<T: Real>(
    x: &DMatrix<T>,
    t: T,
    state: &mut SvtState<T>,
) -> (DMatrix<T>, usize) {
    let (m, n) = x.shape();
    let kmax = m.min(n);
    if kmax <= DENSE_SVD_LIMIT {
        let (y, keep, nuc) = svt_dense(x, t);
        state.nuclear = nuc;
        return (y, keep);
    }
    let mut k = state.predicted.clamp(1, kmax);
    loop {
        let trip = top_singular_triplets(x, k, state.warm.as_ref(), t, 1e-11, 200);
        let keep = trip.sigma.iter().take_while(|&&s| s > t).count();
        if keep < k || k == kmax {
            if !trip.converged && kmax <= 4 * DENSE_SVD_LIMIT {
                let (y, keep, nuc) = svt_dense(x, t);
                state.nuclear = nuc;
                return (y, keep);
            }
            // Lin-Chen-Ma style prediction of the next rank
            state.predicted = if keep < state.predicted {
                (keep + 1).min(kmax)
            } else {
                (keep + ((0.05 * kmax as f64).round() as usize).max(1)).min(kmax)
            };
            let out = assemble(&trip.u, &trip.sigma, &trip.v, keep, t, m, n);
            state.nuclear = shrunk_sum(&trip.sigma, keep, t);
            state.warm = Some(trip.v);
            return (out, keep);
        }
        k = (2 * k).min(kmax);
        if k > kmax / 2 {
            let (y, keep, nuc) = svt_dense(x, t);
            state.nuclear = nuc;
            return (y, keep);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn soft_threshold_at_zero_is_identity() {
        let x = dmatrix![1.5, -2.0; 0.0, 3.25];
        assert_eq!(soft_threshold(&x, 0.0), x);
        assert_eq!(soft_threshold(&x, 1.0), dmatrix![0.5, -1.0; 0.0, 2.25]);
    }

    #[test]
    fn svt_at_zero_reproduces_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::<f64>::from_fn(7, 5, |_, _| StandardNormal.sample(&mut rng));
        let (y, k) = singular_value_threshold(&x, 0.0);
        assert_eq!(k, 5);
        assert!((y - &x).norm() < 1e-12 * x.norm());
    }

    #[test]
    fn svt_shrinks_diagonal() {
        let x = dmatrix![3.0, 0.0; 0.0, 1.0];
        let (y, k) = singular_value_threshold(&x, 2.0);
        assert_eq!(k, 1);
        assert!((y - dmatrix![1.0, 0.0; 0.0, 0.0]).norm() < 1e-14);
    }

    #[test]
    fn adaptive_matches_dense_on_large_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut g = |m: usize, n: usize| {
            DMatrix::<f64>::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
        };
        let x = g(400, 3) * g(3, 300) + g(400, 300) * 0.05;
        let t = 5.0;
        let (dense, kd, _) = svt_dense(&x, t);
        let mut st = SvtState::new();
        st.predicted = 1;
        let (fast, kf) = svt_adaptive(&x, t, &mut st);
        assert_eq!(kd, kf);
        assert!((dense - fast).norm() <= 1e-9 * x.norm());
    }
}
