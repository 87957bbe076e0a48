//! Leading singular triplets by block subspace iteration with Rayleigh-Ritz
//! extraction. Used by singular value thresholding when only the few
//! singular values above the threshold are needed.

use super::sorted_svd;
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub(crate) struct Triplets<T: Real> {
    pub u: DMatrix<T>,
    pub sigma: DVector<T>,
    pub v: DMatrix<T>,
    /// True when every returned triplet passed the residual test.
    pub converged: bool,
}

fn orth<T: Real>(a: DMatrix<T>) -> DMatrix<T> {
    let k = a.ncols();
    let q = a.qr().q();
    q.columns(0, k).into_owned()
}

/// Top `k` singular triplets of `a`, warm-started from `warm` (right
/// singular vector guesses) when supplied. Iterates until the residual
/// `‖(I − QQᵀ) A vᵢ‖` is at most `tol · σ₁` for every triplet whose singular
/// value exceeds `floor`.
pub(crate) fn top_singular_triplets<T: Real>(
    a: &DMatrix<T>,
    k: usize,
    warm: Option<&DMatrix<T>>,
    floor: T,
    tol: f64,
    max_iter: usize,
) -> Triplets<T> {
    let (m, n) = a.shape();
    let kmax = m.min(n);
    let k = k.clamp(1, kmax);
    let block = (k + (k / 4).max(8)).min(kmax);

    let mut omega = DMatrix::<T>::zeros(n, block);
    let mut filled = 0;
    if let Some(w) = warm {
        if w.nrows() == n {
            let take = w.ncols().min(block);
            omega.columns_mut(0, take).copy_from(&w.columns(0, take));
            filled = take;
        }
    }
    if filled < block {
        // fixed seed keeps the solver a pure function of its inputs
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + (n as u64) * 31 + block as u64);
        for j in filled..block {
            for i in 0..n {
                omega[(i, j)] = T::lit(StandardNormal.sample(&mut rng));
            }
        }
    }

    let mut q = orth(a * &omega);
    let tol_t = T::lit(tol);
    let mut best: Option<Triplets<T>> = None;
    for _ in 0..max_iter.max(1) {
        let z = orth(a.transpose() * &q);
        q = orth(a * &z);
        let b = q.transpose() * a;
        let svd = sorted_svd(&b);
        let u = &q * svd.u.columns(0, k);
        let v = svd.v.columns(0, k).into_owned();
        let sigma = svd.sigma.rows(0, k).into_owned();
        let av = a * &v;
        let leak = &av - &q * (q.transpose() * &av);
        let top = sigma[0].max(T::tiny());
        let worst = (0..k)
            .filter(|&j| sigma[j] > floor)
            .map(|j| leak.column(j).norm())
            .fold(T::zero(), |acc, x| acc.max(x));
        let converged = worst <= tol_t * top;
        best = Some(Triplets {
            u,
            sigma,
            v,
            converged,
        });
        if converged {
            break;
        }
    }
    best.expect("at least one iteration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::sorted_svd;

    #[test]
    fn matches_full_svd_on_low_rank_plus_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = |m: usize, n: usize, rng: &mut ChaCha8Rng| {
            DMatrix::<f64>::from_fn(m, n, |_, _| StandardNormal.sample(rng))
        };
        let a = g(300, 4, &mut rng) * g(4, 250, &mut rng) * 10.0 + g(300, 250, &mut rng) * 0.01;
        let full = sorted_svd(&a);
        let t = top_singular_triplets(&a, 4, None, 0.0, 1e-12, 50);
        assert!(t.converged);
        for j in 0..4 {
            assert!((t.sigma[j] - full.sigma[j]).abs() <= 1e-10 * full.sigma[0]);
        }
    }
}
