//! Noise-budgeted ℓ1 regression
//! `min ‖B − A X − E‖₁  s.t.  ‖E‖_F ≤ δ`.
//!
//! For a fixed multiplier the inner minimization over `E` clips the residual
//! at a common level `θ`, which turns the problem into Huber regression with
//! threshold `θ`. The returned pair corresponds to the `θ` at which the
//! clipped residual has Frobenius norm `δ`, located by bisection.

use super::l1::{l1_fit, L1Config};
use crate::error::{Error, Result};
use crate::matrix::least_squares;
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

fn clip<T: Real>(v: T, theta: T) -> T {
    if v > theta {
        theta
    } else if v < -theta {
        -theta
    } else {
        v
    }
}

fn huber<T: Real>(r: &DVector<T>, theta: T) -> T {
    let half = T::lit(0.5);
    r.iter().fold(T::zero(), |acc, &v| {
        let a = v.abs();
        acc + if a <= theta { half * a * a } else { theta * a - half * theta * theta }
    })
}

/// Minimizes `Σ huber_θ(bᵢ − aᵢᵀx)` by damped semismooth Newton from `x0`.
fn huber_column<T: Real>(a: &DMatrix<T>, b: &DVector<T>, theta: T, x0: DVector<T>) -> DVector<T> {
    let k = a.ncols();
    let mut x = x0;
    let ridge = T::lit(1e-12) * a.norm_squared().max(T::tiny());
    let gscale = theta * a.norm() + T::tiny();
    for _ in 0..200 {
        let r = b - a * &x;
        let psi = r.map(|v| clip(v, theta));
        let grad = a.transpose() * &psi;
        if grad.amax() <= T::lit(1e-13) * gscale {
            break;
        }
        let mut h = DMatrix::<T>::zeros(k, k);
        for i in 0..a.nrows() {
            if r[i].abs() <= theta {
                let row = a.row(i);
                h.ger(T::one(), &row.transpose(), &row.transpose(), T::one());
            }
        }
        for j in 0..k {
            h[(j, j)] += ridge;
        }
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.clone(),
        };
        let f0 = huber(&r, theta);
        let slope = grad.dot(&step);
        let mut t = T::one();
        let mut moved = false;
        for _ in 0..60 {
            let xn = &x + &step * t;
            let fn_ = huber(&(b - a * &xn), theta);
            if fn_ <= f0 - T::lit(1e-4) * t * slope {
                x = xn;
                moved = true;
                break;
            }
            t *= T::lit(0.5);
        }
        if !moved {
            break;
        }
    }
    x
}

fn solve_all<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, theta: T, warm: &DMatrix<T>) -> DMatrix<T> {
    let cols: Vec<DVector<T>> = (0..b.ncols())
        .into_par_iter()
        .map(|j| {
            huber_column(
                a,
                &b.column(j).into_owned(),
                theta,
                warm.column(j).into_owned(),
            )
        })
        .collect();
    let mut x = DMatrix::zeros(a.ncols(), b.ncols());
    for (j, c) in cols.into_iter().enumerate() {
        x.set_column(j, &c);
    }
    x
}

fn clipped_norm_sq<T: Real>(r: &DMatrix<T>, theta: T) -> T {
    r.iter().fold(T::zero(), |acc, &v| {
        let c = v.abs().min(theta);
        acc + c * c
    })
}

/// Solves the noise-budgeted regression, returning `(X, E)`.
pub fn l1_fit_noisy<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    delta_n: f64,
    cfg: &L1Config,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    if !(delta_n >= 0.0) || !delta_n.is_finite() {
        return Err(Error::precondition("delta_n must be a finite nonnegative number"));
    }
    let x1 = l1_fit(a, b, cfg)?;
    if delta_n == 0.0 {
        return Ok((x1, DMatrix::zeros(b.nrows(), b.ncols())));
    }
    let delta = T::lit(delta_n);
    let r1 = b - a * &x1;
    if r1.norm() <= delta {
        // the ℓ1 fit already leaves a residual inside the budget
        return Ok((x1, r1));
    }
    let x_ls = least_squares(a, b, T::lit(1e-14));
    let r_ls = b - a * &x_ls;
    if r_ls.norm() <= delta {
        return Ok((x_ls, r_ls));
    }

    // Φ(θ) = ‖clip(R(θ), θ)‖² grows from 0 to ‖R_ls‖² as θ runs up to max|R_ls|.
    let target = delta * delta;
    let mut lo = T::zero();
    let mut hi = r_ls.amax();
    let mut x_lo = x1.clone();
    let mut x_hi = x_ls;
    let mut theta = hi;
    for _ in 0..80 {
        theta = if lo > T::zero() {
            (lo * hi).sqrt()
        } else {
            hi * T::lit(0.5)
        };
        let warm = if theta * T::lit(2.0) < hi { &x_lo } else { &x_hi };
        let x = solve_all(a, b, theta, warm);
        let phi = clipped_norm_sq(&(b - a * &x), theta);
        if phi > target {
            hi = theta;
            x_hi = x;
        } else {
            lo = theta;
            x_lo = x;
        }
        if hi - lo <= T::lit(1e-12) * hi {
            break;
        }
    }
    let _ = theta;
    // take the feasible side so the budget holds exactly
    let (theta, x) = if lo > T::zero() { (lo, x_lo) } else { (T::zero(), x1) };
    let r = b - a * &x;
    let e = r.map(|v| clip(v, theta));
    Ok((x, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn zero_budget_is_plain_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = gaussian(20, 3, &mut rng);
        let b = gaussian(20, 2, &mut rng);
        let cfg = L1Config::default();
        let (x, e) = l1_fit_noisy(&a, &b, 0.0, &cfg).unwrap();
        assert_eq!(x, l1_fit(&a, &b, &cfg).unwrap());
        assert_eq!(e.amax(), 0.0);
    }

    #[test]
    fn noisy_fit_is_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = gaussian(40, 4, &mut rng);
        let x0 = gaussian(4, 3, &mut rng);
        let n = gaussian(40, 3, &mut rng) * 1e-2;
        let b = &a * &x0 + &n;
        let delta = n.norm();
        let (x, e) = l1_fit_noisy(&a, &b, delta, &L1Config::default()).unwrap();
        assert!(e.norm() <= delta * (1.0 + 1e-12));
        let smin = a.singular_values().min();
        assert!((x - x0).norm() <= 10.0 * delta / smin);
    }

    #[test]
    fn budget_is_active_with_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gaussian(30, 3, &mut rng);
        let mut b = &a * gaussian(3, 1, &mut rng) + gaussian(30, 1, &mut rng) * 0.05;
        b[(4, 0)] += 10.0;
        let delta = 0.1;
        let (x, e) = l1_fit_noisy(&a, &b, delta, &L1Config::default()).unwrap();
        assert!((e.norm() - delta).abs() <= 1e-8);
        // objective no worse than plain fit with E = 0
        let obj = |x: &DMatrix<f64>, e: &DMatrix<f64>| (&b - &a * x - e).abs().sum();
        let x1 = l1_fit(&a, &b, &L1Config::default()).unwrap();
        assert!(obj(&x, &e) <= obj(&x1, &DMatrix::zeros(30, 1)) + 1e-12);
    }

    #[test]
    fn exact_data_with_large_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = gaussian(12, 2, &mut rng);
        let x0 = gaussian(2, 2, &mut rng);
        let b = &a * &x0;
        let (x, e) = l1_fit_noisy(&a, &b, 1e6, &L1Config::default()).unwrap();
        assert!((x - x0).amax() <= 1e-8);
        assert!(e.amax() <= 1e-10);
    }
}
