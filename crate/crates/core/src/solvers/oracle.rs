//! Basis-pursuit form of the sketched ℓ1 regression, solved by an
//! independent dense simplex method. Only used to cross-check [`l1_fit`].
//!
//! With `P` an orthonormal basis of the complement of `span(U)`,
//! `min_q ‖d − U q‖₁` equals `min ‖z‖₁ s.t. Pᵀz = Pᵀd` and the minimizers are
//! related by `z = d − U q`.
//!
//! [`l1_fit`]: super::l1_fit

use crate::error::{Error, Result};
use crate::matrix::SubspaceBasis;
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};

/// `ẑ = argmin ‖z‖₁  s.t.  Pᵀz = Pᵀd` where `P` spans the complement of `u`.
pub fn bp_residual_oracle<T: Real>(u: &SubspaceBasis<T>, d: &DVector<T>) -> Result<DVector<T>> {
    if d.len() != u.ambient_dim() {
        return Err(Error::ShapeMismatch(format!(
            "basis has {} rows, vector has {}",
            u.ambient_dim(),
            d.len()
        )));
    }
    let p = u.complement()?;
    let pt = p.matrix().transpose();
    let (rows, m) = pt.shape();
    // z = z⁺ − z⁻ with both parts nonnegative
    let mut a_eq = DMatrix::<T>::zeros(rows, 2 * m);
    a_eq.columns_mut(0, m).copy_from(&pt);
    a_eq.columns_mut(m, m).copy_from(&(-&pt));
    let rhs = &pt * d;
    let cost = DVector::from_element(2 * m, T::one());
    let w = simplex_min(&a_eq, &rhs, &cost)?;
    Ok(DVector::from_fn(m, |i, _| w[i] - w[m + i]))
}

/// `min cᵀx  s.t.  A x = b, x ≥ 0` by the two-phase tableau method with
/// Bland's rule.
pub(crate) fn simplex_min<T: Real>(a: &DMatrix<T>, b: &DVector<T>, c: &DVector<T>) -> Result<DVector<T>> {
    let (m, n) = a.shape();
    let width = n + m + 1;
    let rhs = width - 1;
    let mut tab = DMatrix::<T>::zeros(m + 1, width);
    for i in 0..m {
        let sign = if b[i] < T::zero() { -T::one() } else { T::one() };
        for j in 0..n {
            tab[(i, j)] = a[(i, j)] * sign;
        }
        tab[(i, n + i)] = T::one();
        tab[(i, rhs)] = b[i] * sign;
    }
    let scale = a.amax().max(b.amax()).max(T::one());
    let tol = T::lit(1e-11) * scale;
    let mut basis: Vec<usize> = (n..n + m).collect();

    // phase 1: minimize the artificial sum
    for j in 0..width {
        if (n..n + m).contains(&j) {
            continue;
        }
        let s = (0..m).fold(T::zero(), |acc, i| acc + tab[(i, j)]);
        tab[(m, j)] = -s;
    }
    run(&mut tab, &mut basis, n + m, tol)?;
    if -tab[(m, rhs)] > T::lit(1e-8) * scale {
        return Err(Error::precondition("linear program is infeasible"));
    }
    // pivot remaining artificials out of the basis where possible
    let mut keep_rows: Vec<usize> = Vec::with_capacity(m);
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab[(i, j)].abs() > tol) {
                pivot(&mut tab, &mut basis, i, j);
            } else {
                continue; // redundant constraint
            }
        }
        keep_rows.push(i);
    }
    if keep_rows.len() < m {
        let mut reduced = DMatrix::<T>::zeros(keep_rows.len() + 1, width);
        let mut nb = Vec::with_capacity(keep_rows.len());
        for (r, &i) in keep_rows.iter().enumerate() {
            reduced.row_mut(r).copy_from(&tab.row(i));
            nb.push(basis[i]);
        }
        tab = reduced;
        basis = nb;
    }
    let mrow = basis.len();

    // phase 2: original objective over the structural columns
    for j in 0..width {
        tab[(mrow, j)] = if j < n { c[j] } else { T::zero() };
    }
    for i in 0..mrow {
        let cb = c[basis[i]];
        if cb != T::zero() {
            for j in 0..width {
                let v = tab[(i, j)];
                tab[(mrow, j)] -= cb * v;
            }
        }
    }
    run(&mut tab, &mut basis, n, tol)?;

    let mut x = DVector::zeros(n);
    for (i, &bi) in basis.iter().enumerate() {
        if bi < n {
            x[bi] = tab[(i, rhs)];
        }
    }
    Ok(x)
}

fn run<T: Real>(tab: &mut DMatrix<T>, basis: &mut [usize], allowed: usize, tol: T) -> Result<()> {
    let m = basis.len();
    let rhs = tab.ncols() - 1;
    for _ in 0..1_000_000 {
        let Some(enter) = (0..allowed).find(|&j| tab[(m, j)] < -tol) else {
            return Ok(());
        };
        let mut leave: Option<(usize, T)> = None;
        for i in 0..m {
            let v = tab[(i, enter)];
            if v > tol {
                let ratio = tab[(i, rhs)] / v;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr || (ratio == lr && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        let Some((row, _)) = leave else {
            return Err(Error::precondition("linear program is unbounded"));
        };
        pivot(tab, basis, row, enter);
    }
    Err(Error::NotConverged {
        iterations: 1_000_000,
        residual: f64::NAN,
    })
}

fn pivot<T: Real>(tab: &mut DMatrix<T>, basis: &mut [usize], row: usize, col: usize) {
    let p = tab[(row, col)];
    let width = tab.ncols();
    for j in 0..width {
        tab[(row, j)] /= p;
    }
    for i in 0..tab.nrows() {
        if i == row {
            continue;
        }
        let f = tab[(i, col)];
        if f != T::zero() {
            for j in 0..width {
                let v = tab[(row, j)];
                tab[(i, j)] -= f * v;
            }
        }
    }
    basis[row] = col;
}
