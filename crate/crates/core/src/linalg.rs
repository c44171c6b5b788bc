//! Dense linear-algebra helpers shared by the energy and spectral code.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::{Error, Result};

/// `A x = lambda B x` for symmetric `A` and symmetric positive definite `B`.
/// Eigenvalues ascend; eigenvectors are `B`-orthonormal columns.
pub(crate) fn sym_definite_eig(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("pencil mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // C = L^-1 A L^-T
    let la = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&la.transpose())
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let dim = c.nrows();
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut y = DMatrix::<f64>::zeros(dim, order.len());
    for (col, &i) in order.iter().enumerate() {
        y.set_column(col, &eig.eigenvectors.column(i));
    }
    let x = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    Ok((values, x))
}

/// Eigenvalues of a real square matrix by a capped real Schur iteration.
pub(crate) fn eigenvalues(a: DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let norm = a.amax();
    let schur = Schur::try_new(a, f64::EPSILON, 200 * n.max(10))
        .ok_or_else(|| Error::Numerical(format!("Schur iteration did not converge (n = {n}, max |a_ij| = {norm:e})")))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Basis of `{u : C u = 0}` written as `u = P u_free`, where the entries in
/// `boundary` are eliminated. Requires `C[:, boundary]` invertible.
pub(crate) fn condensation(c: &DMatrix<f64>, boundary: &[usize]) -> Result<DMatrix<f64>> {
    let total = c.ncols();
    let m = boundary.len();
    assert_eq!(c.nrows(), m, "one constraint per eliminated unknown");
    let free: Vec<usize> = (0..total).filter(|j| !boundary.contains(j)).collect();
    let cb = c.select_columns(boundary);
    let ci = c.select_columns(&free);
    let lu = cb.lu();
    let elim = lu
        .solve(&(-ci))
        .ok_or_else(|| Error::Numerical("wall conditions are not independent".into()))?;
    let mut p = DMatrix::<f64>::zeros(total, free.len());
    for (k, &j) in free.iter().enumerate() {
        p[(j, k)] = 1.0;
    }
    for (r, &j) in boundary.iter().enumerate() {
        p.row_mut(j).copy_from(&elim.row(r));
    }
    Ok(p)
}

pub(crate) fn to_complex(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|v| Complex64::new(v, 0.0))
}

/// Eigenvector of `A x = sigma B x` near `sigma` by inverse iteration.
pub(crate) fn inverse_iteration(a: &DMatrix<f64>, b: &DMatrix<f64>, sigma: Complex64) -> Result<DVector<Complex64>> {
    let n = a.nrows();
    let bc = to_complex(b);
    // A tiny relative nudge keeps the shifted matrix invertible.
    let shift = sigma + Complex64::new(1e-10 * (1.0 + sigma.norm()), 1e-11 * (1.0 + sigma.norm()));
    let m = to_complex(a) - &bc * shift;
    let lu = m.lu();
    let mut x = DVector::<Complex64>::from_fn(n, |i, _| Complex64::new(1.0 + 0.01 * i as f64, 0.5 / (1.0 + i as f64)));
    for _ in 0..6 {
        let rhs = &bc * &x;
        x = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("inverse iteration hit a singular shift".into()))?;
        let norm = x.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Numerical("inverse iteration lost the eigenvector".into()));
        }
        x /= Complex64::new(norm, 0.0);
    }
    // Fix the phase: largest entry real positive.
    let (imax, _) = x
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if v.norm() > acc.1 { (i, v.norm()) } else { acc });
    let phase = x[imax] / x[imax].norm();
    x /= phase;
    Ok(x)
}
