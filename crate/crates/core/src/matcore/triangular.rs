use super::{dot, DenseMatrix, Vector};
use crate::error::{Error, Result};
use crate::tol::ZERO_PIVOT;

/// Lower-triangular part of a square matrix, diagonal included.
pub fn lower_triangular(q: &DenseMatrix) -> Result<DenseMatrix> {
    q.require_square()?;
    Ok(DenseMatrix::from_fn(q.rows(), q.cols(), |i, j| if j <= i { q[(i, j)] } else { 0.0 }))
}

/// Strictly upper-triangular part of a square matrix.
pub fn strict_upper(q: &DenseMatrix) -> Result<DenseMatrix> {
    q.require_square()?;
    Ok(DenseMatrix::from_fn(q.rows(), q.cols(), |i, j| if j > i { q[(i, j)] } else { 0.0 }))
}

fn check_system(t: &DenseMatrix, v: &[f64]) -> Result<()> {
    t.require_square()?;
    if v.len() != t.rows() {
        return Err(Error::Dimension(format!("rhs length {} for order {}", v.len(), t.rows())));
    }
    Ok(())
}

fn pivot(t: &DenseMatrix, i: usize) -> Result<f64> {
    let d = t[(i, i)];
    if d.abs() <= ZERO_PIVOT {
        return Err(Error::SingularTriangular { index: i });
    }
    Ok(d)
}

/// Forward substitution for `Γ y = v`; only the lower triangle of `gamma` is read.
pub fn solve_lower(gamma: &DenseMatrix, v: &[f64]) -> Result<Vector> {
    check_system(gamma, v)?;
    let n = v.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let d = pivot(gamma, i)?;
        let s = dot(&gamma.row(i)[..i], &y[..i]);
        y[i] = (v[i] - s) / d;
    }
    Ok(y.into())
}

/// Back substitution for `U y = v`; only the upper triangle of `u` is read.
pub fn solve_upper(u: &DenseMatrix, v: &[f64]) -> Result<Vector> {
    check_system(u, v)?;
    let n = v.len();
    let mut y = vec![0.0; n];
    for i in (0..n).rev() {
        let d = pivot(u, i)?;
        let s = dot(&u.row(i)[i + 1..], &y[i + 1..]);
        y[i] = (v[i] - s) / d;
    }
    Ok(y.into())
}

/// Inverse of a lower-triangular matrix, column by column.
pub fn inverse_lower(gamma: &DenseMatrix) -> Result<DenseMatrix> {
    gamma.require_square()?;
    let n = gamma.rows();
    let mut inv = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = solve_lower(gamma, &e)?;
        for i in j..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv)
}
