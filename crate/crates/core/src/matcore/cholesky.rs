use super::{dot, DenseMatrix};
use crate::error::{Error, Result};

/// Lower-triangular `C` with `C Cᵀ = S`. The strict upper triangle of the
/// result is zero by construction.
pub fn cholesky(s: &DenseMatrix) -> Result<DenseMatrix> {
    s.require_symmetric()?;
    let n = s.rows();
    let mut c = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let d = s[(j, j)] - dot(&c.row(j)[..j], &c.row(j)[..j]);
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let d = d.sqrt();
        c[(j, j)] = d;
        for i in j + 1..n {
            let v = (s[(i, j)] - dot(&c.row(i)[..j], &c.row(j)[..j])) / d;
            c[(i, j)] = v;
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(cholesky(&DenseMatrix::identity(3)).unwrap(), DenseMatrix::identity(3));
        let s = DenseMatrix::from_rows(&[[4.0, 0.0], [0.0, 9.0]]).unwrap();
        assert_eq!(cholesky(&s).unwrap(), DenseMatrix::from_rows(&[[2.0, 0.0], [0.0, 3.0]]).unwrap());
        let q = DenseMatrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap();
        let c = cholesky(&q).unwrap();
        assert_eq!(c[(0, 0)], 1.0);
        assert_eq!(c[(1, 0)], 0.5);
        assert!((c[(1, 1)] - 0.75f64.sqrt()).abs() < 1e-15);
        assert_eq!(c[(0, 1)], 0.0);
    }

    #[test]
    fn rejects_indefinite() {
        let s = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&s), Err(Error::NotPositiveDefinite { index: 1, .. })));
    }
}
