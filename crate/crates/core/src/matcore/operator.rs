use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::{dot, DenseMatrix};
use crate::error::{Error, Result};
use crate::tol;

/// Known structure of a symmetric matrix, used to pick O(n) kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Structure {
    #[default]
    General,
    /// `diag` on the diagonal and `off` everywhere else, i.e. `(diag-off)I + off·eeᵀ`.
    Equicorrelated { diag: f64, off: f64 },
}

#[derive(Debug, Clone)]
enum Repr<'a> {
    Dense(Cow<'a, DenseMatrix>),
    Equicorrelated { n: usize, diag: f64, off: f64 },
}

/// A square symmetric matrix together with the kernels the solvers need:
/// products, exact coordinate sweeps and the upper-triangular back
/// substitution behind the GBS correction. Equicorrelated matrices are never
/// stored densely, so one sweep costs O(n) instead of O(n²).
#[derive(Debug, Clone)]
pub struct Operator<'a> {
    repr: Repr<'a>,
}

impl Operator<'static> {
    pub fn dense(m: DenseMatrix) -> Result<Self> {
        m.require_square()?;
        Ok(Operator { repr: Repr::Dense(Cow::Owned(m)) })
    }

    pub fn equicorrelated(n: usize, diag: f64, off: f64) -> Self {
        Operator { repr: Repr::Equicorrelated { n, diag, off } }
    }
}

impl<'a> Operator<'a> {
    pub fn borrowed(m: &'a DenseMatrix) -> Result<Self> {
        m.require_square()?;
        Ok(Operator { repr: Repr::Dense(Cow::Borrowed(m)) })
    }

    /// Builds an operator from a matrix and a structure hint. The hint is
    /// checked against the entries and ignored if it does not hold.
    pub fn with_structure(m: &'a DenseMatrix, structure: Structure) -> Result<Self> {
        m.require_square()?;
        if let Structure::Equicorrelated { diag, off } = structure {
            let n = m.rows();
            let ok = (0..n).all(|i| {
                (0..n).all(|j| m[(i, j)] == if i == j { diag } else { off })
            });
            if ok {
                return Ok(Operator::equicorrelated(n, diag, off));
            }
        }
        Ok(Operator { repr: Repr::Dense(Cow::Borrowed(m)) })
    }

    pub fn into_owned(self) -> Operator<'static> {
        match self.repr {
            Repr::Dense(m) => Operator { repr: Repr::Dense(Cow::Owned(m.into_owned())) },
            Repr::Equicorrelated { n, diag, off } => Operator::equicorrelated(n, diag, off),
        }
    }

    pub fn n(&self) -> usize {
        match &self.repr {
            Repr::Dense(m) => m.rows(),
            Repr::Equicorrelated { n, .. } => *n,
        }
    }

    pub fn structure(&self) -> Structure {
        match self.repr {
            Repr::Dense(_) => Structure::General,
            Repr::Equicorrelated { diag, off, .. } => Structure::Equicorrelated { diag, off },
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match &self.repr {
            Repr::Dense(m) => m.as_ref().clone(),
            &Repr::Equicorrelated { n, diag, off } => {
                DenseMatrix::symmetric_from_fn(n, |i, j| if i == j { diag } else { off })
            }
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        match &self.repr {
            Repr::Dense(m) => m[(i, i)],
            Repr::Equicorrelated { diag, .. } => *diag,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        match &self.repr {
            Repr::Dense(m) => (0..m.rows()).map(|i| dot(m.row(i), x)).collect(),
            &Repr::Equicorrelated { diag, off, .. } => {
                let s: f64 = x.iter().sum();
                x.iter().map(|&xi| (diag - off) * xi + off * s).collect()
            }
        }
    }

    /// `a·self + b·other`, staying structured when both operands are.
    pub fn combine(&self, a: f64, other: &Operator, b: f64) -> Result<Operator<'static>> {
        if self.n() != other.n() {
            return Err(Error::Dimension(format!("combine {} with {}", self.n(), other.n())));
        }
        match (&self.repr, &other.repr) {
            (
                &Repr::Equicorrelated { n, diag: d1, off: o1 },
                &Repr::Equicorrelated { diag: d2, off: o2, .. },
            ) => Ok(Operator::equicorrelated(n, a * d1 + b * d2, a * o1 + b * o2)),
            _ => Operator::dense(self.to_dense().scale(a).add(&other.to_dense().scale(b))?),
        }
    }

    /// `self²` (equal to `selfᵀself` for symmetric operators).
    pub fn square(&self) -> Result<Operator<'static>> {
        match &self.repr {
            &Repr::Equicorrelated { n, diag, off } => {
                let p = diag - off;
                let q = off;
                let qq = 2.0 * p * q + q * q * n as f64;
                Ok(Operator::equicorrelated(n, p * p + qq, qq))
            }
            Repr::Dense(m) => Operator::dense(m.transpose().matmul(m.as_ref())?),
        }
    }

    fn pivot(&self, i: usize) -> Result<f64> {
        let d = self.diag(i);
        if d.abs() <= tol::ZERO_PIVOT {
            return Err(Error::SingularCoordinate { index: i });
        }
        Ok(d)
    }

    /// Exact coordinate minimisation of `½xᵀMx − rhsᵀx` over the given indices,
    /// in order: `x_i ← x_i − ((Mx)_i − rhs_i)/M_ii`.
    pub fn sweep<I>(&self, x: &mut [f64], rhs: &[f64], order: I) -> Result<()>
    where
        I: IntoIterator<Item = usize>,
    {
        match &self.repr {
            Repr::Dense(m) => {
                for i in order {
                    let d = self.pivot(i)?;
                    x[i] -= (dot(m.row(i), x) - rhs[i]) / d;
                }
            }
            &Repr::Equicorrelated { diag, off, .. } => {
                self.pivot(0)?;
                let mut s: f64 = x.iter().sum();
                for i in order {
                    let g = (diag - off) * x[i] + off * s - rhs[i];
                    let step = g / diag;
                    x[i] -= step;
                    s -= step;
                }
            }
        }
        Ok(())
    }

    /// Replaces `d` by `Bd` with `B = blockdiag(1, (Γ_{2:n})⁻ᵀ)·blockdiag(1, D_{2:n})`,
    /// where `Γ` and `D` are the lower-triangular and diagonal parts of this
    /// matrix. The trailing block is a back substitution against the upper
    /// triangle.
    pub fn upper_correction(&self, d: &mut [f64]) -> Result<()> {
        let n = self.n();
        match &self.repr {
            Repr::Dense(m) => {
                for i in (1..n).rev() {
                    let piv = self.pivot(i)?;
                    let tail = dot(&m.row(i)[i + 1..], &d[i + 1..]);
                    d[i] = (piv * d[i] - tail) / piv;
                }
            }
            &Repr::Equicorrelated { diag, off, .. } => {
                if n > 1 {
                    self.pivot(0)?;
                }
                let mut suffix = 0.0;
                for i in (1..n).rev() {
                    d[i] = (diag * d[i] - off * suffix) / diag;
                    suffix += d[i];
                }
            }
        }
        Ok(())
    }

    /// Solves `Mx = r` for positive definite `M`.
    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        match &self.repr {
            &Repr::Equicorrelated { n, diag, off } => {
                let p = diag - off;
                let denom = p + off * n as f64;
                if p.abs() <= tol::ZERO_PIVOT || denom.abs() <= tol::ZERO_PIVOT {
                    return Err(Error::Degenerate("singular equicorrelated system".into()));
                }
                let s: f64 = r.iter().sum();
                Ok(r.iter().map(|&ri| (ri - off * s / denom) / p).collect())
            }
            Repr::Dense(m) => {
                let c = super::cholesky(m.as_ref())?;
                let y = super::solve_lower(&c, r)?;
                Ok(super::solve_upper(&c.transpose(), &y)?.into_inner())
            }
        }
    }
}
