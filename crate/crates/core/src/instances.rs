//! Problem instances: the equicorrelated worst-case family and the circulant
//! Hankel / tridiagonal generators, with closed-form spectral metadata.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    cholesky, solve_lower, solve_upper, sym_eigen, sym_eigenvalues, DenseMatrix, Operator,
    Structure, Vector,
};
use crate::rng::{standard_normal, stream_rng, Stream};
use crate::tol;

/// Which generator produced an instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceKind {
    WorstCase { c: f64 },
    CirculantHankel { seed: u64 },
    Tridiagonal { seed: u64 },
    Custom,
}

impl InstanceKind {
    pub fn label(&self) -> String {
        match self {
            InstanceKind::WorstCase { c } => format!("worst_case(c={c})"),
            InstanceKind::CirculantHankel { seed } => format!("circulant_hankel(seed={seed})"),
            InstanceKind::Tridiagonal { seed } => format!("tridiagonal(seed={seed})"),
            InstanceKind::Custom => "custom".into(),
        }
    }
}

/// Eigenvalue summary of `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumInfo {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_avg: f64,
    pub kappa: f64,
    pub kappa_cd: f64,
}

impl SpectrumInfo {
    fn from_parts(lambda_min: f64, lambda_max: f64, lambda_avg: f64) -> Self {
        SpectrumInfo {
            lambda_min,
            lambda_max,
            lambda_avg,
            kappa: lambda_max / lambda_min,
            kappa_cd: lambda_avg / lambda_min,
        }
    }
}

/// Coordinate-wise Lipschitz constants `L_i = Q_ii`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalStats {
    pub l_min: f64,
    pub l_max: f64,
    pub l_avg: f64,
    pub l_sum: f64,
}

/// `min ½xᵀQx − bᵀx` with a factor `A` (`AᵀA = Q`) and a known minimiser.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    pub q: DenseMatrix,
    pub b: Vector,
    pub a: DenseMatrix,
    pub x_star: Vector,
    pub kind: InstanceKind,
    pub structure: Structure,
}

impl QuadraticProblem {
    /// Custom instance from `Q` and `b`. `Q` must be symmetric with nonzero
    /// diagonal; when `b ≠ 0` it must also be positive definite.
    pub fn new(q: DenseMatrix, b: Vector) -> Result<Self> {
        q.require_symmetric()?;
        if b.len() != q.rows() {
            return Err(Error::Dimension(format!("b has {} entries, Q is {}", b.len(), q.rows())));
        }
        if let Some(i) = (0..q.rows()).find(|&i| q[(i, i)].abs() <= tol::ZERO_PIVOT) {
            return Err(Error::SingularCoordinate { index: i });
        }
        let a = factor(&q)?;
        let x_star = if b.iter().all(|&v| v == 0.0) {
            Vector::zeros(q.rows())
        } else {
            let c = cholesky(&q)?;
            let y = solve_lower(&c, &b)?;
            solve_upper(&c.transpose(), &y)?
        };
        Ok(QuadraticProblem { q, b, a, x_star, kind: InstanceKind::Custom, structure: Structure::General })
    }

    pub fn n(&self) -> usize {
        self.q.rows()
    }

    /// `Q` as an operator, using the O(n) kernels when the structure allows.
    pub fn operator(&self) -> Operator<'_> {
        match self.structure {
            Structure::Equicorrelated { diag, off } => Operator::equicorrelated(self.n(), diag, off),
            Structure::General => Operator::borrowed(&self.q).expect("Q is square"),
        }
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let qx = self.operator().matvec(x);
        0.5 * crate::matcore::dot(x, &qx) - crate::matcore::dot(&self.b, x)
    }

    /// Spectrum summary; closed form for the worst-case family, otherwise
    /// from the symmetric eigensolver (`λ_min` is the smallest nonzero eigenvalue).
    pub fn spectrum(&self) -> Result<SpectrumInfo> {
        if let InstanceKind::WorstCase { c } = self.kind {
            return worst_case_spectrum(self.n(), c);
        }
        let values = sym_eigenvalues(&self.q)?;
        let lambda_max = values.last().copied().unwrap_or(0.0);
        let floor = tol::ZERO_PIVOT * lambda_max.abs().max(1.0);
        let lambda_min = values.iter().copied().find(|&v| v > floor).ok_or_else(|| {
            Error::Degenerate("Q has no positive eigenvalue".into())
        })?;
        let lambda_avg = self.q.diag().iter().sum::<f64>() / self.n() as f64;
        Ok(SpectrumInfo::from_parts(lambda_min, lambda_max, lambda_avg))
    }

    pub fn diagonal_stats(&self) -> DiagonalStats {
        let d = self.q.diag();
        let l_sum: f64 = d.iter().sum();
        DiagonalStats {
            l_min: d.iter().copied().fold(f64::INFINITY, f64::min),
            l_max: d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            l_avg: l_sum / d.len() as f64,
            l_sum,
        }
    }

    /// Same problem with coordinates relabelled: coordinate `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let q = self.q.permute_symmetric(perm)?;
        let mut b = Vector::zeros(self.n());
        for (i, &p) in perm.iter().enumerate() {
            b[p] = self.b[i];
        }
        let mut out = QuadraticProblem::new(q, b)?;
        out.kind = self.kind;
        if let Structure::Equicorrelated { .. } = self.structure {
            out.structure = self.structure;
        }
        Ok(out)
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            kind: self.kind,
            n: self.n(),
            q: self.q.as_slice().to_vec(),
            b: self.b.to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.to_file()).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        file.into_problem()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| io_error(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::from_json(&text)
    }
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), message: e.to_string() }
}

/// JSON interchange form of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(flatten)]
    pub kind: InstanceKind,
    pub n: usize,
    /// Row-major entries of `Q`.
    pub q: Vec<f64>,
    pub b: Vec<f64>,
}

impl InstanceFile {
    /// Rebuilds the problem. Generated kinds are regenerated from their
    /// parameters and must reproduce the stored `Q` exactly; otherwise the
    /// instance is loaded as custom.
    pub fn into_problem(self) -> Result<QuadraticProblem> {
        let q = DenseMatrix::from_row_major(self.n, self.n, self.q)?;
        let b = Vector::from(self.b);
        let regenerated = match self.kind {
            InstanceKind::WorstCase { c } => Some(make_worst_case(self.n, c)?),
            InstanceKind::CirculantHankel { seed } => Some(make_circulant_hankel(self.n, seed)?),
            InstanceKind::Tridiagonal { seed } => Some(make_tridiagonal(self.n, seed)?),
            InstanceKind::Custom => None,
        };
        match regenerated {
            Some(mut p) if p.q == q && p.b.iter().all(|&v| v == 0.0) => {
                if b.iter().any(|&v| v != 0.0) {
                    let custom = QuadraticProblem::new(q, b)?;
                    p.b = custom.b;
                    p.x_star = custom.x_star;
                }
                Ok(p)
            }
            _ => QuadraticProblem::new(q, b),
        }
    }
}

/// `Aᵀ` from the Cholesky factor, falling back to the symmetric eigen square
/// root for positive semidefinite `Q`.
fn factor(q: &DenseMatrix) -> Result<DenseMatrix> {
    match cholesky(q) {
        Ok(c) => Ok(c.transpose()),
        Err(Error::NotPositiveDefinite { .. }) => {
            let e = sym_eigen(q)?;
            let n = q.rows();
            let roots: Vec<f64> = e.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
            Ok(DenseMatrix::symmetric_from_fn(n, |i, j| {
                (0..n).map(|k| e.vectors[(i, k)] * roots[k] * e.vectors[(j, k)]).sum()
            }))
        }
        Err(e) => Err(e),
    }
}

fn check_worst_case(n: usize, c: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::Parameter(format!("n = {n} must be at least 2")));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Parameter(format!("c = {c} must lie in (0, 1)")));
    }
    Ok(())
}

/// `Q(c, n)`: unit diagonal, constant off-diagonal `c`; `b = 0`, `x* = 0`.
pub fn make_worst_case(n: usize, c: f64) -> Result<QuadraticProblem> {
    check_worst_case(n, c)?;
    let q = DenseMatrix::symmetric_from_fn(n, |i, j| if i == j { 1.0 } else { c });
    let a = cholesky(&q)?.transpose();
    Ok(QuadraticProblem {
        q,
        b: Vector::zeros(n),
        a,
        x_star: Vector::zeros(n),
        kind: InstanceKind::WorstCase { c },
        structure: Structure::Equicorrelated { diag: 1.0, off: c },
    })
}

/// Closed-form spectrum of `Q(c, n)`: `1−c` (multiplicity `n−1`) and `1−c+cn`.
pub fn worst_case_spectrum(n: usize, c: f64) -> Result<SpectrumInfo> {
    check_worst_case(n, c)?;
    Ok(SpectrumInfo::from_parts(1.0 - c, 1.0 - c + c * n as f64, 1.0))
}

/// `Q(c, n)⁻¹ = (1/c̃)I − c/(c̃(c̃+cn))·eeᵀ` with `c̃ = 1−c`.
pub fn sherman_morrison_inverse(n: usize, c: f64) -> Result<DenseMatrix> {
    check_worst_case(n, c)?;
    let ct = 1.0 - c;
    let rank_one = c / (ct * (ct + c * n as f64));
    Ok(DenseMatrix::symmetric_from_fn(n, |i, j| {
        if i == j {
            1.0 / ct - rank_one
        } else {
            -rank_one
        }
    }))
}

/// Circulant Hankel generator `A_ij = δ_{(i+j) mod n}` (0-based), `Q = AᵀA`.
pub fn circulant_hankel_from(delta: &[f64]) -> Result<DenseMatrix> {
    let n = delta.len();
    if n < 2 {
        return Err(Error::Parameter(format!("n = {n} must be at least 2")));
    }
    Ok(DenseMatrix::symmetric_from_fn(n, |i, j| delta[(i + j) % n]))
}

/// Seeded circulant Hankel instance with standard normal `δ`. Draws with a
/// vanishing diagonal of `Q` are rejected and redrawn on a fresh stream.
pub fn make_circulant_hankel(n: usize, seed: u64) -> Result<QuadraticProblem> {
    let mut rng = stream_rng(Stream::CirculantHankel, n, seed);
    for attempt in 0..64u64 {
        rng.set_stream(attempt);
        let delta = normals(&mut rng, n);
        let a = circulant_hankel_from(&delta)?;
        if let Some(p) = from_generator(a, InstanceKind::CirculantHankel { seed })? {
            return Ok(p);
        }
    }
    Err(Error::Degenerate("circulant Hankel draws kept producing a zero diagonal".into()))
}

/// Symmetric tridiagonal generator with unit diagonal and the given off-diagonal.
pub fn tridiagonal_from(off: &[f64]) -> Result<DenseMatrix> {
    let n = off.len() + 1;
    if n < 2 {
        return Err(Error::Parameter("need at least one off-diagonal entry".into()));
    }
    Ok(DenseMatrix::symmetric_from_fn(n, |i, j| {
        if i == j {
            1.0
        } else if i == j + 1 {
            off[j]
        } else {
            0.0
        }
    }))
}

/// Seeded tridiagonal instance: unit diagonal, standard normal off-diagonal.
pub fn make_tridiagonal(n: usize, seed: u64) -> Result<QuadraticProblem> {
    if n < 2 {
        return Err(Error::Parameter(format!("n = {n} must be at least 2")));
    }
    let mut rng = stream_rng(Stream::Tridiagonal, n, seed);
    let a = tridiagonal_from(&normals(&mut rng, n - 1))?;
    from_generator(a, InstanceKind::Tridiagonal { seed })?
        .ok_or_else(|| Error::Degenerate("tridiagonal instance with zero diagonal".into()))
}

fn normals(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| standard_normal(rng)).collect()
}

fn from_generator(a: DenseMatrix, kind: InstanceKind) -> Result<Option<QuadraticProblem>> {
    let q = a.transpose().matmul(&a)?.symmetrize()?;
    let n = q.rows();
    if (0..n).any(|i| q[(i, i)].abs() <= tol::ZERO_PIVOT) {
        return Ok(None);
    }
    Ok(Some(QuadraticProblem {
        q,
        b: Vector::zeros(n),
        a,
        x_star: Vector::zeros(n),
        kind,
        structure: Structure::General,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_case_examples() {
        let p = make_worst_case(2, 0.5).unwrap();
        assert_eq!(p.q, DenseMatrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap());
        let p = make_worst_case(3, 0.8).unwrap();
        assert!((0..3).all(|i| (0..3).all(|j| p.q[(i, j)] == if i == j { 1.0 } else { 0.8 })));
        let s = make_worst_case(20, 0.99).unwrap().spectrum().unwrap();
        assert!((s.lambda_min - 0.01).abs() < 1e-12);
        assert!((s.lambda_max - 19.81).abs() < 1e-12);
        assert!(make_worst_case(3, 1.0).is_err());
        assert!(make_worst_case(3, 0.0).is_err());
    }

    #[test]
    fn spectrum_examples() {
        assert!((worst_case_spectrum(2, 0.5).unwrap().kappa - 3.0).abs() < 1e-12);
        assert!((worst_case_spectrum(100, 0.8).unwrap().kappa - 401.0).abs() < 1e-9);
        assert!((worst_case_spectrum(50, 1e-8).unwrap().kappa - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sherman_morrison_examples() {
        let inv = sherman_morrison_inverse(2, 0.5).unwrap();
        let want = DenseMatrix::from_rows(&[[4.0 / 3.0, -2.0 / 3.0], [-2.0 / 3.0, 4.0 / 3.0]]).unwrap();
        assert!(inv.sub(&want).unwrap().max_abs() < 1e-15);
        let inv = sherman_morrison_inverse(3, 1e-9).unwrap();
        assert!(inv.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn hankel_wrap_rule() {
        let a = circulant_hankel_from(&[2.0, 3.0]).unwrap();
        assert_eq!(a, DenseMatrix::from_rows(&[[2.0, 3.0], [3.0, 2.0]]).unwrap());
        let a = circulant_hankel_from(&[1.0, 0.0, 0.0]).unwrap();
        let want = DenseMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(a, want);
        let p1 = make_circulant_hankel(8, 5).unwrap();
        let p2 = make_circulant_hankel(8, 5).unwrap();
        assert_eq!(p1.a, p2.a);
    }

    #[test]
    fn tridiagonal_examples() {
        let a = tridiagonal_from(&[0.7]).unwrap();
        assert_eq!(a, DenseMatrix::from_rows(&[[1.0, 0.7], [0.7, 1.0]]).unwrap());
        assert_eq!(tridiagonal_from(&[0.0, 0.0]).unwrap(), DenseMatrix::identity(3));
        assert_eq!(make_tridiagonal(9, 2).unwrap().a, make_tridiagonal(9, 2).unwrap().a);
    }

    #[test]
    fn json_round_trip() {
        for p in [
            make_worst_case(5, 0.3).unwrap(),
            make_circulant_hankel(6, 1).unwrap(),
            make_tridiagonal(4, 9).unwrap(),
        ] {
            let back = QuadraticProblem::from_json(&p.to_json().unwrap()).unwrap();
            assert_eq!(back.q, p.q);
            assert_eq!(back.a, p.a);
            assert_eq!(back.kind, p.kind);
            assert_eq!(back.structure, p.structure);
        }
    }
}
