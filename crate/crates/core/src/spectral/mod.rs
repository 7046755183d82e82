//! Update matrices, their symmetrized forms, exact and expected spectral
//! radii, and evaluation of the convergence-rate bounds.

mod bounds;
mod expected;
mod identities;

use serde::{Deserialize, Serialize};

use crate::cd::{correction_matrix, OrderRule};
use crate::error::{Error, Result};
use crate::instances::{InstanceKind, QuadraticProblem};
use crate::matcore::{
    general_eigenvalues, lower_triangular, spectral_radius_sym, sym_eigenvalues, DenseMatrix, Structure,
};
use crate::tol;

pub use bounds::{
    lower_bound_ccd, lower_bound_gbs, lower_bound_sgs, upper_bound_gbs, upper_bound_sgs, validity_gbs,
    BoundInputs, GbsFloor, Validity,
};
pub use expected::{expected_rpcd_matrix, ExpectedMode, ENUMERATION_LIMIT};
pub use identities::{gamma_qinv_gamma_bound, gbs_proof_quantities, projection_form_check, ProofQuantities};

/// How `1 − ρ` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Method {
    ExactSymmetric,
    BruteForceNonsymmetric,
    ClosedFormExpected,
    EnumeratedExpected,
    MonteCarloExpected { samples: usize },
}

/// Spectral summary of one (instance, rule) cell.
///
/// `bound_upper` and `bound_lower` are per-epoch factors on the objective
/// error, so they bracket `ρ(M)²` rather than `ρ(M)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub n: usize,
    pub c: Option<f64>,
    pub rule: OrderRule,
    pub one_minus_rho: f64,
    pub method: Method,
    pub bound_upper: Option<f64>,
    pub bound_lower: Option<f64>,
    pub validity: Validity,
    /// Set when the permutation-averaged closed form is used beyond the
    /// sizes at which it was checked against enumeration.
    #[serde(default)]
    pub extrapolated: bool,
}

impl SpectralReport {
    pub fn rho(&self) -> f64 {
        1.0 - self.one_minus_rho
    }
}

/// `Γ⁻¹M` by forward substitution on whole rows.
pub(crate) fn lower_solve_rows(gamma: &DenseMatrix, m: &DenseMatrix) -> Result<DenseMatrix> {
    let n = gamma.rows();
    if m.rows() != n {
        return Err(Error::Dimension(format!("Γ is {n}x{n}, right side has {} rows", m.rows())));
    }
    let mut y = m.clone();
    for i in 0..n {
        let d = gamma[(i, i)];
        if d.abs() <= tol::ZERO_PIVOT {
            return Err(Error::SingularTriangular { index: i });
        }
        let (done, rest) = y.as_mut_rows_split(i);
        let yi = &mut rest[..m.cols()];
        for (k, row_k) in done.chunks_exact(m.cols()).enumerate() {
            let g = gamma[(i, k)];
            if g != 0.0 {
                for (a, b) in yi.iter_mut().zip(row_k) {
                    *a -= g * b;
                }
            }
        }
        yi.iter_mut().for_each(|a| *a /= d);
    }
    Ok(y)
}

fn lambda_max(problem: &QuadraticProblem) -> Result<f64> {
    Ok(problem.spectrum()?.lambda_max)
}

/// `I − Γ⁻¹Q`.
fn cyclic_matrix(q: &DenseMatrix) -> Result<DenseMatrix> {
    lower_solve_rows(&lower_triangular(q)?, q)?.identity_minus()
}

/// Update matrix of one epoch of `rule` (expected update matrix for the
/// randomized rules).
pub fn update_matrix(rule: OrderRule, problem: &QuadraticProblem) -> Result<DenseMatrix> {
    let q = &problem.q;
    let n = problem.n();
    match rule {
        OrderRule::Cyclic => cyclic_matrix(q),
        OrderRule::Sgs => {
            let forward = cyclic_matrix(q)?;
            // Backward pass: I − Γᵀ⁻¹Q, Γᵀ upper triangular.
            let flip: Vec<usize> = (0..n).rev().collect();
            let qr = q.permute_symmetric(&flip)?;
            let backward_r = cyclic_matrix(&qr)?;
            let backward = backward_r.permute_symmetric(&flip)?;
            backward.matmul(&forward)
        }
        OrderRule::Gbs => {
            let g = lower_solve_rows(&lower_triangular(q)?, q)?;
            correction_matrix(q)?.matmul(&g)?.identity_minus()
        }
        OrderRule::Gradient => Ok(q.scale(1.0 / lambda_max(problem)?).identity_minus()?),
        OrderRule::Randomized => {
            let d = q.diag();
            let step = DenseMatrix::from_fn(n, n, |i, j| q[(i, j)] / (d[i] * n as f64)).identity_minus()?;
            matrix_power(&step, n)
        }
        OrderRule::RandomPermuted => {
            let mode = if n <= ENUMERATION_LIMIT {
                ExpectedMode::Enumerate
            } else if matches!(problem.structure, Structure::Equicorrelated { .. }) {
                ExpectedMode::ClosedForm
            } else {
                ExpectedMode::MonteCarlo { samples: 4096, seed: 0 }
            };
            expected_rpcd_matrix(problem, mode)
        }
    }
}

fn matrix_power(m: &DenseMatrix, mut k: usize) -> Result<DenseMatrix> {
    let mut result = DenseMatrix::identity(m.rows());
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = result.matmul(&base)?;
        }
        k >>= 1;
        if k > 0 {
            base = base.matmul(&base)?;
        }
    }
    Ok(result)
}

/// `ZᵀZ` with `Z = I − AΓ⁻¹Aᵀ`; shares its eigenvalues with the sGS update matrix.
pub fn symmetrized_sgs(problem: &QuadraticProblem) -> Result<DenseMatrix> {
    let a = &problem.a;
    let w = lower_solve_rows(&lower_triangular(&problem.q)?, &a.transpose())?;
    let z = a.matmul(&w)?.identity_minus()?;
    z.transpose().matmul(&z)?.symmetrize()
}

/// `I − Γ⁻¹QΓ⁻ᵀ`; shares its eigenvalues with the GBS update matrix when `Q`
/// has unit diagonal.
pub fn symmetrized_gbs(problem: &QuadraticProblem) -> Result<DenseMatrix> {
    let gamma = lower_triangular(&problem.q)?;
    let g = lower_solve_rows(&gamma, &problem.q)?;
    let s = lower_solve_rows(&gamma, &g.transpose())?;
    s.symmetrize()?.identity_minus()
}

fn unit_diagonal(q: &DenseMatrix) -> bool {
    q.diag().iter().all(|&d| d == 1.0)
}

fn radius_nonsymmetric(m: &DenseMatrix) -> Result<f64> {
    Ok(general_eigenvalues(m)?.iter().fold(0.0f64, |r, z| r.max(z.abs())))
}

/// `1 − ρ(M)` for the (expected) update matrix of `rule`, with bound
/// evaluations at `δ = 0.5`, `k` large (per-epoch factors).
pub fn spectral_report(problem: &QuadraticProblem, rule: OrderRule) -> Result<SpectralReport> {
    let n = problem.n();
    let c = match problem.kind {
        InstanceKind::WorstCase { c } => Some(c),
        _ => None,
    };
    let spec = problem.spectrum()?;
    let mut extrapolated = false;
    let (rho, method) = match rule {
        OrderRule::Sgs => (spectral_radius_sym(&symmetrized_sgs(problem)?)?, Method::ExactSymmetric),
        OrderRule::Gbs if unit_diagonal(&problem.q) => {
            (spectral_radius_sym(&symmetrized_gbs(problem)?)?, Method::ExactSymmetric)
        }
        OrderRule::Gbs | OrderRule::Cyclic => {
            (radius_nonsymmetric(&update_matrix(rule, problem)?)?, Method::BruteForceNonsymmetric)
        }
        OrderRule::Gradient => {
            let step = 1.0 / spec.lambda_max;
            let rho = (1.0 - step * spec.lambda_min).abs().max((1.0 - step * spec.lambda_max).abs());
            (rho, Method::ExactSymmetric)
        }
        OrderRule::Randomized => {
            // (I − D⁻¹Q/n)ⁿ is similar to (I − D^{-1/2}QD^{-1/2}/n)ⁿ.
            let d: Vec<f64> = problem.q.diag().iter().map(|v| v.sqrt()).collect();
            let scaled = DenseMatrix::symmetric_from_fn(n, |i, j| problem.q[(i, j)] / (d[i] * d[j]));
            let rho = sym_eigenvalues(&scaled)?
                .iter()
                .map(|mu| (1.0 - mu / n as f64).abs().powi(n as i32))
                .fold(0.0, f64::max);
            (rho, Method::ExactSymmetric)
        }
        OrderRule::RandomPermuted => match problem.structure {
            Structure::Equicorrelated { diag, off } => {
                extrapolated = n > ENUMERATION_LIMIT;
                (expected::closed_form_radius(n, diag, off), Method::ClosedFormExpected)
            }
            Structure::General if n <= ENUMERATION_LIMIT => (
                radius_nonsymmetric(&expected_rpcd_matrix(problem, ExpectedMode::Enumerate)?)?,
                Method::EnumeratedExpected,
            ),
            Structure::General => {
                let samples = 4096;
                let m = expected_rpcd_matrix(problem, ExpectedMode::MonteCarlo { samples, seed: 0 })?;
                (radius_nonsymmetric(&m)?, Method::MonteCarloExpected { samples })
            }
        },
    };

    let inputs = BoundInputs::from_problem(problem, 0.5)?;
    let (bound_upper, bound_lower, validity) = match rule {
        OrderRule::Sgs => (
            Some(upper_bound_sgs(&inputs)),
            c.map(|_| lower_bound_sgs(n, spec.kappa, 0.0, 0)),
            Validity::default(),
        ),
        OrderRule::Gbs => {
            let lower = c.map(|c| lower_bound_gbs(n, c, spec.kappa, 0.0, 0));
            (
                Some(upper_bound_gbs(&inputs)),
                lower.map(|f| f.floor),
                lower.map(|f| f.validity).unwrap_or_default(),
            )
        }
        OrderRule::Cyclic => (None, c.map(|_| lower_bound_ccd(n, spec.kappa, 0.0, 0)), Validity::default()),
        _ => (None, None, Validity::default()),
    };

    Ok(SpectralReport {
        n,
        c,
        rule,
        one_minus_rho: 1.0 - rho,
        method,
        bound_upper,
        bound_lower,
        validity,
        extrapolated,
    })
}
