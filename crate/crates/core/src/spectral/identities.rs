use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cd::sgs_epoch;
use crate::error::{Error, Result};
use crate::instances::{sherman_morrison_inverse, QuadraticProblem};
use crate::matcore::{cholesky, lower_triangular, norm2, solve_lower, solve_upper, spectral_norm, DenseMatrix};

/// `‖ΓᵀQ⁻¹Γ‖` and its bound `κ·min{ΣL_i, (2 + ln n/π)²L}`.
pub fn gamma_qinv_gamma_bound(problem: &QuadraticProblem) -> Result<(f64, f64)> {
    let q = &problem.q;
    let n = problem.n();
    let gamma = lower_triangular(q)?;
    let c = cholesky(q).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::Degenerate("Q is singular".into()),
        other => other,
    })?;
    let ct = c.transpose();
    let mut x = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let y = solve_lower(&c, &gamma.column(j))?;
        let col = solve_upper(&ct, &y)?;
        for i in 0..n {
            x[(i, j)] = col[i];
        }
    }
    let m = gamma.transpose().matmul(&x)?.symmetrize()?;
    let value = spectral_norm(&m);
    let spec = problem.spectrum()?;
    let diag = problem.diagonal_stats();
    let t = (2.0 + (n as f64).ln() / PI).powi(2);
    Ok((value, spec.kappa * diag.l_sum.min(t * spec.lambda_max)))
}

/// Closed-form norms used in the GBS lower-bound argument on `Q(c, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProofQuantities {
    /// `‖Q‖ = 1 − c + cn`.
    pub norm_q: f64,
    /// `‖ΓᵀJΓ‖ = n + cn(n−1) + c²n(n−1)(2n−1)/6`.
    pub norm_gt_j_g: f64,
    /// `‖ΓΓᵀ − Q‖ = c²/(2 + 2cos(2mπ/(2m+1)))` with `m = n − 1`.
    pub norm_ggt_minus_q: f64,
    /// Asymptotic comparator `4c²n²/π²`.
    pub norm_ggt_minus_q_asymptotic: f64,
    /// `|a·|‖ΓΓᵀ−Q‖ − ‖Q‖| − b‖ΓᵀJΓ‖|` with `Q⁻¹ = aI − bJ`; a lower bound on `‖ΓᵀQ⁻¹Γ‖`.
    pub lower_bound_lhs: f64,
    /// Quadratic-in-`n` form of the same bound after substituting the asymptotic comparator.
    pub lower_bound_quadratic: f64,
}

/// Evaluates [`ProofQuantities`] for `Q(c, n)`.
pub fn gbs_proof_quantities(n: usize, c: f64) -> Result<ProofQuantities> {
    sherman_morrison_inverse(n.max(2), c)?;
    let nf = n as f64;
    let norm_q = 1.0 - c + c * nf;
    let norm_gt_j_g = nf + c * nf * (nf - 1.0) + c * c * nf * (nf - 1.0) * (2.0 * nf - 1.0) / 6.0;
    let m = nf - 1.0;
    let norm_ggt_minus_q = if n < 2 {
        0.0
    } else {
        c * c / (2.0 + 2.0 * (2.0 * m * PI / (2.0 * m + 1.0)).cos())
    };
    let ct = 1.0 - c;
    let a = 1.0 / ct;
    let b = c / (ct * (ct + c * nf));
    let lower_bound_lhs = (a * (norm_ggt_minus_q - norm_q).abs() - b * norm_gt_j_g).abs();
    let pi2 = PI * PI;
    let lower_bound_quadratic = ((4.0 * c * c / pi2 - c * c / 3.0) * nf * nf + (c * c / 2.0 - 2.0 * c) * nf
        - (2.0 - 2.0 * c + c * c / 6.0))
        / ct;
    Ok(ProofQuantities {
        norm_q,
        norm_gt_j_g,
        norm_ggt_minus_q,
        norm_ggt_minus_q_asymptotic: 4.0 * c * c * nf * nf / pi2,
        lower_bound_lhs,
        lower_bound_quadratic,
    })
}

/// Runs sGS-CD on `x` and the projector recursion `r ← P̂ᵀP̂ r` on `r = Ax`
/// side by side, with `P_i = I − A_iA_iᵀ/(A_iᵀA_i)` and `P̂ = P_n⋯P_1`.
/// Returns `max_k ‖Axᵏ − rᵏ‖`.
pub fn projection_form_check(problem: &QuadraticProblem, x0: &[f64], epochs: usize) -> Result<f64> {
    if problem.b.iter().any(|&v| v != 0.0) {
        return Err(Error::Parameter("projection form needs b = 0".into()));
    }
    let a = &problem.a;
    let n = problem.n();
    let cols: Vec<Vec<f64>> = (0..n).map(|i| a.column(i)).collect();
    let sq: Vec<f64> = cols.iter().map(|c| crate::matcore::dot(c, c)).collect();
    let project = |r: &mut [f64], i: usize| {
        let t = crate::matcore::dot(&cols[i], r) / sq[i];
        for (rj, aj) in r.iter_mut().zip(&cols[i]) {
            *rj -= t * aj;
        }
    };
    let mut x = x0.to_vec();
    let mut r = a.matvec(x0)?.into_inner();
    let mut worst = 0.0f64;
    for _ in 0..epochs {
        x = sgs_epoch(problem, &x)?.into_inner();
        for i in 0..n {
            project(&mut r, i);
        }
        for i in (0..n).rev() {
            project(&mut r, i);
        }
        let ax = a.matvec(&x)?;
        let diff: Vec<f64> = ax.iter().zip(&r).map(|(u, v)| u - v).collect();
        worst = worst.max(norm2(&diff));
    }
    Ok(worst)
}
