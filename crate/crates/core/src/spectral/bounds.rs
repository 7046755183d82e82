use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instances::{InstanceKind, QuadraticProblem};

/// Inputs of the rate bounds. `l` is the global Lipschitz constant `λ_max(Q)`;
/// `l_min`, `l_avg` and `l_sum` summarise the diagonal `L_i = Q_ii`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub c: Option<f64>,
    pub l: f64,
    pub l_min: f64,
    pub l_avg: f64,
    pub l_sum: f64,
    pub kappa: f64,
    pub delta: f64,
}

impl BoundInputs {
    pub fn from_problem(problem: &QuadraticProblem, delta: f64) -> Result<Self> {
        let spec = problem.spectrum()?;
        let diag = problem.diagonal_stats();
        Ok(BoundInputs {
            n: problem.n(),
            c: match problem.kind {
                InstanceKind::WorstCase { c } => Some(c),
                _ => None,
            },
            l: spec.lambda_max,
            l_min: diag.l_min,
            l_avg: diag.l_avg,
            l_sum: diag.l_sum,
            kappa: spec.kappa,
            delta,
        })
    }
}

/// `(2 + ln(n)/π)²`, the triangular-truncation constant.
fn truncation(n: usize) -> f64 {
    (2.0 + (n as f64).ln() / PI).powi(2)
}

/// Per-epoch objective contraction factor guaranteed for sGS-CD:
/// `(min{1 − L_min/(nκL_avg), 1 − L_min/(L(2+ln n/π)²κ)})²`, floored at 0.
pub fn upper_bound_sgs(inp: &BoundInputs) -> f64 {
    let n = inp.n as f64;
    let first = 1.0 - inp.l_min / (n * inp.kappa * inp.l_avg);
    let second = 1.0 - inp.l_min / (inp.l * truncation(inp.n) * inp.kappa);
    first.min(second).max(0.0).powi(2)
}

/// Per-epoch objective contraction factor guaranteed for GBS-CD:
/// `(1 − 1/(κ·min{ΣL_i, (2+ln n/π)²L}))²`, floored at 0.
pub fn upper_bound_gbs(inp: &BoundInputs) -> f64 {
    let m = inp.l_sum.min(truncation(inp.n) * inp.l);
    (1.0 - 1.0 / (inp.kappa * m)).max(0.0).powi(2)
}

fn floor(delta: f64, rate: f64, k: usize) -> f64 {
    (1.0 - delta) * (1.0 - rate).max(0.0).powi(2 * k as i32 + 2)
}

/// sGS-CD error floor after `k` epochs: `(1−δ)(1 − 4π²/(nκ))^{2k+2}`.
pub fn lower_bound_sgs(n: usize, kappa: f64, delta: f64, k: usize) -> f64 {
    floor(delta, 4.0 * PI * PI / (n as f64 * kappa), k)
}

/// C-CD error floor after `k` epochs: `(1−δ)(1 − 2π²/(nκ))^{2k+2}`.
pub fn lower_bound_ccd(n: usize, kappa: f64, delta: f64, k: usize) -> f64 {
    floor(delta, 2.0 * PI * PI / (n as f64 * kappa), k)
}

/// Applicability conditions of the GBS floor on `Q(c, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Validity {
    /// `8cn ≥ π²(1 + √(1 + 16(1−c)/π²))`.
    pub cond1: Option<bool>,
    /// `n` at least the larger root of the quadratic lower-bound expression.
    pub cond2: Option<bool>,
}

impl Validity {
    pub fn holds(&self) -> bool {
        self.cond1 == Some(true) && self.cond2 == Some(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbsFloor {
    pub floor: f64,
    pub validity: Validity,
    /// Right-hand side of the second condition on `n`.
    pub cond2_threshold: f64,
}

/// Threshold of the second condition, evaluated exactly as printed.
fn cond2_threshold(c: f64) -> f64 {
    let pi2 = PI * PI;
    let quad = 4.0 * c * c / pi2 - c * c / 3.0;
    let lin = c * c / 2.0 - 2.0 * c;
    let cst = 2.0 - 2.0 * c + c * c / 6.0;
    let disc = lin * lin - 4.0 * quad * cst;
    ((2.0 * c - c * c) + disc.sqrt()) / (8.0 * c * c / pi2 - 2.0 * c * c / 3.0)
}

/// Evaluates both applicability conditions of the GBS floor.
pub fn validity_gbs(n: usize, c: f64) -> (Validity, f64) {
    let pi2 = PI * PI;
    let nf = n as f64;
    let cond1 = 8.0 * c * nf >= pi2 * (1.0 + (1.0 + 16.0 * (1.0 - c) / pi2).sqrt());
    let t = cond2_threshold(c);
    (Validity { cond1: Some(cond1), cond2: Some(nf >= t) }, t)
}

/// GBS-CD error floor after `k` epochs, `(1−δ)(1 − 3π²/((12−π²)cnκ))^{2k+2}`,
/// with its applicability flags. `c` is the off-diagonal of `Q(c, n)`.
pub fn lower_bound_gbs(n: usize, c: f64, kappa: f64, delta: f64, k: usize) -> GbsFloor {
    let pi2 = PI * PI;
    let rate = 3.0 * pi2 / ((12.0 - pi2) * c * n as f64 * kappa);
    let (validity, cond2_threshold) = validity_gbs(n, c);
    GbsFloor { floor: floor(delta, rate, k), validity, cond2_threshold }
}
