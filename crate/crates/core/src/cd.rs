//! Coordinate-descent solvers for quadratic problems: cyclic, symmetric
//! Gauss-Seidel, Gaussian back substitution, randomized, random-permutation
//! and gradient descent, with epoch accounting and error traces.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{io_error, QuadraticProblem};
use crate::matcore::{dot, inverse_lower, lower_triangular, norm2, DenseMatrix, Operator, Vector};
use crate::rng::{self, stream_rng, Stream};
use crate::tol;

/// Update rule of a coordinate-descent-family method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderRule {
    Cyclic,
    Sgs,
    Gbs,
    Randomized,
    RandomPermuted,
    Gradient,
}

impl OrderRule {
    pub const ALL: [OrderRule; 6] = [
        OrderRule::Gbs,
        OrderRule::Sgs,
        OrderRule::Cyclic,
        OrderRule::Randomized,
        OrderRule::RandomPermuted,
        OrderRule::Gradient,
    ];

    /// SGS and GBS epochs consist of two passes over the coordinates.
    pub fn passes_per_epoch(self) -> usize {
        match self {
            OrderRule::Sgs | OrderRule::Gbs => 2,
            _ => 1,
        }
    }

    pub fn is_randomized(self) -> bool {
        matches!(self, OrderRule::Randomized | OrderRule::RandomPermuted)
    }

    pub fn label(self) -> &'static str {
        match self {
            OrderRule::Cyclic => "C-CD",
            OrderRule::Sgs => "sGS-CD",
            OrderRule::Gbs => "GBS-CD",
            OrderRule::Randomized => "R-CD",
            OrderRule::RandomPermuted => "RP-CD",
            OrderRule::Gradient => "GD",
        }
    }
}

impl fmt::Display for OrderRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub epsilon: f64,
    pub max_epochs: usize,
}

impl StoppingRule {
    pub fn new(epsilon: f64, max_epochs: usize) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::Parameter(format!("epsilon = {epsilon} must be positive")));
        }
        if max_epochs == 0 {
            return Err(Error::Parameter("max_epochs must be at least 1".into()));
        }
        Ok(StoppingRule { epsilon, max_epochs })
    }
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule { epsilon: 1e-8, max_epochs: tol::DEFAULT_MAX_EPOCHS }
    }
}

/// How the relative error of an iterate is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    /// `(f(xᵏ) − f*) / (f(x⁰) − f*)`.
    Objective,
    /// `‖xᵏ − x*‖ / ‖x⁰ − x*‖`.
    #[default]
    Iterate,
    /// `‖(xᵏ; λᵏ) − (x*; λ*)‖ / ‖(x⁰; λ⁰) − (x*; λ*)‖`; coincides with
    /// `Iterate` for unconstrained problems.
    Stacked,
}

impl FromStr for ErrorMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "objective" => Ok(ErrorMetric::Objective),
            "iterate" => Ok(ErrorMetric::Iterate),
            "stacked" => Ok(ErrorMetric::Stacked),
            _ => Err(Error::Parameter(format!("unknown error metric '{s}'"))),
        }
    }
}

/// Step size of the gradient-descent baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GdStep {
    /// `1/λ_max`.
    #[default]
    InvLambdaMax,
    /// `2/(λ_max + λ_min)`.
    TwoOverSum,
}

impl GdStep {
    pub fn step(self, lambda_min: f64, lambda_max: f64) -> Result<f64> {
        if lambda_max <= 0.0 {
            return Err(Error::Degenerate("λ_max = 0".into()));
        }
        Ok(match self {
            GdStep::InvLambdaMax => 1.0 / lambda_max,
            GdStep::TwoOverSum => 2.0 / (lambda_max + lambda_min),
        })
    }
}

/// Starting point of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Independent uniform [0, 1) entries drawn from the run seed.
    Uniform,
    Given(Vector),
}

impl Init {
    pub fn point(&self, n: usize, seed: u64) -> Vector {
        match self {
            Init::Uniform => Vector::from(rng::uniform_vector(&mut stream_rng(Stream::Init, n, seed), n)),
            Init::Given(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Converged,
    MaxEpochs,
    Diverged,
}

/// One solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord<R = OrderRule> {
    pub rule: R,
    pub epochs: usize,
    pub passes_per_epoch: usize,
    /// Relative error after each epoch; entry 0 is the starting point (1, or 0
    /// if the start is already optimal).
    pub error_trace: Vec<f64>,
    /// Constraint residual `‖Ax − b‖` after each epoch (ADMM runs only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_trace: Option<Vec<f64>>,
    pub seed: u64,
    pub stop: StoppingRule,
    pub metric: ErrorMetric,
    pub outcome: Outcome,
}

impl<R> RunRecord<R> {
    pub fn converged(&self) -> bool {
        self.outcome == Outcome::Converged
    }

    pub fn final_error(&self) -> f64 {
        self.error_trace.last().copied().unwrap_or(0.0)
    }

    /// Epochs times passes per epoch.
    pub fn passes(&self) -> usize {
        self.epochs * self.passes_per_epoch
    }

    /// Trace as CSV with columns `epoch, relative_error, cumulative_passes`
    /// and, for ADMM runs, `residual`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let ser = |e: csv::Error| Error::Serde(e.to_string());
        let mut header = vec!["epoch", "relative_error", "cumulative_passes"];
        if self.residual_trace.is_some() {
            header.push("residual");
        }
        w.write_record(&header).map_err(ser)?;
        for (k, e) in self.error_trace.iter().enumerate() {
            let mut row = vec![k.to_string(), format!("{e:e}"), (k * self.passes_per_epoch).to_string()];
            if let Some(r) = &self.residual_trace {
                row.push(format!("{:e}", r[k]));
            }
            w.write_record(&row).map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| io_error(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Exact minimisation over coordinate `i`: `x_i ← x_i − (Qx − b)_i / Q_ii`.
pub fn coordinate_step(problem: &QuadraticProblem, x: &[f64], i: usize) -> Result<Vector> {
    check_dim(problem, x)?;
    let mut y = x.to_vec();
    problem.operator().sweep(&mut y, &problem.b, [i])?;
    Ok(y.into())
}

/// One cyclic epoch over `1..n`.
pub fn ccd_epoch(problem: &QuadraticProblem, x: &[f64]) -> Result<Vector> {
    epoch_with(problem, x, |s, y| s.cyclic(y))
}

/// Forward sweep `1..n` then backward sweep `n−1..1`.
pub fn sgs_epoch(problem: &QuadraticProblem, x: &[f64]) -> Result<Vector> {
    epoch_with(problem, x, |s, y| s.sgs(y))
}

/// Cyclic prediction `x̃` followed by the correction `x ← x − B(x − x̃)`.
pub fn gbs_epoch(problem: &QuadraticProblem, x: &[f64]) -> Result<Vector> {
    epoch_with(problem, x, |s, y| s.gbs(y))
}

/// `n` coordinate steps at indices drawn uniformly with replacement.
pub fn rcd_epoch(problem: &QuadraticProblem, x: &[f64], rng: &mut ChaCha8Rng) -> Result<Vector> {
    epoch_with(problem, x, |s, y| s.randomized(y, rng))
}

/// One cyclic epoch under a fresh uniform permutation.
pub fn rpcd_epoch(problem: &QuadraticProblem, x: &[f64], rng: &mut ChaCha8Rng) -> Result<Vector> {
    epoch_with(problem, x, |s, y| s.permuted(y, rng))
}

/// Gradient step `x ← x − (Qx − b)/λ_max`.
pub fn gd_epoch(problem: &QuadraticProblem, x: &[f64], lambda_max: f64) -> Result<Vector> {
    if lambda_max <= 0.0 {
        return Err(Error::Degenerate("λ_max = 0".into()));
    }
    epoch_with(problem, x, |s, y| {
        s.gradient(y, 1.0 / lambda_max);
        Ok(())
    })
}

/// `B = blockdiag(1, (Γ_{2:n})⁻ᵀ D_{2:n})`, upper triangular.
pub fn gbs_correction_matrix(problem: &QuadraticProblem) -> Result<DenseMatrix> {
    correction_matrix(&problem.q)
}

/// `blockdiag(1, (Γ_{2:n})⁻ᵀ D_{2:n})` for the lower triangle `Γ` and diagonal
/// `D` of a square matrix.
pub fn correction_matrix(m: &DenseMatrix) -> Result<DenseMatrix> {
    m.require_square()?;
    let n = m.rows();
    let mut out = DenseMatrix::identity(n);
    if n < 2 {
        return Ok(out);
    }
    let tail = m.trailing_block(1);
    let inv_t = inverse_lower(&lower_triangular(&tail)?).map_err(|e| match e {
        Error::SingularTriangular { index } => Error::SingularCoordinate { index: index + 1 },
        other => other,
    })?;
    for i in 1..n {
        for j in i..n {
            // (Γ_{2:n})⁻ᵀ[i][j] = (Γ_{2:n})⁻¹[j][i]
            out[(i, j)] = inv_t[(j - 1, i - 1)] * m[(j, j)];
        }
    }
    Ok(out)
}

fn check_dim(problem: &QuadraticProblem, x: &[f64]) -> Result<()> {
    if x.len() != problem.n() {
        return Err(Error::Dimension(format!("x has {} entries, n = {}", x.len(), problem.n())));
    }
    Ok(())
}

fn epoch_with<F>(problem: &QuadraticProblem, x: &[f64], f: F) -> Result<Vector>
where
    F: FnOnce(&Sweeper<'_>, &mut [f64]) -> Result<()>,
{
    check_dim(problem, x)?;
    let s = Sweeper::new(problem);
    let mut y = x.to_vec();
    f(&s, &mut y)?;
    Ok(y.into())
}

/// Per-problem kernels shared by the epoch functions and the run loop.
pub(crate) struct Sweeper<'a> {
    op: Operator<'a>,
    b: &'a [f64],
    n: usize,
}

impl<'a> Sweeper<'a> {
    pub(crate) fn new(problem: &'a QuadraticProblem) -> Self {
        Sweeper { op: problem.operator(), b: &problem.b, n: problem.n() }
    }

    fn cyclic(&self, x: &mut [f64]) -> Result<()> {
        self.op.sweep(x, self.b, 0..self.n)
    }

    fn sgs(&self, x: &mut [f64]) -> Result<()> {
        self.op.sweep(x, self.b, 0..self.n)?;
        self.op.sweep(x, self.b, (0..self.n.saturating_sub(1)).rev())
    }

    fn gbs(&self, x: &mut [f64]) -> Result<()> {
        let mut d = x.to_vec();
        self.op.sweep(&mut d, self.b, 0..self.n)?;
        for (di, xi) in d.iter_mut().zip(x.iter()) {
            *di = xi - *di;
        }
        self.op.upper_correction(&mut d)?;
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi -= di;
        }
        Ok(())
    }

    fn randomized(&self, x: &mut [f64], rng: &mut ChaCha8Rng) -> Result<()> {
        let n = self.n;
        self.op.sweep(x, self.b, (0..n).map(|_| rng.gen_range(0..n)))
    }

    fn permuted(&self, x: &mut [f64], rng: &mut ChaCha8Rng) -> Result<()> {
        let order = rng::permutation(rng, self.n);
        self.op.sweep(x, self.b, order)
    }

    fn gradient(&self, x: &mut [f64], step: f64) {
        let g = self.op.matvec(x);
        for ((xi, gi), bi) in x.iter_mut().zip(g).zip(self.b) {
            *xi -= step * (gi - bi);
        }
    }
}

/// Configuration of [`run_to_tolerance`] beyond the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub metric: ErrorMetric,
    pub gd_step: GdStep,
}

/// Runs exactly `epochs` epochs of `rule` from `x`, with the order stream of
/// `seed` for the randomized rules.
pub fn advance(
    problem: &QuadraticProblem,
    rule: OrderRule,
    x: &[f64],
    epochs: usize,
    seed: u64,
    options: RunOptions,
) -> Result<Vector> {
    check_dim(problem, x)?;
    let n = problem.n();
    let s = Sweeper::new(problem);
    let mut y = x.to_vec();
    let mut order_rng = stream_rng(Stream::Order, n, seed);
    let gd_step = if rule == OrderRule::Gradient {
        let spec = problem.spectrum()?;
        options.gd_step.step(spec.lambda_min, spec.lambda_max)?
    } else {
        0.0
    };
    for _ in 0..epochs {
        match rule {
            OrderRule::Cyclic => s.cyclic(&mut y)?,
            OrderRule::Sgs => s.sgs(&mut y)?,
            OrderRule::Gbs => s.gbs(&mut y)?,
            OrderRule::Randomized => s.randomized(&mut y, &mut order_rng)?,
            OrderRule::RandomPermuted => s.permuted(&mut y, &mut order_rng)?,
            OrderRule::Gradient => s.gradient(&mut y, gd_step),
        }
    }
    Ok(y.into())
}

/// Repeats epochs of `rule` until the relative error drops to `stop.epsilon`
/// or `stop.max_epochs` is reached. Non-finite or exploding iterates end the
/// run with [`Outcome::Diverged`].
pub fn run_to_tolerance(
    problem: &QuadraticProblem,
    rule: OrderRule,
    stop: StoppingRule,
    seed: u64,
    init: &Init,
    options: RunOptions,
) -> Result<RunRecord> {
    let n = problem.n();
    let mut x = init.point(n, seed).into_inner();
    check_dim(problem, &x)?;
    let s = Sweeper::new(problem);
    let mut order_rng = stream_rng(Stream::Order, n, seed);
    let gd_step = if rule == OrderRule::Gradient {
        let spec = problem.spectrum()?;
        options.gd_step.step(spec.lambda_min, spec.lambda_max)?
    } else {
        0.0
    };

    let x_star = &problem.x_star;
    let error = |x: &[f64]| -> f64 {
        let d: Vec<f64> = x.iter().zip(x_star.iter()).map(|(a, b)| a - b).collect();
        match options.metric {
            ErrorMetric::Objective => 0.5 * dot(&d, &s.op.matvec(&d)),
            ErrorMetric::Iterate | ErrorMetric::Stacked => norm2(&d),
        }
    };

    let e0 = error(&x);
    let mut record = RunRecord {
        rule,
        epochs: 0,
        passes_per_epoch: rule.passes_per_epoch(),
        error_trace: vec![if e0 == 0.0 { 0.0 } else { 1.0 }],
        residual_trace: None,
        seed,
        stop,
        metric: options.metric,
        outcome: Outcome::Converged,
    };
    if e0 == 0.0 {
        return Ok(record);
    }
    if !e0.is_finite() {
        record.outcome = Outcome::Diverged;
        return Ok(record);
    }

    loop {
        if record.epochs >= stop.max_epochs {
            record.outcome = Outcome::MaxEpochs;
            return Ok(record);
        }
        match rule {
            OrderRule::Cyclic => s.cyclic(&mut x)?,
            OrderRule::Sgs => s.sgs(&mut x)?,
            OrderRule::Gbs => s.gbs(&mut x)?,
            OrderRule::Randomized => s.randomized(&mut x, &mut order_rng)?,
            OrderRule::RandomPermuted => s.permuted(&mut x, &mut order_rng)?,
            OrderRule::Gradient => s.gradient(&mut x, gd_step),
        }
        record.epochs += 1;
        let rel = error(&x) / e0;
        record.error_trace.push(rel);
        if !rel.is_finite() || rel > tol::DIVERGENCE {
            record.outcome = Outcome::Diverged;
            return Ok(record);
        }
        if rel <= stop.epsilon {
            return Ok(record);
        }
    }
}
