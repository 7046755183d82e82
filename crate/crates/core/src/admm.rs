//! Multi-block ADMM for `min xᵀQx s.t. Ax = b` with scalar blocks.
//!
//! Every block subproblem is a one-dimensional quadratic and is minimised in
//! closed form. Writing `H = 2Q + σAᵀA`, the augmented Lagrangian in `x` is
//! `½xᵀHx − (Aᵀλ + σAᵀb)ᵀx + const`, so a primal pass is an exact coordinate
//! sweep on `H` with that right-hand side.

use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cd::{correction_matrix, ErrorMetric, Init, Outcome, RunRecord, StoppingRule};
use crate::error::{Error, Result};
use crate::instances::{make_worst_case, QuadraticProblem};
use crate::matcore::{dot, norm2, sym_eigen, DenseMatrix, Operator, Structure, Vector};
use crate::rng::{self, stream_rng, Stream};
use crate::tol;

/// Which matrix the GBS-ADMM correction `F` is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionSource {
    /// `Ω = AᵀA`, the usual GBS-ADMM correction.
    #[default]
    Constraint,
    /// The objective matrix (obj-GBS-ADMM).
    Objective,
}

/// A linearly constrained convex quadratic program with ADMM parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedQP {
    pub q_obj: DenseMatrix,
    pub a_con: DenseMatrix,
    pub b_con: Vector,
    pub sigma: f64,
    pub beta: f64,
    pub correction: CorrectionSource,
    pub q_structure: Structure,
    pub a_structure: Structure,
    /// Known primal-dual optimum, used by the error metric.
    pub optimum: Option<(Vector, Vector)>,
}

impl ConstrainedQP {
    /// Validates dimensions and parameters. With `b = 0` the origin is a KKT
    /// point and is recorded as the optimum; otherwise supply one with
    /// [`ConstrainedQP::with_optimum`] before calling the run loop.
    pub fn new(q_obj: DenseMatrix, a_con: DenseMatrix, b_con: Vector, sigma: f64, beta: f64) -> Result<Self> {
        q_obj.require_symmetric()?;
        let n = q_obj.rows();
        if a_con.cols() != n {
            return Err(Error::Dimension(format!("A has {} columns, Q is {n}x{n}", a_con.cols())));
        }
        if b_con.len() != a_con.rows() {
            return Err(Error::Dimension(format!("b has {} entries, A has {} rows", b_con.len(), a_con.rows())));
        }
        check_params(sigma, beta)?;
        let optimum = b_con
            .iter()
            .all(|&v| v == 0.0)
            .then(|| (Vector::zeros(n), Vector::zeros(a_con.rows())));
        Ok(ConstrainedQP {
            q_obj,
            a_con,
            b_con,
            sigma,
            beta,
            correction: CorrectionSource::Constraint,
            q_structure: Structure::General,
            a_structure: Structure::General,
            optimum,
        })
    }

    /// `min xᵀQx s.t. Qx = 0` for the matrix of a CD instance.
    pub fn from_quadratic(problem: &QuadraticProblem) -> Result<Self> {
        let n = problem.n();
        let mut qp = ConstrainedQP::new(problem.q.clone(), problem.q.clone(), Vector::zeros(n), 1.0, 1.0)?;
        qp.q_structure = problem.structure;
        qp.a_structure = problem.structure;
        Ok(qp)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        check_params(sigma, self.beta)?;
        self.sigma = sigma;
        Ok(self)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        check_params(self.sigma, beta)?;
        self.beta = beta;
        Ok(self)
    }

    pub fn with_correction(mut self, source: CorrectionSource) -> Self {
        self.correction = source;
        self
    }

    pub fn with_optimum(mut self, x: Vector, lambda: Vector) -> Result<Self> {
        if x.len() != self.n() || lambda.len() != self.m() {
            return Err(Error::Dimension("optimum does not match the problem".into()));
        }
        self.optimum = Some((x, lambda));
        Ok(self)
    }

    /// Number of scalar blocks.
    pub fn n(&self) -> usize {
        self.q_obj.rows()
    }

    /// Number of constraints.
    pub fn m(&self) -> usize {
        self.a_con.rows()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        dot(x, &Kernels::objective_op(self).matvec(x))
    }
}

fn check_params(sigma: f64, beta: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Parameter(format!("beta must lie in [0, 1], got {beta}")));
    }
    Ok(())
}

/// `min xᵀQx s.t. Qx = 0` with `Q = Q(c, n)`, σ = β = 1.
pub fn make_admm_worst_case(n: usize, c: f64) -> Result<ConstrainedQP> {
    ConstrainedQP::from_quadratic(&make_worst_case(n, c)?)
}

/// Primal and dual iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: Vector,
    pub lambda: Vector,
    pub epoch: usize,
}

impl AdmmState {
    /// `x` with a zero multiplier.
    pub fn primal(problem: &ConstrainedQP, x: Vector) -> Self {
        AdmmState { x, lambda: Vector::zeros(problem.m()), epoch: 0 }
    }

    fn check(&self, problem: &ConstrainedQP) -> Result<()> {
        if self.x.len() != problem.n() || self.lambda.len() != problem.m() {
            return Err(Error::Dimension(format!(
                "state ({}, {}) for a problem with n = {}, m = {}",
                self.x.len(),
                self.lambda.len(),
                problem.n(),
                problem.m()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmmRule {
    Gbs,
    Sgs,
    RandomPermuted,
    Alm,
}

impl AdmmRule {
    pub const ALL: [AdmmRule; 4] = [AdmmRule::Gbs, AdmmRule::Sgs, AdmmRule::RandomPermuted, AdmmRule::Alm];

    pub fn passes_per_epoch(self) -> usize {
        match self {
            AdmmRule::Gbs | AdmmRule::Sgs => 2,
            AdmmRule::RandomPermuted | AdmmRule::Alm => 1,
        }
    }

    pub fn is_randomized(self) -> bool {
        self == AdmmRule::RandomPermuted
    }

    pub fn label(self) -> &'static str {
        match self {
            AdmmRule::Gbs => "GBS-ADMM",
            AdmmRule::Sgs => "sGS-ADMM",
            AdmmRule::RandomPermuted => "RP-ADMM",
            AdmmRule::Alm => "ALM",
        }
    }
}

impl fmt::Display for AdmmRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// `f(x) − λᵀ(Ax − b) + (σ/2)‖Ax − b‖²`.
pub fn aug_lagrangian(problem: &ConstrainedQP, x: &[f64], lambda: &[f64]) -> Result<f64> {
    AdmmState { x: x.into(), lambda: lambda.into(), epoch: 0 }.check(problem)?;
    let k = Kernels::new(problem)?;
    let r = k.residual(x);
    Ok(problem.objective(x) - dot(lambda, &r) + 0.5 * problem.sigma * dot(&r, &r))
}

/// Forward pass `1..n`, backward pass `n−1..1`, then `λ ← λ − β(Ax − b)`.
pub fn sgs_admm_epoch(problem: &ConstrainedQP, state: &AdmmState) -> Result<AdmmState> {
    step_with(problem, state, |k, x, l| k.sgs(x, l))
}

/// Cyclic prediction pass, `λ̃ = λ − σ(Ax̃ − b)`, then the correction
/// `x ← x − βF(x − x̃)` and `λ ← λ + β(λ̃ − λ)`.
pub fn gbs_admm_epoch(problem: &ConstrainedQP, state: &AdmmState) -> Result<AdmmState> {
    step_with(problem, state, |k, x, l| k.gbs(x, l))
}

/// One forward pass in a fresh uniformly random order, then the dual update.
pub fn rp_admm_epoch(problem: &ConstrainedQP, state: &AdmmState, rng: &mut ChaCha8Rng) -> Result<AdmmState> {
    step_with(problem, state, |k, x, l| k.permuted(x, l, rng))
}

/// Joint minimisation over `x` followed by `λ ← λ − σβ(Ax − b)`.
pub fn alm_epoch(problem: &ConstrainedQP, state: &AdmmState) -> Result<AdmmState> {
    step_with(problem, state, |k, x, l| {
        let solver = AlmSolver::new(k)?;
        k.alm(x, l, &solver);
        Ok(())
    })
}

/// Whether the ALM primal system `2Q + σAᵀA` is singular, in which case
/// [`alm_epoch`] takes the least-norm solution.
pub fn alm_is_degenerate(problem: &ConstrainedQP) -> Result<bool> {
    Ok(matches!(AlmSolver::new(&Kernels::new(problem)?)?, AlmSolver::LeastNorm(_)))
}

/// The GBS-ADMM correction `F = blockdiag(1, (Γ_{2:n})⁻ᵀ D_{2:n})` for the
/// matrix selected by `problem.correction`.
pub fn gbs_correction_f(problem: &ConstrainedQP) -> Result<DenseMatrix> {
    let k = Kernels::new(problem)?;
    correction_matrix(&k.correction_op().to_dense()).map_err(degenerate_constraint)
}

fn degenerate_constraint(e: Error) -> Error {
    match e {
        Error::SingularCoordinate { index } => {
            Error::Degenerate(format!("correction matrix has zero diagonal at block {index}"))
        }
        other => other,
    }
}

fn step_with<F>(problem: &ConstrainedQP, state: &AdmmState, f: F) -> Result<AdmmState>
where
    F: FnOnce(&Kernels<'_>, &mut [f64], &mut [f64]) -> Result<()>,
{
    state.check(problem)?;
    let k = Kernels::new(problem)?;
    let mut x = state.x.to_vec();
    let mut lambda = state.lambda.to_vec();
    f(&k, &mut x, &mut lambda)?;
    Ok(AdmmState { x: x.into(), lambda: lambda.into(), epoch: state.epoch + 1 })
}

enum Constraint<'a> {
    Structured(Operator<'static>),
    Dense(&'a DenseMatrix),
}

impl Constraint<'_> {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Constraint::Structured(op) => op.matvec(x),
            Constraint::Dense(a) => (0..a.rows()).map(|i| dot(a.row(i), x)).collect(),
        }
    }

    fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Constraint::Structured(op) => op.matvec(y),
            Constraint::Dense(a) => {
                let mut out = vec![0.0; a.cols()];
                for (i, &yi) in y.iter().enumerate() {
                    for (o, &aij) in out.iter_mut().zip(a.row(i)) {
                        *o += aij * yi;
                    }
                }
                out
            }
        }
    }
}

/// Per-problem operators shared by the epoch functions and the run loop.
struct Kernels<'a> {
    h: Operator<'static>,
    omega: Operator<'static>,
    q: Operator<'static>,
    a: Constraint<'a>,
    b: &'a [f64],
    atb: Vec<f64>,
    source: CorrectionSource,
    sigma: f64,
    beta: f64,
    n: usize,
}

impl<'a> Kernels<'a> {
    fn objective_op(p: &ConstrainedQP) -> Operator<'static> {
        Operator::with_structure(&p.q_obj, p.q_structure).expect("square objective").into_owned()
    }

    fn new(p: &'a ConstrainedQP) -> Result<Self> {
        let n = p.n();
        let q = Self::objective_op(p);
        let structured_a = if p.a_con.is_square() {
            Operator::with_structure(&p.a_con, p.a_structure)
                .ok()
                .filter(|op| op.structure() != Structure::General)
                .map(Operator::into_owned)
        } else {
            None
        };
        let (a, omega) = match structured_a {
            Some(op) => {
                let omega = op.square()?;
                (Constraint::Structured(op), omega)
            }
            None => {
                let omega = if p.m() == 0 {
                    DenseMatrix::zeros(n, n)
                } else {
                    p.a_con.transpose().matmul(&p.a_con)?
                };
                (Constraint::Dense(&p.a_con), Operator::dense(omega)?)
            }
        };
        let h = q.combine(2.0, &omega, p.sigma)?;
        let atb = a.apply_t(&p.b_con);
        Ok(Kernels {
            h,
            omega,
            q,
            a,
            b: &p.b_con,
            atb,
            source: p.correction,
            sigma: p.sigma,
            beta: p.beta,
            n,
        })
    }

    fn correction_op(&self) -> &Operator<'static> {
        match self.source {
            CorrectionSource::Constraint => &self.omega,
            CorrectionSource::Objective => &self.q,
        }
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.a.apply(x);
        for (ri, bi) in r.iter_mut().zip(self.b) {
            *ri -= bi;
        }
        r
    }

    fn rhs(&self, lambda: &[f64]) -> Vec<f64> {
        let mut r = self.a.apply_t(lambda);
        for (ri, ti) in r.iter_mut().zip(&self.atb) {
            *ri += self.sigma * ti;
        }
        r
    }

    fn dual_step(&self, x: &[f64], lambda: &mut [f64], step: f64) {
        for (li, ri) in lambda.iter_mut().zip(self.residual(x)) {
            *li -= step * ri;
        }
    }

    fn sgs(&self, x: &mut [f64], lambda: &mut [f64]) -> Result<()> {
        let rhs = self.rhs(lambda);
        self.h.sweep(x, &rhs, 0..self.n)?;
        self.h.sweep(x, &rhs, (0..self.n.saturating_sub(1)).rev())?;
        self.dual_step(x, lambda, self.beta);
        Ok(())
    }

    fn gbs(&self, x: &mut [f64], lambda: &mut [f64]) -> Result<()> {
        let rhs = self.rhs(lambda);
        let mut pred = x.to_vec();
        self.h.sweep(&mut pred, &rhs, 0..self.n)?;
        let r = self.residual(&pred);
        let mut d: Vec<f64> = x.iter().zip(&pred).map(|(xi, pi)| xi - pi).collect();
        self.correction_op().upper_correction(&mut d).map_err(degenerate_constraint)?;
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi -= self.beta * di;
        }
        // λ̃ − λ = −σ(Ax̃ − b)
        for (li, ri) in lambda.iter_mut().zip(&r) {
            *li -= self.beta * self.sigma * ri;
        }
        Ok(())
    }

    fn permuted(&self, x: &mut [f64], lambda: &mut [f64], rng: &mut ChaCha8Rng) -> Result<()> {
        let rhs = self.rhs(lambda);
        self.h.sweep(x, &rhs, rng::permutation(rng, self.n))?;
        self.dual_step(x, lambda, self.beta);
        Ok(())
    }

    fn alm(&self, x: &mut [f64], lambda: &mut [f64], solver: &AlmSolver) {
        let rhs = self.rhs(lambda);
        let sol = solver.solve(&self.h, &rhs);
        x.copy_from_slice(&sol);
        self.dual_step(x, lambda, self.sigma * self.beta);
    }
}

enum AlmSolver {
    Direct,
    /// Eigenpairs of `H` with nonnegligible eigenvalues.
    LeastNorm(Vec<(f64, Vec<f64>)>),
}

impl AlmSolver {
    fn new(k: &Kernels<'_>) -> Result<Self> {
        let probe = vec![1.0; k.n];
        match k.h.solve(&probe) {
            Ok(_) => Ok(AlmSolver::Direct),
            Err(Error::NotPositiveDefinite { .. } | Error::Degenerate(_)) => {
                let eig = sym_eigen(&k.h.to_dense())?;
                let cutoff = tol::ZERO_PIVOT * eig.max().abs().max(1.0);
                let pairs = eig
                    .values
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v > cutoff)
                    .map(|(j, &v)| (v, eig.vectors.column(j)))
                    .collect();
                Ok(AlmSolver::LeastNorm(pairs))
            }
            Err(e) => Err(e),
        }
    }

    fn solve(&self, h: &Operator<'_>, r: &[f64]) -> Vec<f64> {
        match self {
            AlmSolver::Direct => h.solve(r).expect("factorisation checked at construction"),
            AlmSolver::LeastNorm(pairs) => {
                let mut out = vec![0.0; r.len()];
                for (v, u) in pairs {
                    let c = dot(u, r) / v;
                    for (o, ui) in out.iter_mut().zip(u) {
                        *o += c * ui;
                    }
                }
                out
            }
        }
    }
}

/// Repeats epochs of `rule` until `‖(x − x*; λ − λ*)‖` has dropped by
/// `stop.epsilon` relative to the start, or the cap is hit. The primal start
/// comes from `init`; the multiplier starts at zero.
pub fn run_admm_to_tolerance(
    problem: &ConstrainedQP,
    rule: AdmmRule,
    stop: StoppingRule,
    seed: u64,
    init: &Init,
) -> Result<RunRecord<AdmmRule>> {
    let (n, m) = (problem.n(), problem.m());
    let (x_star, l_star) = problem
        .optimum
        .clone()
        .ok_or_else(|| Error::Degenerate("optimum unknown; set one with with_optimum".into()))?;
    let mut state = AdmmState::primal(problem, init.point(n, seed));
    state.check(problem)?;
    let k = Kernels::new(problem)?;
    let solver = if rule == AdmmRule::Alm { Some(AlmSolver::new(&k)?) } else { None };
    let mut order_rng = stream_rng(Stream::Order, n, seed);
    let (x, lambda) = (&mut state.x, &mut state.lambda);

    let error = |x: &[f64], l: &[f64]| -> f64 {
        let dx: f64 = x.iter().zip(x_star.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let dl: f64 = l.iter().zip(l_star.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        (dx + dl).sqrt()
    };
    let residual = |x: &[f64]| if m == 0 { 0.0 } else { norm2(&k.residual(x)) };

    let e0 = error(x, lambda);
    let mut record = RunRecord {
        rule,
        epochs: 0,
        passes_per_epoch: rule.passes_per_epoch(),
        error_trace: vec![if e0 == 0.0 { 0.0 } else { 1.0 }],
        residual_trace: Some(vec![residual(x)]),
        seed,
        stop,
        metric: ErrorMetric::Stacked,
        outcome: Outcome::Converged,
    };
    if e0 == 0.0 {
        return Ok(record);
    }
    if !e0.is_finite() {
        record.outcome = Outcome::Diverged;
        return Ok(record);
    }

    let residuals = record.residual_trace.as_mut().expect("set above");
    loop {
        if record.epochs >= stop.max_epochs {
            record.outcome = Outcome::MaxEpochs;
            return Ok(record);
        }
        match rule {
            AdmmRule::Sgs => k.sgs(x, lambda)?,
            AdmmRule::Gbs => k.gbs(x, lambda)?,
            AdmmRule::RandomPermuted => k.permuted(x, lambda, &mut order_rng)?,
            AdmmRule::Alm => k.alm(x, lambda, solver.as_ref().expect("built for ALM")),
        }
        record.epochs += 1;
        let rel = error(x, lambda) / e0;
        record.error_trace.push(rel);
        residuals.push(residual(x));
        if !rel.is_finite() || rel > tol::DIVERGENCE {
            record.outcome = Outcome::Diverged;
            return Ok(record);
        }
        if rel <= stop.epsilon {
            return Ok(record);
        }
    }
}
