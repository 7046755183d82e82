//! Experiment grids and report tables.

mod report;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::admm::{run_admm_to_tolerance, AdmmRule, ConstrainedQP};
use crate::cd::{advance, run_to_tolerance, ErrorMetric, GdStep, Init, OrderRule, Outcome, RunOptions, StoppingRule};
use crate::error::{Error, Result};
use crate::instances::{make_circulant_hankel, make_tridiagonal, make_worst_case, InstanceKind, QuadraticProblem};
use crate::spectral::{lower_bound_ccd, lower_bound_gbs, lower_bound_sgs, spectral_report};
use crate::tol;

pub use report::{emit, Cell, Format, ReportTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentId {
    /// Epochs to tolerance for every CD rule.
    E1Epochs,
    /// GBS/sGS epoch ratios against the other CD rules.
    E2Ratios,
    /// `1 − ρ(M)` of the (expected) update matrices.
    E3Spectral,
    /// ADMM variants on the worst-case constrained problem.
    E4Admm,
    /// ADMM variants on circulant Hankel and tridiagonal instances.
    E5AltInstances,
    /// Measured epochs against the lower-bound floors and complexity expressions.
    E6Bounds,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::E1Epochs,
        ExperimentId::E2Ratios,
        ExperimentId::E3Spectral,
        ExperimentId::E4Admm,
        ExperimentId::E5AltInstances,
        ExperimentId::E6Bounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::E1Epochs => "E1_epochs",
            ExperimentId::E2Ratios => "E2_ratios",
            ExperimentId::E3Spectral => "E3_spectral",
            ExperimentId::E4Admm => "E4_admm",
            ExperimentId::E5AltInstances => "E5_alt_instances",
            ExperimentId::E6Bounds => "E6_bounds",
        }
    }

    fn is_admm(self) -> bool {
        matches!(self, ExperimentId::E4Admm | ExperimentId::E5AltInstances)
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    /// Accepts `E3`, `e3` or the full name `E3_spectral`.
    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_uppercase();
        let short = key.split('_').next().unwrap_or("");
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name().to_ascii_uppercase() == key || id.name()[..2] == *short)
            .ok_or_else(|| Error::Parameter(format!("unknown experiment {s:?} (expected E1..E6)")))
    }
}

/// Solver settings an experiment may override.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overrides {
    pub sigma: f64,
    pub beta: f64,
    pub gd_step: GdStep,
    /// `None` picks the experiment default: iterate error for E1/E2,
    /// objective error for E6 and the stacked primal-dual error for ADMM.
    pub error_metric: Option<ErrorMetric>,
}

impl Default for Overrides {
    fn default() -> Self {
        Overrides { sigma: 1.0, beta: 1.0, gd_step: GdStep::default(), error_metric: None }
    }
}

/// A full experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub ns: Vec<usize>,
    pub cs: Vec<f64>,
    pub epsilon: f64,
    pub seeds: Vec<u64>,
    pub max_epochs: usize,
    pub overrides: Overrides,
    /// Runs the experiment on this instance instead of the generated grid.
    pub instance: Option<QuadraticProblem>,
}

impl ExperimentSpec {
    /// The default grid of the experiment.
    pub fn new(id: ExperimentId) -> Self {
        let (ns, cs, epsilon): (Vec<usize>, Vec<f64>, f64) = match id {
            ExperimentId::E1Epochs | ExperimentId::E2Ratios => (vec![100, 200, 600], vec![0.8], 1e-8),
            ExperimentId::E3Spectral => (vec![20, 100, 1000], vec![0.5, 0.8, 0.99], 1e-8),
            ExperimentId::E4Admm => (vec![100, 200, 400], vec![0.3, 0.95, 0.1], 1e-5),
            ExperimentId::E5AltInstances => (vec![25, 50, 100], vec![], 1e-5),
            ExperimentId::E6Bounds => (vec![20, 50, 100], vec![0.99], 1e-8),
        };
        ExperimentSpec {
            id,
            ns,
            cs,
            epsilon,
            seeds: (0..5).collect(),
            max_epochs: tol::DEFAULT_MAX_EPOCHS,
            overrides: Overrides::default(),
            instance: None,
        }
    }

    pub fn metric(&self) -> ErrorMetric {
        self.overrides.error_metric.unwrap_or(match self.id {
            ExperimentId::E6Bounds => ErrorMetric::Objective,
            id if id.is_admm() => ErrorMetric::Stacked,
            _ => ErrorMetric::Iterate,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.instance.is_none() {
            if self.ns.is_empty() {
                return Err(Error::Parameter("the n grid is empty".into()));
            }
            if self.id != ExperimentId::E5AltInstances && self.cs.is_empty() {
                return Err(Error::Parameter("the c grid is empty".into()));
            }
        }
        if let Some(&c) = self.cs.iter().find(|&&c| !(c > 0.0 && c < 1.0)) {
            return Err(Error::Parameter(format!("c must lie in (0, 1), got {c}")));
        }
        if let Some(&n) = self.ns.iter().find(|&&n| n < 2) {
            return Err(Error::Parameter(format!("n must be at least 2, got {n}")));
        }
        if self.seeds.is_empty() && self.id != ExperimentId::E3Spectral {
            return Err(Error::Parameter("at least one seed is required".into()));
        }
        StoppingRule::new(self.epsilon, self.max_epochs)?;
        if self.id.is_admm() {
            if let Some(m) = self.overrides.error_metric.filter(|&m| m != ErrorMetric::Stacked) {
                return Err(Error::Parameter(format!(
                    "--experiment {} conflicts with --error-metric {}: ADMM runs measure the stacked (x; lambda) error",
                    self.id,
                    metric_name(m)
                )));
            }
            ConstrainedQP::new(
                crate::matcore::DenseMatrix::identity(1),
                crate::matcore::DenseMatrix::identity(1),
                vec![0.0].into(),
                self.overrides.sigma,
                self.overrides.beta,
            )?;
        }
        Ok(())
    }

    fn stop(&self) -> Result<StoppingRule> {
        StoppingRule::new(self.epsilon, self.max_epochs)
    }

    /// The CD instances of the grid, in grid order.
    pub fn instances(&self) -> Result<Vec<QuadraticProblem>> {
        if let Some(p) = &self.instance {
            return Ok(vec![p.clone()]);
        }
        if self.id == ExperimentId::E5AltInstances {
            let mut out = Vec::new();
            for &n in &self.ns {
                for &s in &self.seeds {
                    out.push(make_circulant_hankel(n, s)?);
                }
                for &s in &self.seeds {
                    out.push(make_tridiagonal(n, s)?);
                }
            }
            return Ok(out);
        }
        let mut out = Vec::new();
        for &n in &self.ns {
            for &c in &self.cs {
                out.push(make_worst_case(n, c)?);
            }
        }
        Ok(out)
    }

    /// Writes every grid instance as JSON into `dir`.
    pub fn dump_instances(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| crate::instances::io_error(dir, e))?;
        let mut paths = Vec::new();
        for p in self.instances()? {
            let name = match p.kind {
                InstanceKind::WorstCase { c } => format!("worst_case_n{}_c{c}.json", p.n()),
                InstanceKind::CirculantHankel { seed } => format!("circulant_hankel_n{}_seed{seed}.json", p.n()),
                InstanceKind::Tridiagonal { seed } => format!("tridiagonal_n{}_seed{seed}.json", p.n()),
                InstanceKind::Custom => format!("custom_n{}.json", p.n()),
            };
            let path = dir.join(name);
            p.save(&path)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

fn metric_name(m: ErrorMetric) -> &'static str {
    match m {
        ErrorMetric::Objective => "objective",
        ErrorMetric::Iterate => "iterate",
        ErrorMetric::Stacked => "stacked",
    }
}

fn kind_name(kind: &InstanceKind) -> &'static str {
    match kind {
        InstanceKind::WorstCase { .. } => "worst_case",
        InstanceKind::CirculantHankel { .. } => "circulant_hankel",
        InstanceKind::Tridiagonal { .. } => "tridiagonal",
        InstanceKind::Custom => "custom",
    }
}

fn kind_c(kind: &InstanceKind) -> Option<f64> {
    match kind {
        InstanceKind::WorstCase { c } => Some(*c),
        _ => None,
    }
}

/// Runs the whole grid. Cells run in parallel; rows come out sorted by grid
/// key, then rule, then seed, so the output does not depend on the number of
/// worker threads. A failing cell is recorded in its row and the run goes on.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ReportTable> {
    spec.validate()?;
    match spec.id {
        ExperimentId::E1Epochs => Ok(epochs_table(spec, &cd_runs(spec, &OrderRule::ALL)?)),
        ExperimentId::E2Ratios => Ok(ratio_table(spec, &cd_runs(spec, &OrderRule::ALL)?)),
        ExperimentId::E3Spectral => spectral_table(spec),
        ExperimentId::E4Admm | ExperimentId::E5AltInstances => Ok(epochs_table(spec, &admm_runs(spec)?)),
        ExperimentId::E6Bounds => bounds_table(spec),
    }
}

/// Outcome of one (instance, rule, seed) run.
#[derive(Debug, Clone)]
struct RunCell {
    instance: &'static str,
    n: usize,
    c: Option<f64>,
    rule: &'static str,
    seed: u64,
    result: std::result::Result<(usize, usize, Outcome, f64), String>,
}

impl RunCell {
    fn group(&self) -> (&'static str, usize, Option<u64>, &'static str) {
        (self.instance, self.n, self.c.map(f64::to_bits), self.rule)
    }
}

/// Grid slots in output order, each with the (instance, seed) pairs it runs.
/// Generated E5 instances carry their own seed; every other instance runs
/// all seeds of the spec.
fn slots<'a>(spec: &ExperimentSpec, problems: &'a [QuadraticProblem]) -> Vec<Vec<(&'a QuadraticProblem, u64)>> {
    let mut out: Vec<Vec<(&QuadraticProblem, u64)>> = Vec::new();
    for p in problems {
        match p.kind {
            InstanceKind::CirculantHankel { seed } | InstanceKind::Tridiagonal { seed } if spec.instance.is_none() => {
                match out.last_mut() {
                    Some(slot) if slot[0].0.n() == p.n() && kind_name(&slot[0].0.kind) == kind_name(&p.kind) => {
                        slot.push((p, seed))
                    }
                    _ => out.push(vec![(p, seed)]),
                }
            }
            _ => out.push(spec.seeds.iter().map(|&s| (p, s)).collect()),
        }
    }
    out
}

fn run_grid<R, F>(spec: &ExperimentSpec, rules: &[R], run: F) -> Result<Vec<RunCell>>
where
    R: RuleLabel + Copy + Send + Sync,
    F: Fn(&QuadraticProblem, R, u64) -> Result<(usize, usize, Outcome, f64)> + Sync,
{
    let problems = spec.instances()?;
    let tasks: Vec<(&QuadraticProblem, R, u64)> = slots(spec, &problems)
        .into_iter()
        .flat_map(|slot| rules.iter().flat_map(move |&r| slot.clone().into_iter().map(move |(p, s)| (p, r, s))))
        .collect();
    Ok(tasks
        .into_par_iter()
        .map(|(p, rule, seed)| RunCell {
            instance: kind_name(&p.kind),
            n: p.n(),
            c: kind_c(&p.kind),
            rule: rule.rule_label(),
            seed,
            result: run(p, rule, seed).map_err(|e| e.to_string()),
        })
        .collect())
}

trait RuleLabel {
    fn rule_label(self) -> &'static str;
}

impl RuleLabel for OrderRule {
    fn rule_label(self) -> &'static str {
        self.label()
    }
}

impl RuleLabel for AdmmRule {
    fn rule_label(self) -> &'static str {
        self.label()
    }
}

fn cd_runs(spec: &ExperimentSpec, rules: &[OrderRule]) -> Result<Vec<RunCell>> {
    let stop = spec.stop()?;
    let options = RunOptions { metric: spec.metric(), gd_step: spec.overrides.gd_step };
    run_grid(spec, rules, |p, rule, seed| {
        run_to_tolerance(p, rule, stop, seed, &Init::Uniform, options)
            .map(|r| (r.epochs, r.passes(), r.outcome, r.final_error()))
    })
}

fn admm_problem(spec: &ExperimentSpec, p: &QuadraticProblem) -> Result<ConstrainedQP> {
    ConstrainedQP::from_quadratic(p)?.with_sigma(spec.overrides.sigma)?.with_beta(spec.overrides.beta)
}

fn admm_runs(spec: &ExperimentSpec) -> Result<Vec<RunCell>> {
    let stop = spec.stop()?;
    let rules: &[AdmmRule] = match spec.id {
        ExperimentId::E5AltInstances => &[AdmmRule::Gbs, AdmmRule::Sgs, AdmmRule::RandomPermuted],
        _ => &AdmmRule::ALL,
    };
    run_grid(spec, rules, |p, rule, seed| {
        let qp = admm_problem(spec, p)?;
        run_admm_to_tolerance(&qp, rule, stop, seed, &Init::Uniform)
            .map(|r| (r.epochs, r.passes(), r.outcome, r.final_error()))
    })
}

/// Mean, min and max epochs of a group, or the first error message.
struct GroupStats {
    mean: Option<f64>,
    min: Option<usize>,
    max: Option<usize>,
    converged: bool,
    error: Option<String>,
}

fn group_stats(cells: &[&RunCell]) -> GroupStats {
    let error = cells.iter().find_map(|c| c.result.as_ref().err().cloned());
    let ok: Vec<(usize, Outcome)> =
        cells.iter().filter_map(|c| c.result.as_ref().ok().map(|r| (r.0, r.2))).collect();
    let epochs: Vec<usize> = ok.iter().map(|r| r.0).collect();
    GroupStats {
        mean: (!epochs.is_empty() && error.is_none())
            .then(|| epochs.iter().sum::<usize>() as f64 / epochs.len() as f64),
        min: epochs.iter().min().copied(),
        max: epochs.iter().max().copied(),
        converged: error.is_none() && ok.iter().all(|r| r.1 == Outcome::Converged),
        error,
    }
}

fn grouped(cells: &[RunCell]) -> Vec<Vec<&RunCell>> {
    let mut groups: Vec<Vec<&RunCell>> = Vec::new();
    for c in cells {
        match groups.last_mut() {
            Some(g) if g[0].group() == c.group() => g.push(c),
            _ => groups.push(vec![c]),
        }
    }
    groups
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Converged => "converged",
        Outcome::MaxEpochs => "max_epochs",
        Outcome::Diverged => "diverged",
    }
}

/// Mean epochs of `rule` in the same (instance, n, c) slot as `like`.
fn slot_mean(groups: &[Vec<&RunCell>], like: &RunCell, rule: &str) -> Option<f64> {
    groups
        .iter()
        .find(|g| g[0].instance == like.instance && g[0].n == like.n && g[0].c == like.c && g[0].rule == rule)
        .and_then(|g| group_stats(g).mean)
}

fn ratio(num: Option<f64>, den: Option<f64>) -> Cell {
    match (num, den) {
        (Some(a), Some(b)) if b > 0.0 => Cell::Decimal(a / b),
        _ => Cell::Empty,
    }
}

const EPOCH_SCHEMA: [&str; 13] = [
    "instance",
    "n",
    "c",
    "rule",
    "seed",
    "epochs",
    "min_epochs",
    "max_epochs",
    "outcome",
    "final_error",
    "gbs_ratio",
    "sgs_ratio",
    "status",
];

/// Per-seed rows followed by a `mean` row for each (instance, n, c, rule).
/// The ratio columns hold mean epochs of the GBS and sGS variant over this
/// rule's mean.
fn epochs_table(spec: &ExperimentSpec, cells: &[RunCell]) -> ReportTable {
    let (gbs, sgs) = if spec.id.is_admm() {
        (AdmmRule::Gbs.label(), AdmmRule::Sgs.label())
    } else {
        (OrderRule::Gbs.label(), OrderRule::Sgs.label())
    };
    let mut t = ReportTable::new(spec.id.name(), &EPOCH_SCHEMA);
    let groups = grouped(cells);
    for g in &groups {
        let head = g[0];
        for c in g {
            let (epochs, outcome, err, status) = match &c.result {
                Ok((e, _, o, f)) => (Cell::from(*e), Cell::from(outcome_name(*o)), Cell::Float(*f), "ok".to_string()),
                Err(m) => (Cell::Empty, Cell::Empty, Cell::Empty, format!("error: {m}")),
            };
            t.push(vec![
                c.instance.into(),
                c.n.into(),
                c.c.into(),
                c.rule.into(),
                c.seed.into(),
                epochs,
                Cell::Empty,
                Cell::Empty,
                outcome,
                err,
                Cell::Empty,
                Cell::Empty,
                status.into(),
            ]);
        }
        let s = group_stats(g);
        t.push(vec![
            head.instance.into(),
            head.n.into(),
            head.c.into(),
            head.rule.into(),
            "mean".into(),
            s.mean.map(Cell::Decimal).unwrap_or(Cell::Empty),
            s.min.into(),
            s.max.into(),
            (if s.converged { "converged" } else { "incomplete" }).into(),
            Cell::Empty,
            ratio(slot_mean(&groups, head, gbs), s.mean),
            ratio(slot_mean(&groups, head, sgs), s.mean),
            s.error.map_or_else(|| "ok".to_string(), |m| format!("error: {m}")).into(),
        ]);
    }
    t
}

/// Ratios of GBS-CD and sGS-CD mean epochs over every other rule.
fn ratio_table(spec: &ExperimentSpec, cells: &[RunCell]) -> ReportTable {
    let mut t = ReportTable::new(
        spec.id.name(),
        &["n", "c", "rule", "mean_epochs", "gbs_ratio", "sgs_ratio", "status"],
    );
    let groups = grouped(cells);
    for g in &groups {
        let head = g[0];
        if head.rule == OrderRule::Gbs.label() || head.rule == OrderRule::Sgs.label() {
            continue;
        }
        let s = group_stats(g);
        t.push(vec![
            head.n.into(),
            head.c.into(),
            head.rule.into(),
            s.mean.map(Cell::Decimal).unwrap_or(Cell::Empty),
            ratio(slot_mean(&groups, head, OrderRule::Gbs.label()), s.mean),
            ratio(slot_mean(&groups, head, OrderRule::Sgs.label()), s.mean),
            s.error.map_or_else(|| "ok".to_string(), |m| format!("error: {m}")).into(),
        ]);
    }
    t
}

/// Column order of the spectral table.
pub const SPECTRAL_RULES: [OrderRule; 6] = [
    OrderRule::Gbs,
    OrderRule::Sgs,
    OrderRule::Gradient,
    OrderRule::Cyclic,
    OrderRule::Randomized,
    OrderRule::RandomPermuted,
];

fn spectral_table(spec: &ExperimentSpec) -> Result<ReportTable> {
    let problems = spec.instances()?;
    let tasks: Vec<(&QuadraticProblem, OrderRule)> =
        problems.iter().flat_map(|p| SPECTRAL_RULES.iter().map(move |&r| (p, r))).collect();
    let reports: Vec<_> = tasks.into_par_iter().map(|(p, r)| (p, r, spectral_report(p, r))).collect();
    let mut t = ReportTable::new(
        spec.id.name(),
        &[
            "n",
            "c",
            "rule",
            "one_minus_rho",
            "acceleration_ratio",
            "method",
            "extrapolated",
            "bound_upper",
            "bound_lower",
            "status",
        ],
    );
    for chunk in reports.chunks(SPECTRAL_RULES.len()) {
        let base = chunk[0].2.as_ref().ok().map(|r| r.one_minus_rho);
        for (p, rule, rep) in chunk {
            match rep {
                Ok(r) => t.push(vec![
                    p.n().into(),
                    kind_c(&p.kind).into(),
                    rule.label().into(),
                    Cell::Rate(r.one_minus_rho),
                    ratio(Some(r.one_minus_rho), base),
                    format!("{:?}", r.method).into(),
                    r.extrapolated.into(),
                    r.bound_upper.map(Cell::Float).unwrap_or(Cell::Empty),
                    r.bound_lower.map(Cell::Float).unwrap_or(Cell::Empty),
                    "ok".into(),
                ]),
                Err(e) => t.push(vec![
                    p.n().into(),
                    kind_c(&p.kind).into(),
                    rule.label().into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    format!("error: {e}").into(),
                ]),
            }
        }
    }
    Ok(t)
}

/// Probability slack used for the floor predictions.
pub const FLOOR_DELTA: f64 = 0.5;

/// Burn-in before the floor comparison, in multiples of `n²` epochs.
///
/// The lower bounds hold for a quadratic chosen after the start point. On
/// `Q(c, n)` with a uniform start almost all of the objective error sits in
/// the fast `λ_max` mode, so the floor is compared against a run restarted
/// from the burned-in iterate, where the slow modes dominate.
pub const BURN_IN_PER_N2: usize = 10;

/// Smallest `k` at which a per-epoch floor `(1−δ)(1−a)^{2k+2}` drops to `eps`.
pub fn floor_epochs(per_epoch_factor: f64, delta: f64, eps: f64) -> f64 {
    if per_epoch_factor <= 0.0 {
        return 0.0;
    }
    // per_epoch_factor is (1−a)², so the floor is (1−δ)·factor^{k+1}.
    ((eps / (1.0 - delta)).ln() / per_epoch_factor.ln() - 1.0).max(0.0).ceil()
}

/// Mean epochs to `spec.epsilon` after restarting every seed's run from its
/// iterate after `BURN_IN_PER_N2·n²` epochs. `None` when a run fails or
/// hits the cap.
fn restart_mean(spec: &ExperimentSpec, p: &QuadraticProblem, rule: OrderRule, cells: &[&RunCell]) -> Result<Option<f64>> {
    let stop = spec.stop()?;
    let options = RunOptions { metric: spec.metric(), gd_step: spec.overrides.gd_step };
    let burn = BURN_IN_PER_N2 * p.n() * p.n();
    let seeds: Vec<u64> = cells.iter().map(|c| c.seed).collect();
    let epochs: Vec<Option<usize>> = seeds
        .par_iter()
        .map(|&seed| -> Result<Option<usize>> {
            let x = advance(p, rule, &Init::Uniform.point(p.n(), seed), burn, seed, options)?;
            let r = run_to_tolerance(p, rule, stop, seed, &Init::Given(x), options)?;
            Ok(r.converged().then_some(r.epochs))
        })
        .collect::<Result<_>>()?;
    let done: Option<Vec<usize>> = epochs.into_iter().collect();
    Ok(done.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<usize>() as f64 / v.len() as f64))
}

fn bounds_table(spec: &ExperimentSpec) -> Result<ReportTable> {
    const RULES: [OrderRule; 5] =
        [OrderRule::Sgs, OrderRule::Gbs, OrderRule::Cyclic, OrderRule::Gradient, OrderRule::Randomized];
    let cells = cd_runs(spec, &RULES)?;
    let groups = grouped(&cells);
    let problems = spec.instances()?;
    let mut t = ReportTable::new(
        spec.id.name(),
        &[
            "n",
            "c",
            "rule",
            "kappa",
            "kappa_cd",
            "mean_epochs",
            "floor_epochs",
            "restart_epochs",
            "validity",
            "above_floor",
            "measured_complexity",
            "complexity_kappa",
            "complexity_kappa_cd",
            "status",
        ],
    );
    for g in &groups {
        let head = g[0];
        let p = problems
            .iter()
            .find(|p| p.n() == head.n && kind_c(&p.kind) == head.c)
            .expect("every run cell comes from a grid instance");
        let spec_info = p.spectrum()?;
        let (n, kappa, kcd) = (head.n as f64, spec_info.kappa, spec_info.kappa_cd);
        let rule = RULES.into_iter().find(|r| r.label() == head.rule).expect("rule from the list");
        // Per-epoch factors at δ = 0, k = 0 are exactly (1−a)².
        let (factor, validity) = match (rule, head.c) {
            (OrderRule::Sgs, Some(_)) => (Some(lower_bound_sgs(head.n, kappa, 0.0, 0)), None),
            (OrderRule::Cyclic, Some(_)) => (Some(lower_bound_ccd(head.n, kappa, 0.0, 0)), None),
            (OrderRule::Gbs, Some(c)) => {
                let f = lower_bound_gbs(head.n, c, kappa, 0.0, 0);
                (Some(f.floor), Some(f.validity.holds()))
            }
            _ => (None, None),
        };
        let floor = factor.map(|f| floor_epochs(f, FLOOR_DELTA, spec.epsilon));
        let restart = match factor {
            Some(_) => restart_mean(spec, p, rule, g)?,
            None => None,
        };
        let (ck, ccd) = match rule {
            OrderRule::Sgs | OrderRule::Cyclic => (Some(n.powi(3) * kappa / 40.0), Some(n.powi(4) * kcd / 40.0)),
            OrderRule::Gbs => (Some(n.powi(3) * kappa / 15.0), Some(n.powi(4) * kcd / 15.0)),
            OrderRule::Gradient => (Some(n * n * kappa), None),
            _ => (None, Some(n * n * kcd)),
        };
        let s = group_stats(g);
        let above = match (restart, floor, validity) {
            (_, _, Some(false)) => None,
            (Some(m), Some(f), _) => Some(m >= f),
            _ => None,
        };
        let passes = g.iter().filter_map(|c| c.result.as_ref().ok().map(|r| r.1)).sum::<usize>() as f64
            / g.len().max(1) as f64;
        t.push(vec![
            head.n.into(),
            head.c.into(),
            head.rule.into(),
            Cell::Float(kappa),
            Cell::Float(kcd),
            s.mean.map(Cell::Decimal).unwrap_or(Cell::Empty),
            floor.map(Cell::Float).unwrap_or(Cell::Empty),
            restart.map(Cell::Decimal).unwrap_or(Cell::Empty),
            validity.map(|v| if v { "holds" } else { "fails" }).into(),
            above.into(),
            s.mean.map(|_| Cell::Float(passes * n * n)).unwrap_or(Cell::Empty),
            ck.map(Cell::Float).unwrap_or(Cell::Empty),
            ccd.map(Cell::Float).unwrap_or(Cell::Empty),
            s.error.map_or_else(|| "ok".to_string(), |m| format!("error: {m}")).into(),
        ]);
    }
    Ok(t)
}
