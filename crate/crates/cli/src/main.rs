use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use symcd::bench::{emit, run_experiment, ExperimentId, ExperimentSpec, Format};
use symcd::cd::{ErrorMetric, GdStep};
use symcd::instances::QuadraticProblem;

/// Runs the coordinate descent and ADMM experiment grids and writes the
/// result tables.
///
/// Experiments: E1 epochs to tolerance for every CD rule; E2 GBS/sGS epoch
/// ratios; E3 1 - rho(M) of the (expected) update matrices; E4 ADMM on the
/// worst-case constrained problem; E5 ADMM on circulant Hankel and
/// tridiagonal instances; E6 measured epochs against the lower-bound floors.
///
/// Exit status: 0 on success, 1 on a usage or validation error, 2 when any
/// grid cell fails or the output cannot be written.
#[derive(Debug, Parser)]
#[command(name = "symcd", version)]
struct Cli {
    /// Experiment id: E1..E6 or the long form such as E3_spectral.
    #[arg(long)]
    experiment: String,

    /// Problem size; repeat or separate with commas. Default: the experiment's grid.
    #[arg(long = "n", value_delimiter = ',')]
    n: Vec<usize>,

    /// Off-diagonal of Q(c, n); repeat or separate with commas. Default: the experiment's grid.
    #[arg(long = "c", value_delimiter = ',')]
    c: Vec<f64>,

    /// Relative error target. Default: 1e-8 for CD experiments, 1e-5 for ADMM.
    #[arg(long)]
    eps: Option<f64>,

    /// Comma-separated seeds. Default: 0,1,2,3,4.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,

    /// ADMM penalty.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,

    /// ADMM dual and correction step.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,

    /// Gradient descent step size.
    #[arg(long, value_enum, default_value_t = GdStepArg::InvLmax)]
    gd_step: GdStepArg,

    /// Error measure. Default: iterate for E1/E2, objective for E6, stacked for E4/E5.
    #[arg(long, value_enum)]
    error_metric: Option<MetricArg>,

    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,

    /// Output file. Without it the table goes to $SYMCD_OUT_DIR/<experiment>.<ext>
    /// when that variable is set, and to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Default output directory.
    #[arg(long, env = "SYMCD_OUT_DIR", hide_env_values = true)]
    out_dir: Option<PathBuf>,

    /// Write every instance of the grid as JSON into this directory.
    #[arg(long, value_name = "DIR")]
    dump_instance: Option<PathBuf>,

    /// Run on an instance file instead of the generated grid.
    #[arg(long, value_name = "FILE")]
    load_instance: Option<PathBuf>,

    /// Epoch cap per run.
    #[arg(long, default_value_t = 10_000_000)]
    max_epochs: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GdStepArg {
    /// 1/lambda_max
    InvLmax,
    /// 2/(lambda_max + lambda_min)
    TwoOverSum,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Objective,
    Iterate,
    Stacked,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Markdown,
}

struct Invocation {
    spec: ExperimentSpec,
    format: Format,
    out: Option<PathBuf>,
    dump: Option<PathBuf>,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn build(cli: Cli) -> Result<Invocation, String> {
    let id: ExperimentId = cli.experiment.parse().map_err(|e: symcd::Error| e.to_string())?;
    let mut spec = ExperimentSpec::new(id);
    if !cli.n.is_empty() {
        spec.ns = cli.n;
    }
    if !cli.c.is_empty() {
        spec.cs = cli.c;
    }
    if let Some(eps) = cli.eps {
        spec.epsilon = eps;
    }
    if !cli.seeds.is_empty() {
        spec.seeds = cli.seeds;
    }
    spec.max_epochs = cli.max_epochs;
    spec.overrides.sigma = cli.sigma;
    spec.overrides.beta = cli.beta;
    spec.overrides.gd_step = match cli.gd_step {
        GdStepArg::InvLmax => GdStep::InvLambdaMax,
        GdStepArg::TwoOverSum => GdStep::TwoOverSum,
    };
    spec.overrides.error_metric = cli.error_metric.map(|m| match m {
        MetricArg::Objective => ErrorMetric::Objective,
        MetricArg::Iterate => ErrorMetric::Iterate,
        MetricArg::Stacked => ErrorMetric::Stacked,
    });
    if let Some(path) = &cli.load_instance {
        spec.instance = Some(QuadraticProblem::load(path).map_err(|e| e.to_string())?);
    }
    spec.validate().map_err(|e| e.to_string())?;
    let format = match cli.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
        FormatArg::Markdown => Format::Markdown,
    };
    let out = cli
        .out
        .or_else(|| cli.out_dir.map(|d| d.join(format!("{}.{}", id.name(), format.extension()))));
    Ok(Invocation { spec, format, out, dump: cli.dump_instance })
}

fn run(inv: &Invocation) -> Result<usize, String> {
    if let Some(dir) = &inv.dump {
        for p in inv.spec.dump_instances(dir).map_err(|e| e.to_string())? {
            eprintln!("wrote {}", p.display());
        }
    }
    let table = run_experiment(&inv.spec).map_err(|e| e.to_string())?;
    emit(&table, inv.format, inv.out.as_deref()).map_err(|e| e.to_string())?;
    if let Some(p) = inv.out.as_deref().map(Path::display) {
        eprintln!("wrote {p}");
    }
    Ok(table.failures())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let inv = match build(cli) {
        Ok(inv) => inv,
        Err(msg) => return usage(msg),
    };
    match run(&inv) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{failed} cell(s) failed");
            ExitCode::from(2)
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
