//! Command-line front end: `gen`, `solve`, `bench` and `profile`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or invalid input,
//! 3 solver hit the iteration cap, 4 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{
    averaged_metric, default_tau_grid, log_tau_grid, performance_profile, performance_ratios, read_records_csv,
    run_bench_with, write_profile_csv, write_trace_csv, BenchPlan, Metric, RecordWriter,
};
use crate::error::Error;
use crate::problems::{generate, generate_x0, load_problem, save_problem, Family, GeneratorParams};
use crate::solver::{solve, Method, SolverConfig, Termination, DEFAULT_MAX_ITERATIONS};
use crate::Vector;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MAX_ITERATIONS: i32 = 3;
pub const EXIT_NUMERICAL_FAILURE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cyclic-dr", version, about = "Cyclic r-sets Douglas-Rachford feasibility solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random linear (slab) or quadratic (ball) problem file.
    Gen(GenArgs),
    /// Solve a problem file with one method.
    Solve(SolveArgs),
    /// Run a benchmark plan and write per-run records.
    Bench(BenchArgs),
    /// Compute performance profiles from a records file.
    Profile(ProfileArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Linear,
    Quadratic,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Linear => Family::Linear,
            FamilyArg::Quadratic => Family::Quadratic,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Dimension of the space.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Number of sets.
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Cyclic,
    FullCycle,
    ShortCycle,
    ProductSpace,
    RandomProduct,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Cyclic => Method::Cyclic,
            MethodArg::FullCycle => Method::FullCycle,
            MethodArg::ShortCycle => Method::ShortCycle,
            MethodArg::ProductSpace => Method::ProductSpace,
            MethodArg::RandomProduct => Method::RandomProduct,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Cyclic)]
    pub method: MethodArg,
    /// Block size (number of sets per r-sets DR operator).
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    /// Relative-change tolerance of the stopping rule.
    #[arg(long, default_value = "1e-12")]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub max_iters: u64,
    /// Seed of the random starting point.
    #[arg(long, default_value_t = 0)]
    pub x0_seed: u64,
    /// Consecutive small steps required to stop [default: ceil(m/r), 1 for product-space].
    #[arg(long)]
    pub stall_window: Option<usize>,
    /// Probability of applying Q in a random product.
    #[arg(long, default_value_t = 0.5)]
    pub coin_bias: f64,
    /// Seed of the random-product coin.
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Write the error trace (iteration,projections,error,elapsed_s) here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub trace_every: u64,
    /// Write the applied operator of every iteration (iteration,operator,sets) here.
    #[arg(long)]
    pub operator_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Benchmark plan (JSON).
    #[arg(long)]
    pub plan: PathBuf,
    /// Records CSV, appended cell by cell.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    /// Override the plan's repetitions per (family, n, m) [plan default: 10].
    #[arg(long)]
    pub reps: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Time,
    Projections,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::Time)]
    pub metric: MetricArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of log-spaced tau values between 1 and the largest ratio.
    #[arg(long, default_value_t = 200)]
    pub tau_points: usize,
}

/// A failed command and its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } => EXIT_IO,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(context: &str, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("{context}: {e}"),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Solve(a) => cmd_solve(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Profile(a) => cmd_profile(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

type CmdResult = Result<i32, Failure>;

fn say(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<(), Failure> {
    out.write_fmt(text)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| io_failure("stdout", e))
}

pub fn cmd_gen(args: GenArgs, out: &mut dyn Write) -> CmdResult {
    let family = Family::from(args.family);
    let params = GeneratorParams::new(args.n, args.m, args.seed);
    let problem = generate::<f64>(family, &params)?;
    save_problem(&problem, &args.out)?;
    let slack = problem.min_interior_slack(&Vector::zeros(args.n)?)?;
    say(
        out,
        format_args!(
            "family={family} n={} m={} seed={} min_origin_slack={slack:e} out={}",
            args.n,
            args.m,
            args.seed,
            args.out.display()
        ),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_solve(args: SolveArgs, out: &mut dyn Write) -> CmdResult {
    let problem = load_problem::<f64>(&args.problem)?;
    let config = SolverConfig {
        method: args.method.into(),
        r: args.r,
        epsilon: args.eps,
        max_iterations: args.max_iters,
        stall_window: args.stall_window,
        trace_every: args.trace_every,
        coin_bias: args.coin_bias,
        rng_seed: args.rng_seed,
        log_operators: args.operator_log.is_some(),
    };
    config
        .validate(problem.m())
        .map_err(|e| Failure::usage(format!("--method {} --r {}: {e}", config.method, config.r)))?;

    let x0_params = problem
        .metadata()
        .params
        .clone()
        .unwrap_or_else(|| GeneratorParams::new(problem.dim(), problem.m(), 0));
    let x0_params = GeneratorParams {
        n: problem.dim(),
        seed: args.x0_seed,
        ..x0_params
    };
    let x0 = generate_x0::<f64>(&x0_params)?;
    let report = solve(&problem, &config, &x0)?;

    if let Some(path) = &args.trace {
        write_trace_csv(path, &report.error_trace)?;
    }
    if let Some(path) = &args.operator_log {
        write_operator_log(path, &report.operator_log)?;
    }

    let seed = problem
        .metadata()
        .seed
        .map_or_else(|| "none".to_string(), |s| s.to_string());
    say(
        out,
        format_args!(
            "method={} r={} problem_seed={seed} x0_seed={} rng_seed={} stall_window={}",
            config.method, config.r, args.x0_seed, config.rng_seed, report.stall_window
        ),
    )?;
    say(
        out,
        format_args!(
            "termination={} final_error={:e} iterations={} projections={} wall_time_s={}",
            report.termination,
            report.final_error,
            report.counters.iterations,
            report.counters.projections,
            report.wall_time_s
        ),
    )?;
    Ok(match report.termination {
        Termination::Converged => EXIT_OK,
        Termination::MaxIterations => EXIT_MAX_ITERATIONS,
        Termination::NumericalFailure => EXIT_NUMERICAL_FAILURE,
    })
}

fn write_operator_log(path: &std::path::Path, log: &[crate::solver::OperatorLogEntry]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_failure(&path.display().to_string(), e.into()))?;
    let to_io = |e: csv::Error| io_failure(&path.display().to_string(), e.into());
    w.write_record(["iteration", "operator", "sets"]).map_err(to_io)?;
    for entry in log {
        let sets = entry
            .sets
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        w.write_record([entry.iteration.to_string(), entry.operator.clone(), sets])
            .map_err(to_io)?;
    }
    w.flush().map_err(|e| io_failure(&path.display().to_string(), e))
}

/// Progress lines go straight to the process stderr as cells finish.
pub fn cmd_bench(args: BenchArgs, out: &mut dyn Write) -> CmdResult {
    if args.parallel == 0 {
        return Err(Failure::usage("--parallel must be at least 1"));
    }
    let mut plan = BenchPlan::load(&args.plan)?;
    if let Some(reps) = args.reps {
        plan.repetitions = reps;
        plan.validate()?;
    }
    let total = plan.cells().len();
    say(
        out,
        format_args!(
            "plan={} base_seed={} cells={total} solvers={} parallel={}",
            args.plan.display(),
            plan.base_seed,
            plan.solvers.len(),
            args.parallel
        ),
    )?;
    let mut writer = RecordWriter::create(&args.out)?;
    let mut done = 0usize;
    run_bench_with::<f64, _>(&plan, args.parallel, |cell| {
        writer.write(&cell.records)?;
        done += 1;
        let c = cell.cell;
        let _ = writeln!(
            std::io::stderr(),
            "[{done}/{total}] {} n={} m={} rep={} seed={}",
            c.family,
            c.n,
            c.m,
            c.rep,
            c.seed
        );
        Ok(())
    })?;
    say(out, format_args!("records={}", args.out.display()))?;
    Ok(EXIT_OK)
}

pub fn cmd_profile(args: ProfileArgs, out: &mut dyn Write) -> CmdResult {
    let records = read_records_csv(&args.records)?;
    let metric = match args.metric {
        MetricArg::Time => Metric::Time,
        MetricArg::Projections => Metric::Projections,
    };
    let table = averaged_metric(&records, metric)?;
    let ratios = performance_ratios(&table)?;
    let taus = if args.tau_points == 200 {
        default_tau_grid(&ratios)
    } else {
        log_tau_grid(ratios.max_finite_ratio(), args.tau_points)
    };
    let profile = performance_profile(&ratios, &taus)?;
    write_profile_csv(&args.out, &profile)?;
    for (s, name) in profile.solvers.iter().enumerate() {
        say(out, format_args!("pi({name}, 1) = {}", profile.at_one(s)))?;
    }
    let failed: usize = table.failures.iter().flatten().sum();
    if failed > 0 {
        say(out, format_args!("excluded_failed_runs={failed}"))?;
    }
    Ok(EXIT_OK)
}
