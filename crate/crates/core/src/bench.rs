//! Randomized benchmark sweeps, averaged metrics and performance profiles.
//!
//! A sweep visits every `(family, n, m, repetition)` cell, generates one
//! problem and one starting point from seeds derived from the plan's base
//! seed, and runs every configured solver on that same instance. Cells are
//! independent and may run in parallel; records always come back in cell
//! order.
//!
//! CSV schemas:
//!
//! * `records.csv`: `family,m,n,solver,rep,seed,wall_time_s,iterations,projections,final_error,termination`
//! * `profile.csv`: `tau` followed by one column per solver
//! * `trace.csv`: `iteration,projections,error,elapsed_s`

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{generate, generate_x0, vector_digest, Family, GeneratorParams};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::solver::{solve, SolverConfig, Termination, TracePoint};

const X0_STREAM: u64 = 0x7830;

fn default_repetitions() -> usize {
    10
}

/// What to run. Mirrors the JSON plan file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchPlan {
    pub families: Vec<Family>,
    /// Problem dimensions `n`.
    pub dimensions: Vec<usize>,
    /// Set counts `m`.
    pub sizes: Vec<usize>,
    pub solvers: Vec<SolverConfig>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Trace interval applied to every solver. Zero (the default) keeps
    /// only the first and last trace points, which is all a sweep needs.
    #[serde(default)]
    pub trace_every: u64,
}

impl BenchPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: "bench plan".into(),
            message: e.to_string(),
        })?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                context: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() || self.dimensions.is_empty() || self.sizes.is_empty() {
            return Err(Error::invalid("plan needs at least one family, dimension and size"));
        }
        if self.solvers.is_empty() {
            return Err(Error::invalid("plan needs at least one solver"));
        }
        if self.repetitions < 1 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        if self.families.contains(&Family::Custom) {
            return Err(Error::invalid("the custom family cannot be generated"));
        }
        if self.dimensions.contains(&0) || self.sizes.contains(&0) {
            return Err(Error::invalid("dimensions and sizes must be positive"));
        }
        let mut labels = HashSet::new();
        for s in &self.solvers {
            if !labels.insert(s.label()) {
                return Err(Error::invalid(format!("duplicate solver {}", s.label())));
            }
            for &m in &self.sizes {
                s.validate(m)
                    .map_err(|e| Error::invalid(format!("solver {} with m = {m}: {e}", s.label())))?;
            }
        }
        Ok(())
    }

    /// Cells in execution and output order.
    pub fn cells(&self) -> Vec<BenchCell> {
        let mut cells = Vec::new();
        for &family in &self.families {
            for &n in &self.dimensions {
                for &m in &self.sizes {
                    for rep in 0..self.repetitions {
                        cells.push(BenchCell {
                            family,
                            n,
                            m,
                            rep,
                            seed: cell_seed(self.base_seed, family, n, m, rep),
                        });
                    }
                }
            }
        }
        cells
    }
}

/// Seed of one cell, a pure function of the plan seed and cell coordinates.
pub fn cell_seed(base: u64, family: Family, n: usize, m: usize, rep: usize) -> u64 {
    derive_seed(base, &[family.tag(), n as u64, m as u64, rep as u64])
}

/// Seed of the starting point belonging to a cell seed.
pub fn x0_seed(cell_seed: u64) -> u64 {
    derive_seed(cell_seed, &[X0_STREAM])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchCell {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    pub rep: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub family: Family,
    pub m: usize,
    pub n: usize,
    pub solver: String,
    pub rep: usize,
    pub seed: u64,
    pub wall_time_s: f64,
    pub iterations: u64,
    pub projections: u64,
    pub final_error: f64,
    pub termination: Termination,
}

/// Column names of `records.csv`, in order.
pub const RECORD_COLUMNS: [&str; 11] = [
    "family",
    "m",
    "n",
    "solver",
    "rep",
    "seed",
    "wall_time_s",
    "iterations",
    "projections",
    "final_error",
    "termination",
];

/// Records of one cell plus the digest of the instance every solver used.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: BenchCell,
    pub instance_digest: String,
    pub records: Vec<BenchRecord>,
}

/// Generates the instance of `cell` and runs every solver on it.
pub fn run_cell<T: Scalar>(plan: &BenchPlan, cell: BenchCell) -> Result<CellResult> {
    let params = GeneratorParams::new(cell.n, cell.m, cell.seed);
    let problem = generate::<T>(cell.family, &params)?;
    let x0 = generate_x0::<T>(&params.with_seed(x0_seed(cell.seed)))?;
    let digest = format!("{}:{}", problem.digest(), vector_digest(&x0));

    let records = plan
        .solvers
        .iter()
        .map(|config| {
            let config = SolverConfig {
                trace_every: plan.trace_every,
                log_operators: false,
                ..config.clone()
            };
            let base = BenchRecord {
                family: cell.family,
                m: cell.m,
                n: cell.n,
                solver: config.label(),
                rep: cell.rep,
                seed: cell.seed,
                wall_time_s: 0.0,
                iterations: 0,
                projections: 0,
                final_error: f64::NAN,
                termination: Termination::NumericalFailure,
            };
            match solve(&problem, &config, &x0) {
                Ok(report) => BenchRecord {
                    wall_time_s: report.wall_time_s,
                    iterations: report.counters.iterations,
                    projections: report.counters.projections,
                    final_error: report.final_error.as_f64(),
                    termination: report.termination,
                    ..base
                },
                Err(_) => base,
            }
        })
        .collect();
    Ok(CellResult {
        cell,
        instance_digest: digest,
        records,
    })
}

/// Runs the whole plan on `threads` workers (0 lets rayon decide) and
/// returns all records in cell order.
pub fn run_bench<T: Scalar>(plan: &BenchPlan, threads: usize) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    run_bench_with::<T, _>(plan, threads, |cell| {
        out.extend_from_slice(&cell.records);
        Ok(())
    })?;
    Ok(out)
}

/// Like [`run_bench`], but hands each finished cell to `sink` as soon as all
/// earlier cells are done, so the sink sees cells strictly in order. An
/// error from the sink stops the sweep.
pub fn run_bench_with<T, F>(plan: &BenchPlan, threads: usize, sink: F) -> Result<()>
where
    T: Scalar,
    F: FnMut(&CellResult) -> Result<()> + Send,
{
    plan.validate()?;
    let cells = plan.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;

    struct Ordered<F> {
        next: usize,
        pending: BTreeMap<usize, CellResult>,
        sink: F,
        error: Option<Error>,
    }
    let state = Mutex::new(Ordered {
        next: 0,
        pending: BTreeMap::new(),
        sink,
        error: None,
    });
    let stop = AtomicBool::new(false);

    pool.install(|| {
        cells.par_iter().enumerate().for_each(|(i, &cell)| {
            if stop.load(Ordering::Relaxed) {
                return;
            }
            let result = run_cell::<T>(plan, cell);
            let mut st = state.lock().expect("bench state poisoned");
            match result {
                Ok(r) => {
                    st.pending.insert(i, r);
                }
                Err(e) => {
                    st.error.get_or_insert(e);
                    stop.store(true, Ordering::Relaxed);
                    return;
                }
            }
            while st.error.is_none() {
                let next = st.next;
                let Some(done) = st.pending.remove(&next) else { break };
                if let Err(e) = (st.sink)(&done) {
                    st.error = Some(e);
                    stop.store(true, Ordering::Relaxed);
                    break;
                }
                st.next += 1;
            }
        });
    });

    match state.into_inner().expect("bench state poisoned").error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Which record column to aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Time,
    Projections,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" => Ok(Metric::Time),
            "projections" => Ok(Metric::Projections),
            other => Err(Error::invalid(format!("unknown metric {other:?}"))),
        }
    }
}

/// A benchmark problem: one `(family, n, m)` combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProblemKey {
    pub family: Family,
    pub n: usize,
    pub m: usize,
}

impl std::fmt::Display for ProblemKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/n={}/m={}", self.family, self.n, self.m)
    }
}

/// Mean of a metric per problem (rows) and solver (columns).
///
/// A `None` entry means every run of that solver failed on that problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub problems: Vec<ProblemKey>,
    pub solvers: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    /// Runs excluded from each mean because they did not converge.
    pub failures: Vec<Vec<usize>>,
}

impl MetricTable {
    /// Table from explicit values, with no failures.
    pub fn from_values(problems: Vec<ProblemKey>, solvers: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != problems.len() || values.iter().any(|row| row.len() != solvers.len()) {
            return Err(Error::invalid("metric table shape does not match its labels"));
        }
        let failures = vec![vec![0; solvers.len()]; problems.len()];
        Ok(Self {
            problems,
            solvers,
            values: values
                .into_iter()
                .map(|row| row.into_iter().map(Some).collect())
                .collect(),
            failures,
        })
    }
}

/// Averages `metric` over repetitions for every `(problem, solver)` pair.
/// Only converged runs enter the mean; the rest are counted in `failures`.
pub fn averaged_metric(records: &[BenchRecord], metric: Metric) -> Result<MetricTable> {
    let mut solvers: Vec<String> = Vec::new();
    let mut problems: Vec<ProblemKey> = Vec::new();
    let mut acc: BTreeMap<(ProblemKey, usize), (f64, usize, usize)> = BTreeMap::new();
    for r in records {
        let key = ProblemKey {
            family: r.family,
            n: r.n,
            m: r.m,
        };
        if !problems.contains(&key) {
            problems.push(key);
        }
        let s = match solvers.iter().position(|s| *s == r.solver) {
            Some(i) => i,
            None => {
                solvers.push(r.solver.clone());
                solvers.len() - 1
            }
        };
        let entry = acc.entry((key, s)).or_insert((0.0, 0, 0));
        if r.termination == Termination::Converged {
            entry.0 += match metric {
                Metric::Time => r.wall_time_s,
                Metric::Projections => r.projections as f64,
            };
            entry.1 += 1;
        } else {
            entry.2 += 1;
        }
    }
    if problems.is_empty() {
        return Err(Error::invalid("no benchmark records"));
    }
    problems.sort();

    let mut gaps = Vec::new();
    let mut values = vec![vec![None; solvers.len()]; problems.len()];
    let mut failures = vec![vec![0; solvers.len()]; problems.len()];
    for (p, key) in problems.iter().enumerate() {
        for (s, name) in solvers.iter().enumerate() {
            match acc.get(&(*key, s)) {
                Some(&(sum, ok, failed)) => {
                    values[p][s] = (ok > 0).then(|| sum / ok as f64);
                    failures[p][s] = failed;
                }
                None => gaps.push(format!("({key}, {name})")),
            }
        }
    }
    if !gaps.is_empty() {
        return Err(Error::Gap(gaps));
    }
    Ok(MetricTable {
        problems,
        solvers,
        values,
        failures,
    })
}

/// `t_{p,s}`: mean wall time over repetitions.
pub fn averaged_times(records: &[BenchRecord]) -> Result<MetricTable> {
    averaged_metric(records, Metric::Time)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioTable {
    pub problems: Vec<ProblemKey>,
    pub solvers: Vec<String>,
    /// `+∞` where a solver never converged on a problem.
    pub ratios: Vec<Vec<f64>>,
}

impl RatioTable {
    pub fn max_finite_ratio(&self) -> f64 {
        self.ratios
            .iter()
            .flatten()
            .copied()
            .filter(|r| r.is_finite())
            .fold(1.0, f64::max)
    }
}

/// `r_{p,s} = t_{p,s} / min_s t_{p,s}`.
pub fn performance_ratios(table: &MetricTable) -> Result<RatioTable> {
    let mut ratios = Vec::with_capacity(table.values.len());
    for (key, row) in table.problems.iter().zip(&table.values) {
        if let Some(bad) = row.iter().flatten().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid(format!(
                "metric values must be finite and positive, got {bad} for {key}"
            )));
        }
        let best = row
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            return Err(Error::invalid(format!("no solver succeeded on {key}")));
        }
        ratios.push(
            row.iter()
                .map(|v| v.map_or(f64::INFINITY, |t| t / best))
                .collect(),
        );
    }
    Ok(RatioTable {
        problems: table.problems.clone(),
        solvers: table.solvers.clone(),
        ratios,
    })
}

/// `π_s(τ)` for every solver on a τ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceProfile {
    pub solvers: Vec<String>,
    pub taus: Vec<f64>,
    /// `values[s][k] = π_s(taus[k])`.
    pub values: Vec<Vec<f64>>,
}

impl PerformanceProfile {
    pub fn at_one(&self, solver: usize) -> f64 {
        let k = self.taus.iter().rposition(|&t| t <= 1.0).unwrap_or(0);
        self.values[solver][k]
    }
}

/// `points` log-spaced values from 1 to `tau_max`, both ends exact.
pub fn log_tau_grid(tau_max: f64, points: usize) -> Vec<f64> {
    if !(tau_max > 1.0) || points < 2 {
        return vec![1.0];
    }
    let step = tau_max.ln() / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|k| (step * k as f64).exp()).collect();
    grid[0] = 1.0;
    grid[points - 1] = tau_max;
    grid
}

/// Default grid: 200 log-spaced points up to the largest finite ratio.
pub fn default_tau_grid(ratios: &RatioTable) -> Vec<f64> {
    log_tau_grid(ratios.max_finite_ratio(), 200)
}

/// `π_s(τ) = |{p : r_{p,s} ≤ τ}| / |P|`.
pub fn performance_profile(ratios: &RatioTable, taus: &[f64]) -> Result<PerformanceProfile> {
    let problems = ratios.ratios.len();
    if problems == 0 {
        return Err(Error::invalid("performance profile needs at least one problem"));
    }
    if taus.is_empty() || taus[0] < 1.0 || taus.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("tau grid must be non-empty, ascending and start at >= 1"));
    }
    let values = (0..ratios.solvers.len())
        .map(|s| {
            taus.iter()
                .map(|&tau| {
                    ratios.ratios.iter().filter(|row| row[s] <= tau).count() as f64 / problems as f64
                })
                .collect()
        })
        .collect();
    Ok(PerformanceProfile {
        solvers: ratios.solvers.clone(),
        taus: taus.to_vec(),
        values,
    })
}

/// Appends records to a CSV file, flushing after every batch.
pub struct RecordWriter {
    inner: csv::Writer<File>,
    path: std::path::PathBuf,
}

impl RecordWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        inner.write_record(RECORD_COLUMNS).map_err(|e| csv_error(&path, e))?;
        inner.flush().map_err(|e| Error::io(&path, e))?;
        Ok(Self { inner, path })
    }

    pub fn write(&mut self, records: &[BenchRecord]) -> Result<()> {
        for r in records {
            self.inner.serialize(r).map_err(|e| csv_error(&self.path, e))?;
        }
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            context: path.display().to_string(),
            message: format!("{other:?}"),
        },
    }
}

pub fn write_records_csv(path: impl AsRef<Path>, records: &[BenchRecord]) -> Result<()> {
    RecordWriter::create(path)?.write(records)
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().ne(RECORD_COLUMNS.iter().copied()) {
        return Err(Error::Parse {
            context: path.display().to_string(),
            message: format!(
                "unexpected header {:?}, expected {}",
                headers.iter().collect::<Vec<_>>(),
                RECORD_COLUMNS.join(",")
            ),
        });
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                context: format!("{} row {}", path.display(), i + 2),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_profile_csv(path: impl AsRef<Path>, profile: &PerformanceProfile) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<&str> = std::iter::once("tau")
        .chain(profile.solvers.iter().map(String::as_str))
        .collect();
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (k, tau) in profile.taus.iter().enumerate() {
        let row: Vec<String> = std::iter::once(tau.to_string())
            .chain(profile.values.iter().map(|v| v[k].to_string()))
            .collect();
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_profile_csv(path: impl AsRef<Path>) -> Result<PerformanceProfile> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.get(0) != Some("tau") {
        return Err(Error::Parse {
            context: path.display().to_string(),
            message: "first column must be tau".into(),
        });
    }
    let solvers: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut taus = Vec::new();
    let mut values = vec![Vec::new(); solvers.len()];
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::Parse {
                context: path.display().to_string(),
                message: format!("{s:?}: {e}"),
            })
        };
        taus.push(parse(&row[0])?);
        for (s, col) in values.iter_mut().enumerate() {
            col.push(parse(&row[s + 1])?);
        }
    }
    Ok(PerformanceProfile { solvers, taus, values })
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[TracePoint]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for t in trace {
        w.serialize(t).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Vec<TracePoint>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    reader
        .deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}
