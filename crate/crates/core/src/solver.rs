//! Iteration driver for every method: cyclic r-sets DR, the `Q` and `Q̃`
//! sweeps, product-space DR and random products.
//!
//! A run stops once the relative change
//! `‖x^{k+1} − x^k‖ / max(‖x^k‖, 1)` has stayed at or below `epsilon` for
//! `stall_window` consecutive iterations, after `max_iterations`, or when an
//! iterate stops being finite.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::Vector;
use crate::operators::{mean_of_blocks, ProductSpaceDrOperator, ProjectionCounter};
use crate::problems::FeasibilityProblem;
use crate::scalar::{self, Scalar};
use crate::schedule::{BlockSchedule, BlockSweep, RandomChoice, RandomProduct, SweepKind, SweepPlan};

pub const DEFAULT_EPSILON: f64 = 1e-12;
pub const DEFAULT_MAX_ITERATIONS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// One block operator `S_{k+1}` per iteration.
    Cyclic,
    /// `Q` per iteration.
    FullCycle,
    /// `Q̃` per iteration.
    ShortCycle,
    ProductSpace,
    RandomProduct,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cyclic => "cyclic",
            Method::FullCycle => "full-cycle",
            Method::ShortCycle => "short-cycle",
            Method::ProductSpace => "product-space",
            Method::RandomProduct => "random-product",
        }
    }

    pub fn uses_block_size(self) -> bool {
        self != Method::ProductSpace
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cyclic" => Method::Cyclic,
            "full-cycle" => Method::FullCycle,
            "short-cycle" => Method::ShortCycle,
            "product-space" => Method::ProductSpace,
            "random-product" => Method::RandomProduct,
            other => return Err(Error::invalid(format!("unknown method {other:?}"))),
        })
    }
}

fn default_r() -> usize {
    2
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_max_iterations() -> u64 {
    DEFAULT_MAX_ITERATIONS
}
fn default_trace_every() -> u64 {
    1
}
fn default_coin_bias() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    /// Block size; ignored by product-space DR.
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: u64,
    /// `None` means `⌈m/r⌉`, or 1 for product-space DR.
    #[serde(default)]
    pub stall_window: Option<usize>,
    /// Record the error every this many iterations. Zero disables the trace
    /// apart from the first and last points.
    #[serde(default = "default_trace_every")]
    pub trace_every: u64,
    /// Probability of applying `Q` in a random product.
    #[serde(default = "default_coin_bias")]
    pub coin_bias: f64,
    #[serde(default)]
    pub rng_seed: u64,
    /// Keep a per-iteration log of which operator was applied.
    #[serde(default)]
    pub log_operators: bool,
}

impl SolverConfig {
    pub fn new(method: Method, r: usize) -> Self {
        Self {
            method,
            r,
            epsilon: DEFAULT_EPSILON,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            stall_window: None,
            trace_every: 1,
            coin_bias: 0.5,
            rng_seed: 0,
            log_operators: false,
        }
    }

    pub fn cyclic(r: usize) -> Self {
        Self::new(Method::Cyclic, r)
    }

    pub fn full_cycle(r: usize) -> Self {
        Self::new(Method::FullCycle, r)
    }

    pub fn short_cycle(r: usize) -> Self {
        Self::new(Method::ShortCycle, r)
    }

    pub fn product_space() -> Self {
        Self::new(Method::ProductSpace, 2)
    }

    pub fn random_product(r: usize, rng_seed: u64) -> Self {
        Self {
            rng_seed,
            ..Self::new(Method::RandomProduct, r)
        }
    }

    /// Stall window used for a problem with `m` sets.
    pub fn resolved_stall_window(&self, m: usize) -> usize {
        self.stall_window.unwrap_or(match self.method {
            Method::ProductSpace => 1,
            _ => default_stall_window(m, self.r),
        })
    }

    /// Short identifier such as `cyclic-r5` or `product-space`.
    pub fn label(&self) -> String {
        if self.method.uses_block_size() {
            format!("{}-r{}", self.method, self.r)
        } else {
            self.method.to_string()
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations < 1 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if self.stall_window == Some(0) {
            return Err(Error::invalid("stall_window must be at least 1"));
        }
        if self.method.uses_block_size() {
            SweepPlan::new(self.sweep_kind(), m, self.r)?;
        }
        Ok(())
    }

    fn sweep_kind(&self) -> SweepKind {
        match self.method {
            Method::Cyclic | Method::ProductSpace => SweepKind::PerBlock,
            Method::FullCycle => SweepKind::FullCycle,
            Method::ShortCycle => SweepKind::ShortCycle,
            Method::RandomProduct => SweepKind::RandomProduct {
                rng_seed: self.rng_seed,
                coin_bias: self.coin_bias,
            },
        }
    }
}

/// `⌈m / r⌉`.
pub fn default_stall_window(m: usize, r: usize) -> usize {
    m.div_ceil(r.max(1)).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
    NumericalFailure,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max-iterations",
            Termination::NumericalFailure => "numerical-failure",
        }
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Termination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "converged" => Termination::Converged,
            "max-iterations" => Termination::MaxIterations,
            "numerical-failure" => Termination::NumericalFailure,
            other => return Err(Error::invalid(format!("unknown termination {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: u64,
    pub projections: u64,
    pub error: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorLogEntry {
    pub iteration: u64,
    pub operator: String,
    /// Set indices for single-block steps, empty otherwise.
    pub sets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T> {
    pub final_point: Vector<T>,
    pub final_error: T,
    pub termination: Termination,
    pub counters: ProjectionCounter,
    pub error_trace: Vec<TracePoint>,
    /// Time spent in algorithmic steps only.
    pub wall_time_s: f64,
    pub config: SolverConfig,
    pub stall_window: usize,
    /// Scalars held by one iterate: `n`, or `m · n` in the product space.
    pub state_len: usize,
    pub operator_log: Vec<OperatorLogEntry>,
}

/// `Σ_i ‖P_{C_i}(x) − x‖`. Not counted as solver projections.
pub fn error_metric<T: Scalar>(problem: &FeasibilityProblem<T>, x: &Vector<T>) -> Result<T> {
    check_dim(problem.dim(), x.dim())?;
    Ok(problem.total_residual(x.as_slice()))
}

#[inline]
fn relative_change<T: Scalar>(prev: &[T], next: &[T]) -> T {
    scalar::distance(prev, next) / scalar::norm(prev).max(T::one())
}

/// Counts consecutive small relative changes.
#[derive(Debug, Clone)]
pub struct StallCounter<T> {
    epsilon: T,
    window: usize,
    run: usize,
}

impl<T: Scalar> StallCounter<T> {
    pub fn new(epsilon: T, window: usize) -> Self {
        Self {
            epsilon,
            window: window.max(1),
            run: 0,
        }
    }

    /// Feeds one relative change; true once `window` consecutive changes were
    /// at most `epsilon`.
    pub fn observe(&mut self, change: T) -> bool {
        if change <= self.epsilon {
            self.run += 1;
        } else {
            self.run = 0;
        }
        self.run >= self.window
    }

    pub fn observe_step(&mut self, prev: &[T], next: &[T]) -> bool {
        self.observe(relative_change(prev, next))
    }
}

/// True iff the last `window` steps of `history` all have relative change at
/// most `epsilon`. Needs at least `window + 1` iterates.
pub fn check_termination<T: Scalar>(history: &[Vector<T>], epsilon: T, window: usize) -> bool {
    let window = window.max(1);
    if history.len() < window + 1 {
        return false;
    }
    history[history.len() - window - 1..]
        .windows(2)
        .all(|w| relative_change(w[0].as_slice(), w[1].as_slice()) <= epsilon)
}

enum Stepper<'a, T> {
    Cyclic {
        sweep: BlockSweep<'a, T>,
        schedule: BlockSchedule,
    },
    Sweep {
        sweep: BlockSweep<'a, T>,
        name: &'static str,
    },
    Random(RandomProduct<'a, T>),
    Product(ProductSpaceDrOperator<'a, T>),
}

impl<'a, T: Scalar> Stepper<'a, T> {
    fn new(problem: &'a FeasibilityProblem<T>, config: &SolverConfig) -> Result<Self> {
        Ok(match config.method {
            Method::Cyclic => Stepper::Cyclic {
                sweep: crate::schedule::build_q(problem, config.r)?,
                schedule: BlockSchedule::new(problem.m(), config.r)?,
            },
            Method::FullCycle => Stepper::Sweep {
                sweep: crate::schedule::build_q(problem, config.r)?,
                name: "Q",
            },
            Method::ShortCycle => Stepper::Sweep {
                sweep: crate::schedule::build_q_tilde(problem, config.r)?,
                name: "Q~",
            },
            Method::RandomProduct => {
                let plan = SweepPlan::new(config.sweep_kind(), problem.m(), config.r)?;
                Stepper::Random(RandomProduct::new(problem, &plan)?)
            }
            Method::ProductSpace => {
                Stepper::Product(ProductSpaceDrOperator::new(problem.sets().iter().collect())?)
            }
        })
    }

    fn initial_state(&self, x0: &[T]) -> Vec<T> {
        match self {
            Stepper::Product(op) => op.initial_state(x0),
            _ => x0.to_vec(),
        }
    }

    /// Applies iteration `k` (0-based) and returns a log entry on request.
    fn step(
        &mut self,
        k: u64,
        state: &mut [T],
        scratch: &mut Vec<T>,
        counter: &mut ProjectionCounter,
        log: bool,
    ) -> Option<OperatorLogEntry> {
        let entry = |operator: &str, sets: Vec<usize>| OperatorLogEntry {
            iteration: k + 1,
            operator: operator.to_string(),
            sets,
        };
        match self {
            Stepper::Cyclic { sweep, schedule } => {
                let slot = (k % sweep.len() as u64) as usize;
                sweep.blocks()[slot].apply_in_place(state, scratch, counter);
                log.then(|| entry("T", schedule.block(slot + 1).to_vec()))
            }
            Stepper::Sweep { sweep, name } => {
                sweep.apply_in_place(state, scratch, counter);
                log.then(|| entry(name, Vec::new()))
            }
            Stepper::Random(rp) => {
                let choice = rp.step_in_place(state, scratch, counter);
                log.then(|| {
                    entry(
                        match choice {
                            RandomChoice::Q => "Q",
                            RandomChoice::Projections => "P",
                        },
                        Vec::new(),
                    )
                })
            }
            Stepper::Product(op) => {
                op.apply_in_place(state, scratch, counter);
                log.then(|| entry("product", Vec::new()))
            }
        }
    }
}

/// Runs `config.method` on `problem` from `x0`.
pub fn solve<T: Scalar>(
    problem: &FeasibilityProblem<T>,
    config: &SolverConfig,
    x0: &Vector<T>,
) -> Result<SolveReport<T>> {
    check_dim(problem.dim(), x0.dim())?;
    config.validate(problem.m())?;

    let n = problem.dim();
    let window = config.resolved_stall_window(problem.m());
    let mut stepper = Stepper::new(problem, config)?;
    let product = matches!(stepper, Stepper::Product(_));

    let mut state = stepper.initial_state(x0.as_slice());
    let mut prev = state.clone();
    let mut scratch = Vec::with_capacity(state.len() + n);
    let mut point = vec![T::zero(); n];
    let candidate = |s: &[T], out: &mut [T]| {
        if product {
            mean_of_blocks(s, n, out);
        } else {
            out.copy_from_slice(s);
        }
    };

    let mut counters = ProjectionCounter::new();
    let mut stall = StallCounter::new(T::lit(config.epsilon), window);
    let mut trace = Vec::new();
    let mut log = Vec::new();
    let mut elapsed = Duration::ZERO;

    let record = |trace: &mut Vec<TracePoint>, s: &[T], point: &mut [T], c: &ProjectionCounter, t: Duration| {
        candidate(s, point);
        trace.push(TracePoint {
            iteration: c.iterations,
            projections: c.projections,
            error: problem.total_residual(point).as_f64(),
            elapsed_s: t.as_secs_f64(),
        });
    };
    record(&mut trace, &state, &mut point, &counters, elapsed);

    let mut termination = Termination::MaxIterations;
    let mut clock = Instant::now();
    while counters.iterations < config.max_iterations {
        prev.copy_from_slice(&state);
        let k = counters.iterations;
        if let Some(entry) = stepper.step(k, &mut state, &mut scratch, &mut counters, config.log_operators) {
            log.push(entry);
        }
        counters.iterations += 1;

        if !scalar::all_finite(&state) {
            state.copy_from_slice(&prev);
            termination = Termination::NumericalFailure;
            break;
        }
        if stall.observe_step(&prev, &state) {
            termination = Termination::Converged;
            break;
        }
        if config.trace_every > 0 && counters.iterations % config.trace_every == 0 {
            elapsed += clock.elapsed();
            record(&mut trace, &state, &mut point, &counters, elapsed);
            clock = Instant::now();
        }
    }
    elapsed += clock.elapsed();

    if trace.last().map(|t| t.iteration) != Some(counters.iterations) {
        record(&mut trace, &state, &mut point, &counters, elapsed);
    }
    candidate(&state, &mut point);
    let final_point = Vector::new(point)?;
    let final_error = problem.total_residual(final_point.as_slice());

    Ok(SolveReport {
        final_point,
        final_error,
        termination,
        counters,
        error_trace: trace,
        wall_time_s: elapsed.as_secs_f64(),
        config: config.clone(),
        stall_window: window,
        state_len: state.len(),
        operator_log: log,
    })
}
