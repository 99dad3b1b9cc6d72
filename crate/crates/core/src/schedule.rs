//! Cyclic block schedules and the sweep operators built from them.
//!
//! Block `d ≥ 1` of a schedule over `m` sets with block size `r` is
//!
//! ```text
//! ((r-1)d - (r-1)) mod m, ((r-1)d - (r-2)) mod m, …, ((r-1)d) mod m
//! ```
//!
//! so consecutive blocks share exactly one set: the last set of block `d`
//! opens block `d + 1`. With `r = 2` this is the pairwise cyclic order
//! `(0,1), (1,2), …, (m-1,0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vector;
use crate::operators::{ComposedProjections, ProjectionCounter, RSetsDrOperator};
use crate::problems::FeasibilityProblem;
use crate::rng::UniformStream;
use crate::scalar::Scalar;

/// Set indices of block `d` (1-based), reduced into `[0, m)`.
pub fn block_indices(m: usize, r: usize, d: usize) -> Result<Vec<usize>> {
    if m < 1 {
        return Err(Error::invalid("schedule needs at least one set"));
    }
    if r < 2 {
        return Err(Error::invalid(format!("block size r must be at least 2, got {r}")));
    }
    if d < 1 {
        return Err(Error::invalid("block index d starts at 1"));
    }
    let (m, step, d) = (m as i128, (r - 1) as i128, d as i128);
    let start = step * d - step;
    Ok((0..r as i128)
        .map(|j| (start + j).rem_euclid(m) as usize)
        .collect())
}

/// The `m` distinct blocks of a schedule, cached once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSchedule {
    m: usize,
    r: usize,
    indices: Vec<usize>,
}

impl BlockSchedule {
    /// Accepts `2 ≤ r ≤ m`.
    pub fn new(m: usize, r: usize) -> Result<Self> {
        if r < 2 {
            return Err(Error::invalid(format!("block size r must be at least 2, got {r}")));
        }
        if r > m {
            return Err(Error::invalid(format!(
                "block size r = {r} exceeds the number of sets m = {m}"
            )));
        }
        let mut indices = Vec::with_capacity(m * r);
        for d in 1..=m {
            indices.extend(block_indices(m, r, d)?);
        }
        Ok(Self { m, r, indices })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Block `d ≥ 1`; blocks repeat with period `m`.
    pub fn block(&self, d: usize) -> &[usize] {
        assert!(d >= 1, "block index d starts at 1");
        let k = (d - 1) % self.m;
        &self.indices[k * self.r..(k + 1) * self.r]
    }

    /// Blocks `1..=count`.
    pub fn blocks(&self, count: usize) -> impl Iterator<Item = &[usize]> + '_ {
        (1..=count).map(move |d| self.block(d))
    }

    /// Number of blocks in a short sweep, `m / (r - 1)`, when it divides evenly.
    pub fn short_cycle_len(&self) -> Option<usize> {
        (self.m % (self.r - 1) == 0).then(|| self.m / (self.r - 1))
    }
}

/// How the solver walks the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SweepKind {
    /// One block operator `S_{k+1}` per iteration.
    PerBlock,
    /// `Q = S_m ⋯ S_1` per iteration.
    FullCycle,
    /// `Q̃ = S_{m/(r-1)} ⋯ S_1` per iteration.
    ShortCycle,
    /// Per iteration, `Q` with probability `coin_bias`, otherwise the
    /// composed projections `P_{C_0} ⋯ P_{C_{m-1}}`.
    RandomProduct { rng_seed: u64, coin_bias: f64 },
}

/// A validated schedule plus the way it is traversed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    kind: SweepKind,
    schedule: BlockSchedule,
}

impl SweepPlan {
    pub fn new(kind: SweepKind, m: usize, r: usize) -> Result<Self> {
        let schedule = BlockSchedule::new(m, r)?;
        match kind {
            SweepKind::ShortCycle if schedule.short_cycle_len().is_none() => {
                return Err(Error::invalid(format!(
                    "short-cycle sweep needs r - 1 to divide m, but r - 1 = {} does not divide m = {m}",
                    r - 1
                )));
            }
            SweepKind::RandomProduct { coin_bias, .. } if !(0.0..=1.0).contains(&coin_bias) => {
                return Err(Error::invalid(format!(
                    "coin bias must lie in [0, 1], got {coin_bias}"
                )));
            }
            _ => {}
        }
        Ok(Self { kind, schedule })
    }

    pub fn kind(&self) -> SweepKind {
        self.kind
    }

    pub fn schedule(&self) -> &BlockSchedule {
        &self.schedule
    }
}

/// A composition `S_len ⋯ S_2 S_1` of consecutive block operators.
#[derive(Debug, Clone)]
pub struct BlockSweep<'a, T> {
    blocks: Vec<RSetsDrOperator<'a, T>>,
    dim: usize,
}

impl<'a, T: Scalar> BlockSweep<'a, T> {
    fn from_schedule(problem: &'a FeasibilityProblem<T>, schedule: &BlockSchedule, len: usize) -> Result<Self> {
        let blocks = schedule
            .blocks(len)
            .map(|idx| RSetsDrOperator::from_indices(problem.sets(), idx))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            blocks,
            dim: problem.dim(),
        })
    }

    /// Block operators in application order (`S_1` first).
    pub fn blocks(&self) -> &[RSetsDrOperator<'a, T>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn apply_in_place(&self, x: &mut [T], scratch: &mut Vec<T>, counter: &mut ProjectionCounter) {
        for op in &self.blocks {
            op.apply_in_place(x, scratch, counter);
        }
    }

    pub fn apply(&self, x: &Vector<T>, counter: &mut ProjectionCounter) -> Result<Vector<T>> {
        crate::error::check_dim(self.dim, x.dim())?;
        let mut out = x.as_slice().to_vec();
        let mut scratch = Vec::with_capacity(self.dim);
        self.apply_in_place(&mut out, &mut scratch, counter);
        Ok(Vector::from_vec_unchecked(out))
    }
}

/// `Q = S_m ⋯ S_2 S_1`. The last block ends on `C_0`.
pub fn build_q<T: Scalar>(problem: &FeasibilityProblem<T>, r: usize) -> Result<BlockSweep<'_, T>> {
    let schedule = BlockSchedule::new(problem.m(), r)?;
    BlockSweep::from_schedule(problem, &schedule, problem.m())
}

/// `Q̃ = S_n ⋯ S_1` with `n = m / (r - 1)`: one pass over every set.
pub fn build_q_tilde<T: Scalar>(problem: &FeasibilityProblem<T>, r: usize) -> Result<BlockSweep<'_, T>> {
    let plan = SweepPlan::new(SweepKind::ShortCycle, problem.m(), r)?;
    let len = plan.schedule.short_cycle_len().expect("validated by SweepPlan");
    BlockSweep::from_schedule(problem, &plan.schedule, len)
}

/// Which operator one random-product step applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomChoice {
    Q,
    Projections,
}

/// Random products of `T₁ = Q` and `T₂ = P_{C_0} ⋯ P_{C_{m-1}}` driven by a
/// seeded Bernoulli coin.
#[derive(Debug, Clone)]
pub struct RandomProduct<'a, T> {
    q: BlockSweep<'a, T>,
    projections: ComposedProjections<'a, T>,
    coin: UniformStream,
    coin_bias: f64,
}

impl<'a, T: Scalar> RandomProduct<'a, T> {
    pub fn new(problem: &'a FeasibilityProblem<T>, plan: &SweepPlan) -> Result<Self> {
        let SweepKind::RandomProduct { rng_seed, coin_bias } = plan.kind else {
            return Err(Error::invalid("random-product step needs a random-product sweep plan"));
        };
        Ok(Self {
            q: BlockSweep::from_schedule(problem, &plan.schedule, problem.m())?,
            projections: ComposedProjections::new(problem.sets().iter().collect())?,
            coin: UniformStream::new(rng_seed),
            coin_bias,
        })
    }

    pub fn step_in_place(&mut self, x: &mut [T], scratch: &mut Vec<T>, counter: &mut ProjectionCounter) -> RandomChoice {
        if self.coin.unit() < self.coin_bias {
            self.q.apply_in_place(x, scratch, counter);
            RandomChoice::Q
        } else {
            self.projections.apply_in_place(x, counter);
            RandomChoice::Projections
        }
    }

    pub fn step(&mut self, x: &Vector<T>, counter: &mut ProjectionCounter) -> Result<(Vector<T>, RandomChoice)> {
        crate::error::check_dim(self.q.dim, x.dim())?;
        let mut out = x.as_slice().to_vec();
        let mut scratch = Vec::with_capacity(x.dim());
        let choice = self.step_in_place(&mut out, &mut scratch, counter);
        Ok((Vector::from_vec_unchecked(out), choice))
    }
}
