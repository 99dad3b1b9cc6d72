//! Feasibility problem instances, the random linear and ball families, and
//! the JSON problem file format.
//!
//! A problem file looks like
//!
//! ```json
//! {
//!   "version": 1,
//!   "family": "quadratic",
//!   "seed": 7,
//!   "generator": "chacha8/u53",
//!   "n": 2,
//!   "m": 1,
//!   "params": { "n": 2, "m": 1, "seed": 7, "normal_range": [-1.0, 1.0], … },
//!   "sets": [ { "kind": "ball", "center": [0.5, -1.25], "radius": 1.5 } ]
//! }
//! ```
//!
//! Set kinds are `ball` (`center`, `radius`), `slab` (`normal`, `halfwidth`)
//! and `hyperplane` (`normal`, `offset`). Numbers are written in shortest
//! round-trip form, so save followed by load is exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{ConvexSet, Project, Vector};
use crate::rng::{UniformStream, GENERATOR_ID};
use crate::scalar::Scalar;

pub const FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Linear,
    Quadratic,
    Custom,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::Quadratic => "quadratic",
            Family::Custom => "custom",
        }
    }

    pub(crate) fn tag(self) -> u64 {
        match self {
            Family::Linear => 1,
            Family::Quadratic => 2,
            Family::Custom => 3,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Family::Linear),
            "quadratic" => Ok(Family::Quadratic),
            "custom" => Ok(Family::Custom),
            other => Err(Error::invalid(format!("unknown family {other:?}"))),
        }
    }
}

/// Sampling ranges for the random families. Ranges are `[lo, hi]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// Slab normal coordinates, before normalization.
    pub normal_range: [f64; 2],
    pub halfwidth_range: [f64; 2],
    /// Ball center coordinates.
    pub center_range: [f64; 2],
    /// Amount added to `‖center‖` to form a ball radius.
    pub radius_slack_range: [f64; 2],
    /// Starting point coordinates.
    pub x0_range: [f64; 2],
}

impl GeneratorParams {
    pub fn new(n: usize, m: usize, seed: u64) -> Self {
        Self {
            n,
            m,
            seed,
            normal_range: [-1.0, 1.0],
            halfwidth_range: [0.0, 0.1],
            center_range: [-5.0, 5.0],
            radius_slack_range: [0.0, 0.1],
            x0_range: [-10.0, 10.0],
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 1 || self.m < 1 {
            return Err(Error::invalid(format!(
                "generator needs n >= 1 and m >= 1, got n = {}, m = {}",
                self.n, self.m
            )));
        }
        for (name, [lo, hi]) in [
            ("normal_range", self.normal_range),
            ("halfwidth_range", self.halfwidth_range),
            ("center_range", self.center_range),
            ("radius_slack_range", self.radius_slack_range),
            ("x0_range", self.x0_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(format!("{name} must be a finite [lo, hi] with lo <= hi")));
            }
        }
        if self.halfwidth_range[0] < 0.0 || self.radius_slack_range[0] < 0.0 {
            return Err(Error::invalid("halfwidth and radius slack ranges must be non-negative"));
        }
        if self.normal_range == [0.0, 0.0] {
            return Err(Error::invalid("normal_range cannot be degenerate at zero"));
        }
        Ok(())
    }
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self::new(1000, 200, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMetadata {
    pub family: Family,
    pub seed: Option<u64>,
    pub generator: Option<String>,
    pub params: Option<GeneratorParams>,
}

impl ProblemMetadata {
    pub fn custom() -> Self {
        Self {
            family: Family::Custom,
            seed: None,
            generator: None,
            params: None,
        }
    }
}

/// An ordered list of convex sets in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityProblem<T> {
    dim: usize,
    sets: Vec<ConvexSet<T>>,
    meta: ProblemMetadata,
}

impl<T: Scalar> FeasibilityProblem<T> {
    pub fn new(dim: usize, sets: Vec<ConvexSet<T>>, meta: ProblemMetadata) -> Result<Self> {
        if dim < 1 {
            return Err(Error::Validation("problem dimension must be at least 1".into()));
        }
        if sets.is_empty() {
            return Err(Error::Validation("problem needs at least one set".into()));
        }
        if let Some((i, s)) = sets.iter().enumerate().find(|(_, s)| s.dim() != dim) {
            return Err(Error::Validation(format!(
                "set {i} ({}) has dimension {}, problem dimension is {dim}",
                s.kind(),
                s.dim()
            )));
        }
        Ok(Self { dim, sets, meta })
    }

    /// Problem without generator metadata.
    pub fn custom(dim: usize, sets: Vec<ConvexSet<T>>) -> Result<Self> {
        Self::new(dim, sets, ProblemMetadata::custom())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.sets.len()
    }

    pub fn sets(&self) -> &[ConvexSet<T>] {
        &self.sets
    }

    pub fn metadata(&self) -> &ProblemMetadata {
        &self.meta
    }

    pub fn family(&self) -> Family {
        self.meta.family
    }

    /// `Σ_i ‖P_{C_i}(x) − x‖` on a raw slice.
    pub fn total_residual(&self, x: &[T]) -> T {
        self.sets.iter().map(|s| s.distance_to(x)).sum()
    }

    /// Smallest interior slack of `x` over all sets; positive means `x` is an
    /// interior point of the intersection.
    pub fn min_interior_slack(&self, x: &Vector<T>) -> Result<T> {
        crate::error::check_dim(self.dim, x.dim())?;
        Ok(self
            .sets
            .iter()
            .map(|s| s.interior_slack(x.as_slice()))
            .fold(T::infinity(), T::min))
    }

    /// SHA-256 over the dimension and every stored number's bit pattern.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for set in &self.sets {
            h.update(set.kind().as_bytes());
            for v in set.numbers() {
                h.update(v.as_f64().to_bits().to_le_bytes());
            }
        }
        hex(&h.finalize())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ProblemFileRef {
            version: FILE_VERSION,
            family: self.meta.family,
            seed: self.meta.seed,
            generator: self.meta.generator.as_deref(),
            n: self.dim,
            m: self.sets.len(),
            params: self.meta.params.as_ref(),
            sets: &self.sets,
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::Parse {
            context: "problem serialization".into(),
            message: e.to_string(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_in(text, "problem file")
    }

    fn from_json_in(text: &str, context: &str) -> Result<Self> {
        let file: ProblemFile<T> = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: context.to_string(),
            message: e.to_string(),
        })?;
        if file.version != FILE_VERSION {
            return Err(Error::Validation(format!(
                "unsupported problem file version {} (expected {FILE_VERSION})",
                file.version
            )));
        }
        if file.m != file.sets.len() {
            return Err(Error::Validation(format!(
                "field m = {} but {} sets are listed",
                file.m,
                file.sets.len()
            )));
        }
        let meta = ProblemMetadata {
            family: file.family,
            seed: file.seed,
            generator: file.generator,
            params: file.params,
        };
        Self::new(file.n, file.sets, meta)
    }
}

/// SHA-256 over the bit patterns of a vector's coordinates.
pub fn vector_digest<T: Scalar>(x: &Vector<T>) -> String {
    let mut h = Sha256::new();
    for v in x.iter() {
        h.update(v.as_f64().to_bits().to_le_bytes());
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
#[serde(bound = "T: Scalar")]
struct ProblemFileRef<'a, T> {
    version: u32,
    family: Family,
    seed: Option<u64>,
    generator: Option<&'a str>,
    n: usize,
    m: usize,
    params: Option<&'a GeneratorParams>,
    sets: &'a [ConvexSet<T>],
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
#[serde(deny_unknown_fields)]
struct ProblemFile<T> {
    version: u32,
    family: Family,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    generator: Option<String>,
    n: usize,
    m: usize,
    #[serde(default)]
    params: Option<GeneratorParams>,
    sets: Vec<ConvexSet<T>>,
}

pub fn save_problem<T: Scalar>(problem: &FeasibilityProblem<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = problem.to_json()?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_problem<T: Scalar>(path: impl AsRef<Path>) -> Result<FeasibilityProblem<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FeasibilityProblem::from_json_in(&text, &path.display().to_string())
}

/// Draws from `[lo, hi]`, redrawing exact zeros when the range allows a
/// positive value.
fn positive_draw(rng: &mut UniformStream, [lo, hi]: [f64; 2]) -> f64 {
    loop {
        let v = rng.uniform(lo, hi);
        if v > 0.0 || hi <= 0.0 {
            return v;
        }
    }
}

fn uniform_coords(rng: &mut UniformStream, n: usize, [lo, hi]: [f64; 2]) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(lo, hi)).collect()
}

fn generated_meta(family: Family, params: &GeneratorParams) -> ProblemMetadata {
    ProblemMetadata {
        family,
        seed: Some(params.seed),
        generator: Some(GENERATOR_ID.to_string()),
        params: Some(params.clone()),
    }
}

/// `m` slabs `-b_i ≤ ⟨a^i, x⟩ ≤ b_i`: coordinates of `a^i` uniform in
/// `normal_range`, then normalized; `b_i` uniform in `halfwidth_range`.
pub fn generate_linear<T: Scalar>(params: &GeneratorParams) -> Result<FeasibilityProblem<T>> {
    params.validate()?;
    let mut rng = UniformStream::new(params.seed);
    let mut sets = Vec::with_capacity(params.m);
    for _ in 0..params.m {
        let normal = loop {
            let a = uniform_coords(&mut rng, params.n, params.normal_range);
            if a.iter().any(|&v| v != 0.0) {
                break a;
            }
        };
        let halfwidth = positive_draw(&mut rng, params.halfwidth_range);
        // b_i bounds the normalized row, so normalize before building the slab
        let a = Vector::<T>::from_f64(&normal)?;
        let len = a.norm();
        let unit = Vector::new(a.iter().map(|&v| v / len).collect())?;
        sets.push(ConvexSet::slab(unit, T::lit(halfwidth))?);
    }
    FeasibilityProblem::new(params.n, sets, generated_meta(Family::Linear, params))
}

/// `m` balls with centers uniform in `center_range` and radius
/// `‖center‖ + α_i`, `α_i` uniform in `radius_slack_range`, so every ball
/// contains the origin.
pub fn generate_quadratic<T: Scalar>(params: &GeneratorParams) -> Result<FeasibilityProblem<T>> {
    params.validate()?;
    let mut rng = UniformStream::new(params.seed);
    let mut sets = Vec::with_capacity(params.m);
    for _ in 0..params.m {
        let center = Vector::<T>::from_f64(&uniform_coords(&mut rng, params.n, params.center_range))?;
        let slack = positive_draw(&mut rng, params.radius_slack_range);
        let radius = center.norm() + T::lit(slack);
        sets.push(ConvexSet::ball(center, radius)?);
    }
    FeasibilityProblem::new(params.n, sets, generated_meta(Family::Quadratic, params))
}

pub fn generate<T: Scalar>(family: Family, params: &GeneratorParams) -> Result<FeasibilityProblem<T>> {
    match family {
        Family::Linear => generate_linear(params),
        Family::Quadratic => generate_quadratic(params),
        Family::Custom => Err(Error::invalid("the custom family has no generator")),
    }
}

/// Starting point with coordinates uniform in `x0_range`, seeded by `params.seed`.
pub fn generate_x0<T: Scalar>(params: &GeneratorParams) -> Result<Vector<T>> {
    params.validate()?;
    let mut rng = UniformStream::new(params.seed);
    Vector::from_f64(&uniform_coords(&mut rng, params.n, params.x0_range))
}
