//! Convex feasibility by cyclic r-sets Douglas-Rachford iterations.
//!
//! Given closed convex sets `C_0, …, C_{m-1}` in `R^n`, the solvers look for a
//! point in their intersection using compositions of reflections
//! `R_C = 2 P_C − Id`. The r-sets DR operator on a tuple of sets is
//! `½(Id + R_{C_{r-1}} ⋯ R_{C_0})`, and the cyclic method walks overlapping
//! blocks of `r` consecutive sets, each block starting on the last set of the
//! one before.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix `f64`.
//!
//! ```
//! use cyclic_dr::{generate_quadratic, generate_x0, solve, GeneratorParams, SolverConfig, Termination};
//!
//! let params = GeneratorParams::new(10, 20, 1);
//! let problem = generate_quadratic::<f64>(&params).unwrap();
//! let x0 = generate_x0::<f64>(&params.with_seed(2)).unwrap();
//! let report = solve(&problem, &SolverConfig::cyclic(3), &x0).unwrap();
//! assert_eq!(report.termination, Termination::Converged);
//! assert!(report.final_error < 1e-6);
//! ```

pub mod bench;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod operators;
pub mod problems;
pub mod rng;
pub mod scalar;
pub mod schedule;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{Ball, ConvexSet, HalfspaceSlab, Hyperplane, Project, Vector};
pub use operators::{
    extract_candidate, ComposedProjections, ProductSpaceDrOperator, ProjectionCounter, RSetsDrOperator,
};
pub use problems::{
    generate_linear, generate_quadratic, generate_x0, load_problem, save_problem, FeasibilityProblem, Family,
    GeneratorParams,
};
pub use scalar::Scalar;
pub use schedule::{block_indices, build_q, build_q_tilde, BlockSchedule, RandomProduct, SweepKind, SweepPlan};
pub use solver::{
    check_termination, error_metric, solve, Method, SolveReport, SolverConfig, StallCounter, Termination,
};

pub type Vector64 = Vector<f64>;
pub type Vector32 = Vector<f32>;
pub type ConvexSet64 = ConvexSet<f64>;
pub type Problem64 = FeasibilityProblem<f64>;
pub type Problem32 = FeasibilityProblem<f32>;
pub type SolveReport64 = SolveReport<f64>;
