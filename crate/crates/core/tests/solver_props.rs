mod common;

use common::*;
use cyclic_dr::solver::default_stall_window;
use cyclic_dr::{
    build_q, generate_x0, problems::generate, solve, FeasibilityProblem, Family, GeneratorParams, Method,
    ProjectionCounter, SolverConfig, Termination, Vector,
};
use proptest::prelude::*;

fn instance(family: Family, n: usize, m: usize, seed: u64) -> (FeasibilityProblem<f64>, Vector<f64>) {
    let params = GeneratorParams::new(n, m, seed);
    let p = generate::<f64>(family, &params).unwrap();
    let x0 = generate_x0::<f64>(&params.with_seed(seed + 1000)).unwrap();
    (p, x0)
}

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Linear), Just(Family::Quadratic)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn q_iterates_are_fejer_monotone(fam in family(), seed in 0u64..1000, r in 2usize..6) {
        let (p, x0) = instance(fam, 8, 12, seed);
        let q = build_q(&p, r).unwrap();
        let mut x = x0.as_slice().to_vec();
        let mut scratch = Vec::new();
        let mut c = ProjectionCounter::new();
        for _ in 0..200 {
            let before = dist(&x, &[0.0; 8]);
            q.apply_in_place(&mut x, &mut scratch, &mut c);
            prop_assert!(dist(&x, &[0.0; 8]) <= before + 1e-10);
        }
    }

    #[test]
    fn counter_law_per_method(fam in family(), seed in 0u64..1000, r in 2usize..5, iters in 1u64..40) {
        let (p, x0) = instance(fam, 6, 12, seed);
        let check = |config: SolverConfig, per_iter: u64| -> Result<(), TestCaseError> {
            let mut config = config;
            config.max_iterations = iters;
            config.epsilon = 1e-300;
            let rep = solve(&p, &config, &x0).unwrap();
            prop_assert_eq!(rep.counters.projections, rep.counters.iterations * per_iter);
            Ok(())
        };
        check(SolverConfig::cyclic(r), r as u64)?;
        check(SolverConfig::full_cycle(r), (12 * r) as u64)?;
        check(SolverConfig::product_space(), 12)?;
        if 12 % (r - 1) == 0 {
            check(SolverConfig::short_cycle(r), (12 / (r - 1) * r) as u64)?;
        }
    }

    #[test]
    fn converged_points_are_feasible(fam in family(), seed in 0u64..1000) {
        let (p, x0) = instance(fam, 10, 20, seed);
        // A window of m/(r-1) blocks spans one full pass over the sets.
        let mut cyclic = SolverConfig::cyclic(3);
        cyclic.stall_window = Some(10);
        for config in [cyclic, SolverConfig::full_cycle(2), SolverConfig::product_space()] {
            let rep = solve(&p, &config, &x0).unwrap();
            prop_assert_eq!(rep.termination, Termination::Converged);
            prop_assert!(rep.final_error <= 1e-6 * 20.0, "{} {}", config.label(), rep.final_error);
            prop_assert_eq!(rep.final_error, cyclic_dr::error_metric(&p, &rep.final_point).unwrap());
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let (p, x0) = instance(Family::Quadratic, 10, 30, 5);
    for config in [
        SolverConfig::cyclic(4),
        SolverConfig::product_space(),
        SolverConfig::random_product(3, 11),
    ] {
        let a = solve(&p, &config, &x0).unwrap();
        let b = solve(&p, &config, &x0).unwrap();
        assert_eq!(a.final_point, b.final_point);
        assert_eq!(a.counters, b.counters);
        let errs = |r: &cyclic_dr::SolveReport64| r.error_trace.iter().map(|t| (t.iteration, t.error)).collect::<Vec<_>>();
        assert_eq!(errs(&a), errs(&b));
    }
}

#[test]
fn random_product_with_certain_coin_is_full_cycle() {
    let (p, x0) = instance(Family::Linear, 8, 16, 2);
    let mut rp = SolverConfig::random_product(2, 4);
    rp.coin_bias = 1.0;
    let a = solve(&p, &rp, &x0).unwrap();
    let b = solve(&p, &SolverConfig::full_cycle(2), &x0).unwrap();
    assert_eq!(a.final_point, b.final_point);
    assert_eq!(a.counters, b.counters);
}

#[test]
fn trace_starts_at_zero_and_ends_at_final() {
    let (p, x0) = instance(Family::Quadratic, 10, 20, 1);
    let mut config = SolverConfig::cyclic(2);
    config.trace_every = 7;
    let rep = solve(&p, &config, &x0).unwrap();
    let first = &rep.error_trace[0];
    assert_eq!((first.iteration, first.projections), (0, 0));
    assert_eq!(first.error, cyclic_dr::error_metric(&p, &x0).unwrap());
    let last = rep.error_trace.last().unwrap();
    assert_eq!(last.iteration, rep.counters.iterations);
    assert_eq!(last.error, rep.final_error);
    assert!(rep.error_trace[1..rep.error_trace.len() - 1].iter().all(|t| t.iteration % 7 == 0));

    config.trace_every = 0;
    let rep = solve(&p, &config, &x0).unwrap();
    assert_eq!(rep.error_trace.len(), 2);
}

#[test]
fn stall_window_defaults() {
    assert_eq!(default_stall_window(200, 3), 67);
    let cfg = SolverConfig::cyclic(3);
    assert_eq!(cfg.resolved_stall_window(200), 67);
    assert_eq!(SolverConfig::product_space().resolved_stall_window(200), 1);
    let mut custom = SolverConfig::cyclic(3);
    custom.stall_window = Some(4);
    assert_eq!(custom.resolved_stall_window(200), 4);
}

#[test]
fn invalid_configs_are_rejected() {
    let (p, x0) = instance(Family::Linear, 4, 5, 0);
    assert!(solve(&p, &SolverConfig::cyclic(6), &x0).is_err());
    assert!(solve(&p, &SolverConfig::cyclic(1), &x0).is_err());
    assert!(solve(&p, &SolverConfig::short_cycle(3), &x0).is_err());
    let mut bad = SolverConfig::random_product(2, 0);
    bad.coin_bias = -0.1;
    assert!(solve(&p, &bad, &x0).is_err());
    assert!(solve(&p, &SolverConfig::cyclic(2), &v(&[0.0, 1.0])).is_err());
}

#[test]
fn method_names_round_trip() {
    for m in [Method::Cyclic, Method::FullCycle, Method::ShortCycle, Method::ProductSpace, Method::RandomProduct] {
        assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
    }
    let cfg = SolverConfig::cyclic(5);
    let json = serde_json::to_string(&cfg).unwrap();
    assert_eq!(serde_json::from_str::<SolverConfig>(&json).unwrap(), cfg);
    assert!(serde_json::from_str::<SolverConfig>(r#"{"method":"cyclic","bogus":1}"#).is_err());
}

#[test]
fn single_precision_solve() {
    let params = GeneratorParams::new(10, 20, 3);
    let p = cyclic_dr::generate_quadratic::<f32>(&params).unwrap();
    let x0 = generate_x0::<f32>(&params.with_seed(4)).unwrap();
    let mut config = SolverConfig::cyclic(3);
    config.epsilon = 1e-6;
    let rep = solve(&p, &config, &x0).unwrap();
    assert_eq!(rep.termination, Termination::Converged);
    assert!(rep.final_error < 1e-3, "{}", rep.final_error);
}

/// With the default window of ceil(m/r) blocks, a run of idle blocks shorter
/// than a full pass can end a cyclic run while unvisited sets are violated.
#[test]
fn default_window_can_stop_before_a_full_pass() {
    let (p, x0) = instance(Family::Linear, 10, 20, 29);
    let short = solve(&p, &SolverConfig::cyclic(2), &x0).unwrap();
    assert_eq!(short.stall_window, 10);
    assert_eq!(short.termination, Termination::Converged);
    assert!(short.final_error > 1e-3, "{}", short.final_error);

    let mut full = SolverConfig::cyclic(2);
    full.stall_window = Some(20);
    let rep = solve(&p, &full, &x0).unwrap();
    assert_eq!(rep.termination, Termination::Converged);
    assert!(rep.final_error <= 1e-6 * 20.0, "{}", rep.final_error);
}
