use cyclic_dr::bench::{
    averaged_metric, cell_seed, default_tau_grid, performance_profile, performance_ratios, read_profile_csv,
    read_records_csv, read_trace_csv, run_bench, run_bench_with, run_cell, write_profile_csv, write_records_csv,
    write_trace_csv, BenchPlan, Metric, RecordWriter,
};
use cyclic_dr::{Error, Family, SolverConfig, Termination};

fn tiny_plan() -> BenchPlan {
    BenchPlan::from_json(
        r#"{
            "families": ["quadratic"],
            "dimensions": [10],
            "sizes": [30],
            "repetitions": 3,
            "base_seed": 5,
            "solvers": [{"method": "cyclic", "r": 2}, {"method": "cyclic", "r": 5}]
        }"#,
    )
    .unwrap()
}

fn two_size_plan() -> BenchPlan {
    let mut p = tiny_plan();
    p.families = vec![Family::Linear, Family::Quadratic];
    p.sizes = vec![20, 40];
    p.solvers.push(SolverConfig::product_space());
    p
}

fn strip_time(mut recs: Vec<cyclic_dr::bench::BenchRecord>) -> Vec<cyclic_dr::bench::BenchRecord> {
    for r in &mut recs {
        r.wall_time_s = 0.0;
    }
    recs
}

#[test]
fn record_count_is_cells_times_solvers() {
    let recs = run_bench::<f64>(&tiny_plan(), 1).unwrap();
    assert_eq!(recs.len(), 6);
    assert!(recs.iter().all(|r| r.termination == Termination::Converged));
    assert_eq!(recs[0].solver, "cyclic-r2");
    assert_eq!(recs[1].solver, "cyclic-r5");
}

#[test]
fn reruns_and_thread_counts_agree() {
    let plan = two_size_plan();
    let a = strip_time(run_bench::<f64>(&plan, 1).unwrap());
    let b = strip_time(run_bench::<f64>(&plan, 1).unwrap());
    let c = strip_time(run_bench::<f64>(&plan, 3).unwrap());
    assert_eq!(a.len(), 2 * 2 * 3 * 3);
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn every_solver_in_a_cell_sees_the_same_instance() {
    let plan = two_size_plan();
    let cells = plan.cells();
    let first = run_cell::<f64>(&plan, cells[0]).unwrap();
    let again = run_cell::<f64>(&plan, cells[0]).unwrap();
    assert_eq!(first.instance_digest, again.instance_digest);
    assert_eq!(first.records.len(), plan.solvers.len());
    assert!(first.records.iter().all(|r| r.seed == cells[0].seed));
    let other = run_cell::<f64>(&plan, cells[1]).unwrap();
    assert_ne!(first.instance_digest, other.instance_digest);
}

#[test]
fn cell_seeds_are_distinct() {
    let mut seen = std::collections::HashSet::new();
    for fam in [Family::Linear, Family::Quadratic] {
        for n in [50, 200] {
            for m in [200, 1000, 2000] {
                for rep in 0..10 {
                    assert!(seen.insert(cell_seed(0, fam, n, m, rep)));
                }
            }
        }
    }
}

#[test]
fn sink_sees_cells_in_order() {
    let plan = two_size_plan();
    let mut order = Vec::new();
    run_bench_with::<f64, _>(&plan, 4, |cell| {
        order.push((cell.cell.family, cell.cell.m, cell.cell.rep));
        Ok(())
    })
    .unwrap();
    let want: Vec<_> = plan.cells().iter().map(|c| (c.family, c.m, c.rep)).collect();
    assert_eq!(order, want);
}

#[test]
fn sink_error_stops_the_run() {
    let plan = two_size_plan();
    let mut calls = 0;
    let err = run_bench_with::<f64, _>(&plan, 1, |_| {
        calls += 1;
        Err(Error::InvalidInput("stop".into()))
    })
    .unwrap_err();
    assert!(err.to_string().contains("stop"));
    assert_eq!(calls, 1);
}

#[test]
fn plan_errors_name_the_field() {
    let err = BenchPlan::from_json(r#"{"families":["linear"],"dimensions":[5],"sizes":[5],"solvers":[],"reps":3}"#)
        .unwrap_err()
        .to_string();
    assert!(err.contains("reps"), "{err}");
    let err = BenchPlan::from_json(r#"{"families":["linear"],"dimensions":[5],"sizes":[5],"solvers":[{"method":"cyclic","r":9}]}"#)
        .unwrap_err()
        .to_string();
    assert!(err.contains("cyclic-r9"), "{err}");
    let err = BenchPlan::from_json(r#"{"families":["linear"],"dimensions":[5],"sizes":[5]}"#)
        .unwrap_err()
        .to_string();
    assert!(err.contains("solvers"), "{err}");
}

#[test]
fn shipped_plans_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("plans");
    let desk = BenchPlan::load(dir.join("desk.json")).unwrap();
    assert_eq!(desk.dimensions, [50, 200]);
    assert_eq!(desk.sizes, [200, 1000, 2000]);
    assert_eq!(desk.repetitions, 10);
    BenchPlan::load(dir.join("desk-product.json")).unwrap();
    let full = BenchPlan::load(dir.join("full.json")).unwrap();
    assert_eq!(full.dimensions, [1000]);
}

#[test]
fn csv_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let recs = run_bench::<f64>(&tiny_plan(), 1).unwrap();
    let path = dir.path().join("records.csv");
    write_records_csv(&path, &recs).unwrap();
    assert_eq!(read_records_csv(&path).unwrap(), recs);

    let mut w = RecordWriter::create(dir.path().join("partial.csv")).unwrap();
    w.write(&recs[..2]).unwrap();
    assert_eq!(read_records_csv(dir.path().join("partial.csv")).unwrap(), recs[..2]);

    let table = averaged_metric(&recs, Metric::Projections).unwrap();
    let ratios = performance_ratios(&table).unwrap();
    let prof = performance_profile(&ratios, &default_tau_grid(&ratios)).unwrap();
    write_profile_csv(dir.path().join("profile.csv"), &prof).unwrap();
    assert_eq!(read_profile_csv(dir.path().join("profile.csv")).unwrap(), prof);

    let p = cyclic_dr::generate_quadratic::<f64>(&cyclic_dr::GeneratorParams::new(5, 8, 1)).unwrap();
    let x0 = cyclic_dr::generate_x0::<f64>(&cyclic_dr::GeneratorParams::new(5, 8, 2)).unwrap();
    let rep = cyclic_dr::solve(&p, &SolverConfig::cyclic(2), &x0).unwrap();
    write_trace_csv(dir.path().join("trace.csv"), &rep.error_trace).unwrap();
    assert_eq!(read_trace_csv(dir.path().join("trace.csv")).unwrap(), rep.error_trace);

    std::fs::write(dir.path().join("bad.csv"), "a,b\n1,2\n").unwrap();
    assert!(read_records_csv(dir.path().join("bad.csv")).is_err());
}

#[test]
fn missing_cells_are_reported_as_gaps() {
    let mut recs = run_bench::<f64>(&tiny_plan(), 1).unwrap();
    recs.retain(|r| r.solver == "cyclic-r2");
    let mut other = recs[0].clone();
    other.solver = "cyclic-r5".into();
    other.m = 99;
    recs.push(other);
    let err = averaged_metric(&recs, Metric::Time).unwrap_err();
    let Error::Gap(missing) = err else { panic!("expected a gap error, got {err}") };
    assert_eq!(missing.len(), 2, "{missing:?}");
}

#[test]
fn single_solver_profile_is_one() {
    let mut plan = tiny_plan();
    plan.solvers.truncate(1);
    let recs = run_bench::<f64>(&plan, 1).unwrap();
    let table = averaged_metric(&recs, Metric::Time).unwrap();
    let ratios = performance_ratios(&table).unwrap();
    let prof = performance_profile(&ratios, &default_tau_grid(&ratios)).unwrap();
    assert!(prof.values[0].iter().all(|&v| v == 1.0));
}
