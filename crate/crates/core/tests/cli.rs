use std::path::Path;
use std::process::{Command, Output};

use cyclic_dr::bench::{write_records_csv, BenchRecord};
use cyclic_dr::{ConvexSet, Family, Termination};

fn cli(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cyclic-dr"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn gen(dir: &Path, family: &str, n: &str, m: &str, seed: &str, out: &str) {
    let o = cli(&["gen", "--family", family, "--n", n, "--m", m, "--seed", seed, "--out", out], dir);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn gen_writes_requested_problem() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["gen", "--family", "quadratic", "--n", "10", "--m", "5", "--seed", "7", "--out", "p.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("family=quadratic") && text.contains("seed=7") && text.contains("min_origin_slack="), "{text}");
    let p = cyclic_dr::load_problem::<f64>(dir.path().join("p.json")).unwrap();
    assert_eq!((p.dim(), p.m()), (10, 5));
    assert!(p.sets().iter().all(|s| matches!(s, ConvexSet::Ball(_))));
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "linear", "12", "9", "3", "a.json");
    gen(dir.path(), "linear", "12", "9", "3", "b.json");
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.json")).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["gen", "--family", "linear", "--m", "5"], dir.path()).status.code(), Some(2));
    assert_eq!(cli(&["gen", "--family", "cubic", "--m", "5", "--out", "x"], dir.path()).status.code(), Some(2));
    assert_eq!(cli(&["solve", "--problem", "p.json", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(cli(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(cli(&[], dir.path()).status.code(), Some(2));
}

#[test]
fn help_lists_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let help = |sub: &str| {
        let o = cli(&[sub, "--help"], dir.path());
        assert_eq!(o.status.code(), Some(0));
        stdout(&o)
    };
    let g = help("gen");
    assert!(g.contains("--n <N>") && g.contains("[default: 1000]"), "{g}");
    let s = help("solve");
    for flag in ["--eps", "--max-iters", "--x0-seed", "--trace", "--method", "--r "] {
        assert!(s.contains(flag), "{flag} missing from\n{s}");
    }
    assert!(s.contains("[default: 1e-12]") && s.contains("[default: 1000000]"), "{s}");
    let b = help("bench");
    assert!(b.contains("--parallel") && b.contains("default: 10"), "{b}");
    let p = help("profile");
    assert!(p.contains("--metric") && p.contains("[default: time]"), "{p}");
}

#[test]
fn solve_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "quadratic", "20", "40", "1", "p.json");

    let o = cli(&["solve", "--problem", "p.json", "--method", "cyclic", "--r", "3", "--trace", "t.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("termination=converged"), "{text}");
    assert!(text.contains("problem_seed=1") && text.contains("x0_seed=0"), "{text}");
    let trace = cyclic_dr::bench::read_trace_csv(dir.path().join("t.csv")).unwrap();
    assert!(trace.last().unwrap().error <= 1e-6 * 40.0);

    let o = cli(&["solve", "--problem", "p.json", "--max-iters", "2"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("termination=max-iterations"));

    let o = cli(&["solve", "--problem", "p.json", "--method", "short-cycle", "--r", "4"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("divide"), "{}", stderr(&o));

    let o = cli(&["solve", "--problem", "p.json", "--r", "41"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("exceeds"), "{}", stderr(&o));

    assert_eq!(cli(&["solve", "--problem", "missing.json"], dir.path()).status.code(), Some(1));
    std::fs::write(dir.path().join("junk.json"), "{").unwrap();
    assert_eq!(cli(&["solve", "--problem", "junk.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn overflowing_iterates_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let far = f64::MAX / 1.5;
    let text = format!(
        r#"{{"version":1,"family":"custom","n":2,"m":2,"sets":[
            {{"kind":"ball","center":[{far:e},0.0],"radius":1.0}},
            {{"kind":"ball","center":[0.0,0.0],"radius":1.0}}]}}"#
    );
    std::fs::write(dir.path().join("p.json"), text).unwrap();
    let o = cli(&["solve", "--problem", "p.json"], dir.path());
    assert_eq!(o.status.code(), Some(4), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("numerical-failure"));
}

#[test]
fn pair_operator_log_follows_consecutive_pairs() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "linear", "5", "6", "2", "p.json");
    let o = cli(&["solve", "--problem", "p.json", "--r", "2", "--max-iters", "20", "--operator-log", "ops.csv"], dir.path());
    assert!(matches!(o.status.code(), Some(0) | Some(3)), "{}", stderr(&o));
    let log = std::fs::read_to_string(dir.path().join("ops.csv")).unwrap();
    let mut lines = log.lines();
    assert_eq!(lines.next(), Some("iteration,operator,sets"));
    let mut prev_last: Option<usize> = None;
    for (k, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], (k + 1).to_string());
        assert_eq!(f[1], "T");
        let sets: Vec<usize> = f[2].split(' ').map(|s| s.parse().unwrap()).collect();
        assert_eq!(sets, vec![k % 6, (k + 1) % 6]);
        if let Some(p) = prev_last {
            assert_eq!(sets[0], p);
        }
        prev_last = Some(sets[1]);
    }
}

const TINY_PLAN: &str = r#"{
    "families": ["quadratic"],
    "dimensions": [8],
    "sizes": [20],
    "repetitions": 2,
    "solvers": [{"method": "cyclic", "r": 2}, {"method": "full-cycle", "r": 3}]
}"#;

#[test]
fn bench_then_profile() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("plan.json"), TINY_PLAN).unwrap();
    let o = cli(&["bench", "--plan", "plan.json", "--out", "r1.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("base_seed=0"));
    assert!(stderr(&o).contains("[2/2]"), "{}", stderr(&o));
    let o = cli(&["bench", "--plan", "plan.json", "--out", "r4.csv", "--parallel", "4"], dir.path());
    assert_eq!(o.status.code(), Some(0));

    let strip = |name: &str| {
        let mut recs = cyclic_dr::bench::read_records_csv(dir.path().join(name)).unwrap();
        recs.iter_mut().for_each(|r| r.wall_time_s = 0.0);
        recs
    };
    let recs = strip("r1.csv");
    assert_eq!(recs.len(), 4);
    assert_eq!(recs, strip("r4.csv"));

    for metric in ["time", "projections"] {
        let o = cli(&["profile", "--records", "r1.csv", "--metric", metric, "--out", "prof.csv"], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("pi(cyclic-r2, 1) = "), "{}", stdout(&o));
        let prof = cyclic_dr::bench::read_profile_csv(dir.path().join("prof.csv")).unwrap();
        assert_eq!(prof.taus.len(), 200);
    }

    let o = cli(&["bench", "--plan", "plan.json", "--out", "r.csv", "--reps", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(cyclic_dr::bench::read_records_csv(dir.path().join("r.csv")).unwrap().len(), 2);
}

#[test]
fn bench_rejects_bad_plans() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("plan.json"), TINY_PLAN.replace("\"repetitions\"", "\"reps\"")).unwrap();
    let o = cli(&["bench", "--plan", "plan.json", "--out", "r.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("reps"), "{}", stderr(&o));
    assert_eq!(cli(&["bench", "--plan", "none.json", "--out", "r.csv"], dir.path()).status.code(), Some(1));
}

fn record(m: usize, solver: &str, t: f64) -> BenchRecord {
    BenchRecord {
        family: Family::Linear,
        m,
        n: 1,
        solver: solver.into(),
        rep: 0,
        seed: 0,
        wall_time_s: t,
        iterations: 1,
        projections: 1,
        final_error: 0.0,
        termination: Termination::Converged,
    }
}

#[test]
fn profile_of_the_two_by_two_example() {
    let dir = tempfile::tempdir().unwrap();
    let recs = vec![record(1, "a", 1.0), record(1, "b", 2.0), record(2, "a", 2.0), record(2, "b", 1.0)];
    write_records_csv(dir.path().join("r.csv"), &recs).unwrap();
    let o = cli(&["profile", "--records", "r.csv", "--out", "p.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("pi(a, 1) = 0.5") && text.contains("pi(b, 1) = 0.5"), "{text}");

    write_records_csv(dir.path().join("gap.csv"), &recs[..3]).unwrap();
    let o = cli(&["profile", "--records", "gap.csv", "--out", "p.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("b"), "{}", stderr(&o));
}
