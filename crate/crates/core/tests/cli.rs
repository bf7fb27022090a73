mod common;

use std::fs;

use common::{latrel, latrel_in};
use lattice_reliability::report::Method;
use lattice_reliability::Report;

fn stdout_report(args: &[&str]) -> Report {
    let out = latrel(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    Report::from_json(&String::from_utf8_lossy(&out.stdout), "stdout").unwrap()
}

fn cut_sets(r: &Report) -> Vec<Vec<usize>> {
    r.critical_table()
        .unwrap()
        .iter()
        .map(|c| c.state.clone())
        .collect()
}

#[test]
fn assess_sys5_reports_twelve_evaluations() {
    let r = stdout_report(&["assess", "--system", "sys5", "--k-max", "5"]);
    assert_eq!(r.method, Method::Csilp);
    assert_eq!(r.evaluation_count, 12);
    assert_eq!(r.critical_records.as_ref().unwrap().len(), 4);
    assert_eq!(r.failure_lattice_count, Some(4));
    assert_eq!(r.stop_reason, "completed");
    assert_eq!(r.lolp_lower, r.lolp_upper);
}

#[test]
fn oracle_lists_the_sys5_cut_sets() {
    let r = stdout_report(&["oracle", "--system", "sys5"]);
    assert_eq!(
        cut_sets(&r),
        [vec![1], vec![2, 3], vec![3, 4], vec![2, 4, 5]]
    );
}

#[test]
fn bundled_systems_agree_with_exhaustive_enumeration() {
    for name in ["sys5", "test3", "threshold8", "threshold10", "threshold12"] {
        let exact = stdout_report(&["oracle", "--system", name]);
        let ours = stdout_report(&[
            "assess",
            "--system",
            name,
            "--k-max",
            &exact.components.to_string(),
        ]);
        assert!((exact.lolp - ours.lolp).abs() < 1e-12, "{name}");
        let mut a = cut_sets(&exact);
        let mut b = cut_sets(&ours);
        a.sort();
        b.sort();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn system_files_load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mine.json");
    fs::write(
        &path,
        r#"{"schema_version": 1, "name": "mine",
            "model": {"kind": "threshold", "demand": 50,
                      "components": [{"capacity": 30, "failure_prob": 0.1},
                                     {"capacity": 30, "failure_prob": 0.1},
                                     {"capacity": 30, "failure_prob": 0.1}]}}"#,
    )
    .unwrap();
    let r = stdout_report(&["assess", "--system", path.to_str().unwrap()]);
    // Any two of three units failing leaves 30 < 50.
    let want = 3.0 * 0.01 * 0.9 + 0.001;
    assert!((r.lolp - want).abs() < 1e-12);
    assert_eq!(r.system, "mine");
}

#[test]
fn out_dir_gets_json_or_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = latrel_in(
        dir.path(),
        &["assess", "--system", "sys5", "--format", "csv"],
    );
    assert!(out.status.success());
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("evals,lower,upper,gap,elapsed_ms\n"));
    let mut last_eval = 0;
    let (mut last_lo, mut last_hi) = (0.0, 1.0);
    for line in trace.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (e, lo, hi): (u64, f64, f64) = (
            f[0].parse().unwrap(),
            f[1].parse().unwrap(),
            f[2].parse().unwrap(),
        );
        assert!(e > last_eval && lo >= last_lo && hi <= last_hi);
        (last_eval, last_lo, last_hi) = (e, lo, hi);
    }
    assert!(dir.path().join("critical_states.csv").exists());
    assert!(!dir.path().join("report.json").exists());

    let out = latrel_in(dir.path(), &["mcs", "--system", "sys5", "--seed", "7"]);
    assert!(out.status.success());
    let r = Report::load(dir.path().join("report.json")).unwrap();
    assert_eq!(r.method, Method::MonteCarlo);
    assert!(r.rng.as_deref().unwrap().contains("chacha"));
    assert!(r.coefficient_of_variation.unwrap() <= 0.01);
}

#[test]
fn report_command_pretty_prints_a_saved_report() {
    let dir = tempfile::tempdir().unwrap();
    assert!(latrel_in(dir.path(), &["assess", "--system", "sys5"])
        .status
        .success());
    let file = dir.path().join("report.json");
    let out = latrel(&["report", file.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("11.7910000000%"), "{text}");
    assert!(text.contains("{c2,c4,c5}"));

    let out = latrel(&["report", file.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.stdout, fs::read(&file).unwrap());
}

#[test]
fn timing_is_opt_in() {
    let plain = latrel(&["assess", "--system", "sys5"]);
    assert!(!String::from_utf8_lossy(&plain.stdout).contains("wall_time_ms"));
    let timed = stdout_report(&["assess", "--system", "sys5", "--timing"]);
    assert!(timed.wall_time_ms.is_some());
    assert!(timed.trace.iter().all(|t| t.elapsed_ms.is_some()));
}

#[test]
fn truncation_flags_are_honoured() {
    let r = stdout_report(&["assess", "--system", "threshold12", "--k-max", "2"]);
    assert_eq!(r.stop_reason, "max_level");
    assert!(r.critical_records.unwrap().iter().all(|c| c.level <= 2));
    let r = stdout_report(&["assess", "--system", "threshold12", "--max-evals", "20"]);
    assert_eq!(r.stop_reason, "budget");
    let r = stdout_report(&["assess", "--system", "threshold12", "--delta", "0.001"]);
    assert!(r.gap.unwrap() <= 0.001);
    let r = stdout_report(&["enumerate", "--system", "threshold12", "--k-max", "2"]);
    assert_eq!(r.method, Method::Enumeration);
    assert_eq!(r.levels_resolved, Some(2));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec![],
        vec!["frobnicate"],
        vec!["assess"],
        vec!["assess", "--system", "sys5", "--bogus"],
        vec!["assess", "--system", "sys5", "--format", "xml"],
        vec!["assess", "--system", "sys5", "--k-max", "two"],
        vec!["assess", "--system", "sys5", "--workers", "0"],
        vec!["assess", "--system", "sys5", "--delta", "-1"],
        vec!["assess", "--system", "no-such-system"],
        vec!["report", "/no/such/report.json"],
    ] {
        let out = latrel(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
    assert_eq!(latrel(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_system_file_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        "{\n  \"schema_version\": 1,\n  \"name\": \"x\",\n  \"model\": {\"kind\": \"cutsets\",\n",
    )
    .unwrap();
    let out = latrel(&["assess", "--system", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains("line"), "{err}");

    fs::write(
        &path,
        r#"{"schema_version": 1, "name": "x", "model": {"kind": "cutsets",
            "components": [{"failure_prob": 1.5}], "cut_sets": [[1]]}}"#,
    )
    .unwrap();
    let out = latrel(&["assess", "--system", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1.5"));
}

#[test]
fn failing_base_state_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.json");
    fs::write(
        &path,
        r#"{"schema_version": 1, "name": "short",
            "model": {"kind": "threshold", "demand": 100,
                      "components": [{"capacity": 40, "failure_prob": 0.1},
                                     {"capacity": 40, "failure_prob": 0.1}]}}"#,
    )
    .unwrap();
    for cmd in ["assess", "enumerate", "mcs", "oracle"] {
        let out = latrel(&[cmd, "--system", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(3), "{cmd}");
    }
}
