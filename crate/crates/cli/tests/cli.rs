use std::path::Path;
use std::process::{Command, Output};

fn qtree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtree")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = qtree(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect()
}

#[test]
fn pool_writes_one_row_per_angle_and_depth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curves.csv");
    ok(&["--no-timestamp", "pool", "--theta-grid", "1.5708:3.1416:5", "--t-max", "12", "--pool-size", "500", "--seed", "42", "--out", p(&out)]);
    let lines = data_lines(&out);
    assert_eq!(lines[0], "theta,t,z_mean,z_typ,se,pool_size");
    assert_eq!(lines.len(), 1 + 5 * 12);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# qtree ") && text.contains("\"pool_size\":500"));
}

#[test]
fn outputs_are_byte_identical_without_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curves.csv");
    let run = |workers: &str| {
        ok(&["--no-timestamp", "--workers", workers, "pool", "--theta-grid", "2.0:2.4:3", "--t-max", "6", "--pool-size", "2000", "--seed", "5", "--out", p(&out)]);
        std::fs::read(&out).unwrap()
    };
    assert_eq!(run("1"), run("3"));
    let stamped = dir.path().join("c.csv");
    ok(&["pool", "--theta-grid", "2.0:2.4:3", "--t-max", "6", "--pool-size", "2000", "--seed", "5", "--out", p(&stamped)]);
    assert!(std::fs::read_to_string(stamped).unwrap().contains("# timestamp "));
}

#[test]
fn simulate_estimate_pipeline_reports_every_truncated_depth() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, rec, z, dec) = (dir.path().join("i.json"), dir.path().join("r.jsonl"), dir.path().join("z.csv"), dir.path().join("d.jsonl"));
    let sim = |inst_flag: &str, rec: &Path| {
        ok(&[
            "--no-timestamp", "simulate", "--t", "4", "--theta", "2.0", "--n-circuits", "12", "--n-shots", "5", "--seed", "3",
            inst_flag, p(&inst), "--out", p(rec),
        ]);
    };
    sim("--instances-out", &rec);
    let records = data_lines(&rec);
    assert_eq!(records.len(), 1 + 12 * 5);
    assert!(records[0].contains("format_version"));

    let replay = dir.path().join("r2.jsonl");
    sim("--instances", &replay);
    let strip = |path: &Path| data_lines(path).into_iter().skip(1).collect::<Vec<_>>();
    assert_eq!(strip(&rec), strip(&replay));

    ok(&["--no-timestamp", "estimate", "--records", p(&rec), "--instances", p(&inst), "--out", p(&z)]);
    let rows = data_lines(&z);
    assert_eq!(rows[0], "t,theta,z_hat,se,n_circuits,n_shots");
    let depths: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(depths, ["1", "2", "3", "4"]);
    assert!(rows[1..].iter().all(|r| r.ends_with(",12,5")));

    ok(&["--no-timestamp", "decode", "--records", p(&rec), "--instances", p(&inst), "--out", p(&dec)]);
    let decoded = data_lines(&dec);
    assert_eq!(decoded.len(), 1 + 12 * 5);
    assert!(decoded[1].contains("\"nz\""));
}

#[test]
fn export_names_files_by_seed_depth_and_angle() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["export-qasm", "--t", "2", "--theta", "2.2142", "--n-circuits", "3", "--variant", "native", "--l", "2", "--out-dir", p(dir.path())]);
    let names: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(names.len(), 3);
    for n in &names {
        assert!(n.ends_with("_2_2214.qasm"), "{n}");
        assert!(std::fs::read_to_string(n).unwrap().starts_with("OPENQASM 2.0;"));
    }
}

#[test]
fn plot_renders_and_rejects_off_grid_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let (curves, est, svg) = (dir.path().join("c.csv"), dir.path().join("e.csv"), dir.path().join("f.svg"));
    ok(&["--no-timestamp", "pool", "--theta-grid", "1.8:2.2:3", "--t-max", "10", "--pool-size", "1000", "--out", p(&curves)]);
    std::fs::write(&est, "t,theta,z_hat,se,n_circuits,n_shots\n1,2.0,0.3,0.05,10,8\n2,1.8,0.35,0.02,10,8\n").unwrap();
    ok(&["--no-timestamp", "plot", "--curves", p(&curves), "--estimates", p(&est), "--out", p(&svg)]);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
    assert_eq!(text.matches("class=\"marker\"").count(), 2);

    std::fs::write(&est, "t,theta,z_hat,se,n_circuits,n_shots\n1,2.05,0.3,0.05,10,8\n").unwrap();
    let bad = qtree(&["plot", "--curves", p(&curves), "--estimates", p(&est), "--out", p(&svg)]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("2.05"));
}

#[test]
fn scaling_and_velocity_print_results() {
    let dir = tempfile::tempdir().unwrap();
    let curves = dir.path().join("c.csv");
    ok(&["pool", "--theta-grid", "2.8:2.8:1", "--t-max", "80", "--pool-size", "2000", "--out", p(&curves)]);
    let out = ok(&["scaling", "--curves", p(&curves), "--theta", "2.8", "--t-min", "20"]);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("exponent = "));
    let out = ok(&["velocity", "--theta", "2.5", "--samples", "20000"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("lambda*"));
}

#[test]
fn usage_and_runtime_errors_have_distinct_codes() {
    let unknown = qtree(&["pool", "--no-such-flag"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(!unknown.stderr.is_empty());
    assert_eq!(qtree(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let bad_grid = qtree(&["pool", "--theta-grid", "2.0", "--t-max", "3", "--out", p(&out)]);
    assert_eq!(bad_grid.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_grid.stderr).contains("start:stop:count"));
    let missing = qtree(&["estimate", "--records", "/nonexistent/r", "--instances", "/nonexistent/i", "--out", p(&out)]);
    assert_eq!(missing.status.code(), Some(1));
    let out_of_domain = qtree(&["critical", "--samples", "1000", "--lo", "0.5"]);
    assert_eq!(out_of_domain.status.code(), Some(1));
}

#[test]
fn critical_reports_estimate_with_interval() {
    let out = ok(&["critical", "--samples", "200000", "--tol", "0.01", "--seed", "7"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let value: f64 = text.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((value - 2.2142).abs() < 0.05, "{text}");
    assert!(text.contains("± "));
}
