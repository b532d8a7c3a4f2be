//! End-to-end tests of the CLI surface: flag parsing, output formats, the
//! config file, and environment overrides.

use std::path::PathBuf;
use std::process::{Command, Output};

fn neveu() -> Command {
    Command::new(env!("CARGO_BIN_EXE_neveu"))
}

fn run(args: &[&str]) -> Output {
    neveu().args(args).output().expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("neveu-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn classify_outputs_json_classification() {
    let out = stdout_of(&run(&["classify", "--beta", "2.5", "--theta", "2"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["extinct"], false);
    assert_eq!(v["explodes"], true);
    assert_eq!(v["comes_down"], false);
}

#[test]
fn classify_boundary_cells() {
    for (beta, theta, extinct, explodes, comes_down) in [
        ("1", "1", false, false, false),
        ("0", "0", true, false, false),
        ("3", "1.5", false, false, true),
        ("2", "1", false, false, false),
    ] {
        let out = stdout_of(&run(&["classify", "--beta", beta, "--theta", theta]));
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["extinct"], extinct, "({beta},{theta})");
        assert_eq!(v["explodes"], explodes, "({beta},{theta})");
        assert_eq!(v["comes_down"], comes_down, "({beta},{theta})");
    }
}

#[test]
fn generator_eval_emits_csv_with_contract_header() {
    let out = stdout_of(&run(&[
        "generator-eval",
        "--fn",
        "exp_neg:lambda=1",
        "--beta",
        "1",
        "--theta",
        "1",
        "--r",
        "1",
        "--grid",
        "0.5:2:4",
    ]));
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "u,small_term,big_term,total,err_estimate");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 5);
        // Machine format carries 17 significant digits.
        let mantissa = cols[0].split('e').next().unwrap();
        let digits = mantissa.chars().filter(|c| c.is_ascii_digit()).count();
        assert_eq!(digits, 17, "expected full precision, got {}", cols[0]);
        let total: f64 = cols[3].parse().unwrap();
        let small: f64 = cols[1].parse().unwrap();
        let big: f64 = cols[2].parse().unwrap();
        assert!((total - (small + big)).abs() <= 1e-15 * total.abs().max(1.0));
    }
}

#[test]
fn generator_eval_log_grid_and_unknown_fn() {
    let out = stdout_of(&run(&[
        "generator-eval",
        "--fn",
        "loglog_zero:n=1",
        "--beta",
        "1.5",
        "--theta",
        "0.5",
        "--grid",
        "0.01:1:5:log",
    ]));
    assert_eq!(out.lines().count(), 6);
    let bad = run(&[
        "generator-eval",
        "--fn",
        "nope:x=1",
        "--beta",
        "1",
        "--theta",
        "1",
        "--grid",
        "0.5:2:3",
    ]);
    assert!(!bad.status.success());
}

#[test]
fn simulate_reports_passage_estimate() {
    let out = stdout_of(&run(&[
        "simulate", "--beta", "1", "--theta", "1", "--x0", "1", "--a", "0.5", "--b", "2",
        "--paths", "300", "--seed", "9",
    ]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let p = v["p_hat"].as_f64().unwrap();
    let lo = v["ci_lo"].as_f64().unwrap();
    let hi = v["ci_hi"].as_f64().unwrap();
    assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
    assert_eq!(v["n"], 300);
    assert_eq!(v["counts"]["hit_lower"].as_u64().unwrap()
        + v["counts"]["hit_upper"].as_u64().unwrap()
        + v["counts"]["extinct"].as_u64().unwrap()
        + v["counts"]["exploded"].as_u64().unwrap()
        + v["counts"]["timeout"].as_u64().unwrap(), 300);
}

#[test]
fn passage_alias_matches_simulate() {
    let a = stdout_of(&run(&[
        "simulate", "--beta", "1", "--theta", "1", "--x0", "1", "--a", "0.5", "--b", "2",
        "--paths", "200", "--seed", "4", "--direction", "up",
    ]));
    let b = stdout_of(&run(&[
        "passage", "--beta", "1", "--theta", "1", "--x0", "1", "--a", "0.5", "--b", "2",
        "--paths", "200", "--seed", "4", "--direction", "up",
    ]));
    assert_eq!(a, b);
}

#[test]
fn simulate_rerun_is_byte_identical_across_thread_counts() {
    let args = [
        "simulate", "--beta", "1", "--theta", "1", "--x0", "1", "--a", "0.5", "--b", "2",
        "--paths", "500", "--seed", "31",
    ];
    let one = neveu().args(args).env("RAYON_NUM_THREADS", "1").output().unwrap();
    let many = neveu().args(args).env("RAYON_NUM_THREADS", "8").output().unwrap();
    assert!(one.status.success() && many.status.success());
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn trajectory_dump_is_decimated_csv() {
    let dir = tmp_dir("traj");
    let traj = dir.join("path.csv");
    stdout_of(&run(&[
        "simulate", "--beta", "1", "--theta", "1", "--x0", "1", "--a", "0.5", "--b", "2",
        "--paths", "100", "--seed", "2", "--dump-traj", traj.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&traj).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,X_t");
    let n = lines.count();
    assert!((2..=10_001).contains(&n), "got {n} rows");
    let last = text.lines().last().unwrap();
    let t_last: f64 = last.split(',').next().unwrap().parse().unwrap();
    assert!(t_last >= 0.0);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn sweep_writes_stable_outputs() {
    let dir = tmp_dir("sweep");
    let grid = dir.join("grid.csv");
    std::fs::write(&grid, "beta,theta\n1.0,1.0\n0.5,0.0\n").unwrap();
    let out1 = dir.join("run1");
    let out2 = dir.join("run2");
    for (threads, out) in [("1", &out1), ("6", &out2)] {
        let status = neveu()
            .args([
                "sweep",
                "--grid-file",
                grid.to_str().unwrap(),
                "--paths",
                "150",
                "--seed",
                "12",
                "--out",
                out.to_str().unwrap(),
            ])
            .env("RAYON_NUM_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in ["results.jsonl", "summary.csv"] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across thread counts");
    }
    let csv = std::fs::read_to_string(out1.join("summary.csv")).unwrap();
    assert!(csv.starts_with("beta,theta,pred_extinct"));
    assert_eq!(csv.lines().count(), 3);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["master_seed"], 12);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn verify_bounds_reports_pass() {
    let out = stdout_of(&run(&[
        "verify-bounds", "--case", "eq4.44", "--paths", "400", "--seed", "3", "--format", "human",
    ]));
    assert!(out.contains("PASS"), "{out}");
    assert!(out.contains("eq4.44"));
    let bad = run(&["verify-bounds", "--case", "eq9.99", "--paths", "400", "--seed", "3"]);
    assert!(!bad.status.success());
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tmp_dir("config");
    let cfg = dir.join("neveu.conf");
    std::fs::write(
        &cfg,
        "[classify]\nbeta = 0.5\ntheta = 0.0\n",
    )
    .unwrap();
    let out = stdout_of(&run(&["--config", cfg.to_str().unwrap(), "classify"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["extinct"], true);
    // Explicit flag beats the file.
    let out = stdout_of(&run(&[
        "--config",
        cfg.to_str().unwrap(),
        "classify",
        "--beta",
        "2.0",
    ]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["extinct"], false);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn neveu_seed_env_overrides_flag() {
    let args = [
        "simulate", "--beta", "1", "--theta", "1", "--x0", "1", "--a", "0.5", "--b", "2",
        "--paths", "200", "--seed", "1",
    ];
    let with_env = neveu().args(args).env("NEVEU_SEED", "777").output().unwrap();
    let direct = run(&[
        "simulate", "--beta", "1", "--theta", "1", "--x0", "1", "--a", "0.5", "--b", "2",
        "--paths", "200", "--seed", "777",
    ]);
    assert_eq!(with_env.stdout, direct.stdout);
}
