use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn uipdg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uipdg"))
        .args(args)
        .env("UIPDG_THREADS", "2")
        .output()
        .expect("failed to launch the binary")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

fn run_cmd(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    uipdg(&args)
}

/// Data rows of a CSV written by the CLI, metadata lines skipped.
fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name} in {header:?}"))
}

const TEST1_K1: &str = r#"{
    "test": {"name": "test1", "lambda": 1e4},
    "schemes": [{"scheme": "uip", "epsilon": 1}],
    "degrees": [1],
    "mesh": {"n0": 8, "refinements": 3}
}"#;

#[test]
fn convergence_first_order_energy_rate() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", TEST1_K1);
    let out = run_cmd("convergence", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let (header, rows) = read_table(&dir.path().join("convergence.csv"));
    let expected = "scheme,epsilon,k,level,h,dofs,err_l2,ecr_l2,err_energy,ecr_energy,solver_iters,residual,time_s";
    assert_eq!(header.join(","), expected);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][column(&header, "ecr_energy")], "NA");
    let last: f64 = rows[3][column(&header, "ecr_energy")].parse().unwrap();
    assert!((0.85..=1.25).contains(&last), "final energy rate {last}");
    let residual: f64 = rows[3][column(&header, "residual")].parse().unwrap();
    assert!(residual <= 1e-10);
}

#[test]
fn csv_output_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{
            "test": {"name": "kellogg"},
            "schemes": [{"scheme": "uip", "epsilon": 1}, {"scheme": "swip"}, {"scheme": "ipf", "epsilon": 0}],
            "mesh": {"n0": 4, "refinements": 1},
            "sample_grid": 16,
            "coercivity_samples": 5,
            "seed": 7
        }"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        for cmd in ["compare", "run"] {
            let o = run_cmd(cmd, &cfg, out, &[]);
            assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
    }
    for name in ["compare.csv", "solution.csv", "samples.csv", "report.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
}

#[test]
fn metadata_block_records_the_setup() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"test": {"name": "kellogg"}, "schemes": [{"scheme": "uip"}, {"scheme": "swip"}], "mesh": {"n0": 4, "refinements": 1}}"#,
    );
    assert_eq!(run_cmd("compare", &cfg, dir.path(), &[]).status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    for key in ["# alpha0: 8", "# tau_form:", "# kellogg_assignment:", "# normalization_uip:", "# normalization_swip:"] {
        assert!(text.contains(key), "missing `{key}` in\n{text}");
    }
    let (header, rows) = read_table(&dir.path().join("compare.csv"));
    assert_eq!(rows.len(), 2);
    for col in ["SUIP_err_energy", "SWIP_err_energy", "SUIP_overshoot"] {
        column(&header, col);
    }
}

#[test]
fn equivalence_on_eighth_mesh_exits_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "e.json",
        r#"{
            "test": {"name": "test1", "lambda": 1.0},
            "schemes": [{"scheme": "uip", "epsilon": 1}, {"scheme": "uip", "epsilon": 0}, {"scheme": "uip", "epsilon": -1}],
            "degrees": [1, 2],
            "mesh": {"n0": 8, "refinements": 0}
        }"#,
    );
    let out = run_cmd("equivalence", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_table(&dir.path().join("equivalence.csv"));
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[column(&header, "pass")] == "true"));
}

#[test]
fn equivalence_failure_exits_four() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "e.json",
        r#"{"test": {"name": "test1", "lambda": 1e4}, "mesh": {"n0": 4, "refinements": 0}, "equivalence_tol": 1e-300}"#,
    );
    let out = run_cmd("equivalence", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("equivalence.csv").exists());
}

#[test]
fn malformed_key_exits_two_and_names_it() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"test": {"name": "kellogg"}, "alpah0": 8}"#);
    let out = run_cmd("run", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpah0"));
}

#[test]
fn config_and_usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(run_cmd("run", &missing, dir.path(), &[]).status.code(), Some(2));

    let bad_eps = write_config(dir.path(), "eps.json", r#"{"test": {"name": "kellogg"}, "schemes": [{"scheme": "uip", "epsilon": 2}]}"#);
    assert_eq!(run_cmd("run", &bad_eps, dir.path(), &[]).status.code(), Some(2));

    assert_eq!(uipdg(&["solve", "--config", "x.json"]).status.code(), Some(2));
    assert_eq!(uipdg(&["run"]).status.code(), Some(2));
    assert_eq!(uipdg(&["--help"]).status.code(), Some(0));
}

#[test]
fn low_penalty_needs_the_override_flag() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "low.json",
        r#"{"test": {"name": "test1", "lambda": 1.0}, "alpha0": 5.0, "mesh": {"n0": 4, "refinements": 0}, "sample_grid": 8, "coercivity_samples": 2}"#,
    );
    let out = run_cmd("run", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let out = run_cmd("run", &cfg, dir.path(), &["--allow-low-penalty"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solver_failure_exits_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{
            "test": {"name": "test1", "lambda": 1e4},
            "mesh": {"n0": 8, "refinements": 0},
            "solver": {"method": "cg", "max_iter": 2},
            "sample_grid": 8
        }"#,
    );
    let out = run_cmd("run", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn run_writes_solution_samples_and_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "r.json",
        r#"{"test": {"name": "test1", "lambda": 1.0}, "degrees": [2], "mesh": {"n0": 4, "refinements": 0}, "sample_grid": 5, "dump_matrix": true}"#,
    );
    let out = run_cmd("run", &cfg, dir.path(), &["--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let (header, rows) = read_table(&dir.path().join("solution.csv"));
    assert_eq!(header[..2], ["element".to_string(), "subdomain".to_string()]);
    assert_eq!(header.len(), 2 + 6);
    assert_eq!(rows.len(), 32);

    let (header, rows) = read_table(&dir.path().join("samples.csv"));
    assert_eq!(header, ["x", "y", "u_h"]);
    assert_eq!(rows.len(), 25);

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
    assert!(report["errors"]["err_energy"].as_f64().unwrap() > 0.0);
    assert!(report["sampled_coercivity"].as_f64().unwrap() > 0.0);

    let mtx = fs::read_to_string(dir.path().join("matrix.mtx")).unwrap();
    assert!(mtx.starts_with("%%MatrixMarket matrix coordinate real general"));
}

#[test]
fn mesh_command_writes_each_level() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "m.json", r#"{"test": {"name": "kellogg"}, "mesh": {"n0": 2, "refinements": 2}}"#);
    let out = run_cmd("mesh", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for n in [2, 4, 8] {
        let mesh = uipdg::mesh::read_mesh(dir.path().join(format!("mesh_n{n}.msh"))).unwrap();
        assert_eq!(mesh.num_triangles(), 2 * n * n);
    }
}

#[test]
fn invalid_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_uipdg"))
        .args(["run", "--config", "x.json"])
        .env("UIPDG_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
