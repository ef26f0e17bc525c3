//! Black-box tests of the binary: argument handling, config merging,
//! output formats, and the reference-values round trip.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mdtool")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn run(args: &[&str]) -> Output {
    run_in(Path::new("."), args)
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_k4(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("k4.txt");
    std::fs::write(&path, "4\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n").unwrap();
    path
}

#[test]
fn exact_reports_the_known_complete_graph_value() {
    let dir = tempfile::tempdir().unwrap();
    let k4 = write_k4(dir.path());
    let out = run(&["exact", "--graph", k4.to_str().unwrap()]);
    let doc = stdout_json(&out);
    let log_z = doc["result"]["log_z"].as_f64().unwrap();
    assert!((log_z - 10.0_f64.ln()).abs() < 1e-12, "log_z = {log_z}");
    assert_eq!(doc["result"]["log_z_enumeration"], doc["result"]["log_z"]);
    assert_eq!(doc["config"]["command"], "exact");
    assert!(doc["config_hash"].as_str().unwrap().len() == 16);
}

#[test]
fn json_models_carry_their_own_activities() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("path2.json");
    // P_2 with w = 2, x = (1, 3): Z = 3 + 2 = 5
    std::fs::write(&path, r#"{"n": 2, "edges": [[0, 1, 2.0]], "x": [1.0, 3.0]}"#).unwrap();
    let out = run(&["exact", "--graph", path.to_str().unwrap()]);
    let doc = stdout_json(&out);
    let log_z = doc["result"]["log_z"].as_f64().unwrap();
    assert!((log_z - 5.0_f64.ln()).abs() < 1e-12, "log_z = {log_z}");
}

#[test]
fn config_file_supplies_parameters_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "command = \"meanfield.analyze\"\n\n[global]\nseed = 11\n\n[meanfield.analyze]\nh = -0.4\nj = 1.8\n",
    )
    .unwrap();
    let from_file = stdout_json(&run(&["--config", cfg.to_str().unwrap()]));
    assert_eq!(from_file["config"]["params"]["h"], -0.4);
    assert_eq!(from_file["config"]["params"]["j"], 1.8);
    assert_eq!(from_file["seed"], 11);

    let overridden = stdout_json(&run(&[
        "meanfield",
        "analyze",
        "--j",
        "2.2",
        "--config",
        cfg.to_str().unwrap(),
    ]));
    assert_eq!(overridden["config"]["params"]["h"], -0.4);
    assert_eq!(overridden["config"]["params"]["j"], 2.2);
}

#[test]
fn unknown_config_keys_are_rejected_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "command = \"meanfield.analyze\"\n[meanfield.analyze]\nhh = 1.0\n").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("hh"), "stderr: {err}");
    assert!(err.contains("line 3"), "stderr: {err}");
}

#[test]
fn unknown_config_command_lists_the_valid_ones() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "command = \"nope\"\n").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rf.partition"), "stderr: {err}");
}

#[test]
fn missing_required_parameter_names_the_flag() {
    let out = run(&["meanfield", "analyze", "--j", "1.0"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--h"), "stderr: {err}");
}

#[test]
fn graph_and_corpus_are_mutually_exclusive() {
    let dir = tempfile::tempdir().unwrap();
    let k4 = write_k4(dir.path());
    let out = run(&["zeros", "--graph", k4.to_str().unwrap(), "--corpus", "3"]);
    assert!(!out.status.success());
}

#[test]
fn invalid_model_parameters_surface_as_errors() {
    let out = run(&["er", "density", "--c", "-1", "--x", "1"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error"), "stderr: {err}");
}

#[test]
fn csv_output_carries_the_header_block() {
    let out = run(&["meanfield", "gamma", "--jmin", "1.6", "--jmax", "1.8", "--steps", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# version: "));
    assert!(text.contains("\n# seed: 0\n"));
    assert!(text.contains("\n# config-hash: "));
    assert!(text.contains("\n# config: {"));
    assert!(text.contains("\nJ,gamma,m1,m2,rho1,rho2\n"));
}

#[test]
fn format_flag_flattens_scalar_reports_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let k4 = write_k4(dir.path());
    let out = run(&["exact", "--graph", k4.to_str().unwrap(), "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("key,value"), "no flattened header: {text}");
    assert!(text.contains("log_z,"), "no flattened key: {text}");
}

#[test]
fn format_flag_turns_sweeps_into_json_arrays() {
    let out = run(&[
        "meanfield", "gamma", "--jmin", "1.6", "--jmax", "1.8", "--steps", "2", "--format", "json",
    ]);
    let doc = stdout_json(&out);
    let rows = doc["result"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0]["J"].is_number());
    assert!(rows[0]["gamma"].is_number());
}

#[test]
fn reference_values_round_trip_through_the_scaling_check() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let gen = run_in(dir, &["meanfield", "critical", "--out", "refs.json"]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    let text = std::fs::read_to_string(dir.join("refs.json")).unwrap();
    let refs: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(refs["provenance"], "derived");
    assert!(refs["h_c"].as_f64().unwrap() < 0.0);

    let check = run_in(
        dir,
        &["fluct", "critical", "--ns", "1000", "--reference", "refs.json"],
    );
    assert!(check.status.success(), "{}", String::from_utf8_lossy(&check.stderr));
    let out = String::from_utf8(check.stdout).unwrap();
    assert!(out.contains("\nn,quartic_distance,gaussian_control_distance\n"));

    // a stale or foreign file is refused with a regeneration hint
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["version"] = "0.0.1-old".into();
    std::fs::write(dir.join("stale.json"), serde_json::to_string(&doc).unwrap()).unwrap();
    let stale = run_in(
        dir,
        &["fluct", "critical", "--ns", "1000", "--reference", "stale.json"],
    );
    assert!(!stale.status.success());
    let err = String::from_utf8_lossy(&stale.stderr);
    assert!(err.contains("regenerate"), "stderr: {err}");
}

#[test]
fn missing_reference_file_points_at_the_generator() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["fluct", "critical", "--ns", "1000"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("meanfield critical"),
        "stderr lacks the generation hint: {err}"
    );
}

#[test]
fn output_files_are_written_atomically_with_final_content() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let out = run_in(dir, &["rf", "solve", "--dist", "degenerate:1", "--out", "sol.json"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty(), "file mode should not echo to stdout");
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("sol.json")).unwrap()).unwrap();
    let xi = doc["result"]["xi"].as_f64().unwrap();
    assert!((xi - (5.0_f64.sqrt() - 1.0) / 2.0).abs() < 1e-9);
    // no stray temp files left behind
    let leftovers: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name() != "sol.json")
        .collect();
    assert!(leftovers.is_empty(), "unexpected files: {leftovers:?}");
}

#[test]
fn seed_changes_stochastic_output_and_config_hash() {
    let a = stdout_json(&run(&[
        "er", "density", "--c", "2", "--x", "1", "--r", "3", "--k", "1000", "--seed", "1",
    ]));
    let b = stdout_json(&run(&[
        "er", "density", "--c", "2", "--x", "1", "--r", "3", "--k", "1000", "--seed", "2",
    ]));
    assert_ne!(a["config_hash"], b["config_hash"]);
    assert_ne!(a["result"]["estimate"], b["result"]["estimate"]);
}
