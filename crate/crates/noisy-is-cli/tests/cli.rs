//! End-to-end checks of the binary: flag parsing, exit codes, output
//! layout, determinism, and config-file precedence.

use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noisy-is"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout should be UTF-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr should be UTF-8")
}

fn tmp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("noisy-is-cli-{}-{name}", std::process::id()))
}

#[test]
fn ratio_csv_has_header_plus_one_row_per_a() {
    let out = run(&[
        "experiment", "--kind", "uniform", "--A", "0.2,0.6,1.2", "--N", "10", "--M", "10",
        "--seed", "1",
    ]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4, "header plus 3 data rows:\n{text}");
    assert_eq!(
        lines[0],
        "A,v_opt_theory,v_subopt_theory,ratio_theory,v_opt_emp,v_subopt_emp,ratio_emp,stderr_ratio_emp"
    );
    assert!(!text.contains('\r'));
}

#[test]
fn negative_noise_level_is_a_usage_error() {
    let out = run(&["experiment", "--kind", "uniform", "--A", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).contains("A must be > 0"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["experiment", "--kind", "uniform", "--definitely-not-a-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_kind_is_a_usage_error() {
    let out = run(&["experiment", "--A", "0.2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("--kind"));
}

#[test]
fn replication_count_below_two_is_a_usage_error() {
    let out = run(&["experiment", "--kind", "uniform", "--A", "0.2", "--M", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("M"));
}

#[test]
fn latent_r_zero_is_a_usage_error() {
    let out = run(&[
        "estimate", "--kind", "uniform", "--noise", "latent", "--R", "0", "--N", "10", "--M", "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("--R"));
}

#[test]
fn runtime_failure_exits_one_and_names_the_module() {
    // an even Simpson node count is only caught inside the quadrature
    let out = run(&[
        "experiment", "--kind", "uniform", "--A", "0.2", "--N", "10", "--M", "10",
        "--quad-nodes", "4",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_of(&out);
    let diag = err.lines().last().unwrap_or_default();
    assert!(diag.starts_with("error: "), "diagnostic: {diag}");
    assert!(diag.contains("variance_analytics"), "diagnostic: {diag}");
}

#[test]
fn identical_invocations_are_byte_identical() {
    let args = [
        "experiment", "--kind", "uniform", "--A", "0.2,0.6", "--N", "10", "--M", "20",
        "--seed", "7",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let base = [
        "experiment", "--kind", "gaussian", "--A", "0.4,0.8", "--N", "10", "--M", "16",
        "--seed", "3",
    ];
    let one = run(&[&base[..], &["--threads", "1"]].concat());
    let four = run(&[&base[..], &["--threads", "4"]].concat());
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn flags_override_config_file_and_last_flag_wins() {
    let path = tmp_path("config.json");
    std::fs::write(&path, r#"{"kind":"uniform","A":[0.3],"N":16,"M":8,"seed":5}"#).unwrap();
    let out = run(&[
        "experiment", "--config", path.to_str().unwrap(), "--N", "20", "--N", "24",
        "--format", "json",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["config"]["n"], 24, "last --N wins over the file");
    assert_eq!(doc["config"]["m"], 8, "file value survives");
    assert_eq!(doc["config"]["base_seed"], 5);
    assert_eq!(doc["config"]["a_grid"], serde_json::json!([0.3]));
    assert_eq!(doc["points"].as_array().unwrap().len(), 1);
    let _ = std::fs::remove_file(&path);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let path = tmp_path("bad-config.json");
    std::fs::write(&path, r#"{"bogus": 1}"#).unwrap();
    let out = run(&["experiment", "--kind", "uniform", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("bogus"));
    let _ = std::fs::remove_file(&path);
}

#[test]
fn out_flag_writes_the_file_and_leaves_stdout_empty() {
    let path = tmp_path("curve.csv");
    let out = run(&[
        "experiment", "--kind", "uniform", "--A", "0.2", "--N", "10", "--M", "10",
        "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    assert_eq!(written.lines().count(), 2);
    let _ = std::fs::remove_file(&path);
}

#[test]
fn every_run_echoes_its_resolved_config() {
    let out = run(&[
        "experiment", "--kind", "uniform", "--A", "0.2", "--N", "10", "--M", "10",
    ]);
    let err = stderr_of(&out);
    assert!(err.starts_with("config: "), "stderr: {err}");
    assert!(err.contains("\"base_seed\":1"), "stderr: {err}");
}

#[test]
fn estimate_csv_emits_one_row_per_replication() {
    let out = run(&[
        "estimate", "--kind", "uniform", "--noise", "multiplicative", "--sigma", "0.4",
        "--N", "50", "--M", "5", "--grid-nodes", "256",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0], "rep,seed,z_hat,ess_proxy,i_self_0");
    assert!(lines[1].starts_with("0,1,"));
}

#[test]
fn estimate_adds_standard_columns_when_z_bar_is_known() {
    let out = run(&[
        "estimate", "--kind", "uniform", "--noise", "bernoulli", "--p-max", "1.0",
        "--z-bar", "1.0", "--N", "50", "--M", "3", "--grid-nodes", "256",
        "--proposal", "optimal-z",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.starts_with("rep,seed,z_hat,ess_proxy,i_std_0,i_self_0\n"));
}

#[test]
fn estimate_pilot_proposal_runs() {
    let out = run(&[
        "estimate", "--kind", "gaussian", "--noise", "folded-gaussian", "--sigma", "0.2",
        "--proposal", "optimal-self", "--N", "40", "--M", "3", "--grid-nodes", "256",
        "--format", "json",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["config"]["proposal"], "optimal-self");
    assert!(doc["summary"]["mean_i_self"].is_array());
}

#[test]
fn variance_table_lists_each_noise_level() {
    let out = run(&["variance", "--kind", "uniform", "--A", "0.2,0.6", "--N", "100"]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "experiment,A,N,v_q,v_min,v_sub_opt,ratio,z_bar");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("uniform,"));
}

#[test]
fn variance_rejects_estimator_specific_proposals() {
    let out = run(&[
        "variance", "--kind", "uniform", "--A", "0.2", "--proposal", "optimal-std",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn proposal_curve_spans_the_plotting_grid() {
    let out = run(&[
        "proposal-curve", "--kind", "uniform", "--A", "0.2,1.2", "--grid-nodes", "512",
    ]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,p,q_opt_0.2,s_0.2,q_opt_1.2,s_1.2");
    assert_eq!(lines.len(), 1001);
}
