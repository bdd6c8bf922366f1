//! End-to-end checks of the command-line surface: exit codes, output
//! shapes and error reporting.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn datasets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../datasets")
}

fn ponplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ponplan"))
        .args(args)
        .current_dir(datasets())
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

#[test]
fn plan_renders_the_result_table() {
    let output = ponplan(&["plan", "toy.json"]);
    assert_eq!(output.status.code(), Some(0));
    let text = stdout(&output);
    assert_eq!(
        text.lines().next().unwrap(),
        "Penetration Curve | FTTx Migration Path | Net Present Value [C.U.]"
    );
    assert!(text.contains("2019: FTTCab_GPON_25 / 2020: FTTB_XGPON_100"));
}

#[test]
fn plan_json_carries_path_policy_and_npv() {
    let output = ponplan(&["plan", "toy.json", "--output", "json"]);
    assert_eq!(output.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    let npv: f64 = doc["expected_npv"].as_str().unwrap().parse().unwrap();
    assert!((npv - 381.0).abs() <= 1.0);
    assert_eq!(doc["path"].as_array().unwrap().len(), 2);
    assert_eq!(doc["path"][0]["year"], 2019);
    assert!(!doc["policy"].as_array().unwrap().is_empty());
    assert_eq!(doc["goal"], "FlexibleFTTx");
}

#[test]
fn plan_csv_has_step_rows_and_a_summary() {
    let output = ponplan(&["plan", "toy.json", "--output", "csv"]);
    let text = stdout(&output);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,year,technology,expected_npv");
    assert!(lines[1].starts_with("1,2019,FTTCab_GPON_25"));
    assert!(lines[3].starts_with("summary,,,380.9"));
}

#[test]
fn plan_writes_to_a_file_with_out() {
    let dir = std::env::temp_dir().join(format!("ponplan-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("plan.json");
    let output = ponplan(&[
        "plan",
        "toy.json",
        "--output",
        "json",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    assert!(stdout(&output).is_empty());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(doc["expected_npv"].is_string());
}

#[test]
fn missing_scenario_exits_with_io_error() {
    let output = ponplan(&["plan", "missing.json"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("IO_ERROR"));
}

#[test]
fn invalid_scenario_exits_with_validation_failure() {
    let dir = std::env::temp_dir().join(format!("ponplan-cli-v-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let text = std::fs::read_to_string(datasets().join("toy.json")).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["horizon"]["T_mig"] = serde_json::json!(0);
    let path = dir.join("invalid.json");
    std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();

    let output = ponplan(&["validate", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stdout(&output).contains("HORIZON_EMPTY"));

    let output = ponplan(&["plan", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("VALIDATION_FAILED"));
}

#[test]
fn validate_reports_success_in_json() {
    let output = ponplan(&["validate", "munich_converged.json", "--output", "json"]);
    assert_eq!(output.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(doc["valid"], true);
}

#[test]
fn naive_tree_cap_exits_computational() {
    let output = ponplan(&["plan", "toy.json", "--naive-tree", "--max-nodes", "3"]);
    assert_eq!(output.status.code(), Some(3));
    assert!(stderr(&output).contains("TREE_TOO_LARGE"));
}

#[test]
fn verify_agrees_on_the_toy_and_refuses_the_oracle_on_munich() {
    let output = ponplan(&["verify", "toy.json"]);
    assert_eq!(output.status.code(), Some(0));
    let text = stdout(&output);
    assert!(text.contains("tree evaluator"));
    assert!(text.contains("oracle"));
    assert!(text.contains("(agrees)"));

    let output = ponplan(&["verify", "munich_converged.json"]);
    assert_eq!(output.status.code(), Some(3));
    assert!(
        stdout(&output).contains("tree evaluator"),
        "tree check still runs"
    );
    assert!(stderr(&output).contains("INSTANCE_TOO_LARGE"));
}

#[test]
fn compare_emits_six_rows_and_three_gaps() {
    let output = ponplan(&["compare", "munich_residential.json"]);
    assert_eq!(output.status.code(), Some(0));
    let text = stdout(&output);
    assert_eq!(text.matches("FlexibleFTTx").count(), 3);
    assert_eq!(text.matches("FixedFTTH").count(), 3);
    assert_eq!(text.matches("Gap ").count(), 3);
}

#[test]
fn sweep_rejects_malformed_values() {
    let output = ponplan(&[
        "sweep",
        "toy.json",
        "--parameter",
        "discount-rate",
        "--values",
        "0.1,banana",
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("BAD_ARGUMENT"));
}

#[test]
fn sweep_over_opex_models_changes_the_outcome_shape() {
    let output = ponplan(&[
        "sweep",
        "munich_converged.json",
        "--parameter",
        "opex-model",
        "--values",
        "table,percentage",
    ]);
    assert_eq!(output.status.code(), Some(0));
    let text = stdout(&output);
    assert_eq!(text.matches("opex_model,table").count(), 3);
    assert_eq!(text.matches("opex_model,percentage").count(), 3);
}

#[test]
fn plan_fixed_goal_override_matches_compare() {
    let plan = ponplan(&[
        "plan",
        "munich_residential.json",
        "--goal",
        "fixed",
        "--curve",
        "realistic",
    ]);
    assert_eq!(plan.status.code(), Some(0));
    let compare = ponplan(&["compare", "munich_residential.json"]);
    let wanted = stdout(&plan);
    let row = wanted.lines().nth(1).unwrap();
    let npv = row.rsplit('|').next().unwrap().trim();
    assert!(
        stdout(&compare)
            .lines()
            .any(|l| l.starts_with("FixedFTTH | Realistic") && l.ends_with(npv)),
        "compare must contain the same FixedFTTH/Realistic figure"
    );
}
