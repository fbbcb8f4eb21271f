//! Integration tests for the `holdout` binary: flag parsing, config-file
//! merging, report structure, and exit-code contract
//! (0 ok, 1 usage, 2 infeasible, 3 check violation).

use std::process::{Command, Output};

fn holdout() -> Command {
    Command::new(env!("CARGO_BIN_EXE_holdout"))
}

fn run(args: &[&str]) -> Output {
    holdout().args(args).output().expect("binary runs")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&output.stdout)
        )
    })
}

const ABALONE_LM: &[&str] = &["--anchors", "4.9394,4.9426,4.9594", "--n", "4177"];

#[test]
fn analyze_reports_power_fit_from_anchor_flags() {
    let output = run(&[
        "analyze",
        "--anchors",
        "4.9394,4.9426,4.9594",
        "--n",
        "4177",
        "--sigma2",
        "0.01,0.1,1",
    ]);
    assert!(output.status.success(), "{output:?}");
    let report = stdout_json(&output);
    let results = &report["results"];
    let exponent = results["exponent"].as_f64().unwrap();
    assert!((exponent - 1.998).abs() < 0.01, "exponent {exponent}");
    let per = results["per_sigma2"].as_array().unwrap();
    assert_eq!(per.len(), 3);
    for entry in per {
        assert!(entry["feasible"].as_bool().unwrap());
        assert!(entry["m_star"].as_u64().unwrap() >= 1);
    }
    // Envelope provenance.
    assert_eq!(report["seed"], 0);
    assert!(report["duration_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["config"]["n"], 4177);
}

#[test]
fn analyze_exit_2_when_sigma2_infeasible() {
    // l_loo = 0.5 < sigma2 = 1: estimated loss negative everywhere.
    let output = run(&[
        "analyze",
        "--anchors",
        "0.50,0.52,0.60",
        "--n",
        "1000",
        "--sigma2",
        "1.0",
    ]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    let report = stdout_json(&output);
    assert_eq!(report["results"]["per_sigma2"][0]["feasible"], false);
}

#[test]
fn analyze_rejects_nonmonotone_anchors_with_diagnostics() {
    let output = run(&[
        "analyze",
        "--anchors",
        "5.0,4.9,4.8",
        "--n",
        "1000",
    ]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("monotone"), "stderr: {stderr}");
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        vec!["analyze", "--model", "boost", "--data", "x.csv", "--target", "y"],
        vec!["analyze"], // neither anchors nor data
        vec!["analyze", "--anchors", "1,2"], // wrong arity
        vec!["simulate", "--experiment", "bootstrap"],
        vec!["frontier", "--anchors", "4.9,4.94,4.96", "--n", "4177", "--sigma2-grid", "bad"],
        vec!["no-such-command"],
    ] {
        let output = run(&args);
        assert_eq!(output.status.code(), Some(1), "args {args:?}: {output:?}");
    }
}

#[test]
fn frontier_writes_monotone_csv_and_upper_bound() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("frontier.json");
    let csv_path = dir.path().join("frontier.csv");
    let mut args = vec!["frontier"];
    args.extend_from_slice(ABALONE_LM);
    args.extend_from_slice(&[
        "--out-json",
        json_path.to_str().unwrap(),
        "--out-csv",
        csv_path.to_str().unwrap(),
    ]);
    let output = run(&args);
    assert!(output.status.success(), "{output:?}");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let upper = report["results"]["sigma2_upper_bound"].as_f64().unwrap();
    assert!(upper > 0.0);

    // The default grid covers the rising branch: m* nondecreasing.
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers[0], "sigma2");
    assert_eq!(&headers[1], "m_star");
    let mut last = 0u64;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.unwrap();
        let m: u64 = record[1].parse().unwrap();
        assert!(m >= last, "m* decreased: {m} after {last}");
        last = m;
        rows += 1;
    }
    assert_eq!(rows, 60);
}

#[test]
fn frontier_k_lines_include_k5_interval() {
    let mut args = vec!["frontier"];
    args.extend_from_slice(ABALONE_LM);
    let output = run(&args);
    assert!(output.status.success());
    let report = stdout_json(&output);
    let k_lines = report["results"]["k_lines"].as_array().unwrap();
    let k5 = k_lines.iter().find(|l| l["k"] == 5).unwrap();
    assert!(k5["sigma2_lo"].as_f64().unwrap() < k5["sigma2_hi"].as_f64().unwrap());
}

#[test]
fn implicit_sigma_decreasing_in_k() {
    let mut args = vec!["implicit-sigma"];
    args.extend_from_slice(ABALONE_LM);
    args.extend_from_slice(&["--k", "4,5,10,20"]);
    let output = run(&args);
    assert!(output.status.success(), "{output:?}");
    let report = stdout_json(&output);
    let rows = report["results"].as_array().unwrap();
    let values: Vec<f64> = rows
        .iter()
        .map(|r| r["implicit_sigma2"].as_f64().expect("feasible row"))
        .collect();
    assert_eq!(values.len(), 4);
    for pair in values.windows(2) {
        assert!(pair[0] > pair[1], "not decreasing: {values:?}");
    }
}

#[test]
fn implicit_sigma_k2_is_soft_infeasible() {
    // m_2 = N/2 = m_lmo is the scan boundary; expect a "-" row and exit 2.
    let mut args = vec!["implicit-sigma"];
    args.extend_from_slice(ABALONE_LM);
    args.extend_from_slice(&["--k", "2"]);
    let output = run(&args);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    let report = stdout_json(&output);
    assert!(report["results"][0]["implicit_sigma2"].is_null());
}

#[test]
fn simulate_split_gamma_check_passes() {
    let output = run(&[
        "simulate",
        "--experiment",
        "split",
        "--noise",
        "gamma",
        "--reps",
        "400",
        "--check",
    ]);
    assert!(output.status.success(), "{output:?}");
    let report = stdout_json(&output);
    let rows = report["results"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5); // default m grid 10,20,40,80,160
    for row in rows {
        assert!(row["ratio_bound_over_empirical"].as_f64().unwrap() >= 1.0);
    }
}

#[test]
fn simulate_kfold_gamma_has_c16_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("kfold.csv");
    let output = run(&[
        "simulate",
        "--experiment",
        "kfold",
        "--noise",
        "gamma",
        "--reps",
        "60",
        "--partitions",
        "10",
        "--k",
        "4,5",
        "--out-csv",
        csv_path.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert!(headers.iter().any(|h| h == "bound_raw_c16"));
    assert!(headers.iter().any(|h| h == "bound_clt_c16"));
    assert_eq!(reader.records().count(), 2);
}

#[test]
fn simulate_same_seed_reproduces_results_exactly() {
    let args = [
        "simulate",
        "--experiment",
        "split",
        "--noise",
        "hetero",
        "--reps",
        "100",
        "--m",
        "10,20",
        "--seed",
        "7",
    ];
    let a = stdout_json(&run(&args));
    let b = stdout_json(&run(&args));
    // Identical except wall-clock duration.
    assert_eq!(a["results"], b["results"]);
    assert_eq!(a["config"], b["config"]);
    assert_eq!(a["seed"], 7);
}

#[test]
fn config_file_merges_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.toml");
    std::fs::write(
        &config_path,
        "anchors = \"4.9394,4.9426,4.9594\"\nn = 4177\nsigma2 = \"0.5\"\nseed = 3\n",
    )
    .unwrap();
    // --sigma2 on the command line overrides the file; anchors/n/seed come
    // from the file.
    let output = run(&[
        "analyze",
        "--config",
        config_path.to_str().unwrap(),
        "--sigma2",
        "1.0",
    ]);
    assert!(output.status.success(), "{output:?}");
    let report = stdout_json(&output);
    assert_eq!(report["seed"], 3);
    assert_eq!(report["config"]["sigma2"], "1.0");
    assert_eq!(report["config"]["n"], 4177);
    assert_eq!(
        report["results"]["per_sigma2"][0]["sigma2"].as_f64().unwrap(),
        1.0
    );
}

#[test]
fn config_file_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.toml");
    std::fs::write(&config_path, "anchor_typo = \"1,2,3\"\n").unwrap();
    let output = run(&["analyze", "--config", config_path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn single_sigma2_frontier_matches_analyze_m_star() {
    // A single-point grid degenerates to the analyze result.
    let mut analyze_args = vec!["analyze"];
    analyze_args.extend_from_slice(ABALONE_LM);
    analyze_args.extend_from_slice(&["--sigma2", "1.0"]);
    let analyze = stdout_json(&run(&analyze_args));
    let m_star = analyze["results"]["per_sigma2"][0]["m_star"].as_u64().unwrap();

    let mut frontier_args = vec!["frontier"];
    frontier_args.extend_from_slice(ABALONE_LM);
    frontier_args.extend_from_slice(&["--sigma2-grid", "1.0:1.0:1"]);
    let frontier = stdout_json(&run(&frontier_args));
    assert_eq!(
        frontier["results"]["points"][0]["m_star"].as_u64().unwrap(),
        m_star
    );
}

#[test]
fn help_mentions_every_documented_flag() {
    let output = run(&["analyze", "--help"]);
    assert!(output.status.success());
    let help = String::from_utf8_lossy(&output.stdout).to_string();
    for flag in [
        "--data", "--target", "--model", "--sigma2", "--sigma2-grid", "--k", "--bound",
        "--sigma-max", "--anchors", "--n", "--seed", "--out-json", "--out-csv", "--experiment",
        "--noise", "--reps", "--check", "--loocv-subsample",
    ] {
        assert!(help.contains(flag), "help missing {flag}");
    }
}
