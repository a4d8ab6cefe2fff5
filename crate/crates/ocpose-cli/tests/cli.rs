//! End-to-end CLI behavior: subcommand flows, file outputs, exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ocpose(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ocpose"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("ocpose-cli-tests").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn synth_fixture(dir: &Path, extra: &[&str]) -> (PathBuf, PathBuf) {
    let out = dir.to_str().unwrap();
    let mut args = vec!["synth", "--out", out, "--images", "2", "--poses", "3"];
    args.extend_from_slice(extra);
    let output = ocpose(&args);
    assert!(
        output.status.success(),
        "synth failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    (dir.join("gt.json"), dir.join("dt.json"))
}

#[test]
fn evaluate_perfect_fixture_reports_zero() {
    let dir = temp_dir("eval-perfect");
    let (gt, dt) = synth_fixture(&dir, &["--seed", "5"]);
    let output = ocpose(&[
        "evaluate",
        "--gt",
        gt.to_str().unwrap(),
        "--dt",
        dt.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["aggregate"]["ocpose_pooled"], 0.0);
    assert_eq!(report["aggregate"]["map"], 1.0);
    assert_eq!(report["per_image"].as_array().unwrap().len(), 2);
}

#[test]
fn evaluate_writes_csv_extracts() {
    let dir = temp_dir("eval-files");
    let (gt, dt) = synth_fixture(&dir, &["--seed", "6", "--far-fp", "1"]);
    let out = dir.join("report");
    let output = ocpose(&[
        "evaluate",
        "--gt",
        gt.to_str().unwrap(),
        "--dt",
        dt.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    for file in ["report.json", "per_image.csv", "ap_per_threshold.csv"] {
        assert!(out.join(file).is_file(), "{file} missing");
    }
    let csv = std::fs::read_to_string(out.join("per_image.csv")).unwrap();
    assert!(csv.starts_with("image_id,ocpose,pi_one,pi_one_cost,fp,fn\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn sweep_reports_argmin() {
    let dir = temp_dir("sweep");
    let (gt, dt) = synth_fixture(
        &dir,
        &["--seed", "9", "--far-fp", "2", "--fp-score", "0.05"],
    );
    let output = ocpose(&[
        "sweep",
        "--gt",
        gt.to_str().unwrap(),
        "--dt",
        dt.to_str().unwrap(),
        "--grid",
        "0.0,0.1,0.5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let result: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(result["argmin_threshold"], 0.1);
    assert_eq!(result["grid"].as_array().unwrap().len(), 3);
    assert!(dir.join("sweep.csv").is_file());
}

#[test]
fn pr_curve_emits_files_and_svg() {
    let dir = temp_dir("pr");
    let (gt, dt) = synth_fixture(&dir, &["--seed", "3", "--far-fp", "1"]);
    let out = dir.join("curves");
    let output = ocpose(&[
        "pr-curve",
        "--gt",
        gt.to_str().unwrap(),
        "--dt",
        dt.to_str().unwrap(),
        "--thresholds",
        "0.0,0.3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    // 2 confidence thresholds x 10 OKS thresholds + summary + svg
    let entries: Vec<_> = std::fs::read_dir(&out).unwrap().collect();
    assert_eq!(entries.len(), 22);
    assert!(out.join("pr_summary.csv").is_file());
    let svg = std::fs::read_to_string(out.join("pr_curves.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("polyline"));
    let summary = std::fs::read_to_string(out.join("pr_summary.csv")).unwrap();
    // the injected FP ranks last: AP columns match while the FP column
    // differs by exactly the injected count
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 3);
    let parse = |line: &str| {
        let cols: Vec<&str> = line.split(',').collect();
        (
            cols[0].parse::<f64>().unwrap(),
            cols[1].parse::<f64>().unwrap(),
            cols[2].parse::<usize>().unwrap(),
        )
    };
    let (t0, map0, fp0) = parse(lines[1]);
    let (t3, map3, fp3) = parse(lines[2]);
    assert_eq!((t0, t3), (0.0, 0.3));
    assert_eq!(map0, map3);
    assert_eq!(fp0, fp3 + 2); // one far FP per image
}

#[test]
fn pr_curve_perfect_predictions_saturate() {
    let dir = temp_dir("pr-perfect");
    let (gt, dt) = synth_fixture(&dir, &["--seed", "8"]);
    let out = dir.join("curves");
    let output = ocpose(&[
        "pr-curve",
        "--gt",
        gt.to_str().unwrap(),
        "--dt",
        dt.to_str().unwrap(),
        "--thresholds",
        "0.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let csv = std::fs::read_to_string(out.join("pr_conf0.00_oks0.50.csv")).unwrap();
    // every ranked point sits at precision 1; the last reaches recall 1
    let points: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',');
            (
                it.next().unwrap().parse().unwrap(),
                it.next().unwrap().parse().unwrap(),
            )
        })
        .collect();
    assert!(!points.is_empty());
    assert!(points.iter().all(|&(_, p)| p == 1.0));
    assert_eq!(points.last().unwrap().0, 1.0);
}

#[test]
fn pr_curve_empty_detections_gives_header_only_curves() {
    let dir = temp_dir("pr-empty");
    let (gt, _) = synth_fixture(&dir, &["--seed", "3"]);
    let empty_dt = dir.join("empty.json");
    std::fs::write(&empty_dt, "[]").unwrap();
    let out = dir.join("curves");
    let output = ocpose(&[
        "pr-curve",
        "--gt",
        gt.to_str().unwrap(),
        "--dt",
        empty_dt.to_str().unwrap(),
        "--thresholds",
        "0.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let csv = std::fs::read_to_string(out.join("pr_conf0.00_oks0.50.csv")).unwrap();
    assert_eq!(csv, "recall,precision\n");
}

#[test]
fn compare_flags_fp_heavy_method() {
    let dir = temp_dir("compare");
    // method A: perfect + many low-score FPs; method B: perfect only
    let dir_a = dir.join("a");
    let dir_b = dir.join("b");
    std::fs::create_dir_all(&dir_a).unwrap();
    std::fs::create_dir_all(&dir_b).unwrap();
    let (gt, dt_a) = synth_fixture(
        &dir_a,
        &["--seed", "11", "--far-fp", "4", "--fp-score", "0.05"],
    );
    let (_, dt_b) = synth_fixture(&dir_b, &["--seed", "11"]);
    let output = ocpose(&[
        "compare",
        "--gt",
        gt.to_str().unwrap(),
        "--dt",
        dt_a.to_str().unwrap(),
        "--dt",
        dt_b.to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let result: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(result["rank_disagreement"], true);
    let rows = result["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    // same mAP, but the FP-heavy method scores strictly worse on ocpose
    assert_eq!(rows[0]["map"], rows[1]["map"]);
    assert!(rows[0]["ocpose_pooled"].as_f64() > rows[1]["ocpose_pooled"].as_f64());
}

#[test]
fn compare_three_files_gives_three_rows() {
    let dir = temp_dir("compare-three");
    let (gt, dt) = synth_fixture(&dir, &["--seed", "2"]);
    let dt2 = dir.join("dt2.json");
    let dt3 = dir.join("dt3.json");
    std::fs::copy(&dt, &dt2).unwrap();
    std::fs::copy(&dt, &dt3).unwrap();
    let output = ocpose(&[
        "compare",
        "--gt",
        gt.to_str().unwrap(),
        "--dt",
        dt.to_str().unwrap(),
        "--dt",
        dt2.to_str().unwrap(),
        "--dt",
        dt3.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let result: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(result["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn compare_identical_files_raises_no_flag() {
    let dir = temp_dir("compare-same");
    let (gt, dt) = synth_fixture(&dir, &["--seed", "2"]);
    let dt2 = dir.join("dt2.json");
    std::fs::copy(&dt, &dt2).unwrap();
    let output = ocpose(&[
        "compare",
        "--gt",
        gt.to_str().unwrap(),
        "--dt",
        dt.to_str().unwrap(),
        "--dt",
        dt2.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let result: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(result["rank_disagreement"], false);
    assert_eq!(result["disagreements"].as_array().unwrap().len(), 0);
}

#[test]
fn usage_errors_exit_one() {
    // missing required --gt
    let dir = temp_dir("usage");
    let (_, dt) = synth_fixture(&dir, &[]);
    let output = ocpose(&["evaluate", "--dt", dt.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));

    // compare with a single file
    let (gt, dt) = synth_fixture(&dir, &[]);
    let output = ocpose(&[
        "compare",
        "--gt",
        gt.to_str().unwrap(),
        "--dt",
        dt.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));

    // unknown flag is a clap usage error
    let output = ocpose(&["evaluate", "--no-such-flag"]);
    assert_eq!(output.status.code(), Some(1));

    // empty sweep grid
    let output = ocpose(&[
        "sweep",
        "--gt",
        gt.to_str().unwrap(),
        "--dt",
        dt.to_str().unwrap(),
        "--grid",
        "1.5",
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let dir = temp_dir("data-err");
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let (gt, dt) = synth_fixture(&dir, &[]);

    let output = ocpose(&[
        "evaluate",
        "--gt",
        bad.to_str().unwrap(),
        "--dt",
        dt.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("byte offset"));

    // detections for an image the GT does not know
    let rogue = dir.join("rogue.json");
    let mut kps = Vec::new();
    for _ in 0..17 {
        kps.extend_from_slice(&[1.0, 1.0, 1.0]);
    }
    std::fs::write(
        &rogue,
        serde_json::json!([{ "image_id": 999, "category_id": 1, "keypoints": kps, "score": 0.9 }])
            .to_string(),
    )
    .unwrap();
    let output = ocpose(&[
        "evaluate",
        "--gt",
        gt.to_str().unwrap(),
        "--dt",
        rogue.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("999"));
}

#[test]
fn io_errors_exit_three() {
    let dir = temp_dir("io-err");
    let (gt, dt) = synth_fixture(&dir, &[]);
    let output = ocpose(&[
        "evaluate",
        "--gt",
        dir.join("missing.json").to_str().unwrap(),
        "--dt",
        dt.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3));
    let _ = gt;
}

#[test]
fn gt_only_input_is_all_miss() {
    let dir = temp_dir("gt-only");
    let (gt, _) = synth_fixture(&dir, &["--seed", "14"]);
    let empty_dt = dir.join("empty.json");
    std::fs::write(&empty_dt, "[]").unwrap();
    let output = ocpose(&[
        "evaluate",
        "--gt",
        gt.to_str().unwrap(),
        "--dt",
        empty_dt.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["aggregate"]["ocpose_pooled"], 1.0);
}

#[test]
fn custom_sigma_table_changes_skeleton() {
    let dir = temp_dir("sigmas");
    let sigma_path = dir.join("k3.json");
    std::fs::write(&sigma_path, "[0.1, 0.2, 0.1]").unwrap();
    // fixture detections have 17 keypoints, so a 3-joint table must fail
    let (gt, dt) = synth_fixture(&dir, &[]);
    let output = ocpose(&[
        "evaluate",
        "--gt",
        gt.to_str().unwrap(),
        "--dt",
        dt.to_str().unwrap(),
        "--sigmas",
        sigma_path.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("expected 9"), "stderr: {stderr}");
}

#[test]
fn machine_output_stays_on_stdout() {
    let dir = temp_dir("streams");
    let (gt, dt) = synth_fixture(&dir, &["--seed", "4"]);
    let output = ocpose(&[
        "evaluate",
        "--gt",
        gt.to_str().unwrap(),
        "--dt",
        dt.to_str().unwrap(),
    ]);
    // stdout parses as JSON on its own; progress lines live on stderr
    let parsed: serde_json::Result<serde_json::Value> = serde_json::from_slice(&output.stdout);
    assert!(parsed.is_ok());
    assert!(!output.stderr.is_empty());
}
