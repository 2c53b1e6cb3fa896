//! End-to-end runs of the binary: exit codes, report contents, and the
//! CSV schema round trip.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use approxline_cli::record::{parse_csv, RunRecord};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_approxline"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const IDENTITY_2D: &str = r#"{"input_shape": [2], "layers": []}"#;

#[test]
fn fig2_replays_the_golden_example() {
    let out = run(&["fig2"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("[0.6, 1]"), "coarse bounds missing: {text}");
    assert!(text.contains("[0.968, 0.968]"), "exact bounds missing: {text}");
    assert!(text.contains("0.1, 0.1, 0.2, 0.1, 0.1, 0.4"), "weights missing: {text}");
    assert!(!text.contains("FAIL"), "{text}");
}

#[test]
fn certify_flags_the_builtin_counterexample() {
    let out = run(&["certify", "--model", "builtin:fig2", "--property", "argmax:0"]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.starts_with("Unknown"), "{text}");
    assert!(text.contains("(2.75, 3)"), "{text}");
}

#[test]
fn certify_accepts_a_satisfying_point_segment() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_file(dir.path(), "id.json", IDENTITY_2D);
    let v = write_file(dir.path(), "v.json", r#"{"shape":[2],"data":[2.0,1.0]}"#);
    let out = run(&[
        "certify",
        "--model",
        model.to_str().unwrap(),
        "--input-a",
        v.to_str().unwrap(),
        "--input-b",
        v.to_str().unwrap(),
        "--property",
        "argmax:0",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).starts_with("Verified"));
}

#[test]
fn missing_model_file_exits_two() {
    let out = run(&["certify", "--model", "/definitely/not/here.json", "--property", "argmax:0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_property_syntax_exits_two() {
    let out = run(&["certify", "--model", "builtin:fig2", "--property", "largest:0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    let out = run(&["certify", "--model"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bounds_reproduces_the_coarse_lower_bound() {
    let out = run(&[
        "bounds",
        "--model",
        "builtin:fig2",
        "--property",
        "argmax:0",
        "--method",
        "coarse",
        "--p",
        "0.8",
        "--k",
        "1",
        "--chain-threshold",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("lower:   0.6"), "{text}");
    assert!(text.contains("upper:   1"), "{text}");
}

#[test]
fn bounds_csv_row_round_trips() {
    let out = run(&["bounds", "--model", "builtin:fig2", "--property", "argmax:0", "--csv"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = parse_csv(&stdout(&out)).unwrap();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!(row.method, "exact");
    assert_eq!(row.attribute, "argmax:0");
    assert_eq!(row.status, "ok");
    assert!((row.lower - 0.968).abs() <= 1e-9);
    assert!((row.upper - 0.968).abs() <= 1e-9);
    assert_eq!(RunRecord::parse_csv_line(&row.to_csv_line()).unwrap(), *row);
}

#[test]
fn bounds_with_budget_one_reports_a_vacuous_interval() {
    let out = run(&[
        "bounds", "--model", "builtin:fig2", "--property", "argmax:0", "--budget", "1", "--csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows = parse_csv(&stdout(&out)).unwrap();
    assert_eq!(rows[0].status, "budget");
    assert_eq!(rows[0].lower, 0.0);
    assert_eq!(rows[0].upper, 1.0);
}

#[test]
fn budget_env_var_is_the_default() {
    let out = bin()
        .args(["bounds", "--model", "builtin:fig2", "--property", "argmax:0", "--csv"])
        .env("APPROXLINE_REGION_BUDGET", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let rows = parse_csv(&stdout(&out)).unwrap();
    assert_eq!(rows[0].status, "budget");

    let out = bin()
        .args(["bounds", "--model", "builtin:fig2", "--property", "argmax:0", "--csv"])
        .env("APPROXLINE_REGION_BUDGET", "not a number")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bounds_schedule_times_out_on_an_impossible_budget() {
    let out = run(&[
        "bounds",
        "--model",
        "builtin:fig2",
        "--property",
        "argmax:0",
        "--budget",
        "1",
        "--schedule",
        "a",
        "--timeout",
        "0.2",
        "--csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows = parse_csv(&stdout(&out)).unwrap();
    assert_eq!(rows[0].status, "timeout");
    assert_eq!((rows[0].lower, rows[0].upper), (0.0, 1.0));
}

#[test]
fn bounds_accepts_a_chain_file() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_file(dir.path(), "id.json", IDENTITY_2D);
    // Two segments along y0: only the first lies in y0 < 0.
    let chain = write_file(
        dir.path(),
        "chain.json",
        r#"{"nodes": [{"shape":[2],"data":[-2.0,0.0]},
                      {"shape":[2],"data":[-1.0,0.0]},
                      {"shape":[2],"data":[3.0,0.0]}],
            "weights": [0.25, 0.75]}"#,
    );
    let out = run(&[
        "bounds",
        "--model",
        model.to_str().unwrap(),
        "--chain",
        chain.to_str().unwrap(),
        "--property",
        "sign:0:-",
        "--csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let rows = parse_csv(&stdout(&out)).unwrap();
    // 0.25 plus the quarter of the second segment left of zero.
    assert!((rows[0].lower - 0.4375).abs() <= 1e-12, "{rows:?}");
    assert!((rows[0].upper - 0.4375).abs() <= 1e-12, "{rows:?}");
}

fn small_model(dir: &Path) -> PathBuf {
    write_file(
        dir,
        "model.json",
        r#"{"input_shape": [2],
            "layers": [
              {"kind": "dense", "weight": [[1.0, 0.5], [-0.5, 1.0]], "bias": [0.1, -0.2]},
              {"kind": "relu"},
              {"kind": "dense", "weight": [[0.8, -1.2], [1.1, 0.3]], "bias": [0.05, 0.0]}
            ]}"#,
    )
}

fn three_pairs(dir: &Path) -> PathBuf {
    write_file(
        dir,
        "pairs.json",
        r#"[{"a": {"shape":[2],"data":[-1.0, 0.5]}, "b": {"shape":[2],"data":[2.0, -1.5]}},
            {"a": {"shape":[2],"data":[0.3, 1.2]}, "b": {"shape":[2],"data":[-2.0, 2.0]}},
            {"a": {"shape":[2],"data":[1.5, 1.5]}, "b": {"shape":[2],"data":[-0.5, -3.0]}}]"#,
    )
}

#[test]
fn compare_emits_rows_in_input_order_plus_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let model = small_model(dir.path());
    let pairs = three_pairs(dir.path());
    let csv = dir.path().join("table.csv");
    let out = run(&[
        "compare",
        "--model",
        model.to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
        "--attrs",
        "0,1",
        "--methods",
        "exact,approxline:0.5:25",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));

    let rows = parse_csv(&fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 12 + 2);
    let (data, aggregates) = rows.split_at(12);

    // pair-major, then attribute, then method, every run ok
    let mut expected = Vec::new();
    for pair in 0..3 {
        for attr in 0..2 {
            for method in ["exact", "approxline"] {
                expected.push((format!("pair{pair}"), attr.to_string(), method));
            }
        }
    }
    for (row, want) in data.iter().zip(&expected) {
        assert_eq!((row.item_id.clone(), row.attribute.clone(), row.method.as_str()),
                   (want.0.clone(), want.1.clone(), want.2));
        assert_eq!(row.status, "ok");
    }

    // relaxation can only shrink the table of regions
    for pair in 0..3 {
        for attr in 0..2 {
            let find = |m: &str| {
                data.iter()
                    .find(|r| r.item_id == format!("pair{pair}") && r.attribute == attr.to_string() && r.method == m)
                    .unwrap()
            };
            assert!(find("approxline").regions <= find("exact").regions);
        }
    }

    assert_eq!(aggregates[0].item_id, "aggregate");
    assert_eq!(aggregates[0].method, "exact");
    assert_eq!(aggregates[1].method, "approxline");
    let mean_width: f64 = data
        .iter()
        .filter(|r| r.method == "exact")
        .map(|r| r.width)
        .sum::<f64>()
        / 6.0;
    assert!((aggregates[0].width - mean_width).abs() <= 1e-12);
}

#[test]
fn compare_sampling_rows_use_the_default_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_file(dir.path(), "id.json", IDENTITY_2D);
    // Both endpoints keep output 0 positive, so sampling terminates quickly.
    let pairs = write_file(
        dir.path(),
        "pairs.json",
        r#"[{"a": {"shape":[2],"data":[1.0, 0.0]}, "b": {"shape":[2],"data":[3.0, 0.0]}}]"#,
    );
    let out = run(&[
        "compare",
        "--model",
        model.to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
        "--attrs",
        "0",
        "--methods",
        "sampling",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(
        text.contains("# sampling confidence=0.9999 target_width=0.002"),
        "{text}"
    );
    let rows = parse_csv(&text).unwrap();
    assert_eq!(rows[0].method, "sampling");
    assert!(rows[0].width < 0.002, "{rows:?}");
    assert!(rows[0].upper >= 1.0 - 1e-12);
}

#[test]
fn compare_interval_rows_are_sound_but_vacuous_on_mixed_signs() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_file(dir.path(), "id.json", IDENTITY_2D);
    let pairs = write_file(
        dir.path(),
        "pairs.json",
        r#"[{"a": {"shape":[2],"data":[1.0, -1.0]}, "b": {"shape":[2],"data":[-1.0, 1.0]}}]"#,
    );
    let out = run(&[
        "compare",
        "--model",
        model.to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
        "--attrs",
        "0",
        "--methods",
        "exact,interval",
    ]);
    let rows = parse_csv(&stdout(&out)).unwrap();
    let exact = &rows[0];
    let interval = &rows[1];
    assert!((exact.lower - 0.5).abs() <= 1e-12, "{exact:?}");
    assert_eq!((interval.lower, interval.upper), (0.0, 1.0), "{interval:?}");
}

#[test]
fn compare_plot_file_lists_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let model = small_model(dir.path());
    let pairs = three_pairs(dir.path());
    let plot = dir.path().join("table.dat");
    let out = run(&[
        "compare",
        "--model",
        model.to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
        "--attrs",
        "0",
        "--methods",
        "exact,interval",
        "--plot",
        plot.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&plot).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# method p k mean_width mean_millis");
    assert!(lines[1].starts_with("exact 0 0 "));
    assert!(lines[2].starts_with("interval 0 0 "));
}

#[test]
fn eval_prints_the_forward_image() {
    let dir = tempfile::tempdir().unwrap();
    let model = small_model(dir.path());
    let v = write_file(dir.path(), "v.json", r#"{"shape":[2],"data":[0.0,0.0]}"#);
    let out = run(&[
        "eval",
        "--model",
        model.to_str().unwrap(),
        "--input",
        v.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    // relu zeroes the second unit, so y = (0.8*0.1 + 0.05, 1.1*0.1)
    let y: approxline::tensor::Tensor = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!((y.data()[0] - 0.13).abs() <= 1e-12);
    assert!((y.data()[1] - 0.11).abs() <= 1e-12);
}
