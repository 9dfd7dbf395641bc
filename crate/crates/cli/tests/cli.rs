//! End-to-end checks of the compiled binary.

use std::fs;
use std::path::Path;
use std::process::Command;

fn sidelink() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sidelink"))
}

#[test]
fn experiment_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let rows = dir.path().join(format!("rows-{tag}.csv"));
        let summary = dir.path().join(format!("summary-{tag}.json"));
        let status = sidelink()
            .args([
                "experiment",
                "--preset",
                "delta-noise",
                "--n",
                "64",
                "--delta",
                "0.25",
                "--protocol",
                "tuned",
                "--eps",
                "0.125",
                "--trials",
                "2000",
                "--seed",
                "42",
            ])
            .arg("--out")
            .arg(&rows)
            .arg("--summary")
            .arg(&summary)
            .status()
            .unwrap();
        assert!(status.success());
        (fs::read(rows).unwrap(), fs::read(summary).unwrap())
    };
    let (rows_a, summary_a) = run("a");
    let (rows_b, summary_b) = run("b");
    assert_eq!(rows_a, rows_b);
    assert_eq!(summary_a, summary_b);

    let text = String::from_utf8(rows_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some(sidelink::experiment::ROWS_HEADER),
        "row schema is versioned and fixed"
    );
    assert_eq!(lines.count(), 2000);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    fs::write(
        &config,
        r#"{
            "preset": "delta-noise", "n": 32, "delta": 0.25,
            "protocol": "const-round", "eps": 0.125,
            "trials": 500, "seed": "7", "format": "json-lines"
        }"#,
    )
    .unwrap();
    let rows = dir.path().join("rows.jsonl");
    let summary = dir.path().join("summary.json");
    let output = sidelink()
        .arg("experiment")
        .arg("--config")
        .arg(&config)
        .args(["--trials", "100"])
        .arg("--out")
        .arg(&rows)
        .arg("--summary")
        .arg(&summary)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let rows_text = fs::read_to_string(&rows).unwrap();
    assert_eq!(rows_text.lines().count(), 100, "flag overrides config");
    let first: serde_json::Value = serde_json::from_str(rows_text.lines().next().unwrap()).unwrap();
    assert_eq!(first["trial"], 0);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(summary["schema"], "sidelink.summary.v1");
    assert_eq!(summary["protocol"], "const-round");
    validate_summary_schema(&summary);
}

/// The summary must carry exactly the documented keys with the documented
/// types (see docs/summary.schema.json).
fn validate_summary_schema(summary: &serde_json::Value) {
    let obj = summary.as_object().unwrap();
    for (key, check) in [
        ("schema", "string"),
        ("distribution", "string"),
        ("protocol", "string"),
        ("eps", "number"),
        ("trials", "number"),
        ("seed", "string"),
        ("backend", "string"),
        ("cond_entropy", "number"),
        ("stats", "object"),
        ("ceilings", "object"),
        ("bounds", "object"),
        ("all_checks_passed", "bool"),
    ] {
        let value = obj
            .get(key)
            .unwrap_or_else(|| panic!("summary key {key} missing"));
        let ok = match check {
            "string" => value.is_string(),
            "number" => value.is_number(),
            "object" => value.is_object(),
            "bool" => value.is_boolean(),
            _ => unreachable!(),
        };
        assert!(ok, "summary key {key} has wrong type: {value}");
    }
    assert_eq!(obj.len(), 12, "summary carries exactly the documented keys");
    for key in [
        "trials",
        "mean_total_bits",
        "mean_bits_a_to_b",
        "mean_bits_b_to_a",
        "mean_rounds",
        "error_rate",
        "max_bits_per_input",
        "se_bits_a_to_b",
    ] {
        assert!(summary["stats"].get(key).is_some(), "stats key {key}");
    }
}

#[test]
fn transmit_reports_a_full_transcript() {
    let output = sidelink()
        .args([
            "transmit", "--preset", "identity", "--n", "16", "--protocol", "tuned", "--x", "5",
            "--y", "5", "--seed", "3",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(doc["output"], 5);
    assert_eq!(doc["correct"], true);
    assert_eq!(doc["rounds"], 2);
    assert!(doc["transcript"].as_array().unwrap().len() == 2);
}

#[test]
fn entropy_and_bounds_subcommands_emit_json() {
    let out = sidelink()
        .args([
            "entropy", "--preset", "delta-noise", "--n", "16", "--delta", "0.25",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let diff = doc["cond_entropy"].as_f64().unwrap()
        - doc["cond_entropy_closed_form"].as_f64().unwrap();
    assert!(diff.abs() < 1e-9);

    let out = sidelink()
        .args([
            "bounds", "--preset", "delta-noise", "--n", "1024", "--delta", "0.25", "--eps",
            "0.015625",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((doc["two_way"].as_f64().unwrap() - 4.67).abs() < 0.01);
    assert!(doc["cartesian_zero_error"]["applicable"].as_bool().unwrap());
}

#[test]
fn check_lemma_passes_and_exits_zero() {
    let out = sidelink()
        .args(["check-lemma", "--trials", "300", "--max-len", "50", "--seed", "5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["violations"], 0);
}

#[test]
fn derandomize_reports_a_seed_meeting_fano() {
    let out = sidelink()
        .args([
            "derandomize", "--preset", "delta-noise", "--n", "16", "--delta", "0.25", "--eps",
            "0.125", "--candidates", "8", "--seed", "11",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["exact_error"].as_f64().unwrap() <= 0.125);
    assert_eq!(doc["meets_fano"], true);
}

#[test]
fn compress_builtin_xor_reports_complexity_two() {
    let out = sidelink()
        .args([
            "compress", "--builtin", "xor2", "--preset", "independent-uniform", "--nx", "4",
            "--ny", "4", "--eps", "0.125", "--trials", "200", "--seed", "9",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((doc["info_complexity"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert!(doc["max_stat_distance"].as_f64().unwrap() <= 0.125 + 0.08);
}

#[test]
fn dist_file_round_trip_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dist.json");
    let joint = sidelink_core::dist::presets::delta_noise(8, 0.25).unwrap();
    sidelink::formats::save_joint(&joint, &path).unwrap();
    let out = sidelink()
        .arg("entropy")
        .arg("--dist")
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["x_size"], 9);

    // Conditional CSV export.
    let csv_path = dir.path().join("cond.csv");
    let out = sidelink()
        .arg("entropy")
        .arg("--dist")
        .arg(&path)
        .arg("--conditionals")
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("y,x,p\n"));
    assert_eq!(text.lines().count(), 1 + 81);
}

#[test]
fn bad_arguments_exit_with_error_code() {
    let out = sidelink()
        .args(["experiment", "--preset", "no-such-preset"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let out = sidelink()
        .args(["transmit", "--preset", "identity", "--x", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_env_var_is_the_fallback() {
    let out_env = sidelink()
        .args(["transmit", "--preset", "identity", "--n", "4", "--x", "2", "--y", "2"])
        .env("SIDELINK_SEED", "123")
        .output()
        .unwrap();
    let out_flag = sidelink()
        .args([
            "transmit", "--preset", "identity", "--n", "4", "--x", "2", "--y", "2", "--seed",
            "123",
        ])
        .output()
        .unwrap();
    assert_eq!(out_env.stdout, out_flag.stdout);
}

#[test]
fn path_to_tempdir_is_absolute() {
    // Guard for the tempdir-based tests above.
    assert!(Path::new(env!("CARGO_BIN_EXE_sidelink")).is_absolute());
}

#[test]
fn stats_csv_is_one_fixed_schema_row() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("stats.csv");
    let rows = dir.path().join("rows.csv");
    let status = sidelink()
        .args([
            "experiment", "--preset", "identity", "--n", "8", "--trials", "50", "--seed", "1",
            "--summary", "/dev/null",
        ])
        .arg("--out")
        .arg(&rows)
        .arg("--stats-csv")
        .arg(&stats)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&stats).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(sidelink::experiment::STATS_HEADER));
    let row = lines.next().unwrap();
    assert_eq!(row.split(',').count(), 8);
    assert!(row.starts_with("50,"));
    assert_eq!(lines.next(), None);
}
