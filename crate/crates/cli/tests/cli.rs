use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fioh-test-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn fioh(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fioh"))
        .args(args)
        .env("FIOH_OUTPUT_DIR", out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn csv_tables_round_trip_through_a_csv_reader() {
    let dir = scratch("csv");
    let out = dir.join("out");
    let run = fioh(&["accept", "--suite", "fio", "--format", "csv"], &out);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );

    let mut reader = csv::Reader::from_path(out.join("fio.csv")).unwrap();
    let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        headers[..6],
        [
            "size",
            "length",
            "octaves",
            "per_octave",
            "directions",
            "seed"
        ]
    );
    let diff = headers
        .iter()
        .position(|h| h == "relative_difference")
        .unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 10);
    for row in &rows {
        assert_eq!(row.len(), headers.len());
        let v: f64 = row[diff].parse().unwrap();
        assert!(v <= 1e-10);
        let mantissa = row[diff].split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 12, "{}", &row[diff]);
    }

    let mut verdicts = csv::Reader::from_path(out.join("verdicts.csv")).unwrap();
    let passed = verdicts
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == "passed")
        .unwrap();
    let records: Vec<_> = verdicts.records().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), 2);
    assert!(records.iter().all(|r| &r[passed] == "true"));
}

#[test]
fn empty_suite_list_gives_an_empty_successful_bundle() {
    let dir = scratch("empty");
    let out = dir.join("out");
    let config = write_config(&dir, r#"{"suites": []}"#);
    let run = fioh(&["accept", "--config", &config], &out);
    assert!(run.status.success());
    let bundle: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("bundle.json")).unwrap()).unwrap();
    assert_eq!(bundle["suites"], serde_json::json!([]));
    assert_eq!(bundle["passed"], serde_json::json!(true));
    assert_eq!(bundle["config"]["grid"]["size"], serde_json::json!(256));
    let verdicts = csv::Reader::from_path(out.join("verdicts.csv"))
        .unwrap()
        .records()
        .count();
    assert_eq!(verdicts, 0);
}

#[test]
fn repeated_runs_are_identical_and_failures_set_the_exit_status() {
    let dir = scratch("repeat");
    let config = write_config(
        &dir,
        r#"{"suites": ["volume", "fio"], "volume_samples": 2000, "seeds": [3]}"#,
    );
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.join(format!("out{k}"));
        let run = fioh(
            &["accept", "--config", &config, "--format", "json-lines"],
            &out,
        );
        // The large-radius volume exponent misses its target.
        assert_eq!(run.status.code(), Some(1));
        outputs.push(out);
    }
    for name in ["fio.jsonl", "volume.jsonl", "verdicts.jsonl"] {
        let a = std::fs::read(outputs[0].join(name)).unwrap();
        let b = std::fs::read(outputs[1].join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between runs");
    }
    let strip = |p: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(p.join("bundle.json")).unwrap()).unwrap();
        v["environment"]["timestamp"] = serde_json::Value::Null;
        v["config"]["output_dir"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(&outputs[0]), strip(&outputs[1]));
    let failed = std::fs::read_to_string(outputs[0].join("verdicts.jsonl")).unwrap();
    assert!(failed.lines().any(|l| l.contains("\"passed\":false")));
}

#[test]
fn invalid_configuration_lists_every_error() {
    let dir = scratch("invalid");
    let config = write_config(
        &dir,
        r#"{"grid": {"n": 3, "size": 48}, "directions": 1, "suites": ["volume"], "seeds": [], "volume_samples": 5}"#,
    );
    let run = fioh(&["accept", "--config", &config], &dir.join("out"));
    assert_eq!(run.status.code(), Some(2));
    let err = String::from_utf8_lossy(&run.stderr);
    for key in ["grid.n", "grid:", "directions", "seeds", "volume_samples"] {
        assert!(err.contains(key), "missing {key} in {err}");
    }
    assert!(!dir.join("out").exists());
}

#[test]
fn fields_survive_transform_and_inverse() {
    let dir = scratch("roundtrip");
    let phase = dir.join("phase.bin");
    let back = dir.join("back.bin");
    let common = [
        "--size",
        "32",
        "--directions",
        "16",
        "--octaves",
        "3",
        "--per-octave",
        "2",
    ];
    let mut args = vec![
        "transform",
        "--standard",
        "2",
        "--output",
        phase.to_str().unwrap(),
    ];
    args.extend(common);
    assert!(fioh(&args, &dir).status.success());
    let run = fioh(
        &[
            "inverse",
            "--input",
            phase.to_str().unwrap(),
            "--output",
            back.to_str().unwrap(),
        ],
        &dir,
    );
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let norm = fioh(
        &[
            "norm",
            "--input",
            back.to_str().unwrap(),
            "--space",
            "hpfio",
            "--p",
            "2",
            "--directions",
            "16",
            "--octaves",
            "3",
            "--per-octave",
            "2",
        ],
        &dir,
    );
    assert!(
        norm.status.success(),
        "{}",
        String::from_utf8_lossy(&norm.stderr)
    );
    let value: serde_json::Value = serde_json::from_slice(&norm.stdout).unwrap();
    assert!(value["value"].as_f64().unwrap() > 0.0);
}
