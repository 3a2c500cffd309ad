use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use alfs_cli::{oracle_document, select_document, solve_document, to_json, RunConfig};
use alfs_core::data::{self, LoadOptions, PlantedClusters};
use alfs_core::{DMatrix, Dataset, SelectionRequest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn alfs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alfs")).args(args).output().expect("binary runs")
}

fn tiny() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/tiny.csv")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn random_csv(dir: &Path, d: usize, n: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ds = Dataset::from_matrix(DMatrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0))).unwrap();
    let p = dir.join(format!("random_{d}x{n}_{seed}.csv"));
    data::write_csv(&ds, &p).unwrap();
    p
}

const LABELED: &str = r#"{"data": {"load": {"label_column": "label"}}}"#;

#[test]
fn solve_smoke_run_converges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", LABELED);
    let out = dir.path().join("out.json");
    let o = alfs(&["solve", "--data", s(&tiny()), "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(doc["stop_reason"], "converged");
    assert!(doc["wall_time_seconds"].is_null());
    // the echo carries every default, not just what the file set
    assert_eq!(doc["config_echo"]["solver"]["rho_max"], 1e10);
    assert_eq!(doc["config_echo"]["selection"]["m"], 6);
}

#[test]
fn config_echo_replays_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"data": {"load": {"label_column": "label"}}, "selection": {"m": 2, "r": 2}}"#);
    let first = dir.path().join("first.json");
    assert!(alfs(&["solve", "--data", s(&tiny()), "--config", s(&cfg), "--out", s(&first)]).status.success());
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&first).unwrap()).unwrap();
    let echo = write(dir.path(), "echo.json", &doc["config_echo"].to_string());
    let second = dir.path().join("second.json");
    assert!(alfs(&["solve", "--config", s(&echo), "--out", s(&second)]).status.success());
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

#[test]
fn cli_matches_library_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let csv = random_csv(dir.path(), 4, 5, 1);
    let text = r#"{"selection": {"m": 2, "r": 2}, "params": {"alpha": 0.5}}"#;
    let cfg = write(dir.path(), "c.json", text);
    let ds = data::load_csv(&csv, &LoadOptions { has_header: true, ..Default::default() }).unwrap();

    for cmd in ["solve", "select"] {
        let out = dir.path().join(format!("{cmd}.json"));
        let o = alfs(&[cmd, "--data", s(&csv), "--config", s(&cfg), "--out", s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut c = RunConfig::from_json(text).unwrap();
        c.data.path = Some(csv.clone());
        let lib = match cmd {
            "solve" => to_json(&solve_document(&ds, &mut c).unwrap()),
            _ => to_json(&select_document(&ds, &mut c).unwrap()),
        };
        assert_eq!(std::fs::read(&out).unwrap(), lib, "{cmd}");
    }

    let out = dir.path().join("oracle.json");
    assert!(alfs(&["oracle", "--data", s(&csv), "--m", "2", "--r", "2", "--out", s(&out)]).status.success());
    let lib = to_json(&oracle_document(&ds, SelectionRequest { m: 2, r: 2 }).unwrap());
    assert_eq!(std::fs::read(&out).unwrap(), lib);
}

#[test]
fn select_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"data": {"load": {"label_column": "label"}}, "selection": {"m": 4}}"#);
    let o = alfs(&["select", "--data", s(&tiny()), "--config", s(&cfg), "--m", "2", "--r", "1"]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["selected_samples"].as_array().unwrap().len(), 2);
    assert_eq!(doc["selected_features"].as_array().unwrap().len(), 1);
    assert!(doc.get("objective_trace").is_none());
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    for (name, text) in [
        ("broken.json", "{\"params\": "),
        ("unknown.json", r#"{"params": {"lambda": 1}}"#),
        ("negative.json", r#"{"params": {"alpha": -1}}"#),
    ] {
        let cfg = write(dir.path(), name, text);
        let o = alfs(&["solve", "--data", s(&tiny()), "--config", s(&cfg), "--out", s(&out)]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(!o.stderr.is_empty());
        assert!(!out.exists(), "{name}");
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", LABELED);
    let unwritable = dir.path().join("missing/dir/out.json");
    let o = alfs(&["solve", "--data", s(&tiny()), "--config", s(&cfg), "--out", s(&unwritable)]);
    assert_eq!(o.status.code(), Some(2));

    let o = alfs(&["solve", "--data", s(&dir.path().join("nope.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = alfs(&["solve", "--data", s(&tiny()), "--config", s(&cfg), "--m", "3"]);
    assert_eq!(o.status.code(), Some(2), "solve takes no --m");
    let o = alfs(&["select", "--data", s(&tiny()), "--config", s(&cfg), "--m", "7"]);
    assert_eq!(o.status.code(), Some(2), "budget above n");

    // unlabeled data cannot be benchmarked
    let o = alfs(&["bench", "--data", s(&tiny()), "--methods", "random", "--budgets", "1:2:1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = alfs(&["bench", "--data", s(&tiny()), "--label-column", "label", "--methods", "bogus", "--budgets", "1:2:1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_variable_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_alfs"))
        .args(["oracle", "--data", s(&tiny()), "--label-column", "label", "--m", "1", "--r", "1"])
        .env("ALFS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_alfs"))
        .args(["oracle", "--data", s(&tiny()), "--label-column", "label", "--m", "1", "--r", "1"])
        .env("ALFS_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
}

#[test]
fn bench_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let ds = PlantedClusters { n_samples: 24, n_features: 3, classes: 3, separation: 3.0, noise: 1.0 }
        .generate(1)
        .unwrap();
    let csv = dir.path().join("planted.csv");
    data::write_csv(&ds, &csv).unwrap();
    let out = dir.path().join("curves.csv");
    let args = [
        "bench", "--data", s(&csv), "--label-column", "label", "--methods", "random", "--budgets", "2:4:2",
        "--repeats", "2", "--out", s(&out),
    ];
    assert!(alfs(&args).status.success());
    let first = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines[0], "method,budget,repeat,accuracy");
    assert_eq!(lines.len(), 1 + 4);
    assert!(alfs(&args).status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), first);
}

#[test]
fn oracle_on_bundled_matrix() {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/two_by_three.csv");
    let o = alfs(&["oracle", "--data", s(&p), "--no-header", "--rows-are-features", "--m", "2", "--r", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(doc["error"].as_f64().unwrap().abs() < 1e-20);
}

#[test]
fn oversize_oracle_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let csv = random_csv(dir.path(), 40, 60, 0);
    let o = alfs(&["oracle", "--data", s(&csv), "--m", "30", "--r", "20"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("limit"));
}

/// Every object key the config serializes is declared in the published schema, and vice versa.
fn keys_match(value: &serde_json::Value, schema: &serde_json::Value, path: &str) {
    let Some(obj) = value.as_object() else { return };
    let props = schema["properties"].as_object().unwrap_or_else(|| panic!("{path}: schema has no properties"));
    let mut got: Vec<&String> = obj.keys().collect();
    let mut want: Vec<&String> = props.keys().collect();
    got.sort();
    want.sort();
    assert_eq!(got, want, "{path}");
    for (k, v) in obj {
        if v.is_object() && props[k].get("properties").is_some() {
            keys_match(v, &props[k], &format!("{path}.{k}"));
        }
    }
}

#[test]
fn published_schemas_track_documents() {
    let docs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs");
    let read = |name: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(docs.join(name)).unwrap()).unwrap()
    };
    let mut cfg = RunConfig::default();
    cfg.bench.grid = Some(Default::default());
    keys_match(&serde_json::to_value(&cfg).unwrap(), &read("config.schema.json"), "config");

    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.json", LABELED);
    let o = alfs(&["solve", "--data", s(&tiny()), "--config", s(&c)]);
    let mut doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    doc.as_object_mut().unwrap().remove("config_echo");
    let mut schema = read("result.schema.json");
    schema["properties"].as_object_mut().unwrap().remove("config_echo");
    keys_match(&doc, &schema, "result");
}
