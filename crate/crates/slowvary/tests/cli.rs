use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use slowvary::output::{Artifacts, CsvTable};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slowvary"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn malformed_config_exits_one_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for body in [
        "{ not json",
        r#"{"kind": "spectral", "seed": 1}"#,
        r#"{"kind": "teleport", "seed": 1, "params": {}}"#,
        r#"{"kind": "spectral", "seed": 1, "params": {"graph": "g.graph", "bogus": 3}}"#,
    ] {
        let cfg = write_config(dir.path(), body);
        let o = run(&cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(1), "{body}");
        assert!(!out.exists(), "{body}");
    }
}

#[test]
fn missing_graph_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"kind": "spectral", "seed": 1, "params": {"graph": "absent.graph"}}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run(&cfg, &out, &[]).status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn periodic_family_is_a_precondition_failure() {
    let dir = tempfile::tempdir().unwrap();
    let family = configs().join("families/flip.json");
    let body = format!(
        r#"{{"kind": "consensus", "seed": 1, "params": {{"family": "{}", "b": 4, "iterations": 5}}}}"#,
        family.display()
    );
    let cfg = write_config(dir.path(), &body);
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("aperiodic"));
    assert!(!out.exists());
}

#[test]
fn unwritable_output_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run(&configs().join("spectral.json"), &blocker.join("sub"), &[]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn lowerbound_manifest_reports_phase_length() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lb");
    assert!(run(&configs().join("lowerbound.json"), &out, &[]).status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["derived"]["t"], 4);
    assert!(manifest["version"].is_string());
    let sequence: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("sequence/manifest.json")).unwrap()).unwrap();
    let steps = sequence["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 8);
    for step in steps {
        assert!(step["removed_next"].is_array() && step["added_next"].is_array());
    }
    let span = fs::read_to_string(out.join("span.csv")).unwrap();
    assert!(span.starts_with("m,comm_rounds,l_m,bound,slack\n"));
}

#[test]
fn consensus_trace_has_declared_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    assert!(run(&configs().join("consensus_static.json"), &out, &[]).status.success());
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("k,T,dist2,r_gap,potential\n"));
    assert!(trace.ends_with('\n'));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    for key in ["gamma", "beta", "eta", "theta", "M", "B"] {
        assert!(manifest["derived"]["consensus"][key].is_number(), "{key}");
    }
}

#[test]
fn sweep_writes_per_seed_and_merged_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = run(&configs().join("consensus_static.json"), &out, &["--seed", "3", "--sweep", "3"]);
    assert!(o.status.success());
    for s in 3..6 {
        assert!(out.join(format!("seed-{s}/trace.csv")).exists());
    }
    let merged = fs::read_to_string(out.join("merged/trace.csv")).unwrap();
    assert!(merged.starts_with("seed,k,T,dist2,r_gap,potential\n"));
    let seeds: Vec<&str> = merged.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert!(seeds.windows(2).all(|w| w[0].parse::<u64>().unwrap() <= w[1].parse::<u64>().unwrap()));
}

#[test]
fn empty_trace_is_header_only() {
    let table = CsvTable::new(&["k", "dist2", "floor"]);
    assert_eq!(table.to_bytes().unwrap(), b"k,dist2,floor\n");
}

#[test]
fn ten_thousand_rows_write_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let mut table = CsvTable::new(&["k", "T", "dist2", "r_gap", "potential"]);
    for k in 0..10_000u64 {
        let v = k as f64 * 1.000_000_1;
        table.push(vec![
            k.to_string(),
            (k * 3).to_string(),
            slowvary::output::fmt_f(v),
            slowvary::output::fmt_f(-v),
            slowvary::output::fmt_f(v / 7.0),
        ]);
    }
    let mut artifacts = Artifacts::default();
    artifacts.csv("trace.csv", table);
    let start = Instant::now();
    artifacts.write(dir.path()).unwrap();
    assert!(start.elapsed().as_secs_f64() < 1.0);
    let text = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(text.lines().count(), 10_001);
}
