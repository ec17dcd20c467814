use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;
use tomolab::experiments::{Manifest, EXPERIMENTS};

fn tomolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tomolab")).args(args).env_remove("TOMOLAB_THREADS").output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(config: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tomolab"));
    cmd.env_remove("TOMOLAB_THREADS").arg("run").arg(config);
    if let Some(t) = threads {
        cmd.env("TOMOLAB_THREADS", t);
    }
    cmd.output().unwrap()
}

/// Manifest JSON without its wall-clock block.
fn untimed(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timing");
    v
}

const FBP_SMALL: &str =
    r#"{"experiment": "fbp-roundtrip", "grid": {"n": 48}, "output_dir": "out", "params": {"n_angles": 60}}"#;
const SPECTRAL: &str = r#"{"experiment": "spectral-calculus", "grid": {"n": 32}, "seed": 3, "output_dir": "out"}"#;

#[test]
fn list_prints_every_experiment() {
    let out = tomolab(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().collect::<Vec<_>>(), EXPERIMENTS.to_vec());
}

#[test]
fn passing_run_exits_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SPECTRAL);
    let out = run(&cfg, None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let m = Manifest::read(&dir.path().join("out/manifest.json")).unwrap();
    assert!(m.passed);
    assert!(m.assertions.iter().all(|a| a.passed));
    assert_eq!(m.grid.map(|g| g.n), Some(32));
}

#[test]
fn failed_assertion_exits_one_and_lists_it() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"experiment": "fbp-roundtrip", "grid": {"n": 64}, "output_dir": "out", "params": {"n_angles": 8}}"#,
    );
    let out = run(&cfg, None);
    assert_eq!(out.status.code(), Some(1));
    let m = Manifest::read(&dir.path().join("out/manifest.json")).unwrap();
    assert!(!m.passed);
    assert_eq!(m.failures().len(), 1);
    assert_eq!(m.failures()[0].name, "fbp_error");
}

#[test]
fn malformed_json_exits_two_without_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"experiment": "poincare", "output_dir": "out""#);
    let out = run(&cfg, None);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn schema_violations_exit_two() {
    let dir = TempDir::new().unwrap();
    for (i, text) in [
        r#"{"experiment": "poincare", "output_dir": "out", "colour": 1}"#,
        r#"{"experiment": "poincare", "output_dir": "out", "params": {"bumpz": 3}}"#,
        r#"{"experiment": "nope", "output_dir": "out"}"#,
        r#"{"experiment": "poincare"}"#,
        r#"{"experiment": "poincare", "grid": {"n": 1}, "output_dir": "out"}"#,
    ]
    .iter()
    .enumerate()
    {
        let cfg = write_config(dir.path(), &format!("c{i}.json"), text);
        assert_eq!(run(&cfg, None).status.code(), Some(2), "{text}");
    }
    assert!(!dir.path().join("out").exists());
    assert_eq!(run(&dir.path().join("missing.json"), None).status.code(), Some(2));
}

#[test]
fn bad_usage_exits_two() {
    assert_eq!(tomolab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(tomolab(&["--threads", "0", "list"]).status.code(), Some(2));
}

#[test]
fn repeated_runs_give_identical_manifests() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        let cfg = write_config(d.path(), "c.json", FBP_SMALL);
        run(&cfg, Some("1"));
    }
    let (ma, mb) = (untimed(&a.path().join("out/manifest.json")), untimed(&b.path().join("out/manifest.json")));
    assert_eq!(ma, mb);
    let m = Manifest::read(&a.path().join("out/manifest.json")).unwrap();
    assert!(!m.outputs.is_empty());
    for o in &m.outputs {
        let (fa, fb) = (a.path().join("out").join(&o.path), b.path().join("out").join(&o.path));
        assert_eq!(fs::read(fa).unwrap(), fs::read(fb).unwrap(), "{}", o.path);
    }
}

#[test]
fn thread_env_var_reaches_the_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SPECTRAL);
    assert!(run(&cfg, Some("2")).status.success());
    assert_eq!(Manifest::read(&dir.path().join("out/manifest.json")).unwrap().threads, 2);
    let out = Command::new(env!("CARGO_BIN_EXE_tomolab"))
        .env("TOMOLAB_THREADS", "2")
        .args(["--threads", "1", "run"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(Manifest::read(&dir.path().join("out/manifest.json")).unwrap().threads, 1);
}

#[test]
fn report_on_empty_dir_exits_two() {
    let dir = TempDir::new().unwrap();
    let out = tomolab(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

fn pgm_dims(path: &Path) -> (usize, usize) {
    let bytes = fs::read(path).unwrap();
    let header: Vec<String> =
        String::from_utf8_lossy(&bytes[..bytes.len().min(64)]).split_whitespace().take(4).map(str::to_owned).collect();
    assert_eq!(header[0], "P5");
    assert_eq!(header[3], "65535");
    (header[1].parse().unwrap(), header[2].parse().unwrap())
}

#[test]
fn report_of_one_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", FBP_SMALL);
    run(&cfg, None);
    let out = tomolab(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("report/summary.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("fbp-roundtrip,relative_l2_error,"));

    let m = Manifest::read(&dir.path().join("out/manifest.json")).unwrap();
    let fields: Vec<_> = m.outputs.iter().filter(|o| o.kind == "field").collect();
    assert!(!fields.is_empty());
    for o in fields {
        let stem = Path::new(&o.path).file_stem().unwrap().to_string_lossy().into_owned();
        let pgm = dir.path().join(format!("report/00-fbp-roundtrip-{stem}.pgm"));
        assert_eq!(pgm_dims(&pgm), (48, 48), "{}", pgm.display());
        let window: Value = serde_json::from_str(&fs::read_to_string(pgm.with_extension("json")).unwrap()).unwrap();
        assert!(window["min"].as_f64().unwrap() <= window["max"].as_f64().unwrap());
        assert_eq!(window["width"], 48);
    }
}
