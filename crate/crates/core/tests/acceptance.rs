//! Acceptance suite. Each criterion runs the shipped config from `configs/`
//! in a scratch directory and prints a single PASS/FAIL line.

use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;
use tempfile::TempDir;
use tomolab::experiments::{run_config, Manifest};

struct Criterion {
    id: u32,
    title: &'static str,
    config: &'static str,
    /// Assertions that must be present (and pass) in the manifest.
    required: &'static [&'static str],
    max_seconds: Option<f64>,
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        title: "adjointness",
        config: "adjointness",
        required: &["adjointness_gap"],
        max_seconds: Some(10.0),
    },
    Criterion {
        id: 2,
        title: "fbp round trip",
        config: "fbp-roundtrip",
        required: &["fbp_error"],
        max_seconds: Some(60.0),
    },
    Criterion {
        id: 3,
        title: "normal-operator constant",
        config: "normal-constant",
        required: &["constant_deviation_from_2"],
        max_seconds: None,
    },
    Criterion {
        id: 4,
        title: "spectral calculus",
        config: "spectral-calculus",
        required: &["eigenfunction_exactness", "semigroup", "self_adjointness"],
        max_seconds: Some(10.0),
    },
    Criterion {
        id: 5,
        title: "ucp rank",
        config: "ucp-rank",
        required: &[
            "full_rank_s-0.5_identity",
            "full_rank_s-0.5_first_order",
            "full_rank_s-0.5_laplacian",
            "full_rank_s0.5_identity",
            "full_rank_s0.5_first_order",
            "full_rank_s0.5_laplacian",
            "full_rank_s1.5_identity",
            "full_rank_s1.5_first_order",
            "full_rank_s1.5_laplacian",
            "local_rank_deficiency",
        ],
        max_seconds: Some(120.0),
    },
    Criterion {
        id: 6,
        title: "poincare",
        config: "poincare",
        required: &["ratios_finite", "equal_exponents", "scale_covariance", "classical_constant"],
        max_seconds: Some(30.0),
    },
    Criterion {
        id: 7,
        title: "vector gauge and commutation",
        config: "vector-gauge",
        required: &["gradient_gauge", "commutation_constant_stable", "helmholtz_exactness"],
        max_seconds: Some(60.0),
    },
    Criterion {
        id: 8,
        title: "partial data",
        config: "partial-data",
        required: &[
            "scalar_rank_deficiency",
            "vector_rank_deficiency",
            "zero_data_reconstruction",
            "reconstruction_error",
        ],
        max_seconds: Some(180.0),
    },
    Criterion {
        id: 9,
        title: "calderon",
        config: "calderon",
        required: &[
            "exterior_values_bitwise",
            "dn_symmetry",
            "alessandrini_residual",
            "potential_distinguishability",
            "drift_distinguishability",
            "runge_monotone",
            "linearized_recovery_error",
        ],
        max_seconds: Some(300.0),
    },
    Criterion {
        id: 10,
        title: "geodesic",
        config: "geodesic",
        required: &[
            "hamiltonian_drift",
            "chord_times",
            "clairaut_invariant",
            "herglotz_roundtrip",
            "randers_gauge",
            "randers_antisymmetric_identity",
            "mixing_antisymmetric_remainder",
        ],
        max_seconds: Some(300.0),
    },
];

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.json"))
}

/// Copies a shipped config into `dir`, pointing its output at `dir/out`.
fn stage(name: &str, dir: &Path) -> PathBuf {
    let mut cfg: Value = serde_json::from_str(&fs::read_to_string(config_path(name)).unwrap()).unwrap();
    cfg["output_dir"] = Value::from("out");
    let staged = dir.join(format!("{name}.json"));
    fs::write(&staged, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    staged
}

fn check(c: &Criterion) -> Result<String, String> {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let staged = stage(c.config, dir.path());
    let clock = Instant::now();
    let m = run_config(&staged).map_err(|e| format!("config rejected: {e}"))?;
    let secs = clock.elapsed().as_secs_f64();
    let mut problems = Vec::new();
    if let Some(e) = &m.error {
        problems.push(format!("error: {e}"));
    }
    for name in c.required {
        match m.assertions.iter().find(|a| a.name == *name) {
            None => problems.push(format!("{name} missing")),
            Some(a) if !a.passed => problems.push(format!("{name} = {:?} (bound {:e})", a.value, a.bound)),
            Some(_) => {}
        }
    }
    for a in m.failures() {
        if !c.required.contains(&a.name.as_str()) {
            problems.push(format!("{} = {:?} (bound {:e})", a.name, a.value, a.bound));
        }
    }
    if let Some(limit) = c.max_seconds {
        if secs > limit {
            problems.push(format!("runtime {secs:.1}s > {limit}s"));
        }
    }
    let key = m.key_metric.value.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "nan".into());
    let summary = format!("{} = {key}, {secs:.2}s", m.key_metric.name);
    if problems.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", problems.join("; ")))
    }
}

/// Every manifest below `dir`, keyed by relative path, minus timing.
fn untimed_manifests(dir: &Path) -> Vec<(PathBuf, Value)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n == "manifest.json") {
                let mut v: Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
                v.as_object_mut().unwrap().remove("timing");
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), v));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn determinism() -> Result<String, String> {
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    for d in &dirs {
        let staged = stage("reproduce-all", d.path());
        let status = Command::new(env!("CARGO_BIN_EXE_tomolab"))
            .env_remove("TOMOLAB_THREADS")
            .args(["--threads", "1", "run"])
            .arg(&staged)
            .output()
            .map_err(|e| e.to_string())?
            .status;
        if !status.success() {
            return Err(format!("reproduce-all exited with {status}"));
        }
    }
    let a = untimed_manifests(&dirs[0].path().join("out"));
    let b = untimed_manifests(&dirs[1].path().join("out"));
    if a.len() != b.len() {
        return Err(format!("{} vs {} manifests", a.len(), b.len()));
    }
    for ((pa, ma), (pb, mb)) in a.iter().zip(&b) {
        if pa != pb || ma != mb {
            return Err(format!("{} differs", pa.display()));
        }
    }
    let top = Manifest::read(&dirs[0].path().join("out/manifest.json")).map_err(|e| e.to_string())?;
    if top.threads != 1 {
        return Err(format!("manifest records {} threads", top.threads));
    }
    Ok(format!("{} manifests identical", a.len()))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: u32, title: &str, r: Result<String, String>| match r {
        Ok(s) => println!("criterion {id:>2} {title} ... PASS ({s})"),
        Err(s) => {
            failed += 1;
            println!("criterion {id:>2} {title} ... FAIL ({s})");
        }
    };
    for c in CRITERIA {
        report(c.id, c.title, check(c));
    }
    report(11, "cli determinism", determinism());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
