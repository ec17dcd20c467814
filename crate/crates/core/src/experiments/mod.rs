//! Experiment configs, run manifests and reports behind the `tomolab`
//! binary.
//!
//! A config is a JSON document
//!
//! ```json
//! {"experiment": "fbp-roundtrip", "grid": {"n": 256}, "seed": 7,
//!  "output_dir": "out/fbp", "params": {"n_angles": 360}}
//! ```
//!
//! `grid` and `params` are optional; every experiment has its own defaults
//! and rejects unknown parameter keys. `output_dir` is resolved against
//! the directory holding the config file. Each run writes its outputs plus
//! `manifest.json` into that directory and nowhere else.

mod suites;

use crate::error::{Error, Result};
use crate::fields::{GridSpec, ScalarField};
use crate::io::{read_field, write_field, write_field_pgm, write_json, write_pgm, write_sinogram_csv};
use crate::xray::Sinogram;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub use suites::*;

/// Names accepted in the `experiment` field, in reproduce-all order.
pub const EXPERIMENTS: [&str; 11] = [
    "adjointness",
    "fbp-roundtrip",
    "normal-constant",
    "spectral-calculus",
    "ucp-rank",
    "poincare",
    "vector-gauge",
    "partial-data",
    "calderon",
    "geodesic",
    "reproduce-all",
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(default = "unit_extent")]
    pub extent: f64,
}

fn unit_extent() -> f64 {
    1.0
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(2, self.n, self.extent)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub params: Map<String, Value>,
}

/// A config whose experiment name, grid and parameters all validated.
#[derive(Clone, Debug)]
pub struct Validated {
    pub config: ExperimentConfig,
    pub grid: Option<GridSpec>,
    pub params: Params,
}

fn parse_params<T: serde::de::DeserializeOwned>(name: &str, params: &Map<String, Value>) -> Result<T> {
    serde_json::from_value(Value::Object(params.clone()))
        .map_err(|e| Error::Config(format!("parameters of '{name}': {e}")))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    /// Schema checks that run before anything is written.
    pub fn validate(&self) -> Result<Validated> {
        let name = self.experiment.as_str();
        let p = &self.params;
        let params = match name {
            "adjointness" => Params::Adjointness(parse_params(name, p)?),
            "fbp-roundtrip" => Params::FbpRoundtrip(parse_params(name, p)?),
            "normal-constant" => Params::NormalConstant(parse_params(name, p)?),
            "spectral-calculus" => Params::SpectralCalculus(parse_params(name, p)?),
            "ucp-rank" => Params::UcpRank(parse_params(name, p)?),
            "poincare" => Params::Poincare(parse_params(name, p)?),
            "vector-gauge" => Params::VectorGauge(parse_params(name, p)?),
            "partial-data" => Params::PartialData(parse_params(name, p)?),
            "calderon" => Params::Calderon(parse_params(name, p)?),
            "geodesic" => Params::Geodesic(parse_params(name, p)?),
            "reproduce-all" => {
                let r: ReproduceParams = parse_params(name, p)?;
                for e in &r.experiments {
                    if !EXPERIMENTS[..EXPERIMENTS.len() - 1].contains(&e.as_str()) {
                        return Err(Error::Config(format!("reproduce-all cannot run '{e}'")));
                    }
                }
                Params::ReproduceAll(r)
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown experiment '{other}' (expected one of {})",
                    EXPERIMENTS.join(", ")
                )))
            }
        };
        if self.grid.is_some() && name == "reproduce-all" {
            return Err(Error::Config("reproduce-all uses each experiment's default grid".into()));
        }
        let grid = match &self.grid {
            Some(g) => Some(g.spec().map_err(|e| Error::Config(format!("grid: {e}")))?),
            None => None,
        };
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::Config("output_dir is empty".into()));
        }
        Ok(Validated { config: self.clone(), grid, params })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
}

/// One checked bound. Non-finite values serialize as `null` and fail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub value: Option<f64>,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyMetric {
    pub name: String,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the manifest's directory.
    pub path: String,
    /// `field`, `sinogram`, `table` or `manifest`.
    pub kind: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChildSummary {
    pub experiment: String,
    pub dir: String,
    pub key_metric: KeyMetric,
    pub passed: bool,
}

/// Wall-clock facts; the only part of a manifest that varies between
/// identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub versions: BTreeMap<String, String>,
    /// SHA-256 of the config bytes.
    pub config_digest: String,
    pub seed: u64,
    pub threads: usize,
    pub grid: Option<GridConfig>,
    pub parameters: Value,
    pub key_metric: KeyMetric,
    pub metrics: BTreeMap<String, Option<f64>>,
    pub assertions: Vec<Assertion>,
    pub outputs: Vec<OutputFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<ChildSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub passed: bool,
    pub timing: Timing,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(Error::from)
    }

    pub fn failures(&self) -> Vec<&Assertion> {
        self.assertions.iter().filter(|a| !a.passed).collect()
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Collects metrics, assertions and output files while an experiment runs.
pub struct Recorder {
    dir: PathBuf,
    metrics: BTreeMap<String, Option<f64>>,
    assertions: Vec<Assertion>,
    outputs: Vec<OutputFile>,
    key: Option<KeyMetric>,
    children: Vec<ChildSummary>,
}

impl Recorder {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            metrics: BTreeMap::new(),
            assertions: Vec::new(),
            outputs: Vec::new(),
            key: None,
            children: Vec::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), finite(value));
    }

    /// Headline number of the run, also stored as a metric.
    pub fn key(&mut self, name: &str, value: f64) {
        self.metric(name, value);
        self.key = Some(KeyMetric { name: name.to_string(), value: finite(value) });
    }

    pub fn check(&mut self, name: &str, value: f64, relation: Relation, bound: f64) -> bool {
        let passed = value.is_finite()
            && match relation {
                Relation::Le => value <= bound,
                Relation::Lt => value < bound,
                Relation::Ge => value >= bound,
                Relation::Gt => value > bound,
                Relation::Eq => value == bound,
            };
        self.assertions.push(Assertion { name: name.to_string(), value: finite(value), relation, bound, passed });
        passed
    }

    pub fn le(&mut self, name: &str, value: f64, bound: f64) -> bool {
        self.check(name, value, Relation::Le, bound)
    }

    pub fn ge(&mut self, name: &str, value: f64, bound: f64) -> bool {
        self.check(name, value, Relation::Ge, bound)
    }

    pub fn gt(&mut self, name: &str, value: f64, bound: f64) -> bool {
        self.check(name, value, Relation::Gt, bound)
    }

    /// Boolean assertion stored as `1 == 1`.
    pub fn holds(&mut self, name: &str, ok: bool) -> bool {
        self.check(name, if ok { 1.0 } else { 0.0 }, Relation::Eq, 1.0)
    }

    pub fn field(&mut self, name: &str, f: &ScalarField) -> Result<()> {
        write_field(&self.dir.join(name), f)?;
        self.outputs.push(OutputFile { path: format!("{name}.f64"), kind: "field".into() });
        Ok(())
    }

    pub fn sinogram(&mut self, name: &str, g: &Sinogram, grid: &GridSpec) -> Result<()> {
        write_sinogram_csv(&self.dir.join(format!("{name}.csv")), g, Some(grid))?;
        self.outputs.push(OutputFile { path: format!("{name}.csv"), kind: "sinogram".into() });
        Ok(())
    }

    /// Registers a table written by `write` at `<dir>/<file>`.
    pub fn table(&mut self, file: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        write(&self.dir.join(file))?;
        self.outputs.push(OutputFile { path: file.to_string(), kind: "table".into() });
        Ok(())
    }

    fn child(&mut self, dir: &str, m: &Manifest) {
        self.outputs.push(OutputFile { path: format!("{dir}/manifest.json"), kind: "manifest".into() });
        self.children.push(ChildSummary {
            experiment: m.experiment.clone(),
            dir: dir.to_string(),
            key_metric: m.key_metric.clone(),
            passed: m.passed,
        });
    }
}

fn versions() -> BTreeMap<String, String> {
    let mut v = BTreeMap::new();
    v.insert("tomolab".to_string(), env!("CARGO_PKG_VERSION").to_string());
    v.insert("manifest".to_string(), "1".to_string());
    v
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads and validates a config file, resolving `output_dir` against the
/// config's directory. Every failure here is a schema error.
pub fn load(path: &Path) -> Result<(Validated, PathBuf, String)> {
    let bytes = fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::Config("config is not UTF-8".into()))?;
    let v = ExperimentConfig::from_json(text)?.validate()?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = base.join(&v.config.output_dir);
    Ok((v, out, digest(&bytes)))
}

/// Runs a config file. `Err` means the config was rejected before any
/// output was written; assertion failures and runtime errors come back as
/// a manifest with `passed = false`.
pub fn run_config(path: &Path) -> Result<Manifest> {
    let (v, out, dig) = load(path)?;
    fs::create_dir_all(&out)?;
    Ok(execute(&v, &out, &dig))
}

/// Runs a validated experiment into `dir` and writes its manifest.
pub fn execute(v: &Validated, dir: &Path, config_digest: &str) -> Manifest {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let clock = Instant::now();
    let mut rec = Recorder::new(dir);
    let seed = v.config.seed;
    let result = match &v.params {
        Params::ReproduceAll(p) => reproduce_all(&mut rec, seed, p),
        other => suites::dispatch(&mut rec, other, v.grid, seed),
    };
    let grid = match (v.grid, v.params.default_n()) {
        (Some(g), _) => Some(GridConfig { n: g.n(), extent: g.extent() }),
        (None, 0) => None,
        (None, n) => Some(GridConfig { n, extent: unit_extent() }),
    };
    let error = result.err().map(|e| e.to_string());
    let passed = error.is_none()
        && !rec.assertions.is_empty()
        && rec.assertions.iter().all(|a| a.passed)
        && rec.children.iter().all(|c| c.passed);
    let manifest = Manifest {
        experiment: v.config.experiment.clone(),
        versions: versions(),
        config_digest: config_digest.to_string(),
        seed,
        threads: rayon::current_num_threads(),
        grid,
        parameters: v.params.to_value(),
        key_metric: rec.key.clone().unwrap_or(KeyMetric { name: "none".into(), value: None }),
        metrics: rec.metrics.clone(),
        assertions: rec.assertions.clone(),
        outputs: rec.outputs.clone(),
        children: rec.children.clone(),
        error,
        passed,
        timing: Timing { started_unix: started, wall_time_s: clock.elapsed().as_secs_f64() },
    };
    let _ = write_json(&dir.join("manifest.json"), &manifest);
    manifest
}

fn reproduce_all(rec: &mut Recorder, seed: u64, p: &ReproduceParams) -> Result<()> {
    let names: Vec<String> = if p.experiments.is_empty() {
        EXPERIMENTS[..EXPERIMENTS.len() - 1].iter().map(|s| s.to_string()).collect()
    } else {
        p.experiments.clone()
    };
    let mut passed = 0;
    for name in &names {
        let cfg = ExperimentConfig {
            experiment: name.clone(),
            grid: None,
            seed,
            output_dir: PathBuf::from(name),
            params: Map::new(),
        };
        let v = cfg.validate()?;
        let sub = rec.dir().join(name);
        fs::create_dir_all(&sub)?;
        let child_digest = digest(serde_json::to_string(&cfg)?.as_bytes());
        let m = execute(&v, &sub, &child_digest);
        if m.passed {
            passed += 1;
        }
        rec.child(name, &m);
    }
    rec.key("experiments_passed", passed as f64);
    rec.check("all_experiments_pass", passed as f64, Relation::Eq, names.len() as f64);
    Ok(())
}

/// Summary row of one manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub metric: String,
    pub value: Option<f64>,
    pub passed: bool,
}

/// Files written by [`report`].
#[derive(Clone, Debug)]
pub struct ReportOutput {
    pub summary: PathBuf,
    pub rows: Vec<SummaryRow>,
    pub plots: Vec<PathBuf>,
}

fn find_manifests(dir: &Path, skip: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            if p != skip {
                find_manifests(&p, skip, out)?;
            }
        } else if p.file_name().is_some_and(|n| n == "manifest.json") {
            out.push(p);
        }
    }
    Ok(())
}

/// Parses a sinogram CSV written by the experiments into
/// `(n_angles, n_offsets, values)`.
fn read_sinogram_table(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let width = lines.next().map(|h| h.split(',').count()).unwrap_or(0);
    let mut values = Vec::new();
    let mut rows = 0;
    for l in lines.filter(|l| !l.is_empty()) {
        let row: Vec<f64> = l
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::InvalidData(format!("bad entry '{t}'"))))
            .collect::<Result<_>>()?;
        if row.len() != width {
            return Err(Error::Shape(format!("{}: ragged sinogram row", path.display())));
        }
        values.extend(row);
        rows += 1;
    }
    Ok((rows, width, values))
}

/// Collects every `manifest.json` below `dir` (aggregate reproduce-all
/// manifests excluded), writes `report/summary.csv` and renders each field
/// and sinogram output as a 16-bit PGM under `report/`.
pub fn report(dir: &Path) -> Result<ReportOutput> {
    let report_dir = dir.join("report");
    let mut paths = Vec::new();
    if dir.is_dir() {
        find_manifests(dir, &report_dir, &mut paths)?;
    } else {
        return Err(Error::Config(format!("{} is not a directory", dir.display())));
    }
    let manifests: Vec<(PathBuf, Manifest)> = paths
        .into_iter()
        .map(|p| Manifest::read(&p).map(|m| (p, m)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|(_, m)| m.experiment != "reproduce-all")
        .collect();
    if manifests.is_empty() {
        return Err(Error::Config(format!("no experiment manifests under {}", dir.display())));
    }
    fs::create_dir_all(&report_dir)?;
    let mut rows = Vec::new();
    let mut plots = Vec::new();
    for (idx, (path, m)) in manifests.iter().enumerate() {
        rows.push(SummaryRow {
            experiment: m.experiment.clone(),
            metric: m.key_metric.name.clone(),
            value: m.key_metric.value,
            passed: m.passed,
        });
        let base = path.parent().unwrap_or(dir);
        for o in &m.outputs {
            let src = base.join(&o.path);
            let stem = Path::new(&o.path).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let target = report_dir.join(format!("{idx:02}-{}-{stem}.pgm", m.experiment));
            match o.kind.as_str() {
                "field" => {
                    let f = read_field(&src.with_extension(""))?;
                    if f.grid().dim() == 2 {
                        write_field_pgm(&target, &f)?;
                        plots.push(target);
                    }
                }
                "sinogram" => {
                    let (h, w, values) = read_sinogram_table(&src)?;
                    write_pgm(&target, &values, h, w, None)?;
                    plots.push(target);
                }
                _ => {}
            }
        }
    }
    let summary = report_dir.join("summary.csv");
    let mut text = String::from("experiment,metric,value,passed\n");
    for r in &rows {
        let v = r.value.map(|v| format!("{v:e}")).unwrap_or_else(|| "nan".into());
        text.push_str(&format!("{},{},{},{}\n", r.experiment, r.metric, v, r.passed));
    }
    fs::write(&summary, text)?;
    Ok(ReportOutput { summary, rows, plots })
}
