//! Experiment configuration, runs and their on-disk artifacts.
//!
//! A run directory holds `config.toml` (the resolved config), one CSV per
//! table, an optional `plot_<kind>.csv` in long format, and `manifest.json`
//! listing every other file with its SHA-256. CSV bytes depend only on the
//! config, the crate version and the seed; the manifest also carries
//! wall-clock timestamps.
//!
//! Randomness comes from `master_seed` through [`derive_seed`]: purpose
//! `"init"` for initial samples, `"noise"` for the Brownian driver, and the
//! purposes documented on each experiment for anything further.
//!
//! [`derive_seed`]: crate::noise::derive_seed

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod config;
mod experiments;
mod output;

pub use config::{
    CoefficientSpec, ControlSpec, DomainSpec, Experiment, ExperimentConfig, FieldSpec, GridSpec, InitSpec, LdpSpec,
    ParticleSpec, PicardSpec, Resolved, TargetSpec,
};
pub use output::{sha256_hex, Artifact, Table};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "MVREFLECT_WORKERS";

/// An invariant evaluated on the run's results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub(crate) fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// What a finished run left behind; serialized as `manifest.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: Experiment,
    /// SHA-256 of the resolved config without its output directory.
    pub config_hash: String,
    pub master_seed: u64,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
    #[serde(skip)]
    pub dir: PathBuf,
    #[serde(skip)]
    pub tables: BTreeMap<String, Table>,
}

impl RunRecord {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn artifact(&self, file: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.file == file)
    }

    pub fn load_manifest(dir: &Path) -> Result<RunRecord> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut r: RunRecord = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        r.dir = dir.to_path_buf();
        Ok(r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Chaos,
    Ldp,
    Paths,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Chaos => "chaos",
            PlotKind::Ldp => "ldp",
            PlotKind::Paths => "paths",
        }
    }

    fn source(self) -> &'static str {
        match self {
            PlotKind::Chaos => "chaos",
            PlotKind::Ldp => "rare_event",
            PlotKind::Paths => "paths",
        }
    }

    fn for_experiment(e: Experiment) -> Option<PlotKind> {
        match e {
            Experiment::Simulate => Some(PlotKind::Paths),
            Experiment::Chaos => Some(PlotKind::Chaos),
            Experiment::LdpRareEvent => Some(PlotKind::Ldp),
            _ => None,
        }
    }
}

/// Reads the worker count from [`WORKERS_ENV`], if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{WORKERS_ENV}={s:?} is not a positive integer"))),
        },
    }
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Validates `config`, runs its experiment, and writes the run directory.
///
/// `config.experiment` must be set. The output directory defaults to
/// `out/<experiment>`. Nothing is written if validation fails. A failed
/// invariant does not make this an error; see [`RunRecord::passed`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord> {
    let experiment = config
        .experiment
        .ok_or_else(|| Error::Config("no experiment selected".into()))?;
    let resolved = config.resolve()?;
    let workers = workers_from_env()?;
    let dir = config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(experiment.name()));
    let canonical = ExperimentConfig {
        output_dir: None,
        ..config.clone()
    }
    .to_toml();
    let started_unix = now_unix();

    let work = || experiments::dispatch(experiment, config, &resolved);
    let (tables, checks) = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut record = RunRecord {
        experiment,
        config_hash: sha256_hex(canonical.as_bytes()),
        master_seed: config.master_seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix,
        finished_unix: 0,
        checks,
        artifacts: Vec::new(),
        dir: dir.clone(),
        tables,
    };
    record.artifacts.push(output::write_file(&dir, "config.toml", canonical.as_bytes())?);
    for (name, table) in &record.tables {
        let a = output::write_file(&dir, &format!("{name}.csv"), &table.to_csv())?;
        record.artifacts.push(a);
    }
    if let Some(kind) = PlotKind::for_experiment(experiment) {
        let a = emit_plot_data(&record, kind)?;
        record.artifacts.push(a);
    }
    record.finished_unix = now_unix();
    let manifest = serde_json::to_vec_pretty(&record).expect("record serializes");
    output::write_file(&dir, "manifest.json", &manifest)?;
    Ok(record)
}

/// Writes `plot_<kind>.csv` into the run directory in long format with
/// columns `series, x, y, y_err, y_low, y_high` (blank where not defined).
///
/// * `paths`: one series per particle, `x = t`, `y` the first coordinate,
///   one row per step (the state reached at the end of the step).
/// * `chaos`: series `chaos`, `x = n`, `y` the mean squared distance,
///   `y_err` its standard error.
/// * `ldp`: series `exponent`, `x = ε`, `y = −ε ln p̂`, with the exact
///   binomial interval mapped to the same scale; rows with no hits use series
///   `exponent_lower_bound` and the one-sided bound as `y`.
pub fn emit_plot_data(run: &RunRecord, kind: PlotKind) -> Result<Artifact> {
    let src = run
        .tables
        .get(kind.source())
        .ok_or_else(|| Error::MissingTable(kind.source().into()))?;
    let col = |name: &str| src.column(name).ok_or_else(|| Error::MissingTable(format!("{}.{name}", kind.source())));
    let mut out = Table::new(&["series", "x", "y", "y_err", "y_low", "y_high"]);
    match kind {
        PlotKind::Paths => {
            let (p, s, t, x) = (col("particle")?, col("step")?, col("t")?, col("x1")?);
            for r in src.rows.iter().filter(|r| r[s] != "0") {
                out.push(vec![r[p].clone(), r[t].clone(), r[x].clone(), String::new(), String::new(), String::new()]);
            }
        }
        PlotKind::Chaos => {
            let (n, m, e) = (col("n")?, col("mean_sq_dist")?, col("stderr")?);
            for r in &src.rows {
                out.push(vec!["chaos".into(), r[n].clone(), r[m].clone(), r[e].clone(), String::new(), String::new()]);
            }
        }
        PlotKind::Ldp => {
            let (eps, ex, lo, hi, lb) = (
                col("epsilon")?,
                col("exponent")?,
                col("ci_low")?,
                col("ci_high")?,
                col("exponent_lower_bound")?,
            );
            for r in &src.rows {
                let e: f64 = r[eps].parse().map_err(|_| Error::MissingTable("rare_event.epsilon".into()))?;
                let scaled = |p: &str| -> String {
                    p.parse::<f64>().map(|p| output::num(-e * p.ln() + 0.0)).unwrap_or_default()
                };
                if r[ex].is_empty() {
                    out.push(vec![
                        "exponent_lower_bound".into(),
                        r[eps].clone(),
                        r[lb].clone(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ]);
                } else {
                    out.push(vec!["exponent".into(), r[eps].clone(), r[ex].clone(), String::new(), scaled(&r[hi]), scaled(&r[lo])]);
                }
            }
        }
    }
    output::write_file(&run.dir, &format!("plot_{}.csv", kind.name()), &out.to_csv())
}
