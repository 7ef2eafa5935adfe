use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{run_sampler, MetricsRow, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::harness::config::{InitSpec, RunConfig};
use crate::objectives::EnsembleStats;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PARTICLES_FILE: &str = "particles.csv";

pub fn artifact_version() -> String {
    format!("mmfld {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalState {
    pub iteration: u64,
    pub f_value: f64,
    pub boundary_fraction: f64,
    pub mean: Vec<f64>,
    /// Row-major ambient covariance.
    pub covariance: Vec<f64>,
    pub min_coord: f64,
    pub max_coord: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub sampler: String,
    pub seed: u64,
    pub particles: usize,
    pub steps: u64,
    pub rng_protocol: String,
    pub config: RunConfig,
    pub final_state: FinalState,
    pub total_substeps: u64,
    pub total_reflections: u64,
    pub runtime_ms: f64,
}

pub struct RunResult {
    /// Initial row, then one per cadence tick and the last iteration.
    pub rows: Vec<MetricsRow>,
    pub ensemble: ParticleEnsemble,
    pub summary: RunSummary,
}

/// Initial ensemble for a configuration.
pub fn initial_ensemble(config: &RunConfig) -> Result<ParticleEnsemble> {
    match &config.init {
        InitSpec::Uniform => {
            ParticleEnsemble::sample_uniform(&config.domain, config.particles(), config.seed)
        }
        InitSpec::Point { point } => ParticleEnsemble::constant(point, config.particles(), config.seed),
    }
}

/// Runs the configured sampler without touching the filesystem. `observe`
/// sees every iteration, not only cadence ticks.
pub fn simulate(
    config: &RunConfig,
    mut observe: impl FnMut(&MetricsRow, &ParticleEnsemble, &EnsembleStats) -> Result<()> + Send,
) -> Result<RunResult> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.sampler.workers)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    pool.install(|| simulate_inner(config, &mut observe))
}

fn simulate_inner(
    config: &RunConfig,
    observe: &mut impl FnMut(&MetricsRow, &ParticleEnsemble, &EnsembleStats) -> Result<()>,
) -> Result<RunResult> {
    let start = Instant::now();
    let objective = config.objective()?;
    let sampler = config.sampler_config();
    let eps = config.output.boundary_epsilon;
    let cadence = config.output.cadence;
    let steps = sampler.steps;

    let mut ensemble = initial_ensemble(config)?;
    let stats = objective.ensemble_stats(&ensemble);
    let first = MetricsRow::observe(&ensemble, &config.domain, &objective, &stats, eps);
    observe(&first, &ensemble, &stats)?;
    let mut rows = vec![first];
    let mut totals = (0u64, 0u64);
    let mut final_stats = stats;
    let outcome = run_sampler(
        &mut ensemble,
        &config.domain,
        &objective,
        &sampler,
        eps,
        |row, e, s| {
            totals.0 += row.substeps;
            totals.1 += row.reflections;
            if row.iteration % cadence == 0 || row.iteration == steps {
                rows.push(row.clone());
            }
            if row.iteration == steps {
                final_stats = s.clone();
            }
            observe(row, e, s)
        },
    );
    let last = rows.last().expect("initial row present").clone();
    let (status, error) = match &outcome {
        Ok(_) => ("ok".to_string(), None),
        Err(e) => ("failed".to_string(), Some(e.to_string())),
    };
    let summary = RunSummary {
        version: artifact_version(),
        status,
        error,
        sampler: sampler.kind.name().to_string(),
        seed: config.seed,
        particles: ensemble.len(),
        steps,
        rng_protocol: ensemble.lineage().protocol.clone(),
        config: config.clone(),
        final_state: FinalState {
            iteration: last.iteration,
            f_value: last.f_value,
            boundary_fraction: last.boundary_fraction,
            mean: final_stats.mean.clone(),
            covariance: covariance(&ensemble, &final_stats.mean),
            min_coord: last.min_coord,
            max_coord: last.max_coord,
        },
        total_substeps: totals.0,
        total_reflections: totals.1,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    outcome.map(|_| RunResult {
        rows,
        ensemble,
        summary,
    })
}

/// Ambient covariance of the particles around `mean`.
pub fn covariance(ensemble: &ParticleEnsemble, mean: &[f64]) -> Vec<f64> {
    let d = ensemble.ambient_dim();
    let mut cov = vec![0.0; d * d];
    for x in ensemble.rows() {
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] += (x[a] - mean[a]) * (x[b] - mean[b]);
            }
        }
    }
    let n = ensemble.len() as f64;
    cov.iter_mut().for_each(|v| *v /= n);
    cov
}

/// Runs and writes `metrics.csv`, `summary.json` and optionally
/// `particles.csv` into `config.output.dir`.
///
/// A sampler failure still produces the metrics so far and a summary whose
/// status is `failed`; an I/O failure leaves no summary behind.
pub fn run_experiment(config: &RunConfig) -> Result<RunSummary> {
    let dir = config.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let summary_path = dir.join(SUMMARY_FILE);
    if summary_path.exists() {
        std::fs::remove_file(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    }
    let d = config.domain.ambient_dim();
    let mut rows = Vec::new();
    let mut failure = None;
    let result = simulate(config, |row, _, _| {
        if row.iteration == 0
            || row.iteration % config.output.cadence == 0
            || row.iteration == config.sampler.steps
        {
            rows.push(row.clone());
        }
        Ok(())
    });
    let summary = match result {
        Ok(r) => {
            if config.output.dump_particles {
                write_particles(&dir.join(PARTICLES_FILE), &r.ensemble)?;
            }
            r.summary
        }
        Err(e) => {
            failure = Some(e);
            failed_summary(config, &rows, failure.as_ref().expect("just set"))
        }
    };
    write_metrics(&dir.join(METRICS_FILE), d, &rows)?;
    write_json(&summary_path, &summary)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

fn failed_summary(config: &RunConfig, rows: &[MetricsRow], error: &Error) -> RunSummary {
    let last = rows.last();
    RunSummary {
        version: artifact_version(),
        status: "failed".into(),
        error: Some(error.to_string()),
        sampler: config.sampler.kind.name().to_string(),
        seed: config.seed,
        particles: config.particles(),
        steps: config.sampler.steps,
        rng_protocol: crate::dynamics::STREAM_PROTOCOL.to_string(),
        config: config.clone(),
        final_state: FinalState {
            iteration: last.map_or(0, |r| r.iteration),
            f_value: last.map_or(f64::NAN, |r| r.f_value),
            boundary_fraction: last.map_or(f64::NAN, |r| r.boundary_fraction),
            mean: last.map(|r| r.mean.clone()).unwrap_or_default(),
            covariance: Vec::new(),
            min_coord: last.map_or(f64::NAN, |r| r.min_coord),
            max_coord: last.map_or(f64::NAN, |r| r.max_coord),
        },
        total_substeps: rows.iter().map(|r| r.substeps).sum(),
        total_reflections: rows.iter().map(|r| r.reflections).sum(),
        runtime_ms: 0.0,
    }
}

/// Column names of the metrics CSV for an ambient dimension `d`.
pub fn metrics_header(d: usize) -> Vec<String> {
    let mut h = vec!["iteration".into(), "f_value".into(), "boundary_fraction".into()];
    h.extend((0..d).map(|c| format!("mean_{c}")));
    h.extend(
        ["min_coord", "max_coord", "substeps", "reflections", "wall_ms"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

pub fn metrics_csv(d: usize, rows: &[MetricsRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(metrics_header(d))?;
    for r in rows {
        let mut rec = vec![r.iteration.to_string(), r.f_value.to_string(), r.boundary_fraction.to_string()];
        rec.extend(r.mean.iter().map(f64::to_string));
        rec.extend([
            r.min_coord.to_string(),
            r.max_coord.to_string(),
            r.substeps.to_string(),
            r.reflections.to_string(),
            format!("{:.3}", r.wall_ms),
        ]);
        w.write_record(rec)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv buffer: {e}")))
}

fn write_metrics(path: &Path, d: usize, rows: &[MetricsRow]) -> Result<()> {
    let bytes = metrics_csv(d, rows)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_particles(path: &Path, ensemble: &ParticleEnsemble) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    w.write_record((0..ensemble.ambient_dim()).map(|c| format!("x_{c}")))?;
    for x in ensemble.rows() {
        w.write_record(x.iter().map(f64::to_string))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a summary from a file or a run directory.
pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let path = &summary_path(path);
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// `summary.json` inside a run directory, or the path itself if it is a file.
pub fn summary_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(SUMMARY_FILE)
    } else {
        path.to_path_buf()
    }
}
