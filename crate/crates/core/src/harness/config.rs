//! Run configuration: TOML schema, validation and presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{SamplerConfig, SamplerKind, StepControl};
use crate::error::{ConfigIssue, Error, Result};
use crate::geometry::Domain;
use crate::objectives::{Dataset, MeanFieldObjective};
use crate::oracle;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub domain: Domain,
    pub objective: ObjectiveSpec,
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
    /// Directory relative paths (the dataset) are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    #[serde(alias = "linear")]
    LinearPotential { alpha: Vec<f64>, ref_lambda: f64 },
    #[serde(alias = "mean-match")]
    MeanMatchBarrier {
        q: Vec<f64>,
        #[serde(default)]
        beta: f64,
    },
    #[serde(alias = "mf-network")]
    MfNetworkRisk { dataset: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    pub eta: f64,
    pub lambda: f64,
    #[serde(default = "one")]
    pub substeps: u32,
    pub steps: u64,
    /// Particle count at paper scale.
    pub particles: usize,
    /// Smaller count used unless paper scale is requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub desk_particles: Option<usize>,
    /// Worker threads; 0 lets the pool decide.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub step_control: StepControl,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitSpec {
    /// Uniform on the simplex (normalised exponentials) or the box; standard normal on `ℝ^d`.
    #[default]
    Uniform,
    /// Every particle at one ambient point.
    Point { point: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Metrics row every `cadence` iterations (plus the first and last).
    pub cadence: u64,
    pub boundary_epsilon: f64,
    pub dump_particles: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs/default"),
            cadence: 1,
            boundary_epsilon: 1e-3,
            dump_particles: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSpec {
    pub resolution: usize,
    pub margin: f64,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            resolution: oracle::DEFAULT_RESOLUTION,
            margin: oracle::DEFAULT_MARGIN,
            damping: oracle::DEFAULT_DAMPING,
            tol: oracle::DEFAULT_TOL,
            max_iter: oracle::DEFAULT_MAX_ITER,
        }
    }
}

impl OracleSpec {
    pub fn settings(&self) -> oracle::SolverSettings {
        oracle::SolverSettings {
            damping: self.damping,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

const PRESETS: &[(&str, &str)] = &[
    ("figure1-beta0", include_str!("../../presets/figure1-beta0.toml")),
    ("figure1-beta1e-4", include_str!("../../presets/figure1-beta1e-4.toml")),
    ("dirichlet", include_str!("../../presets/dirichlet.toml")),
];

/// Names of the bundled presets.
pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let text = preset_text(name).ok_or_else(|| {
        Error::Config(vec![ConfigIssue {
            key: "preset".into(),
            message: format!(
                "unknown preset {name:?}; available: {}",
                preset_names().collect::<Vec<_>>().join(", ")
            ),
        }])
    })?;
    RunConfig::parse(text)
}

impl RunConfig {
    /// Parses and validates TOML text, reporting every problem found.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            Error::Config(vec![ConfigIssue {
                key: "config".into(),
                message: e.message().to_string(),
            }])
        })?;
        let mut issues = Vec::new();
        strip_unknown_keys(&mut table, "", &mut issues);
        let parsed: std::result::Result<RunConfig, _> = table.try_into();
        let config = match parsed {
            Ok(c) => Some(c),
            Err(e) => {
                issues.push(ConfigIssue {
                    key: "config".into(),
                    message: e.message().trim().to_string(),
                });
                None
            }
        };
        if let Some(config) = &config {
            config.check_ranges(&mut issues);
        }
        match config {
            Some(c) if issues.is_empty() => Ok(c),
            _ => Err(Error::Config(issues)),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf);
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    /// Particle count for this run.
    pub fn particles(&self) -> usize {
        self.sampler.desk_particles.unwrap_or(self.sampler.particles)
    }

    /// Drops the desk-scale override.
    pub fn paper_scale(&mut self) {
        self.sampler.desk_particles = None;
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            kind: self.sampler.kind,
            eta: self.sampler.eta,
            lambda: self.sampler.lambda,
            substeps: self.sampler.substeps,
            steps: self.sampler.steps,
            step_control: self.sampler.step_control,
        }
    }

    pub fn objective(&self) -> Result<MeanFieldObjective> {
        Ok(match &self.objective {
            ObjectiveSpec::LinearPotential { alpha, ref_lambda } => {
                MeanFieldObjective::LinearPotential {
                    alpha: alpha.clone(),
                    ref_lambda: *ref_lambda,
                }
            }
            ObjectiveSpec::MeanMatchBarrier { q, beta } => MeanFieldObjective::MeanMatch {
                q: q.clone(),
                beta: *beta,
            },
            ObjectiveSpec::MfNetworkRisk { dataset } => {
                let path = match &self.base_dir {
                    Some(base) if dataset.is_relative() => base.join(dataset),
                    _ => dataset.clone(),
                };
                MeanFieldObjective::MfNetwork {
                    dataset: Dataset::from_csv(&path)?,
                }
            }
        })
    }

    /// Range checks for configurations built or edited in code.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        self.check_ranges(&mut issues);
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(issues))
        }
    }

    fn check_ranges(&self, issues: &mut Vec<ConfigIssue>) {
        let mut issue = |key: &str, message: String| {
            issues.push(ConfigIssue {
                key: key.to_string(),
                message,
            })
        };
        match &self.domain {
            Domain::Simplex { dim } if *dim < 2 => {
                issue("domain.dim", format!("simplex needs at least 2 coordinates, got {dim}"))
            }
            Domain::Euclidean { dim } if *dim == 0 => issue("domain.dim", "must be >= 1".into()),
            Domain::Box { bounds } => {
                if bounds.is_empty() {
                    issue("domain.bounds", "needs at least one interval".into());
                }
                for (i, (a, b)) in bounds.iter().enumerate() {
                    if !(a.is_finite() && b.is_finite() && a < b) {
                        issue("domain.bounds", format!("interval {i} must satisfy a < b, got [{a}, {b}]"));
                    }
                }
            }
            _ => {}
        }
        let d = self.domain.ambient_dim();
        match &self.objective {
            ObjectiveSpec::LinearPotential { alpha, ref_lambda } => {
                if !matches!(self.domain, Domain::Simplex { .. }) {
                    issue("objective.kind", "linear-potential needs a simplex domain".into());
                }
                if alpha.len() != d || alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                    issue("objective.alpha", format!("needs {d} positive exponents"));
                }
                if !(*ref_lambda >= 0.0 && ref_lambda.is_finite()) {
                    issue("objective.ref_lambda", format!("must be >= 0, got {ref_lambda}"));
                }
            }
            ObjectiveSpec::MeanMatchBarrier { q, beta } => {
                if q.len() != d {
                    issue("objective.q", format!("needs {d} coordinates, got {}", q.len()));
                } else if matches!(self.domain, Domain::Simplex { .. })
                    && (q.iter().any(|v| !(*v > 0.0)) || (q.iter().sum::<f64>() - 1.0).abs() > 1e-9)
                {
                    issue("objective.q", "must be strictly inside the simplex".into());
                }
                if !(*beta >= 0.0 && beta.is_finite()) {
                    issue("objective.beta", format!("must be >= 0, got {beta}"));
                }
            }
            ObjectiveSpec::MfNetworkRisk { .. } => {
                if matches!(self.domain, Domain::Simplex { .. }) {
                    issue("objective.kind", "mf-network-risk needs a box or euclidean domain".into());
                }
            }
        }
        let s = &self.sampler;
        if !(s.eta > 0.0 && s.eta.is_finite()) {
            issue("sampler.eta", format!("must be > 0, got {}", s.eta));
        }
        if !(s.lambda >= 0.0 && s.lambda.is_finite()) {
            issue("sampler.lambda", format!("must be >= 0, got {}", s.lambda));
        }
        if s.substeps == 0 {
            issue("sampler.substeps", "must be >= 1".into());
        }
        if s.particles == 0 {
            issue("sampler.particles", "must be >= 1".into());
        }
        if s.desk_particles == Some(0) {
            issue("sampler.desk_particles", "must be >= 1".into());
        }
        let c = s.step_control;
        if !(c.max_dual_move > 0.0 && c.max_dual_move.is_finite()) {
            issue("sampler.step_control.max_dual_move", format!("must be > 0, got {}", c.max_dual_move));
        }
        if c.max_windows == 0 {
            issue("sampler.step_control.max_windows", "must be >= 1".into());
        }
        match (s.kind, &self.domain) {
            (SamplerKind::Mmfld, Domain::Euclidean { .. }) => {
                issue("sampler.kind", "mmfld needs a simplex or box domain".into())
            }
            (SamplerKind::Mfld, Domain::Simplex { .. } | Domain::Box { .. }) => issue(
                "sampler.kind",
                "mfld is unconstrained; use projected-mfld on a constrained domain".into(),
            ),
            _ => {}
        }
        if let InitSpec::Point { point } = &self.init {
            let inside = point.len() == d
                && match &self.domain {
                    Domain::Simplex { .. } => {
                        point.iter().all(|v| *v > 0.0) && (point.iter().sum::<f64>() - 1.0).abs() < 1e-9
                    }
                    Domain::Box { bounds } => {
                        point.iter().zip(bounds).all(|(v, (a, b))| v > a && v < b)
                    }
                    Domain::Euclidean { .. } => point.iter().all(|v| v.is_finite()),
                };
            if !inside {
                issue("init.point", "must be a strictly interior point of the domain".into());
            }
        }
        let o = &self.output;
        if o.cadence == 0 {
            issue("output.cadence", "must be >= 1".into());
        }
        if !(o.boundary_epsilon > 0.0) {
            issue("output.boundary_epsilon", format!("must be > 0, got {}", o.boundary_epsilon));
        }
        let r = &self.oracle;
        if r.resolution < 8 {
            issue("oracle.resolution", format!("must be >= 8, got {}", r.resolution));
        }
        if !(r.margin > 0.0 && r.margin < 1.0 / (3.0 * r.resolution.max(1) as f64)) {
            issue("oracle.margin", format!("must lie in (0, 1/(3·resolution)), got {}", r.margin));
        }
        if !(r.damping > 0.0 && r.damping <= 1.0) {
            issue("oracle.damping", format!("must lie in (0, 1], got {}", r.damping));
        }
        if !(r.tol > 0.0) {
            issue("oracle.tol", format!("must be > 0, got {}", r.tol));
        }
    }
}

fn allowed_keys(path: &str, table: &toml::Table) -> Option<&'static [&'static str]> {
    let kind = table.get("kind").and_then(|v| v.as_str());
    Some(match path {
        "" => &["seed", "domain", "objective", "sampler", "init", "output", "oracle"],
        "domain" => match kind {
            Some("simplex") | Some("euclidean") => &["kind", "dim"],
            Some("box") => &["kind", "bounds"],
            _ => &["kind", "dim", "bounds"],
        },
        "objective" => match kind {
            Some("linear-potential") | Some("linear") => &["kind", "alpha", "ref_lambda"],
            Some("mean-match-barrier") | Some("mean-match") => &["kind", "q", "beta"],
            Some("mf-network-risk") | Some("mf-network") => &["kind", "dataset"],
            _ => &["kind", "alpha", "ref_lambda", "q", "beta", "dataset"],
        },
        "sampler" => &[
            "kind",
            "eta",
            "lambda",
            "substeps",
            "steps",
            "particles",
            "desk_particles",
            "workers",
            "step_control",
        ],
        "sampler.step_control" => &["enabled", "max_dual_move", "max_windows"],
        "init" => match kind {
            Some("uniform") => &["kind"],
            _ => &["kind", "point"],
        },
        "output" => &["dir", "cadence", "boundary_epsilon", "dump_particles"],
        "oracle" => &["resolution", "margin", "damping", "tol", "max_iter"],
        _ => return None,
    })
}

fn strip_unknown_keys(table: &mut toml::Table, path: &str, issues: &mut Vec<ConfigIssue>) {
    let Some(allowed) = allowed_keys(path, table) else {
        return;
    };
    let unknown: Vec<String> = table
        .keys()
        .filter(|k| !allowed.contains(&k.as_str()))
        .cloned()
        .collect();
    for key in unknown {
        table.remove(&key);
        let full = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
        let hint = allowed
            .iter()
            .map(|a| (strsim::damerau_levenshtein(&key, a), *a))
            .filter(|(dist, a)| *dist <= 2.max(a.len() / 3))
            .min()
            .map(|(_, a)| format!("; did you mean \"{a}\"?"))
            .unwrap_or_default();
        issues.push(ConfigIssue {
            key: full,
            message: format!("unknown key{hint}"),
        });
    }
    for (key, value) in table.iter_mut() {
        if let toml::Value::Table(child) = value {
            let child_path = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
            strip_unknown_keys(child, &child_path, issues);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn issues(text: &str) -> Vec<ConfigIssue> {
        match RunConfig::parse(text) {
            Err(Error::Config(i)) => i,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn figure1_presets() {
        for (name, beta) in [("figure1-beta0", 0.0), ("figure1-beta1e-4", 1e-4)] {
            let mut c = preset(name).unwrap();
            assert_eq!(c.sampler.eta, 3e-3);
            assert_eq!(c.sampler.lambda, 0.1);
            assert_eq!(c.sampler.steps, 2000);
            assert_eq!(c.particles(), 10_000);
            c.paper_scale();
            assert_eq!(c.particles(), 50_000);
            assert_eq!(
                c.objective,
                ObjectiveSpec::MeanMatchBarrier {
                    q: vec![0.5, 0.3, 0.2],
                    beta
                }
            );
        }
        preset("dirichlet").unwrap();
        assert!(preset("figure2").is_err());
    }

    #[test]
    fn range_errors_name_the_key() {
        let text = preset_text("figure1-beta0").unwrap().replace("eta = 3e-3", "eta = -1.0");
        let found = issues(&text);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].key, "sampler.eta");
    }

    #[test]
    fn unknown_keys_get_suggestions_and_all_errors_are_reported() {
        let text = preset_text("figure1-beta0")
            .unwrap()
            .replace("lambda = 0.1", "lamda = 0.1")
            .replace("cadence = 1", "cadence = 0");
        let found = issues(&text);
        let lamda = found.iter().find(|i| i.key == "sampler.lamda").expect("lamda reported");
        assert!(lamda.message.contains("\"lambda\""), "{}", lamda.message);
        // the misspelling leaves lambda missing, which is also reported
        assert!(found.iter().any(|i| i.message.contains("lambda")));
        assert!(found.len() >= 2);

        let text = preset_text("figure1-beta0")
            .unwrap()
            .replace("cadence = 1", "cadence = 0")
            .replace("eta = 3e-3", "eta = 0.0");
        let keys: Vec<_> = issues(&text).into_iter().map(|i| i.key).collect();
        assert!(keys.contains(&"sampler.eta".to_string()));
        assert!(keys.contains(&"output.cadence".to_string()));
    }

    #[test]
    fn serialization_round_trip_is_idempotent() {
        for name in preset_names() {
            let c = preset(name).unwrap();
            let once = c.to_toml();
            let again = RunConfig::parse(&once).unwrap();
            assert_eq!(again, c);
            assert_eq!(again.to_toml(), once);
        }
    }

    #[test]
    fn kind_specific_keys() {
        let text = preset_text("figure1-beta0")
            .unwrap()
            .replace("beta = 0.0", "beta = 0.0\nalpha = [2.0, 2.0, 2.0]");
        let found = issues(&text);
        assert_eq!(found[0].key, "objective.alpha");
    }
}
