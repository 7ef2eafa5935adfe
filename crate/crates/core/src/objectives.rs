//! Mean-field objectives `F(μ)` with value and first-variation oracles.
//!
//! Every objective is evaluated through a handful of linear statistics of
//! the measure (its ambient mean, an averaged potential, network outputs).
//! Those statistics are accumulated as weighted sums, so the same code serves
//! particle ensembles (unit weights) and grid measures (quadrature weights).

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::geometry::{Domain, MirrorMap};

/// Smallest coordinate at which the log-barrier and log-potentials are
/// evaluated. Only reachable by the projected baseline, whose particles can
/// sit exactly on a face.
pub const LOG_FLOOR: f64 = 1e-12;

/// Particles per partial sum in [`MeanFieldObjective::ensemble_stats`]. Fixed,
/// so the floating-point result does not depend on how many workers run.
const STATS_CHUNK: usize = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Row-major `n × p` feature matrix.
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
    pub feature_dim: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<f64>, feature_dim: usize) -> Result<Self> {
        if feature_dim == 0 || labels.is_empty() || features.len() != labels.len() * feature_dim {
            return Err(Error::InvalidInput(format!(
                "dataset shape mismatch: {} feature values for {} labels of dimension {feature_dim}",
                features.len(),
                labels.len()
            )));
        }
        if features.iter().chain(&labels).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite values".into()));
        }
        Ok(Self {
            features,
            labels,
            feature_dim,
        })
    }

    /// Reads `features…, label` rows. A non-numeric first row is treated as a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(file);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut width = None;
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(str::parse::<f64>).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if line == 0 => continue,
                Err(e) => {
                    return Err(Error::InvalidInput(format!(
                        "{}: row {}: {e}",
                        path.display(),
                        line + 1
                    )))
                }
            };
            if values.len() < 2 || width.is_some_and(|w| w != values.len()) {
                return Err(Error::InvalidInput(format!(
                    "{}: row {} has {} columns",
                    path.display(),
                    line + 1,
                    values.len()
                )));
            }
            width = Some(values.len());
            let (label, feats) = values.split_last().expect("at least two columns");
            features.extend_from_slice(feats);
            labels.push(*label);
        }
        let width = width.ok_or_else(|| {
            Error::InvalidInput(format!("{}: dataset has no rows", path.display()))
        })?;
        Self::new(features, labels, width - 1)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.features[j * self.feature_dim..(j + 1) * self.feature_dim]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeanFieldObjective {
    /// `F(μ) = ∫ f dμ` with `f(x) = −λ_ref Σ_c (α_c − 1) log x_c` on the simplex,
    /// whose Gibbs measure at temperature `λ_ref` is Dirichlet(α).
    LinearPotential { alpha: Vec<f64>, ref_lambda: f64 },
    /// `F(μ) = ‖∫x dμ − q‖² + β ∫ Σ_c log(1/x_c) dμ`.
    MeanMatch { q: Vec<f64>, beta: f64 },
    /// Squared-loss risk of a mean-field network with `tanh(⟨w,z⟩ + b)` neurons.
    MfNetwork { dataset: Dataset },
}

/// Sufficient statistics of a measure for a given objective.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats {
    /// Ambient mean `∫ x dμ`.
    pub mean: Vec<f64>,
    /// `∫ f dμ` (linear) or `∫ Σ log(1/x_c) dμ` (mean-match); zero otherwise.
    pub potential: f64,
    /// `h_μ(z_j)` for every data point (network only).
    pub predictions: Vec<f64>,
}

impl MeanFieldObjective {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::LinearPotential { .. } => "linear-potential",
            Self::MeanMatch { .. } => "mean-match-barrier",
            Self::MfNetwork { .. } => "mf-network-risk",
        }
    }

    /// Checks parameters against the domain the objective will run on.
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        let d = domain.ambient_dim();
        match self {
            Self::LinearPotential { alpha, ref_lambda } => {
                if !matches!(domain, Domain::Simplex { .. }) {
                    return Err(Error::InvalidInput(
                        "linear potential is defined on the simplex".into(),
                    ));
                }
                if alpha.len() != d || alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return Err(Error::InvalidInput(format!(
                        "alpha must hold {d} positive exponents"
                    )));
                }
                if !(ref_lambda.is_finite() && *ref_lambda >= 0.0) {
                    return Err(Error::InvalidInput("reference lambda must be >= 0".into()));
                }
            }
            Self::MeanMatch { q, beta } => {
                if q.len() != d {
                    return Err(Error::InvalidInput(format!("q must have {d} coordinates")));
                }
                if matches!(domain, Domain::Simplex { .. })
                    && (q.iter().any(|v| !(*v > 0.0)) || (q.iter().sum::<f64>() - 1.0).abs() > 1e-9)
                {
                    return Err(Error::InvalidInput(
                        "q must be a strictly interior simplex point".into(),
                    ));
                }
                if !(beta.is_finite() && *beta >= 0.0) {
                    return Err(Error::InvalidInput("beta must be >= 0".into()));
                }
            }
            Self::MfNetwork { dataset } => {
                if matches!(domain, Domain::Simplex { .. }) || d != dataset.feature_dim + 1 {
                    return Err(Error::InvalidInput(format!(
                        "network parameters live in a box of dimension {} (features + bias)",
                        dataset.feature_dim + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Length of the flat accumulator used by [`Self::accumulate`].
    pub fn accumulator_len(&self, ambient_dim: usize) -> usize {
        ambient_dim
            + 1
            + match self {
                Self::MfNetwork { dataset } => dataset.len(),
                _ => 0,
            }
    }

    /// Adds `w ×` the contribution of one ambient point to `acc`.
    pub fn accumulate(&self, x: &[f64], w: f64, acc: &mut [f64]) {
        let d = x.len();
        for (a, v) in acc.iter_mut().zip(x) {
            *a += w * v;
        }
        match self {
            Self::LinearPotential { .. } => acc[d] += w * self.pointwise_potential(x),
            Self::MeanMatch { .. } => acc[d] += w * barrier_sum(x),
            Self::MfNetwork { dataset } => {
                for (j, a) in acc[d + 1..].iter_mut().enumerate() {
                    *a += w * neuron(x, dataset.row(j));
                }
            }
        }
    }

    /// Turns accumulated sums with total weight `total` into statistics.
    pub fn finalize(&self, acc: &[f64], ambient_dim: usize, total: f64) -> EnsembleStats {
        let inv = 1.0 / total;
        EnsembleStats {
            mean: acc[..ambient_dim].iter().map(|v| v * inv).collect(),
            potential: acc[ambient_dim] * inv,
            predictions: acc[ambient_dim + 1..].iter().map(|v| v * inv).collect(),
        }
    }

    /// Statistics of a weighted point set, summed sequentially.
    pub fn weighted_stats<'a>(
        &self,
        ambient_dim: usize,
        points: impl IntoIterator<Item = (&'a [f64], f64)>,
    ) -> EnsembleStats {
        let mut acc = vec![0.0; self.accumulator_len(ambient_dim)];
        let mut total = 0.0;
        for (x, w) in points {
            self.accumulate(x, w, &mut acc);
            total += w;
        }
        self.finalize(&acc, ambient_dim, total)
    }

    /// Statistics of the empirical measure of an ensemble. Partial sums over
    /// fixed-size chunks are combined in index order, so the result is
    /// bitwise independent of the number of worker threads.
    pub fn ensemble_stats(&self, ensemble: &ParticleEnsemble) -> EnsembleStats {
        let d = ensemble.ambient_dim();
        let len = self.accumulator_len(d);
        let partials: Vec<Vec<f64>> = ensemble
            .points()
            .par_chunks(STATS_CHUNK * d)
            .map(|chunk| {
                let mut acc = vec![0.0; len];
                for x in chunk.chunks_exact(d) {
                    self.accumulate(x, 1.0, &mut acc);
                }
                acc
            })
            .collect();
        let mut acc = vec![0.0; len];
        for p in &partials {
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v;
            }
        }
        self.finalize(&acc, d, ensemble.len() as f64)
    }

    /// `F(μ)` from the statistics of `μ`.
    pub fn value(&self, stats: &EnsembleStats) -> f64 {
        match self {
            Self::LinearPotential { .. } => stats.potential,
            Self::MeanMatch { q, beta } => {
                let gap: f64 = stats.mean.iter().zip(q).map(|(m, q)| (m - q) * (m - q)).sum();
                gap + beta * stats.potential
            }
            Self::MfNetwork { dataset } => {
                let n = dataset.len() as f64;
                stats
                    .predictions
                    .iter()
                    .zip(&dataset.labels)
                    .map(|(h, y)| 0.5 * (h - y) * (h - y))
                    .sum::<f64>()
                    / n
            }
        }
    }

    /// `δF(μ)/δμ(x)` at an ambient point, up to an additive constant.
    pub fn first_variation(&self, x: &[f64], stats: &EnsembleStats) -> f64 {
        match self {
            Self::LinearPotential { .. } => self.pointwise_potential(x),
            Self::MeanMatch { q, beta } => {
                let lin: f64 = stats
                    .mean
                    .iter()
                    .zip(q)
                    .zip(x)
                    .map(|((m, q), x)| 2.0 * (m - q) * x)
                    .sum();
                lin + beta * barrier_sum(x)
            }
            Self::MfNetwork { dataset } => {
                let n = dataset.len() as f64;
                (0..dataset.len())
                    .map(|j| (stats.predictions[j] - dataset.labels[j]) * neuron(x, dataset.row(j)))
                    .sum::<f64>()
                    / n
            }
        }
    }

    /// Ambient gradient of the first variation, written into `out`.
    pub fn first_variation_grad_ambient(&self, x: &[f64], stats: &EnsembleStats, out: &mut [f64]) {
        match self {
            Self::LinearPotential { alpha, ref_lambda } => {
                for ((o, a), x) in out.iter_mut().zip(alpha).zip(x) {
                    *o = -ref_lambda * (a - 1.0) / x.max(LOG_FLOOR);
                }
            }
            Self::MeanMatch { q, beta } => {
                for (((o, m), q), x) in out.iter_mut().zip(&stats.mean).zip(q).zip(x) {
                    *o = 2.0 * (m - q) - beta / x.max(LOG_FLOOR);
                }
            }
            Self::MfNetwork { dataset } => {
                let p = dataset.feature_dim;
                out.iter_mut().for_each(|v| *v = 0.0);
                let inv_n = 1.0 / dataset.len() as f64;
                for j in 0..dataset.len() {
                    let z = dataset.row(j);
                    let t = neuron(x, z);
                    let coef = (stats.predictions[j] - dataset.labels[j]) * (1.0 - t * t) * inv_n;
                    for (o, zk) in out[..p].iter_mut().zip(z) {
                        *o += coef * zk;
                    }
                    out[p] += coef;
                }
            }
        }
    }

    /// `∇(δF(μ)/δμ)(x)` in intrinsic coordinates for an intrinsic point `x`.
    pub fn first_variation_grad(
        &self,
        map: &MirrorMap,
        x: &[f64],
        stats: &EnsembleStats,
    ) -> Result<Vec<f64>> {
        let amb = map.embed(x)?;
        let mut g = vec![0.0; amb.len()];
        self.first_variation_grad_ambient(&amb, stats, &mut g);
        map.pullback(x, &g)
    }

    /// Max deviation between `N ∇_{x^i} F(μ_x)` (central differences of the
    /// lifted objective) and the analytic `∇ δF(μ_x)/δμ (x^i)`.
    pub fn lift_identity_check(
        &self,
        ensemble: &ParticleEnsemble,
        map: &MirrorMap,
        i: usize,
    ) -> Result<f64> {
        if ensemble.len() < 2 || i >= ensemble.len() {
            return Err(Error::InvalidInput(
                "lift identity needs N >= 2 and a valid particle index".into(),
            ));
        }
        let x = ensemble.intrinsic(map, i);
        let stats = self.ensemble_stats(ensemble);
        let analytic = self.first_variation_grad(map, &x, &stats)?;
        let lifted = self.lifted_gradient(ensemble, map, i)?;
        Ok(analytic
            .iter()
            .zip(&lifted)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// `N ∇_{x^i} F(μ_x)` by a central difference in intrinsic coordinates.
    pub fn lifted_gradient(
        &self,
        ensemble: &ParticleEnsemble,
        map: &MirrorMap,
        i: usize,
    ) -> Result<Vec<f64>> {
        let x = ensemble.intrinsic(map, i);
        let amb = map.embed(&x)?;
        let h = 1e-5 * map.boundary_distance(&amb).min(1.0);
        let n = ensemble.len() as f64;
        let mut probe = ensemble.clone();
        let mut out = Vec::with_capacity(x.len());
        for k in 0..x.len() {
            let mut eval = |delta: f64| -> Result<f64> {
                let mut xk = x.clone();
                xk[k] += delta;
                let a = map.embed(&xk)?;
                probe.row_mut(i).copy_from_slice(&a);
                Ok(self.value(&self.ensemble_stats(&probe)))
            };
            let plus = eval(h)?;
            let minus = eval(-h)?;
            out.push(n * (plus - minus) / (2.0 * h));
        }
        Ok(out)
    }

    fn pointwise_potential(&self, x: &[f64]) -> f64 {
        match self {
            Self::LinearPotential { alpha, ref_lambda } => {
                -ref_lambda
                    * alpha
                        .iter()
                        .zip(x)
                        .map(|(a, x)| (a - 1.0) * x.max(LOG_FLOOR).ln())
                        .sum::<f64>()
            }
            _ => 0.0,
        }
    }
}

fn barrier_sum(x: &[f64]) -> f64 {
    x.iter().map(|v| -v.max(LOG_FLOOR).ln()).sum()
}

/// `tanh(⟨w, z⟩ + b)` for `x = (w, b)`.
fn neuron(x: &[f64], z: &[f64]) -> f64 {
    let (b, w) = x.split_last().expect("network parameter has a bias");
    (w.iter().zip(z).map(|(w, z)| w * z).sum::<f64>() + b).tanh()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::RngLineage;

    fn mean_match(beta: f64) -> MeanFieldObjective {
        MeanFieldObjective::MeanMatch {
            q: vec![0.5, 0.3, 0.2],
            beta,
        }
    }

    fn ensemble(rows: &[&[f64]]) -> ParticleEnsemble {
        let d = rows[0].len();
        ParticleEnsemble::from_ambient(d, rows.concat(), RngLineage::new(0)).unwrap()
    }

    #[test]
    fn stats_examples() {
        let obj = mean_match(0.0);
        let bary = [1.0 / 3.0; 3];
        let e = ensemble(&[&bary, &bary, &bary]);
        let s = obj.ensemble_stats(&e);
        assert!(s.mean.iter().all(|m| (m - 1.0 / 3.0).abs() < 1e-15));

        let e = ensemble(&[&[0.5, 0.25, 0.25], &[0.25, 0.5, 0.25]]);
        let s = obj.ensemble_stats(&e);
        assert_eq!(s.mean, vec![0.375, 0.375, 0.25]);

        let data = Dataset::new(vec![0.3, -1.0, 2.0, 0.5], vec![0.1, 0.2], 2).unwrap();
        let net = MeanFieldObjective::MfNetwork { dataset: data };
        let e = ensemble(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
        assert_eq!(net.ensemble_stats(&e).predictions, vec![0.0, 0.0]);
    }

    #[test]
    fn value_examples() {
        let obj = mean_match(0.0);
        let e = ensemble(&[&[0.5, 0.3, 0.2], &[0.5, 0.3, 0.2]]);
        assert!(obj.value(&obj.ensemble_stats(&e)).abs() < 1e-15);

        let e = ensemble(&[&[0.4, 0.3, 0.3]]);
        assert!((obj.value(&obj.ensemble_stats(&e)) - 0.02).abs() < 1e-15);

        // predictions equal labels: a single neuron with w = 0, b = atanh(0.25)
        let b = 0.25f64.atanh();
        let data = Dataset::new(vec![1.0, -2.0], vec![0.25, 0.25], 1).unwrap();
        let net = MeanFieldObjective::MfNetwork { dataset: data };
        let e = ensemble(&[&[0.0, b]]);
        assert!(net.value(&net.ensemble_stats(&e)).abs() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let map = MirrorMap::simplex(3).unwrap();
        let obj = mean_match(0.0);
        let at_q = ensemble(&[&[0.5, 0.3, 0.2]]);
        let g = obj
            .first_variation_grad(&map, &[0.1, 0.6], &obj.ensemble_stats(&at_q))
            .unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));

        let off = ensemble(&[&[0.4, 0.3, 0.3]]);
        let stats = obj.ensemble_stats(&off);
        for x in [[0.2, 0.2], [0.05, 0.9], [0.6, 0.1]] {
            let g = obj.first_variation_grad(&map, &x, &stats).unwrap();
            assert!((g[0] + 0.4).abs() < 1e-14 && (g[1] + 0.2).abs() < 1e-14);
        }
        assert!(matches!(
            obj.first_variation_grad(&map, &[0.6, 0.4], &stats),
            Err(Error::DomainViolation(_))
        ));
    }

    #[test]
    fn first_variation_gradient_matches_its_value() {
        let map = MirrorMap::simplex(3).unwrap();
        let obj = mean_match(1e-2);
        let e = ensemble(&[&[0.2, 0.3, 0.5], &[0.6, 0.3, 0.1]]);
        let stats = obj.ensemble_stats(&e);
        let x = [0.25, 0.35];
        let g = obj.first_variation_grad(&map, &x, &stats).unwrap();
        let h = 1e-6;
        for k in 0..2 {
            let mut p = x;
            let mut m = x;
            p[k] += h;
            m[k] -= h;
            let fp = obj.first_variation(&map.embed(&p).unwrap(), &stats);
            let fm = obj.first_variation(&map.embed(&m).unwrap(), &stats);
            let fd = (fp - fm) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1e-3));
        }
    }

    #[test]
    fn network_outputs_are_bounded() {
        let data = Dataset::new(vec![50.0, -80.0, 1e3, 2.0], vec![0.0, 1.0], 2).unwrap();
        let net = MeanFieldObjective::MfNetwork { dataset: data };
        let e = ensemble(&[&[3.0, 3.0, 3.0], &[-3.0, 3.0, -3.0]]);
        assert!(net.ensemble_stats(&e).predictions.iter().all(|h| h.abs() <= 1.0));
    }

    #[test]
    fn two_point_ensembles_with_mean_q_minimize() {
        let obj = mean_match(0.0);
        let e = ensemble(&[&[0.7, 0.1, 0.2], &[0.3, 0.5, 0.2]]);
        assert!(obj.value(&obj.ensemble_stats(&e)) < 1e-30);
    }

    #[test]
    fn dataset_csv_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, "z1,z2,y\n0.5,1.0,0.2\n-1.0,0.0,0.7\n").unwrap();
        let d = Dataset::from_csv(&path).unwrap();
        assert_eq!(d.feature_dim, 2);
        assert_eq!(d.labels, vec![0.2, 0.7]);
        assert_eq!(d.row(1), &[-1.0, 0.0]);
        std::fs::write(&path, "0.5,1.0,0.2\n1.0,x,0.7\n").unwrap();
        assert!(Dataset::from_csv(&path).is_err());
    }
}
