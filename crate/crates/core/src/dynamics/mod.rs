//! Particle samplers: mirror MFLD, the projected baseline and plain MFLD.

mod projection;
mod rng;

use std::time::Instant;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use projection::{clip_box, project_simplex, project_simplex_in_place};
pub use rng::{Purpose, RngLineage, StreamKey, STREAM_PROTOCOL};

use crate::error::{Error, Result};
use crate::geometry::{Domain, MirrorMap};
use crate::objectives::{EnsembleStats, MeanFieldObjective};

/// `N` particles stored as rows of ambient coordinates.
///
/// For the simplex the pinned last coordinate is kept explicitly rather than
/// recomputed as `1 − Σx_i`, which would lose everything below `1e-16`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    ambient_dim: usize,
    points: Vec<f64>,
    iteration: u64,
    lineage: RngLineage,
}

impl ParticleEnsemble {
    pub fn from_ambient(ambient_dim: usize, points: Vec<f64>, lineage: RngLineage) -> Result<Self> {
        if ambient_dim == 0 || points.is_empty() || points.len() % ambient_dim != 0 {
            return Err(Error::InvalidInput(format!(
                "{} coordinates do not form rows of length {ambient_dim}",
                points.len()
            )));
        }
        Ok(Self {
            ambient_dim,
            points,
            iteration: 0,
            lineage,
        })
    }

    /// Builds an ensemble from intrinsic rows, validating interiority.
    pub fn from_intrinsic(map: &MirrorMap, rows: &[Vec<f64>], lineage: RngLineage) -> Result<Self> {
        let mut points = Vec::with_capacity(rows.len() * map.ambient_dim());
        for row in rows {
            points.extend(map.embed(row)?);
        }
        Self::from_ambient(map.ambient_dim(), points, lineage)
    }

    /// `n` draws from the uniform law on the domain (standard normal on `ℝ^d`),
    /// using the `Init` streams of `seed`.
    pub fn sample_uniform(domain: &Domain, n: usize, seed: u64) -> Result<Self> {
        let d = domain.ambient_dim();
        let lineage = RngLineage::new(seed);
        let key = lineage.key(Purpose::Init);
        let mut points = vec![0.0; n * d];
        points
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(i, row)| {
                let mut rng = key.stream(i as u64, 0);
                match domain {
                    Domain::Simplex { .. } => {
                        for v in row.iter_mut() {
                            *v = rng.sample::<f64, _>(Exp1);
                        }
                        let s: f64 = row.iter().sum();
                        row.iter_mut().for_each(|v| *v /= s);
                    }
                    Domain::Box { bounds } => {
                        for (v, (a, b)) in row.iter_mut().zip(bounds) {
                            let u: f64 = rng.random();
                            *v = a + (b - a) * u;
                        }
                    }
                    Domain::Euclidean { .. } => {
                        for v in row.iter_mut() {
                            *v = rng.sample(StandardNormal);
                        }
                    }
                }
            });
        Self::from_ambient(d, points, lineage)
    }

    /// `n` copies of one ambient point.
    pub fn constant(point: &[f64], n: usize, seed: u64) -> Result<Self> {
        let points = point.iter().copied().cycle().take(point.len() * n).collect();
        Self::from_ambient(point.len(), points, RngLineage::new(seed))
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.ambient_dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn lineage(&self) -> &RngLineage {
        &self.lineage
    }

    /// Flat row-major `N × ambient_dim` buffer.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.points[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.ambient_dim)
    }

    /// Intrinsic coordinates of particle `i`.
    pub fn intrinsic(&self, map: &MirrorMap, i: usize) -> Vec<f64> {
        self.row(i)[..map.dim()].to_vec()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Mmfld,
    ProjectedMfld,
    Mfld,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mmfld => "mmfld",
            Self::ProjectedMfld => "projected-mfld",
            Self::Mfld => "mfld",
        }
    }
}

/// Adaptive sub-windows for particles whose forward step is under-resolved.
///
/// A particle whose drift would move its dual point by more than
/// `max_dual_move` in one coordinate, or whose per-coordinate noise standard
/// deviation would exceed it, splits its window `η` into successive forward
/// sub-windows (drift with the same frozen statistics, then the diffusion).
/// Resolved particles take a single window, i.e. exactly one forward step.
/// Each face distance is also kept above the interior margin by mirroring its
/// logarithm, which only matters for excursions far below `f64` resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepControl {
    pub enabled: bool,
    pub max_dual_move: f64,
    /// Hard cap on sub-windows per particle and iteration.
    pub max_windows: u64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            enabled: true,
            max_dual_move: 0.5,
            max_windows: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub eta: f64,
    pub lambda: f64,
    /// Euler–Maruyama substeps per (sub-)window.
    pub substeps: u32,
    pub steps: u64,
    pub step_control: StepControl,
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind, eta: f64, lambda: f64, steps: u64) -> Self {
        Self {
            kind,
            eta,
            lambda,
            substeps: 1,
            steps,
            step_control: StepControl::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::InvalidInput(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidInput(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidInput("substeps must be >= 1".into()));
        }
        let c = self.step_control;
        if c.enabled && !(c.max_dual_move > 0.0 && c.max_dual_move.is_finite() && c.max_windows > 0) {
            return Err(Error::InvalidInput("step control needs positive limits".into()));
        }
        Ok(())
    }
}

/// Work done by one step, summed over particles.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    /// Euler–Maruyama increments drawn (equals `N·K` when every particle is resolved).
    pub substeps: u64,
    pub reflections: u64,
}

impl std::ops::Add for StepReport {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            substeps: self.substeps + o.substeps,
            reflections: self.reflections + o.reflections,
        }
    }
}

/// Per-iteration diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: u64,
    pub f_value: f64,
    pub boundary_fraction: f64,
    pub mean: Vec<f64>,
    pub min_coord: f64,
    pub max_coord: f64,
    pub substeps: u64,
    pub reflections: u64,
    pub wall_ms: f64,
}

impl MetricsRow {
    pub fn observe(
        ensemble: &ParticleEnsemble,
        domain: &Domain,
        obj: &MeanFieldObjective,
        stats: &EnsembleStats,
        boundary_epsilon: f64,
    ) -> Self {
        let (min_coord, max_coord) = ensemble
            .points()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        Self {
            iteration: ensemble.iteration(),
            f_value: obj.value(stats),
            boundary_fraction: boundary_fraction(ensemble, domain, boundary_epsilon),
            mean: stats.mean.clone(),
            min_coord,
            max_coord,
            substeps: 0,
            reflections: 0,
            wall_ms: 0.0,
        }
    }
}

/// Share of particles closer than `eps` to a face.
pub fn boundary_fraction(ensemble: &ParticleEnsemble, domain: &Domain, eps: f64) -> f64 {
    let near = ensemble
        .rows()
        .filter(|x| domain.boundary_distance(x) < eps)
        .count();
    near as f64 / ensemble.len() as f64
}

/// Fixed-`K` Euler–Maruyama simulation of `dY = √(2λ ∇²φ(∇φ*(Y))) dB` over
/// a window `η`, with increments supplied by `noise`.
pub fn inner_diffusion_with(
    y0: &[f64],
    map: &MirrorMap,
    lambda: f64,
    eta: f64,
    substeps: u32,
    mut noise: impl FnMut(&mut [f64]),
) -> Result<Vec<f64>> {
    if substeps == 0 {
        return Err(Error::InvalidInput("substeps must be >= 1".into()));
    }
    let mut y = y0.to_vec();
    if lambda == 0.0 || eta == 0.0 {
        return Ok(y);
    }
    let mut ws = Workspace::new(map);
    let h = eta / f64::from(substeps);
    for _ in 0..substeps {
        map.backward_ambient(&y, &mut ws.x);
        map.factor_ambient(&ws.x, 2.0 * lambda * h, &mut ws.l, &mut ws.work)?;
        noise(&mut ws.xi);
        ws.add_factor_times_xi(&mut y);
    }
    Ok(y)
}

/// [`inner_diffusion_with`] driven by standard normals from `rng`.
pub fn inner_diffusion(
    y0: &[f64],
    map: &MirrorMap,
    lambda: f64,
    eta: f64,
    substeps: u32,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    inner_diffusion_with(y0, map, lambda, eta, substeps, |xi| {
        xi.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
    })
}

struct Workspace {
    m: usize,
    y: Vec<f64>,
    x: Vec<f64>,
    g_amb: Vec<f64>,
    g: Vec<f64>,
    l: Vec<f64>,
    work: Vec<f64>,
    xi: Vec<f64>,
}

impl Workspace {
    fn new(map: &MirrorMap) -> Self {
        let m = map.dim();
        let d = map.ambient_dim();
        Self {
            m,
            y: vec![0.0; m],
            x: vec![0.0; d],
            g_amb: vec![0.0; d],
            g: vec![0.0; m],
            l: vec![0.0; m * m],
            work: vec![0.0; m.max(d)],
            xi: vec![0.0; m],
        }
    }

    fn add_factor_times_xi(&self, y: &mut [f64]) {
        let m = self.m;
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.l[i * m..i * m + i + 1];
            *yi += row.iter().zip(&self.xi).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// One iteration of discretized MMFLD over the whole ensemble.
///
/// Statistics are taken once from the frozen ensemble; every particle then
/// takes the dual drift step `y = ∇φ(x) − η ∇δF/δμ(x)`, simulates the mirror
/// diffusion over the window and maps back with `∇φ*`.
pub fn mmfld_step(
    ensemble: &mut ParticleEnsemble,
    map: &MirrorMap,
    obj: &MeanFieldObjective,
    stats: &EnsembleStats,
    cfg: &SamplerConfig,
) -> Result<StepReport> {
    let d = ensemble.ambient_dim();
    if d != map.ambient_dim() {
        return Err(Error::InvalidInput("ensemble and mirror map dimensions differ".into()));
    }
    let key = ensemble.lineage.key(Purpose::Step);
    let k = ensemble.iteration;
    let report = ensemble
        .points
        .par_chunks_mut(d)
        .enumerate()
        .map_init(
            || Workspace::new(map),
            |ws, (i, x)| {
                if !map.is_strictly_interior(x) {
                    return Err(Error::DomainViolation(format!(
                        "particle {i} is not strictly interior: {x:?}"
                    )));
                }
                let mut rng = key.stream(i as u64, k);
                advance_mirror(map, obj, stats, cfg, x, ws, &mut rng)
                    .map_err(|e| annotate_particle(e, i))
            },
        )
        .try_reduce(StepReport::default, |a, b| Ok(a + b))?;
    ensemble.iteration += 1;
    Ok(report)
}

fn annotate_particle(e: Error, i: usize) -> Error {
    match e {
        Error::DomainViolation(m) => Error::DomainViolation(format!("particle {i}: {m}")),
        Error::Factorization(m) => Error::Factorization(format!("particle {i}: {m}")),
        other => other,
    }
}

fn advance_mirror(
    map: &MirrorMap,
    obj: &MeanFieldObjective,
    stats: &EnsembleStats,
    cfg: &SamplerConfig,
    x: &mut [f64],
    ws: &mut Workspace,
    rng: &mut impl Rng,
) -> Result<StepReport> {
    let mut report = StepReport::default();
    let control = cfg.step_control;
    let floor = map.interior_margin();
    let k = f64::from(cfg.substeps);
    let mut y = std::mem::take(&mut ws.y);
    map.forward_ambient(x, &mut y);
    ws.x.copy_from_slice(x);

    let mut remaining = cfg.eta;
    let mut windows = 0u64;
    while remaining > 0.0 {
        obj.first_variation_grad_ambient(&ws.x, stats, &mut ws.g_amb);
        map.pullback_ambient(&ws.g_amb, &mut ws.g);
        let mut h = remaining;
        if control.enabled {
            let c = control.max_dual_move;
            let gmax = ws.g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if gmax * h > c {
                h = c / gmax;
            }
            let spread = 2.0 * cfg.lambda * map.hessian_diag_max(&ws.x);
            if spread * h > c * c {
                h = c * c / spread;
            }
            // Swallow a sliver rather than leave it for another window.
            if remaining - h <= 1e-9 * cfg.eta {
                h = remaining;
            }
            windows += 1;
            if windows > control.max_windows {
                ws.y = y;
                return Err(Error::DomainViolation(format!(
                    "step control exceeded {} sub-windows",
                    control.max_windows
                )));
            }
        }
        for (yi, gi) in y.iter_mut().zip(&ws.g) {
            *yi -= h * gi;
        }
        if cfg.lambda > 0.0 {
            let scale = 2.0 * cfg.lambda * h / k;
            for _ in 0..cfg.substeps {
                map.backward_ambient(&y, &mut ws.x);
                if let Err(e) = map.factor_ambient(&ws.x, scale, &mut ws.l, &mut ws.work) {
                    ws.y = y;
                    return Err(e);
                }
                for v in ws.xi.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                ws.add_factor_times_xi(&mut y);
                report.substeps += 1;
                if control.enabled && map.reflect_dual(&mut y, floor) {
                    report.reflections += 1;
                }
            }
        } else if control.enabled && map.reflect_dual(&mut y, floor) {
            report.reflections += 1;
        }
        map.backward_ambient(&y, &mut ws.x);
        remaining -= h;
        if !control.enabled {
            break;
        }
    }
    ws.y = y;
    if !map.is_strictly_interior(&ws.x) {
        return Err(Error::DomainViolation(format!(
            "iterate left the open domain: {:?}",
            ws.x
        )));
    }
    x.copy_from_slice(&ws.x);
    Ok(report)
}

/// One iteration of Euclidean MFLD, `x ← x − η∇δF/δμ(x) + √(2λη) ξ`, in
/// ambient coordinates, followed by projection onto the domain (simplex
/// projection or box clipping; nothing on `ℝ^d`).
pub fn projected_mfld_step(
    ensemble: &mut ParticleEnsemble,
    domain: &Domain,
    obj: &MeanFieldObjective,
    stats: &EnsembleStats,
    cfg: &SamplerConfig,
) -> Result<StepReport> {
    let d = ensemble.ambient_dim();
    if d != domain.ambient_dim() {
        return Err(Error::InvalidInput("ensemble and domain dimensions differ".into()));
    }
    let key = ensemble.lineage.key(Purpose::Step);
    let k = ensemble.iteration;
    let noise_scale = (2.0 * cfg.lambda * cfg.eta).sqrt();
    ensemble
        .points
        .par_chunks_mut(d)
        .enumerate()
        .for_each_init(
            || (vec![0.0; d], vec![0.0; d]),
            |(g, scratch), (i, x)| {
                let mut rng = key.stream(i as u64, k);
                obj.first_variation_grad_ambient(x, stats, g);
                for (xc, gc) in x.iter_mut().zip(g.iter()) {
                    let xi: f64 = rng.sample(StandardNormal);
                    *xc += -cfg.eta * gc + noise_scale * xi;
                }
                match domain {
                    Domain::Simplex { .. } => project_simplex_in_place(x, scratch),
                    Domain::Box { bounds } => clip_box(x, bounds),
                    Domain::Euclidean { .. } => {}
                }
            },
        );
    ensemble.iteration += 1;
    Ok(StepReport {
        substeps: ensemble.len() as u64,
        reflections: 0,
    })
}

/// Runs `cfg.steps` iterations, returning one diagnostics row per step
/// (state after the step) and passing each row to `observe`.
pub fn run_sampler(
    ensemble: &mut ParticleEnsemble,
    domain: &Domain,
    obj: &MeanFieldObjective,
    cfg: &SamplerConfig,
    boundary_epsilon: f64,
    mut observe: impl FnMut(&MetricsRow, &ParticleEnsemble, &EnsembleStats) -> Result<()>,
) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    obj.validate(domain)?;
    if ensemble.ambient_dim() != domain.ambient_dim() {
        return Err(Error::InvalidInput("ensemble and domain dimensions differ".into()));
    }
    let map = match (cfg.kind, domain.mirror_map()?) {
        (SamplerKind::Mmfld, None) => {
            return Err(Error::InvalidInput(
                "mmfld needs a constrained domain with a mirror map".into(),
            ))
        }
        (SamplerKind::Mfld, _) if !matches!(domain, Domain::Euclidean { .. }) => {
            return Err(Error::InvalidInput(
                "plain mfld runs on the euclidean domain; use projected-mfld".into(),
            ))
        }
        (_, map) => map,
    };
    let mut rows = Vec::with_capacity(cfg.steps as usize);
    let mut stats = obj.ensemble_stats(ensemble);
    let start = Instant::now();
    for _ in 0..cfg.steps {
        let iteration = ensemble.iteration();
        let report = match cfg.kind {
            SamplerKind::Mmfld => {
                let map = map.as_ref().expect("checked above");
                mmfld_step(ensemble, map, obj, &stats, cfg)
            }
            SamplerKind::ProjectedMfld | SamplerKind::Mfld => {
                projected_mfld_step(ensemble, domain, obj, &stats, cfg)
            }
        }
        .map_err(|e| Error::Step {
            iteration,
            source: Box::new(e),
        })?;
        stats = obj.ensemble_stats(ensemble);
        let mut row = MetricsRow::observe(ensemble, domain, obj, &stats, boundary_epsilon);
        row.substeps = report.substeps;
        row.reflections = report.reflections;
        row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        if !row.f_value.is_finite() {
            return Err(Error::Step {
                iteration,
                source: Box::new(Error::DomainViolation("objective became non-finite".into())),
            });
        }
        observe(&row, ensemble, &stats)?;
        rows.push(row);
    }
    Ok(rows)
}
