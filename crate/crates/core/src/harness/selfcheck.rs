//! Fast invariant suites behind `mmfld selfcheck`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{project_simplex, ParticleEnsemble, RngLineage};
use crate::error::Result;
use crate::geometry::MirrorMap;
use crate::harness::config::preset;
use crate::harness::run::{metrics_csv, simulate};
use crate::objectives::MeanFieldObjective;
use crate::theory;

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    /// Worst observed deviation.
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    fn new(name: &'static str, worst: f64, tolerance: f64) -> Self {
        Self {
            name,
            pass: worst <= tolerance,
            worst,
            tolerance,
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_simplex(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn random_box(rng: &mut ChaCha8Rng, bounds: &[(f64, f64)]) -> Vec<f64> {
    bounds
        .iter()
        .map(|(a, b)| a + (b - a) * rng.random_range(0.01..0.99))
        .collect()
}

/// Runs every suite with `samples` random points each.
pub fn run_all(samples: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let simplex = MirrorMap::simplex(3)?;
    let bounds = vec![(-1.0, 2.0), (0.0, 0.5)];
    let cube = MirrorMap::cube(bounds.clone())?;

    let (mut rt, mut dual_rt, mut inv) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        for (map, amb) in [
            (&simplex, random_simplex(&mut rng, 3)),
            (&cube, random_box(&mut rng, &bounds)),
        ] {
            let x = &amb[..map.dim()];
            let y = map.forward(x)?;
            rt = rt.max(max_abs_diff(&map.backward(&y)?, x));
            let y2: Vec<f64> = y.iter().map(|_| rng.random_range(-5.0..5.0)).collect();
            let x2 = map.backward(&y2)?;
            if map.embed(&x2).is_ok() {
                let rel = max_abs_diff(&map.forward(&x2)?, &y2) / (1.0 + y2.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                dual_rt = dual_rt.max(rel);
            }
            let m = map.dim();
            let mut h = vec![0.0; m * m];
            let mut hi = vec![0.0; m * m];
            let full = map.embed(x)?;
            map.hessian_ambient(&full, &mut h);
            map.inverse_hessian_ambient(&full, &mut hi);
            for i in 0..m {
                for j in 0..m {
                    let p: f64 = (0..m).map(|k| h[i * m + k] * hi[k * m + j]).sum();
                    let id = if i == j { 1.0 } else { 0.0 };
                    inv = inv.max((p - id).abs());
                }
            }
        }
    }
    out.push(CheckOutcome::new("mirror round trip", rt, 1e-10));
    out.push(CheckOutcome::new("dual round trip", dual_rt, 1e-8));
    out.push(CheckOutcome::new("hessian inverse", inv, 1e-4));

    let objectives = [
        MeanFieldObjective::LinearPotential {
            alpha: vec![2.0, 3.0, 1.5],
            ref_lambda: 0.1,
        },
        MeanFieldObjective::MeanMatch {
            q: vec![0.5, 0.3, 0.2],
            beta: 1e-4,
        },
    ];
    let mut lift = 0.0f64;
    for k in 0..samples.div_ceil(50).max(1) {
        let rows: Vec<Vec<f64>> = (0..4).map(|_| random_simplex(&mut rng, 3)[..2].to_vec()).collect();
        let ens = ParticleEnsemble::from_intrinsic(&simplex, &rows, RngLineage::new(k as u64))?;
        for obj in &objectives {
            for i in 0..ens.len() {
                let x = ens.intrinsic(&simplex, i);
                let stats = obj.ensemble_stats(&ens);
                let g = obj.first_variation_grad(&simplex, &x, &stats)?;
                let scale = 1.0 + g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                lift = lift.max(obj.lift_identity_check(&ens, &simplex, i)? / scale);
            }
        }
    }
    out.push(CheckOutcome::new("lifted gradient", lift, 1e-5));

    let mut proj = 0.0f64;
    for _ in 0..samples {
        let v: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let p = project_simplex(&v);
        let sum_err = (p.iter().sum::<f64>() - 1.0).abs();
        let neg = p.iter().fold(0.0f64, |m, x| m.max(-x));
        let idem = max_abs_diff(&project_simplex(&p), &p);
        proj = proj.max(sum_err).max(neg).max(idem);
    }
    out.push(CheckOutcome::new("simplex projection", proj, 1e-12));

    let mut cfg = preset("figure1-beta1e-4")?;
    cfg.sampler.desk_particles = Some(500);
    cfg.sampler.steps = 10;
    let mut csvs = Vec::new();
    for workers in [1, 3] {
        cfg.sampler.workers = workers;
        let mut rows = simulate(&cfg, |_, _, _| Ok(()))?.rows;
        rows.iter_mut().for_each(|r| r.wall_ms = 0.0);
        csvs.push(metrics_csv(3, &rows)?);
    }
    out.push(CheckOutcome::new(
        "worker-count determinism",
        if csvs[0] == csvs[1] { 0.0 } else { 1.0 },
        0.0,
    ));

    let de = theory::delta_eta(0.0, 1.0, 1.0, 0.1, 3.0, 1.0);
    out.push(CheckOutcome::new("delta_eta at zero step", de.abs(), 0.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for c in run_all(200, 5).unwrap() {
            assert!(c.pass, "{} worst {} > {}", c.name, c.worst, c.tolerance);
        }
    }
}
