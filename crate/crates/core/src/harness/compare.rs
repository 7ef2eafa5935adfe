use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::run::RunSummary;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLabel {
    pub label: String,
    pub sampler: String,
    pub seed: u64,
    pub particles: usize,
    pub final_f: f64,
    pub final_boundary_fraction: f64,
}

/// Differences of one run against the first (baseline) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub label: String,
    pub f_value: f64,
    pub boundary_fraction: f64,
    pub mean: Vec<f64>,
    pub min_coord: f64,
    pub max_coord: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub objective: String,
    pub runs: Vec<RunLabel>,
    pub deltas: Vec<Delta>,
    /// Label of the run with the lowest final F; ties go to the earlier run.
    pub winner_final_f: String,
    pub winner_boundary_fraction: String,
}

/// Compares labelled run summaries; the first is the baseline for deltas.
pub fn compare_runs(runs: &[(String, RunSummary)]) -> Result<Comparison> {
    if runs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "compare needs at least two summaries, got {}",
            runs.len()
        )));
    }
    let (base_label, base) = &runs[0];
    for (label, s) in &runs[1..] {
        if s.config.objective != base.config.objective || s.config.domain != base.config.domain {
            return Err(Error::MismatchedObjective(format!(
                "{label} uses {:?} on {:?}, {base_label} uses {:?} on {:?}",
                s.config.objective, s.config.domain, base.config.objective, base.config.domain
            )));
        }
    }
    let labels = runs
        .iter()
        .map(|(label, s)| RunLabel {
            label: label.clone(),
            sampler: s.sampler.clone(),
            seed: s.seed,
            particles: s.particles,
            final_f: s.final_state.f_value,
            final_boundary_fraction: s.final_state.boundary_fraction,
        })
        .collect();
    let deltas = runs[1..]
        .iter()
        .map(|(label, s)| {
            let (a, b) = (&s.final_state, &base.final_state);
            Delta {
                label: label.clone(),
                f_value: a.f_value - b.f_value,
                boundary_fraction: a.boundary_fraction - b.boundary_fraction,
                mean: a.mean.iter().zip(&b.mean).map(|(x, y)| x - y).collect(),
                min_coord: a.min_coord - b.min_coord,
                max_coord: a.max_coord - b.max_coord,
            }
        })
        .collect();
    let argmin = |key: fn(&RunSummary) -> f64| {
        let mut best = 0;
        for (i, (_, s)) in runs.iter().enumerate() {
            if key(s) < key(&runs[best].1) {
                best = i;
            }
        }
        runs[best].0.clone()
    };
    Ok(Comparison {
        objective: serde_json::to_string(&base.config.objective)?,
        runs: labels,
        deltas,
        winner_final_f: argmin(|s| s.final_state.f_value),
        winner_boundary_fraction: argmin(|s| s.final_state.boundary_fraction),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{preset, ObjectiveSpec};
    use crate::harness::run::simulate;

    fn summary(name: &str) -> RunSummary {
        let mut c = preset(name).unwrap();
        c.sampler.desk_particles = Some(200);
        c.sampler.steps = 5;
        simulate(&c, |_, _, _| Ok(())).unwrap().summary
    }

    #[test]
    fn identical_runs_have_zero_deltas() {
        let s = summary("figure1-beta0");
        let c = compare_runs(&[("a".into(), s.clone()), ("b".into(), s)]).unwrap();
        let d = &c.deltas[0];
        assert_eq!(d.f_value, 0.0);
        assert_eq!(d.boundary_fraction, 0.0);
        assert!(d.mean.iter().all(|v| *v == 0.0));
        assert_eq!(c.winner_final_f, "a");
    }

    #[test]
    fn lower_loss_wins() {
        let a = summary("figure1-beta0");
        let mut b = a.clone();
        b.final_state.f_value -= 1.0;
        b.final_state.boundary_fraction += 0.5;
        let c = compare_runs(&[("a".into(), a), ("b".into(), b)]).unwrap();
        assert_eq!(c.winner_final_f, "b");
        assert_eq!(c.winner_boundary_fraction, "a");
        assert_eq!(c.deltas[0].f_value, -1.0);
    }

    #[test]
    fn mismatched_objectives_are_rejected() {
        let a = summary("figure1-beta0");
        let mut b = a.clone();
        b.config.objective = ObjectiveSpec::MeanMatchBarrier {
            q: vec![0.4, 0.4, 0.2],
            beta: 0.0,
        };
        let err = compare_runs(&[("a".into(), a.clone()), ("b".into(), b)]).unwrap_err();
        assert!(matches!(err, Error::MismatchedObjective(_)));
        assert!(compare_runs(&[("a".into(), a)]).is_err());
    }
}
