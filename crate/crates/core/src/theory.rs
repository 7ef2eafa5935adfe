//! Calculators for the convergence guarantees.
//!
//! The constants (`M₁`, `M₂`, `α`, `c₁`, `c₂`, `D`, …) are inputs; nothing
//! here estimates them.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigIssue, Error, Result};

/// Which formula produced `M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `c₁ = 0`: `M = 1` by convention.
    Convention,
    /// `t` is small enough for the expectation bound.
    Expectation,
    /// Only the deterministic bound applies.
    DeterministicOnly,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Convention => "convention",
            Self::Expectation => "expectation",
            Self::DeterministicOnly => "deterministic-only",
        }
    }
}

/// Form of the square-root term in the denominator of the expectation bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootTerm {
    /// `2√(t d)`, as in the statement.
    #[default]
    Statement,
    /// `2√(λ t d)`, as in the proof.
    Proof,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HessianGrowth {
    /// `None` outside the small-`t` regime.
    pub expectation: Option<f64>,
    pub deterministic: f64,
    pub regime: Regime,
}

/// Bound `M` on the Hessian growth over a step of length `t`.
///
/// `lambda` is only read for [`RootTerm::Proof`].
#[allow(clippy::too_many_arguments)]
pub fn lemma_b6_m(
    c1: f64,
    c2: f64,
    big_d: f64,
    t: f64,
    m1: f64,
    d: f64,
    root: RootTerm,
    lambda: f64,
) -> Result<HessianGrowth> {
    if c1 == 0.0 {
        return Ok(HessianGrowth {
            expectation: Some(1.0),
            deterministic: 1.0,
            regime: Regime::Convention,
        });
    }
    let positive = [("c1", c1), ("c2", c2), ("t", t), ("M1", m1), ("d", d)];
    if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")));
    }
    if !(big_d > 0.0) {
        return Err(Error::InvalidInput(format!("D must be positive, got {big_d}")));
    }
    let deterministic = (2.0 * c1 * big_d / c2.sqrt()).exp();
    let threshold = (1.0 / (2.0 * c1 * m1)).min(1.0 / (16.0 * c1 * c1 * d));
    if t > threshold {
        return Ok(HessianGrowth {
            expectation: None,
            deterministic,
            regime: Regime::DeterministicOnly,
        });
    }
    let root_arg = match root {
        RootTerm::Statement => t * d,
        RootTerm::Proof => {
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "the proof variant needs lambda > 0, got {lambda}"
                )));
            }
            lambda * t * d
        }
    };
    let denom = 1.0 - c1 * (t * m1 + 2.0 * root_arg.sqrt());
    if !(denom > 0.0) {
        return Err(Error::DomainViolation(format!(
            "denominator 1 − c1(t·M1 + 2√·) = {denom:e} is not positive at t = {t:e}"
        )));
    }
    let tail = -1.0 / (16.0 * c1 * c1 * t);
    let expectation = -tail.exp_m1() / (denom * denom) + (tail + 2.0 * c1 * big_d / c2.sqrt()).exp();
    Ok(HessianGrowth {
        expectation: Some(expectation),
        deterministic,
        regime: Regime::Expectation,
    })
}

/// `δ_η = 2η M₂⁴ M (η M₁² + 2λd)`.
pub fn delta_eta(eta: f64, m1: f64, m2: f64, lambda: f64, d: f64, big_m: f64) -> f64 {
    2.0 * eta * m2.powi(4) * big_m * (eta * m1 * m1 + 2.0 * lambda * d)
}

/// `exp(−αληk)·gap₀ + LR²/(2N) + δ_η/(2αλ)`; `k` and `n` may be infinite.
#[allow(clippy::too_many_arguments)]
pub fn theorem8_bound(
    gap0: f64,
    alpha: f64,
    lambda: f64,
    eta: f64,
    k: f64,
    n: f64,
    l: f64,
    r: f64,
    delta: f64,
) -> f64 {
    let decay = if gap0 == 0.0 { 0.0 } else { (-alpha * lambda * eta * k).exp() * gap0 };
    decay + chaos_gap(l, r, n) + delta / (2.0 * alpha * lambda)
}

/// `LR²/(2N)`.
pub fn chaos_gap(l: f64, r: f64, n: f64) -> f64 {
    l * r * r / (2.0 * n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Envelopes {
    /// `e^{−2αλt}(L(μ₀) − L(μ*))` for continuous-time MMFLD.
    pub free_energy_gap: f64,
    /// `e^{−2αλt} KL(μ₀‖μ*)` for mirror Langevin with a linear objective.
    pub kl: f64,
    /// `LR²/(2N)`.
    pub chaos_gap: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn convergence_envelopes(
    gap0: f64,
    kl0: f64,
    alpha: f64,
    lambda: f64,
    t: f64,
    l: f64,
    r: f64,
    n: f64,
) -> Envelopes {
    let decay = (-2.0 * alpha * lambda * t).exp();
    Envelopes {
        free_energy_gap: decay * gap0,
        kl: decay * kl0,
        chaos_gap: chaos_gap(l, r, n),
    }
}

/// Inputs of the `bounds` subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundInputs {
    pub m1: f64,
    pub m2: f64,
    pub lambda: f64,
    pub eta: f64,
    /// Horizon for the Hessian-growth bound; defaults to `eta`.
    pub t: Option<f64>,
    pub d: f64,
    pub n: f64,
    pub k: f64,
    pub alpha: f64,
    pub l: f64,
    pub r: f64,
    pub c1: f64,
    pub c2: f64,
    #[serde(rename = "D")]
    pub big_d: f64,
    pub gap0: f64,
    pub kl0: f64,
    /// Time for the continuous-time envelopes; defaults to `eta·k`.
    pub time: Option<f64>,
    pub root: RootTerm,
}

impl Default for BoundInputs {
    fn default() -> Self {
        Self {
            m1: 1.0,
            m2: 1.0,
            lambda: 0.1,
            eta: 3e-3,
            t: None,
            d: 2.0,
            n: 50_000.0,
            k: 1000.0,
            alpha: 1.0,
            l: 1.0,
            r: 1.0,
            c1: 0.0,
            c2: 1.0,
            big_d: 1.0,
            gap0: 1.0,
            kl0: 1.0,
            time: None,
            root: RootTerm::Statement,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub inputs: BoundInputs,
    pub hessian_growth: HessianGrowth,
    /// `M` used inside `δ_η`: the expectation bound when it applies, else the deterministic one.
    pub m: f64,
    pub delta_eta: f64,
    pub theorem8: f64,
    pub theorem8_limit: f64,
    pub envelopes: Envelopes,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        let mut positive = |key: &str, v: f64| {
            if !(v > 0.0) || v.is_nan() {
                issues.push(ConfigIssue {
                    key: format!("bounds.{key}"),
                    message: format!("must be > 0, got {v}"),
                });
            }
        };
        positive("m1", self.m1);
        positive("m2", self.m2);
        positive("lambda", self.lambda);
        positive("eta", self.eta);
        positive("d", self.d);
        positive("n", self.n);
        positive("alpha", self.alpha);
        positive("l", self.l);
        positive("r", self.r);
        positive("c2", self.c2);
        positive("D", self.big_d);
        if let Some(t) = self.t {
            positive("t", t);
        }
        let mut nonneg = |key: &str, v: f64| {
            if !(v >= 0.0) {
                issues.push(ConfigIssue {
                    key: format!("bounds.{key}"),
                    message: format!("must be >= 0, got {v}"),
                });
            }
        };
        nonneg("c1", self.c1);
        nonneg("k", self.k);
        nonneg("gap0", self.gap0);
        nonneg("kl0", self.kl0);
        if let Some(time) = self.time {
            nonneg("time", time);
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(issues))
        }
    }

    pub fn evaluate(&self) -> Result<BoundsReport> {
        self.validate()?;
        let t = self.t.unwrap_or(self.eta);
        let growth = lemma_b6_m(self.c1, self.c2, self.big_d, t, self.m1, self.d, self.root, self.lambda)?;
        let m = growth.expectation.unwrap_or(growth.deterministic);
        let delta = delta_eta(self.eta, self.m1, self.m2, self.lambda, self.d, m);
        let bound = |k: f64| {
            theorem8_bound(self.gap0, self.alpha, self.lambda, self.eta, k, self.n, self.l, self.r, delta)
        };
        Ok(BoundsReport {
            inputs: self.clone(),
            hessian_growth: growth,
            m,
            delta_eta: delta,
            theorem8: bound(self.k),
            theorem8_limit: bound(f64::INFINITY),
            envelopes: convergence_envelopes(
                self.gap0,
                self.kl0,
                self.alpha,
                self.lambda,
                self.time.unwrap_or(self.eta * self.k),
                self.l,
                self.r,
                self.n,
            ),
        })
    }
}
