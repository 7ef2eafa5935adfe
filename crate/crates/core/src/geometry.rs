//! Mirror maps of Legendre type on the two shipped domains.
//!
//! * `SimplexEntropy`: the negative entropy `φ(x) = Σ_c x_c log x_c` on the
//!   open probability simplex in `d = m + 1` ambient coordinates. Points are
//!   handled in reduced (intrinsic) coordinates `x_1..x_m` with the last
//!   coordinate pinned to `1 − Σ x_i`, which makes `∇φ` a bijection onto
//!   `ℝ^m`: `∇φ(x)_i = log(x_i / x_d)` and `∇φ*(y) = softmax(y, 0)`.
//! * `BoxLogBarrier`: `φ(x) = −Σ_i [log(x_i − a_i) + log(b_i − x_i)]` on an
//!   open box; intrinsic and ambient coordinates coincide.
//!
//! Public operations take intrinsic points and validate them against the
//! interior margin. The `*_ambient` variants skip validation and work on the
//! ambient representation, which keeps a tiny pinned simplex coordinate
//! accurate (it is never recomputed as `1 − Σ x_i`); the samplers use those.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_INTERIOR_MARGIN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MirrorKind {
    SimplexEntropy,
    BoxLogBarrier,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MirrorMap {
    kind: MirrorKind,
    dim: usize,
    bounds: Vec<(f64, f64)>,
    interior_margin: f64,
}

/// Hessian `∇²φ(x)` and a lower-triangular factor `L` with `L Lᵀ = scale · ∇²φ(x)`,
/// both row-major `m × m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    pub dim: usize,
    pub hessian: Vec<f64>,
    pub factor: Vec<f64>,
}

impl MirrorMap {
    /// Entropic map on the simplex with `ambient_dim` coordinates.
    pub fn simplex(ambient_dim: usize) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(Error::InvalidInput(format!(
                "simplex needs at least 2 ambient coordinates, got {ambient_dim}"
            )));
        }
        Ok(Self {
            kind: MirrorKind::SimplexEntropy,
            dim: ambient_dim - 1,
            bounds: Vec::new(),
            interior_margin: DEFAULT_INTERIOR_MARGIN,
        })
    }

    /// Coordinate-wise log-barrier on `Π (a_i, b_i)`.
    pub fn cube(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidInput("box needs at least one coordinate".into()));
        }
        if let Some((i, (a, b))) = bounds
            .iter()
            .enumerate()
            .find(|(_, (a, b))| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(Error::InvalidInput(format!(
                "box bound {i} must satisfy a < b (got a = {a}, b = {b})"
            )));
        }
        Ok(Self {
            kind: MirrorKind::BoxLogBarrier,
            dim: bounds.len(),
            bounds,
            interior_margin: DEFAULT_INTERIOR_MARGIN,
        })
    }

    pub fn with_interior_margin(mut self, margin: f64) -> Self {
        self.interior_margin = margin;
        self
    }

    pub fn kind(&self) -> MirrorKind {
        self.kind
    }

    /// Intrinsic dimension `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            MirrorKind::SimplexEntropy => self.dim + 1,
            MirrorKind::BoxLogBarrier => self.dim,
        }
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn interior_margin(&self) -> f64 {
        self.interior_margin
    }

    // ---------------------------------------------------------------------
    // Validated operations on intrinsic points.

    /// `∇φ(x)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let amb = self.embed(x)?;
        let mut y = vec![0.0; self.dim];
        self.forward_ambient(&amb, &mut y);
        Ok(y)
    }

    /// `∇φ*(y)`; total on finite inputs.
    pub fn backward(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y, self.dim, "dual point")?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dual point must be finite".into()));
        }
        let mut amb = vec![0.0; self.ambient_dim()];
        self.backward_ambient(y, &mut amb);
        amb.truncate(self.dim);
        Ok(amb)
    }

    pub fn metric(&self, x: &[f64], scale: f64) -> Result<Metric> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::InvalidInput(format!("metric scale must be >= 0, got {scale}")));
        }
        let amb = self.embed(x)?;
        let m = self.dim;
        let mut hessian = vec![0.0; m * m];
        let mut factor = vec![0.0; m * m];
        self.hessian_ambient(&amb, &mut hessian);
        let mut work = vec![0.0; m];
        self.factor_ambient(&amb, scale, &mut factor, &mut work)?;
        Ok(Metric {
            dim: m,
            hessian,
            factor,
        })
    }

    /// Ambient coordinates of an intrinsic point.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x, self.dim, "primal point")?;
        let amb = match self.kind {
            MirrorKind::SimplexEntropy => {
                let mut v = x.to_vec();
                v.push(1.0 - x.iter().sum::<f64>());
                v
            }
            MirrorKind::BoxLogBarrier => x.to_vec(),
        };
        self.check_interior(&amb)?;
        Ok(amb)
    }

    /// Chain rule through [`MirrorMap::embed`]: ambient gradient to intrinsic.
    pub fn pullback(&self, x: &[f64], g_ambient: &[f64]) -> Result<Vec<f64>> {
        self.embed(x)?;
        self.check_len(g_ambient, self.ambient_dim(), "ambient gradient")?;
        let mut out = vec![0.0; self.dim];
        self.pullback_ambient(g_ambient, &mut out);
        Ok(out)
    }

    /// Estimate of the self-concordance parameter of `φ` along `(x, u)`:
    /// `|D³φ(x)[u,u,u]| / (2 ⟨u, ∇²φ(x) u⟩^{3/2})`, with the third derivative
    /// taken by a 5-point central difference of `s ↦ ⟨u, ∇²φ(x + s u) u⟩`.
    pub fn self_concordance_probe(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        let amb = self.embed(x)?;
        self.check_len(u, self.dim, "direction")?;
        if u.iter().all(|v| *v == 0.0) || u.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("direction must be finite and nonzero".into()));
        }
        let dir = self.ambient_direction(u);
        let reach = self.reach_along(&amb, &dir);
        let s = 1e-3 * reach;
        let quad = |t: f64| -> Result<f64> {
            let p: Vec<f64> = amb.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            self.check_interior(&p)?;
            let mut h = vec![0.0; self.dim * self.dim];
            self.hessian_ambient(&p, &mut h);
            Ok(quadratic_form(&h, u))
        };
        let third = five_point_derivative(quad, s)?;
        let second = quad(0.0)?;
        Ok(third.abs() / (2.0 * second.powf(1.5)))
    }

    /// Same ratio for the dual function `φ*` at a dual point `y`.
    pub fn dual_self_concordance_probe(&self, y: &[f64], u: &[f64]) -> Result<f64> {
        self.check_len(y, self.dim, "dual point")?;
        self.check_len(u, self.dim, "direction")?;
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidInput("direction must be finite and nonzero".into()));
        }
        let s = 1e-3 / norm;
        let mut amb = vec![0.0; self.ambient_dim()];
        let mut inv = vec![0.0; self.dim * self.dim];
        let mut quad = |t: f64| -> Result<f64> {
            let p: Vec<f64> = y.iter().zip(u).map(|(a, d)| a + t * d).collect();
            self.backward_ambient(&p, &mut amb);
            self.check_interior(&amb)?;
            self.inverse_hessian_ambient(&amb, &mut inv);
            Ok(quadratic_form(&inv, u))
        };
        let third = five_point_derivative(&mut quad, s)?;
        let second = quad(0.0)?;
        Ok(third.abs() / (2.0 * second.powf(1.5)))
    }

    // ---------------------------------------------------------------------
    // Unvalidated ambient-coordinate kernels.

    /// Strict interiority with the configured margin.
    pub fn check_interior(&self, amb: &[f64]) -> Result<()> {
        let margin = self.interior_margin;
        match self.kind {
            MirrorKind::SimplexEntropy => {
                if let Some((c, v)) = amb
                    .iter()
                    .enumerate()
                    .find(|(_, v)| !(v.is_finite() && **v >= margin))
                {
                    return Err(Error::DomainViolation(format!(
                        "simplex coordinate {c} = {v:e} is not at least {margin:e} inside the boundary"
                    )));
                }
            }
            MirrorKind::BoxLogBarrier => {
                for (i, (v, (a, b))) in amb.iter().zip(&self.bounds).enumerate() {
                    let w = b - a;
                    if !(v.is_finite() && v - a >= margin * w && b - v >= margin * w) {
                        return Err(Error::DomainViolation(format!(
                            "box coordinate {i} = {v:e} is not inside ({a}, {b}) by the margin"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether every ambient coordinate is finite and strictly inside the domain.
    pub fn is_strictly_interior(&self, amb: &[f64]) -> bool {
        match self.kind {
            MirrorKind::SimplexEntropy => amb.iter().all(|v| v.is_finite() && *v > 0.0),
            MirrorKind::BoxLogBarrier => amb
                .iter()
                .zip(&self.bounds)
                .all(|(v, (a, b))| v.is_finite() && v > a && v < b),
        }
    }

    pub fn forward_ambient(&self, amb: &[f64], y: &mut [f64]) {
        match self.kind {
            MirrorKind::SimplexEntropy => {
                let log_last = amb[self.dim].ln();
                for (yi, xi) in y.iter_mut().zip(amb) {
                    *yi = xi.ln() - log_last;
                }
            }
            MirrorKind::BoxLogBarrier => {
                for ((yi, xi), (a, b)) in y.iter_mut().zip(amb).zip(&self.bounds) {
                    *yi = -1.0 / (xi - a) + 1.0 / (b - xi);
                }
            }
        }
    }

    pub fn backward_ambient(&self, y: &[f64], amb: &mut [f64]) {
        match self.kind {
            MirrorKind::SimplexEntropy => {
                // Shift by max(0, max y) so that neither the exponentials nor
                // the pinned term can overflow.
                let shift = y.iter().fold(0.0f64, |acc, v| acc.max(*v));
                let pinned = (-shift).exp();
                let mut den = pinned;
                for (xi, yi) in amb.iter_mut().zip(y) {
                    *xi = (yi - shift).exp();
                    den += *xi;
                }
                for xi in amb.iter_mut().take(self.dim) {
                    *xi /= den;
                }
                amb[self.dim] = pinned / den;
            }
            MirrorKind::BoxLogBarrier => {
                for ((xi, yi), (a, b)) in amb.iter_mut().zip(y).zip(&self.bounds) {
                    *xi = a + (b - a) * box_unit_root(yi * (b - a));
                }
            }
        }
    }

    pub fn pullback_ambient(&self, g_ambient: &[f64], out: &mut [f64]) {
        match self.kind {
            MirrorKind::SimplexEntropy => {
                let last = g_ambient[self.dim];
                for (o, g) in out.iter_mut().zip(g_ambient) {
                    *o = g - last;
                }
            }
            MirrorKind::BoxLogBarrier => out.copy_from_slice(&g_ambient[..self.dim]),
        }
    }

    /// Row-major `∇²φ(x)`.
    pub fn hessian_ambient(&self, amb: &[f64], h: &mut [f64]) {
        let m = self.dim;
        h.iter_mut().for_each(|v| *v = 0.0);
        match self.kind {
            MirrorKind::SimplexEntropy => {
                let tie = 1.0 / amb[m];
                for i in 0..m {
                    for j in 0..m {
                        h[i * m + j] = tie;
                    }
                    h[i * m + i] += 1.0 / amb[i];
                }
            }
            MirrorKind::BoxLogBarrier => {
                for (i, (xi, (a, b))) in amb.iter().zip(&self.bounds).enumerate() {
                    h[i * m + i] = 1.0 / ((xi - a) * (xi - a)) + 1.0 / ((b - xi) * (b - xi));
                }
            }
        }
    }

    /// Row-major `∇²φ*(∇φ(x)) = [∇²φ(x)]⁻¹`, in closed form.
    pub fn inverse_hessian_ambient(&self, amb: &[f64], inv: &mut [f64]) {
        let m = self.dim;
        inv.iter_mut().for_each(|v| *v = 0.0);
        match self.kind {
            MirrorKind::SimplexEntropy => {
                for i in 0..m {
                    for j in 0..m {
                        inv[i * m + j] = -amb[i] * amb[j];
                    }
                    inv[i * m + i] += amb[i];
                }
            }
            MirrorKind::BoxLogBarrier => {
                for (i, (xi, (a, b))) in amb.iter().zip(&self.bounds).enumerate() {
                    let lo = xi - a;
                    let hi = b - xi;
                    inv[i * m + i] = 1.0 / (1.0 / (lo * lo) + 1.0 / (hi * hi));
                }
            }
        }
    }

    /// Largest diagonal entry of `∇²φ(x)`.
    pub fn hessian_diag_max(&self, amb: &[f64]) -> f64 {
        match self.kind {
            MirrorKind::SimplexEntropy => {
                let tie = 1.0 / amb[self.dim];
                amb[..self.dim]
                    .iter()
                    .fold(0.0f64, |acc, x| acc.max(1.0 / x))
                    + tie
            }
            MirrorKind::BoxLogBarrier => amb
                .iter()
                .zip(&self.bounds)
                .map(|(xi, (a, b))| 1.0 / ((xi - a) * (xi - a)) + 1.0 / ((b - xi) * (b - xi)))
                .fold(0.0f64, f64::max),
        }
    }

    /// Lower-triangular `L` with `L Lᵀ = scale · ∇²φ(x)`. `work` needs `m` slots.
    ///
    /// The simplex metric is `diag(1/x_i) + (1/x_d) 𝟙𝟙ᵀ`; its factor is built
    /// as a rank-one Cholesky update of the diagonal part, which avoids the
    /// cancellation a plain factorization suffers when `x_d` is tiny.
    pub fn factor_ambient(
        &self,
        amb: &[f64],
        scale: f64,
        l: &mut [f64],
        work: &mut [f64],
    ) -> Result<()> {
        let m = self.dim;
        l.iter_mut().for_each(|v| *v = 0.0);
        if scale == 0.0 {
            return Ok(());
        }
        match self.kind {
            MirrorKind::SimplexEntropy => {
                for i in 0..m {
                    l[i * m + i] = (scale / amb[i]).sqrt();
                }
                let tie = (scale / amb[m]).sqrt();
                work[..m].iter_mut().for_each(|v| *v = tie);
                for k in 0..m {
                    let lkk = l[k * m + k];
                    let vk = work[k];
                    let r = lkk.hypot(vk);
                    let c = r / lkk;
                    let s = vk / lkk;
                    l[k * m + k] = r;
                    for i in k + 1..m {
                        let lik = (l[i * m + k] + s * work[i]) / c;
                        work[i] = c * work[i] - s * lik;
                        l[i * m + k] = lik;
                    }
                }
            }
            MirrorKind::BoxLogBarrier => {
                for (i, (xi, (a, b))) in amb.iter().zip(&self.bounds).enumerate() {
                    let lo = xi - a;
                    let hi = b - xi;
                    l[i * m + i] = (scale * (1.0 / (lo * lo) + 1.0 / (hi * hi))).sqrt();
                }
            }
        }
        for i in 0..m {
            let d = l[i * m + i];
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Factorization(format!(
                    "diagonal entry {i} of the metric factor is {d:e}; point is numerically on the boundary"
                )));
            }
        }
        Ok(())
    }

    /// Reflects a dual point so that every face distance is at least `floor`,
    /// mirroring the log of each too-small distance about `log(floor)`.
    /// Simplex distances are the ambient coordinates, box distances are
    /// relative to the side length. Returns whether anything moved.
    pub fn reflect_dual(&self, y: &mut [f64], floor: f64) -> bool {
        let log_floor = floor.ln();
        let mut moved = false;
        match self.kind {
            MirrorKind::SimplexEntropy => {
                for _ in 0..8 {
                    let shift = y.iter().fold(0.0f64, |acc, v| acc.max(*v));
                    let lse = shift
                        + ((-shift).exp() + y.iter().map(|v| (v - shift).exp()).sum::<f64>()).ln();
                    // log x_d = -lse, log x_i = y_i - lse
                    let pinned_gap = (log_floor + lse).max(0.0);
                    let mut any = pinned_gap > 0.0;
                    for v in y.iter_mut() {
                        let gap = (log_floor - (*v - lse)).max(0.0);
                        any |= gap > 0.0;
                        *v += 2.0 * gap - 2.0 * pinned_gap;
                    }
                    if !any {
                        break;
                    }
                    moved = true;
                }
            }
            MirrorKind::BoxLogBarrier => {
                for (yi, (a, b)) in y.iter_mut().zip(&self.bounds) {
                    let w = b - a;
                    let (lo, hi) = box_unit_gaps(*yi * w);
                    let (lo, hi) = if lo < floor {
                        let lo = floor * floor / lo.max(f64::MIN_POSITIVE);
                        (lo, 1.0 - lo)
                    } else if hi < floor {
                        let hi = floor * floor / hi.max(f64::MIN_POSITIVE);
                        (1.0 - hi, hi)
                    } else {
                        continue;
                    };
                    *yi = (-1.0 / lo + 1.0 / hi) / w;
                    moved = true;
                }
            }
        }
        moved
    }

    /// Distance from an ambient point to the nearest face (simplex: smallest
    /// coordinate; box: smallest gap to a bound).
    pub fn boundary_distance(&self, amb: &[f64]) -> f64 {
        match self.kind {
            MirrorKind::SimplexEntropy => amb.iter().copied().fold(f64::INFINITY, f64::min),
            MirrorKind::BoxLogBarrier => amb
                .iter()
                .zip(&self.bounds)
                .map(|(x, (a, b))| (x - a).min(b - x))
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn ambient_direction(&self, u: &[f64]) -> Vec<f64> {
        match self.kind {
            MirrorKind::SimplexEntropy => {
                let mut d = u.to_vec();
                d.push(-u.iter().sum::<f64>());
                d
            }
            MirrorKind::BoxLogBarrier => u.to_vec(),
        }
    }

    /// Largest `t` such that `x ± t·dir` stays in the closed domain.
    fn reach_along(&self, amb: &[f64], dir: &[f64]) -> f64 {
        let mut reach = f64::INFINITY;
        match self.kind {
            MirrorKind::SimplexEntropy => {
                for (x, d) in amb.iter().zip(dir) {
                    if *d != 0.0 {
                        reach = reach.min(x / d.abs());
                    }
                }
            }
            MirrorKind::BoxLogBarrier => {
                for ((x, d), (a, b)) in amb.iter().zip(dir).zip(&self.bounds) {
                    if *d != 0.0 {
                        reach = reach.min((x - a).min(b - x) / d.abs());
                    }
                }
            }
        }
        reach
    }

    fn check_len(&self, v: &[f64], want: usize, what: &str) -> Result<()> {
        if v.len() != want {
            return Err(Error::InvalidInput(format!(
                "{what} has length {}, expected {want}",
                v.len()
            )));
        }
        Ok(())
    }
}

/// Where the particles live.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Domain {
    /// Probability simplex with `dim` ambient coordinates.
    Simplex { dim: usize },
    Box { bounds: Vec<(f64, f64)> },
    /// Unconstrained `ℝ^dim`; only the plain MFLD sampler runs here.
    Euclidean { dim: usize },
}

impl Domain {
    pub fn ambient_dim(&self) -> usize {
        match self {
            Domain::Simplex { dim } | Domain::Euclidean { dim } => *dim,
            Domain::Box { bounds } => bounds.len(),
        }
    }

    pub fn mirror_map(&self) -> Result<Option<MirrorMap>> {
        Ok(match self {
            Domain::Simplex { dim } => Some(MirrorMap::simplex(*dim)?),
            Domain::Box { bounds } => Some(MirrorMap::cube(bounds.clone())?),
            Domain::Euclidean { .. } => None,
        })
    }

    /// Distance from an ambient point to the nearest face; infinite on `ℝ^d`.
    pub fn boundary_distance(&self, amb: &[f64]) -> f64 {
        match self {
            Domain::Simplex { .. } => amb.iter().copied().fold(f64::INFINITY, f64::min),
            Domain::Box { bounds } => amb
                .iter()
                .zip(bounds)
                .map(|(x, (a, b))| (x - a).min(b - x))
                .fold(f64::INFINITY, f64::min),
            Domain::Euclidean { .. } => f64::INFINITY,
        }
    }
}

/// Root in `(0, 1)` of the unit-box barrier gradient `−1/u + 1/(1 − u) = t`.
fn box_unit_root(t: f64) -> f64 {
    box_unit_gaps(t).0
}

/// Distances `(u, 1 − u)` of that root to the two faces, each to full
/// relative precision.
///
/// The textbook form `((t − 2) + √(t² + 4)) / (2t)` cancels near `t = 0` and
/// for large `t`; it equals `2 / (2 + s)` with `s = √(t² + 4) − t`, and `s`
/// is evaluated without cancellation on either sign of `t`.
fn box_unit_gaps(t: f64) -> (f64, f64) {
    let r = t.hypot(2.0);
    let s = if t >= 0.0 { 4.0 / (r + t) } else { r - t };
    (2.0 / (2.0 + s), s / (2.0 + s))
}

fn quadratic_form(a: &[f64], u: &[f64]) -> f64 {
    let m = u.len();
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            acc += u[i] * a[i * m + j] * u[j];
        }
    }
    acc
}

fn five_point_derivative(mut f: impl FnMut(f64) -> Result<f64>, s: f64) -> Result<f64> {
    let f2p = f(2.0 * s)?;
    let f1p = f(s)?;
    let f1m = f(-s)?;
    let f2m = f(-2.0 * s)?;
    Ok((-f2p + 8.0 * f1p - 8.0 * f1m + f2m) / (12.0 * s))
}
