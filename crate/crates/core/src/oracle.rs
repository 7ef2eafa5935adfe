//! Grid ground truth on the 2-simplex.
//!
//! The clipped simplex `{x : x_c ≥ margin}` is cut into the `R²` congruent
//! triangles of the standard barycentric subdivision; each triangle is
//! represented by its centroid and carries the same area. Densities are taken
//! with respect to the 2-dimensional surface measure of the simplex, so the
//! uniform law on the clipped simplex has entropy `−log(area)`.

use serde::Serialize;

use crate::error::{ConfigIssue, Error, Result};
use crate::geometry::MirrorMap;
use crate::objectives::{EnsembleStats, MeanFieldObjective};

pub const DEFAULT_RESOLUTION: usize = 64;
pub const DEFAULT_MARGIN: f64 = 1e-4;
pub const DEFAULT_DAMPING: f64 = 0.5;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Cell-centred triangulation of the clipped 2-simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexGrid {
    pub resolution: usize,
    pub margin: f64,
    /// Ambient node coordinates, `3` per node.
    pub nodes: Vec<f64>,
    pub cell_volume: f64,
    /// Lattice neighbours of each node: `[−e1, +e1, −e2, +e2]` in reduced coordinates.
    neighbours: Vec<[Option<usize>; 4]>,
}

/// Probability weights on the nodes of a [`SimplexGrid`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridMeasure {
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridFunctionals {
    pub f_value: f64,
    pub entropy: f64,
    pub free_energy: f64,
    pub mean: [f64; 3],
    /// Row-major `3 × 3`.
    pub covariance: [f64; 9],
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPoint {
    pub measure: GridMeasure,
    pub residual: f64,
    pub iterations: usize,
    /// First-order residual after each update.
    pub history: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            damping: DEFAULT_DAMPING,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sandwich {
    pub lhs: f64,
    pub mid: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl SimplexGrid {
    pub fn new(resolution: usize, margin: f64) -> Result<Self> {
        let mut issues = Vec::new();
        if resolution < 8 {
            issues.push(ConfigIssue {
                key: "oracle.resolution".into(),
                message: format!("must be at least 8, got {resolution}"),
            });
        }
        if !(margin > 0.0 && margin < 1.0 / (3.0 * resolution.max(1) as f64)) {
            issues.push(ConfigIssue {
                key: "oracle.margin".into(),
                message: format!(
                    "must lie in (0, 1/(3R)) = (0, {:.3e}), got {margin:e}",
                    1.0 / (3.0 * resolution.max(1) as f64)
                ),
            });
        }
        if !issues.is_empty() {
            return Err(Error::Config(issues));
        }
        let r = resolution;
        let rf = r as f64;
        let scale = 1.0 - 3.0 * margin;
        let mut nodes = Vec::with_capacity(3 * r * r);
        let mut up = vec![None; r * r];
        let mut down = vec![None; r * r];
        let mut push = |u1: f64, u2: f64| -> usize {
            let x1 = margin + scale * u1;
            let x2 = margin + scale * u2;
            // the third coordinate straight from the barycentric weight keeps it exact
            let x3 = margin + scale * (1.0 - u1 - u2);
            nodes.extend_from_slice(&[x1, x2, x3]);
            nodes.len() / 3 - 1
        };
        for i in 0..r {
            for j in 0..r - i {
                up[i * r + j] = Some(push((i as f64 + 1.0 / 3.0) / rf, (j as f64 + 1.0 / 3.0) / rf));
                if i + j + 2 <= r {
                    down[i * r + j] =
                        Some(push((i as f64 + 2.0 / 3.0) / rf, (j as f64 + 2.0 / 3.0) / rf));
                }
            }
        }
        let count = nodes.len() / 3;
        let mut neighbours = vec![[None; 4]; count];
        for table in [&up, &down] {
            let at = |i: isize, j: isize| -> Option<usize> {
                if i < 0 || j < 0 || i as usize >= r || j as usize >= r {
                    None
                } else {
                    table[i as usize * r + j as usize]
                }
            };
            for i in 0..r as isize {
                for j in 0..r as isize {
                    if let Some(n) = at(i, j) {
                        neighbours[n] = [at(i - 1, j), at(i + 1, j), at(i, j - 1), at(i, j + 1)];
                    }
                }
            }
        }
        let area = 3f64.sqrt() / 2.0 * scale * scale;
        Ok(Self {
            resolution,
            margin,
            nodes,
            cell_volume: area / (r * r) as f64,
            neighbours,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len() / 3
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[3 * i..3 * i + 3]
    }

    /// Surface area of the clipped simplex.
    pub fn area(&self) -> f64 {
        let s = 1.0 - 3.0 * self.margin;
        3f64.sqrt() / 2.0 * s * s
    }

    /// Lattice spacing of same-orientation nodes in reduced coordinates.
    pub fn spacing(&self) -> f64 {
        (1.0 - 3.0 * self.margin) / self.resolution as f64
    }

    pub fn uniform(&self) -> GridMeasure {
        GridMeasure {
            weights: vec![1.0 / self.len() as f64; self.len()],
        }
    }

    /// Weights proportional to `density(node)` (a density on the simplex).
    pub fn from_density(&self, density: impl Fn(&[f64]) -> f64) -> GridMeasure {
        let mut w: Vec<f64> = (0..self.len()).map(|i| density(self.node(i))).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        GridMeasure { weights: w }
    }

    pub fn stats(&self, obj: &MeanFieldObjective, mu: &GridMeasure) -> EnsembleStats {
        obj.weighted_stats(3, (0..self.len()).map(|i| (self.node(i), mu.weights[i])))
    }
}

impl GridMeasure {
    pub fn densities(&self, grid: &SimplexGrid) -> Vec<f64> {
        self.weights.iter().map(|w| w / grid.cell_volume).collect()
    }

    /// `(1 − t) self + t other`.
    pub fn mix(&self, other: &GridMeasure, t: f64) -> GridMeasure {
        GridMeasure {
            weights: self
                .weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        }
    }
}

/// Normalised `exp(−potential/λ)` with a max-shift; cell volumes are uniform.
fn gibbs_weights(potential: &[f64], lambda: f64) -> Vec<f64> {
    let lo = potential.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = potential.iter().map(|g| (-(g - lo) / lambda).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn first_variation_on_grid(grid: &SimplexGrid, obj: &MeanFieldObjective, mu: &GridMeasure) -> Vec<f64> {
    let stats = grid.stats(obj, mu);
    (0..grid.len()).map(|i| obj.first_variation(grid.node(i), &stats)).collect()
}

/// `μ̂ ∝ exp(−δF(μ)/δμ / λ)` on the nodes.
pub fn proximal_gibbs(
    grid: &SimplexGrid,
    obj: &MeanFieldObjective,
    mu: &GridMeasure,
    lambda: f64,
) -> Result<GridMeasure> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be > 0, got {lambda}")));
    }
    Ok(GridMeasure {
        weights: gibbs_weights(&first_variation_on_grid(grid, obj, mu), lambda),
    })
}

/// Sup deviation of `λ log ρ + δF(μ)/δμ` from its median over the nodes.
pub fn optimality_residual(
    grid: &SimplexGrid,
    obj: &MeanFieldObjective,
    mu: &GridMeasure,
    lambda: f64,
) -> f64 {
    let g = first_variation_on_grid(grid, obj, mu);
    let values: Vec<f64> = mu
        .weights
        .iter()
        .zip(&g)
        .map(|(w, g)| lambda * (w / grid.cell_volume).ln() + g)
        .collect();
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };
    values.iter().map(|v| (v - median).abs()).fold(0.0, f64::max)
}

/// Damped fixed-point iteration `μ ← (1−τ)μ + τ μ̂(μ)` from the uniform law.
pub fn fixed_point_solve(
    grid: &SimplexGrid,
    obj: &MeanFieldObjective,
    lambda: f64,
    settings: SolverSettings,
) -> Result<FixedPoint> {
    let SolverSettings {
        damping,
        tol,
        max_iter,
    } = settings;
    if !(damping > 0.0 && damping <= 1.0) || !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need 0 < damping <= 1 and tol > 0 (got {damping}, {tol})"
        )));
    }
    let mut mu = grid.uniform();
    let mut history = Vec::new();
    for iteration in 0..=max_iter {
        let target = proximal_gibbs(grid, obj, &mu, lambda)?;
        let change = mu
            .weights
            .iter()
            .zip(&target.weights)
            .map(|(a, b)| damping * (b - a).abs() / a)
            .fold(0.0, f64::max);
        if change < tol {
            let residual = optimality_residual(grid, obj, &mu, lambda);
            return Ok(FixedPoint {
                measure: mu,
                residual,
                iterations: iteration,
                history,
            });
        }
        if iteration == max_iter {
            break;
        }
        mu = mu.mix(&target, damping);
        history.push(optimality_residual(grid, obj, &mu, lambda));
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: optimality_residual(grid, obj, &mu, lambda),
    })
}

pub fn grid_functionals(
    grid: &SimplexGrid,
    obj: &MeanFieldObjective,
    lambda: f64,
    mu: &GridMeasure,
) -> GridFunctionals {
    let stats = grid.stats(obj, mu);
    let f_value = obj.value(&stats);
    let entropy = entropy(grid, mu);
    let mut mean = [0.0; 3];
    for i in 0..grid.len() {
        for (m, x) in mean.iter_mut().zip(grid.node(i)) {
            *m += mu.weights[i] * x;
        }
    }
    let mut covariance = [0.0; 9];
    for i in 0..grid.len() {
        let x = grid.node(i);
        for a in 0..3 {
            for b in 0..3 {
                covariance[3 * a + b] += mu.weights[i] * (x[a] - mean[a]) * (x[b] - mean[b]);
            }
        }
    }
    GridFunctionals {
        f_value,
        entropy,
        free_energy: f_value + lambda * entropy,
        mean,
        covariance,
    }
}

/// `∫ log(dμ/dσ) dμ` with `σ` the surface measure.
pub fn entropy(grid: &SimplexGrid, mu: &GridMeasure) -> f64 {
    mu.weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| w * (w / grid.cell_volume).ln())
        .sum()
}

pub fn kl_divergence(mu: &GridMeasure, nu: &GridMeasure) -> Result<f64> {
    let mut kl = 0.0;
    for (i, (a, b)) in mu.weights.iter().zip(&nu.weights).enumerate() {
        if *a > 0.0 {
            if !(*b > 0.0) {
                return Err(Error::SupportViolation(format!(
                    "node {i} carries mass {a:e} under the first measure but none under the second"
                )));
            }
            kl += a * (a / b).ln();
        }
    }
    Ok(kl)
}

/// Relative Fisher information `E_μ⟨∇ψ, [∇²φ]⁻¹ ∇ψ⟩`, `ψ = log(dμ/dν)`, with
/// `∇ψ` from nearest-neighbour lattice differences in reduced coordinates.
pub fn fisher_information(grid: &SimplexGrid, mu: &GridMeasure, nu: &GridMeasure) -> Result<f64> {
    kl_divergence(mu, nu)?;
    let map = MirrorMap::simplex(3)?;
    let psi: Vec<Option<f64>> = mu
        .weights
        .iter()
        .zip(&nu.weights)
        .map(|(a, b)| (*a > 0.0).then(|| (a / b).ln()))
        .collect();
    let h = grid.spacing();
    let mut inv = [0.0; 4];
    let mut fi = 0.0;
    for i in 0..grid.len() {
        let Some(center) = psi[i] else { continue };
        let nb = grid.neighbours[i];
        let value = |k: usize| nb[k].and_then(|n| psi[n]);
        let mut grad = [0.0; 2];
        for (axis, g) in grad.iter_mut().enumerate() {
            *g = match (value(2 * axis), value(2 * axis + 1)) {
                (Some(lo), Some(hi)) => (hi - lo) / (2.0 * h),
                (None, Some(hi)) => (hi - center) / h,
                (Some(lo), None) => (center - lo) / h,
                (None, None) => 0.0,
            };
        }
        map.inverse_hessian_ambient(grid.node(i), &mut inv);
        let q = grad[0] * (inv[0] * grad[0] + inv[1] * grad[1])
            + grad[1] * (inv[2] * grad[0] + inv[3] * grad[1]);
        fi += mu.weights[i] * q;
    }
    Ok(fi)
}

/// `(KL(μ‖ν), FI(μ‖ν))`.
pub fn grid_divergences(grid: &SimplexGrid, mu: &GridMeasure, nu: &GridMeasure) -> Result<(f64, f64)> {
    Ok((kl_divergence(mu, nu)?, fisher_information(grid, mu, nu)?))
}

/// `λ KL(μ‖μ*) ≤ L(μ) − L(μ*) ≤ λ KL(μ‖μ̂)` with tolerance `1e-3·max(1, |mid|)`.
pub fn entropy_sandwich_check(
    grid: &SimplexGrid,
    obj: &MeanFieldObjective,
    lambda: f64,
    mu: &GridMeasure,
    minimizer: &GridMeasure,
) -> Result<Sandwich> {
    let lhs = lambda * kl_divergence(mu, minimizer)?;
    let mid = grid_functionals(grid, obj, lambda, mu).free_energy
        - grid_functionals(grid, obj, lambda, minimizer).free_energy;
    let gibbs = proximal_gibbs(grid, obj, mu, lambda)?;
    let rhs = lambda * kl_divergence(mu, &gibbs)?;
    let tol = 1e-3 * mid.abs().max(1.0);
    Ok(Sandwich {
        lhs,
        mid,
        rhs,
        pass: lhs <= mid + tol && mid <= rhs + tol,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleExport {
    pub resolution: usize,
    pub margin: f64,
    pub lambda: f64,
    pub objective: String,
    pub iterations: usize,
    pub residual: f64,
    pub functionals: GridFunctionals,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl OracleExport {
    pub fn new(
        grid: &SimplexGrid,
        obj: &MeanFieldObjective,
        lambda: f64,
        solution: &FixedPoint,
    ) -> Self {
        Self {
            resolution: grid.resolution,
            margin: grid.margin,
            lambda,
            objective: obj.kind_name().to_string(),
            iterations: solution.iterations,
            residual: solution.residual,
            functionals: grid_functionals(grid, obj, lambda, &solution.measure),
            nodes: (0..grid.len())
                .map(|i| {
                    let x = grid.node(i);
                    [x[0], x[1], x[2]]
                })
                .collect(),
            weights: solution.measure.weights.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_match(beta: f64) -> MeanFieldObjective {
        MeanFieldObjective::MeanMatch {
            q: vec![0.5, 0.3, 0.2],
            beta,
        }
    }

    fn dirichlet_222(lambda: f64) -> MeanFieldObjective {
        MeanFieldObjective::LinearPotential {
            alpha: vec![2.0; 3],
            ref_lambda: lambda,
        }
    }

    /// Dirichlet(2,2,2) density against the surface measure.
    fn dirichlet_density(x: &[f64]) -> f64 {
        120.0 * x[0] * x[1] * x[2] / 3f64.sqrt()
    }

    #[test]
    fn grid_construction() {
        let g = SimplexGrid::new(8, 1e-3).unwrap();
        assert_eq!(g.len(), 64);
        for i in 0..g.len() {
            let x = g.node(i);
            assert!(x.iter().all(|v| *v >= g.margin));
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        let total = g.cell_volume * g.len() as f64;
        let clipped = 3f64.sqrt() / 2.0 * (1.0 - 3e-3f64).powi(2);
        assert!((total - clipped).abs() < 1e-10);
        assert!(matches!(SimplexGrid::new(8, 0.05), Err(Error::Config(_))));
        assert!(matches!(SimplexGrid::new(4, 1e-4), Err(Error::Config(_))));
    }

    #[test]
    fn neighbours_are_lattice_steps() {
        let g = SimplexGrid::new(16, 1e-4).unwrap();
        let h = g.spacing();
        for i in 0..g.len() {
            for (k, n) in g.neighbours[i].iter().enumerate() {
                if let Some(n) = n {
                    let axis = k / 2;
                    let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
                    let d = g.node(*n)[axis] - g.node(i)[axis];
                    assert!((d - sign * h).abs() < 1e-12);
                    assert!((g.node(*n)[1 - axis] - g.node(i)[1 - axis]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn proximal_gibbs_examples() {
        let g = SimplexGrid::new(64, 1e-4).unwrap();
        let flat = MeanFieldObjective::LinearPotential {
            alpha: vec![1.0; 3],
            ref_lambda: 0.1,
        };
        let mu = g.from_density(dirichlet_density);
        let hat = proximal_gibbs(&g, &flat, &mu, 0.1).unwrap();
        assert!(hat.weights.iter().all(|w| (w - 1.0 / g.len() as f64).abs() < 1e-15));

        // a measure whose mean is exactly q gives a constant first variation
        let obj = mean_match(0.0);
        let stats = g.stats(&obj, &g.uniform());
        let mean = stats.mean.clone();
        let shifted = MeanFieldObjective::MeanMatch { q: mean, beta: 0.0 };
        let hat = proximal_gibbs(&g, &shifted, &g.uniform(), 0.1).unwrap();
        assert!(hat.weights.iter().all(|w| (w - 1.0 / g.len() as f64).abs() < 1e-12));

        let lambda = 0.1;
        let hat = proximal_gibbs(&g, &dirichlet_222(lambda), &g.uniform(), lambda).unwrap();
        let dens = hat.densities(&g);
        for i in 0..g.len() {
            let want = dirichlet_density(g.node(i));
            assert!((dens[i] / want - 1.0).abs() <= 1e-3, "node {i}");
        }
    }

    #[test]
    fn linear_fixed_point_is_one_gibbs_step() {
        let g = SimplexGrid::new(16, 1e-4).unwrap();
        let obj = dirichlet_222(0.1);
        let settings = SolverSettings {
            damping: 1.0,
            ..SolverSettings::default()
        };
        let sol = fixed_point_solve(&g, &obj, 0.1, settings).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(sol.residual < 1e-12);
    }

    #[test]
    fn mean_match_fixed_point() {
        let g = SimplexGrid::new(64, 1e-4).unwrap();
        let obj = mean_match(0.0);
        let sol = fixed_point_solve(&g, &obj, 0.1, SolverSettings::default()).unwrap();
        assert!(sol.residual < 1e-6, "residual {}", sol.residual);
        // self-consistency: the Gibbs measure of μ* has the same mean
        let f = grid_functionals(&g, &obj, 0.1, &sol.measure);
        let hat = proximal_gibbs(&g, &obj, &sol.measure, 0.1).unwrap();
        let fh = grid_functionals(&g, &obj, 0.1, &hat);
        for c in 0..3 {
            assert!((f.mean[c] - fh.mean[c]).abs() < 1e-3);
        }
        for (a, b) in sol.measure.weights.iter().zip(&hat.weights) {
            assert!((a - b).abs() <= 1e-6 * a);
        }
        // residual decreases monotonically under damping 0.5
        for w in sol.history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-13);
        }
    }

    #[test]
    fn damping_does_not_move_the_fixed_point() {
        // Undamped iteration is only contractive when the mean map is gentle, so
        // compare at a higher temperature.
        let g = SimplexGrid::new(32, 1e-4).unwrap();
        let obj = mean_match(0.0);
        let a = fixed_point_solve(&g, &obj, 0.5, SolverSettings::default()).unwrap();
        let full = SolverSettings {
            damping: 1.0,
            ..SolverSettings::default()
        };
        let b = fixed_point_solve(&g, &obj, 0.5, full).unwrap();
        for (x, y) in a.measure.weights.iter().zip(&b.measure.weights) {
            assert!((x - y).abs() <= 1e-7 * x);
        }
    }

    #[test]
    fn undamped_iteration_can_fail_to_converge() {
        let g = SimplexGrid::new(16, 1e-4).unwrap();
        let settings = SolverSettings {
            damping: 1.0,
            tol: 1e-8,
            max_iter: 200,
        };
        let err = fixed_point_solve(&g, &mean_match(0.0), 0.02, settings).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 200, .. }));
    }

    #[test]
    fn functionals_of_simple_measures() {
        let g = SimplexGrid::new(32, 1e-4).unwrap();
        let obj = mean_match(0.0);
        let u = grid_functionals(&g, &obj, 0.1, &g.uniform());
        assert!((u.entropy + g.area().ln()).abs() < 1e-12);
        for m in u.mean {
            assert!((m - 1.0 / 3.0).abs() < 1e-12);
        }
        let mut point = vec![0.0; g.len()];
        point[17] = 1.0;
        let p = GridMeasure { weights: point };
        let e = grid_functionals(&g, &obj, 0.1, &p).entropy;
        assert!((e + g.cell_volume.ln()).abs() < 1e-12);
    }

    #[test]
    fn divergences() {
        let g = SimplexGrid::new(128, 1e-4).unwrap();
        let u = g.uniform();
        let dir = g.from_density(dirichlet_density);
        assert_eq!(kl_divergence(&u, &u).unwrap(), 0.0);
        assert!(fisher_information(&g, &u, &u).unwrap().abs() < 1e-6);

        // Node quadrature of the closed-form integrand (1/A) log((1/A)/p).
        let area = g.area();
        let direct: f64 = (0..g.len())
            .map(|i| g.cell_volume / area * ((1.0 / area) / dirichlet_density(g.node(i))).ln())
            .sum();
        let kl = kl_divergence(&u, &dir).unwrap();
        assert!(kl > 0.0);
        assert!((kl - direct).abs() <= 1e-3 * direct, "kl {kl} direct {direct}");
        // Continuum value −log(√3/2) + 4.5 − log(120/√3); the log singularity
        // on the edges makes the grid converge only like 1/R.
        let exact = -(3f64.sqrt() / 2.0).ln() + 4.5 - (120.0 / 3f64.sqrt()).ln();
        assert!((kl - exact).abs() < 0.02);

        let mut holes = u.clone();
        let mut zero = dir.clone();
        zero.weights[3] = 0.0;
        holes.weights[3] = 1.0;
        assert!(matches!(kl_divergence(&holes, &zero), Err(Error::SupportViolation(_))));
    }

    #[test]
    fn sandwich_at_the_minimizer_and_for_linear_objectives() {
        let g = SimplexGrid::new(32, 1e-4).unwrap();
        let obj = mean_match(0.0);
        let sol = fixed_point_solve(&g, &obj, 0.1, SolverSettings::default()).unwrap();
        let s = entropy_sandwich_check(&g, &obj, 0.1, &sol.measure, &sol.measure).unwrap();
        assert_eq!(s.lhs, 0.0);
        assert_eq!(s.mid, 0.0);
        assert!(s.rhs >= 0.0 && s.pass);

        let lin = dirichlet_222(0.1);
        let exact = SolverSettings {
            damping: 1.0,
            ..SolverSettings::default()
        };
        let star = fixed_point_solve(&g, &lin, 0.1, exact).unwrap();
        let mu = g.uniform();
        let s = entropy_sandwich_check(&g, &lin, 0.1, &mu, &star.measure).unwrap();
        assert!((s.lhs - s.rhs).abs() < 1e-9 && (s.mid - s.lhs).abs() < 1e-9);
    }

    #[test]
    fn linear_convexity_of_mean_match() {
        let g = SimplexGrid::new(16, 1e-4).unwrap();
        let obj = mean_match(1e-4);
        let a = g.from_density(|x| x[0] * x[0]);
        let b = g.from_density(|x| (x[1] + x[2]).powi(3));
        let fa = obj.value(&g.stats(&obj, &a));
        let fb = obj.value(&g.stats(&obj, &b));
        for t in [0.25, 0.5, 0.75] {
            let mix = b.mix(&a, t);
            let fm = obj.value(&g.stats(&obj, &mix));
            assert!(fm <= t * fa + (1.0 - t) * fb + 1e-12);
        }
    }
}
