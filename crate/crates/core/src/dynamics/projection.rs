/// Euclidean projection onto `{x ≥ 0, Σx = 1}` by the sorted-threshold rule.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    let mut sorted = v.to_vec();
    project_simplex_in_place(&mut out, &mut sorted);
    out
}

/// In-place variant; `scratch` must have the same length as `x`.
pub fn project_simplex_in_place(x: &mut [f64], scratch: &mut [f64]) {
    scratch.copy_from_slice(x);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, v) in scratch.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if *v > t {
            theta = t;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}

pub fn clip_box(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, (a, b)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*a, *b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_examples() {
        let p = project_simplex(&[1.2, 0.3, 0.1]);
        for (a, b) in p.iter().zip([0.95, 0.05, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let third = project_simplex(&[1.0 / 3.0; 3]);
        assert!(third.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(project_simplex(&[10.0, 0.0, 0.0]), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn box_clip() {
        let mut x = [-4.0, 0.5, 7.0];
        clip_box(&mut x, &[(-3.0, 3.0), (0.0, 1.0), (-1.0, 2.0)]);
        assert_eq!(x, [-3.0, 0.5, 2.0]);
    }

    /// Brute-force oracle: minimise ‖x − v‖² over a fine simplex lattice.
    fn lattice_projection(v: &[f64; 3], n: usize) -> [f64; 3] {
        let mut best = [0.0; 3];
        let mut best_d = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=n - i {
                let x = [i as f64 / n as f64, j as f64 / n as f64, (n - i - j) as f64 / n as f64];
                let d: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best_d {
                    best_d = d;
                    best = x;
                }
            }
        }
        best
    }

    proptest! {
        #[test]
        fn output_is_feasible_and_idempotent(v in prop::collection::vec(-5.0f64..5.0, 1..8)) {
            let p = project_simplex(&v);
            prop_assert!(p.iter().all(|x| *x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let again = project_simplex(&p);
            for (a, b) in p.iter().zip(&again) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn matches_brute_force(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0) {
            let v = [a, b, c];
            let p = project_simplex(&v);
            let oracle = lattice_projection(&v, 400);
            for (x, y) in p.iter().zip(oracle) {
                prop_assert!((x - y).abs() <= 5e-3);
            }
        }
    }
}
