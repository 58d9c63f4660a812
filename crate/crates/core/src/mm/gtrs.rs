//! Global minimizer of `qᵀDq − 2vᵀq` over the unit sphere.
//!
//! In the eigenbasis of `D = QΛQᵀ` with `w = Qᵀv`, stationary points are
//! `q(μ) = (D + μI)^{-1} v`. The global minimizer uses the unique `μ > −λ_min`
//! with `‖q(μ)‖ = 1`. When `w` has no component along the `λ_min` eigenspace
//! and `‖q(−λ_min)‖ < 1` (the hard case) the remaining norm is placed along a
//! `λ_min` eigenvector whose first nonzero component is positive.

use nalgebra::{Matrix3, Vector3};

use crate::linalg::SymEigen3;
use crate::manifold::DoaVector;

const NORM_TOL: f64 = 1e-12;
const MAX_ITERS: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct GtrsSolution {
    pub q: DoaVector,
    /// Lagrange multiplier, `(D + μI) q = v`.
    pub mu: f64,
    pub hard_case: bool,
}

pub fn solve_gtrs(d: &Matrix3<f64>, v: &Vector3<f64>) -> GtrsSolution {
    let eig = SymEigen3::new(d);
    let lam = eig.values;
    let w = eig.vectors.transpose() * v;
    let lam_min = lam[0];

    let spread = lam[2] - lam[0];
    let eig_tol = 1e-12 * lam[0].abs().max(lam[2].abs()).max(f64::MIN_POSITIVE);
    let in_min_space = |i: usize| lam[i] - lam_min <= eig_tol;
    let w_norm = w.norm();
    let w_min = (0..3).filter(|&i| in_min_space(i)).map(|i| w[i] * w[i]).sum::<f64>().sqrt();

    if w_min <= 1e-13 * (w_norm + spread) || w_norm == 0.0 {
        let mut rest = Vector3::zeros();
        for i in (0..3).filter(|&i| !in_min_space(i)) {
            rest[i] = w[i] / (lam[i] - lam_min);
        }
        let rest_norm2 = rest.norm_squared();
        if rest_norm2 <= 1.0 {
            let mut e = eig.vectors.column(0).into_owned();
            if let Some(first) = e.iter().find(|x| x.abs() > 1e-14) {
                if *first < 0.0 {
                    e = -e;
                }
            }
            let q = eig.vectors * rest + e * (1.0 - rest_norm2).max(0.0).sqrt();
            return GtrsSolution { q: DoaVector::from_unit(q / q.norm()), mu: -lam_min, hard_case: true };
        }
    }

    let mu = find_multiplier(&lam, &w);
    let y = Vector3::from_fn(|i, _| w[i] / (lam[i] + mu));
    let q = eig.vectors * y;
    GtrsSolution { q: DoaVector::from_unit(q / q.norm()), mu, hard_case: false }
}

/// Root of `‖q(μ)‖² = 1` on `(−λ_min, ‖w‖ − λ_min]` by Newton on
/// `1 − 1/‖q(μ)‖`, falling back to bisection when a step leaves the bracket.
fn find_multiplier(lam: &Vector3<f64>, w: &Vector3<f64>) -> f64 {
    let norm2 = |mu: f64| (0..3).map(|i| (w[i] / (lam[i] + mu)).powi(2)).sum::<f64>();
    let mut lo = -lam[0];
    let mut hi = w.norm() - lam[0];
    let mut mu = hi;
    for _ in 0..MAX_ITERS {
        let n2 = norm2(mu);
        if (n2 - 1.0).abs() <= NORM_TOL {
            break;
        }
        if n2 > 1.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let n = n2.sqrt();
        let s3: f64 = (0..3).map(|i| w[i] * w[i] / (lam[i] + mu).powi(3)).sum();
        let newton = mu + (n - 1.0) * n2 / s3;
        mu = if newton > lo && newton < hi && newton.is_finite() { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * mu.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    // never sit on the pole
    mu.max((-lam[0]).next_up())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::fibonacci_points;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn value(d: &Matrix3<f64>, v: &Vector3<f64>, q: &Vector3<f64>) -> f64 {
        q.dot(&(d * q)) - 2.0 * v.dot(q)
    }

    #[test]
    fn identity_pulls_toward_v() {
        let sol = solve_gtrs(&Matrix3::identity(), &Vector3::new(2.0, 0.0, 0.0));
        assert!((sol.q.as_vector() - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-14);
        assert!(!sol.hard_case);
        assert!((sol.mu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hard_case_zero_linear_term() {
        let d = Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0));
        let sol = solve_gtrs(&d, &Vector3::zeros());
        assert!(sol.hard_case);
        assert_eq!(*sol.q.as_vector(), Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(sol.mu, -1.0);

        // v orthogonal to the bottom eigenvector with a small remainder
        let sol = solve_gtrs(&d, &Vector3::new(0.0, 0.3, 0.0));
        assert!(sol.hard_case);
        let q = sol.q.as_vector();
        assert!((q.y - 0.3).abs() < 1e-14);
        assert!(q.x > 0.0);
        assert!((q.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_problems_beat_a_dense_grid() {
        let grid: Vec<Vector3<f64>> = fibonacci_points(20_000).iter().map(|q| *q.as_vector()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..50 {
            let b = Matrix3::<f64>::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let d = b * b.transpose();
            let v = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let sol = solve_gtrs(&d, &v);
            let q = sol.q.as_vector();
            assert!((q.norm() - 1.0).abs() < 1e-14);
            let best = grid.iter().map(|g| value(&d, &v, g)).fold(f64::INFINITY, f64::min);
            assert!(value(&d, &v, q) <= best + 1e-12);
            if !sol.hard_case {
                assert!(((d + Matrix3::identity() * sol.mu) * q - v).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn indefinite_and_near_hard_cases() {
        let d = Matrix3::from_diagonal(&Vector3::new(-2.0, 0.5, 4.0));
        for eps in [1e-3, 1e-8, 1e-12] {
            let v = Vector3::new(eps, 0.2, 0.1);
            let sol = solve_gtrs(&d, &v);
            let q = sol.q.as_vector();
            assert!((q.norm() - 1.0).abs() < 1e-14);
            assert!(q.x.abs() > 0.9, "{q:?}");
            assert!(sol.mu > 2.0 - 1e-9);
        }
    }
}
