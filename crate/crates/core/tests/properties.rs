use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, Rotation3, Vector3};
use ndarray::Array3;
use num_complex::Complex64;
use proptest::prelude::*;

use doa_refine::estimators::{objective, power_mean, CostSpec};
use doa_refine::manifold::angles_from_doa;
use doa_refine::mm::{cosine_upper_bound, refine, solve_gtrs, wrap_phase, Variant};
use doa_refine::prelude::*;
use doa_refine::spectral::Weighting;

fn unit() -> impl Strategy<Value = DoaVector> {
    (-1.0f64..1.0, -PI..PI).prop_map(|(z, az)| DoaVector::from_angles(z.acos(), az))
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn psd(m: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    proptest::collection::vec(complex(), m * m).prop_map(move |v| {
        let b = DMatrix::from_vec(m, m, v);
        &b * b.adjoint()
    })
}

fn geometry(m: usize) -> impl Strategy<Value = ArrayGeometry> {
    (any::<u64>(), 0.02f64..0.3).prop_map(move |(seed, r)| ArrayGeometry::random_ball(m, r, seed).unwrap())
}

fn spec(m: usize, k: usize) -> impl Strategy<Value = CostSpec> {
    (proptest::collection::vec(psd(m), k), prop::sample::select(vec![-3.0, -1.0, -0.5, 0.5, 1.0])).prop_map(
        move |(v, s)| {
            let omega = (1..=k).map(|i| 2.0 * PI * 250.0 * i as f64 / 343.0).collect();
            CostSpec::new(v, omega, s).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn great_circle_is_a_metric(a in unit(), b in unit(), c in unit()) {
        let d = great_circle_distance;
        prop_assert!((0.0..=PI).contains(&d(&a, &b)));
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        prop_assert_eq!(d(&a, &a), 0.0);
    }

    #[test]
    fn angles_round_trip(q in unit()) {
        let (colat, az) = angles_from_doa(&q);
        prop_assert!((0.0..=PI).contains(&colat));
        prop_assert!(az > -PI && az <= PI);
        prop_assert!((DoaVector::from_angles(colat, az).as_vector() - q.as_vector()).norm() < 1e-12);
    }

    #[test]
    fn evaluate_ignores_estimate_order(truth in proptest::collection::vec(unit(), 1..5), seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut est: Vec<DoaVector> = truth.iter().map(|q| DoaVector::new(q.as_vector() + Vector3::new(0.01, -0.02, 0.0)).unwrap()).collect();
        let base = evaluate(&est, &truth).unwrap();
        est.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(evaluate(&est, &truth).unwrap(), base.clone());
        prop_assert!(base.iter().all(|e| (0.0..=180.0).contains(e)));
    }

    #[test]
    fn power_mean_is_monotone_in_s(y in proptest::collection::vec(1e-3f64..10.0, 1..20)) {
        let ss = [-10.0, -3.0, -1.0, -0.5, 0.2, 0.5, 0.8, 1.0];
        let means: Vec<f64> = ss.iter().map(|&s| power_mean(&y, s)).collect();
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(0.0, f64::max);
        for w in means.windows(2) {
            prop_assert!(w[0] <= w[1] * (1.0 + 1e-12));
        }
        prop_assert!(means.iter().all(|&m| m >= lo * (1.0 - 1e-12) && m <= hi * (1.0 + 1e-12)));
    }

    #[test]
    fn cosine_bound_majorizes(theta in -30.0f64..30.0, theta0 in -30.0f64..30.0) {
        prop_assert!(cosine_upper_bound(theta, theta0) >= -theta.cos() - 1e-12);
        prop_assert!((cosine_upper_bound(theta0, theta0) + theta0.cos()).abs() < 1e-12);
        let (z, phi) = wrap_phase(theta0);
        prop_assert!(phi > -PI && phi <= PI);
        prop_assert!((theta0 + 2.0 * PI * z as f64 - phi).abs() < 1e-9);
    }

    #[test]
    fn objective_is_rotation_invariant(spec in spec(5, 3), g in geometry(5), q in unit(), axis in unit(), angle in -PI..PI) {
        let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis.as_vector()), angle);
        let rotated = g.rotated(r.matrix()).unwrap();
        let rq = DoaVector::new(r * q.as_vector()).unwrap();
        let a = objective(&spec, &g, &q);
        let b = objective(&spec, &rotated, &rq);
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn gtrs_beats_random_feasible_points(entries in proptest::collection::vec(-2.0f64..2.0, 12), probes in proptest::collection::vec(unit(), 50)) {
        let b = Matrix3::from_column_slice(&entries[..9]);
        let d = b * b.transpose();
        let v = Vector3::new(entries[9], entries[10], entries[11]);
        let sol = solve_gtrs(&d, &v);
        let f = |x: &Vector3<f64>| x.dot(&(d * x)) - 2.0 * v.dot(x);
        let q = sol.q.as_vector();
        prop_assert!((q.norm() - 1.0).abs() < 1e-14);
        for p in &probes {
            prop_assert!(f(q) <= f(p.as_vector()) + 1e-10);
        }
    }

    #[test]
    fn refinement_stays_on_the_sphere_and_descends(spec in spec(4, 4), g in geometry(4), q0 in unit(), linear in any::<bool>()) {
        let variant = if linear { Variant::Linear } else { Variant::Quadratic };
        let trace = refine(&spec, &g, q0, variant, 10, 0.0);
        for q in &trace.iterates {
            prop_assert!((q.as_vector().norm() - 1.0).abs() < 1e-12);
        }
        // full-rank random V_k keep the cost well above rounding
        for w in trace.objectives.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs());
        }
    }

    #[test]
    fn phat_is_idempotent_and_covariance_trace_matches(values in proptest::collection::vec(complex(), 3 * 4 * 2)) {
        let data = Array3::from_shape_vec((3, 4, 2), values).unwrap();
        let frames = SpectralFrames::new(data, vec![100.0, 200.0, 300.0], 16_000.0).unwrap();
        let once = apply_weighting(&frames, Weighting::Phat);
        let twice = apply_weighting(&once, Weighting::Phat);
        for (a, b) in once.data.iter().zip(twice.data.iter()) {
            prop_assert!((a - b).norm() < 1e-15);
        }
        let cov = sample_covariance(&frames).unwrap();
        for (k, s) in cov.matrices.iter().enumerate() {
            let direct: f64 = frames.data.slice(ndarray::s![k, .., ..]).iter().map(|x| x.norm_sqr()).sum::<f64>() / 4.0;
            prop_assert!((s.trace().re - direct).abs() < 1e-12);
        }
    }
}
