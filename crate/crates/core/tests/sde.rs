use hmcf_core::sde::weak_order::weak_order_check;
use hmcf_core::sde::{
    ks_critical, ks_statistic, mean_stderr, simulate, simulate_horizontal_bm, ConstantPolicy, ControlPolicy,
    GradientOrthogonalPolicy, Integrator, SimSpec,
};
use hmcf_core::{AnalyticField, Dynamics, Frame, ScalarField};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use std::sync::Arc;

fn spec(horizon: f64, dt: f64, paths: usize, seed: u64) -> SimSpec {
    SimSpec {
        t: 0.0,
        horizon,
        dt,
        paths,
        seed,
        record_every: 0,
        integrator: Integrator::Heun,
    }
}

fn coordinate(e: &hmcf_core::PathEnsemble, i: usize) -> Vec<f64> {
    (0..e.paths()).map(|k| e.terminal(k)[i]).collect()
}

/// Sample variance about a known mean, with its standard error.
fn second_moment(vals: &[f64], mean: f64) -> (f64, f64) {
    let sq: Vec<f64> = vals.iter().map(|v| (v - mean).powi(2)).collect();
    mean_stderr(&sq)
}

#[test]
fn euclidean_bm_has_unit_rate_variance() {
    let f = Frame::euclidean(2).unwrap();
    let e = simulate_horizontal_bm(&f, &[0.5, -1.0], 1.0, 0.01, 100_000, 3).unwrap();
    for (i, x0) in [0.5, -1.0].into_iter().enumerate() {
        let (var, se) = second_moment(&coordinate(&e, i), x0);
        assert!((var - 1.0).abs() <= 3.0 * se, "coordinate {i}: {var} +- {se}");
    }
}

#[test]
fn levy_area_moments() {
    // third coordinate from the origin is the Levy area, variance T^2 / 4
    let f = Frame::heisenberg1();
    let e = simulate_horizontal_bm(&f, &[0.0; 3], 1.0, 2e-3, 20_000, 17).unwrap();
    let area = coordinate(&e, 2);
    let (m, se) = mean_stderr(&area);
    assert!(m.abs() <= 3.0 * se, "{m} +- {se}");
    let (m2, _) = second_moment(&area, 0.0);
    assert!((m2 - 0.25).abs() <= 0.05 * 0.25, "{m2}");
}

#[test]
fn heun_and_euler_maruyama_agree_in_law_for_constant_fields() {
    let f = Frame::euclidean(2).unwrap();
    let d = Dynamics::horizontal_bm(&f);
    let heun = simulate(&d, None, &[0.0, 0.0], &spec(1.0, 0.02, 20_000, 5)).unwrap();
    let mut em_spec = spec(1.0, 0.02, 20_000, 6);
    em_spec.integrator = Integrator::EulerMaruyama;
    let em = simulate(&d, None, &[0.0, 0.0], &em_spec).unwrap();
    for i in 0..2 {
        let ks = ks_statistic(&coordinate(&heun, i), &coordinate(&em, i));
        assert!(ks < ks_critical(20_000, 20_000, 0.01), "coordinate {i}: {ks}");
    }
}

#[test]
fn controlled_eps_normal_direction_variance() {
    // a = e3 leaves both horizontal noises, each scaled by sqrt(2)
    let ef = Frame::heisenberg1().with_epsilon(0.5).unwrap();
    let d = Dynamics::controlled_eps(&ef);
    let pol = ConstantPolicy::new("e3", vec![0.0, 0.0, 1.0]).unwrap();
    let e = simulate(&d, Some(&pol), &[0.0; 3], &spec(0.3, 0.01, 50_000, 8)).unwrap();
    for i in 0..2 {
        let (var, se) = second_moment(&coordinate(&e, i), 0.0);
        assert!((var - 0.6).abs() <= 3.0 * se, "coordinate {i}: {var} +- {se}");
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

proptest! {
    #[test]
    fn projected_noise_is_orthogonal_to_the_direction(
        a in prop::collection::vec(-1.0f64..1.0, 3),
        db in prop::collection::vec(-1.0f64..1.0, 3),
        eps in 0.05f64..1.0,
    ) {
        prop_assume!(a.iter().map(|x| x * x).sum::<f64>() > 1e-2);
        let a = unit(&a);
        let d = Dynamics::controlled_eps(&Frame::heisenberg1().with_epsilon(eps).unwrap());
        let mut out = [0.0; 3];
        d.increment(&db, Some(&a), &mut out);
        let dot: f64 = out.iter().zip(&a).map(|(x, y)| x * y).sum();
        prop_assert!(dot.abs() <= 1e-15);
    }
}

#[test]
fn constant_direction_freezes_its_coordinate_along_paths() {
    let ef = Frame::euclidean(3).unwrap().with_epsilon(1.0).unwrap();
    let d = Dynamics::controlled_eps(&ef);
    let pol = ConstantPolicy::new("e2", vec![0.0, 1.0, 0.0]).unwrap();
    let mut s = spec(0.2, 0.01, 200, 2);
    s.record_every = 1;
    let e = simulate(&d, Some(&pol), &[0.1, 0.2, 0.3], &s).unwrap();
    for k in 0..e.paths() {
        for r in 0..e.recorded.len() {
            assert_eq!(e.state(k, r)[1], 0.2);
        }
    }
}

fn guide() -> Arc<dyn ScalarField> {
    Arc::new(AnalyticField::quadric(3, &[0, 1], 1.0))
}

#[test]
fn ensembles_do_not_depend_on_worker_count() {
    let ef = Frame::heisenberg1().with_epsilon(0.5).unwrap();
    let d = Dynamics::controlled_eps(&ef);
    let pol = GradientOrthogonalPolicy::eps("feedback", &ef, guide(), vec![0.0, 0.0, 1.0]).unwrap();
    let mut s = spec(0.2, 0.01, 1000, 99);
    s.record_every = 5;
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| simulate(&d, Some(&pol as &dyn ControlPolicy), &[0.3, -0.2, 0.1], &s).unwrap())
    };
    assert_eq!(run(1), run(8));
    let bm = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| simulate_horizontal_bm(ef.base(), &[0.0; 3], 1.0, 0.01, 777, 4).unwrap())
    };
    assert_eq!(bm(1), bm(3));
}

#[test]
fn path_count_does_not_change_leading_paths() {
    let f = Frame::heisenberg1();
    let small = simulate_horizontal_bm(&f, &[0.0; 3], 0.5, 0.01, 10, 7).unwrap();
    let large = simulate_horizontal_bm(&f, &[0.0; 3], 0.5, 0.01, 300, 7).unwrap();
    for k in 0..10 {
        assert_eq!(small.terminal(k), large.terminal(k));
    }
}

fn test_function() -> AnalyticField {
    // sin(x1) cos(x2) + exp(0.3 x1) + 0.5 sin(x3)
    AnalyticField::new(
        3,
        |_, x| x[0].sin() * x[1].cos() + (0.3 * x[0]).exp() + 0.5 * x[2].sin(),
        |_, x| {
            let (s1, c1) = x[0].sin_cos();
            let (s2, c2) = x[1].sin_cos();
            DVector::from_vec(vec![c1 * c2 + 0.3 * (0.3 * x[0]).exp(), -s1 * s2, 0.5 * x[2].cos()])
        },
        |_, x| {
            let (s1, c1) = x[0].sin_cos();
            let (s2, c2) = x[1].sin_cos();
            DMatrix::from_row_slice(
                3,
                3,
                &[
                    -s1 * c2 + 0.09 * (0.3 * x[0]).exp(),
                    -c1 * s2,
                    0.0,
                    -c1 * s2,
                    -s1 * c2,
                    0.0,
                    0.0,
                    0.0,
                    -0.5 * x[2].sin(),
                ],
            )
        },
    )
}

#[test]
fn weak_order_on_heisenberg() {
    let ef = Frame::heisenberg1().with_epsilon(0.5).unwrap();
    let d = Dynamics::controlled_eps(&ef);
    let a = unit(&[0.3, -0.5, 0.8]);
    let r = weak_order_check(
        &d,
        &test_function(),
        &[0.4, -0.3, 0.7],
        Some(&a),
        &[4e-3, 2e-3, 1e-3],
        100_000,
        1,
        Integrator::Heun,
    )
    .unwrap();
    assert!(r.min_order() >= 0.9, "{r:?}");
}

#[test]
fn weak_order_on_horizontal_bm() {
    let d = Dynamics::horizontal_bm(&Frame::heisenberg1());
    let r = weak_order_check(
        &d,
        &test_function(),
        &[0.4, -0.3, 0.7],
        None,
        &[4e-3, 2e-3, 1e-3],
        100_000,
        2,
        Integrator::Heun,
    )
    .unwrap();
    assert!(r.min_order() >= 0.9, "{r:?}");
}
