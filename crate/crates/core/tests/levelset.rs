use hmcf_core::levelset::{
    approx_curvature, approx_gradient, approx_normal, horizontal_gradient, horizontal_normal, is_characteristic,
    sym_horizontal_hessian,
};
use hmcf_core::pde::{Grid, LevelSetField};
use hmcf_core::{AnalyticField, EpsilonFrame, Frame, Monomial, Polynomial, ScalarField};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use std::sync::Arc;

const EXPONENTS: [[u32; 3]; 10] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [2, 0, 0],
    [0, 2, 0],
    [0, 0, 2],
    [1, 1, 0],
    [0, 1, 1],
    [1, 0, 1],
    [1, 1, 1],
];

fn random_field(c: &[f64]) -> AnalyticField {
    let terms = c
        .iter()
        .zip(EXPONENTS.iter())
        .map(|(&a, e)| Monomial::new(a, e.to_vec()))
        .collect();
    AnalyticField::polynomial(Polynomial::from_terms(3, terms).unwrap())
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, EXPONENTS.len())
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, 3)
}

/// `X_j^eps u` through a central difference of `u` along the field.
fn fd_field_derivative(eframe: &EpsilonFrame, j: usize, f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> f64 {
    let v = eframe.fields()[j].eval(x);
    let xp: Vec<f64> = x.iter().zip(v.iter()).map(|(a, b)| a + h * b).collect();
    let xm: Vec<f64> = x.iter().zip(v.iter()).map(|(a, b)| a - h * b).collect();
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// Nested finite differences `(X_i (X_j u) + X_j (X_i u)) / 2`.
fn nested_fd_hessian(eframe: &EpsilonFrame, u: &dyn ScalarField, x: &[f64]) -> DMatrix<f64> {
    let n = eframe.dim();
    let h = 1e-4;
    let val = |y: &[f64]| u.value(0.0, y);
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let inner = |y: &[f64]| fd_field_derivative(eframe, j, &val, y, h);
            out[(i, j)] += 0.5 * fd_field_derivative(eframe, i, &inner, x, h);
            out[(j, i)] += 0.5 * fd_field_derivative(eframe, i, &inner, x, h);
        }
    }
    out
}

fn fd_gradient(u: &dyn ScalarField, x: &[f64], h: f64) -> DVector<f64> {
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|k| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            (u.value(0.0, &xp) - u.value(0.0, &xm)) / (2.0 * h)
        }),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn analytic_derivatives_match_finite_differences(c in coeffs(), x in point()) {
        let u = random_field(&c);
        let g = u.gradient(0.0, &x);
        let fd = fd_gradient(&u, &x, 1e-5);
        prop_assert!((&g - &fd).amax() <= 1e-5 * (1.0 + g.amax()));
        let hess = u.hessian(0.0, &x);
        prop_assert_eq!(&hess, &hess.transpose());
        let h = 1e-4;
        for k in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let col = (u.gradient(0.0, &xp) - u.gradient(0.0, &xm)) / (2.0 * h);
            for r in 0..3 {
                prop_assert!((hess[(r, k)] - col[r]).abs() <= 1e-5 * (1.0 + hess.amax()));
            }
        }
    }

    #[test]
    fn sym_hessian_matches_nested_oracle(c in coeffs(), x in point(), eps in 0.1f64..1.0) {
        let ef = Frame::heisenberg1().with_epsilon(eps).unwrap();
        let u = random_field(&c);
        let exact = sym_horizontal_hessian(&ef, &u, 0.0, &x).unwrap();
        prop_assert_eq!(&exact, &exact.transpose());
        let oracle = nested_fd_hessian(&ef, &u, &x);
        prop_assert!((&exact - &oracle).amax() <= 1e-4, "{} vs {}", exact, oracle);
    }

    #[test]
    fn normals_have_unit_length(c in coeffs(), x in point(), eps in 0.01f64..1.0) {
        let f = Frame::heisenberg1();
        let u = random_field(&c);
        if let Ok(n) = horizontal_normal(&f, &u, 0.0, &x) {
            prop_assert!((n.norm() - 1.0).abs() <= 1e-12);
        }
        let ef = f.with_epsilon(eps).unwrap();
        if let Ok(n) = approx_normal(&ef, &u, 0.0, &x) {
            prop_assert!((n.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn approx_gradient_degenerates_to_horizontal(c in coeffs(), x in point()) {
        let f = Frame::heisenberg1();
        let u = random_field(&c);
        let hg = horizontal_gradient(&f, &u, 0.0, &x).unwrap();
        let du = u.gradient(0.0, &x);
        for eps in [1.0, 0.1, 0.01, 0.001] {
            let ag = approx_gradient(&f.with_epsilon(eps).unwrap(), &u, 0.0, &x).unwrap();
            prop_assert_eq!(ag[0], hg[0]);
            prop_assert_eq!(ag[1], hg[1]);
            prop_assert!((ag[2] - eps * du[2]).abs() <= 1e-15 * (1.0 + du[2].abs()));
        }
    }

    #[test]
    fn characteristic_flag_is_scale_invariant(c in coeffs(), x in point(), scale in 1e-3f64..1e3) {
        let f = Frame::heisenberg1();
        let u = random_field(&c);
        let cu: Vec<f64> = c.iter().map(|v| v * scale).collect();
        let su = random_field(&cu);
        prop_assert_eq!(is_characteristic(&f, &u, 0.0, &x).unwrap(), is_characteristic(&f, &su, 0.0, &x).unwrap());
    }
}

#[test]
fn characteristic_points_survive_rescaling() {
    let f = Frame::heisenberg1();
    for scale in [1e-6, 1e-3, 1.0, 1e3, 1e6] {
        let u = AnalyticField::polynomial(
            Polynomial::from_terms(
                3,
                vec![
                    Monomial::new(scale, vec![2, 0, 0]),
                    Monomial::new(scale, vec![0, 2, 0]),
                    Monomial::new(scale, vec![0, 0, 2]),
                ],
            )
            .unwrap(),
        );
        for z in [-2.0, 0.5, 1.0, 3.0] {
            assert!(is_characteristic(&f, &u, 0.0, &[0.0, 0.0, z]).unwrap());
        }
        assert!(!is_characteristic(&f, &u, 0.0, &[0.3, 0.0, 1.0]).unwrap());
    }
}

#[test]
fn analytic_curvature_matches_finite_difference_divergence() {
    // divergence of the normalized approximated gradient along the
    // epsilon-frame, computed with nested central differences
    let ef = Frame::heisenberg1().with_epsilon(0.5).unwrap();
    let u = random_field(&[0.3, -0.2, 0.5, 1.0, 0.7, 0.4, -0.3, 0.2, 0.1, 0.05]);
    let normal = |y: &[f64]| approx_normal(&ef, &u, 0.0, y).unwrap();
    for x in [[0.4, -0.3, 0.2], [1.0, 0.5, -0.7], [-0.6, 0.9, 0.3]] {
        let h = 1e-5;
        let mut div = 0.0;
        for i in 0..3 {
            let v = ef.fields()[i].eval(&x);
            let xp: Vec<f64> = x.iter().zip(v.iter()).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.iter().zip(v.iter()).map(|(a, b)| a - h * b).collect();
            div += (normal(&xp)[i] - normal(&xm)[i]) / (2.0 * h);
        }
        let k = approx_curvature(&ef, &u, 0.0, &x).unwrap();
        assert!((k - div).abs() < 1e-6 * (1.0 + div.abs()), "{k} vs {div}");
    }
}

#[test]
fn grid_curvature_of_cylinder() {
    let ef = Frame::heisenberg1().with_epsilon(0.5).unwrap();
    let g = Arc::new(Grid::cube(3, -1.5, 1.5, 121).unwrap());
    let field = LevelSetField::from_fn(g, 0.0, |x| x[0] * x[0] + x[1] * x[1] - 1.0).unwrap();
    for (r, th) in [(0.8, 0.3), (1.0, 1.1), (0.6, 2.5)] {
        let x = [r * f64::cos(th), r * f64::sin(th), 0.37];
        let k = approx_curvature(&ef, &field, 0.0, &x).unwrap();
        assert!((k - 1.0 / r).abs() < 2e-2 / r, "r={r}: {k}");
    }
}
