use criterion::{criterion_group, criterion_main, Criterion};
use hmcf_core::directions::direction_grid;
use hmcf_core::pde::Stepper;
use hmcf_core::sde::{simulate_terminal, ConstantPolicy, Integrator, SimSpec};
use hmcf_core::value::{constant_family, hamiltonian_h_eps, search, Exponent, Search, SearchSpec};
use hmcf_core::{Dynamics, Frame, Grid, LevelSetField, TerminalCost};
use nalgebra::DMatrix;
use std::hint::black_box;
use std::sync::Arc;

fn pde_step(c: &mut Criterion) {
    let ef = Frame::heisenberg1().with_epsilon(0.5).unwrap();
    let grid = Arc::new(Grid::cube(3, -1.5, 1.5, 41).unwrap());
    let u0 = LevelSetField::from_fn(grid.clone(), 0.0, |x| x[0] * x[0] + x[1] * x[1] - 1.0 + 0.1 * x[2]).unwrap();
    let stepper = Stepper::new(&ef, grid).unwrap();
    let dt = stepper.cfl_limit();
    let mut out = u0.clone();
    c.bench_function("pde_step_heisenberg_41^3", |b| {
        b.iter(|| stepper.step_into(black_box(&u0), dt, &mut out).unwrap())
    });
}

fn sde_paths(c: &mut Criterion) {
    let ef = Frame::heisenberg1().with_epsilon(0.5).unwrap();
    let d = Dynamics::controlled_eps(&ef);
    let pol = ConstantPolicy::new("e3", vec![0.0, 0.0, 1.0]).unwrap();
    let spec = SimSpec {
        t: 0.0,
        horizon: 0.2,
        dt: 1e-3,
        paths: 1024,
        seed: 1,
        record_every: 0,
        integrator: Integrator::Heun,
    };
    c.bench_function("sde_1024_paths_200_steps", |b| {
        b.iter(|| simulate_terminal(&d, Some(&pol), black_box(&[0.3, 0.1, 0.0]), &spec, 0..spec.paths).unwrap())
    });
}

fn hamiltonian(c: &mut Criterion) {
    let ef = Frame::heisenberg1().with_epsilon(0.5).unwrap();
    let dirs = direction_grid(3, 720);
    let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.3, -0.5, 0.7, -0.2, 0.7, 0.4]);
    for refine in [false, true] {
        let search = Search {
            directions: &dirs,
            refine,
        };
        c.bench_function(&format!("hamiltonian_720_refine={refine}"), |b| {
            b.iter(|| hamiltonian_h_eps(&ef, black_box(&[0.2, -0.4, 0.1]), &[0.5, 0.1, -0.3], &s, search).unwrap())
        });
    }
}

fn policy_search(c: &mut Criterion) {
    let ef = Frame::heisenberg1().with_epsilon(0.5).unwrap();
    let d = Dynamics::controlled_eps(&ef);
    let cost = TerminalCost::cylinder(3, 1.0, 1.0).unwrap();
    let pols = constant_family(3, 24).unwrap();
    let spec = SearchSpec {
        t: 0.0,
        horizon: 0.2,
        dt: 0.01,
        paths: 2000,
        seed: 3,
        exponents: vec![Exponent::Finite(4.0), Exponent::Infinity],
        budgets: vec![],
        integrator: Integrator::Heun,
    };
    let mut g = c.benchmark_group("search");
    g.sample_size(10);
    g.bench_function("24_policies_2000_paths", |b| {
        b.iter(|| search(&d, &cost, &pols, black_box(&[0.5, 0.0, 0.0]), &spec).unwrap())
    });
    g.finish();
}

criterion_group!(benches, pde_step, sde_paths, hamiltonian, policy_search);
criterion_main!(benches);
