//! Quasi-uniform unit-vector sets used for brute-force maximisation over
//! extremal controls and for constant-direction policy families.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Default resolution on the 2-sphere.
pub const SPHERE_DEFAULT: usize = 720;
/// Default resolution on the circle.
pub const CIRCLE_DEFAULT: usize = 256;
/// Seed used for the scattered sets in dimension four and above.
pub const SCATTER_SEED: u64 = 0x5eed_d1ec;

/// `n` equally spaced angles on the unit circle, starting at `e1`.
pub fn circle(n: usize) -> Vec<DVector<f64>> {
    (0..n)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / n as f64;
            DVector::from_vec(vec![th.cos(), th.sin()])
        })
        .collect()
}

/// Fibonacci lattice of `n` points on the unit 2-sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<DVector<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let th = golden * k as f64;
            DVector::from_vec(vec![r * th.cos(), r * th.sin(), z])
        })
        .collect()
}

/// Normalised Gaussian samples from a fixed seed.
pub fn scattered(dim: usize, n: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v = DVector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(&mut rng)));
        let norm: f64 = v.norm();
        if norm > 1e-8 {
            out.push(v / norm);
        }
    }
    out
}

/// Direction set for `dim`: a single axis for `dim = 1`, equispaced angles
/// on the circle, a Fibonacci lattice on the sphere, scattered points above.
pub fn direction_grid(dim: usize, n: usize) -> Vec<DVector<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![DVector::from_element(1, 1.0)],
        2 => circle(n),
        3 => fibonacci_sphere(n),
        _ => scattered(dim, n, SCATTER_SEED),
    }
}

/// Default resolution for `dim`.
pub fn default_resolution(dim: usize) -> usize {
    match dim {
        2 => CIRCLE_DEFAULT,
        _ => SPHERE_DEFAULT,
    }
}
