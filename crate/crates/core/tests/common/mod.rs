//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use rand::Rng;
use sepcov::{AtomicMeasure, ModelSpec};

pub fn mp_edges(c: f64) -> (f64, f64) {
    ((1.0 - c.sqrt()).powi(2), (1.0 + c.sqrt()).powi(2))
}

/// Continuous part of the MP law with ratio `c`.
pub fn mp_density(c: f64, x: f64) -> f64 {
    let (a, b) = mp_edges(c);
    if x <= a || x >= b {
        0.0
    } else {
        ((b - x) * (x - a)).sqrt() / (2.0 * PI * c * x)
    }
}

/// Root of `c z m² + (z + c - 1) m + 1 = 0` in the upper half plane.
pub fn mp_stieltjes(c: f64, z: C) -> C {
    let qa = c * z;
    let qb = z + c - 1.0;
    let disc = (qb * qb - 4.0 * qa).sqrt();
    let r1 = (-qb + disc) / (2.0 * qa);
    let r2 = (-qb - disc) / (2.0 * qa);
    if r1.im > r2.im {
        r1
    } else {
        r2
    }
}

/// Slopes `f(x)/√|x-edge|` of the MP density at its left and right edges.
pub fn mp_edge_slopes(c: f64) -> (f64, f64) {
    let (a, b) = mp_edges(c);
    ((b - a).sqrt() / (2.0 * PI * c * a), (b - a).sqrt() / (2.0 * PI * c * b))
}

/// Residual of the two-point identity
/// `(1 - z1 z2 γ γ̃)(δ̃1 - δ̃2) = (z1 - z2) ∫ t/(z1 z2 (1+δ1 t)(1+δ2 t)) nu_tilde`,
/// relative to the size of its terms.
pub fn two_point_residual(model: &ModelSpec, z1: C, d1: C, dt1: C, z2: C, d2: C, dt2: C) -> f64 {
    let zz = z1 * z2;
    let gamma = model.nu.integrate_c(|t| t * t / (zz * (1.0 + dt1 * t) * (1.0 + dt2 * t))) * model.c;
    let gamma_t = model
        .nu_tilde
        .integrate_c(|t| t * t / (zz * (1.0 + d1 * t) * (1.0 + d2 * t)));
    let lhs = (1.0 - zz * gamma * gamma_t) * (dt1 - dt2);
    let rhs = (z1 - z2) * model.nu_tilde.integrate_c(|t| t / (zz * (1.0 + d1 * t) * (1.0 + d2 * t)));
    (lhs - rhs).norm() / (lhs.norm() + rhs.norm() + 1e-300)
}

/// Plain damped fixed-point iteration of the master system, far slower than
/// the library solver but with nothing shared.
pub fn picard_reference(model: &ModelSpec, z: C, iters: usize, damping: f64) -> (C, C) {
    let mut d = C::new(0.0, 1.0);
    let mut dt = C::new(0.0, 1.0);
    for _ in 0..iters {
        let nd = model.nu.integrate_c(|t| t / (-z * (1.0 + dt * t))) * model.c;
        let ndt = model.nu_tilde.integrate_c(|t| t / (-z * (1.0 + nd * t)));
        d = d * (1.0 - damping) + nd * damping;
        dt = dt * (1.0 - damping) + ndt * damping;
    }
    (d, dt)
}

pub fn two_by_two_model() -> ModelSpec {
    ModelSpec::new(
        10.0,
        AtomicMeasure::new([(1.0, 0.5), (2.0, 0.5)]).unwrap(),
        AtomicMeasure::new([(1.0, 0.5), (10.0, 0.5)]).unwrap(),
    )
    .unwrap()
}

/// Random measure with `k` positive atoms in `[lo, hi]`, optionally with
/// mass `zero` at the origin.
pub fn random_measure<R: Rng>(rng: &mut R, k: usize, lo: f64, hi: f64, zero: f64) -> AtomicMeasure {
    let mut locs: Vec<f64> = (0..k).map(|_| rng.random_range(lo..hi)).collect();
    locs.sort_by(f64::total_cmp);
    locs.dedup();
    let raw: Vec<f64> = locs.iter().map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut pairs: Vec<(f64, f64)> = locs
        .iter()
        .zip(&raw)
        .map(|(&t, &w)| (t, (1.0 - zero) * w / total))
        .collect();
    if zero > 0.0 {
        pairs.push((0.0, zero));
    }
    AtomicMeasure::new(pairs).unwrap()
}

pub fn random_model<R: Rng>(rng: &mut R, k: usize, k_tilde: usize) -> ModelSpec {
    let c = 10f64.powf(rng.random_range(-1.0..1.0));
    let nu = random_measure(rng, k, 0.5, 10.0, 0.0);
    let nt = random_measure(rng, k_tilde, 0.5, 10.0, 0.0);
    ModelSpec::new(c, nu, nt).unwrap()
}

/// Least-squares fit of `y = Σ_j β_j φ_j(x)`.
pub fn least_squares(xs: &[f64], ys: &[f64], basis: &[&dyn Fn(f64) -> f64]) -> Vec<f64> {
    let a = nalgebra::DMatrix::from_fn(xs.len(), basis.len(), |i, j| basis[j](xs[i]));
    let b = nalgebra::DVector::from_column_slice(ys);
    let sol = a.svd(true, true).solve(&b, 1e-14).unwrap();
    sol.iter().copied().collect()
}
