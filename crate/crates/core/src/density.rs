//! Density of the limit measure on the punctured real line and its atom at
//! zero.
//!
//! Boundary values are reached by continuation down an ε-ladder
//! `z = x + iε`, `ε = 1e-2, 1e-3, …, 1e-9`, with linear Richardson
//! extrapolation in ε of the imaginary parts.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::{self, ModelSpec, SolverPoint};

/// Default ε-ladder.
pub const EPS_LADDER: [f64; 8] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9];

/// Density threshold separating support from gaps.
pub const GAP_THRESHOLD: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityOptions {
    pub ladder: Vec<f64>,
    /// Ladder stabilization tolerance, relative to `1 + f`.
    pub tol: f64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            ladder: EPS_LADDER.to_vec(),
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityPoint {
    pub x: f64,
    pub f: f64,
    pub im_delta: f64,
    pub im_delta_tilde: f64,
    pub eps_used: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProfile {
    pub grid: Vec<f64>,
    pub points: Vec<DensityPoint>,
    pub atom_at_zero: f64,
    pub total_mass_estimate: f64,
}

/// `mu({0}) = 1 - min[1 - nu({0}), (1 - nu_tilde({0})) / c]`.
pub fn mass_at_zero(model: &ModelSpec) -> f64 {
    let a = 1.0 - model.nu.mass_at_zero();
    let b = (1.0 - model.nu_tilde.mass_at_zero()) / model.c;
    1.0 - a.min(b)
}

pub fn density_at(model: &ModelSpec, x: f64) -> Result<DensityPoint> {
    density_at_with(model, x, None, &DensityOptions::default()).map(|(p, _)| p)
}

/// Evaluates the density at `x`, optionally warm-started from a solution at
/// the top rung of a neighboring point. Returns the top-rung solution too so
/// that callers can chain evaluations.
pub fn density_at_with(
    model: &ModelSpec,
    x: f64,
    warm: Option<&SolverPoint>,
    opts: &DensityOptions,
) -> Result<(DensityPoint, SolverPoint)> {
    if x == 0.0 {
        return Err(Error::ZeroPoint);
    }
    if !x.is_finite() || opts.ladder.is_empty() {
        return Err(Error::InvalidGrid(format!("bad evaluation point {x}")));
    }
    let z0 = Complex64::new(x, opts.ladder[0]);
    let top = match warm {
        Some(w) => solver::step_to(model, w, z0)
            .or_else(|_| solver::solve_master(model, z0, None))?,
        None => solver::solve_master(model, z0, None)?,
    };

    let read = |p: &SolverPoint| [p.m.im / PI, p.delta.im, p.delta_tilde.im];
    let mut prev_eps = opts.ladder[0];
    let mut prev = read(&top);
    let mut cur = top;
    let mut out = prev;
    let mut eps_used = prev_eps;
    let mut converged = false;
    for &eps in &opts.ladder[1..] {
        cur = solver::step_to(model, &cur, Complex64::new(x, eps))?;
        let now = read(&cur);
        // Linear extrapolation to ε = 0 from the last two rungs.
        let w = eps / (prev_eps - eps);
        for k in 0..3 {
            out[k] = now[k] + (now[k] - prev[k]) * w;
        }
        eps_used = eps;
        let done = (now[0] - prev[0]).abs() < opts.tol * (1.0 + now[0].abs());
        prev = now;
        prev_eps = eps;
        if done {
            converged = true;
            break;
        }
    }
    let point = DensityPoint {
        x,
        f: out[0].max(0.0),
        im_delta: out[1].max(0.0),
        im_delta_tilde: out[2].max(0.0),
        eps_used,
        converged,
    };
    Ok((point, top))
}

/// Evenly spaced density profile on `[x_min, x_max]`, evaluated left to
/// right with warm starts.
pub fn density_grid(model: &ModelSpec, x_min: f64, x_max: f64, n_points: usize) -> Result<DensityProfile> {
    if n_points < 2 {
        return Err(Error::InvalidGrid("need at least two points".into()));
    }
    if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
        return Err(Error::InvalidGrid(format!("[{x_min}, {x_max}] is not an interval")));
    }
    if !(x_min > 0.0 || x_max < 0.0) {
        return Err(Error::InvalidGrid(format!("[{x_min}, {x_max}] contains 0")));
    }
    let h = (x_max - x_min) / (n_points - 1) as f64;
    let grid: Vec<f64> = (0..n_points)
        .map(|i| if i + 1 == n_points { x_max } else { x_min + h * i as f64 })
        .collect();
    density_on_grid(model, grid)
}

/// Density on an arbitrary increasing grid avoiding zero.
pub fn density_on_grid(model: &ModelSpec, grid: Vec<f64>) -> Result<DensityProfile> {
    if grid.contains(&0.0) {
        return Err(Error::ZeroPoint);
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
    }
    let opts = DensityOptions::default();
    let mut points = Vec::with_capacity(grid.len());
    let mut warm: Option<SolverPoint> = None;
    for &x in &grid {
        let (p, top) = match density_at_with(model, x, warm.as_ref(), &opts) {
            Ok(r) => r,
            Err(_) if warm.is_some() => density_at_with(model, x, None, &opts)?,
            Err(e) => return Err(e),
        };
        points.push(p);
        warm = Some(top);
    }
    let atom = mass_at_zero(model);
    let fs: Vec<f64> = points.iter().map(|p| p.f).collect();
    let total_mass_estimate = trapezoid(&grid, &fs) + atom;
    Ok(DensityProfile {
        grid,
        points,
        atom_at_zero: atom,
        total_mass_estimate,
    })
}

pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Running trapezoid integral, starting at 0 on the first grid point.
pub fn cumulative_trapezoid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(xs.len());
    out.push(0.0);
    for (x, y) in xs.windows(2).zip(ys.windows(2)) {
        acc += 0.5 * (x[1] - x[0]) * (y[0] + y[1]);
        out.push(acc);
    }
    out
}

impl DensityProfile {
    /// CSV with columns `x,f,im_delta,im_delta_tilde,eps_used,converged`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for p in &self.points {
            wr.serialize(p)?;
        }
        wr.flush()
    }

    pub fn densities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.f).collect()
    }
}
