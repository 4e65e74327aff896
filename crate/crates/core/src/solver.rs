//! Fixed-point solver for the coupled master equations
//!
//! ```text
//! delta       = c * ∫ t / (-z (1 + delta_tilde t)) nu(dt)
//! delta_tilde =     ∫ t / (-z (1 + delta t))       nu_tilde(dt)
//! ```
//!
//! at points of the upper half plane. The solve runs a damped Picard
//! iteration on the pair until the residual is moderate, then switches to
//! Newton on the scalar equation `F(delta_tilde, z) = 0` obtained by
//! substituting the first equation into the second. Solutions are validated
//! against the half-plane invariants; a vertical homotopy from a point far
//! from the real axis backs up the direct solve.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;

type C = Complex64;

const POLE_TOL: f64 = 1e-14;

/// The ensemble: ratio `c = lim N/n` and the limit spectra of the two
/// deterministic covariance factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub c: f64,
    pub nu: AtomicMeasure,
    pub nu_tilde: AtomicMeasure,
}

impl ModelSpec {
    pub fn new(c: f64, nu: AtomicMeasure, nu_tilde: AtomicMeasure) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidRatio(c));
        }
        Ok(Self { c, nu, nu_tilde })
    }

    /// Marchenko–Pastur model: both factors are the identity.
    pub fn marchenko_pastur(c: f64) -> Result<Self> {
        Self::new(c, AtomicMeasure::dirac(1.0)?, AtomicMeasure::dirac(1.0)?)
    }

    /// `c * ∫ t/(-z(1+delta_tilde t)) nu(dt)`.
    pub fn delta_map(&self, z: C, delta_tilde: C) -> C {
        self.nu.integrate_c(|t| t / (-z * (1.0 + delta_tilde * t))) * self.c
    }

    /// `∫ t/(-z(1+delta t)) nu_tilde(dt)`.
    pub fn delta_tilde_map(&self, z: C, delta: C) -> C {
        self.nu_tilde.integrate_c(|t| t / (-z * (1.0 + delta * t)))
    }

    /// Scalar form `F(delta_tilde, z)`.
    pub fn f_scalar(&self, z: C, delta_tilde: C) -> C {
        self.delta_tilde_map(z, self.delta_map(z, delta_tilde)) - delta_tilde
    }

    /// `∂F/∂delta_tilde = z² γ(z,z) γ̃(z,z) - 1`.
    pub fn f_scalar_derivative(&self, z: C, delta: C, delta_tilde: C) -> C {
        let a = self
            .nu
            .integrate_c(|t| t * t / ((1.0 + delta_tilde * t) * (1.0 + delta_tilde * t)))
            * self.c;
        let b = self
            .nu_tilde
            .integrate_c(|t| t * t / ((1.0 + delta * t) * (1.0 + delta * t)));
        a * b / (z * z) - 1.0
    }

    fn residual(&self, z: C, delta: C, delta_tilde: C) -> f64 {
        let r1 = (self.delta_map(z, delta_tilde) - delta).norm() / (1.0 + delta.norm());
        let r2 = (self.delta_tilde_map(z, delta) - delta_tilde).norm() / (1.0 + delta_tilde.norm());
        r1.max(r2)
    }
}

/// Iteration controls. Defaults: damping 0.5, Picard until 1e-6, then
/// Newton to 1e-12, with 200 + 50 iteration budgets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub picard_switch: f64,
    pub damping: f64,
    pub picard_iters: usize,
    pub newton_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            picard_switch: 1e-6,
            damping: 0.5,
            picard_iters: 200,
            newton_iters: 50,
        }
    }
}

/// Solution of the master system at one point.
///
/// `residual` is the larger of the two fixed-point residuals, each scaled by
/// `1 + |value|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverPoint {
    pub z: C,
    pub delta: C,
    pub delta_tilde: C,
    pub m: C,
    pub m_tilde: C,
    pub stab: f64,
    pub residual: f64,
}

impl SolverPoint {
    pub fn init(&self) -> (C, C) {
        (self.delta, self.delta_tilde)
    }
}

/// `γ(z,z*)`, `γ̃(z,z*)` and the stability margin `1 - |z|² γ γ̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gammas {
    pub gamma: f64,
    pub gamma_tilde: f64,
    pub stab: f64,
}

/// Stieltjes transforms of `mu` and `mu_tilde` from the deltas:
/// `m = -1/z - delta delta_tilde / c`, `m_tilde = -1/z - delta delta_tilde`.
pub fn m_from_deltas(model: &ModelSpec, z: C, delta: C, delta_tilde: C) -> (C, C) {
    let p = delta * delta_tilde;
    let base = -z.inv();
    (base - p / model.c, base - p)
}

/// Direct evaluation `m = ∫ 1/(-z(1 + delta_tilde t)) nu(dt)`.
pub fn m_direct(model: &ModelSpec, z: C, delta_tilde: C) -> C {
    model.nu.integrate_c(|t| (-z * (1.0 + delta_tilde * t)).inv())
}

pub fn gammas(model: &ModelSpec, z: C, delta: C, delta_tilde: C) -> Result<Gammas> {
    let z2 = z.norm_sqr();
    if z2 == 0.0 {
        return Err(Error::PoleHit);
    }
    let mut a = 0.0;
    for at in model.nu.atoms() {
        let d = (1.0 + delta_tilde * at.t).norm_sqr();
        if at.t > 0.0 && d.sqrt() < POLE_TOL {
            return Err(Error::PoleHit);
        }
        a += at.w * at.t * at.t / d;
    }
    let mut b = 0.0;
    for at in model.nu_tilde.atoms() {
        let d = (1.0 + delta * at.t).norm_sqr();
        if at.t > 0.0 && d.sqrt() < POLE_TOL {
            return Err(Error::PoleHit);
        }
        b += at.w * at.t * at.t / d;
    }
    let gamma = model.c * a / z2;
    let gamma_tilde = b / z2;
    Ok(Gammas {
        gamma,
        gamma_tilde,
        stab: 1.0 - z2 * gamma * gamma_tilde,
    })
}

/// Large-|z| seed: `delta ≈ -c M_nu / z`, `delta_tilde ≈ -M_nu_tilde / z`.
pub fn default_seed(model: &ModelSpec, z: C) -> (C, C) {
    let zi = -z.inv();
    (zi * (model.c * model.nu.moment(1)), zi * model.nu_tilde.moment(1))
}

pub fn solve_master(model: &ModelSpec, z: C, init: Option<(C, C)>) -> Result<SolverPoint> {
    solve_master_with(model, z, init, &SolverOptions::default())
}

pub fn solve_master_with(
    model: &ModelSpec,
    z: C,
    init: Option<(C, C)>,
    opts: &SolverOptions,
) -> Result<SolverPoint> {
    if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::NotUpperHalfPlane);
    }
    if let Some((d, dt)) = init {
        if d.im < 0.0 || dt.im < 0.0 || !d.is_finite() || !dt.is_finite() {
            return Err(Error::InvalidInit);
        }
    }
    let start = init.unwrap_or_else(|| default_seed(model, z));
    let mut best = f64::INFINITY;

    let (_, dt) = picard(model, z, start, opts);
    match newton(model, z, dt, opts) {
        Ok(p) => return Ok(p),
        Err(r) => best = best.min(r),
    }
    if init.is_some() {
        match newton(model, z, start.1, opts) {
            Ok(p) => return Ok(p),
            Err(r) => best = best.min(r),
        }
    }
    match vertical_homotopy(model, z, opts) {
        Ok(p) => Ok(p),
        Err(r) => Err(Error::NoConvergence {
            best_residual: best.min(r),
        }),
    }
}

fn picard(model: &ModelSpec, z: C, start: (C, C), opts: &SolverOptions) -> (C, C) {
    let (mut d, mut dt) = start;
    let th = opts.damping;
    for _ in 0..opts.picard_iters {
        let nd = model.delta_map(z, dt);
        let ndt = model.delta_tilde_map(z, d);
        let r1 = (nd - d).norm() / (1.0 + d.norm());
        let r2 = (ndt - dt).norm() / (1.0 + dt.norm());
        if !(nd.is_finite() && ndt.is_finite()) {
            break;
        }
        if r1.max(r2) < opts.picard_switch {
            return (nd, ndt);
        }
        d = d * (1.0 - th) + nd * th;
        dt = dt * (1.0 - th) + ndt * th;
    }
    (d, dt)
}

/// Newton on `F(delta_tilde, z) = 0`; returns the validated point or the best
/// residual reached.
fn newton(model: &ModelSpec, z: C, dt0: C, opts: &SolverOptions) -> std::result::Result<SolverPoint, f64> {
    let mut dt = dt0;
    let mut settled = 0;
    let mut best = f64::INFINITY;
    for _ in 0..opts.newton_iters {
        let d = model.delta_map(z, dt);
        let f = model.delta_tilde_map(z, d) - dt;
        if !f.is_finite() {
            return Err(best);
        }
        let scaled = f.norm() / (1.0 + dt.norm());
        best = best.min(scaled);
        if scaled <= opts.tol * 1e-2 {
            settled += 1;
            if settled >= 2 {
                break;
            }
        }
        let fp = model.f_scalar_derivative(z, d, dt);
        if fp.norm() == 0.0 {
            return Err(best);
        }
        let step = f / fp;
        dt -= step;
        if step.norm() <= 1e-17 * (1.0 + dt.norm()) {
            settled += 1;
            if settled >= 2 {
                break;
            }
        }
    }
    finish(model, z, dt, opts).ok_or(best)
}

fn finish(model: &ModelSpec, z: C, dt: C, opts: &SolverOptions) -> Option<SolverPoint> {
    let d = model.delta_map(z, dt);
    let residual = model.residual(z, d, dt);
    if !(residual < opts.tol) {
        return None;
    }
    let g = gammas(model, z, d, dt).ok()?;
    let p = make_point(model, z, d, dt, g.stab, residual);
    if admissible(&p) {
        Some(p)
    } else {
        None
    }
}

fn make_point(model: &ModelSpec, z: C, d: C, dt: C, stab: f64, residual: f64) -> SolverPoint {
    let (m, m_tilde) = m_from_deltas(model, z, d, dt);
    SolverPoint {
        z,
        delta: d,
        delta_tilde: dt,
        m,
        m_tilde,
        stab,
        residual,
    }
}

/// Half-plane invariants of the true solution. Near the real axis the
/// imaginary parts are allowed a rounding-level slack.
fn admissible(p: &SolverPoint) -> bool {
    let slack = |v: C| 1e-15 * (1.0 + v.norm());
    let zd = p.z * p.delta;
    let zdt = p.z * p.delta_tilde;
    p.delta.im > -slack(p.delta)
        && p.delta_tilde.im > -slack(p.delta_tilde)
        && zd.im > -slack(zd)
        && zdt.im > -slack(zdt)
        && p.stab > -1e-12
}

/// Continue from a solved point to `z_to` with Newton steps, subdividing the
/// segment (geometrically in the imaginary part) when a step fails.
pub fn step_to(model: &ModelSpec, from: &SolverPoint, z_to: C) -> Result<SolverPoint> {
    step_to_with(model, from, z_to, &SolverOptions::default())
}

pub fn step_to_with(
    model: &ModelSpec,
    from: &SolverPoint,
    z_to: C,
    opts: &SolverOptions,
) -> Result<SolverPoint> {
    if !(z_to.im > 0.0) {
        return Err(Error::NotUpperHalfPlane);
    }
    let at = |s: f64| -> C {
        let re = from.z.re + s * (z_to.re - from.z.re);
        let im = from.z.im.powf(1.0 - s) * z_to.im.powf(s);
        C::new(re, im)
    };
    let mut cur = *from;
    let mut s = 0.0f64;
    let mut h = 1.0f64;
    let mut best = f64::INFINITY;
    while s < 1.0 {
        let next_s = (s + h).min(1.0);
        let z = if next_s >= 1.0 { z_to } else { at(next_s) };
        match newton(model, z, cur.delta_tilde, opts) {
            Ok(p) => {
                cur = p;
                s = next_s;
                h = (h * 2.0).min(1.0);
            }
            Err(r) => {
                best = best.min(r);
                h *= 0.5;
                if h < 1e-6 {
                    return solve_master_with(model, z_to, Some(cur.init()), opts)
                        .map_err(|_| Error::NoConvergence { best_residual: best });
                }
            }
        }
    }
    Ok(cur)
}

fn vertical_homotopy(model: &ModelSpec, z: C, opts: &SolverOptions) -> std::result::Result<SolverPoint, f64> {
    let scale = 1.0 + z.norm() + model.c * model.nu.max_location() * model.nu_tilde.max_location();
    let top = C::new(z.re, (10.0 * scale).max(z.im));
    let seed = default_seed(model, top);
    let (_, dt) = picard(model, top, seed, opts);
    let start = newton(model, top, dt, opts)?;
    step_to_with(model, &start, z, opts).map_err(|e| match e {
        Error::NoConvergence { best_residual } => best_residual,
        _ => f64::INFINITY,
    })
}

/// Solves along a path, warm-starting each point from its predecessor.
pub fn continue_path(model: &ModelSpec, path: &[C], init: Option<(C, C)>) -> Result<Vec<SolverPoint>> {
    let mut out: Vec<SolverPoint> = Vec::with_capacity(path.len());
    for (index, &z) in path.iter().enumerate() {
        let res = match out.last() {
            None => solve_master(model, z, init),
            Some(prev) => step_to(model, prev, z),
        };
        match res {
            Ok(p) => out.push(p),
            Err(Error::NoConvergence { best_residual }) => {
                return Err(Error::PathNoConvergence { index, best_residual })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
