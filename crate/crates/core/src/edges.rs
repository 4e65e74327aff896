//! Support edges: location, curvature of the branch, square-root slope and
//! derivatives of the scalar equation
//! `F(δ̃, x) = ∫ s/(-x + ψ(δ̃)s) nu_tilde(ds) - δ̃`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::Interval;
use crate::solver::ModelSpec;
use crate::support::{self, BranchSample, PairId};

/// Below this `|x''|` the edge is reported as degenerate.
pub const DEGENERATE_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSide {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeInfo {
    pub a: f64,
    pub delta_tilde_a: f64,
    pub delta_a: f64,
    pub side: EdgeSide,
    pub x_second: f64,
    /// `None` for degenerate edges.
    pub h_prime: Option<f64>,
    pub f2: f64,
    pub f3: f64,
    pub pair: PairId,
}

fn sample(model: &ModelSpec, comp: Interval, comp_tilde: Interval, dt: f64) -> Result<BranchSample> {
    support::branch_x(model, comp, comp_tilde, dt)?.ok_or(Error::OffBranch(f64::NAN))
}

/// Polishes the extremum of `x_{I,Ĩ}` inside `bracket`.
pub fn polish_edge(model: &ModelSpec, comp: Interval, comp_tilde: Interval, bracket: (f64, f64)) -> Result<EdgeInfo> {
    let i = model.nu_tilde.dual_components().intervals.iter().position(|c| *c == comp).unwrap_or(usize::MAX);
    let it = model.nu.dual_components().intervals.iter().position(|c| *c == comp_tilde).unwrap_or(usize::MAX);
    polish_edge_with(model, PairId { i, i_tilde: it }, comp, comp_tilde, bracket)
}

pub(crate) fn polish_edge_with(
    model: &ModelSpec,
    pair: PairId,
    comp: Interval,
    comp_tilde: Interval,
    bracket: (f64, f64),
) -> Result<EdgeInfo> {
    let (l, r) = if bracket.0 <= bracket.1 { bracket } else { (bracket.1, bracket.0) };
    let mut lo = sample(model, comp, comp_tilde, l)?;
    let mut hi = sample(model, comp, comp_tilde, r)?;
    if (lo.stab > 0.0) == (hi.stab > 0.0) {
        return Err(Error::NoSignChange);
    }
    // Increasing then decreasing: a local maximum, which is a left edge.
    let side = if lo.stab > 0.0 { EdgeSide::Left } else { EdgeSide::Right };
    let lo_sign = lo.stab > 0.0;
    for _ in 0..200 {
        if hi.delta_tilde - lo.delta_tilde <= 1e-14 * lo.delta_tilde.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo.delta_tilde + hi.delta_tilde);
        if mid <= lo.delta_tilde || mid >= hi.delta_tilde {
            break;
        }
        let s = sample(model, comp, comp_tilde, mid)?;
        if (s.stab > 0.0) == lo_sign {
            lo = s;
        } else {
            hi = s;
        }
    }
    // Newton on x' = 0, kept inside the final bracket.
    let mut best = if lo.x_prime.abs() <= hi.x_prime.abs() { lo } else { hi };
    let mut dt = best.delta_tilde;
    for _ in 0..4 {
        let (_, x1, x2) = support::branch_derivatives(model, dt, best.delta)?;
        if x1.abs() < 1e-14 || x2 == 0.0 {
            break;
        }
        let next = dt - x1 / x2;
        if !(next >= lo.delta_tilde && next <= hi.delta_tilde) || next == dt {
            break;
        }
        let s = sample(model, comp, comp_tilde, next)?;
        if s.x_prime.abs() >= best.x_prime.abs() {
            break;
        }
        best = s;
        dt = next;
    }
    let (a, _, x_second) = support::branch_derivatives(model, best.delta_tilde, best.delta)?;
    let f2 = f_derivatives(model, best.delta_tilde, a, 2)?;
    let f3 = f_derivatives(model, best.delta_tilde, a, 3)?;
    let mut info = EdgeInfo {
        a,
        delta_tilde_a: best.delta_tilde,
        delta_a: best.delta,
        side,
        x_second,
        h_prime: None,
        f2,
        f3,
        pair,
    };
    info.h_prime = edge_slope(model, &info).ok();
    Ok(info)
}

/// `H'(0) = (1/(πa)) √(2/|x''|) ∫ t/(1+δ̃_a t)² nu(dt)`.
pub fn edge_slope(model: &ModelSpec, edge: &EdgeInfo) -> Result<f64> {
    if !(edge.x_second.abs() > DEGENERATE_THRESHOLD) {
        return Err(Error::DegenerateEdge {
            x_second: edge.x_second,
            f3: edge.f3,
        });
    }
    let dt = edge.delta_tilde_a;
    let integral = model.nu.integrate(|t| {
        let den = 1.0 + dt * t;
        t / (den * den)
    });
    Ok((2.0 / edge.x_second.abs()).sqrt() * integral / (PI * edge.a))
}

/// Terms of the `order`-th derivative of `F` in `δ̃`, before summation.
fn f_terms(model: &ModelSpec, dt: f64, x: f64, order: u8) -> Result<Vec<f64>> {
    let mut p = [0.0; 4];
    for atom in model.nu.positive_atoms() {
        let den = 1.0 + dt * atom.t;
        if den.abs() < 1e-14 {
            return Err(Error::PoleHit);
        }
        let r = atom.t / den;
        p[0] += atom.w * r;
        p[1] += atom.w * r * r;
        p[2] += atom.w * r * r * r;
        p[3] += atom.w * r * r * r * r;
    }
    let c = model.c;
    let psi = c * p[0];
    let psi1 = -c * p[1];
    let psi2 = 2.0 * c * p[2];
    let psi3 = -6.0 * c * p[3];
    let mut s = [0.0; 5];
    for atom in model.nu_tilde.positive_atoms() {
        let d = -x + psi * atom.t;
        if d.abs() < 1e-14 * (1.0 + x.abs()) {
            return Err(Error::PoleHit);
        }
        let q = atom.t / d;
        s[1] += atom.w * q;
        s[2] += atom.w * q * q;
        s[3] += atom.w * q * q * q;
        s[4] += atom.w * q * q * q * q;
    }
    let resid = s[1] - dt;
    if resid.abs() > 1e-8 * (1.0 + dt.abs()) {
        return Err(Error::OffBranch(resid));
    }
    Ok(match order {
        1 => vec![-psi1 * s[2], -1.0],
        2 => vec![-psi2 * s[2], 2.0 * psi1 * psi1 * s[3]],
        3 => vec![
            -psi3 * s[2],
            6.0 * psi1 * psi2 * s[3],
            -6.0 * psi1 * psi1 * psi1 * s[4],
        ],
        _ => vec![resid],
    })
}

/// `∂^k F/∂δ̃^k (δ̃, x)` for `k = order ∈ {1, 2, 3}`; any other order returns
/// `F` itself.
pub fn f_derivatives(model: &ModelSpec, delta_tilde: f64, x: f64, order: u8) -> Result<f64> {
    Ok(f_terms(model, delta_tilde, x, order)?.iter().sum())
}

/// Sum of absolute values of the terms of the `order`-th derivative.
pub fn natural_scale(model: &ModelSpec, delta_tilde: f64, x: f64, order: u8) -> Result<f64> {
    Ok(f_terms(model, delta_tilde, x, order)?.iter().map(|v| v.abs()).sum())
}
