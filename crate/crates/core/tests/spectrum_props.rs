mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sepcov::density::{self, GAP_THRESHOLD};
use sepcov::edges::{self, EdgeSide};
use sepcov::support::{self, BranchSample, SupportReport};
use sepcov::ModelSpec;

use common::*;

fn random_models(seed: u64, n: usize) -> Vec<ModelSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| random_model(&mut rng, 1 + k % 3, 1 + (k / 3) % 3))
        .collect()
}

fn hull_grid(rep: &SupportReport, n: usize) -> (f64, f64, usize) {
    let (lo, hi) = rep.hull().unwrap();
    let pad = 0.01 * (hi - lo);
    ((lo - pad).max(1e-6 * hi), hi + pad, n)
}

#[test]
fn two_by_two_mass_and_gaps() {
    let model = two_by_two_model();
    let rep = support::compute_support(&model).unwrap();
    let (a, b, n) = hull_grid(&rep, 4096);
    let prof = density::density_grid(&model, a, b, n).unwrap();
    assert!((prof.total_mass_estimate - 1.0).abs() < 2e-3, "{}", prof.total_mass_estimate);
    let continuous = prof.total_mass_estimate - prof.atom_at_zero;
    assert!((continuous - 0.1).abs() < 2e-3);
    for w in rep.intervals.windows(2) {
        let p = density::density_at(&model, 0.5 * (w[0][1] + w[1][0])).unwrap();
        assert!(p.f < 1e-9 && p.im_delta_tilde < 1e-9, "{p:?}");
    }
}

#[test]
fn density_grid_invariants() {
    let mut models = random_models(31, 6);
    models.push(two_by_two_model());
    for model in &models {
        let rep = support::compute_support(model).unwrap();
        let (a, b, n) = hull_grid(&rep, 4096);
        let prof = density::density_grid(model, a, b, n).unwrap();
        let h = (b - a) / (n - 1) as f64;
        let near_edge = |x: f64| rep.intervals.iter().any(|iv| (x - iv[0]).abs() < 2.5 * h || (x - iv[1]).abs() < 2.5 * h);
        let in_support = |x: f64, slack: f64| rep.intervals.iter().any(|iv| x >= iv[0] - slack && x <= iv[1] + slack);
        for p in &prof.points {
            // Positivity of f, Im δ and Im δ̃ agree.
            let (f, d, dt) = (p.f, p.im_delta, p.im_delta_tilde);
            if f.max(d).max(dt) > 1e-8 {
                assert!(f.min(d).min(dt) > 0.0, "{p:?}");
            }
            if p.f > GAP_THRESHOLD {
                assert!(in_support(p.x, h), "f = {} at {} outside {:?}", p.f, p.x, rep.intervals);
            }
            if in_support(p.x, -h) {
                assert!(p.f > 0.0, "zero density inside support at {}", p.x);
            }
        }
        // Continuity away from edges.
        let f = prof.densities();
        for k in 2..f.len() - 2 {
            if near_edge(prof.grid[k]) || near_edge(prof.grid[k + 1]) {
                continue;
            }
            let slope = [(f[k] - f[k - 1]).abs(), (f[k + 1] - f[k]).abs(), (f[k + 2] - f[k + 1]).abs()]
                .iter()
                .fold(0.0f64, |m, v| m.max(*v))
                / h;
            let jump = (f[k + 1] - f[k]).abs();
            assert!(jump <= 10.0 * h * slope + 1e-12, "jump {jump} at {}", prof.grid[k]);
        }
        assert!((prof.total_mass_estimate - 1.0).abs() < 2e-3, "{}", prof.total_mass_estimate);
    }
}

fn check_sample(model: &ModelSpec, s: &BranchSample) {
    let g = support::g_transfer(&model.nu, model.c, s.delta_tilde).unwrap();
    let gt = support::g_transfer(&model.nu_tilde, 1.0, s.delta).unwrap();
    let slope_of = |m: &sepcov::AtomicMeasure, scale: f64, d: f64| {
        scale * m.integrate(|t| t / ((1.0 + d * t) * (1.0 + d * t)))
    };
    let slope = slope_of(&model.nu_tilde, 1.0, s.delta);
    let slope_t = slope_of(&model.nu, model.c, s.delta_tilde);
    // Rounding of δ and δ̃ amplified by the local slopes of g̃ and g.
    let cond = 8.0 * f64::EPSILON * (s.delta.abs() * slope.abs() + s.delta_tilde.abs() * slope_t.abs());
    assert!((g - gt).abs() <= 1e-10 * (1.0 + g.abs()) + cond, "{g} {gt} {cond} {s:?}");
    let x = -g / (s.delta * s.delta_tilde);
    assert!((x - s.x).abs() <= 1e-10 * (1.0 + x.abs()) + cond / (s.delta * s.delta_tilde).abs());
    assert_eq!(s.x_prime > 0.0, s.stab > 0.0, "{s:?}");
}

#[test]
fn branch_samples_and_support_structure() {
    let mut models = random_models(32, 12);
    models.push(two_by_two_model());
    for model in &models {
        let rep = support::compute_support(model).unwrap();
        let k = model.nu.n_positive() * model.nu_tilde.n_positive();
        assert!(rep.n_components <= k);
        assert!(rep.compact);
        assert!(rep.intervals.iter().all(|iv| iv[0] >= 0.0 && iv[0] < iv[1]));
        assert!(rep.intervals.windows(2).all(|w| w[0][1] < w[1][0]));
        for b in &rep.branches {
            for s in &b.samples {
                check_sample(model, s);
            }
            // Increasing along admissible runs.
            for w in b.samples.windows(2) {
                if w[0].admissible && w[1].admissible && w[0].x.signum() == w[1].x.signum() {
                    assert!(w[1].x >= w[0].x - 1e-9 * (1.0 + w[0].x.abs()), "{:?}", w);
                }
            }
        }
        // Gap and bulk midpoints.
        for iv in &rep.intervals {
            let mid = 0.5 * (iv[0] + iv[1]);
            assert!(density::density_at(model, mid).unwrap().f > GAP_THRESHOLD);
        }
        for w in rep.intervals.windows(2) {
            let mid = 0.5 * (w[0][1] + w[1][0]);
            assert!(density::density_at(model, mid).unwrap().f < GAP_THRESHOLD);
        }
        let (_, hi) = rep.hull().unwrap();
        assert!(density::density_at(model, hi * 1.1).unwrap().f < GAP_THRESHOLD);
    }
}

#[test]
fn admissible_images_are_disjoint() {
    let model = two_by_two_model();
    let rep = support::compute_support(&model).unwrap();
    let ci = model.nu_tilde.dual_components().intervals;
    let cti = model.nu.dual_components().intervals;
    let (_, hi) = rep.hull().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..1000 {
        let x0: f64 = rand::Rng::random_range(&mut rng, 1e-3..1.2 * hi);
        let mut owners = 0;
        for b in &rep.branches {
            let (i, it) = (ci[b.pair.i], cti[b.pair.i_tilde]);
            let hit = b.samples.windows(2).any(|w| {
                w[0].admissible
                    && w[1].admissible
                    && w[0].x.min(w[1].x) <= x0
                    && w[0].x.max(w[1].x) >= x0
                    // Pieces split at δ̃ = 0 only when 0 ∈ I.
                    && (!i.contains(0.0) || w[0].delta_tilde.signum() == w[1].delta_tilde.signum())
                    && support::branch_x(&model, i, it, 0.5 * (w[0].delta_tilde + w[1].delta_tilde))
                        .unwrap()
                        .is_some_and(|s| s.admissible && s.x >= w[0].x.min(w[1].x) && s.x <= w[0].x.max(w[1].x))
            });
            owners += hit as usize;
        }
        let inside = rep.contains(x0);
        assert!(owners <= 1, "x0 = {x0} owned by {owners} pairs");
        assert_eq!(owners == 0, inside, "x0 = {x0}");
    }
}

#[test]
fn edge_invariants() {
    let mut models = random_models(34, 12);
    models.push(two_by_two_model());
    let ci_of = |m: &ModelSpec, k: usize| m.nu_tilde.dual_components().intervals[k];
    let cti_of = |m: &ModelSpec, k: usize| m.nu.dual_components().intervals[k];
    for model in &models {
        let rep = support::compute_support(model).unwrap();
        for e in &rep.edges {
            assert_eq!(e.side == EdgeSide::Left, e.x_second < 0.0);
            let (i, it) = (ci_of(model, e.pair.i), cti_of(model, e.pair.i_tilde));
            let h = 1e-5 * e.delta_tilde_a.abs().max(1e-2);
            let xm = support::branch_x(model, i, it, e.delta_tilde_a - h).unwrap().unwrap().x;
            let xp = support::branch_x(model, i, it, e.delta_tilde_a + h).unwrap().unwrap().x;
            let fd = (xp - 2.0 * e.a + xm) / (h * h);
            assert!((fd / e.x_second - 1.0).abs() < 1e-4, "{fd} vs {}", e.x_second);
            assert!(edges::f_derivatives(model, e.delta_tilde_a, e.a, 1).unwrap().abs() < 1e-10);
            let slope = edges::edge_slope(model, e).unwrap();
            assert!(slope >= 0.0);
            // f(x)/√r at r = 1e-4 and 1e-5 approaches H'(0).
            let dir = if e.side == EdgeSide::Left { 1.0 } else { -1.0 };
            let width = rep
                .intervals
                .iter()
                .find(|iv| (iv[0] - e.a).abs() < 1e-8 || (iv[1] - e.a).abs() < 1e-8)
                .map(|iv| iv[1] - iv[0])
                .unwrap();
            if width < 1e-2 {
                continue;
            }
            let ratio = |r: f64| density::density_at(model, e.a + dir * r).unwrap().f / r.sqrt() / slope;
            let (r4, r5) = (ratio(1e-4), ratio(1e-5));
            assert!((r5 - 1.0).abs() < 0.1 && (r4 / r5 - 1.0).abs() < 0.1, "{r4} {r5} at {e:?}");
        }
    }
}

/// Where `∂²F/∂δ̃²` vanishes along a branch, `∂³F/∂δ̃³` does not.
#[test]
fn third_derivative_at_inflections() {
    let models = random_models(35, 20);
    let mut found = 0;
    for model in models.iter().filter(|m| !(m.nu.is_dirac() && m.nu_tilde.is_dirac())) {
        let rep = support::compute_support(model).unwrap();
        for b in &rep.branches {
            let f2 = |s: &BranchSample| edges::f_derivatives(model, s.delta_tilde, s.x, 2).ok();
            for w in b.samples.windows(2) {
                let (Some(a), Some(c)) = (f2(&w[0]), f2(&w[1])) else { continue };
                if a.signum() == c.signum() || w[0].x.signum() != w[1].x.signum() {
                    continue;
                }
                let ci = model.nu_tilde.dual_components().intervals[b.pair.i];
                let cti = model.nu.dual_components().intervals[b.pair.i_tilde];
                let (mut lo, mut hi) = (w[0], w[1]);
                for _ in 0..60 {
                    let mid = 0.5 * (lo.delta_tilde + hi.delta_tilde);
                    let Some(s) = support::branch_x(model, ci, cti, mid).unwrap() else { break };
                    if f2(&s).map(f64::signum) == f2(&lo).map(f64::signum) {
                        lo = s;
                    } else {
                        hi = s;
                    }
                }
                let s = lo;
                let (Ok(v2), Ok(v3), Ok(scale)) = (
                    edges::f_derivatives(model, s.delta_tilde, s.x, 2),
                    edges::f_derivatives(model, s.delta_tilde, s.x, 3),
                    edges::natural_scale(model, s.delta_tilde, s.x, 3),
                ) else {
                    continue;
                };
                let scale2 = edges::natural_scale(model, s.delta_tilde, s.x, 2).unwrap();
                if v2.abs() < 1e-6 * scale2 {
                    found += 1;
                    assert!(v3.abs() > 1e-6 * scale, "{v3} vs scale {scale} at {s:?}");
                }
            }
        }
    }
    assert!(found > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mp_support_closed_form(c in 0.05f64..20.0) {
        prop_assume!((c - 1.0).abs() > 1e-3);
        let model = ModelSpec::marchenko_pastur(c).unwrap();
        let rep = support::compute_support(&model).unwrap();
        let (a, b) = mp_edges(c);
        prop_assert_eq!(rep.intervals.len(), 1);
        prop_assert!((rep.intervals[0][0] - a).abs() < 1e-8 * (1.0 + a));
        prop_assert!((rep.intervals[0][1] - b).abs() < 1e-8 * (1.0 + b));
        let (sl, sr) = mp_edge_slopes(c);
        for e in &rep.edges {
            let want = if e.side == EdgeSide::Left { sl } else { sr };
            prop_assert!((e.h_prime.unwrap() / want - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn mp_density_closed_form(c in 0.1f64..8.0, u in 0.01f64..0.99) {
        let model = ModelSpec::marchenko_pastur(c).unwrap();
        let (a, b) = mp_edges(c);
        let x = a + (b - a) * u;
        let p = density::density_at(&model, x).unwrap();
        prop_assert!((p.f - mp_density(c, x)).abs() < 1e-6);
        let m = mp_stieltjes(c, num_complex::Complex64::new(x, 1e-12));
        prop_assert!((p.f - m.im / std::f64::consts::PI).abs() < 1e-6);
    }
}
