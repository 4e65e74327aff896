//! Finite-size simulation of `Σ Σ*`, `Σ = D^{1/2} X D̃^{1/2}` with `X` an
//! `N × n` matrix of iid entries of variance `1/n`, and comparison of the
//! resulting spectra with the limit.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityProfile;
use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;
use crate::solver::ModelSpec;
use crate::support::SupportReport;

/// Eigenvalues below this are counted as zero.
pub const ZERO_THRESHOLD: f64 = 1e-10;
pub const DEFAULT_MAX_ROWS: usize = 4096;
pub const DEFAULT_MAX_ENTRIES: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EntryLaw {
    #[default]
    Gaussian,
    Rademacher,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub model: ModelSpec,
    pub n_rows: usize,
    pub seed: u64,
    pub entry_law: EntryLaw,
    pub n_trials: usize,
    pub max_rows: usize,
    pub max_entries: usize,
}

impl SimConfig {
    pub fn new(model: ModelSpec, n_rows: usize, seed: u64) -> Self {
        Self {
            model,
            n_rows,
            seed,
            entry_law: EntryLaw::Gaussian,
            n_trials: 1,
            max_rows: DEFAULT_MAX_ROWS,
            max_entries: DEFAULT_MAX_ENTRIES,
        }
    }

    pub fn trials(mut self, n: usize) -> Self {
        self.n_trials = n;
        self
    }

    pub fn law(mut self, law: EntryLaw) -> Self {
        self.entry_law = law;
        self
    }

    /// `n = round(N / c)`.
    pub fn n_cols(&self) -> usize {
        (self.n_rows as f64 / self.model.c).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.n_rows < 2 {
            return Err(Error::InvalidConfig(format!("N = {} must be at least 2", self.n_rows)));
        }
        if self.n_trials < 1 {
            return Err(Error::InvalidConfig("need at least one trial".into()));
        }
        let n = self.n_cols();
        if n < 2 {
            return Err(Error::InvalidConfig(format!("n = round(N/c) = {n} must be at least 2")));
        }
        if self.n_rows > self.max_rows || self.n_rows.saturating_mul(n) > self.max_entries {
            return Err(Error::DimensionOverflow {
                rows: self.n_rows,
                cols: n,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalSpectrum {
    /// Sorted eigenvalues of each trial, concatenated in trial order.
    pub eigenvalues: Vec<f64>,
    pub n_zero: usize,
    pub n_rows: usize,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonStats {
    pub cdf_sup_distance: f64,
    pub n_outside: usize,
    pub n_nonzero: usize,
    pub dilation: f64,
    pub zero_fraction: f64,
    pub atom_at_zero: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// Deterministic diagonal of length `dim` whose empirical measure approximates
/// `measure`: `⌊w·dim⌋` copies of each atom, leftovers to the largest
/// fractional parts (ties to the smaller location).
pub fn quantile_diag(measure: &AtomicMeasure, dim: usize) -> Vec<f64> {
    let atoms = measure.atoms();
    let mut counts: Vec<usize> = atoms.iter().map(|a| (a.w * dim as f64).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    order.sort_by(|&i, &j| {
        let fi = atoms[i].w * dim as f64 - counts[i] as f64;
        let fj = atoms[j].w * dim as f64 - counts[j] as f64;
        fj.total_cmp(&fi).then(i.cmp(&j))
    });
    for &k in order.iter().cycle().take(dim.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    atoms
        .iter()
        .zip(&counts)
        .flat_map(|(a, &k)| std::iter::repeat_n(a.t, k))
        .take(dim)
        .collect()
}

fn trial_eigenvalues(cfg: &SimConfig, d: &[f64], dt: &[f64], trial: u64) -> Vec<f64> {
    let big_n = cfg.n_rows;
    let n = dt.len();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial);
    let scale = 1.0 / (n as f64).sqrt();
    // Rows and columns with zero weight contribute exact zeros.
    let rows: Vec<f64> = d.iter().filter(|&&v| v > 0.0).map(|v| v.sqrt()).collect();
    let cols: Vec<f64> = dt.iter().filter(|&&v| v > 0.0).map(|v| v.sqrt()).collect();
    let (r, k) = (rows.len(), cols.len());
    let mut sigma = DMatrix::<f64>::zeros(r, k);
    for j in 0..k {
        for i in 0..r {
            let x: f64 = match cfg.entry_law {
                EntryLaw::Gaussian => rng.sample(StandardNormal),
                EntryLaw::Rademacher => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            sigma[(i, j)] = x * scale * rows[i] * cols[j];
        }
    }
    let gram = if r <= k {
        &sigma * sigma.transpose()
    } else {
        sigma.transpose() * &sigma
    };
    let mut eig: Vec<f64> = if gram.nrows() == 0 {
        Vec::new()
    } else {
        gram.symmetric_eigenvalues().iter().map(|&v| v.max(0.0)).collect()
    };
    eig.resize(big_n, 0.0);
    eig.sort_by(f64::total_cmp);
    eig
}

pub fn simulate(cfg: &SimConfig) -> Result<EmpiricalSpectrum> {
    cfg.validate()?;
    let d = quantile_diag(&cfg.model.nu, cfg.n_rows);
    let dt = quantile_diag(&cfg.model.nu_tilde, cfg.n_cols());
    let per_trial: Vec<Vec<f64>> = (0..cfg.n_trials as u64)
        .into_par_iter()
        .map(|t| trial_eigenvalues(cfg, &d, &dt, t))
        .collect();
    let eigenvalues: Vec<f64> = per_trial.into_iter().flatten().collect();
    let n_zero = eigenvalues.iter().filter(|&&v| v < ZERO_THRESHOLD).count();
    Ok(EmpiricalSpectrum {
        eigenvalues,
        n_zero,
        n_rows: cfg.n_rows,
        n_trials: cfg.n_trials,
    })
}

impl EmpiricalSpectrum {
    pub fn trial(&self, k: usize) -> &[f64] {
        &self.eigenvalues[k * self.n_rows..(k + 1) * self.n_rows]
    }

    pub fn zero_fraction(&self) -> f64 {
        self.n_zero as f64 / self.eigenvalues.len() as f64
    }

    /// Zero count of each trial.
    pub fn zeros_per_trial(&self) -> Vec<usize> {
        (0..self.n_trials)
            .map(|k| self.trial(k).iter().filter(|&&v| v < ZERO_THRESHOLD).count())
            .collect()
    }

    /// CSV with columns `trial,eigenvalue`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["trial", "eigenvalue"])?;
        for k in 0..self.n_trials {
            for v in self.trial(k) {
                wr.write_record([k.to_string(), v.to_string()])?;
            }
        }
        wr.flush()
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let k = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[k - 1], xs[k]);
    ys[k - 1] + (ys[k] - ys[k - 1]) * (x - x0) / (x1 - x0)
}

/// Compares a simulated spectrum with the limit. The support is dilated to
/// `[lo(1-d), hi(1+d)]` for the outside count.
pub fn compare(
    spectrum: &EmpiricalSpectrum,
    profile: &DensityProfile,
    report: &SupportReport,
    dilation: f64,
) -> Result<ComparisonStats> {
    let grid = &profile.grid;
    if grid.len() < 2 {
        return Err(Error::InvalidGrid("profile has fewer than two points".into()));
    }
    let (g0, g1) = (grid[0], grid[grid.len() - 1]);
    for iv in &report.intervals {
        let slack = 1e-2 * (iv[1] - iv[0]);
        if g0 > iv[0] + slack || g1 < iv[1] - slack {
            return Err(Error::CoverageGap { lo: iv[0], hi: iv[1] });
        }
    }
    let atom = report.atom_at_zero;
    let mut cdf = crate::density::cumulative_trapezoid(grid, &profile.densities());
    let denom = (1.0 - atom).max(f64::MIN_POSITIVE);
    for v in &mut cdf {
        *v = (*v / denom).min(1.0);
    }

    let n_rows = spectrum.n_rows;
    let n_drop = (atom * n_rows as f64).round() as usize;
    let mut nonzero: Vec<f64> = (0..spectrum.n_trials)
        .flat_map(|k| spectrum.trial(k)[n_drop.min(n_rows)..].iter().copied())
        .collect();
    nonzero.sort_by(f64::total_cmp);
    let m = nonzero.len();
    let mut sup: f64 = 0.0;
    for (k, &x) in nonzero.iter().enumerate() {
        let th = if x < g0 { 0.0 } else { interp(grid, &cdf, x) };
        let before = k as f64 / m as f64;
        let after = (k + 1) as f64 / m as f64;
        sup = sup.max((th - before).abs()).max((th - after).abs());
    }

    let inside = |x: f64| {
        report
            .intervals
            .iter()
            .any(|iv| x >= iv[0] * (1.0 - dilation) && x <= iv[1] * (1.0 + dilation))
    };
    let positive: Vec<f64> = spectrum
        .eigenvalues
        .iter()
        .copied()
        .filter(|&v| v >= ZERO_THRESHOLD)
        .collect();
    let n_outside = positive.iter().filter(|&&v| !inside(v)).count();
    Ok(ComparisonStats {
        cdf_sup_distance: sup,
        n_outside,
        n_nonzero: positive.len(),
        dilation,
        zero_fraction: spectrum.zero_fraction(),
        atom_at_zero: atom,
        min_eigenvalue: positive.first().copied().unwrap_or(0.0),
        max_eigenvalue: positive.last().copied().unwrap_or(0.0),
    })
}
