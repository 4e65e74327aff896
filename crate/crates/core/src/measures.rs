//! Finite atomic probability measures and their dual component sets.
//!
//! A measure is a list of atoms `(t, w)` with `t >= 0`, strictly increasing
//! locations and weights summing to one. Mass at the origin is stored as an
//! ordinary atom at `t = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the raw weight sum before silent renormalization.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

const POLE_TOL: f64 = 1e-14;

/// One atom of a measure, serialized as `{"t": .., "w": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub t: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
}

impl TryFrom<Vec<Atom>> for AtomicMeasure {
    type Error = Error;

    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        AtomicMeasure::new(atoms.into_iter().map(|a| (a.t, a.w)))
    }
}

impl From<AtomicMeasure> for Vec<Atom> {
    fn from(m: AtomicMeasure) -> Self {
        m.atoms
    }
}

impl AtomicMeasure {
    /// Builds a measure from `(location, weight)` pairs.
    ///
    /// Pairs are sorted, exact duplicate locations are merged by adding their
    /// weights, and weights are rescaled to sum to one when the raw sum is
    /// within [`WEIGHT_SUM_TOL`] of one.
    pub fn new<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut raw: Vec<(f64, f64)> = pairs.into_iter().collect();
        if raw.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        for &(t, w) in &raw {
            if !t.is_finite() || !w.is_finite() {
                return Err(Error::NonFinite);
            }
            if t < 0.0 {
                return Err(Error::NegativeLocation(t));
            }
            if w <= 0.0 {
                return Err(Error::NonPositiveWeight(w));
            }
        }
        let total: f64 = raw.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::WeightSumMismatch(total));
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<Atom> = Vec::with_capacity(raw.len());
        for (t, w) in raw {
            match atoms.last_mut() {
                Some(last) if last.t == t => last.w += w,
                _ => atoms.push(Atom { t, w }),
            }
        }
        for a in &mut atoms {
            a.w /= total;
        }
        if !atoms.iter().any(|a| a.t > 0.0) {
            return Err(Error::NoPositiveAtom);
        }
        Ok(Self { atoms })
    }

    /// Dirac mass at a positive location.
    pub fn dirac(t: f64) -> Result<Self> {
        Self::new([(t, 1.0)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Atoms with strictly positive location, in increasing order.
    pub fn positive_atoms(&self) -> impl Iterator<Item = &Atom> + '_ {
        self.atoms.iter().filter(|a| a.t > 0.0)
    }

    /// Number of positive atoms (the number of connected components of the
    /// support away from zero).
    pub fn n_positive(&self) -> usize {
        self.positive_atoms().count()
    }

    pub fn mass_at_zero(&self) -> f64 {
        self.atoms
            .iter()
            .find(|a| a.t == 0.0)
            .map_or(0.0, |a| a.w)
    }

    /// Total mass carried by positive atoms.
    pub fn positive_mass(&self) -> f64 {
        self.positive_atoms().map(|a| a.w).sum()
    }

    /// True when the measure is a single point mass.
    pub fn is_dirac(&self) -> bool {
        self.atoms.len() == 1
    }

    pub fn min_positive(&self) -> f64 {
        self.positive_atoms().next().map(|a| a.t).unwrap_or(f64::NAN)
    }

    pub fn max_location(&self) -> f64 {
        self.atoms.last().map(|a| a.t).unwrap_or(f64::NAN)
    }

    /// `sum_i w_i f(t_i)`.
    #[inline]
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|a| a.w * f(a.t)).sum()
    }

    /// Complex-valued counterpart of [`integrate`](Self::integrate).
    #[inline]
    pub fn integrate_c<F: Fn(f64) -> Complex64>(&self, f: F) -> Complex64 {
        self.atoms.iter().map(|a| f(a.t) * a.w).sum()
    }

    pub fn moment(&self, k: u32) -> f64 {
        self.integrate(|t| t.powi(k as i32))
    }

    /// Stieltjes transform `sum_i w_i / (t_i - z)`.
    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in &self.atoms {
            let d = Complex64::new(a.t, 0.0) - z;
            if d.norm() < POLE_TOL {
                return Err(Error::PoleHit);
            }
            acc += a.w / d;
        }
        Ok(acc)
    }

    /// Discretizes a sample into `k` equal-count quantile blocks, each
    /// replaced by its mean.
    pub fn from_samples(samples: &[f64], k: usize) -> Result<Self> {
        if samples.is_empty() || k == 0 {
            return Err(Error::EmptyMeasure);
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let k = k.min(n);
        let pairs = (0..k).map(|b| {
            let block = &s[b * n / k..(b + 1) * n / k];
            (block.iter().sum::<f64>() / block.len() as f64, block.len() as f64 / n as f64)
        });
        Self::new(pairs.collect::<Vec<_>>())
    }

    /// Connected components of `{d : -1/d not in supp}` together with zero.
    ///
    /// For positive atoms `t_1 < ... < t_K` these are `(-inf, -1/t_1)`,
    /// `(-1/t_j, -1/t_{j+1})` and `(-1/t_K, inf)`, the last one containing 0.
    pub fn dual_components(&self) -> DualComponents {
        let poles: Vec<f64> = self.positive_atoms().map(|a| -1.0 / a.t).collect();
        let mut intervals = Vec::with_capacity(poles.len() + 1);
        let mut lo = f64::NEG_INFINITY;
        for &p in &poles {
            intervals.push(Interval::new(lo, p));
            lo = p;
        }
        intervals.push(Interval::new(lo, f64::INFINITY));
        DualComponents {
            intervals,
            includes_zero: true,
        }
    }
}

/// Open interval `(lo, hi)` of the extended real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualComponents {
    pub intervals: Vec<Interval>,
    pub includes_zero: bool,
}

impl DualComponents {
    /// Index of the component containing `d`, if any.
    pub fn locate(&self, d: f64) -> Option<usize> {
        self.intervals.iter().position(|iv| iv.contains(d))
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}
