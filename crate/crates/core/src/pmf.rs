//! Finite probability mass functions on `{0, ..., N}` and distances between them.

use serde::Serialize;

use crate::error::{Error, Result};

/// Normalization tolerance for laws built by exact recursions.
pub const EXACT_TOLERANCE: f64 = 1e-12;

/// A law on the non-negative integers, stored on `0..len()`.
///
/// Reference laws with unbounded support are truncated; the mass they lose
/// beyond the last index is kept in [`Pmf::tail`] so that distance
/// computations can account for it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pmf {
    mass: Vec<f64>,
    tail: f64,
}

impl Pmf {
    /// Builds an exact law; the entries must sum to one within [`EXACT_TOLERANCE`].
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(mass, EXACT_TOLERANCE)
    }

    /// Builds a law whose total may deviate from one by at most `tolerance`
    /// (e.g. an empirical or otherwise approximate law).
    pub fn with_tolerance(mass: Vec<f64>, tolerance: f64) -> Result<Self> {
        validate_entries(&mass)?;
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > tolerance {
            return Err(Error::NotNormalized(format!(
                "total mass {total} differs from 1 by more than {tolerance}"
            )));
        }
        Ok(Self { mass, tail: 0.0 })
    }

    /// Wraps a truncated law; whatever is missing from a total of one becomes
    /// the reported tail mass.
    pub fn truncated(mass: Vec<f64>) -> Result<Self> {
        validate_entries(&mass)?;
        let total: f64 = mass.iter().sum();
        if total > 1.0 + EXACT_TOLERANCE {
            return Err(Error::NotNormalized(format!(
                "truncated mass {total} exceeds 1"
            )));
        }
        Ok(Self {
            mass,
            tail: (1.0 - total).max(0.0),
        })
    }

    pub fn point_mass(at: usize) -> Self {
        let mut mass = vec![0.0; at + 1];
        mass[at] = 1.0;
        Self { mass, tail: 0.0 }
    }

    /// Empirical law of a sample of counts.
    pub fn from_samples(values: &[usize]) -> Result<Self> {
        let Some(&max) = values.iter().max() else {
            return Err(Error::NotNormalized("empty sample".into()));
        };
        let mut counts = vec![0u64; max + 1];
        for &v in values {
            counts[v] += 1;
        }
        let total = values.len() as f64;
        let mass = counts.into_iter().map(|c| c as f64 / total).collect();
        Self::with_tolerance(mass, 1e-9)
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn into_mass(self) -> Vec<f64> {
        self.mass
    }

    /// Number of stored support points, `N + 1`.
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Mass lost to truncation beyond the last stored index.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// `P(k)`; zero outside the stored range.
    pub fn get(&self, k: usize) -> f64 {
        self.mass.get(k).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// `P(X <= k)`.
    pub fn cdf(&self, k: usize) -> f64 {
        self.mass.iter().take(k + 1).sum()
    }

    /// Law of `X + Y` for independent `X ~ self`, `Y ~ other`.
    pub fn convolve(&self, other: &Pmf) -> Pmf {
        let mut out = vec![0.0; self.len() + other.len() - 1];
        for (i, &a) in self.mass.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.mass.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        let tail = 1.0 - (1.0 - self.tail) * (1.0 - other.tail);
        Pmf {
            mass: out,
            tail: tail.max(0.0),
        }
    }

    /// Law of `X + by`.
    pub fn shifted(&self, by: usize) -> Pmf {
        let mut mass = vec![0.0; by];
        mass.extend_from_slice(&self.mass);
        Pmf {
            mass,
            tail: self.tail,
        }
    }

    /// `p * self + (1 - p) * other`.
    pub fn mixture(&self, weight: f64, other: &Pmf) -> Pmf {
        let len = self.len().max(other.len());
        let mass = (0..len)
            .map(|k| weight * self.get(k) + (1.0 - weight) * other.get(k))
            .collect();
        Pmf {
            mass,
            tail: weight * self.tail + (1.0 - weight) * other.tail,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(k, &p)| k as f64 * p)
            .sum()
    }
}

fn validate_entries(mass: &[f64]) -> Result<()> {
    if mass.is_empty() {
        return Err(Error::NotNormalized("empty support".into()));
    }
    if let Some((k, &v)) = mass
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < 0.0)
    {
        return Err(Error::NotNormalized(format!("entry {k} is {v}")));
    }
    Ok(())
}

/// First two moments by direct summation (two-pass for the variance).
pub fn moments_from_pmf(pmf: &Pmf) -> (f64, f64) {
    let mean = pmf.mean();
    let variance = pmf
        .mass()
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let d = k as f64 - mean;
            d * d * p
        })
        .sum();
    (mean, variance)
}

/// Total-variation distance: half the L1 distance of the stored masses,
/// with the shorter support padded by zeros.
///
/// Truncation tails are not included; callers comparing against a truncated
/// law should allow for [`Pmf::tail`].
pub fn tv_distance(a: &Pmf, b: &Pmf) -> f64 {
    let len = a.len().max(b.len());
    let l1: f64 = (0..len).map(|k| (a.get(k) - b.get(k)).abs()).sum();
    (0.5 * l1).min(1.0)
}

/// `d_TV(L(W), L(W + 1))`.
pub fn shift_tv(pmf: &Pmf) -> f64 {
    let m = pmf.mass();
    let mut l1 = m[0];
    for k in 1..m.len() {
        l1 += (m[k] - m[k - 1]).abs();
    }
    l1 += m[m.len() - 1];
    (0.5 * l1).min(1.0)
}
