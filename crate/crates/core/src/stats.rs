//! Empirical distributions and the distances used to compare runs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("probability vector sums to {0}, expected 1")]
    NotNormalized(f64),
    #[error("probability vector has a negative or non-finite entry")]
    InvalidEntry,
    #[error("empty sample")]
    Empty,
}

/// Tolerance on the total mass of probability vectors.
pub const NORMALIZATION_TOL: f64 = 1e-9;

fn check_probability(p: &[f64]) -> Result<(), StatsError> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(StatsError::InvalidEntry);
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > NORMALIZATION_TOL {
        return Err(StatsError::NotNormalized(s));
    }
    Ok(())
}

/// `(1/2) Σ |p_i - q_i|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64, StatsError> {
    if p.len() != q.len() {
        return Err(StatsError::LengthMismatch(p.len(), q.len()));
    }
    check_probability(p)?;
    check_probability(q)?;
    let d: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * d).min(1.0))
}

/// Two-sample Kolmogorov–Smirnov statistic `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Pads two probability vectors with zeros to a common length.
pub fn align(p: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = p.len().max(q.len());
    let pad = |v: &[f64]| {
        let mut v = v.to_vec();
        v.resize(n, 0.0);
        v
    };
    (pad(p), pad(q))
}

/// Normalizes nonnegative counts to frequencies; all-zero input stays zero.
pub fn frequencies<T: Copy + Into<f64>>(counts: &[T]) -> Vec<f64> {
    let total: f64 = counts.iter().map(|&c| c.into()).sum();
    if total <= 0.0 {
        return vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| c.into() / total).collect()
}

/// Frequencies from integer counts.
pub fn count_frequencies(counts: &[u64]) -> Vec<f64> {
    let as_f64: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    frequencies(&as_f64)
}

/// Mean and population variance of a discrete distribution over its index.
pub fn index_moments(p: &[f64]) -> (f64, f64) {
    let mean: f64 = p.iter().enumerate().map(|(k, w)| k as f64 * w).sum();
    let var = p
        .iter()
        .enumerate()
        .map(|(k, w)| w * (k as f64 - mean).powi(2))
        .sum();
    (mean, var)
}

/// Uniform-bin histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<usize>,
}

impl Histogram {
    /// Bins `samples` into `bins` equal cells on `[lo, hi]`; values at `hi`
    /// land in the last cell and values outside are dropped.
    pub fn uniform(samples: impl IntoIterator<Item = f64>, bins: usize, lo: f64, hi: f64) -> Self {
        let bins = bins.max(1);
        let hi = if hi > lo { hi } else { lo + 1.0 };
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        for x in samples {
            if !(x >= lo && x <= hi) {
                continue;
            }
            let b = (((x - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self {
            lo,
            hi,
            counts,
            species: None,
        }
    }

    pub fn edges(&self) -> Vec<f64> {
        let n = self.counts.len();
        (0..=n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / n as f64)
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Probability densities (integrate to one over `[lo, hi]`).
    pub fn densities(&self) -> Vec<f64> {
        let total = self.total() as f64;
        let width = (self.hi - self.lo) / self.counts.len() as f64;
        self.counts
            .iter()
            .map(|&c| if total > 0.0 { c as f64 / (total * width) } else { 0.0 })
            .collect()
    }
}
