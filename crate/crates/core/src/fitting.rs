//! Parameter estimation from grain tracks: the linear coarsening rate, the
//! number of edge deletions per step, the edge-deletion rates of the
//! population- and removal-driven models, and correlated selection weights.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::CorrelatedWeights;
use crate::stats;
use crate::track::{GrainStep, GrainTrackDataset};

/// Default fraction of leading steps dropped before fitting edge deletions.
pub const DEFAULT_BURN_IN: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} steps, got {got}")]
    TooFewSteps { needed: usize, got: usize },
    #[error("degenerate fit: {0}")]
    Degenerate(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("inconsistent input: c[{index}] = {c} > 0 but p[{index}] = 0")]
    Inconsistent { index: usize, c: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("no step near t={0}")]
    MissingStep(f64),
}

/// Edge-deletion estimate for one interval `[t_k, t_{k+1})`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalChanges {
    /// Surviving grains whose side count changed.
    pub delta_e: u64,
    /// Side changes attributed to vanished 3-, 4- and 5-gons.
    pub delta_e_f: u64,
    /// `(ΔE - ΔE^f) / 4`, floored at zero.
    pub delta_s: f64,
}

/// Per-step aggregates of a grain track, built in one streaming pass.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub dt: f64,
    pub times: Vec<f64>,
    pub counts: Vec<usize>,
    pub areas: Vec<f64>,
    /// Side-count histograms indexed by side count.
    pub histograms: Vec<Vec<u64>>,
    /// One entry per interval (one fewer than steps).
    pub intervals: Vec<IntervalChanges>,
    /// Total negative `ΔS_k` mass removed by flooring.
    pub floored: f64,
}

/// Streaming builder of a [`TrackSummary`]; keeps only the previous step.
#[derive(Default)]
pub struct TrackSummarizer {
    summary: TrackSummary,
    previous: Option<HashMap<u64, u32>>,
}

/// Side changes charged to a vanished grain with `s` sides.
fn vanish_changes(s: u32) -> u64 {
    match s {
        3 => 3,
        4 => 2,
        5 => 3,
        _ => 0,
    }
}

impl TrackSummarizer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: &GrainStep) {
        let s = &mut self.summary;
        if s.times.len() == 1 {
            s.dt = step.time - s.times[0];
        }
        s.times.push(step.time);
        s.counts.push(step.count());
        s.areas.push(step.total_area());
        s.histograms.push(step.side_histogram());
        let current: HashMap<u64, u32> = step.grains.iter().map(|g| (g.id, g.sides)).collect();
        if let Some(prev) = &self.previous {
            let mut delta_e = 0;
            for (id, sides) in &current {
                if prev.get(id).is_some_and(|old| old != sides) {
                    delta_e += 1;
                }
            }
            let delta_e_f: u64 = prev
                .iter()
                .filter(|(id, _)| !current.contains_key(id))
                .map(|(_, &sides)| vanish_changes(sides))
                .sum();
            let raw = (delta_e as f64 - delta_e_f as f64) / 4.0;
            if raw < 0.0 {
                s.floored += -raw;
            }
            s.intervals.push(IntervalChanges {
                delta_e,
                delta_e_f,
                delta_s: raw.max(0.0),
            });
        }
        self.previous = Some(current);
    }

    pub fn finish(self) -> TrackSummary {
        self.summary
    }
}

impl TrackSummary {
    pub fn from_dataset(dataset: &GrainTrackDataset) -> Self {
        let mut s = TrackSummarizer::new();
        for step in &dataset.steps {
            s.push(step);
        }
        let mut out = s.finish();
        if dataset.dt > 0.0 {
            out.dt = dataset.dt;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `⟨A_{t_k}⟩ = A / N(t_k)` with `A` the area at the first step.
    pub fn mean_areas(&self) -> Vec<f64> {
        let a = self.areas.first().copied().unwrap_or(0.0);
        self.counts.iter().map(|&n| a / n as f64).collect()
    }

    /// Cumulative `S(t_k) = Σ_{j<k} ΔS_j`.
    pub fn cumulative_s(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.len());
        out.push(0.0);
        for iv in &self.intervals {
            acc += iv.delta_s;
            out.push(acc);
        }
        out.truncate(self.len());
        out
    }

    /// Normalized side-count frequencies at step `k`.
    pub fn frequencies(&self, k: usize) -> Vec<f64> {
        stats::count_frequencies(&self.histograms[k])
    }

    /// First step with at most `fraction` of the initial grains left.
    pub fn step_with_remaining(&self, fraction: f64) -> Option<usize> {
        let n0 = *self.counts.first()? as f64;
        self.counts.iter().position(|&n| n as f64 <= fraction * n0)
    }
}

/// Per-interval edge-deletion estimates of a dataset.
pub fn estimate_edge_deletions(dataset: &GrainTrackDataset) -> Vec<IntervalChanges> {
    TrackSummary::from_dataset(dataset).intervals
}

/// Least-squares line with its correlation coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// `None` when either variable is constant.
    pub pearson_r: Option<f64>,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit, FitError> {
    if x.len() != y.len() {
        return Err(FitError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(FitError::TooFewSteps {
            needed: 3,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return Err(FitError::Degenerate("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let pearson_r = (syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0));
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        pearson_r,
    })
}

/// Linear coarsening rate: least-squares slope of `⟨A_t⟩` against `t`.
/// A constant mean area gives slope 0 and no correlation coefficient.
pub fn coarsening_rate(times: &[f64], mean_areas: &[f64]) -> Result<LinearFit, FitError> {
    linear_fit(times, mean_areas)
}

/// [`coarsening_rate`] over the steps `range` of a summary.
pub fn coarsening_rate_of(
    summary: &TrackSummary,
    range: std::ops::Range<usize>,
) -> Result<LinearFit, FitError> {
    let mean = summary.mean_areas();
    coarsening_rate(&summary.times[range.clone()], &mean[range])
}

/// Weighted median: smallest value whose cumulative weight reaches half the
/// total. Zero-weight entries are ignored.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> Result<f64, FitError> {
    if values.len() != weights.len() {
        return Err(FitError::LengthMismatch(values.len(), weights.len()));
    }
    let mut pairs: Vec<(f64, f64)> = values
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, &w)| (v, w))
        .collect();
    if pairs.iter().any(|(v, w)| !v.is_finite() || !w.is_finite()) {
        return Err(FitError::Invalid("non-finite value or weight".into()));
    }
    if pairs.is_empty() {
        return Err(FitError::Degenerate("no positive weights".into()));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for &(v, w) in &pairs {
        acc += w;
        if acc >= 0.5 * total {
            return Ok(v);
        }
    }
    Ok(pairs[pairs.len() - 1].0)
}

/// `argmin_β Σ |y_k - β x_k|`: the weighted median of `y_k / x_k` with
/// weights `|x_k|`.
pub fn l1_slope_through_origin(x: &[f64], y: &[f64]) -> Result<f64, FitError> {
    if x.len() != y.len() {
        return Err(FitError::LengthMismatch(x.len(), y.len()));
    }
    let (ratios, weights): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(&a, _)| a != 0.0)
        .map(|(&a, &b)| (b / a, a.abs()))
        .unzip();
    weighted_median(&ratios, &weights)
}

fn burn_in_start(len: usize, burn_in: f64) -> Result<usize, FitError> {
    if !(0.0..1.0).contains(&burn_in) {
        return Err(FitError::Invalid(format!("burn-in {burn_in} outside [0, 1)")));
    }
    Ok((burn_in * len as f64).floor() as usize)
}

/// Population-driven rate: `argmin_β Σ_k |ΔS_k/Δt - β N(t_k)|` over the
/// intervals after the burn-in.
pub fn fit_beta_pd(summary: &TrackSummary, burn_in: f64) -> Result<f64, FitError> {
    if summary.intervals.is_empty() {
        return Err(FitError::TooFewSteps {
            needed: 2,
            got: summary.len(),
        });
    }
    if !(summary.dt > 0.0) {
        return Err(FitError::Invalid("step spacing must be positive".into()));
    }
    let start = burn_in_start(summary.intervals.len(), burn_in)?;
    let x: Vec<f64> = summary.counts[start..summary.intervals.len()]
        .iter()
        .map(|&n| n as f64)
        .collect();
    let y: Vec<f64> = summary.intervals[start..]
        .iter()
        .map(|iv| iv.delta_s / summary.dt)
        .collect();
    if x.iter().all(|&v| v == 0.0) {
        return Err(FitError::Degenerate("no grains".into()));
    }
    l1_slope_through_origin(&x, &y)
}

/// Removal-driven ratio: `argmin_β Σ_k |S(t_k) - β (N(t_0) - N(t_k))|`.
///
/// With a burn-in, both sides are measured from the first kept step, so the
/// transient before it does not bias the slope.
pub fn fit_beta_rd(summary: &TrackSummary, burn_in: f64) -> Result<f64, FitError> {
    if summary.len() < 2 {
        return Err(FitError::TooFewSteps {
            needed: 2,
            got: summary.len(),
        });
    }
    let start = burn_in_start(summary.len(), burn_in)?;
    let s = summary.cumulative_s();
    let n0 = summary.counts[start] as f64;
    let s0 = s[start];
    let x: Vec<f64> = summary.counts[start..]
        .iter()
        .map(|&n| n0 - n as f64)
        .collect();
    let y: Vec<f64> = s[start..].iter().map(|v| v - s0).collect();
    if x.iter().all(|&v| v == 0.0) {
        return Err(FitError::Degenerate("no grain deletions".into()));
    }
    l1_slope_through_origin(&x, &y)
}

/// Everything the fitting procedures estimate from one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha: Option<f64>,
    pub pearson_r: Option<f64>,
    pub beta_pd: Option<f64>,
    pub beta_rd: Option<f64>,
    pub burn_in: f64,
    pub delta_e: Vec<u64>,
    pub delta_e_f: Vec<u64>,
    pub delta_s: Vec<f64>,
    pub floored: f64,
    pub s_pd: Vec<f64>,
    pub s_rd: Vec<f64>,
    pub notes: Vec<String>,
}

/// Runs every estimator; failures become `None` with a note.
pub fn fit_all(summary: &TrackSummary, burn_in: f64) -> FitResult {
    let mut notes = Vec::new();
    let (alpha, pearson_r) = match coarsening_rate(&summary.times, &summary.mean_areas()) {
        Ok(fit) => {
            if fit.pearson_r.is_none() {
                notes.push("coarsening rate: constant mean area".to_string());
            }
            (Some(fit.slope), fit.pearson_r)
        }
        Err(e) => {
            notes.push(format!("coarsening rate: {e}"));
            (None, None)
        }
    };
    let beta_pd = fit_beta_pd(summary, burn_in)
        .map_err(|e| notes.push(format!("beta_pd: {e}")))
        .ok();
    let beta_rd = fit_beta_rd(summary, burn_in)
        .map_err(|e| notes.push(format!("beta_rd: {e}")))
        .ok();
    let s_rd = summary.cumulative_s();
    let s_pd = summary
        .intervals
        .iter()
        .map(|iv| iv.delta_s / summary.dt)
        .collect();
    FitResult {
        alpha,
        pearson_r,
        beta_pd,
        beta_rd,
        burn_in,
        delta_e: summary.intervals.iter().map(|iv| iv.delta_e).collect(),
        delta_e_f: summary.intervals.iter().map(|iv| iv.delta_e_f).collect(),
        delta_s: summary.intervals.iter().map(|iv| iv.delta_s).collect(),
        floored: summary.floored,
        s_pd,
        s_rd,
        notes,
    }
}

/// Correlated weights `w̃_k = (c_k / p_k) / Σ_n (c_n / p_n)`, so that
/// `p_k w̃_k / Σ_n p_n w̃_n = c_k` and `Σ w̃ = 1`.
pub fn solve_correlated_weights(p: &[f64], c: &[f64]) -> Result<Vec<f64>, FitError> {
    if p.len() != c.len() {
        return Err(FitError::LengthMismatch(p.len(), c.len()));
    }
    if p.iter().chain(c).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(FitError::Invalid("entries must be finite and nonnegative".into()));
    }
    let mut ratios = Vec::with_capacity(p.len());
    for (index, (&pk, &ck)) in p.iter().zip(c).enumerate() {
        if ck > 0.0 && pk == 0.0 {
            return Err(FitError::Inconsistent { index, c: ck });
        }
        ratios.push(if ck > 0.0 { ck / pk } else { 0.0 });
    }
    let total: f64 = ratios.iter().sum();
    if !(total > 0.0) {
        return Err(FitError::Degenerate("neighbour distribution is empty".into()));
    }
    Ok(ratios.into_iter().map(|r| r / total).collect())
}

/// Largest violation of the defining system of [`solve_correlated_weights`]
/// for normalized `c`.
pub fn correlated_residual(p: &[f64], c: &[f64], w: &[f64]) -> f64 {
    let denom: f64 = p.iter().zip(w).map(|(a, b)| a * b).sum();
    let c_total: f64 = c.iter().sum();
    let mut worst = (w.iter().sum::<f64>() - 1.0).abs();
    for ((pk, wk), ck) in p.iter().zip(w).zip(c) {
        worst = worst.max((pk * wk / denom - ck / c_total).abs());
    }
    worst
}

/// Builds a correlated weight table for grain presets from topology
/// frequencies `p_k` and neighbour distributions `c^(l)_k`, both listed for
/// `k = 1..=M`. Triggers listed in `donors` reuse another trigger's
/// distribution, for rows too sparse to estimate.
pub fn correlated_table(
    p: &[f64],
    c: &BTreeMap<String, Vec<f64>>,
    donors: &BTreeMap<String, String>,
) -> Result<CorrelatedWeights, FitError> {
    let mut table = CorrelatedWeights::new();
    let keys: Vec<String> = c.keys().chain(donors.keys()).cloned().collect();
    for key in keys {
        let source = donors.get(&key).unwrap_or(&key);
        let row = c.get(source).ok_or_else(|| {
            FitError::Invalid(format!("trigger {key}: no distribution for donor {source}"))
        })?;
        table.insert(key, solve_correlated_weights(p, row)?);
    }
    Ok(table)
}

/// Side-count frequencies (indexed by side count) at the step nearest `t`.
pub fn topology_frequencies(dataset: &GrainTrackDataset, t: f64) -> Result<Vec<f64>, FitError> {
    let k = dataset.nearest_step(t).ok_or(FitError::MissingStep(t))?;
    step_frequencies(&dataset.steps[k])
}

pub fn step_frequencies(step: &GrainStep) -> Result<Vec<f64>, FitError> {
    if step.grains.is_empty() {
        return Err(FitError::Degenerate(format!("step {} has no grains", step.step)));
    }
    Ok(stats::count_frequencies(&step.side_histogram()))
}
