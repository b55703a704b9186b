//! Run-to-run comparison: total variation between topology frequencies and
//! Kolmogorov–Smirnov distances between per-species normalized areas.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{self, StatsError};
use crate::track::{GrainStep, GrainTrackDataset};

/// Species whose area distributions are compared.
pub const COMPARED_SIDES: [u32; 3] = [5, 6, 7];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompareError {
    #[error("run {run} has no snapshot near {at}")]
    MissingSnapshot { run: char, at: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// When to compare: an absolute time or the first step with at most the
/// given fraction of grains remaining (resolved per run).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparePoint {
    Time(f64),
    Remaining(f64),
}

impl ComparePoint {
    fn describe(&self) -> String {
        match self {
            ComparePoint::Time(t) => format!("t={t}"),
            ComparePoint::Remaining(f) => format!("{}% remaining", f * 100.0),
        }
    }

    fn resolve(&self, run: &GrainTrackDataset, name: char) -> Result<usize, CompareError> {
        let missing = || CompareError::MissingSnapshot {
            run: name,
            at: self.describe(),
        };
        match *self {
            ComparePoint::Time(t) => {
                let k = run.nearest_step(t).ok_or_else(missing)?;
                let gap = (run.steps[k].time - t).abs();
                let slack = 0.5 * run.dt.abs() + 1e-12 * t.abs().max(1.0);
                if gap > slack && run.len() > 1 || run.len() == 1 && gap > 1e-12 {
                    return Err(missing());
                }
                Ok(k)
            }
            ComparePoint::Remaining(f) => run.step_with_remaining(f).ok_or_else(missing),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareEntry {
    pub point: ComparePoint,
    pub time_a: f64,
    pub time_b: f64,
    /// Total variation between side-count frequencies.
    pub tv: f64,
    /// KS distance of `a / ⟨a⟩` per side count; `None` when a run has no
    /// grain with that side count.
    pub ks: BTreeMap<String, Option<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub entries: Vec<CompareEntry>,
}

/// Areas of `sides`-sided grains divided by their mean.
pub fn normalized_areas(step: &GrainStep, sides: u32) -> Vec<f64> {
    let areas: Vec<f64> = step
        .grains
        .iter()
        .filter(|g| g.sides == sides)
        .map(|g| g.area)
        .collect();
    let mean = areas.iter().sum::<f64>() / areas.len().max(1) as f64;
    if mean > 0.0 {
        areas.into_iter().map(|a| a / mean).collect()
    } else {
        areas
    }
}

/// Compares two steps directly.
pub fn compare_steps(a: &GrainStep, b: &GrainStep) -> Result<(f64, BTreeMap<String, Option<f64>>), CompareError> {
    let (p, q) = stats::align(
        &stats::count_frequencies(&a.side_histogram()),
        &stats::count_frequencies(&b.side_histogram()),
    );
    let tv = stats::tv_distance(&p, &q)?;
    let mut ks = BTreeMap::new();
    for sides in COMPARED_SIDES {
        let xa = normalized_areas(a, sides);
        let xb = normalized_areas(b, sides);
        let d = if xa.is_empty() || xb.is_empty() {
            None
        } else {
            Some(stats::ks_distance(&xa, &xb)?)
        };
        ks.insert(sides.to_string(), d);
    }
    Ok((tv, ks))
}

pub fn compare_runs(
    a: &GrainTrackDataset,
    b: &GrainTrackDataset,
    points: &[ComparePoint],
) -> Result<CompareReport, CompareError> {
    let mut entries = Vec::with_capacity(points.len());
    for &point in points {
        let ka = point.resolve(a, 'a')?;
        let kb = point.resolve(b, 'b')?;
        let (tv, ks) = compare_steps(&a.steps[ka], &b.steps[kb])?;
        entries.push(CompareEntry {
            point,
            time_a: a.steps[ka].time,
            time_b: b.steps[kb].time,
            tv,
            ks,
        });
    }
    Ok(CompareReport { entries })
}
