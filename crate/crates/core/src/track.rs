//! Grain-track records: every live grain's id, side count and area at each
//! of a sequence of uniformly spaced steps.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrainRecord {
    pub id: u64,
    pub sides: u32,
    pub area: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrainStep {
    pub step: usize,
    pub time: f64,
    pub grains: Vec<GrainRecord>,
}

impl GrainStep {
    pub fn count(&self) -> usize {
        self.grains.len()
    }

    pub fn total_area(&self) -> f64 {
        self.grains.iter().map(|g| g.area).sum()
    }

    /// Histogram of side counts, indexed by side count.
    pub fn side_histogram(&self) -> Vec<u64> {
        let max = self.grains.iter().map(|g| g.sides as usize).max().unwrap_or(0);
        let mut h = vec![0u64; max + 1];
        for g in &self.grains {
            h[g.sides as usize] += 1;
        }
        h
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GrainTrackDataset {
    pub dt: f64,
    pub steps: Vec<GrainStep>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrackIssue {
    NegativeArea { step: usize, id: u64 },
    DuplicateId { step: usize, id: u64 },
    CountIncreased { step: usize },
    NonUniformStep { step: usize },
}

impl GrainTrackDataset {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.steps.iter().map(GrainStep::count).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.time).collect()
    }

    pub fn max_sides(&self) -> u32 {
        self.steps
            .iter()
            .flat_map(|s| s.grains.iter().map(|g| g.sides))
            .max()
            .unwrap_or(0)
    }

    /// Index of the step whose time is closest to `t`.
    pub fn nearest_step(&self, t: f64) -> Option<usize> {
        self.steps
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.time - t).abs().total_cmp(&(b.1.time - t).abs()))
            .map(|(i, _)| i)
    }

    /// First step at which at most `fraction` of the initial grains remain.
    pub fn step_with_remaining(&self, fraction: f64) -> Option<usize> {
        let n0 = self.steps.first()?.count() as f64;
        self.steps
            .iter()
            .position(|s| s.count() as f64 <= fraction * n0)
    }

    /// Checks the dataset invariants: nonnegative areas, unique ids per
    /// step, nonincreasing grain count and uniform step spacing.
    pub fn check(&self) -> Vec<TrackIssue> {
        let mut issues = Vec::new();
        let mut prev: Option<&GrainStep> = None;
        for (k, step) in self.steps.iter().enumerate() {
            let mut seen = HashSet::with_capacity(step.grains.len());
            for g in &step.grains {
                if !(g.area >= 0.0) {
                    issues.push(TrackIssue::NegativeArea { step: k, id: g.id });
                }
                if !seen.insert(g.id) {
                    issues.push(TrackIssue::DuplicateId { step: k, id: g.id });
                }
            }
            if let Some(p) = prev {
                if step.count() > p.count() {
                    issues.push(TrackIssue::CountIncreased { step: k });
                }
                let gap = step.time - p.time;
                if (gap - self.dt).abs() > 1e-9 * self.dt.abs().max(f64::MIN_POSITIVE) {
                    issues.push(TrackIssue::NonUniformStep { step: k });
                }
            }
            prev = Some(step);
        }
        issues
    }
}
