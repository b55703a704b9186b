//! Event-driven simulation of the finite M-species particle system.
//!
//! Between events every particle drifts at the constant speed of its
//! species. A boundary event happens when a shrinking particle reaches size
//! zero: it is removed and `K` other particles are mutated. Interior events
//! come from a Poisson clock and mutate `K` particles without removing any.
//!
//! Sizes are stored lazily as `(size, time)` at the last species change, so
//! drifting the whole system is O(1). Exit times of shrinking particles sit
//! in a binary heap with lazy invalidation.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Group, ModelPreset, MutationRule, Trigger};
use crate::stats::Histogram;
use crate::track::{GrainRecord, GrainStep, GrainTrackDataset};

/// Relative tolerance, in units of the mean initial size, below which a
/// particle counts as having reached the origin.
pub const HIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("empty initial sample")]
    EmptySample,
    #[error("invalid particle {index}: {reason}")]
    InvalidParticle { index: usize, reason: String },
    #[error("cannot reach zero polyhedral defect (defect {defect}, room {room})")]
    UnreachableDefect { defect: i64, room: i64 },
    #[error("selection exhausted at t={time} for trigger {trigger}")]
    SelectionExhausted { time: f64, trigger: Trigger },
    #[error("scheduling error: {0}")]
    Scheduling(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug)]
struct ExitKey {
    time: f64,
    species: u16,
    id: u32,
    version: u32,
}

impl PartialEq for ExitKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ExitKey {}

impl PartialOrd for ExitKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExitKey {
    // simultaneous hits resolve by ascending species, then ascending id
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.species.cmp(&other.species))
            .then(self.id.cmp(&other.id))
            .then(self.version.cmp(&other.version))
    }
}

/// Next scheduled boundary event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryHit {
    /// Time from now until the hit.
    pub dt: f64,
    pub id: usize,
    pub species: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutation {
    pub id: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EventKind {
    Boundary { l: usize },
    Interior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    pub vanished: Option<usize>,
    pub mutations: Vec<Mutation>,
}

pub type EventLog = Vec<EventRecord>;

/// Mutable population of `(species, size)` particles with stable ids.
#[derive(Clone, Debug)]
pub struct ParticleSystem {
    preset: Arc<ModelPreset>,
    /// Species per id; 0 once removed.
    species: Vec<u16>,
    ref_size: Vec<f64>,
    ref_time: Vec<f64>,
    version: Vec<u32>,
    slot: Vec<u32>,
    members: Vec<Vec<u32>>,
    t: f64,
    n0: usize,
    alive: usize,
    total_area: f64,
    hit_tol: f64,
    heap: BinaryHeap<Reverse<ExitKey>>,
    rng: ChaCha8Rng,
    boundary_events: u64,
    interior_events: u64,
}

impl ParticleSystem {
    /// Builds a system from `(species, size)` samples. With
    /// `enforce_zero_defect`, the fewest possible ±1 side changes are applied
    /// to randomly chosen particles until `Σ (s_i - 6) = 0`.
    pub fn new(
        preset: Arc<ModelPreset>,
        samples: &[(usize, f64)],
        enforce_zero_defect: bool,
        seed: u64,
    ) -> Result<Self, SimError> {
        if samples.is_empty() {
            return Err(SimError::EmptySample);
        }
        if samples.len() > u32::MAX as usize {
            return Err(SimError::InvalidConfig("too many particles".into()));
        }
        let cfg = &preset.species;
        for (index, &(s, x)) in samples.iter().enumerate() {
            if !cfg.contains(s) {
                return Err(SimError::InvalidParticle {
                    index,
                    reason: format!("species {s} outside {:?}", cfg.species()),
                });
            }
            if !(x > 0.0 && x.is_finite()) {
                return Err(SimError::InvalidParticle {
                    index,
                    reason: format!("size {x} must be positive"),
                });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut species: Vec<u16> = samples.iter().map(|&(s, _)| s as u16).collect();
        if enforce_zero_defect {
            zero_defect(&mut species, cfg.min_species(), cfg.max_species(), &mut rng)?;
        }
        let n = samples.len();
        let m = cfg.max_species();
        let mut members = vec![Vec::new(); m + 1];
        let mut slot = vec![0u32; n];
        for (id, &s) in species.iter().enumerate() {
            slot[id] = members[s as usize].len() as u32;
            members[s as usize].push(id as u32);
        }
        let ref_size: Vec<f64> = samples.iter().map(|&(_, x)| x).collect();
        let total_area: f64 = ref_size.iter().sum();
        let mut sys = Self {
            preset,
            species,
            ref_size,
            ref_time: vec![0.0; n],
            version: vec![0; n],
            slot,
            members,
            t: 0.0,
            n0: n,
            alive: n,
            total_area,
            hit_tol: HIT_TOLERANCE * total_area / n as f64,
            heap: BinaryHeap::new(),
            rng,
            boundary_events: 0,
            interior_events: 0,
        };
        for id in 0..n {
            sys.schedule(id);
        }
        Ok(sys)
    }

    pub fn preset(&self) -> &Arc<ModelPreset> {
        &self.preset
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Initial particle count `N`.
    pub fn initial_count(&self) -> usize {
        self.n0
    }

    /// Current particle count `N(t)`.
    pub fn count(&self) -> usize {
        self.alive
    }

    /// Population of species `s`.
    pub fn population(&self, s: usize) -> usize {
        self.members.get(s).map_or(0, Vec::len)
    }

    /// Populations indexed by species label.
    pub fn populations(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn boundary_events(&self) -> u64 {
        self.boundary_events
    }

    pub fn interior_events(&self) -> u64 {
        self.interior_events
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn is_alive(&self, id: usize) -> bool {
        self.species.get(id).is_some_and(|&s| s != 0)
    }

    pub fn species_of(&self, id: usize) -> Option<usize> {
        self.species
            .get(id)
            .and_then(|&s| (s != 0).then_some(s as usize))
    }

    /// Current size of particle `id` (zero once removed).
    pub fn size_of(&self, id: usize) -> f64 {
        match self.species_of(id) {
            Some(s) => {
                let v = self.preset.species.velocity(s);
                (self.ref_size[id] + v * (self.t - self.ref_time[id])).max(0.0)
            }
            None => 0.0,
        }
    }

    /// Live particles as `(id, species, size)`.
    pub fn particles(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.species.len())
            .filter(|&id| self.species[id] != 0)
            .map(|id| (id, self.species[id] as usize, self.size_of(id)))
    }

    pub fn total_area(&self) -> f64 {
        self.particles().map(|(_, _, x)| x).sum()
    }

    /// Area at construction; conserved when the defect is zero.
    pub fn initial_area(&self) -> f64 {
        self.total_area
    }

    /// Polyhedral defect `Σ (s_i - 6)`.
    pub fn defect(&self) -> i64 {
        self.members
            .iter()
            .enumerate()
            .map(|(s, m)| (s as i64 - 6) * m.len() as i64)
            .sum()
    }

    fn schedule(&mut self, id: usize) {
        let s = self.species[id] as usize;
        let v = self.preset.species.velocity(s);
        if v < 0.0 {
            let time = self.ref_time[id] + self.ref_size[id] / -v;
            self.heap.push(Reverse(ExitKey {
                time,
                species: s as u16,
                id: id as u32,
                version: self.version[id],
            }));
        }
    }

    fn is_current(&self, key: &ExitKey) -> bool {
        let id = key.id as usize;
        self.species[id] == key.species && self.version[id] == key.version
    }

    /// Next particle to reach the origin, or `None` when nothing shrinks.
    pub fn next_boundary_event(&mut self) -> Option<BoundaryHit> {
        while let Some(Reverse(key)) = self.heap.peek().copied() {
            if self.is_current(&key) {
                return Some(BoundaryHit {
                    dt: (key.time - self.t).max(0.0),
                    id: key.id as usize,
                    species: key.species as usize,
                });
            }
            self.heap.pop();
        }
        None
    }

    /// Total rate of the interior clock at the current population.
    pub fn interior_rate(&self) -> f64 {
        self.preset
            .edge_deletion
            .total_rate(self.alive, self.total_area)
    }

    /// Exponential waiting time until the next interior event; infinite when
    /// the rate is zero. The rate only changes at events, so sampling is exact.
    pub fn sample_interior_waiting_time(&mut self) -> f64 {
        if self.preset.interior.is_none() {
            return f64::INFINITY;
        }
        let rate = self.interior_rate();
        if rate > 0.0 {
            Exp::new(rate).expect("positive rate").sample(&mut self.rng)
        } else {
            f64::INFINITY
        }
    }

    /// Draws `rule.k` distinct particles, species-by-species with probability
    /// `w_σ N_σ / Σ w_n N_n`, then uniformly within the species. `exclude`
    /// and earlier picks are ineligible.
    pub fn select_targets(
        &mut self,
        rule: &MutationRule,
        exclude: Option<usize>,
    ) -> Result<Vec<usize>, SimError> {
        let mut taken: Vec<usize> = exclude.into_iter().collect();
        let mut picks = Vec::with_capacity(rule.k);
        let m = self.preset.max_species();
        for _ in 0..rule.k {
            let available = |s: usize, taken: &[usize]| {
                let used = taken
                    .iter()
                    .filter(|&&id| self.species[id] as usize == s)
                    .count();
                self.members[s].len() - used
            };
            let mut total = 0.0;
            for s in 1..=m {
                total += rule.weights[s] * available(s, &taken) as f64;
            }
            if !(total > 0.0) {
                return Err(SimError::SelectionExhausted {
                    time: self.t,
                    trigger: rule.trigger,
                });
            }
            let u = self.rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = 0;
            for s in 1..=m {
                let w = rule.weights[s] * available(s, &taken) as f64;
                if w > 0.0 {
                    chosen = s;
                    acc += w;
                    if u < acc {
                        break;
                    }
                }
            }
            let pool = &self.members[chosen];
            let id = loop {
                let id = pool[self.rng.random_range(0..pool.len())] as usize;
                if !taken.contains(&id) {
                    break id;
                }
            };
            taken.push(id);
            picks.push(id);
        }
        Ok(picks)
    }

    fn set_species(&mut self, id: usize, to: usize) {
        let from = self.species[id] as usize;
        let x = self.size_of(id);
        self.detach(id, from);
        self.species[id] = to as u16;
        self.slot[id] = self.members[to].len() as u32;
        self.members[to].push(id as u32);
        self.ref_size[id] = x;
        self.ref_time[id] = self.t;
        self.version[id] = self.version[id].wrapping_add(1);
        self.schedule(id);
    }

    fn detach(&mut self, id: usize, s: usize) {
        let pos = self.slot[id] as usize;
        let list = &mut self.members[s];
        list.swap_remove(pos);
        if let Some(&moved) = list.get(pos) {
            self.slot[moved as usize] = pos as u32;
        }
    }

    fn mutate(&mut self, rule: &MutationRule, picks: &[usize]) -> Vec<Mutation> {
        let mut out = Vec::with_capacity(picks.len());
        for (j, &id) in picks.iter().enumerate() {
            let from = self.species[id] as usize;
            let to = rule.target(from, j);
            debug_assert!(self.preset.species.contains(to), "closed preset");
            self.set_species(id, to);
            out.push(Mutation { id, from, to });
        }
        out
    }

    /// Removes the particle at the origin and mutates `K^(l)` others.
    ///
    /// `id` must be the particle returned by [`Self::next_boundary_event`]
    /// after advancing to its exit time.
    pub fn apply_boundary_event(&mut self, id: usize) -> Result<EventRecord, SimError> {
        let l = self.species_of(id).ok_or_else(|| {
            SimError::Scheduling(format!("particle {id} is not alive"))
        })?;
        let x = self.size_of(id);
        if x > self.hit_tol {
            return Err(SimError::Scheduling(format!(
                "particle {id} has size {x} at its boundary event"
            )));
        }
        let preset = Arc::clone(&self.preset);
        let rule = preset.rule(Trigger::Boundary(l)).ok_or_else(|| {
            SimError::Scheduling(format!("no boundary rule for species {l}"))
        })?;
        let picks = self.select_targets(rule, Some(id))?;
        self.detach(id, l);
        self.species[id] = 0;
        self.version[id] = self.version[id].wrapping_add(1);
        self.alive -= 1;
        let mutations = self.mutate(rule, &picks);
        self.boundary_events += 1;
        Ok(EventRecord {
            time: self.t,
            kind: EventKind::Boundary { l },
            vanished: Some(id),
            mutations,
        })
    }

    /// Mutates `K^(I)` particles per the interior rule.
    pub fn apply_interior_event(&mut self) -> Result<EventRecord, SimError> {
        let preset = Arc::clone(&self.preset);
        let rule = preset
            .interior
            .as_ref()
            .ok_or_else(|| SimError::Scheduling("preset has no interior rule".into()))?;
        let picks = self.select_targets(rule, None)?;
        let mutations = self.mutate(rule, &picks);
        self.interior_events += 1;
        Ok(EventRecord {
            time: self.t,
            kind: EventKind::Interior,
            vanished: None,
            mutations,
        })
    }

    /// Drifts every particle by `dt`. Overshooting a boundary event is a
    /// scheduling bug and fails.
    pub fn advance(&mut self, dt: f64) -> Result<(), SimError> {
        if !(dt >= 0.0) {
            return Err(SimError::Scheduling(format!("negative step {dt}")));
        }
        if let Some(hit) = self.next_boundary_event() {
            let speed = -self.preset.species.velocity(hit.species);
            if (dt - hit.dt) * speed > self.hit_tol {
                return Err(SimError::Scheduling(format!(
                    "step {dt} overshoots boundary event of particle {} at {}",
                    hit.id, hit.dt
                )));
            }
        }
        self.t += dt;
        Ok(())
    }

    fn advance_to(&mut self, t: f64) -> Result<(), SimError> {
        self.advance((t - self.t).max(0.0))
    }

    fn snapshot(&self, config: &SimConfig) -> Snapshot {
        let counts = self.populations();
        let defect = self.preset.is_grain().then(|| self.defect());
        let histograms = config.histogram_bins.map(|bins| {
            let m = self.preset.max_species();
            let mut sizes: Vec<Vec<f64>> = vec![Vec::new(); m + 1];
            for (_, s, x) in self.particles() {
                sizes[s].push(x);
            }
            let hi = sizes.iter().flatten().copied().fold(0.0, f64::max);
            self.preset
                .species
                .species()
                .map(|s| {
                    let mut h = Histogram::uniform(sizes[s].iter().copied(), bins, 0.0, hi);
                    h.species = Some(s);
                    h
                })
                .collect()
        });
        let grains = config.track_grains.then(|| {
            self.particles()
                .map(|(id, s, x)| GrainRecord {
                    id: id as u64,
                    sides: s as u32,
                    area: x,
                })
                .collect()
        });
        Snapshot {
            time: self.t,
            count: self.alive,
            counts,
            total_area: self.total_area(),
            defect,
            boundary_events: self.boundary_events,
            interior_events: self.interior_events,
            histograms,
            grains,
        }
    }
}

/// Applies the fewest ±1 side changes needed for zero defect.
fn zero_defect(
    species: &mut [u16],
    min: usize,
    max: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(), SimError> {
    let mut defect: i64 = species.iter().map(|&s| s as i64 - 6).sum();
    if defect == 0 {
        return Ok(());
    }
    let room: i64 = if defect > 0 {
        species.iter().map(|&s| s as i64 - min as i64).sum()
    } else {
        species.iter().map(|&s| max as i64 - s as i64).sum()
    };
    if room < defect.abs() {
        return Err(SimError::UnreachableDefect { defect, room });
    }
    let mut order: Vec<usize> = (0..species.len()).collect();
    // Fisher–Yates with the system generator keeps adjustments reproducible
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    while defect != 0 {
        for &i in &order {
            if defect > 0 && species[i] as usize > min {
                species[i] -= 1;
                defect -= 1;
            } else if defect < 0 && (species[i] as usize) < max {
                species[i] += 1;
                defect += 1;
            }
            if defect == 0 {
                break;
            }
        }
    }
    Ok(())
}

/// Run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_end: f64,
    pub seed: u64,
    pub snapshot_interval: f64,
    /// Keep every event in the log.
    #[serde(default = "default_true")]
    pub record_events: bool,
    /// Per-species size histograms at each snapshot.
    #[serde(default)]
    pub histogram_bins: Option<usize>,
    /// Per-grain records at each snapshot.
    #[serde(default)]
    pub track_grains: bool,
    /// Stop once at most this fraction of the initial particles remains.
    #[serde(default)]
    pub stop_fraction: Option<f64>,
}

fn default_true() -> bool {
    true
}

impl SimConfig {
    pub fn new(t_end: f64, seed: u64, snapshot_interval: f64) -> Self {
        Self {
            t_end,
            seed,
            snapshot_interval,
            record_events: true,
            histogram_bins: None,
            track_grains: false,
            stop_fraction: None,
        }
    }

    fn check(&self) -> Result<(), SimError> {
        if !(self.t_end > 0.0) {
            return Err(SimError::InvalidConfig("t_end must be positive".into()));
        }
        if !(self.snapshot_interval > 0.0) {
            return Err(SimError::InvalidConfig(
                "snapshot interval must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// State summary at one snapshot time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub count: usize,
    /// Populations indexed by species label.
    pub counts: Vec<usize>,
    pub total_area: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defect: Option<i64>,
    pub boundary_events: u64,
    pub interior_events: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histograms: Option<Vec<Histogram>>,
    #[serde(skip)]
    pub grains: Option<Vec<GrainRecord>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    EndTime,
    Extinct { time: f64 },
    StopFraction { time: f64 },
    SelectionExhausted { time: f64, trigger: Trigger },
}

/// Receives snapshots as the run produces them.
pub trait SnapshotSink {
    fn record(&mut self, snapshot: Snapshot);
}

impl SnapshotSink for Vec<Snapshot> {
    fn record(&mut self, snapshot: Snapshot) {
        self.push(snapshot);
    }
}

/// Adapts a closure into a [`SnapshotSink`].
pub struct FnSink<F>(pub F);

impl<F: FnMut(Snapshot)> SnapshotSink for FnSink<F> {
    fn record(&mut self, snapshot: Snapshot) {
        (self.0)(snapshot)
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub system: ParticleSystem,
    pub events: EventLog,
    pub termination: Termination,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub system: ParticleSystem,
    pub events: EventLog,
    pub snapshots: Vec<Snapshot>,
    pub termination: Termination,
}

/// Runs to `t_end`, extinction, the stop fraction, or exhausted selection.
pub fn run(config: &SimConfig, initial: ParticleSystem) -> Result<RunOutcome, SimError> {
    let mut snapshots = Vec::new();
    let summary = run_with(config, initial, &mut snapshots)?;
    Ok(RunOutcome {
        system: summary.system,
        events: summary.events,
        snapshots,
        termination: summary.termination,
    })
}

/// Like [`run`], streaming snapshots into `sink`. The system generator is
/// reseeded from `config.seed` first.
pub fn run_with(
    config: &SimConfig,
    mut system: ParticleSystem,
    sink: &mut dyn SnapshotSink,
) -> Result<RunSummary, SimError> {
    config.check()?;
    system.reseed(config.seed);
    let mut events = EventLog::new();
    let t0 = system.t;
    let mut snap_index: u64 = 0;
    let snap_time = |k: u64| t0 + k as f64 * config.snapshot_interval;
    let t_end = t0 + config.t_end;
    let stop_below = config
        .stop_fraction
        .map(|f| (f * system.n0 as f64).floor() as usize);
    let mut next_interior = system.t + system.sample_interior_waiting_time();

    let termination = loop {
        let hit = system.next_boundary_event();
        let t_boundary = hit.map_or(f64::INFINITY, |h| system.t + h.dt);
        let t_next = t_boundary.min(next_interior);
        while snap_time(snap_index) <= t_next.min(t_end) {
            system.advance_to(snap_time(snap_index))?;
            sink.record(system.snapshot(config));
            snap_index += 1;
        }
        if t_next > t_end {
            system.advance_to(t_end)?;
            break Termination::EndTime;
        }
        let result = if t_boundary <= next_interior {
            let hit = hit.expect("finite boundary time");
            system.advance_to(t_boundary)?;
            system.apply_boundary_event(hit.id)
        } else {
            system.advance_to(next_interior)?;
            system.apply_interior_event()
        };
        match result {
            Ok(record) => {
                if config.record_events {
                    events.push(record);
                }
            }
            Err(SimError::SelectionExhausted { time, trigger }) => {
                break Termination::SelectionExhausted { time, trigger };
            }
            Err(e) => return Err(e),
        }
        if system.alive == 0 {
            break Termination::Extinct { time: system.t };
        }
        if stop_below.is_some_and(|n| system.alive <= n) {
            break Termination::StopFraction { time: system.t };
        }
        next_interior = system.t + system.sample_interior_waiting_time();
    };
    Ok(RunSummary {
        system,
        events,
        termination,
    })
}

/// Collects the grain records of snapshots spaced `dt` apart into a
/// grain-track dataset. Snapshots without grain records are skipped.
pub fn export_grain_track(snapshots: &[Snapshot], dt: f64) -> GrainTrackDataset {
    let steps = snapshots
        .iter()
        .filter_map(|s| s.grains.as_ref().map(|g| (s.time, g)))
        .enumerate()
        .map(|(step, (time, grains))| GrainStep {
            step,
            time,
            grains: grains.clone(),
        })
        .collect();
    GrainTrackDataset { dt, steps }
}

/// Initial grains with side counts from a fixed distribution concentrated
/// around six and areas following a Gamma(3) law whose mean grows like
/// `s - 2`, normalized so the overall mean area is `mean_area`.
pub fn sample_grain_population(
    n: usize,
    max_sides: usize,
    mean_area: f64,
    rng: &mut impl Rng,
) -> Vec<(usize, f64)> {
    const SIDE_WEIGHTS: [(usize, f64); 9] = [
        (3, 0.02),
        (4, 0.10),
        (5, 0.25),
        (6, 0.30),
        (7, 0.19),
        (8, 0.09),
        (9, 0.035),
        (10, 0.01),
        (11, 0.005),
    ];
    let table: Vec<(usize, f64)> = SIDE_WEIGHTS
        .iter()
        .copied()
        .filter(|&(s, _)| s <= max_sides)
        .collect();
    let total: f64 = table.iter().map(|&(_, w)| w).sum();
    let mean_scale: f64 = table.iter().map(|&(s, w)| w / total * (s as f64 - 2.0)).sum();
    let gamma = rand_distr::Gamma::new(3.0, 1.0 / 3.0).expect("valid gamma");
    (0..n)
        .map(|_| {
            let mut u = rng.random::<f64>() * total;
            let mut s = table[table.len() - 1].0;
            for &(side, w) in &table {
                if u < w {
                    s = side;
                    break;
                }
                u -= w;
            }
            let x: f64 = gamma.sample(rng);
            let area = mean_area * x * (s as f64 - 2.0) / mean_scale;
            (s, area.max(f64::MIN_POSITIVE))
        })
        .collect()
}

/// Initial particles of the two-species model: half of species 1 uniform on
/// `[0, 1]`, half of species 2 uniform on `[2, 3]`.
pub fn sample_two_species(n: usize, rng: &mut impl Rng) -> Vec<(usize, f64)> {
    let half = n / 2;
    (0..n)
        .map(|i| {
            let u: f64 = rng.random::<f64>();
            if i < half {
                (1, u.max(f64::MIN_POSITIVE))
            } else {
                (2, 2.0 + u)
            }
        })
        .collect()
}

/// Group of each species, for reporting.
pub fn species_groups(preset: &ModelPreset) -> Vec<(usize, Group)> {
    preset
        .species
        .species()
        .map(|s| (s, preset.species.group(s)))
        .collect()
}
