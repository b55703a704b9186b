//! Model parameter space: species groups, drift velocities, mutation rules,
//! selection weights and edge-deletion modes, plus the canonical grain
//! coarsening presets.
//!
//! Species are addressed by their label. Grain presets use labels `2..=M`
//! (the label is the number of sides); generic presets may start at 1. All
//! per-species tables are stored with length `M + 1` and indexed directly by
//! label, so slot 0 (and slot 1 for grain presets) is always unused.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Material constant of the von Neumann–Mullins law used by grain presets.
pub const GRAIN_SPEED: f64 = std::f64::consts::FRAC_PI_3;

/// Default cap on the number of sides.
pub const DEFAULT_MAX_SIDES: usize = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("preset `{0}` is not a grain preset")]
    NotGrainPreset(String),
}

/// What fires a mutation: a particle of species `l` reaching the origin, or
/// an interior (edge deletion) clock.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Trigger {
    Boundary(usize),
    Interior,
}

impl Trigger {
    /// Numeric label, with 0 standing for the interior trigger.
    pub fn label(self) -> usize {
        match self {
            Trigger::Boundary(l) => l,
            Trigger::Interior => 0,
        }
    }

    pub fn from_label(label: usize) -> Self {
        if label == 0 {
            Trigger::Interior
        } else {
            Trigger::Boundary(label)
        }
    }
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trigger::Boundary(l) => write!(f, "l={l}"),
            Trigger::Interior => write!(f, "interior"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Shrinking,
    Stationary,
    Growing,
}

/// Species range and constant drift velocities.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeciesConfig {
    min: usize,
    max: usize,
    velocities: Vec<f64>,
}

impl SpeciesConfig {
    /// `velocities[s]` is the drift of species `s`; entries below `min` are
    /// ignored. The groups must be contiguous: shrinking, then stationary,
    /// then growing species.
    pub fn new(min: usize, velocities: Vec<f64>) -> Result<Self, ModelError> {
        if min == 0 {
            return Err(ModelError::InvalidConfiguration(
                "species labels start at 1".into(),
            ));
        }
        if velocities.len() <= min {
            return Err(ModelError::InvalidConfiguration(
                "at least one species is required".into(),
            ));
        }
        let max = velocities.len() - 1;
        let mut last = Group::Shrinking;
        for s in min..=max {
            let v = velocities[s];
            if !v.is_finite() {
                return Err(ModelError::InvalidConfiguration(format!(
                    "velocity of species {s} is not finite"
                )));
            }
            let g = group_of_velocity(v);
            if rank(g) < rank(last) {
                return Err(ModelError::InvalidConfiguration(format!(
                    "species groups are not contiguous at species {s}"
                )));
            }
            last = g;
        }
        Ok(Self {
            min,
            max,
            velocities,
        })
    }

    /// Side counts `2..=m` with `v_s = (π/3)(s - 6)`.
    pub fn grain(m: usize) -> Self {
        let velocities = (0..=m)
            .map(|s| if s < 2 { 0.0 } else { GRAIN_SPEED * (s as f64 - 6.0) })
            .collect();
        Self {
            min: 2,
            max: m,
            velocities,
        }
    }

    pub fn min_species(&self) -> usize {
        self.min
    }

    /// `M`, the largest species label.
    pub fn max_species(&self) -> usize {
        self.max
    }

    pub fn species(&self) -> std::ops::RangeInclusive<usize> {
        self.min..=self.max
    }

    pub fn contains(&self, s: usize) -> bool {
        (self.min..=self.max).contains(&s)
    }

    pub fn velocity(&self, s: usize) -> f64 {
        self.velocities[s]
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn group(&self, s: usize) -> Group {
        group_of_velocity(self.velocities[s])
    }

    pub fn shrinking(&self) -> impl Iterator<Item = usize> + '_ {
        self.species().filter(move |&s| self.velocities[s] < 0.0)
    }

    pub fn stationary(&self) -> impl Iterator<Item = usize> + '_ {
        self.species().filter(move |&s| self.velocities[s] == 0.0)
    }

    pub fn growing(&self) -> impl Iterator<Item = usize> + '_ {
        self.species().filter(move |&s| self.velocities[s] > 0.0)
    }

    /// Largest characteristic speed `max_s v_s` (zero if nothing grows).
    pub fn max_speed(&self) -> f64 {
        self.species()
            .map(|s| self.velocities[s])
            .fold(0.0, f64::max)
    }
}

fn group_of_velocity(v: f64) -> Group {
    if v < 0.0 {
        Group::Shrinking
    } else if v == 0.0 {
        Group::Stationary
    } else {
        Group::Growing
    }
}

fn rank(g: Group) -> u8 {
    match g {
        Group::Shrinking => 0,
        Group::Stationary => 1,
        Group::Growing => 2,
    }
}

/// One mutation matrix `R` with its multiplicity `K` and selection weights.
///
/// `targets[s][j]` is the species a selected particle of species `s` becomes
/// as the `j`-th mutated particle; 0 marks a species that may not be selected.
#[derive(Clone, Debug, PartialEq)]
pub struct MutationRule {
    pub trigger: Trigger,
    pub k: usize,
    pub targets: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

impl MutationRule {
    /// Builds a rule over species `0..=max` from a row generator.
    pub fn from_fn(
        trigger: Trigger,
        k: usize,
        max: usize,
        mut row: impl FnMut(usize, usize) -> usize,
        mut weight: impl FnMut(usize) -> f64,
    ) -> Self {
        let targets = (0..=max)
            .map(|s| (0..k).map(|j| row(s, j)).collect())
            .collect();
        let weights = (0..=max).map(&mut weight).collect();
        Self {
            trigger,
            k,
            targets,
            weights,
        }
    }

    /// Target species of the `j`-th (0-based) mutation of a species-`s` particle.
    pub fn target(&self, s: usize, j: usize) -> usize {
        self.targets[s][j]
    }

    pub fn weight(&self, s: usize) -> f64 {
        self.weights[s]
    }

    pub fn max_species(&self) -> usize {
        self.targets.len() - 1
    }

    pub fn transfer_counts(&self) -> TransferCounts {
        derive_transfer_counts(self)
    }
}

/// `J[s][σ]`: number of mutations from species `s` to `σ` per event.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransferCounts {
    counts: Vec<Vec<u32>>,
}

impl TransferCounts {
    pub fn get(&self, s: usize, sigma: usize) -> u32 {
        self.counts[s][sigma]
    }

    pub fn row(&self, s: usize) -> &[u32] {
        &self.counts[s]
    }

    pub fn row_sum(&self, s: usize) -> u32 {
        self.counts[s].iter().sum()
    }

    pub fn size(&self) -> usize {
        self.counts.len()
    }
}

/// Counts how often each target species appears in each row of `R`.
pub fn derive_transfer_counts(rule: &MutationRule) -> TransferCounts {
    let n = rule.targets.len();
    let mut counts = vec![vec![0u32; n]; n];
    for (s, row) in rule.targets.iter().enumerate() {
        for &sigma in row {
            // targets outside the table are reported by the validator instead
            if sigma != 0 && sigma < n {
                counts[s][sigma] += 1;
            }
        }
    }
    TransferCounts { counts }
}

/// Interior event intensity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum EdgeDeletion {
    /// No interior events.
    #[serde(rename = "ND")]
    None,
    /// Constant per-particle rate `beta`.
    #[serde(rename = "PD")]
    Population { beta: f64 },
    /// Per-particle rate `alpha * beta * N(t) / A`, `A` the conserved total
    /// area, so that edge deletions track grain removals.
    #[serde(rename = "RD")]
    Removal { alpha: f64, beta: f64 },
}

impl EdgeDeletion {
    pub fn code(&self) -> &'static str {
        match self {
            EdgeDeletion::None => "ND",
            EdgeDeletion::Population { .. } => "PD",
            EdgeDeletion::Removal { .. } => "RD",
        }
    }

    /// Total interior event rate for `n` particles with total area `area`.
    pub fn total_rate(&self, n: usize, area: f64) -> f64 {
        let n = n as f64;
        match *self {
            EdgeDeletion::None => 0.0,
            EdgeDeletion::Population { beta } => beta * n,
            EdgeDeletion::Removal { alpha, beta } => {
                if area > 0.0 {
                    alpha * beta * n * n / area
                } else {
                    0.0
                }
            }
        }
    }
}

/// Correlated weight table keyed by trigger label (`"0"` for interior,
/// `"2"`..`"5"` for boundary events). Each entry lists `w̃_k` for
/// `k = 1..=M`.
pub type CorrelatedWeights = BTreeMap<String, Vec<f64>>;

#[derive(Clone, Debug, PartialEq)]
pub enum WeightMode {
    Uncorrelated,
    Correlated(CorrelatedWeights),
}

/// Complete structural description of one M-species model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelPreset {
    pub name: String,
    pub species: SpeciesConfig,
    /// One rule per shrinking species, ascending by label.
    pub boundary_rules: Vec<MutationRule>,
    pub interior: Option<MutationRule>,
    pub weight_mode: WeightMode,
    pub edge_deletion: EdgeDeletion,
    grain: bool,
}

impl ModelPreset {
    /// Generic preset. Rule tables must cover species `0..=M`.
    pub fn custom(
        name: impl Into<String>,
        species: SpeciesConfig,
        mut boundary_rules: Vec<MutationRule>,
        interior: Option<MutationRule>,
        edge_deletion: EdgeDeletion,
    ) -> Result<Self, ModelError> {
        let m = species.max_species();
        boundary_rules.sort_by_key(|r| r.trigger);
        for rule in boundary_rules.iter().chain(interior.iter()) {
            if rule.targets.len() != m + 1 || rule.weights.len() != m + 1 {
                return Err(ModelError::InvalidConfiguration(format!(
                    "rule {} must cover species 0..={m}",
                    rule.trigger
                )));
            }
            if rule.targets.iter().any(|row| row.len() != rule.k) || rule.k == 0 {
                return Err(ModelError::InvalidConfiguration(format!(
                    "rule {} has rows of the wrong length",
                    rule.trigger
                )));
            }
        }
        for l in species.shrinking() {
            if !boundary_rules
                .iter()
                .any(|r| r.trigger == Trigger::Boundary(l))
            {
                return Err(ModelError::InvalidConfiguration(format!(
                    "missing boundary rule for shrinking species {l}"
                )));
            }
        }
        if let Some(rule) = &interior {
            if rule.trigger != Trigger::Interior {
                return Err(ModelError::InvalidConfiguration(
                    "interior rule has a boundary trigger".into(),
                ));
            }
        }
        if interior.is_none() && edge_deletion != EdgeDeletion::None {
            return Err(ModelError::InvalidConfiguration(
                "edge deletion requires an interior rule".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            species,
            boundary_rules,
            interior,
            weight_mode: WeightMode::Uncorrelated,
            edge_deletion,
            grain: false,
        })
    }

    /// True for presets built by [`build_grain_preset`].
    pub fn is_grain(&self) -> bool {
        self.grain
    }

    pub fn max_species(&self) -> usize {
        self.species.max_species()
    }

    pub fn rule(&self, trigger: Trigger) -> Option<&MutationRule> {
        match trigger {
            Trigger::Interior => self.interior.as_ref(),
            Trigger::Boundary(_) => self.boundary_rules.iter().find(|r| r.trigger == trigger),
        }
    }

    pub fn rules(&self) -> impl Iterator<Item = &MutationRule> {
        self.boundary_rules.iter().chain(self.interior.iter())
    }

    pub fn rules_mut(&mut self) -> impl Iterator<Item = &mut MutationRule> {
        self.boundary_rules.iter_mut().chain(self.interior.iter_mut())
    }

    pub fn with_edge_deletion(mut self, edge_deletion: EdgeDeletion) -> Self {
        self.edge_deletion = edge_deletion;
        self
    }

    /// Serializable form. Only grain presets have one.
    pub fn to_spec(&self) -> Result<PresetSpec, ModelError> {
        if !self.grain {
            return Err(ModelError::NotGrainPreset(self.name.clone()));
        }
        let (mode, table) = match &self.weight_mode {
            WeightMode::Uncorrelated => ("uncorrelated", None),
            WeightMode::Correlated(t) => ("correlated", Some(t.clone())),
        };
        Ok(PresetSpec {
            m: self.max_species(),
            weight_mode: mode.to_string(),
            edge_deletion: self.edge_deletion,
            correlated_weights: table,
        })
    }
}

/// JSON document describing a grain preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresetSpec {
    #[serde(rename = "M")]
    pub m: usize,
    pub weight_mode: String,
    pub edge_deletion: EdgeDeletion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlated_weights: Option<CorrelatedWeights>,
}

impl PresetSpec {
    pub fn build(&self) -> Result<ModelPreset, ModelError> {
        let mode = match self.weight_mode.as_str() {
            "uncorrelated" => WeightMode::Uncorrelated,
            "correlated" => WeightMode::Correlated(self.correlated_weights.clone().ok_or_else(
                || {
                    ModelError::InvalidConfiguration(
                        "correlated weight mode requires `correlated_weights`".into(),
                    )
                },
            )?),
            other => {
                return Err(ModelError::InvalidConfiguration(format!(
                    "unknown weight_mode `{other}`"
                )))
            }
        };
        build_grain_preset(self.m, mode, self.edge_deletion)
    }
}

/// Multiplicity `K` for each grain trigger.
pub fn grain_multiplicity(trigger: Trigger) -> Option<usize> {
    match trigger {
        Trigger::Boundary(2) => Some(2),
        Trigger::Boundary(3) => Some(3),
        Trigger::Boundary(4) => Some(2),
        Trigger::Boundary(5) => Some(3),
        Trigger::Interior => Some(4),
        Trigger::Boundary(_) => None,
    }
}

fn grain_target(trigger: Trigger, m: usize, k: usize, j: usize) -> usize {
    match trigger {
        Trigger::Boundary(2) if (4..=m).contains(&k) => k - 2,
        Trigger::Boundary(3) | Trigger::Boundary(4) if (3..=m).contains(&k) => k - 1,
        Trigger::Boundary(5) if (3..m).contains(&k) => {
            if j < 2 {
                k - 1
            } else {
                k + 1
            }
        }
        Trigger::Interior if (3..m).contains(&k) => {
            if j < 2 {
                k - 1
            } else {
                k + 1
            }
        }
        _ => 0,
    }
}

/// Uncorrelated weights: `w_k = k` wherever the mutation row is admissible.
fn grain_uncorrelated_weight(trigger: Trigger, m: usize, k: usize) -> f64 {
    let admissible = match trigger {
        Trigger::Boundary(2) => (4..=m).contains(&k),
        Trigger::Boundary(3) | Trigger::Boundary(4) => (3..=m).contains(&k),
        Trigger::Boundary(5) | Trigger::Interior => (3..m).contains(&k),
        Trigger::Boundary(_) => false,
    };
    if admissible {
        k as f64
    } else {
        0.0
    }
}

/// Grain coarsening preset with side counts `2..=m`.
///
/// Correlated weight tables are masked so species without an admissible
/// mutation row keep weight zero.
pub fn build_grain_preset(
    m: usize,
    weight_mode: WeightMode,
    edge_deletion: EdgeDeletion,
) -> Result<ModelPreset, ModelError> {
    if m < 7 {
        return Err(ModelError::InvalidConfiguration(format!(
            "grain presets need M >= 7, got {m}"
        )));
    }
    check_edge_deletion(&edge_deletion)?;
    let species = SpeciesConfig::grain(m);
    let triggers = [
        Trigger::Boundary(2),
        Trigger::Boundary(3),
        Trigger::Boundary(4),
        Trigger::Boundary(5),
        Trigger::Interior,
    ];
    let mut rules = Vec::with_capacity(triggers.len());
    for trigger in triggers {
        let k = grain_multiplicity(trigger).expect("grain trigger");
        let mut rule = MutationRule::from_fn(
            trigger,
            k,
            m,
            |s, j| grain_target(trigger, m, s, j),
            |s| grain_uncorrelated_weight(trigger, m, s),
        );
        if let WeightMode::Correlated(table) = &weight_mode {
            let key = trigger.label().to_string();
            let row = table.get(&key).ok_or_else(|| {
                ModelError::InvalidConfiguration(format!(
                    "correlated weights missing trigger {key}"
                ))
            })?;
            if row.len() != m {
                return Err(ModelError::InvalidConfiguration(format!(
                    "correlated weights for trigger {key} need {m} entries, got {}",
                    row.len()
                )));
            }
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(ModelError::InvalidConfiguration(format!(
                    "correlated weights for trigger {key} must be finite and nonnegative"
                )));
            }
            for s in 0..=m {
                let admissible = s >= 2 && rule.targets[s].iter().all(|&t| t != 0);
                rule.weights[s] = if admissible { row[s - 1] } else { 0.0 };
            }
        }
        rules.push(rule);
    }
    let interior = rules.pop();
    let mode_name = match &weight_mode {
        WeightMode::Uncorrelated => "",
        WeightMode::Correlated(_) => "-corr",
    };
    Ok(ModelPreset {
        name: format!(
            "grain{m}-{}{mode_name}",
            edge_deletion.code().to_ascii_lowercase()
        ),
        species,
        boundary_rules: rules,
        interior,
        weight_mode,
        edge_deletion,
        grain: true,
    })
}

fn check_edge_deletion(e: &EdgeDeletion) -> Result<(), ModelError> {
    let ok = match *e {
        EdgeDeletion::None => true,
        EdgeDeletion::Population { beta } => beta.is_finite() && beta >= 0.0,
        EdgeDeletion::Removal { alpha, beta } => {
            alpha.is_finite() && beta.is_finite() && alpha >= 0.0 && beta >= 0.0
        }
    };
    if ok {
        Ok(())
    } else {
        Err(ModelError::InvalidConfiguration(
            "edge deletion parameters must be finite and nonnegative".into(),
        ))
    }
}

/// Two species with `v_1 = -1`, `v_2 = 0`; each vanishing species-1
/// particle turns one species-2 particle into species 1. The kinetic limit
/// of this model stops existing in finite time.
pub fn two_species_counter() -> ModelPreset {
    let species = SpeciesConfig::new(1, vec![0.0, -1.0, 0.0]).expect("valid velocities");
    let rule = MutationRule {
        trigger: Trigger::Boundary(1),
        k: 1,
        targets: vec![vec![0], vec![0], vec![1]],
        weights: vec![0.0, 0.0, 1.0],
    };
    ModelPreset::custom(
        "two-species-counter",
        species,
        vec![rule],
        None,
        EdgeDeletion::None,
    )
    .expect("valid preset")
}

/// Names accepted by [`builtin_preset`].
pub const BUILTIN_PRESETS: [&str; 4] = ["grain15-nd", "grain15-pd", "grain15-rd", "two-species-counter"];

/// Built-in presets: the three grain models with uncorrelated weights
/// (`β_PD = 1`, `α = 1.27`, `β_RD = 2.02`) and the two-species counterexample.
pub fn builtin_preset(name: &str) -> Option<ModelPreset> {
    let edge_deletion = match name {
        "grain15-nd" => EdgeDeletion::None,
        "grain15-pd" => EdgeDeletion::Population { beta: 1.0 },
        "grain15-rd" => EdgeDeletion::Removal { alpha: 1.27, beta: 2.02 },
        "two-species-counter" => return Some(two_species_counter()),
        _ => return None,
    };
    Some(
        build_grain_preset(DEFAULT_MAX_SIDES, WeightMode::Uncorrelated, edge_deletion)
            .expect("valid builtin"),
    )
}

/// Violations found by the structural and topological checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(|v| v.to_string()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub trigger: Trigger,
    pub species: Option<usize>,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ViolationKind {
    /// `J[s][s] > 0`.
    TrivialMutation,
    /// Row sum of `J` differs from `K` for a selectable species.
    RowSum { got: u32, expected: usize },
    /// A selectable species has no admissible mutation (its row targets 0 or a
    /// species outside the model).
    Closure { target: usize },
    /// Negative or non-finite weight.
    BadWeight,
    /// No weighted species at all for this trigger.
    EmptyPool,
    /// Net side changes of a row disagree with the coarsening rule.
    RuleMismatch { expected: Vec<i32>, got: Vec<i32> },
    /// The trigger has no coarsening rule.
    UnknownTrigger,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.species.unwrap_or(0);
        match &self.kind {
            ViolationKind::TrivialMutation => {
                write!(f, "{}: trivial mutation at ({s},{s})", self.trigger)
            }
            ViolationKind::RowSum { got, expected } => write!(
                f,
                "{}: row {s} of J sums to {got}, expected K={expected}",
                self.trigger
            ),
            ViolationKind::Closure { target } => write!(
                f,
                "{}: species {s} is selectable but mutates to inadmissible species {target}",
                self.trigger
            ),
            ViolationKind::BadWeight => {
                write!(f, "{}: weight of species {s} is negative or not finite", self.trigger)
            }
            ViolationKind::EmptyPool => write!(f, "{}: every selection weight is zero", self.trigger),
            ViolationKind::RuleMismatch { expected, got } => write!(
                f,
                "{}: species {s} side changes {got:?}, expected {expected:?}",
                self.trigger
            ),
            ViolationKind::UnknownTrigger => {
                write!(f, "{}: no coarsening rule for this trigger", self.trigger)
            }
        }
    }
}

/// Structural checks: no trivial mutations, `J` row sums equal `K` on
/// selectable species, selectable species only mutate into the model.
pub fn validate_preset(preset: &ModelPreset) -> ValidationReport {
    let mut violations = Vec::new();
    let species = &preset.species;
    for rule in preset.rules() {
        let j = rule.transfer_counts();
        let mut any_weight = false;
        for s in 0..=species.max_species() {
            let w = rule.weights[s];
            let push = |v: &mut Vec<Violation>, kind| {
                v.push(Violation {
                    trigger: rule.trigger,
                    species: Some(s),
                    kind,
                })
            };
            if !w.is_finite() || w < 0.0 {
                push(&mut violations, ViolationKind::BadWeight);
                continue;
            }
            if j.get(s, s) > 0 {
                push(&mut violations, ViolationKind::TrivialMutation);
            }
            if w == 0.0 {
                continue;
            }
            any_weight = true;
            if !species.contains(s) {
                push(&mut violations, ViolationKind::Closure { target: s });
                continue;
            }
            if let Some(&bad) = rule.targets[s].iter().find(|&&t| !species.contains(t)) {
                push(&mut violations, ViolationKind::Closure { target: bad });
            }
            let sum = j.row_sum(s);
            if sum as usize != rule.k {
                push(
                    &mut violations,
                    ViolationKind::RowSum {
                        got: sum,
                        expected: rule.k,
                    },
                );
            }
        }
        if !any_weight {
            violations.push(Violation {
                trigger: rule.trigger,
                species: None,
                kind: ViolationKind::EmptyPool,
            });
        }
    }
    ValidationReport { violations }
}
