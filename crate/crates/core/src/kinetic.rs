//! Kinetic limit of the particle system: per-species number densities
//! `f_σ(x, t)` transported at the species velocity and exchanged through
//! mutation fluxes.
//!
//! Each step is split into an exact shift along characteristics followed by
//! a source update. On an aligned grid (`Δx = u·dt` with every velocity an
//! integer multiple of `u`) the shift moves whole cells and is exact, so all
//! discretization error sits in the boundary traces and the source step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Group, ModelError, ModelPreset, EdgeDeletion, Trigger, GRAIN_SPEED};

/// Default blow-up threshold relative to the initial weighted population.
pub const DEFAULT_BLOWUP_REL: f64 = 1e-6;

/// Relative tolerance for treating a shift as a whole number of cells.
const CELL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid density: {0}")]
    InvalidField(String),
    #[error("blow-up at T*={time} for trigger {trigger}: selection weights vanish")]
    BlowUp { time: f64, trigger: Trigger },
    #[error("density of species {species} leaves the grid at t={time}; raise x_max")]
    GridOverflow { time: f64, species: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which evaluation of the mutation fluxes to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxPath {
    /// Transfer-count form valid for every preset.
    Generic,
    /// Closed-form side-count equations of grain presets.
    Topological,
    /// Generic fluxes, with the topological ones evaluated alongside and the
    /// largest disagreement reported.
    Both,
}

/// Densities on the uniform grid `x_g = g·Δx`, `g = 0..=G`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    pub dx: f64,
    pub t: f64,
    /// Node values indexed by species label; unused labels are empty.
    pub f: Vec<Vec<f64>>,
}

impl DensityField {
    /// Zero field covering `[0, x_max]`.
    pub fn zeros(preset: &ModelPreset, dx: f64, x_max: f64) -> Result<Self, SolverError> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(SolverError::InvalidConfig(format!("dx must be positive, got {dx}")));
        }
        if !(x_max > dx && x_max.is_finite()) {
            return Err(SolverError::InvalidConfig(format!(
                "x_max must exceed dx, got {x_max}"
            )));
        }
        let nodes = (x_max / dx).round() as usize + 1;
        let m = preset.max_species();
        let f = (0..=m)
            .map(|s| {
                if preset.species.contains(s) {
                    vec![0.0; nodes]
                } else {
                    Vec::new()
                }
            })
            .collect();
        Ok(Self { dx, t: 0.0, f })
    }

    /// Field built from piecewise shapes, each rescaled so its trapezoid
    /// mass is exactly the requested mass.
    pub fn from_specs(
        preset: &ModelPreset,
        specs: &[DensitySpec],
        dx: f64,
        x_max: f64,
    ) -> Result<Self, SolverError> {
        let mut field = Self::zeros(preset, dx, x_max)?;
        for spec in specs {
            field.add(preset, spec)?;
        }
        Ok(field)
    }

    fn add(&mut self, preset: &ModelPreset, spec: &DensitySpec) -> Result<(), SolverError> {
        let [a, b] = spec.support;
        if !preset.species.contains(spec.species) {
            return Err(SolverError::InvalidField(format!(
                "unknown species {}",
                spec.species
            )));
        }
        if !(a >= 0.0 && b > a && b <= self.x_max() + 0.5 * self.dx) {
            return Err(SolverError::InvalidField(format!(
                "support [{a}, {b}] must satisfy 0 <= a < b <= x_max"
            )));
        }
        if !(spec.mass >= 0.0 && spec.mass.is_finite()) {
            return Err(SolverError::InvalidField("mass must be nonnegative".into()));
        }
        let mut shape = vec![0.0; self.nodes()];
        let tol = 1e-9 * self.dx;
        for (g, v) in shape.iter_mut().enumerate() {
            let x = self.x(g);
            if x < a - tol || x > b + tol {
                continue;
            }
            *v = match spec.shape {
                // node g stands for the cell (x_{g-1}, x_g], so a block on
                // an aligned support integrates exactly to height × width
                // and no mass sits at zero size
                Shape::Uniform if x <= a + tol => 0.0,
                Shape::Uniform => 1.0,
                Shape::Triangle => {
                    let mid = 0.5 * (a + b);
                    (1.0 - (x - mid).abs() / (mid - a)).max(0.0)
                }
            };
        }
        let raw = trapezoid(&shape, self.dx);
        if raw <= 0.0 {
            if spec.mass == 0.0 {
                return Ok(());
            }
            return Err(SolverError::InvalidField(format!(
                "support [{a}, {b}] covers no grid mass; refine dx"
            )));
        }
        let scale = spec.mass / raw;
        for (dst, v) in self.f[spec.species].iter_mut().zip(shape) {
            *dst += scale * v;
        }
        Ok(())
    }

    pub fn nodes(&self) -> usize {
        self.f.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn x(&self, g: usize) -> f64 {
        g as f64 * self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.nodes().saturating_sub(1))
    }

    /// Largest node with positive density, as a position.
    pub fn support_end(&self) -> f64 {
        self.f
            .iter()
            .filter_map(|f| f.iter().rposition(|&v| v > 0.0))
            .max()
            .map_or(0.0, |g| self.x(g))
    }

    pub fn min_value(&self) -> f64 {
        self.f.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Uniform,
    /// Symmetric hat vanishing at both ends of the support.
    Triangle,
}

/// One component of an initial density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    pub species: usize,
    pub shape: Shape,
    pub support: [f64; 2],
    pub mass: f64,
}

/// Trapezoid rule on a uniform grid.
pub fn trapezoid(f: &[f64], dx: f64) -> f64 {
    match f.len() {
        0 | 1 => 0.0,
        n => dx * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1])),
    }
}

/// First moment `∫ x f dx` by the trapezoid rule.
pub fn first_moment(f: &[f64], dx: f64) -> f64 {
    match f.len() {
        0 | 1 => 0.0,
        n => {
            let s: f64 = f.iter().enumerate().map(|(g, v)| g as f64 * v).sum();
            dx * dx * (s - 0.5 * (n - 1) as f64 * f[n - 1])
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Totals {
    /// `F_σ`, indexed by label.
    pub per_species: Vec<f64>,
    /// `F = Σ F_σ`.
    pub total: f64,
}

pub fn compute_totals(field: &DensityField) -> Totals {
    totals_upto(field, field.nodes())
}

/// Totals over nodes `0..end`; equal to the full totals when every node
/// from `end - 1` on is zero.
fn totals_upto(field: &DensityField, end: usize) -> Totals {
    let per_species: Vec<f64> = field
        .f
        .iter()
        .map(|f| trapezoid(&f[..end.min(f.len())], field.dx))
        .collect();
    let total = per_species.iter().sum();
    Totals { per_species, total }
}

/// Total area `Σ_σ ∫ x f_σ dx`.
pub fn total_area(field: &DensityField) -> f64 {
    area_upto(field, field.nodes())
}

fn area_upto(field: &DensityField, end: usize) -> f64 {
    field
        .f
        .iter()
        .map(|f| first_moment(&f[..end.min(f.len())], field.dx))
        .sum()
}

/// Polyhedral defect `Σ_n (n - 6) F_n` of a grain field.
pub fn defect(totals: &Totals) -> f64 {
    totals
        .per_species
        .iter()
        .enumerate()
        .map(|(n, f)| (n as f64 - 6.0) * f)
        .sum()
}

/// Boundary rates `L̇_l = |v_l| f_l(0, t)` indexed by label; zero for
/// species that do not shrink.
pub fn boundary_flux(field: &DensityField, preset: &ModelPreset) -> Vec<f64> {
    let cfg = &preset.species;
    (0..field.f.len())
        .map(|l| {
            if cfg.contains(l) && cfg.group(l) == Group::Shrinking {
                -cfg.velocity(l) * field.f[l][0]
            } else {
                0.0
            }
        })
        .collect()
}

/// Blow-up thresholds `ε_T*` per trigger label (0 for interior).
#[derive(Clone, Debug, PartialEq)]
pub struct Thresholds(pub Vec<f64>);

impl Thresholds {
    /// `rel · Σ_n w_n F_n(0)` for each rule.
    pub fn from_initial(totals: &Totals, preset: &ModelPreset, rel: f64) -> Self {
        let mut eps = vec![0.0; preset.max_species() + 1];
        for rule in preset.rules() {
            eps[rule.trigger.label()] = rel * weighted_total(&rule.weights, totals);
        }
        Self(eps)
    }

    /// Only exact zeros count as blow-up.
    pub fn zero(preset: &ModelPreset) -> Self {
        Self(vec![0.0; preset.max_species() + 1])
    }

    fn get(&self, trigger: Trigger) -> f64 {
        self.0.get(trigger.label()).copied().unwrap_or(0.0)
    }
}

fn weighted_total(weights: &[f64], totals: &Totals) -> f64 {
    weights
        .iter()
        .zip(&totals.per_species)
        .map(|(w, f)| w * f)
        .sum()
}

/// Selection weights per trigger.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    /// `W^(l)_σ = w^(l)_σ / Σ_n w^(l)_n F_n`, indexed `[l][σ]`; empty when
    /// the trigger has no rule or is inactive with a vanishing denominator.
    pub boundary: Vec<Vec<f64>>,
    /// `γ = F / Σ_n w^(I)_n F_n` (zero without interior events).
    pub gamma: f64,
}

impl Weights {
    pub fn boundary_weight(&self, l: usize, s: usize) -> f64 {
        self.boundary
            .get(l)
            .and_then(|w| w.get(s))
            .copied()
            .unwrap_or(0.0)
    }
}

/// Weighted fractions. A trigger in use (`L̇_l > 0`, or `β > 0` for the
/// interior clock) whose denominator is at or below its threshold signals
/// blow-up at time `t`.
pub fn compute_weights(
    totals: &Totals,
    ldot: &[f64],
    beta: f64,
    preset: &ModelPreset,
    thresholds: &Thresholds,
    t: f64,
) -> Result<Weights, SolverError> {
    let mut boundary = vec![Vec::new(); preset.max_species() + 1];
    for rule in &preset.boundary_rules {
        let Trigger::Boundary(l) = rule.trigger else {
            continue;
        };
        let denom = weighted_total(&rule.weights, totals);
        let active = ldot.get(l).copied().unwrap_or(0.0) > 0.0;
        if denom <= thresholds.get(rule.trigger) || denom <= 0.0 {
            if active {
                return Err(SolverError::BlowUp {
                    time: t,
                    trigger: rule.trigger,
                });
            }
            continue;
        }
        boundary[l] = rule.weights.iter().map(|w| w / denom).collect();
    }
    let mut gamma = 0.0;
    if let Some(rule) = &preset.interior {
        let denom = weighted_total(&rule.weights, totals);
        if denom <= thresholds.get(Trigger::Interior) || denom <= 0.0 {
            if beta > 0.0 {
                return Err(SolverError::BlowUp {
                    time: t,
                    trigger: Trigger::Interior,
                });
            }
        } else {
            gamma = totals.total / denom;
        }
    }
    Ok(Weights { boundary, gamma })
}

/// Gain and loss densities `j⁺_σ`, `j⁻_σ`, indexed `[σ][g]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Fluxes {
    pub gain: Vec<Vec<f64>>,
    pub loss: Vec<Vec<f64>>,
}

impl Fluxes {
    /// Zero fluxes over the first `end` nodes of every species in use.
    fn zeros(field: &DensityField, end: usize) -> Self {
        let shape: Vec<Vec<f64>> = field
            .f
            .iter()
            .map(|f| vec![0.0; f.len().min(end)])
            .collect();
        Self {
            gain: shape.clone(),
            loss: shape,
        }
    }

    /// Largest `|Σ_σ j_σ|` at a node relative to the largest gain or loss at
    /// that node.
    pub fn identity_residual(&self) -> f64 {
        let nodes = self.gain.iter().map(Vec::len).max().unwrap_or(0);
        let mut sum = vec![0.0; nodes];
        let mut scale = vec![0.0_f64; nodes];
        for (gain, loss) in self.gain.iter().zip(&self.loss) {
            for (g, (a, b)) in gain.iter().zip(loss).enumerate() {
                sum[g] += a - b;
                scale[g] = scale[g].max(a.abs()).max(b.abs());
            }
        }
        sum.iter()
            .zip(&scale)
            .filter(|(_, &s)| s > 0.0)
            .map(|(d, s)| d.abs() / s)
            .fold(0.0, f64::max)
    }

    /// Largest pointwise difference to `other` relative to the largest flux.
    pub fn max_relative_difference(&self, other: &Fluxes) -> f64 {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        let pairs = self
            .gain
            .iter()
            .zip(&other.gain)
            .chain(self.loss.iter().zip(&other.loss));
        for (a, b) in pairs {
            for (x, y) in a.iter().zip(b) {
                diff = diff.max((x - y).abs());
                scale = scale.max(x.abs()).max(y.abs());
            }
        }
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }
}

/// Evaluates the mutation fluxes with the given rates and weights.
///
/// The topological path only exists for grain presets.
pub fn compute_flux(
    field: &DensityField,
    preset: &ModelPreset,
    ldot: &[f64],
    beta: f64,
    weights: &Weights,
    path: FluxPath,
) -> Result<Fluxes, SolverError> {
    flux_prefix(field, preset, ldot, beta, weights, path, field.nodes())
}

/// Fluxes over the nodes `0..end` only; beyond the support they vanish.
fn flux_prefix(
    field: &DensityField,
    preset: &ModelPreset,
    ldot: &[f64],
    beta: f64,
    weights: &Weights,
    path: FluxPath,
    end: usize,
) -> Result<Fluxes, SolverError> {
    match path {
        FluxPath::Generic | FluxPath::Both => {
            Ok(generic_flux(field, preset, ldot, beta, weights, end))
        }
        FluxPath::Topological => topological_flux(field, preset, beta, weights, end),
    }
}

fn generic_flux(
    field: &DensityField,
    preset: &ModelPreset,
    ldot: &[f64],
    beta: f64,
    weights: &Weights,
    end: usize,
) -> Fluxes {
    // fold every active rule into one loss rate per species and one
    // species-to-species gain matrix, then sweep the grid once per entry
    let size = field.f.len();
    let mut loss_rate = vec![0.0; size];
    let mut gain_rate = vec![vec![0.0; size]; size];
    let mut apply = |rule: &crate::model::MutationRule, coef_of: &dyn Fn(usize) -> f64| {
        let counts = rule.transfer_counts();
        for s in preset.species.species() {
            let coef = coef_of(s);
            if coef == 0.0 {
                continue;
            }
            loss_rate[s] += coef * rule.k as f64;
            for (sigma, &mult) in counts.row(s).iter().enumerate() {
                if mult != 0 {
                    gain_rate[s][sigma] += coef * mult as f64;
                }
            }
        }
    };
    for rule in &preset.boundary_rules {
        let l = rule.trigger.label();
        let r = ldot.get(l).copied().unwrap_or(0.0);
        if r > 0.0 {
            apply(rule, &|s| r * weights.boundary_weight(l, s));
        }
    }
    if beta > 0.0 {
        if let Some(rule) = &preset.interior {
            let g = beta * weights.gamma;
            apply(rule, &|s| g * rule.weight(s));
        }
    }
    let mut out = Fluxes::zeros(field, end);
    for s in preset.species.species() {
        let fs = &field.f[s][..end.min(field.f[s].len())];
        if loss_rate[s] != 0.0 {
            let c = loss_rate[s];
            for (loss, v) in out.loss[s].iter_mut().zip(fs) {
                *loss = c * v;
            }
        }
        for (sigma, &c) in gain_rate[s].iter().enumerate() {
            if c != 0.0 {
                for (gain, v) in out.gain[sigma].iter_mut().zip(fs) {
                    *gain += c * v;
                }
            }
        }
    }
    out
}

/// Side-count form of the grain fluxes, written term by term.
fn topological_flux(
    field: &DensityField,
    preset: &ModelPreset,
    beta: f64,
    weights: &Weights,
    end: usize,
) -> Result<Fluxes, SolverError> {
    if !preset.is_grain() {
        return Err(ModelError::NotGrainPreset(preset.name.clone()).into());
    }
    let m = preset.max_species();
    let c = GRAIN_SPEED;
    let nodes = field.nodes().min(end);
    let zero = vec![0.0; nodes];
    let f = |n: usize| -> &[f64] {
        if (2..=m).contains(&n) {
            &field.f[n]
        } else {
            &zero
        }
    };
    let trace = |l: usize| field.f[l][0];
    let w = |l: usize, n: usize| weights.boundary_weight(l, n);
    let wi = |n: usize| {
        preset
            .interior
            .as_ref()
            .and_then(|r| r.weights.get(n).copied())
            .unwrap_or(0.0)
    };
    let (b2, b3, b4, b5) = (trace(2), trace(3), trace(4), trace(5));
    let bg = if beta > 0.0 { beta * weights.gamma } else { 0.0 };
    let mut out = Fluxes::zeros(field, nodes);
    for n in 2..=m {
        let up1 = n + 1;
        let up2 = n + 2;
        let down1 = n - 1;
        let a2 = 8.0 * c * b2 * w(2, up2);
        let a3 = 9.0 * c * b3 * w(3, up1);
        let a4 = 4.0 * c * b4 * w(4, up1);
        let a5 = 2.0 * c * b5 * w(5, up1);
        let a5d = c * b5 * w(5, down1);
        let ed = 2.0 * bg * wi(down1);
        let eu = 2.0 * bg * wi(up1);
        let lose = c * (8.0 * b2 * w(2, n) + 9.0 * b3 * w(3, n) + 4.0 * b4 * w(4, n) + 3.0 * b5 * w(5, n))
            + 4.0 * bg * wi(n);
        let (f_up2, f_up1, f_down1, f_n) = (f(up2), f(up1), f(down1), f(n));
        let gain = &mut out.gain[n];
        for g in 0..nodes {
            gain[g] = a2 * f_up2[g]
                + (a3 + a4 + a5) * f_up1[g]
                + a5d * f_down1[g]
                + ed * f_down1[g]
                + eu * f_up1[g];
        }
        for (loss, v) in out.loss[n].iter_mut().zip(&f_n[..nodes]) {
            *loss = lose * v;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dx: f64,
    pub dt: f64,
    pub x_max: f64,
    pub t_end: f64,
    /// `ε_T*` relative to the initial weighted population of each trigger.
    #[serde(default = "default_blowup_rel")]
    pub blowup_rel: f64,
    #[serde(default = "default_flux_path")]
    pub flux_path: FluxPath,
    /// Record a trajectory point every this many steps.
    #[serde(default = "default_one")]
    pub trajectory_every: usize,
    /// Keep a copy of the densities every this many steps.
    #[serde(default)]
    pub density_every: Option<usize>,
}

fn default_blowup_rel() -> f64 {
    DEFAULT_BLOWUP_REL
}

fn default_flux_path() -> FluxPath {
    FluxPath::Generic
}

fn default_one() -> usize {
    1
}

/// Grid unit `u` for which every velocity is an integer multiple: `π/3` for
/// grain presets, otherwise the smallest nonzero speed.
pub fn grid_speed(preset: &ModelPreset) -> f64 {
    if preset.is_grain() {
        return GRAIN_SPEED;
    }
    preset
        .species
        .species()
        .map(|s| preset.species.velocity(s).abs())
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min)
        .min(f64::MAX)
}

impl SolverConfig {
    /// Aligned configuration with `Δx = u·dt`.
    pub fn aligned(preset: &ModelPreset, dt: f64, x_max: f64, t_end: f64) -> Self {
        Self {
            dx: grid_speed(preset) * dt,
            dt,
            x_max,
            t_end,
            blowup_rel: DEFAULT_BLOWUP_REL,
            flux_path: FluxPath::Generic,
            trajectory_every: 1,
            density_every: None,
        }
    }

    fn check(&self) -> Result<(), SolverError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SolverError::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        positive("dx", self.dx)?;
        positive("dt", self.dt)?;
        positive("x_max", self.x_max)?;
        positive("t_end", self.t_end)?;
        positive("blowup_rel", self.blowup_rel)?;
        if self.trajectory_every == 0 || self.density_every == Some(0) {
            return Err(SolverError::InvalidConfig("record intervals must be positive".into()));
        }
        Ok(())
    }
}

/// Interior rate `β` at the current state: constant for PD; for RD
/// `α β_RD F / A`, the continuum analog of the simulator's `α β_RD N / A`.
pub fn interior_beta(preset: &ModelPreset, totals: &Totals, area: f64) -> f64 {
    match preset.edge_deletion {
        EdgeDeletion::None => 0.0,
        EdgeDeletion::Population { beta } => beta,
        EdgeDeletion::Removal { alpha, beta } => {
            if area > 0.0 {
                alpha * beta * totals.total / area
            } else {
                0.0
            }
        }
    }
}

/// Running state between steps.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    /// Cumulative boundary losses `L_l`, indexed by label.
    pub losses: Vec<f64>,
    pub thresholds: Thresholds,
    /// Nodes past this index hold no density.
    active: usize,
}

impl SolverState {
    /// Smallest density value, scanning only the possibly occupied nodes.
    fn min_density(&self, field: &DensityField) -> f64 {
        let tail = if self.active < field.nodes() { 0.0 } else { f64::INFINITY };
        field
            .f
            .iter()
            .flat_map(|f| &f[..self.active.min(f.len())])
            .copied()
            .fold(tail, f64::min)
    }

    pub fn new(field: &DensityField, preset: &ModelPreset, blowup_rel: f64) -> Self {
        Self {
            losses: vec![0.0; preset.max_species() + 1],
            thresholds: Thresholds::from_initial(&compute_totals(field), preset, blowup_rel),
            active: field
                .f
                .iter()
                .filter_map(|f| f.iter().rposition(|&v| v != 0.0))
                .max()
                .map_or(1, |g| g + 2),
        }
    }
}

/// Diagnostics of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    pub ldot: Vec<f64>,
    pub beta: f64,
    /// Source-step damping factor; 1 unless the mutation rates exceed `1/dt`.
    pub theta: f64,
    pub flux_residual: f64,
    pub path_difference: Option<f64>,
}

/// Shifts `f` by `cells` whole cells (positive to the right). Mass pushed
/// past the right end is an overflow; mass pushed past the origin leaves.
fn shift_cells(f: &mut [f64], cells: isize) -> bool {
    let n = f.len() as isize;
    if cells > 0 {
        let c = cells.min(n) as usize;
        if f[f.len() - c..].iter().any(|&v| v > 0.0) {
            return false;
        }
        f.copy_within(..f.len() - c, c);
        f[..c].fill(0.0);
    } else if cells < 0 {
        let c = (-cells).min(n) as usize;
        f.copy_within(c.., 0);
        let len = f.len();
        f[len - c..].fill(0.0);
    }
    true
}

/// Shifts by `d` cells: whole-cell moves when `d` is an integer, otherwise
/// the convex combination of the two neighbouring whole-cell moves, which
/// keeps interior mass exact at the cost of numerical diffusion.
fn shift(f: &mut [f64], d: f64) -> bool {
    let r = d.round();
    if (d - r).abs() <= CELL_TOL * r.abs().max(1.0) {
        return shift_cells(f, r as isize);
    }
    let lo = d.floor();
    let frac = d - lo;
    let mut a = f.to_vec();
    let mut b = f.to_vec();
    if !shift_cells(&mut a, lo as isize) || !shift_cells(&mut b, lo as isize + 1) {
        return false;
    }
    for ((dst, x), y) in f.iter_mut().zip(a).zip(b) {
        *dst = (1.0 - frac) * x + frac * y;
    }
    true
}

/// One split step: exact transport, boundary traces, then a conservative
/// source update damped so no density turns negative.
pub fn step(
    field: &mut DensityField,
    preset: &ModelPreset,
    config: &SolverConfig,
    state: &mut SolverState,
) -> Result<StepInfo, SolverError> {
    let dt = config.dt;
    // only the nodes that can hold density after this step are touched
    let reach = preset
        .species
        .species()
        .map(|s| preset.species.velocity(s) * dt / field.dx)
        .fold(0.0, f64::max);
    let end = (state.active + (reach - CELL_TOL).ceil().max(0.0) as usize).min(field.nodes());
    state.active = end;
    for s in preset.species.species() {
        let v = preset.species.velocity(s);
        let f = &mut field.f[s];
        let len = f.len().min(end);
        if v != 0.0 && !shift(&mut f[..len], v * dt / field.dx) {
            return Err(SolverError::GridOverflow {
                time: field.t,
                species: s,
            });
        }
    }
    field.t += dt;

    let ldot = boundary_flux(field, preset);
    for (acc, r) in state.losses.iter_mut().zip(&ldot) {
        *acc += dt * r;
    }
    let totals = totals_upto(field, end);
    let area = match preset.edge_deletion {
        EdgeDeletion::Removal { .. } => area_upto(field, end),
        _ => 0.0,
    };
    let beta = interior_beta(preset, &totals, area);
    let weights = compute_weights(&totals, &ldot, beta, preset, &state.thresholds, field.t)?;
    let path = match config.flux_path {
        FluxPath::Topological => FluxPath::Topological,
        _ => FluxPath::Generic,
    };
    let fluxes = flux_prefix(field, preset, &ldot, beta, &weights, path, end)?;
    let path_difference = if config.flux_path == FluxPath::Both {
        let other = flux_prefix(field, preset, &ldot, beta, &weights, FluxPath::Topological, end)?;
        Some(fluxes.max_relative_difference(&other))
    } else {
        None
    };

    // per-capita loss rate, independent of position
    let mut alpha = vec![0.0; field.f.len()];
    for rule in &preset.boundary_rules {
        let l = rule.trigger.label();
        if ldot[l] > 0.0 {
            for s in preset.species.species() {
                alpha[s] += ldot[l] * rule.k as f64 * weights.boundary_weight(l, s);
            }
        }
    }
    if beta > 0.0 {
        if let Some(rule) = &preset.interior {
            for s in preset.species.species() {
                alpha[s] += beta * rule.k as f64 * weights.gamma * rule.weight(s);
            }
        }
    }
    let max_alpha = alpha.iter().copied().fold(0.0, f64::max);
    let theta = if max_alpha * dt > 1.0 { 1.0 / (max_alpha * dt) } else { 1.0 };
    let h = theta * dt;
    for s in preset.species.species() {
        let keep = (1.0 - h * alpha[s]).max(0.0);
        for (v, gain) in field.f[s].iter_mut().zip(&fluxes.gain[s]) {
            *v = (*v * keep + h * gain).max(0.0);
        }
    }
    Ok(StepInfo {
        ldot,
        beta,
        theta,
        flux_residual: fluxes.identity_residual(),
        path_difference,
    })
}

/// Solution state at one recorded time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    /// `F_σ`, indexed by label.
    pub totals: Vec<f64>,
    pub total: f64,
    pub area: f64,
    /// Polyhedral defect (grain presets only).
    pub defect: Option<f64>,
    /// Cumulative boundary losses `L_l`, indexed by label.
    pub losses: Vec<f64>,
}

impl TrajectoryPoint {
    fn capture(field: &DensityField, preset: &ModelPreset, losses: &[f64]) -> Self {
        let totals = compute_totals(field);
        Self {
            t: field.t,
            defect: preset.is_grain().then(|| defect(&totals)),
            total: totals.total,
            totals: totals.per_species,
            area: total_area(field),
            losses: losses.to_vec(),
        }
    }

    /// `F(t) + Σ_l L_l(t)`.
    pub fn number_with_losses(&self) -> f64 {
        self.total + self.losses.iter().sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowUp {
    pub time: f64,
    pub trigger: Trigger,
}

/// Worst-case drift of the conserved quantities over the run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub initial_number: f64,
    /// `max_t |F(t) + Σ L_l(t) - F(0)|`.
    pub max_number_error: f64,
    pub initial_area: f64,
    pub max_area_drift: f64,
    /// `Σ_n |n - 6| F_n(0)`, the scale for the defect drift.
    pub defect_scale: f64,
    pub max_defect_drift: f64,
    pub max_flux_residual: f64,
    pub max_path_difference: Option<f64>,
    pub min_density: f64,
    pub min_theta: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub trajectory: Vec<TrajectoryPoint>,
    pub densities: Vec<DensityField>,
    pub final_field: DensityField,
    pub blow_up: Option<BlowUp>,
    pub report: ConservationReport,
    /// Set for removal-driven edge deletion, whose rate depends on time.
    pub experimental: bool,
    pub steps: usize,
}

/// Integrates to `t_end` or blow-up, whichever comes first.
pub fn solve(
    field0: &DensityField,
    preset: &ModelPreset,
    config: &SolverConfig,
) -> Result<Solution, SolverError> {
    config.check()?;
    if (field0.dx - config.dx).abs() > 1e-12 * config.dx {
        return Err(SolverError::InvalidConfig(format!(
            "field spacing {} differs from configured dx {}",
            field0.dx, config.dx
        )));
    }
    if field0.min_value() < 0.0 {
        return Err(SolverError::InvalidField("densities must be nonnegative".into()));
    }
    for s in preset.species.species() {
        if preset.species.group(s) != Group::Shrinking && field0.f[s][0] != 0.0 {
            return Err(SolverError::InvalidField(format!(
                "species {s} must vanish at the origin"
            )));
        }
    }
    let mut field = field0.clone();
    let mut state = SolverState::new(&field, preset, config.blowup_rel);
    let first = TrajectoryPoint::capture(&field, preset, &state.losses);
    let totals0 = compute_totals(&field);
    let mut report = ConservationReport {
        initial_number: first.total,
        initial_area: first.area,
        defect_scale: totals0
            .per_species
            .iter()
            .enumerate()
            .map(|(n, f)| (n as f64 - 6.0).abs() * f)
            .sum(),
        min_density: field.min_value(),
        min_theta: 1.0,
        ..Default::default()
    };
    let d0 = first.defect;
    let mut trajectory = vec![first];
    let mut densities = Vec::new();
    if config.density_every.is_some() {
        densities.push(field.clone());
    }
    let steps_total = (config.t_end / config.dt - 1e-9).ceil().max(0.0) as usize;
    let mut blow_up = None;
    let mut steps = 0;
    for k in 1..=steps_total {
        let info = match step(&mut field, preset, config, &mut state) {
            Ok(info) => info,
            Err(SolverError::BlowUp { time, trigger }) => {
                blow_up = Some(BlowUp { time, trigger });
                break;
            }
            Err(e) => return Err(e),
        };
        steps = k;
        report.max_flux_residual = report.max_flux_residual.max(info.flux_residual);
        report.min_theta = report.min_theta.min(info.theta);
        if let Some(d) = info.path_difference {
            let prev = report.max_path_difference.unwrap_or(0.0);
            report.max_path_difference = Some(prev.max(d));
        }
        report.min_density = report.min_density.min(state.min_density(&field));
        let record = k % config.trajectory_every == 0 || k == steps_total;
        if record {
            let point = TrajectoryPoint::capture(&field, preset, &state.losses);
            report.max_number_error = report
                .max_number_error
                .max((point.number_with_losses() - report.initial_number).abs());
            report.max_area_drift = report
                .max_area_drift
                .max((point.area - report.initial_area).abs());
            if let (Some(d), Some(d0)) = (point.defect, d0) {
                report.max_defect_drift = report.max_defect_drift.max((d - d0).abs());
            }
            trajectory.push(point);
        }
        if config.density_every.is_some_and(|e| k % e == 0) {
            densities.push(field.clone());
        }
    }
    Ok(Solution {
        trajectory,
        densities,
        final_field: field,
        blow_up,
        report,
        experimental: matches!(preset.edge_deletion, EdgeDeletion::Removal { .. }),
        steps,
    })
}

/// Initial density of the two-species model: `1/2` uniform on `[0, 1]` for
/// species 1 and on `[2, 3]` for species 2.
pub fn two_species_initial() -> Vec<DensitySpec> {
    vec![
        DensitySpec {
            species: 1,
            shape: Shape::Uniform,
            support: [0.0, 1.0],
            mass: 0.5,
        },
        DensitySpec {
            species: 2,
            shape: Shape::Uniform,
            support: [2.0, 3.0],
            mass: 0.5,
        },
    ]
}

/// Closed-form totals of the two-species model from [`two_species_initial`]
/// for `t < 2`: `(F_1, F_2)`.
pub fn two_species_oracle(t: f64) -> (f64, f64) {
    let f2 = (0.5 - 0.5 * t).max(0.0);
    (1.0 - f2 - 0.5 * t.min(1.0), f2)
}

/// Blow-up time of the two-species model from [`two_species_initial`]:
/// species 2 runs out at `t = 1`, when the last original species-1 mass
/// leaves, and the first mutated mass, born at `x = 2`, reaches the origin
/// one unit of time later.
pub const TWO_SPECIES_T_STAR: f64 = 2.0;

/// Zero-defect grain initial density: hats on `[0, 2 support]` for every
/// side count, with masses chosen so `Σ (n - 6) F_n = 0`.
pub fn grain_initial(preset: &ModelPreset, support: f64) -> Result<Vec<DensitySpec>, SolverError> {
    if !preset.is_grain() {
        return Err(ModelError::NotGrainPreset(preset.name.clone()).into());
    }
    let m = preset.max_species();
    let mut masses: Vec<f64> = (0..=m)
        .map(|n| {
            if n < 2 {
                0.0
            } else {
                (-(n as f64 - 6.0).powi(2) / 4.0).exp()
            }
        })
        .collect();
    // balance the defect by scaling the many-sided tail
    let minus: f64 = (2..6).map(|n| (6.0 - n as f64) * masses[n]).sum();
    let plus: f64 = (7..=m).map(|n| (n as f64 - 6.0) * masses[n]).sum();
    for mass in masses.iter_mut().skip(7) {
        *mass *= minus / plus;
    }
    let total: f64 = masses.iter().sum();
    Ok((2..=m)
        .map(|n| DensitySpec {
            species: n,
            shape: Shape::Triangle,
            support: [0.0, support * (n as f64 - 1.0) / 5.0],
            mass: masses[n] / total,
        })
        .collect())
}
