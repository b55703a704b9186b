//! Piecewise-deterministic multi-species particle model of 2D grain
//! coarsening: the finite event-driven simulator, its kinetic PDE limit,
//! topological consistency checks and parameter fitting from grain tracks.

pub mod compare;
pub mod fitting;
pub mod io;
pub mod kinetic;
pub mod model;
pub mod sim;
pub mod stats;
pub mod topology;
pub mod track;

pub use model::{
    build_grain_preset, builtin_preset, two_species_counter, validate_preset, EdgeDeletion, ModelError,
    ModelPreset, MutationRule, PresetSpec, SpeciesConfig, Trigger, WeightMode,
};
