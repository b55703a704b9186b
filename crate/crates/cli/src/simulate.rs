//! `simulate` and `gen-data`: event-driven runs of the particle system.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use grain_pdmp::io::{write_events, GraintrackWriter};
use grain_pdmp::model::PresetSpec;
use grain_pdmp::sim::{
    run_with, sample_grain_population, sample_two_species, FnSink, ParticleSystem, SimConfig,
    Snapshot, Termination,
};
use grain_pdmp::ModelPreset;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::common::{
    apply_config, output_dir, usage, write_json, ManifestBuilder, ModelFailure, PresetArgs,
};

#[derive(clap::Args, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: PresetArgs,
    /// Initial number of particles.
    #[arg(long, default_value_t = 10_000)]
    pub n0: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    /// Snapshot spacing [default: t-end / 100].
    #[arg(long)]
    pub snapshot_dt: Option<f64>,
    /// Stop once at most this fraction of the initial particles remains.
    #[arg(long)]
    pub stop_fraction: Option<f64>,
    /// Mean initial grain area.
    #[arg(long, default_value_t = 1.0)]
    pub mean_area: f64,
    /// Bins of the per-species size histograms (0 disables them).
    #[arg(long, default_value_t = 100)]
    pub histogram_bins: usize,
    /// Also write per-grain records to graintrack.csv.
    #[arg(long)]
    pub graintrack: bool,
    /// Do not write events.csv.
    #[arg(long)]
    pub no_events: bool,
    /// Independent replicas with seeds seed, seed+1, …, run concurrently.
    #[arg(long, default_value_t = 1)]
    pub ensemble: usize,
    /// Output directory [default: $GRAINPDMP_OUT_ROOT/simulate].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file whose keys override the flags above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(clap::Args, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GenDataArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: PresetArgs,
    #[arg(long, default_value_t = 100_000)]
    pub n0: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    /// Number of recorded intervals; steps are `t-end / steps` apart.
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long)]
    pub stop_fraction: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub mean_area: f64,
    /// Output directory [default: $GRAINPDMP_OUT_ROOT/gen-data].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file whose keys override the flags above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Per-replica result, also the line format of `aggregate.json`.
#[derive(Clone, Debug, Serialize)]
struct ReplicaSummary {
    seed: u64,
    dir: String,
    termination: Termination,
    final_time: f64,
    final_count: usize,
    boundary_events: u64,
    interior_events: u64,
    counts: Vec<usize>,
}

#[derive(Serialize)]
struct SnapshotFile<'a> {
    preset: &'a str,
    seed: u64,
    n0: usize,
    termination: Termination,
    snapshots: &'a [Snapshot],
}

struct ReplicaPlan<'a> {
    preset: &'a Arc<ModelPreset>,
    n0: usize,
    mean_area: f64,
    config: SimConfig,
    graintrack: bool,
    events: bool,
}

/// Initial sizes drawn from `seed`: the grain sampler for grain presets, the
/// closed-form initial data for the two-species model.
fn initial_sample(preset: &ModelPreset, n0: usize, mean_area: f64, seed: u64) -> Result<Vec<(usize, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if preset.is_grain() {
        Ok(sample_grain_population(n0, preset.max_species(), mean_area, &mut rng))
    } else if preset.name == "two-species-counter" {
        Ok(sample_two_species(n0, &mut rng))
    } else {
        Err(usage(format!("no initial sampler for preset {}", preset.name)))
    }
}

fn run_replica(plan: &ReplicaPlan<'_>, dir: &Path) -> Result<ReplicaSummary> {
    let seed = plan.config.seed;
    let sample = initial_sample(plan.preset, plan.n0, plan.mean_area, seed)?;
    let system = ParticleSystem::new(plan.preset.clone(), &sample, plan.preset.is_grain(), seed)?;

    let mut writer = if plan.graintrack {
        Some(GraintrackWriter::create(dir.join("graintrack.csv"))?)
    } else {
        None
    };
    let mut snapshots = Vec::new();
    let mut write_error = None;
    let mut step = 0;
    let mut sink = FnSink(|mut snap: Snapshot| {
        if let (Some(w), Some(grains)) = (writer.as_mut(), snap.grains.take()) {
            if write_error.is_none() {
                write_error = w.write_grains(step, snap.time, &grains).err();
            }
        }
        step += 1;
        snapshots.push(snap);
    });
    let summary = run_with(&plan.config, system, &mut sink)?;
    if let Some(e) = write_error {
        return Err(e).context("writing graintrack.csv");
    }
    if let Some(w) = writer {
        w.finish()?;
    }
    write_json(
        &dir.join("snapshots.json"),
        &SnapshotFile {
            preset: &plan.preset.name,
            seed,
            n0: plan.n0,
            termination: summary.termination,
            snapshots: &snapshots,
        },
    )?;
    if plan.events {
        let file = File::create(dir.join("events.csv"))?;
        write_events(&summary.events, BufWriter::new(file))?;
    }
    Ok(ReplicaSummary {
        seed,
        dir: dir.display().to_string(),
        termination: summary.termination,
        final_time: summary.system.time(),
        final_count: summary.system.count(),
        boundary_events: summary.system.boundary_events(),
        interior_events: summary.system.interior_events(),
        counts: snapshots.iter().map(|s| s.count).collect(),
    })
}

fn model_failure(replicas: &[ReplicaSummary]) -> Option<ModelFailure> {
    replicas.iter().find_map(|r| match r.termination {
        Termination::SelectionExhausted { time, trigger } => Some(ModelFailure {
            time,
            message: format!(
                "selection exhausted for trigger {trigger} (seed {}, finite-N blow-up)",
                r.seed
            ),
        }),
        _ => None,
    })
}

fn check_common(n0: usize, t_end: f64, mean_area: f64) -> Result<()> {
    if n0 == 0 {
        return Err(usage("--n0 must be positive"));
    }
    if !(t_end > 0.0) {
        return Err(usage("--t-end must be positive"));
    }
    if !(mean_area > 0.0) {
        return Err(usage("--mean-area must be positive"));
    }
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let args = apply_config(args.clone(), args.config.as_deref())?;
    check_common(args.n0, args.t_end, args.mean_area)?;
    if args.ensemble == 0 {
        return Err(usage("--ensemble must be at least 1"));
    }
    let preset = Arc::new(args.model.load()?);
    let out = output_dir(args.out.as_deref(), "simulate")?;
    let mut manifest = ManifestBuilder::new("simulate", &args, Some(args.seed))?;
    if let Some(path) = &args.model.weights {
        manifest.input(path);
    }

    let snapshot_dt = args.snapshot_dt.unwrap_or(args.t_end / 100.0);
    let plan_for = |seed: u64| {
        let mut config = SimConfig::new(args.t_end, seed, snapshot_dt);
        config.record_events = !args.no_events;
        config.histogram_bins = (args.histogram_bins > 0).then_some(args.histogram_bins);
        config.track_grains = args.graintrack;
        config.stop_fraction = args.stop_fraction;
        ReplicaPlan {
            preset: &preset,
            n0: args.n0,
            mean_area: args.mean_area,
            config,
            graintrack: args.graintrack,
            events: !args.no_events,
        }
    };

    let replicas: Vec<ReplicaSummary> = if args.ensemble == 1 {
        vec![run_replica(&plan_for(args.seed), &out)?]
    } else {
        (0..args.ensemble)
            .into_par_iter()
            .map(|i| {
                let dir = out.join(format!("replica-{i:03}"));
                std::fs::create_dir_all(&dir)?;
                run_replica(&plan_for(args.seed.wrapping_add(i as u64)), &dir)
            })
            .collect::<Result<_>>()?
    };
    for r in &replicas {
        let dir = Path::new(&r.dir);
        manifest.output(&dir.join("snapshots.json"));
        if !args.no_events {
            manifest.output(&dir.join("events.csv"));
        }
        if args.graintrack {
            manifest.output(&dir.join("graintrack.csv"));
        }
    }
    if args.ensemble > 1 {
        write_json(&out.join("aggregate.json"), &aggregate(&replicas))?;
        manifest.output(&out.join("aggregate.json"));
    }
    for r in &replicas {
        emit!(
            "seed {}: t={} remaining {} of {} ({:?})",
            r.seed, r.final_time, r.final_count, args.n0, r.termination
        );
    }
    let failure = model_failure(&replicas);
    if let Some(f) = &failure {
        manifest.status(f.to_string());
    }
    manifest.write(&out)?;
    match failure {
        Some(f) => Err(f.into()),
        None => Ok(()),
    }
}

/// Replica summaries plus the mean particle count per snapshot index.
fn aggregate(replicas: &[ReplicaSummary]) -> serde_json::Value {
    let longest = replicas.iter().map(|r| r.counts.len()).max().unwrap_or(0);
    let mean_counts: Vec<f64> = (0..longest)
        .map(|k| {
            let present: Vec<f64> = replicas
                .iter()
                .filter_map(|r| r.counts.get(k).map(|&c| c as f64))
                .collect();
            present.iter().sum::<f64>() / present.len() as f64
        })
        .collect();
    serde_json::json!({
        "replicas": replicas,
        "mean_counts": mean_counts,
    })
}

/// Synthetic grain-track dataset with known edge-deletion parameters.
pub fn gen_data(args: GenDataArgs) -> Result<()> {
    let args = apply_config(args.clone(), args.config.as_deref())?;
    check_common(args.n0, args.t_end, args.mean_area)?;
    if args.steps == 0 {
        return Err(usage("--steps must be positive"));
    }
    let preset = Arc::new(args.model.load()?);
    if !preset.is_grain() {
        return Err(usage("gen-data needs a grain preset"));
    }
    let out = output_dir(args.out.as_deref(), "gen-data")?;
    let mut manifest = ManifestBuilder::new("gen-data", &args, Some(args.seed))?;
    let mut config = SimConfig::new(args.t_end, args.seed, args.t_end / args.steps as f64);
    config.record_events = false;
    config.track_grains = true;
    config.stop_fraction = args.stop_fraction;
    let plan = ReplicaPlan {
        preset: &preset,
        n0: args.n0,
        mean_area: args.mean_area,
        config,
        graintrack: true,
        events: false,
    };
    let summary = run_replica(&plan, &out)?;
    let spec: PresetSpec = preset.to_spec()?;
    write_json(
        &out.join("truth.json"),
        &serde_json::json!({
            "preset": spec,
            "seed": args.seed,
            "n0": args.n0,
            "boundary_events": summary.boundary_events,
            "interior_events": summary.interior_events,
            "termination": summary.termination,
        }),
    )?;
    for name in ["graintrack.csv", "snapshots.json", "truth.json"] {
        manifest.output(&out.join(name));
    }
    emit!(
        "{} steps, {} grains remaining, {} edge deletions",
        summary.counts.len(),
        summary.final_count,
        summary.interior_events
    );
    let failure = model_failure(std::slice::from_ref(&summary));
    if let Some(f) = &failure {
        manifest.status(f.to_string());
    }
    manifest.write(&out)?;
    match failure {
        Some(f) => Err(f.into()),
        None => Ok(()),
    }
}
