//! `fit` (edge-deletion parameters from a grain track) and `gen-weights`
//! (correlated weight tables from measured distributions).

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use grain_pdmp::fitting::{correlated_residual, correlated_table, fit_all, TrackSummarizer};
use grain_pdmp::io::{read_vector, GraintrackReader};
use grain_pdmp::model::DEFAULT_MAX_SIDES;
use grain_pdmp::{build_grain_preset, WeightMode};
use serde::{Deserialize, Serialize};

use crate::common::{
    apply_config, edge_deletion, output_dir, usage, write_json, EdgeMode, ManifestBuilder,
};

#[derive(clap::Args, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FitArgs {
    /// Grain-track CSV (`step,time,grain_id,sides,area`).
    #[arg(long)]
    pub graintrack: PathBuf,
    /// Fraction of the intervals skipped before fitting edge-deletion rates.
    #[arg(long, default_value_t = 0.0)]
    pub burn_in: f64,
    /// Output directory for fit.json [default: $GRAINPDMP_OUT_ROOT/fit].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file whose keys override the flags above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn fit(args: FitArgs) -> Result<()> {
    let args = apply_config(args.clone(), args.config.as_deref())?;
    if !(0.0..1.0).contains(&args.burn_in) {
        return Err(usage("--burn-in must lie in [0, 1)"));
    }
    let reader = GraintrackReader::open(&args.graintrack)
        .map_err(|e| usage(format!("{}: {e}", args.graintrack.display())))?;
    let mut summarizer = TrackSummarizer::new();
    for step in reader {
        let step = step.map_err(|e| usage(format!("{}: {e}", args.graintrack.display())))?;
        summarizer.push(&step);
    }
    let summary = summarizer.finish();
    if summary.len() < 2 {
        return Err(usage(format!(
            "{}: need at least two steps, found {}",
            args.graintrack.display(),
            summary.len()
        )));
    }
    let result = fit_all(&summary, args.burn_in);

    let out = output_dir(args.out.as_deref(), "fit")?;
    let mut manifest = ManifestBuilder::new("fit", &args, None)?;
    manifest.input(&args.graintrack);
    let path = out.join("fit.json");
    write_json(&path, &result)?;
    manifest.output(&path);
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6}"));
    emit!(
        "alpha={} r={} beta_pd={} beta_rd={} ({} steps)",
        show(result.alpha),
        show(result.pearson_r),
        show(result.beta_pd),
        show(result.beta_rd),
        summary.len()
    );
    for note in &result.notes {
        eprintln!("note: {note}");
    }
    manifest.write(&out)
}

#[derive(clap::Args, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GenWeightsArgs {
    /// Topology frequencies p_k, k = 1..=M, one per line (or `k,value`).
    #[arg(long)]
    pub p: PathBuf,
    /// Neighbour distribution of a trigger, as `LABEL=FILE` with LABEL one of
    /// 0 (interior), 2, 3, 4, 5. A bare FILE is used for every trigger.
    #[arg(long = "c", required = true)]
    pub c: Vec<String>,
    /// Reuse another trigger's distribution, as `LABEL=SOURCE`.
    #[arg(long)]
    pub donor: Vec<String>,
    /// Largest side count of the preset written alongside the table.
    #[arg(long = "max-sides", default_value_t = DEFAULT_MAX_SIDES)]
    pub m: usize,
    #[arg(long, value_enum, default_value_t = EdgeMode::Nd)]
    pub edge_deletion: EdgeMode,
    /// Coarsening-rate factor of a removal-driven preset.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Edge-deletion rate of a PD or RD preset.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Output directory [default: $GRAINPDMP_OUT_ROOT/gen-weights].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file whose keys override the flags above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

const TRIGGER_KEYS: [&str; 5] = ["0", "2", "3", "4", "5"];

fn split_pair(raw: &str, flag: &str) -> Result<(String, String)> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| usage(format!("{flag} expects LABEL=VALUE, got `{raw}`")))
}

fn check_key(key: &str, flag: &str) -> Result<()> {
    if TRIGGER_KEYS.contains(&key) {
        Ok(())
    } else {
        Err(usage(format!(
            "{flag}: unknown trigger `{key}`; use one of {}",
            TRIGGER_KEYS.join(", ")
        )))
    }
}

pub fn gen_weights(args: GenWeightsArgs) -> Result<()> {
    let args = apply_config(args.clone(), args.config.as_deref())?;
    let read = |path: &PathBuf| read_vector(path).map_err(|e| usage(format!("{}: {e}", path.display())));
    let p = read(&args.p)?;
    let mut inputs = vec![args.p.clone()];
    let mut c = BTreeMap::new();
    for raw in &args.c {
        let (keys, path) = match raw.split_once('=') {
            Some(_) => {
                let (k, v) = split_pair(raw, "--c")?;
                check_key(&k, "--c")?;
                (vec![k], PathBuf::from(v))
            }
            None => (TRIGGER_KEYS.map(String::from).to_vec(), PathBuf::from(raw)),
        };
        let row = read(&path)?;
        if row.len() != p.len() {
            return Err(usage(format!(
                "{}: {} entries, but the frequencies have {}",
                path.display(),
                row.len(),
                p.len()
            )));
        }
        for k in keys {
            c.insert(k, row.clone());
        }
        inputs.push(path);
    }
    let mut donors = BTreeMap::new();
    for raw in &args.donor {
        let (k, v) = split_pair(raw, "--donor")?;
        check_key(&k, "--donor")?;
        check_key(&v, "--donor")?;
        donors.insert(k, v);
    }
    let table = correlated_table(&p, &c, &donors).map_err(|e| usage(e.to_string()))?;
    let residuals: BTreeMap<&String, f64> = table
        .iter()
        .map(|(k, w)| {
            let source = donors.get(k).unwrap_or(k);
            (k, correlated_residual(&p, &c[source], w))
        })
        .collect();

    let edge = edge_deletion(args.edge_deletion, args.alpha, args.beta)?;
    let preset = build_grain_preset(args.m, WeightMode::Correlated(table.clone()), edge)
        .map_err(|e| usage(e.to_string()))?;
    let spec = preset.to_spec()?;

    let out = output_dir(args.out.as_deref(), "gen-weights")?;
    let mut manifest = ManifestBuilder::new("gen-weights", &args, None)?;
    for path in &inputs {
        manifest.input(path);
    }
    let weights_path = out.join("weights.json");
    write_json(&weights_path, &table)?;
    manifest.output(&weights_path);
    let preset_path = out.join("preset.json");
    write_json(&preset_path, &spec)?;
    manifest.output(&preset_path);
    let residual_path = out.join("residuals.json");
    write_json(&residual_path, &residuals)?;
    manifest.output(&residual_path);
    for (k, r) in &residuals {
        emit!("trigger {k}: residual {r:.3e}");
    }
    manifest.write(&out)
}
