//! Plumbing shared by the subcommands: preset resolution, config files,
//! output directories, manifests and exit codes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::ValueEnum;
use grain_pdmp::model::{builtin_preset, CorrelatedWeights, BUILTIN_PRESETS};
use grain_pdmp::{build_grain_preset, EdgeDeletion, ModelPreset, PresetSpec, WeightMode};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Environment variable naming the default output root.
pub const OUT_ROOT_VAR: &str = "GRAINPDMP_OUT_ROOT";

/// Bad flags or inputs: exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// The model stopped being well defined (blow-up or exhausted selection):
/// exit code 3. Outputs up to `time` have been written.
#[derive(Debug)]
pub struct ModelFailure {
    pub time: f64,
    pub message: String,
}

impl fmt::Display for ModelFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at t={}", self.message, self.time)
    }
}

impl std::error::Error for ModelFailure {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        2
    } else if err.downcast_ref::<ModelFailure>().is_some() {
        3
    } else {
        1
    }
}

/// Flags shared by every command that needs a model.
#[derive(clap::Args, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PresetArgs {
    /// Built-in preset (grain15-nd, grain15-pd, grain15-rd,
    /// two-species-counter) or a preset JSON file.
    #[arg(long, default_value = "grain15-nd")]
    pub preset: String,
    /// Override the coarsening-rate factor of a removal-driven preset.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Override the edge-deletion rate of a PD or RD preset.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Correlated weight table (JSON written by `gen-weights`).
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

impl PresetArgs {
    pub fn load(&self) -> Result<ModelPreset> {
        let mut preset = match builtin_preset(&self.preset) {
            Some(p) => p,
            None => {
                let path = Path::new(&self.preset);
                if !path.is_file() {
                    return Err(usage(format!(
                        "unknown preset `{}`; use one of {} or a preset JSON file",
                        self.preset,
                        BUILTIN_PRESETS.join(", ")
                    )));
                }
                let spec: PresetSpec = read_json(path)?;
                spec.build()
                    .map_err(|e| usage(format!("preset {}: {e}", path.display())))?
            }
        };
        let edge_deletion = match (preset.edge_deletion, self.alpha, self.beta) {
            (e, None, None) => e,
            (EdgeDeletion::Population { beta }, None, b) => EdgeDeletion::Population {
                beta: b.unwrap_or(beta),
            },
            (EdgeDeletion::Removal { alpha, beta }, a, b) => EdgeDeletion::Removal {
                alpha: a.unwrap_or(alpha),
                beta: b.unwrap_or(beta),
            },
            (e, _, _) => {
                return Err(usage(format!(
                    "preset {} has edge deletion {}, which takes no {}",
                    preset.name,
                    e.code(),
                    if self.alpha.is_some() { "--alpha" } else { "--beta" }
                )))
            }
        };
        if edge_deletion != preset.edge_deletion || self.weights.is_some() {
            if !preset.is_grain() {
                return Err(usage(format!("preset {} takes no overrides", preset.name)));
            }
            let mode = match &self.weights {
                Some(path) => WeightMode::Correlated(read_json::<CorrelatedWeights>(path)?),
                None => preset.weight_mode.clone(),
            };
            let name = preset.name.clone();
            preset = build_grain_preset(preset.max_species(), mode, edge_deletion)
                .map_err(|e| usage(format!("preset {name}: {e}")))?;
        }
        Ok(preset)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMode {
    Nd,
    Pd,
    Rd,
}

pub fn edge_deletion(mode: EdgeMode, alpha: Option<f64>, beta: Option<f64>) -> Result<EdgeDeletion> {
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| usage(format!("edge deletion {mode:?} needs {flag}")))
    };
    Ok(match mode {
        EdgeMode::Nd => EdgeDeletion::None,
        EdgeMode::Pd => EdgeDeletion::Population {
            beta: need(beta, "--beta")?,
        },
        EdgeMode::Rd => EdgeDeletion::Removal {
            alpha: need(alpha, "--alpha")?,
            beta: need(beta, "--beta")?,
        },
    })
}

/// Applies a JSON config file on top of the parsed flags: every key in the
/// file replaces the flag of the same (kebab-case) name.
pub fn apply_config<T: Serialize + DeserializeOwned>(args: T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(args);
    };
    let overrides: serde_json::Map<String, serde_json::Value> = read_json(path)?;
    let mut merged = serde_json::to_value(&args)?;
    let fields = merged
        .as_object_mut()
        .expect("arguments serialize to an object");
    for (key, value) in overrides {
        if !fields.contains_key(&key) {
            return Err(usage(format!("config {}: unknown key `{key}`", path.display())));
        }
        fields.insert(key, value);
    }
    serde_json::from_value(merged)
        .map_err(|e| usage(format!("config {}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `--out`, or `$GRAINPDMP_OUT_ROOT/<command>` (root defaults to `runs`).
pub fn output_dir(out: Option<&Path>, command: &str) -> Result<PathBuf> {
    let dir = match out {
        Some(dir) => dir.to_path_buf(),
        None => {
            let root = std::env::var_os(OUT_ROOT_VAR).unwrap_or_else(|| "runs".into());
            PathBuf::from(root).join(command)
        }
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

/// Everything needed to reproduce one invocation.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub status: String,
    pub wall_clock_seconds: f64,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

pub struct ManifestBuilder {
    started: Instant,
    manifest: Manifest,
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, config: &impl Serialize, seed: Option<u64>) -> Result<Self> {
        Ok(Self {
            started: Instant::now(),
            manifest: Manifest {
                subcommand: subcommand.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                seed,
                config: serde_json::to_value(config)?,
                inputs: Vec::new(),
                outputs: Vec::new(),
                status: "ok".to_string(),
                wall_clock_seconds: 0.0,
                notes: BTreeMap::new(),
            },
        })
    }

    pub fn input(&mut self, path: &Path) {
        self.manifest.inputs.push(path.display().to_string());
    }

    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.display().to_string());
    }

    pub fn note(&mut self, key: &str, value: impl Into<String>) {
        self.manifest.notes.insert(key.to_string(), value.into());
    }

    pub fn status(&mut self, status: impl Into<String>) {
        self.manifest.status = status.into();
    }

    pub fn write(mut self, dir: &Path) -> Result<()> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        write_json(&dir.join("manifest.json"), &self.manifest)
    }
}
