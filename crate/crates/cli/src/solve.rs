//! `solve`: the kinetic equations on a uniform size grid.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use grain_pdmp::io::read_density_specs;
use grain_pdmp::kinetic::{
    grain_initial, grid_speed, solve as solve_kinetic, two_species_initial, DensityField, FluxPath,
    Solution, SolverConfig, SolverError, DEFAULT_BLOWUP_REL,
};
use grain_pdmp::ModelPreset;
use serde::{Deserialize, Serialize};

use crate::common::{apply_config, output_dir, usage, write_json, ManifestBuilder, ModelFailure, PresetArgs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxPathArg {
    Generic,
    Topological,
    Both,
}

impl From<FluxPathArg> for FluxPath {
    fn from(p: FluxPathArg) -> Self {
        match p {
            FluxPathArg::Generic => FluxPath::Generic,
            FluxPathArg::Topological => FluxPath::Topological,
            FluxPathArg::Both => FluxPath::Both,
        }
    }
}

#[derive(clap::Args, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: PresetArgs,
    /// Initial density as a JSON list of {species, shape, support, mass};
    /// defaults to the preset's reference initial data.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Grid spacing; must equal the grid speed times --dt when both are given.
    #[arg(long)]
    pub dx: Option<f64>,
    /// Time step [default: 1e-3, or dx / grid speed].
    #[arg(long)]
    pub dt: Option<f64>,
    /// Largest size on the grid [default: support end + max speed × t-end].
    #[arg(long)]
    pub x_max: Option<f64>,
    /// Final time [default: 3 for two-species-counter, past its blow-up;
    /// otherwise 1].
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Support length of the default grain initial density.
    #[arg(long, default_value_t = 1.0)]
    pub support: f64,
    #[arg(long, value_enum, default_value_t = FluxPathArg::Generic)]
    pub flux_path: FluxPathArg,
    /// Blow-up threshold relative to each trigger's initial weighted mass.
    #[arg(long, default_value_t = DEFAULT_BLOWUP_REL)]
    pub blowup_rel: f64,
    /// Trajectory rows are written every this many steps.
    #[arg(long, default_value_t = 1)]
    pub trajectory_every: usize,
    /// Number of density snapshots written besides the initial one.
    #[arg(long, default_value_t = 10)]
    pub density_snapshots: usize,
    /// Output directory [default: $GRAINPDMP_OUT_ROOT/solve].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file whose keys override the flags above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn steps(dx: Option<f64>, dt: Option<f64>, speed: f64) -> Result<(f64, f64)> {
    let (dx, dt) = match (dx, dt) {
        (None, None) => (speed * 1e-3, 1e-3),
        (None, Some(dt)) => (speed * dt, dt),
        (Some(dx), None) => (dx, dx / speed),
        (Some(dx), Some(dt)) => {
            if (dx - speed * dt).abs() > 1e-9 * dx.abs() {
                return Err(usage(format!(
                    "the grid must be aligned: --dx {dx} differs from grid speed {speed} × --dt {dt}"
                )));
            }
            (dx, dt)
        }
    };
    if !(dx > 0.0 && dt > 0.0 && dx.is_finite() && dt.is_finite()) {
        return Err(usage("--dx and --dt must be positive"));
    }
    Ok((dx, dt))
}

fn initial_specs(args: &SolveArgs, preset: &ModelPreset) -> Result<Vec<grain_pdmp::kinetic::DensitySpec>> {
    if let Some(path) = &args.init {
        return read_density_specs(path).map_err(|e| usage(format!("{}: {e}", path.display())));
    }
    if preset.is_grain() {
        grain_initial(preset, args.support).map_err(|e| usage(e.to_string()))
    } else if preset.name == "two-species-counter" {
        Ok(two_species_initial())
    } else {
        Err(usage(format!("preset {} needs --init", preset.name)))
    }
}

pub fn solve(args: SolveArgs) -> Result<()> {
    let args = apply_config(args.clone(), args.config.as_deref())?;
    let preset = args.model.load()?;
    let t_end = args
        .t_end
        .unwrap_or(if preset.is_grain() { 1.0 } else { 3.0 });
    if !(t_end > 0.0) {
        return Err(usage("--t-end must be positive"));
    }
    let speed = grid_speed(&preset);
    let (dx, dt) = steps(args.dx, args.dt, speed)?;
    let specs = initial_specs(&args, &preset)?;
    let support_end = specs.iter().map(|s| s.support[1]).fold(0.0, f64::max);
    let x_max = args
        .x_max
        .unwrap_or(support_end + preset.species.max_speed() * t_end + 2.0 * dx);

    let mut config = SolverConfig::aligned(&preset, dt, x_max, t_end);
    config.dx = dx;
    config.flux_path = args.flux_path.into();
    config.blowup_rel = args.blowup_rel;
    config.trajectory_every = args.trajectory_every;
    let total_steps = (t_end / dt).ceil().max(1.0) as usize;
    config.density_every = (args.density_snapshots > 0)
        .then(|| (total_steps / args.density_snapshots).max(1));

    let field = DensityField::from_specs(&preset, &specs, dx, x_max).map_err(|e| usage(e.to_string()))?;
    let out = output_dir(args.out.as_deref(), "solve")?;
    let mut manifest = ManifestBuilder::new("solve", &args, None)?;
    if let Some(path) = &args.init {
        manifest.input(path);
    }
    if let Some(path) = &args.model.weights {
        manifest.input(path);
    }
    manifest.note("dx", dx.to_string());
    manifest.note("dt", dt.to_string());
    manifest.note("x_max", x_max.to_string());

    let solution = match solve_kinetic(&field, &preset, &config) {
        Ok(s) => s,
        Err(e @ (SolverError::InvalidConfig(_) | SolverError::InvalidField(_))) => {
            return Err(usage(e.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    if solution.experimental {
        eprintln!(
            "warning: the kinetic limit of removal-driven edge deletion is experimental; \
             area is not conserved exactly"
        );
        manifest.note("experimental", "removal-driven edge deletion");
    }

    let trajectory = out.join("trajectory.csv");
    write_trajectory(&solution, &preset, &trajectory)?;
    manifest.output(&trajectory);
    let density_dir = out.join("densities");
    fs::create_dir_all(&density_dir)?;
    let every = config.density_every.unwrap_or(0);
    for (k, d) in solution.densities.iter().enumerate() {
        let path = density_dir.join(format!("density_{:04}.csv", k * every));
        write_density(d, &preset, &path)?;
        manifest.output(&path);
    }
    let report = out.join("report.json");
    write_json(
        &report,
        &serde_json::json!({
            "preset": preset.name,
            "dx": dx,
            "dt": dt,
            "x_max": x_max,
            "steps": solution.steps,
            "final_time": solution.final_field.t,
            "blow_up": solution.blow_up,
            "experimental": solution.experimental,
            "conservation": solution.report,
        }),
    )?;
    manifest.output(&report);

    let last = solution.trajectory.last().expect("trajectory has the initial point");
    emit!(
        "t={} total={} area={} after {} steps",
        last.t, last.total, last.area, solution.steps
    );
    let failure = solution.blow_up.map(|b| ModelFailure {
        time: b.time,
        message: format!("blow-up (T*={}) for trigger {}: selection weights vanish", b.time, b.trigger),
    });
    if let Some(f) = &failure {
        manifest.status(f.to_string());
    }
    manifest.write(&out)?;
    match failure {
        Some(f) => Err(f.into()),
        None => Ok(()),
    }
}

/// `t, F_<s>…, F, A, P, L_<l>…` with one column per species and trigger.
fn write_trajectory(solution: &Solution, preset: &ModelPreset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let species: Vec<usize> = preset.species.species().collect();
    let mut header = vec!["t".to_string()];
    header.extend(species.iter().map(|s| format!("F_{s}")));
    header.extend(["F".to_string(), "A".to_string(), "P".to_string()]);
    let shrinking: Vec<usize> = preset.species.shrinking().collect();
    header.extend(shrinking.iter().map(|l| format!("L_{l}")));
    writeln!(w, "{}", header.join(","))?;
    for p in &solution.trajectory {
        let mut row = vec![p.t.to_string()];
        row.extend(species.iter().map(|&s| p.totals[s].to_string()));
        row.push(p.total.to_string());
        row.push(p.area.to_string());
        row.push(p.defect.map_or(String::new(), |d| d.to_string()));
        row.extend(shrinking.iter().map(|&l| p.losses[l].to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Density matrix: one row per grid node, columns `x, f_<s>…`.
fn write_density(field: &DensityField, preset: &ModelPreset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let species: Vec<usize> = preset.species.species().collect();
    let mut header = vec!["x".to_string()];
    header.extend(species.iter().map(|s| format!("f_{s}")));
    writeln!(w, "# t={}", field.t)?;
    writeln!(w, "{}", header.join(","))?;
    for g in 0..field.nodes() {
        let mut row = vec![field.x(g).to_string()];
        row.extend(species.iter().map(|&s| field.f[s][g].to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}
