//! `compare`: distances between two grain tracks plus the data behind the
//! usual comparison plots.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use grain_pdmp::compare::{compare_runs, normalized_areas, ComparePoint, COMPARED_SIDES};
use grain_pdmp::fitting::{coarsening_rate, step_frequencies};
use grain_pdmp::io::read_graintrack;
use grain_pdmp::stats::{align, Histogram};
use grain_pdmp::track::GrainTrackDataset;
use serde::{Deserialize, Serialize};

use crate::common::{apply_config, output_dir, usage, write_json, ManifestBuilder};

#[derive(clap::Args, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct CompareArgs {
    /// First grain track.
    #[arg(long)]
    pub a: PathBuf,
    /// Second grain track.
    #[arg(long)]
    pub b: PathBuf,
    /// Compare at this time (repeatable).
    #[arg(long)]
    pub time: Vec<f64>,
    /// Compare where this fraction of the initial grains remains
    /// (repeatable) [default: 0.2 when no --time is given].
    #[arg(long)]
    pub remaining: Vec<f64>,
    /// Bins of the normalized-area histograms, spread over [0, max].
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    /// Output directory [default: $GRAINPDMP_OUT_ROOT/compare].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file whose keys override the flags above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn load(path: &Path) -> Result<GrainTrackDataset> {
    let data = read_graintrack(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if data.is_empty() {
        return Err(usage(format!("{}: no grain records", path.display())));
    }
    Ok(data)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn compare(args: CompareArgs) -> Result<()> {
    let args = apply_config(args.clone(), args.config.as_deref())?;
    if args.bins == 0 {
        return Err(usage("--bins must be positive"));
    }
    let mut points: Vec<ComparePoint> = args.time.iter().map(|&t| ComparePoint::Time(t)).collect();
    for &f in &args.remaining {
        if !(0.0..=1.0).contains(&f) {
            return Err(usage("--remaining must lie in [0, 1]"));
        }
        points.push(ComparePoint::Remaining(f));
    }
    if points.is_empty() {
        points.push(ComparePoint::Remaining(0.2));
    }
    let a = load(&args.a)?;
    let b = load(&args.b)?;
    let report = compare_runs(&a, &b, &points).map_err(|e| usage(e.to_string()))?;

    let out = output_dir(args.out.as_deref(), "compare")?;
    let mut manifest = ManifestBuilder::new("compare", &args, None)?;
    manifest.input(&args.a);
    manifest.input(&args.b);

    let rate = |d: &GrainTrackDataset| {
        let means: Vec<f64> = d.steps.iter().map(|s| s.total_area() / s.count().max(1) as f64).collect();
        coarsening_rate(&d.times(), &means).ok()
    };
    let metrics = out.join("metrics.json");
    write_json(
        &metrics,
        &serde_json::json!({
            "entries": report.entries,
            "coarsening_rate": { "a": rate(&a), "b": rate(&b) },
            "steps": { "a": a.len(), "b": b.len() },
        }),
    )?;
    manifest.output(&metrics);

    for (i, entry) in report.entries.iter().enumerate() {
        let sa = &a.steps[a.nearest_step(entry.time_a).expect("resolved step")];
        let sb = &b.steps[b.nearest_step(entry.time_b).expect("resolved step")];
        let (pa, pb) = align(
            &step_frequencies(sa).unwrap_or_default(),
            &step_frequencies(sb).unwrap_or_default(),
        );
        let path = out.join(format!("topology_{i}.csv"));
        let mut w = create(&path)?;
        writeln!(w, "sides,a,b")?;
        for (n, (x, y)) in pa.iter().zip(&pb).enumerate() {
            writeln!(w, "{n},{x},{y}")?;
        }
        w.flush()?;
        manifest.output(&path);

        for sides in COMPARED_SIDES {
            let xa = normalized_areas(sa, sides);
            let xb = normalized_areas(sb, sides);
            let hi = xa.iter().chain(&xb).copied().fold(0.0, f64::max);
            let hi = if hi > 0.0 { hi } else { 1.0 };
            let ha = Histogram::uniform(xa, args.bins, 0.0, hi);
            let hb = Histogram::uniform(xb, args.bins, 0.0, hi);
            let path = out.join(format!("areas_{i}_{sides}.csv"));
            let mut w = create(&path)?;
            writeln!(w, "lo,hi,a,b")?;
            let edges = ha.edges();
            for (k, (da, db)) in ha.densities().iter().zip(hb.densities()).enumerate() {
                writeln!(w, "{},{},{da},{db}", edges[k], edges[k + 1])?;
            }
            w.flush()?;
            manifest.output(&path);
        }
    }

    let path = out.join("coarsening.csv");
    let mut w = create(&path)?;
    writeln!(w, "run,t,count,mean_area")?;
    for (name, d) in [("a", &a), ("b", &b)] {
        for s in &d.steps {
            let mean = s.total_area() / s.count().max(1) as f64;
            writeln!(w, "{name},{},{},{mean}", s.time, s.count())?;
        }
    }
    w.flush()?;
    manifest.output(&path);

    for e in &report.entries {
        let ks: Vec<String> = e
            .ks
            .iter()
            .map(|(k, v)| format!("{k}:{}", v.map_or("n/a".into(), |v| format!("{v:.4}"))))
            .collect();
        emit!(
            "t_a={} t_b={} tv={:.4} ks {}",
            e.time_a,
            e.time_b,
            e.tv,
            ks.join(" ")
        );
    }
    manifest.write(&out)
}
