//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line (written straight to stderr so it shows without
//! `--nocapture`).

use std::io::Write;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Instant;

use grain_pdmp::compare::compare_steps;
use grain_pdmp::fitting::{
    coarsening_rate, coarsening_rate_of, correlated_residual, fit_beta_pd, fit_beta_rd,
    solve_correlated_weights, TrackSummarizer, TrackSummary,
};
use grain_pdmp::kinetic::{
    boundary_flux, compute_flux, compute_totals, compute_weights, grain_initial, solve,
    two_species_initial, DensityField, FluxPath, Solution, SolverConfig, Thresholds,
    TWO_SPECIES_T_STAR,
};
use grain_pdmp::model::{build_grain_preset, two_species_counter, EdgeDeletion, ModelPreset, WeightMode};
use grain_pdmp::sim::{
    run, run_with, sample_grain_population, sample_two_species, FnSink, ParticleSystem, SimConfig,
    Snapshot, Termination,
};
use grain_pdmp::stats::{frequencies, index_moments};
use grain_pdmp::topology::{check_matrices_against_rules, count_trees, enumerate_trees};
use grain_pdmp::track::{GrainRecord, GrainStep};
use grain_pdmp::Trigger;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria carry wall-clock budgets, so they run one at a time.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, pass: bool, started: Instant, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!(
        "criterion {id:>2}: {verdict} ({:.1}s) {detail}\n",
        started.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} failed: {detail}");
}

fn grain(e: EdgeDeletion) -> Arc<ModelPreset> {
    Arc::new(build_grain_preset(15, WeightMode::Uncorrelated, e).unwrap())
}

fn grain_population(n: usize, mean_area: f64, seed: u64) -> Vec<(usize, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_grain_population(n, 15, mean_area, &mut rng)
}

fn side_variance(counts: &[usize]) -> f64 {
    let c: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    index_moments(&frequencies(&c)).1
}

fn summarize_run(
    preset: Arc<ModelPreset>,
    init: &[(usize, f64)],
    zero_defect: bool,
    t_end: f64,
    steps: usize,
    seed: u64,
) -> (TrackSummary, u64) {
    let system = ParticleSystem::new(preset, init, zero_defect, seed).unwrap();
    let mut cfg = SimConfig::new(t_end, seed, t_end / steps as f64);
    cfg.record_events = false;
    cfg.track_grains = true;
    let mut summarizer = TrackSummarizer::new();
    let mut k = 0;
    let mut sink = FnSink(|mut snap: Snapshot| {
        let grains = snap.grains.take().unwrap_or_default();
        summarizer.push(&GrainStep {
            step: k,
            time: snap.time,
            grains,
        });
        k += 1;
    });
    let out = run_with(&cfg, system, &mut sink).unwrap();
    let interior = out.system.interior_events();
    let summary = summarizer.finish();
    (summary, interior)
}

#[test]
fn criterion_01_catalan_counts() {
    let _serial = serial();
    let t = Instant::now();
    let expected = [1u64, 1, 2, 5];
    let mut pass = true;
    let mut got = Vec::new();
    for (k, &e) in (2..=5).zip(&expected) {
        let c = count_trees(k).unwrap();
        let n = enumerate_trees(k).unwrap().len() as u64;
        got.push((c, n));
        pass &= c == e && n == e;
    }
    report(1, pass, t, format!("(count, enumerated) for k=2..5: {got:?}"));
}

#[test]
fn criterion_02_rule_matrix_consistency() {
    let _serial = serial();
    let t = Instant::now();
    let mut pass = true;
    let mut triggers = 0;
    for e in [
        EdgeDeletion::None,
        EdgeDeletion::Population { beta: 1.0 },
        EdgeDeletion::Removal { alpha: 1.0, beta: 2.0 },
    ] {
        let p = grain(e);
        let r = check_matrices_against_rules(&p);
        pass &= r.is_valid();
        triggers = p.rules().count();
    }
    pass &= triggers == 5;
    report(2, pass, t, format!("grain15 nd/pd/rd, {triggers} triggers each"));
}

#[test]
fn criterion_03_finite_system_conservation() {
    let _serial = serial();
    let t = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for (name, e) in [
        ("nd", EdgeDeletion::None),
        ("pd", EdgeDeletion::Population { beta: 1.0 }),
        ("rd", EdgeDeletion::Removal { alpha: 1.27, beta: 2.02 }),
    ] {
        let run_start = Instant::now();
        let system =
            ParticleSystem::new(grain(e), &grain_population(100_000, 1.0, 3), true, 3).unwrap();
        let mut cfg = SimConfig::new(1e6, 17, 0.02);
        cfg.record_events = false;
        cfg.stop_fraction = Some(0.5);
        let out = run(&cfg, system).unwrap();
        let a0 = out.system.initial_area();
        let defect_ok = out.snapshots.iter().all(|s| s.defect == Some(0))
            && out.system.defect() == 0;
        let drift = out
            .snapshots
            .iter()
            .map(|s| s.total_area)
            .chain([out.system.total_area()])
            .map(|a| ((a - a0) / a0).abs())
            .fold(0.0, f64::max);
        let reached = matches!(out.termination, Termination::StopFraction { .. });
        let secs = run_start.elapsed().as_secs_f64();
        pass &= defect_ok && drift <= 1e-6 && reached && secs <= 60.0;
        details.push(format!(
            "{name}: defect0={defect_ok} drift={drift:.1e} snaps={} {secs:.1}s",
            out.snapshots.len()
        ));
    }
    report(3, pass, t, details.join("; "));
}

/// Grain solve from hats of width `≤ 0.28`; the grid covers the growth of
/// 15-gons at speed `3π` up to `t_end`.
fn grain_solve(e: EdgeDeletion, t_end: f64, steps: usize) -> Solution {
    let p = build_grain_preset(15, WeightMode::Uncorrelated, e).unwrap();
    let dt = t_end / steps as f64;
    let x_max = 0.3 + 3.0 * std::f64::consts::PI * t_end + 0.1;
    let mut cfg = SolverConfig::aligned(&p, dt, x_max, t_end);
    cfg.trajectory_every = steps / 100;
    let specs = grain_initial(&p, 0.1).unwrap();
    let field = DensityField::from_specs(&p, &specs, cfg.dx, cfg.x_max).unwrap();
    solve(&field, &p, &cfg).unwrap()
}

#[test]
fn criterion_04_kinetic_number_conservation() {
    let _serial = serial();
    let t = Instant::now();
    let t_end = 0.2;
    let mut pass = true;
    let mut details = Vec::new();
    for (name, e) in [("nd", EdgeDeletion::None)] {
        let coarse = grain_solve(e, t_end, 2000);
        let fine = grain_solve(e, t_end, 4000);
        let f0 = coarse.report.initial_number;
        let (ec, ef) = (coarse.report.max_number_error, fine.report.max_number_error);
        let ratio = ef / ec;
        let ok = coarse.blow_up.is_none()
            && ec <= 1e-3 * f0
            && (0.4..=0.6).contains(&ratio);
        pass &= ok;
        details.push(format!(
            "{name}: err(T/2000)={:.2e}·F0 err(T/4000)={:.2e}·F0 ratio={ratio:.3}",
            ec / f0,
            ef / f0
        ));
    }
    pass &= t.elapsed().as_secs_f64() <= 60.0;
    report(4, pass, t, details.join("; "));
}

#[test]
fn criterion_05_flux_identity() {
    let _serial = serial();
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for e in [
        EdgeDeletion::None,
        EdgeDeletion::Population { beta: 1.0 },
        EdgeDeletion::Removal { alpha: 1.27, beta: 2.02 },
    ] {
        let sol = grain_solve(e, 0.1, 500);
        worst = worst.max(sol.report.max_flux_residual);
    }
    let two = two_species_counter();
    let cfg = SolverConfig::aligned(&two, 1e-3, 4.0, 1.5);
    let field = DensityField::from_specs(&two, &two_species_initial(), cfg.dx, cfg.x_max).unwrap();
    worst = worst.max(solve(&field, &two, &cfg).unwrap().report.max_flux_residual);
    let pass = worst <= 1e-12 && t.elapsed().as_secs_f64() < 10.0;
    report(5, pass, t, format!("max |Σ_σ j_σ| / max |j_σ| = {worst:.2e}"));
}

#[test]
fn criterion_06_dual_flux_paths() {
    let _serial = serial();
    let t = Instant::now();
    let p = grain(EdgeDeletion::Population { beta: 1.0 });
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut field = DensityField::zeros(&p, 0.05, 2.0).unwrap();
        for s in 2..=15 {
            for v in field.f[s].iter_mut() {
                *v = rng.random_range(0.01..2.0);
            }
        }
        let beta = rng.random_range(0.0..10.0);
        let totals = compute_totals(&field);
        let ldot = boundary_flux(&field, &p);
        let w = compute_weights(&totals, &ldot, beta, &p, &Thresholds::zero(&p), 0.0).unwrap();
        let a = compute_flux(&field, &p, &ldot, beta, &w, FluxPath::Generic).unwrap();
        let b = compute_flux(&field, &p, &ldot, beta, &w, FluxPath::Topological).unwrap();
        worst = worst.max(a.max_relative_difference(&b));
    }
    let pass = worst <= 1e-12;
    report(6, pass, t, format!("max relative difference over 100 fields = {worst:.2e}"));
}

fn two_species_solution(dt: f64) -> Solution {
    let two = two_species_counter();
    let mut cfg = SolverConfig::aligned(&two, dt, 4.0, 3.0);
    cfg.trajectory_every = 1;
    let field = DensityField::from_specs(&two, &two_species_initial(), cfg.dx, cfg.x_max).unwrap();
    solve(&field, &two, &cfg).unwrap()
}

#[test]
fn criterion_07_monte_carlo_vs_pde() {
    let _serial = serial();
    let t = Instant::now();
    let n = 100_000;
    let dt = 1e-3;
    let pde = two_species_solution(dt);
    let t_star = pde.blow_up.map_or(f64::NAN, |b| b.time);
    let preset = Arc::new(two_species_counter());
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let system = ParticleSystem::new(preset, &sample_two_species(n, &mut rng), false, 70).unwrap();
    let mut cfg = SimConfig::new(0.9 * t_star, 71, 0.01);
    cfg.record_events = false;
    let sim = run(&cfg, system).unwrap();
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for snap in &sim.snapshots {
        if snap.time > 0.9 * t_star {
            continue;
        }
        let k = (snap.time / dt).round() as usize;
        let point = &pde.trajectory[k];
        assert!((point.t - snap.time).abs() < 1e-9);
        for s in [1, 2] {
            let f_sim = snap.counts[s] as f64 / n as f64;
            worst = worst.max((f_sim - point.totals[s]).abs());
        }
        compared += 1;
    }
    let bound = 5.0 / (n as f64).sqrt();
    let pass = worst <= bound && compared > 100 && t.elapsed().as_secs_f64() <= 120.0;
    report(
        7,
        pass,
        t,
        format!("max |F_sim - F_pde| = {worst:.2e} over {compared} times ≤ 0.9·T*, bound {bound:.2e}"),
    );
}

#[test]
fn criterion_08_blow_up_detection() {
    let _serial = serial();
    let t = Instant::now();
    let dt = 1e-3;
    let pde = two_species_solution(dt);
    let solver_t = pde.blow_up.map(|b| b.time);
    // inclusive: the time is accumulated step by step in floating point
    let solver_ok =
        solver_t.is_some_and(|ts| (ts - TWO_SPECIES_T_STAR).abs() <= 2.0 * dt * (1.0 + 1e-9));

    let n = 100_000;
    let preset = Arc::new(two_species_counter());
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    let system = ParticleSystem::new(preset, &sample_two_species(n, &mut rng), false, 80).unwrap();
    let mut cfg = SimConfig::new(10.0, 81, 0.01);
    cfg.record_events = true;
    let sim = run(&cfg, system).unwrap();
    // species 2 runs out at the (N/2)-th boundary event
    let depletion = sim.events.get(n / 2 - 1).map(|e| e.time);
    let exhausted = match sim.termination {
        Termination::SelectionExhausted { time, trigger } => {
            assert_eq!(trigger, Trigger::Boundary(1));
            Some(time)
        }
        _ => None,
    };
    let tol = 3.0 / (n as f64).sqrt();
    let sim_ok = exhausted.is_some_and(|te| (te - TWO_SPECIES_T_STAR).abs() <= tol);
    let pass = solver_ok && sim_ok;
    report(
        8,
        pass,
        t,
        format!(
            "solver T*={solver_t:?} (oracle {TWO_SPECIES_T_STAR}, tol {:.0e}); simulator exhaustion at {exhausted:?} (tol {tol:.2e}); species 2 depleted at {depletion:?}",
            2.0 * dt
        ),
    );
}

#[test]
fn criterion_09_fitting_round_trips() {
    let _serial = serial();
    let t = Instant::now();
    // population-driven: mean area chosen so edge deletions dominate removals
    let beta_pd = 5000.0;
    let (pd, interior) = summarize_run(
        grain(EdgeDeletion::Population { beta: beta_pd }),
        &grain_population(100_000, 1e-3, 91),
        true,
        2e-4,
        200,
        91,
    );
    let fit_pd = fit_beta_pd(&pd, 0.1).unwrap();
    let pd_ok = (fit_pd - beta_pd).abs() <= 0.1 * beta_pd;
    let total_s: f64 = pd.intervals.iter().map(|iv| iv.delta_s).sum();

    // removal-driven: start from a population already coarsened under the
    // same dynamics, with α calibrated so the simulated rate matches the
    // measured coarsening rate
    let beta_rd = 2.0;
    let mut alpha = 1.8;
    let pre = ParticleSystem::new(
        grain(EdgeDeletion::Removal { alpha, beta: beta_rd }),
        &grain_population(250_000, 1.0, 92),
        true,
        92,
    )
    .unwrap();
    let mut cfg = SimConfig::new(1e9, 93, 1e9);
    cfg.record_events = false;
    cfg.stop_fraction = Some(0.4);
    let pre = run(&cfg, pre).unwrap().system;
    let init: Vec<(usize, f64)> = pre.particles().map(|(_, s, x)| (s, x)).collect();
    let mean_area = pre.total_area() / init.len() as f64;
    let mut fit_rd = f64::NAN;
    for it in 0..3 {
        let t_end = 3.0 * mean_area / alpha;
        let (rd, _) = summarize_run(
            grain(EdgeDeletion::Removal { alpha, beta: beta_rd }),
            &init,
            false,
            t_end,
            200,
            94 + it,
        );
        let n = rd.len();
        let measured = coarsening_rate_of(&rd, n / 10..n).unwrap().slope;
        fit_rd = fit_beta_rd(&rd, 0.1).unwrap();
        if it < 2 {
            alpha = measured;
        }
    }
    let rd_ok = (fit_rd - beta_rd).abs() <= 0.1 * beta_rd;
    let pass = pd_ok && rd_ok && t.elapsed().as_secs_f64() <= 300.0;
    report(
        9,
        pass,
        t,
        format!(
            "β_PD {beta_pd} → {fit_pd:.1} (ΣΔS={total_s:.0} vs {interior} interior events); β_RD {beta_rd} → {fit_rd:.4} (N0={}, α={alpha:.3})",
            init.len()
        ),
    );
}

#[test]
fn criterion_10_correlated_weight_solve() {
    let _serial = serial();
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p: Vec<f64> = frequencies(&(0..15).map(|_| rng.random_range(0.001..1.0)).collect::<Vec<_>>());
        let c: Vec<f64> = frequencies(
            &(0..15)
                .map(|_| if rng.random_bool(0.8) { rng.random_range(0.0..1.0) } else { 0.0 })
                .collect::<Vec<_>>(),
        );
        if c.iter().sum::<f64>() == 0.0 {
            continue;
        }
        let w = solve_correlated_weights(&p, &c).unwrap();
        worst = worst.max(correlated_residual(&p, &c, &w));
    }
    report(10, worst <= 1e-12, t, format!("max residual over 100 instances = {worst:.2e}"));
}

fn to_step(system: &ParticleSystem) -> GrainStep {
    GrainStep {
        step: 0,
        time: system.time(),
        grains: system
            .particles()
            .map(|(id, s, x)| GrainRecord {
                id: id as u64,
                sides: s as u32,
                area: x,
            })
            .collect(),
    }
}

#[test]
fn criterion_11_qualitative_ordering() {
    let _serial = serial();
    let t = Instant::now();
    let mut var = Vec::new();
    let mut steps = Vec::new();
    for e in [
        EdgeDeletion::None,
        EdgeDeletion::Population { beta: 1.0 },
        EdgeDeletion::Removal { alpha: 1.27, beta: 2.02 },
    ] {
        let system = ParticleSystem::new(grain(e), &grain_population(100_000, 1.0, 11), true, 11).unwrap();
        let mut cfg = SimConfig::new(1e6, 12, 1e6);
        cfg.record_events = false;
        cfg.stop_fraction = Some(0.2);
        let out = run(&cfg, system).unwrap();
        var.push(side_variance(&out.system.populations()));
        steps.push(to_step(&out.system));
    }
    let (self_tv, self_ks) = compare_steps(&steps[0], &steps[0]).unwrap();
    let (nd_pd_tv, _) = compare_steps(&steps[0], &steps[1]).unwrap();
    let pass = var[0] < var[1]
        && var[0] < var[2]
        && self_tv == 0.0
        && self_ks.values().all(|v| *v == Some(0.0))
        && nd_pd_tv > 0.0;
    report(
        11,
        pass,
        t,
        format!(
            "side-count variance at 20% remaining: ND {:.3}, PD {:.3}, RD {:.3}; TV(ND, ND)={self_tv}; TV(ND, PD)={nd_pd_tv:.3}",
            var[0], var[1], var[2]
        ),
    );
}

#[test]
fn criterion_12_linear_coarsening() {
    let _serial = serial();
    let t = Instant::now();
    let system =
        ParticleSystem::new(grain(EdgeDeletion::None), &grain_population(100_000, 1.0, 12), true, 12)
            .unwrap();
    let mut cfg = SimConfig::new(1e6, 13, 0.05);
    cfg.record_events = false;
    cfg.stop_fraction = Some(0.1);
    let out = run(&cfg, system).unwrap();
    let a0 = out.system.initial_area();
    let times: Vec<f64> = out.snapshots.iter().map(|s| s.time).collect();
    let mean: Vec<f64> = out.snapshots.iter().map(|s| a0 / s.count as f64).collect();
    let n = times.len();
    let (lo, hi) = (n / 10, n - n / 10);
    let fit = coarsening_rate(&times[lo..hi], &mean[lo..hi]).unwrap();
    let r = fit.pearson_r.unwrap_or(f64::NAN);
    let pass = r >= 0.995 && t.elapsed().as_secs_f64() <= 60.0;
    report(
        12,
        pass,
        t,
        format!("Pearson R = {r:.5}, rate {:.4} over snapshots {lo}..{hi} of {n}", fit.slope),
    );
}
