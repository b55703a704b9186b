//! Particle-system behaviour: selection law, determinism and invariants.

use std::sync::Arc;

use grain_pdmp::model::{build_grain_preset, two_species_counter, EdgeDeletion, ModelPreset, WeightMode};
use grain_pdmp::sim::{run, sample_grain_population, EventKind, ParticleSystem, SimConfig, Termination};
use grain_pdmp::Trigger;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn grain(e: EdgeDeletion) -> Arc<ModelPreset> {
    Arc::new(build_grain_preset(15, WeightMode::Uncorrelated, e).unwrap())
}

fn population(n: usize, seed: u64) -> Vec<(usize, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_grain_population(n, 15, 1.0, &mut rng)
}

/// Pearson statistic of observed counts against expected probabilities.
fn chi_square(observed: &[u64], expected: &[f64]) -> (f64, usize) {
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0;
    for (&o, &p) in observed.iter().zip(expected) {
        if p > 0.0 {
            let e = p * n as f64;
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        } else {
            assert_eq!(o, 0, "selected a species with zero weight");
        }
    }
    (stat, cells - 1)
}

#[test]
fn selection_follows_weighted_populations() {
    let preset = grain(EdgeDeletion::Population { beta: 1.0 });
    let mut sys = ParticleSystem::new(preset.clone(), &population(20_000, 5), true, 9).unwrap();
    let critical = |dof: usize| ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.999);
    for rule in preset.rules() {
        let populations = sys.populations();
        let weighted: Vec<f64> = (0..=15)
            .map(|s| rule.weights[s] * populations[s] as f64)
            .collect();
        let total: f64 = weighted.iter().sum();
        let expected: Vec<f64> = weighted.iter().map(|w| w / total).collect();
        let mut observed = vec![0u64; 16];
        for _ in 0..20_000 {
            let picks = sys.select_targets(rule, None).unwrap();
            assert_eq!(picks.len(), rule.k);
            let mut sorted = picks.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), rule.k, "picks must be distinct");
            observed[sys.species_of(picks[0]).unwrap()] += 1;
        }
        let (stat, dof) = chi_square(&observed, &expected);
        assert!(
            stat < critical(dof),
            "{}: chi-square {stat:.1} with {dof} dof",
            rule.trigger
        );
    }
}

#[test]
fn excluded_particle_is_never_selected() {
    let preset = grain(EdgeDeletion::None);
    let samples: Vec<(usize, f64)> = (0..8).map(|i| (if i < 4 { 5 } else { 7 }, 1.0 + i as f64)).collect();
    let mut sys = ParticleSystem::new(preset.clone(), &samples, false, 3).unwrap();
    let rule = preset.rule(Trigger::Boundary(3)).unwrap();
    for _ in 0..500 {
        let picks = sys.select_targets(rule, Some(0)).unwrap();
        assert!(!picks.contains(&0));
    }
}

#[test]
fn runs_are_reproducible_from_the_seed() {
    let preset = grain(EdgeDeletion::Population { beta: 2.0 });
    let sample = population(2_000, 1);
    let go = |seed| {
        let sys = ParticleSystem::new(preset.clone(), &sample, true, seed).unwrap();
        run(&SimConfig::new(0.2, seed, 0.05), sys).unwrap()
    };
    let (a, b, c) = (go(4), go(4), go(5));
    assert_eq!(a.events, b.events);
    assert_eq!(a.snapshots, b.snapshots);
    assert_ne!(a.events, c.events);
}

#[test]
fn two_species_conversions() {
    let preset = Arc::new(two_species_counter());
    let samples = [(1, 0.25), (1, 0.5), (2, 2.0), (2, 2.5)];
    let sys = ParticleSystem::new(preset, &samples, false, 0).unwrap();
    let out = run(&SimConfig::new(0.6, 0, 0.1), sys).unwrap();
    // two species-1 particles vanish, each converting one species-2 particle
    assert_eq!(out.events.len(), 2);
    assert!(out.events.iter().all(|e| e.kind == EventKind::Boundary { l: 1 }));
    assert_eq!(out.system.populations()[1..], [2, 0]);
    assert!((out.events[0].time - 0.25).abs() < 1e-12);
    assert!((out.events[1].time - 0.5).abs() < 1e-12);
    assert_eq!(out.termination, Termination::EndTime);
}

#[test]
fn two_species_exhaustion() {
    let preset = Arc::new(two_species_counter());
    let samples = [(1, 0.25), (1, 0.5), (2, 2.0)];
    let sys = ParticleSystem::new(preset, &samples, false, 0).unwrap();
    let out = run(&SimConfig::new(5.0, 0, 0.1), sys).unwrap();
    // no species-2 particle is left when the second species-1 particle vanishes
    assert!(matches!(
        out.termination,
        Termination::SelectionExhausted { trigger: Trigger::Boundary(1), .. }
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn grain_invariants_hold(seed in 0u64..1_000, n in 50usize..400, beta in 0.0f64..5.0) {
        let preset = grain(EdgeDeletion::Population { beta });
        let sys = ParticleSystem::new(preset, &population(n, seed), true, seed).unwrap();
        prop_assert_eq!(sys.defect(), 0);
        let area0 = sys.total_area();
        let out = run(&SimConfig::new(0.3, seed, 0.01), sys).unwrap();
        let mut last = n;
        for s in &out.snapshots {
            prop_assert!(s.count <= last);
            last = s.count;
            prop_assert_eq!(s.counts.iter().sum::<usize>(), s.count);
            prop_assert_eq!(s.defect, Some(0));
            prop_assert!((s.total_area - area0).abs() <= 1e-9 * area0);
        }
        for e in &out.events {
            for m in &e.mutations {
                prop_assert!((2..=15).contains(&m.to));
                prop_assert_ne!(m.from, m.to);
            }
        }
        let boundary = out.events.iter().filter(|e| e.vanished.is_some()).count();
        prop_assert_eq!(out.system.count() + boundary, n);
    }
}
