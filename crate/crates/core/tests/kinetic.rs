//! Kinetic solver: positivity, finite propagation speed, first-order
//! convergence and flux bookkeeping.

use grain_pdmp::kinetic::{
    boundary_flux, compute_flux, compute_totals, compute_weights, grain_initial, grid_speed, solve,
    two_species_initial, two_species_oracle, DensityField, DensitySpec, FluxPath, Shape, Solution,
    SolverConfig, Thresholds,
};
use grain_pdmp::model::{build_grain_preset, two_species_counter, EdgeDeletion, ModelPreset, WeightMode};
use proptest::prelude::*;

fn grain(e: EdgeDeletion, m: usize) -> ModelPreset {
    build_grain_preset(m, WeightMode::Uncorrelated, e).unwrap()
}

fn run(preset: &ModelPreset, specs: &[DensitySpec], dt: f64, x_max: f64, t_end: f64) -> Solution {
    let config = SolverConfig::aligned(preset, dt, x_max, t_end);
    let field = DensityField::from_specs(preset, specs, config.dx, x_max).unwrap();
    solve(&field, preset, &config).unwrap()
}

fn two_species(dt: f64, t_end: f64) -> Solution {
    let p = two_species_counter();
    run(&p, &two_species_initial(), dt, 4.0, t_end)
}

#[test]
fn densities_stay_nonnegative() {
    for e in [
        EdgeDeletion::None,
        EdgeDeletion::Population { beta: 3.0 },
        EdgeDeletion::Removal { alpha: 1.0, beta: 2.0 },
    ] {
        let p = grain(e, 10);
        let specs = grain_initial(&p, 0.5).unwrap();
        let s = run(&p, &specs, 2e-3, 0.5 + 4.0 * std::f64::consts::PI * 0.1 + 0.1, 0.1);
        assert!(s.blow_up.is_none());
        assert!(s.report.min_density >= 0.0, "{e:?}: {}", s.report.min_density);
        assert!(s.final_field.min_value() >= 0.0);
        assert!(s.report.min_theta > 0.0 && s.report.min_theta <= 1.0);
    }
}

#[test]
fn support_spreads_at_most_at_the_largest_growth_speed() {
    let p = grain(EdgeDeletion::Population { beta: 1.0 }, 12);
    let specs = grain_initial(&p, 0.3).unwrap();
    let t_end = 0.1;
    let config = SolverConfig::aligned(&p, 1e-3, 3.0, t_end);
    let field = DensityField::from_specs(&p, &specs, config.dx, 3.0).unwrap();
    let s = solve(&field, &p, &config).unwrap();
    let speed = p.species.max_speed();
    let dx = config.dx;
    let end0 = field.support_end();
    assert!(s.final_field.support_end() <= end0 + speed * t_end + dx);
    // the fastest-growing species carries the front with it
    let front = |f: &DensityField| f.f[12].iter().rposition(|&v| v > 0.0).unwrap() as f64 * dx;
    assert!((front(&s.final_field) - front(&field) - speed * t_end).abs() <= dx);
}

#[test]
fn two_species_tracks_the_closed_form() {
    let s = two_species(2e-3, 0.9);
    for point in &s.trajectory {
        let (_, f2) = two_species_oracle(point.t);
        assert!((point.totals[2] - f2).abs() < 5e-3, "t={}: {} vs {f2}", point.t, point.totals[2]);
    }
}

#[test]
fn first_order_convergence_against_a_refined_reference() {
    let p = grain(EdgeDeletion::Population { beta: 2.0 }, 8);
    let specs = grain_initial(&p, 0.2).unwrap();
    let (t, x_max) = (0.05, 0.4);
    let totals = |dt: f64| run(&p, &specs, dt, x_max, t).trajectory.last().unwrap().totals.clone();
    let reference = totals(1e-4 / 4.0);
    let error = |dt: f64| {
        let v = totals(dt);
        v.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let (coarse, fine) = (error(2e-4), error(1e-4));
    assert!(fine > 0.0);
    let order = (coarse / fine).log2();
    assert!((0.7..=1.4).contains(&order), "observed order {order}: {coarse} -> {fine}");
}

#[test]
fn number_with_losses_converges_with_edge_deletion() {
    for e in [
        EdgeDeletion::Population { beta: 2.0 },
        EdgeDeletion::Removal { alpha: 1.27, beta: 2.02 },
    ] {
        let p = grain(e, 15);
        let specs = grain_initial(&p, 0.1).unwrap();
        let t = 0.05;
        let x_max = 0.5 + p.species.max_speed() * t;
        let err = |steps: f64| {
            let s = run(&p, &specs, t / steps, x_max, t);
            s.report.max_number_error / s.report.initial_number
        };
        let (coarse, fine) = (err(250.0), err(500.0));
        assert!(coarse <= 1e-2, "{e:?}: {coarse}");
        let ratio = fine / coarse;
        assert!((0.4..=0.6).contains(&ratio), "{e:?}: ratio {ratio}");
    }
}

#[test]
fn two_species_on_the_aligned_grid() {
    let dt = 1e-2;
    let s = two_species(dt, 1.5);
    for point in &s.trajectory {
        let (f1, f2) = two_species_oracle(point.t);
        // species 2 only changes through the boundary flux, which the exact
        // shift delivers without error; species 1 carries the half cell at
        // the origin
        assert!((point.totals[2] - f2).abs() < 1e-12, "t={}", point.t);
        assert!((point.totals[1] - f1).abs() <= 0.5 * dt * 0.51, "t={}", point.t);
    }
}

#[test]
fn aligned_grid_uses_the_grid_speed() {
    let p = grain(EdgeDeletion::None, 15);
    let c = SolverConfig::aligned(&p, 1e-3, 1.0, 0.1);
    assert!((c.dx - std::f64::consts::PI / 3.0 * 1e-3).abs() < 1e-18);
    assert_eq!(grid_speed(&two_species_counter()), 1.0);
}

#[test]
fn losses_account_for_the_missing_number() {
    let s = two_species(1e-2, 1.5);
    // the half-cell quadrature error at the origin is first order in the step
    assert!(s.report.max_number_error <= 1e-2);
    // only the original species-1 mass has left by t = 1.5; converted
    // particles start at size two
    let last = s.trajectory.last().unwrap();
    assert!((last.losses[1] - 0.5).abs() < 1e-2, "L_1 = {}", last.losses[1]);
}

fn random_field(p: &ModelPreset, masses: &[f64], ends: &[f64], dx: f64) -> DensityField {
    let specs: Vec<DensitySpec> = p
        .species
        .species()
        .zip(masses.iter().zip(ends))
        .map(|(s, (&mass, &end))| DensitySpec {
            species: s,
            shape: if s % 2 == 0 { Shape::Uniform } else { Shape::Triangle },
            support: [0.0, end],
            mass,
        })
        .collect();
    DensityField::from_specs(p, &specs, dx, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flux_identity_and_paths_agree(
        masses in prop::collection::vec(0.01f64..2.0, 9),
        ends in prop::collection::vec(0.1f64..0.9, 9),
        beta in 0.0f64..4.0,
    ) {
        let p = grain(EdgeDeletion::Population { beta }, 10);
        let field = random_field(&p, &masses, &ends, 0.01);
        let totals = compute_totals(&field);
        let ldot = boundary_flux(&field, &p);
        let w = compute_weights(&totals, &ldot, beta, &p, &Thresholds::zero(&p), 0.0).unwrap();
        let generic = compute_flux(&field, &p, &ldot, beta, &w, FluxPath::Generic).unwrap();
        let topological = compute_flux(&field, &p, &ldot, beta, &w, FluxPath::Topological).unwrap();
        prop_assert!(generic.identity_residual() < 1e-12);
        prop_assert!(generic.max_relative_difference(&topological) < 1e-12);
        for (gain, loss) in generic.gain.iter().zip(&generic.loss) {
            prop_assert!(gain.iter().chain(loss).all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn initial_masses_are_exact(
        masses in prop::collection::vec(0.0f64..2.0, 9),
        ends in prop::collection::vec(0.1f64..0.9, 9),
    ) {
        let p = grain(EdgeDeletion::None, 10);
        let field = random_field(&p, &masses, &ends, 0.01);
        let totals = compute_totals(&field);
        for (s, m) in p.species.species().zip(&masses) {
            prop_assert!((totals.per_species[s] - m).abs() <= 1e-12 * m.max(1.0));
        }
    }
}
