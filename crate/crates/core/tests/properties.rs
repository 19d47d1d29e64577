mod common;

use common::{random_spec, random_state, rng};
use proptest::prelude::*;
use qfric_core::dissipators::{build_jump_operators, check_translational_invariance, moment_flows, EPS_TI};
use qfric_core::evolve::{evolve, EvolveOptions};
use qfric_core::fock::{build_mode_operators, bures_distance, thermal_state, ModeParams};
use qfric_core::fokker_planck::{solve_fp, FPProblem};
use qfric_core::linalg::{self, hermiticity_defect, max_abs};
use qfric_core::liouville::{Generator, Liouvillian};
use qfric_core::nonreciprocal::{build_nr_spec, cancellation_report, Coupling, TwoModeSystem};
use qfric_core::phase_space::UniformGrid;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn generator_preserves_trace_and_hermiticity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mode = ModeParams::unit(40);
        let ops = build_mode_operators(&mode).unwrap();
        let spec = random_spec(&mut r, true);
        let jumps = build_jump_operators(&spec, &ops).unwrap();
        let l = Liouvillian::new(ops.h.clone(), jumps, 1.0).unwrap();
        let rho = random_state(&mut r, 40, 40, 3);
        let lr = l.apply(rho.matrix());
        let scale = max_abs(&lr).max(1.0);
        prop_assert!(linalg::trace(&lr).norm() <= 1e-10 * scale);
        prop_assert!(hermiticity_defect(&lr) <= 1e-10 * scale);
    }

    #[test]
    fn bures_triangle_inequality(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_state(&mut r, 8, 8, 2);
        let b = random_state(&mut r, 8, 8, 3);
        let c = random_state(&mut r, 8, 8, 1);
        let ab = bures_distance(&a, &b).unwrap();
        let bc = bures_distance(&b, &c).unwrap();
        let ac = bures_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-6);
        prop_assert!(bures_distance(&a, &a).unwrap() < 1e-6);
    }

    #[test]
    fn moment_flows_match_direct_traces(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mode = ModeParams::unit(60);
        let ops = build_mode_operators(&mode).unwrap();
        let spec = random_spec(&mut r, false);
        let rho = random_state(&mut r, 60, 12, 2);
        let f = moment_flows(&spec, &ops, &rho).unwrap();
        // constant profiles have vanishing x̂² flow, hence the absolute floor
        prop_assert!((f.p2_analytic - f.p2_direct).abs() <= 1e-6 * f.p2_analytic.abs() + 1e-14, "{f:?}");
        prop_assert!((f.x2_analytic - f.x2_direct).abs() <= 1e-6 * f.x2_analytic.abs() + 1e-14, "{f:?}");
    }

    #[test]
    fn random_specs_are_translation_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mode = ModeParams::unit(60);
        let ops = build_mode_operators(&mode).unwrap();
        let spec = random_spec(&mut r, true);
        let jumps = build_jump_operators(&spec, &ops).unwrap();
        let states: Vec<_> = (0..2).map(|_| random_state(&mut r, 60, 12, 2)).collect();
        let rep = check_translational_invariance(&jumps, &ops, &states, EPS_TI);
        prop_assert!(rep.pass(), "{:?}", rep.worst_relative());
    }

    #[test]
    fn nonreciprocal_cancellation_for_any_tanh(g in -2.0..2.0f64, w in 0.2..3.0f64, k in 0.05..2.0f64) {
        let m = ModeParams::unit(4);
        let sys = TwoModeSystem::new(m, m, Coupling::Tanh { strength: g, width: w }).unwrap();
        let spec = build_nr_spec(&sys, k).unwrap();
        let xs: Vec<f64> = (0..=200).map(|i| -10.0 + 0.1 * i as f64).collect();
        let rep = cancellation_report(&spec, &xs);
        let scale = 1.0 + g.abs();
        prop_assert!(rep.max_force <= 1e-10 * scale);
        prop_assert!(rep.max_diffusion_defect <= 1e-10 * scale);
        prop_assert!((rep.diffusion - 0.5 * k * g.abs()).abs() <= 1e-10 * scale);
    }

    #[test]
    fn fokker_planck_conserves_mass_and_positivity(seed in any::<u64>()) {
        let mut r = rng(seed);
        use rand::Rng;
        let grid = UniformGrid::symmetric(8.0, 161);
        let gamma = r.gen_range(0.1..1.0);
        let d0 = r.gen_range(0.05..0.5);
        let mean = r.gen_range(-2.0..2.0);
        let raw: Vec<f64> = grid.points().iter().map(|p| (-(p - mean) * (p - mean)).exp()).collect();
        let total: f64 = raw.iter().sum::<f64>() * grid.step;
        let init = raw.iter().map(|v| v / total).collect();
        let prob = FPProblem::from_functions(grid, |p| -gamma * p, |_| d0, init).unwrap();
        let sol = solve_fp(&prob, 2.0, 0.5).unwrap();
        prop_assert!(sol.mass_defect.iter().all(|d| d.abs() <= 1e-8));
        prop_assert!(sol.min_density >= -1e-12);
    }
}

proptest! {
    #![proptest_config(config(6))]

    #[test]
    fn evolution_keeps_states_positive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mode = ModeParams::unit(40);
        let ops = build_mode_operators(&mode).unwrap();
        let spec = random_spec(&mut r, true);
        let jumps = build_jump_operators(&spec, &ops).unwrap();
        let l = Liouvillian::new(ops.h.clone(), jumps, 1.0).unwrap();
        let rho = random_state(&mut r, 40, 8, 2);
        let opts = EvolveOptions { fatal_truncation: false, ..EvolveOptions::default() };
        let res = evolve(&l, &rho, 1.0, 0.25, &[], &opts).unwrap();
        prop_assert!(res.min_eigenvalue().unwrap() >= -1e-6);
        prop_assert!(res.max_trace_defect() <= 1e-8);
    }
}

#[test]
fn thermal_entropy_grows_with_temperature() {
    let mode = ModeParams::unit(80);
    let entropy = |theta: f64| {
        let rho = thermal_state(&mode, theta).unwrap();
        (0..80)
            .map(|n| rho.matrix()[(n, n)].re)
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum::<f64>()
    };
    let thetas = [0.0, 0.1, 0.5, 1.0, 2.0, 3.0, 5.0];
    let s: Vec<f64> = thetas.iter().map(|&t| entropy(t)).collect();
    assert!(s.windows(2).all(|w| w[1] >= w[0]), "{s:?}");
}
