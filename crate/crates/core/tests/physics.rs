use qfric_core::dissipators::{build_jump_operators, friction_force, DissipatorSpec, DissipatorTerm};
use qfric_core::doppler::{coherent_profile, doppler_spec, DopplerParams};
use qfric_core::evolve::{evolve, propagate, EvolveOptions, Observable};
use qfric_core::fock::{
    bures_distance, build_mode_operators, coherent_state, fock_state, momentum_gaussian, thermal_state, ModeOperators,
    ModeParams,
};
use qfric_core::linalg::{self, c, matmul, max_abs, CMatrix};
use qfric_core::liouville::Liouvillian;
use qfric_core::nogo::{audit_steady_distance, standard_battery, thermal_defect_scan, BatteryParams};
use qfric_core::nonreciprocal::{build_nr_spec, Coupling, PositionGenerator, TwoModeOperators, TwoModeSystem};
use qfric_core::profile::{FrictionProfile, Shape};
use qfric_core::steady::{steady_state, steady_state_long_time, MethodChoice, SteadyOptions};
use qfric_core::thermo::{
    energy_flow_direct, energy_flow_predicted, stationarity_residuals, Branch, ProfileKind, SweepConfig, ThermalTarget,
    run_sweep,
};

const STEP: f64 = 0.01;

/// Five-point central derivative at the middle of a uniformly sampled series.
fn derivative(series: &[f64], mid: usize) -> f64 {
    let s = series;
    (s[mid - 2] - 8.0 * s[mid - 1] + 8.0 * s[mid + 1] - s[mid + 2]) / (12.0 * STEP)
}

fn fine_run(l: &Liouvillian, rho: &qfric_core::fock::DensityMatrix, obs: &[Observable]) -> Vec<Vec<f64>> {
    let opts = EvolveOptions {
        atol: 1e-13,
        rtol: 1e-12,
        check_positivity: false,
        ..EvolveOptions::default()
    };
    let res = evolve(l, rho, 8.0 * STEP, STEP, obs, &opts).unwrap();
    (0..obs.len()).map(|i| res.series(i).iter().map(|v| v.re).collect()).collect()
}

fn force_operator(spec: &DissipatorSpec, ops: &ModeOperators) -> CMatrix {
    let hbar = ops.params.hbar;
    ops.function_of_p(|p| c(friction_force(spec, hbar, p), 0.0))
}

fn optimal_spec(theta0: f64, d: usize, isotropic: bool) -> (ModeParams, DissipatorSpec) {
    let t = ThermalTarget::new(theta0, ModeParams::unit(d)).unwrap();
    let base = t.optimal_params(Branch::Minus, 0.3, 0.1).unwrap();
    (t.mode, base.spec_with(base.profile(), isotropic))
}

#[test]
fn harmonic_ehrenfest_pair() {
    let (mode, spec) = optimal_spec(0.0, 60, false);
    let ops = build_mode_operators(&mode).unwrap();
    let l = Liouvillian::new(ops.h.clone(), build_jump_operators(&spec, &ops).unwrap(), 1.0).unwrap();
    let rho = coherent_state(&mode, 1.0, 0.5).unwrap();
    let obs = [
        Observable::new("x", ops.x.clone()),
        Observable::new("p", ops.p.clone()),
        Observable::new("f", force_operator(&spec, &ops)),
    ];
    let s = fine_run(&l, &rho, &obs);
    let mid = 4;
    let dx = derivative(&s[0], mid);
    assert!((dx - s[1][mid]).abs() <= 1e-5 * s[1][mid].abs(), "{dx} {}", s[1][mid]);
    let dp = derivative(&s[1], mid);
    let rhs = -s[0][mid] + s[2][mid];
    let scale = s[0][mid].abs() + s[2][mid].abs();
    assert!((dp - rhs).abs() <= 1e-5 * scale, "{dp} {rhs}");
}

#[test]
fn free_particle_momentum_follows_mean_force() {
    let mode = ModeParams::free(1.0, 1.0, 201, 0.05, 0.0);
    let ops = build_mode_operators(&mode).unwrap();
    let prof = FrictionProfile::new(Shape::Exponential { rate: -0.4 }, 0.5).unwrap();
    let spec = DissipatorSpec::new(vec![DissipatorTerm::new(0.2, prof)]);
    let l = Liouvillian::new(ops.h.clone(), build_jump_operators(&spec, &ops).unwrap(), 1.0).unwrap();
    let rho = momentum_gaussian(&mode, 0.8, 0.6).unwrap();
    let obs = [Observable::new("p", ops.p.clone()), Observable::new("f", force_operator(&spec, &ops))];
    let s = fine_run(&l, &rho, &obs);
    let dp = derivative(&s[0], 4);
    assert!((dp - s[1][4]).abs() <= 1e-6 * s[1][4].abs(), "{dp} {}", s[1][4]);
}

#[test]
fn isotropic_even_profile_conserves_momentum() {
    let mode = ModeParams::free(1.0, 1.0, 201, 0.05, 0.0);
    let ops = build_mode_operators(&mode).unwrap();
    let prof = FrictionProfile::new(
        Shape::Lorentzian {
            c1: 1.0,
            c2: 1.5,
            c3: 0.0,
        },
        1.0,
    )
    .unwrap();
    let spec = DissipatorSpec::new(vec![DissipatorTerm::isotropic(0.2, prof)]);
    let l = Liouvillian::new(ops.h.clone(), build_jump_operators(&spec, &ops).unwrap(), 1.0).unwrap();
    let rho = momentum_gaussian(&mode, 0.7, 0.5).unwrap();
    let res = evolve(&l, &rho, 3.0, 0.5, &[Observable::new("p", ops.p.clone())], &EvolveOptions::default()).unwrap();
    let p = res.series(0);
    assert!(p.iter().all(|v| (v.re - p[0].re).abs() <= 1e-8), "{p:?}");
}

#[test]
fn steady_state_is_a_fixed_point() {
    let (mode, spec) = optimal_spec(0.0, 40, false);
    let ops = build_mode_operators(&mode).unwrap();
    let l = Liouvillian::new(ops.h.clone(), build_jump_operators(&spec, &ops).unwrap(), 1.0).unwrap();
    let ss = steady_state(&l, &SteadyOptions::default()).unwrap();
    assert!(ss.converged);
    let later = propagate(&l, ss.state.matrix(), 1.0, 1e-12, 1e-12).unwrap();
    assert!(max_abs(&(later - ss.state.matrix())) <= 1e-6);
}

#[test]
fn stationarity_residual_stays_at_roundoff_as_cutoff_grows() {
    for theta0 in [0.0, 0.5] {
        for d in [30, 45, 60] {
            let t = ThermalTarget::new(theta0, ModeParams::unit(d)).unwrap();
            let ops = build_mode_operators(&t.mode).unwrap();
            for branch in [Branch::Plus, Branch::Minus] {
                let base = t.optimal_params(branch, 0.3, 0.1).unwrap();
                let jumps = build_jump_operators(&base.spec_with(base.profile(), false), &ops).unwrap();
                for chk in stationarity_residuals(&t, &jumps, &ops, &[0.5, 1.0, 2.0]).unwrap() {
                    assert!(chk.value.abs() <= 1e-14, "{theta0} {d} {chk:?}");
                }
            }
        }
    }
}

#[test]
fn energy_flow_sign_law_for_both_branches_and_isotropic_pairs() {
    let t = ThermalTarget::new(0.5, ModeParams::unit(50)).unwrap();
    let ops = build_mode_operators(&t.mode).unwrap();
    for branch in [Branch::Plus, Branch::Minus] {
        let base = t.optimal_params(branch, 0.3, 0.1).unwrap();
        for isotropic in [false, true] {
            let jumps = build_jump_operators(&base.spec_with(base.profile(), isotropic), &ops).unwrap();
            for theta in [0.1, 0.25, 0.4, 0.6, 0.8, 1.0, 1.2] {
                let direct = energy_flow_direct(&jumps, &ops, theta).unwrap();
                let pred = energy_flow_predicted(&t, &base, theta, isotropic);
                assert_eq!(direct.signum(), (0.5 - theta).signum(), "{branch:?} {isotropic} {theta}");
                assert_eq!(pred.signum(), direct.signum());
            }
        }
    }
}

#[test]
fn weak_recoil_nearly_thermalizes_but_never_exactly() {
    let t = ThermalTarget::new(0.0, ModeParams::unit(40)).unwrap();
    let mut cfg = SweepConfig::new(t, vec![0.05, 0.1], vec![0.1], vec![ProfileKind::Exact]);
    cfg.steady.method = MethodChoice::Nullspace;
    for rec in run_sweep(&cfg) {
        assert!(rec.converged, "{rec:?}");
        assert!(rec.ground_population >= 0.99, "{rec:?}");
        assert!(rec.bures > 1e-8, "{rec:?}");
    }
}

#[test]
fn sweep_is_deterministic() {
    let t = ThermalTarget::new(0.0, ModeParams::unit(20)).unwrap();
    let cfg = SweepConfig::new(
        t,
        vec![0.2, 0.5],
        vec![0.1, 0.3],
        vec![ProfileKind::Exact, ProfileKind::Clipped],
    );
    let a = run_sweep(&cfg);
    let b = run_sweep(&cfg);
    assert_eq!(a.len(), 8);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.bures.to_bits(), y.bures.to_bits());
        assert_eq!(x.energy_ss.to_bits(), y.energy_ss.to_bits());
    }
}

#[test]
fn battery_steady_states_stay_away_from_ground() {
    let mode = ModeParams::unit(40);
    let battery = standard_battery(&mode, &BatteryParams::standard()).unwrap();
    for rep in audit_steady_distance(&battery, &mode, &SteadyOptions::default()).unwrap() {
        assert!(rep.verdict, "{rep:?}");
    }
}

#[test]
fn thermal_defect_shrinks_with_recoil() {
    let mode = ModeParams::unit(40);
    let ks = [0.05, 0.1, 0.2, 0.4, 0.8];
    for theta0 in [0.0, 1.0] {
        for branch in [Branch::Plus, Branch::Minus] {
            let d = thermal_defect_scan(&mode, theta0, branch, 0.1, &ks).unwrap();
            assert!(d.iter().all(|v| *v > 0.0));
            assert!(d.windows(2).all(|w| w[1] > w[0]), "{theta0} {branch:?} {d:?}");
        }
    }
}

#[test]
fn steady_distance_ignores_initial_displacement() {
    let mode = ModeParams::unit(24);
    let battery = standard_battery(&mode, &BatteryParams::standard()).unwrap();
    let ops = build_mode_operators(&mode).unwrap();
    let ground = fock_state(&mode, 0).unwrap();
    let l = Liouvillian::new(ops.h.clone(), build_jump_operators(&battery[0].spec, &ops).unwrap(), 1.0).unwrap();
    let opts = SteadyOptions {
        method: MethodChoice::LongTime,
        ..SteadyOptions::default()
    };
    let dists: Vec<f64> = [0.0, 1.0, -1.5]
        .iter()
        .map(|&x0| {
            let init = coherent_state(&mode, x0, 0.0).unwrap();
            let ss = steady_state_long_time(&l, Some(&init), &opts).unwrap();
            bures_distance(&ss.state, &ground).unwrap()
        })
        .collect();
    assert!(dists.iter().all(|d| (d - dists[0]).abs() <= 1e-7), "{dists:?}");
}

fn doppler_liouvillian(kappa: f64, ops: &ModeOperators) -> Liouvillian {
    let dp = DopplerParams::coherent(0.05, 1.0, 1.0, kappa, 1.0, 1.0);
    let mut spec = doppler_spec(&dp, coherent_profile(&dp).unwrap());
    // friction scales like κ·amplitude², so this holds the force scale fixed
    for t in spec.terms.iter_mut() {
        t.profile.amplitude *= (0.2 / kappa).sqrt();
    }
    Liouvillian::new(ops.h.clone(), build_jump_operators(&spec, ops).unwrap(), 1.0).unwrap()
}

#[test]
fn doppler_cools_and_recoil_sets_the_floor() {
    let mode = ModeParams::unit(40);
    let ops = build_mode_operators(&mode).unwrap();
    let hot = thermal_state(&mode, 1.5).unwrap();
    for kappa in [0.1, 0.2] {
        let l = doppler_liouvillian(kappa, &ops);
        let res = evolve(&l, &hot, 2.0, 0.5, &[Observable::new("h", ops.h.clone())], &EvolveOptions::default()).unwrap();
        let e: Vec<f64> = res.series(0).iter().map(|v| v.re).collect();
        assert!(e.windows(2).all(|w| w[1] < w[0]), "{kappa} {e:?}");
    }
    let p2 = matmul(&ops.p, &ops.p);
    let floor: Vec<f64> = [0.1, 0.2, 0.4]
        .iter()
        .map(|&k| {
            let ss = steady_state(&doppler_liouvillian(k, &ops), &SteadyOptions::default()).unwrap();
            assert!(ss.converged);
            ss.state.expect(&p2).re
        })
        .collect();
    assert!(floor.windows(2).all(|w| w[1] > w[0]), "{floor:?}");
}

#[test]
fn controller_first_moments_follow_hamiltonian_motion() {
    let m = ModeParams::unit(12);
    let sys = TwoModeSystem::new(m, m, Coupling::Tanh { strength: 0.25, width: 2.0 }).unwrap();
    let spec = build_nr_spec(&sys, 0.2).unwrap();
    let ops = TwoModeOperators::new(&sys).unwrap();
    let gen = PositionGenerator::new(&ops, &sys.coupling, Some(&spec));
    let rho = linalg::kron(
        coherent_state(&m, 0.6, 0.2).unwrap().matrix(),
        coherent_state(&m, -0.5, 0.1).unwrap().matrix(),
    );
    let x1 = ops.on_controller(&ops.controller.x);
    let p1 = ops.on_controller(&ops.controller.p);
    let obs = [
        Observable::new("x1", gen.to_position(&x1)),
        Observable::new("p1", gen.to_position(&p1)),
    ];
    let start = qfric_core::fock::DensityMatrix::new_unchecked(gen.to_position(&rho));
    let opts = EvolveOptions {
        atol: 1e-13,
        rtol: 1e-12,
        check_positivity: false,
        ..EvolveOptions::default()
    };
    let res = evolve(&gen, &start, 8.0 * STEP, STEP, &obs, &opts).unwrap();
    let x: Vec<f64> = res.series(0).iter().map(|v| v.re).collect();
    let p: Vec<f64> = res.series(1).iter().map(|v| v.re).collect();
    let mid = 4;
    assert!((derivative(&x, mid) - p[mid]).abs() <= 1e-5 * p[mid].abs());
    assert!((derivative(&p, mid) + x[mid]).abs() <= 1e-5 * x[mid].abs());
}
