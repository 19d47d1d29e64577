//! Audits of the no-go results for translationally invariant dissipators.
//!
//! A friction dissipator cannot make an energy eigenstate or a thermal state of a
//! harmonic oscillator exactly stationary. The audits check the operational
//! consequences at finite cutoff: `L[ρ] ≠ 0` on those states and a strictly
//! positive steady-state distance to the ground state.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dissipators::{build_jump_operators, DissipatorSpec};
use crate::doppler::{coherent_profile, doppler_spec, DopplerParams};
use crate::error::{Error, Result};
use crate::fock::{bures_distance, build_mode_operators, fock_state, thermal_state, DensityMatrix, ModeParams};
use crate::linalg::{self, max_abs, trace_product, CMatrix, C64};
use crate::liouville::{Generator, Liouvillian};
use crate::phase_space::{blokhintsev, thermal_widths, wigner, PhaseSpaceGrid, UniformGrid};
use crate::steady::{steady_state, SteadyOptions};
use crate::thermo::{clipped_profile, lorentzian_fit, Branch, ThermalTarget};

/// Relative threshold: a defect counts as nonzero above `EPS_NOGO·scale`.
pub const EPS_NOGO: f64 = 1e-6;

/// Relative size of Wigner values that are indistinguishable from zero.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// Resolution at which a Bures distance counts as strictly positive.
pub const BURES_RESOLUTION: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct BatteryMember {
    pub id: String,
    pub spec: DissipatorSpec,
}

/// Parameters of the standard audit battery.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryParams {
    pub theta0: f64,
    pub kappa_sqrt_beta: f64,
    pub gamma_over_omega: f64,
    pub p_clip: f64,
    pub doppler: DopplerParams,
}

impl BatteryParams {
    pub fn standard() -> Self {
        BatteryParams {
            theta0: 0.0,
            kappa_sqrt_beta: 0.3,
            gamma_over_omega: 0.1,
            p_clip: 0.0,
            doppler: DopplerParams::coherent(0.05, 1.0, 1.0, 0.3, 1.0, 1.0),
        }
    }
}

/// Optimal (both branches), clipped, Lorentzian-fit and coherent Doppler dissipators.
pub fn standard_battery(mode: &ModeParams, bp: &BatteryParams) -> Result<Vec<BatteryMember>> {
    let target = ThermalTarget::new(bp.theta0, *mode)?;
    let kappa = bp.kappa_sqrt_beta / mode.beta().sqrt();
    let gamma = bp.gamma_over_omega * mode.omega;
    let plus = target.optimal_params(Branch::Plus, kappa, gamma)?;
    let minus = target.optimal_params(Branch::Minus, kappa, gamma)?;
    let member = |id: &str, spec| BatteryMember { id: id.into(), spec };
    Ok(vec![
        member("optimal-plus", plus.spec_with(plus.profile(), true)),
        member("optimal-minus", minus.spec_with(minus.profile(), true)),
        member("clipped", minus.spec_with(clipped_profile(&minus, bp.p_clip)?, true)),
        member("lorentzian", minus.spec_with(lorentzian_fit(&minus)?, true)),
        member("doppler-coherent", doppler_spec(&bp.doppler, coherent_profile(&bp.doppler)?)),
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub id: String,
    pub test: String,
    pub defect: f64,
    pub threshold: f64,
    /// Pass iff the defect lies strictly beyond the threshold.
    pub verdict: bool,
}

impl AuditReport {
    fn new(id: &str, test: String, defect: f64, threshold: f64) -> Self {
        AuditReport {
            id: id.into(),
            test,
            defect,
            threshold,
            verdict: defect > threshold && defect > 0.0,
        }
    }
}

fn generator(spec: &DissipatorSpec, mode: &ModeParams) -> Result<Liouvillian> {
    let ops = build_mode_operators(mode)?;
    let jumps = build_jump_operators(spec, &ops)?;
    Liouvillian::new(ops.h.clone(), jumps, mode.hbar)
}

/// `Σ_k Tr[A_k†A_k ρ]`, the total jump rate in `ρ`.
///
/// Operator norms of the truncated `A_k` grow with the cutoff for unbounded
/// profiles, so the state-weighted rate is the scale that keeps verdicts dimensionless.
pub fn jump_rate(l: &Liouvillian, rho: &CMatrix) -> f64 {
    l.jumps()
        .iter()
        .map(|a| trace_product(&linalg::matmul(&a.adjoint(), a), rho).re)
        .sum()
}

/// `‖L[ρ]‖_max` together with the jump rate of `ρ`.
pub fn stationarity_defect(l: &Liouvillian, rho: &CMatrix) -> (f64, f64) {
    (max_abs(&l.apply(rho)), jump_rate(l, rho))
}

/// `‖L[|n⟩⟨n|]‖_max > EPS_NOGO·scale` for every member and `n ≤ n_levels`.
pub fn audit_eigenstate_nonstationarity(
    battery: &[BatteryMember],
    mode: &ModeParams,
    n_levels: usize,
) -> Result<Vec<AuditReport>> {
    let mut out = Vec::new();
    for m in battery {
        let l = generator(&m.spec, mode)?;
        for n in 0..=n_levels.min(mode.cutoff - 1) {
            let rho = fock_state(mode, n)?;
            let (defect, scale) = stationarity_defect(&l, rho.matrix());
            out.push(AuditReport::new(&m.id, alloc::format!("eigenstate-{n}"), defect, EPS_NOGO * scale));
        }
    }
    Ok(out)
}

/// `‖L[ρ_θ]‖_max > EPS_NOGO·scale` for the thermal state at `θ`.
pub fn audit_thermal_nonstationarity(battery: &[BatteryMember], theta: f64, mode: &ModeParams) -> Result<Vec<AuditReport>> {
    let rho = thermal_state(mode, theta)?;
    battery
        .iter()
        .map(|m| {
            let l = generator(&m.spec, mode)?;
            let (defect, scale) = stationarity_defect(&l, rho.matrix());
            Ok(AuditReport::new(&m.id, alloc::format!("thermal-{theta}"), defect, EPS_NOGO * scale))
        })
        .collect()
}

/// Steady-state Bures distance to the ground state, strictly positive at [`BURES_RESOLUTION`].
pub fn audit_steady_distance(battery: &[BatteryMember], mode: &ModeParams, opts: &SteadyOptions) -> Result<Vec<AuditReport>> {
    let ground = fock_state(mode, 0)?;
    battery
        .iter()
        .map(|m| {
            let l = generator(&m.spec, mode)?;
            let ss = steady_state(&l, opts)?;
            let d = bures_distance(&ss.state, &ground)?;
            Ok(AuditReport::new(&m.id, "steady-ground-distance".into(), d, BURES_RESOLUTION))
        })
        .collect()
}

/// Relative thermal defect `‖L[ρ_θ₀]‖/scale` of the optimal profile along a κ scan.
pub fn thermal_defect_scan(
    mode: &ModeParams,
    theta0: f64,
    branch: Branch,
    gamma_over_omega: f64,
    kappa_sqrt_beta: &[f64],
) -> Result<Vec<f64>> {
    let target = ThermalTarget::new(theta0, *mode)?;
    let rho = thermal_state(mode, theta0)?;
    kappa_sqrt_beta
        .iter()
        .map(|&q| {
            let params = target.optimal_params(branch, q / mode.beta().sqrt(), gamma_over_omega * mode.omega)?;
            let l = generator(&params.spec_with(params.profile(), true), mode)?;
            let (defect, scale) = stationarity_defect(&l, rho.matrix());
            Ok(defect / scale)
        })
        .collect()
}

/// Positivity, λ-symmetry and strict-maximum diagnostics of `B_θ(p, λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlokhintsevCriteria {
    pub theta: f64,
    /// Minimum of `Re B` over the grid.
    pub min_value: f64,
    /// Largest `|Im B|`; the criteria presume `B` real.
    pub max_imaginary: f64,
    pub symmetry_defect: f64,
    /// Location `(p, λ)` of the largest value away from the origin.
    pub argmax: (f64, f64),
    /// `B(0,0) - max_{(p,λ)≠(0,0)} Re B`.
    pub margin: f64,
    pub peak: f64,
}

impl BlokhintsevCriteria {
    /// `Re B ≥ 0` up to the Laguerre-sum roundoff floor [`ROUNDOFF_FLOOR`]·peak.
    pub fn positivity(&self) -> bool {
        self.min_value >= -ROUNDOFF_FLOOR * self.peak
    }

    pub fn symmetric(&self, tol: f64) -> bool {
        self.symmetry_defect <= tol
    }

    pub fn strict_maximum(&self) -> bool {
        self.margin > 0.0
    }

    pub fn pass(&self) -> bool {
        self.positivity() && self.symmetric(1e-8) && self.strict_maximum()
    }
}

/// Phase-space grid of `n_sigma` thermal widths and the matching symmetric λ grid.
pub fn blokhintsev_grid(mode: &ModeParams, theta: f64, n_sigma: f64, points: usize) -> (PhaseSpaceGrid, Vec<f64>) {
    let grid = PhaseSpaceGrid::for_thermal(mode, theta, n_sigma, points, points);
    let (sx, _) = thermal_widths(mode, theta);
    let lambdas = UniformGrid::symmetric(n_sigma / sx, points).points();
    (grid, lambdas)
}

pub fn audit_blokhintsev(theta: f64, mode: &ModeParams, grid: &PhaseSpaceGrid, lambdas: &[f64]) -> Result<BlokhintsevCriteria> {
    if !(theta >= 0.0) {
        return Err(Error::param("theta", "must be non-negative"));
    }
    let rho: DensityMatrix = thermal_state(mode, theta)?;
    let w = wigner(&rho, mode, grid)?;
    let b = blokhintsev(&w, grid, lambdas);
    let zero_row = nearest_zero(&grid.p.points());
    let zero_col = nearest_zero(lambdas);
    let nl = lambdas.len();
    let mut crit = BlokhintsevCriteria {
        theta,
        min_value: f64::INFINITY,
        max_imaginary: 0.0,
        symmetry_defect: 0.0,
        argmax: (f64::NAN, f64::NAN),
        margin: f64::NAN,
        peak: b.get(zero_row, zero_col).re,
    };
    let mut best = f64::NEG_INFINITY;
    for i in 0..b.rows {
        for (j, &lambda) in lambdas.iter().enumerate() {
            let v: C64 = b.get(i, j);
            crit.min_value = crit.min_value.min(v.re);
            crit.max_imaginary = crit.max_imaginary.max(v.im.abs());
            // λ grid is symmetric, so column nl-1-j holds -λ_j
            let mirror = b.get(i, nl - 1 - j);
            crit.symmetry_defect = crit.symmetry_defect.max((mirror - v).norm());
            if (i, j) != (zero_row, zero_col) && v.re > best {
                best = v.re;
                crit.argmax = (grid.p.point(i), lambda);
            }
        }
    }
    crit.margin = crit.peak - best;
    Ok(crit)
}

fn nearest_zero(xs: &[f64]) -> usize {
    let mut k = 0;
    for (i, x) in xs.iter().enumerate() {
        if x.abs() < xs[k].abs() {
            k = i;
        }
    }
    k
}
