//! Momentum-space Fokker–Planck limit `∂ϖ/∂t = -∂(Fϖ)/∂p + ∂²(Dϖ)/∂p²`.
//!
//! Finite volumes with Scharfetter–Gummel fluxes: writing the flux as
//! `J = vϖ - D∂ϖ/∂p` with `v = F - D'`, the interface flux is
//! `(D/h)[B(-Pe)ϖ_i - B(Pe)ϖ_{i+1}]`, `B(z) = z/(eᶻ - 1)`, `Pe = vh/D`. The ends are
//! closed (zero flux). Time stepping is Crank–Nicolson, with the step capped so the
//! explicit half stays nonnegative.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dissipators::{build_jump_operators, diffusion, friction_force, DissipatorSpec};
use crate::doppler::{coherent_profile, doppler_spec, DopplerParams};
use crate::error::{Error, Result};
use crate::evolve::{evolve, EvolveOptions, Observable};
use crate::fock::{build_mode_operators, momentum_gaussian, Basis, DensityMatrix, ModeParams};
use crate::linalg;
use crate::liouville::Liouvillian;
use crate::phase_space::UniformGrid;

/// Regime parameter `(ħκ)²/⟨p²⟩` beyond which the comparison is only advisory.
pub const REGIME_LIMIT: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct FPProblem {
    /// Cell centres.
    pub grid: UniformGrid,
    /// `F` at the `len - 1` interior interfaces.
    pub drift: Vec<f64>,
    /// `D ≥ 0` at cell centres.
    pub diffusion: Vec<f64>,
    /// Cell-averaged initial density, `Σ ϖ h = 1`.
    pub initial: Vec<f64>,
    pub advisories: Vec<String>,
}

impl FPProblem {
    pub fn from_functions(
        grid: UniformGrid,
        drift: impl Fn(f64) -> f64,
        diff: impl Fn(f64) -> f64,
        initial: Vec<f64>,
    ) -> Result<Self> {
        if grid.len < 3 || !(grid.step > 0.0) {
            return Err(Error::param("grid", "needs at least three cells of positive width"));
        }
        if initial.len() != grid.len {
            return Err(Error::DimensionMismatch {
                expected: grid.len,
                got: initial.len(),
            });
        }
        let h = grid.step;
        let drift: Vec<f64> = (0..grid.len - 1).map(|i| drift(grid.point(i) + h / 2.0)).collect();
        let diffusion: Vec<f64> = grid.points().into_iter().map(diff).collect();
        if diffusion.iter().chain(&drift).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteProfile { p: f64::NAN });
        }
        assert!(diffusion.iter().all(|d| *d >= 0.0), "diffusion is a sum of squares");
        if initial.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidState {
                reason: "initial density must be nonnegative".into(),
            });
        }
        let mass: f64 = initial.iter().sum::<f64>() * h;
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidState {
                reason: format!("initial density has mass {mass}"),
            });
        }
        Ok(FPProblem {
            grid,
            drift,
            diffusion,
            initial,
            advisories: Vec::new(),
        })
    }

    pub fn moments(&self, rho: &[f64]) -> (f64, f64) {
        let h = self.grid.step;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (i, v) in rho.iter().enumerate() {
            let p = self.grid.point(i);
            m1 += p * v * h;
            m2 += p * p * v * h;
        }
        (m1, m2)
    }
}

/// Largest `κ` magnitude in the spec.
fn max_kappa(spec: &DissipatorSpec) -> f64 {
    spec.terms.iter().map(|t| t.kappa.abs()).fold(0.0, f64::max)
}

/// Drift and diffusion of the dissipator sampled on `grid`.
pub fn build_fp(spec: &DissipatorSpec, hbar: f64, grid: UniformGrid, initial: Vec<f64>) -> Result<FPProblem> {
    spec.validate()?;
    if spec.terms.iter().any(|t| !t.isotropic) {
        return Err(Error::param("spec", "the Fokker–Planck limit needs isotropic terms"));
    }
    let mut prob = FPProblem::from_functions(
        grid,
        |p| friction_force(spec, hbar, p),
        |p| diffusion(spec, hbar, p),
        initial,
    )?;
    let (_, m2) = prob.moments(&prob.initial);
    let k = hbar * max_kappa(spec);
    if m2 > 0.0 && k * k / m2 > REGIME_LIMIT {
        prob.advisories.push(format!(
            "(hbar*kappa)^2/<p^2> = {:.3} is not small; the Fokker-Planck limit is unreliable",
            k * k / m2
        ));
    }
    Ok(prob)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FPSolution {
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub mass_defect: Vec<f64>,
    pub min_density: f64,
    /// Interfaces with cell Péclet number above 2, where the flux is effectively upwinded.
    pub coarse_interfaces: usize,
    pub steps: usize,
}

fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - z / 2.0
    } else {
        z / z.exp_m1()
    }
}

/// Tridiagonal generator `dϖ/dt = Aϖ` as (sub, diag, super).
fn generator(prob: &FPProblem) -> (Vec<f64>, Vec<f64>, Vec<f64>, usize) {
    let n = prob.grid.len;
    let h = prob.grid.step;
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut coarse = 0;
    for i in 0..n - 1 {
        let (d0, d1) = (prob.diffusion[i], prob.diffusion[i + 1]);
        let dm = 0.5 * (d0 + d1);
        let v = prob.drift[i] - (d1 - d0) / h;
        // J = a ϖ_i - b ϖ_{i+1}
        let (a, b) = if dm > 0.0 {
            let pe = v * h / dm;
            if pe.abs() > 2.0 {
                coarse += 1;
            }
            (dm / h * bernoulli(-pe), dm / h * bernoulli(pe))
        } else {
            (v.max(0.0), (-v).max(0.0))
        };
        diag[i] -= a / h;
        sup[i] += b / h;
        sub[i + 1] += a / h;
        diag[i + 1] -= b / h;
    }
    (sub, diag, sup, coarse)
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut b0 = diag[0];
    c[0] = sup[0] / b0;
    rhs[0] /= b0;
    for i in 1..n {
        b0 = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / b0;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / b0;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

pub fn solve_fp(prob: &FPProblem, t_final: f64, dt_save: f64) -> Result<FPSolution> {
    if !(t_final >= 0.0) || !(dt_save > 0.0) {
        return Err(Error::param("t_final", "need t_final >= 0 and dt_save > 0"));
    }
    let n = prob.grid.len;
    let h = prob.grid.step;
    let (sub, diag, sup, coarse) = generator(prob);
    let rate = diag.iter().fold(0.0f64, |m, d| m.max(-d));
    // 1 + dt/2·A_ii ≥ 0 keeps the explicit half nonnegative
    let dt_max = if rate > 0.0 { 1.9 / rate } else { f64::INFINITY };
    let mut rho = prob.initial.clone();
    let mut sol = FPSolution {
        times: Vec::new(),
        snapshots: Vec::new(),
        mean: Vec::new(),
        second_moment: Vec::new(),
        mass_defect: Vec::new(),
        min_density: f64::INFINITY,
        coarse_interfaces: coarse,
        steps: 0,
    };
    let record = |t: f64, rho: &[f64], sol: &mut FPSolution| {
        let (m1, m2) = prob.moments(rho);
        sol.times.push(t);
        sol.mean.push(m1);
        sol.second_moment.push(m2);
        sol.mass_defect.push((rho.iter().sum::<f64>() * h - 1.0).abs());
        sol.min_density = rho.iter().fold(sol.min_density, |m, v| m.min(*v));
        sol.snapshots.push(rho.to_vec());
    };
    record(0.0, &rho, &mut sol);
    let n_saves = (t_final / dt_save - 1e-9).ceil().max(0.0) as usize;
    let mut t = 0.0;
    let mut cached_dt = f64::NAN;
    let (mut lsub, mut ldiag, mut lsup) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut rhs = vec![0.0; n];
    for k in 1..=n_saves {
        let t_next = (k as f64 * dt_save).min(t_final);
        let span = t_next - t;
        let steps = (span / dt_max).ceil().max(1.0) as usize;
        let dt = span / steps as f64;
        if dt != cached_dt {
            for i in 0..n {
                lsub[i] = -0.5 * dt * sub[i];
                ldiag[i] = 1.0 - 0.5 * dt * diag[i];
                lsup[i] = -0.5 * dt * sup[i];
            }
            cached_dt = dt;
        }
        for _ in 0..steps {
            for i in 0..n {
                let mut v = rho[i] * (1.0 + 0.5 * dt * diag[i]);
                if i > 0 {
                    v += 0.5 * dt * sub[i] * rho[i - 1];
                }
                if i + 1 < n {
                    v += 0.5 * dt * sup[i] * rho[i + 1];
                }
                rhs[i] = v;
            }
            thomas(&lsub, &ldiag, &lsup, &mut rhs);
            rho.copy_from_slice(&rhs);
            sol.steps += 1;
        }
        t = t_next;
        record(t, &rho, &mut sol);
    }
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    pub quantum_mean: Vec<f64>,
    pub quantum_second: Vec<f64>,
    pub fp_mean: Vec<f64>,
    pub fp_second: Vec<f64>,
    /// `max_t max(|Δ⟨p⟩|/√⟨p²⟩, |Δ⟨p²⟩|/⟨p²⟩)` with quantum reference moments.
    pub discrepancy: f64,
    pub regime_parameter: f64,
    pub out_of_regime: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonOptions {
    /// Odd number of Fokker–Planck cells per quantum grid spacing.
    pub refinement: usize,
    pub n_saves: usize,
    pub evolve: EvolveOptions,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        ComparisonOptions {
            refinement: 5,
            n_saves: 20,
            evolve: EvolveOptions {
                check_positivity: false,
                ..EvolveOptions::default()
            },
        }
    }
}

/// Evolves `ρ₀` on a momentum grid and the matching Fokker–Planck density side by side.
///
/// The Fokker–Planck grid refines the quantum one with quantum grid points at cell
/// centres; each quantum population starts in its own cell, so the initial
/// moments agree exactly.
pub fn compare_quantum_fp(
    spec: &DissipatorSpec,
    params: &ModeParams,
    rho0: &DensityMatrix,
    t_final: f64,
    opts: &ComparisonOptions,
) -> Result<ComparisonReport> {
    let Basis::MomentumGrid { spacing, .. } = params.basis else {
        return Err(Error::UnsupportedBasis {
            reason: "the comparison runs on a momentum grid".into(),
        });
    };
    let r = opts.refinement.max(1) | 1;
    let ops = build_mode_operators(params)?;
    let ps = params.grid_momenta().unwrap_or_default();
    let jumps = build_jump_operators(spec, &ops)?;
    let l = Liouvillian::new(ops.h.clone(), jumps, params.hbar)?;
    let dt_save = if t_final > 0.0 { t_final / opts.n_saves.max(1) as f64 } else { 1.0 };
    let obs = [
        Observable::new("p", ops.p.clone()),
        Observable::new("p2", linalg::matmul(&ops.p, &ops.p)),
    ];
    let mut eo = opts.evolve.clone();
    eo.guard = params.guard_indices();
    let q = evolve(&l, rho0, t_final, dt_save, &obs, &eo)?;

    let h = spacing / r as f64;
    let half = (r / 2) as f64;
    let grid = UniformGrid {
        start: ps[0] - half * h,
        step: h,
        len: ps.len() * r,
    };
    let mut initial = vec![0.0; grid.len];
    for (j, _) in ps.iter().enumerate() {
        initial[j * r + r / 2] = rho0.matrix()[(j, j)].re / h;
    }
    let total: f64 = initial.iter().sum::<f64>() * h;
    initial.iter_mut().for_each(|v| *v /= total);
    let prob = build_fp(spec, params.hbar, grid, initial)?;
    let fp = solve_fp(&prob, t_final, dt_save)?;

    let quantum_mean: Vec<f64> = q.series(0).iter().map(|v| v.re).collect();
    let quantum_second: Vec<f64> = q.series(1).iter().map(|v| v.re).collect();
    let mut discrepancy: f64 = 0.0;
    for i in 0..quantum_mean.len().min(fp.mean.len()) {
        let p2 = quantum_second[i];
        if p2 > 0.0 {
            discrepancy = discrepancy
                .max((quantum_mean[i] - fp.mean[i]).abs() / p2.sqrt())
                .max((quantum_second[i] - fp.second_moment[i]).abs() / p2);
        }
    }
    let k = params.hbar * max_kappa(spec);
    let regime_parameter = if quantum_second[0] > 0.0 { k * k / quantum_second[0] } else { 0.0 };
    Ok(ComparisonReport {
        times: q.times(),
        quantum_mean,
        quantum_second,
        fp_mean: fp.mean,
        fp_second: fp.second_moment,
        discrepancy,
        regime_parameter,
        out_of_regime: regime_parameter > REGIME_LIMIT * (1.0 + 1e-9),
    })
}

/// A free atom cooled by a coherent Doppler pair, with the recoil `ħκ` set by the
/// regime parameter at fixed initial `⟨p²⟩`.
///
/// Detuning and linewidth scale with `κ`, so the friction force keeps its shape in
/// `p` while the diffusion shrinks like `κ`. The line is two initial widths broad in
/// momentum, smooth on the recoil scale. The momentum grid spacing equals `ħκ`,
/// which makes every recoil an exact grid shift.
#[derive(Debug, Clone)]
pub struct RegimeScenario {
    pub spec: DissipatorSpec,
    pub params: ModeParams,
    pub rho0: DensityMatrix,
    pub t_final: f64,
}

pub fn regime_scenario(regime: f64) -> Result<RegimeScenario> {
    regime_scenario_with(regime, 3.0, 2.0, 2.0, 3.0)
}

/// [`regime_scenario`] with the detuning and linewidth given in momentum units
/// (`mΔ/κ` and `mγ/κ`), the Rabi scale `ξ` and the run time.
pub fn regime_scenario_with(regime: f64, detuning_p: f64, linewidth_p: f64, xi: f64, t_final: f64) -> Result<RegimeScenario> {
    if !(regime > 0.0) || !regime.is_finite() {
        return Err(Error::param("regime", "must be positive"));
    }
    let (hbar, mass) = (1.0, 1.0);
    let (mean, sigma) = (0.5, 1.0);
    let p2 = mean * mean + sigma * sigma;
    let kappa = (regime * p2).sqrt() / hbar;
    let dp = DopplerParams::coherent(xi, detuning_p * kappa / mass, linewidth_p * kappa / mass, kappa, mass, hbar);
    let spec = doppler_spec(&dp, coherent_profile(&dp)?);
    let spacing = hbar * kappa;
    let half_points = ((mean.abs() + 6.0 * sigma) / spacing).ceil() as usize;
    let params = ModeParams::free(mass, hbar, 2 * half_points + 1, spacing, 0.0);
    let rho0 = momentum_gaussian(&params, mean, sigma)?;
    Ok(RegimeScenario {
        spec,
        params,
        rho0,
        t_final,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipators::DissipatorTerm;
    use crate::profile::FrictionProfile;

    fn gaussian(grid: &UniformGrid, mean: f64, sigma: f64) -> Vec<f64> {
        let mut v: Vec<f64> = grid
            .points()
            .iter()
            .map(|p| (-(p - mean) * (p - mean) / (2.0 * sigma * sigma)).exp())
            .collect();
        let s: f64 = v.iter().sum::<f64>() * grid.step;
        v.iter_mut().for_each(|x| *x /= s);
        v
    }

    #[test]
    fn heat_kernel_variance_growth() {
        let grid = UniformGrid::symmetric(12.0, 801);
        let init = gaussian(&grid, 0.0, 1.0);
        let prob = FPProblem::from_functions(grid, |_| 0.0, |_| 0.3, init).unwrap();
        let sol = solve_fp(&prob, 2.0, 0.5).unwrap();
        let v0 = sol.second_moment[0];
        for (t, m2) in sol.times.iter().zip(&sol.second_moment) {
            let exact = v0 + 2.0 * 0.3 * t;
            assert!((m2 - exact).abs() < 5e-3 * exact);
        }
        assert!(sol.mass_defect.iter().all(|d| *d < 1e-6));
        assert!(sol.min_density >= -1e-10);
    }

    #[test]
    fn ornstein_uhlenbeck_fixed_point() {
        let grid = UniformGrid::symmetric(8.0, 401);
        let init = gaussian(&grid, 1.0, 0.5);
        let (gp, d) = (0.8, 0.4);
        let prob = FPProblem::from_functions(grid, |p| -gp * p, |_| d, init).unwrap();
        let sol = solve_fp(&prob, 20.0, 5.0).unwrap();
        let var = sol.second_moment.last().unwrap() - sol.mean.last().unwrap().powi(2);
        assert!((var - d / gp).abs() < 0.01 * d / gp, "{var}");
    }

    #[test]
    fn constant_profile_coefficients_and_frozen_density() {
        let spec = DissipatorSpec::new(alloc::vec![DissipatorTerm::isotropic(0.4, FrictionProfile::constant(0.5))]);
        let grid = UniformGrid::symmetric(5.0, 101);
        let prob = build_fp(&spec, 1.0, grid, gaussian(&grid, 0.0, 1.0)).unwrap();
        assert!(prob.drift.iter().all(|f| f.abs() < 1e-15));
        assert!(prob.diffusion.iter().all(|d| (d - 0.16 * 0.25).abs() < 1e-15));
        let empty = build_fp(&DissipatorSpec::empty(), 1.0, grid, gaussian(&grid, 0.0, 1.0)).unwrap();
        let sol = solve_fp(&empty, 3.0, 1.0).unwrap();
        assert_eq!(sol.snapshots[0], *sol.snapshots.last().unwrap());
    }

    #[test]
    fn moment_equations_hold_for_discrete_solution() {
        let dp = DopplerParams::coherent(1.0, 0.6, 0.4, 0.4, 1.0, 1.0);
        let spec = doppler_spec(&dp, coherent_profile(&dp).unwrap());
        let grid = UniformGrid::symmetric(8.0, 1601);
        let prob = build_fp(&spec, 1.0, grid, gaussian(&grid, 0.5, 1.0)).unwrap();
        let dt = 1e-3;
        let sol = solve_fp(&prob, 2.0 * dt, dt).unwrap();
        let rho = &sol.snapshots[1];
        let (mut f_avg, mut pf, mut d_avg) = (0.0, 0.0, 0.0);
        for (i, v) in rho.iter().enumerate() {
            let p = grid.point(i);
            let f = friction_force(&spec, 1.0, p);
            f_avg += f * v * grid.step;
            pf += p * f * v * grid.step;
            d_avg += diffusion(&spec, 1.0, p) * v * grid.step;
        }
        let dm1 = (sol.mean[2] - sol.mean[0]) / (2.0 * dt);
        let dm2 = (sol.second_moment[2] - sol.second_moment[0]) / (2.0 * dt);
        assert!((dm1 - f_avg).abs() < 1e-4 * f_avg.abs(), "{dm1} {f_avg}");
        let rhs2 = 2.0 * pf + 2.0 * d_avg;
        assert!((dm2 - rhs2).abs() < 1e-4 * rhs2.abs().max(d_avg), "{dm2} {rhs2}");
    }

    #[test]
    fn doppler_drift_damps_near_zero() {
        let dp = DopplerParams::coherent(0.1, 3.0, 1.0, 1.0, 1.0, 1.0);
        let spec = doppler_spec(&dp, coherent_profile(&dp).unwrap());
        let grid = UniformGrid::symmetric(1.0, 21);
        let prob = build_fp(&spec, 1.0, grid, gaussian(&grid, 0.0, 0.3)).unwrap();
        for (i, f) in prob.drift.iter().enumerate() {
            let p = grid.point(i) + grid.step / 2.0;
            assert!(f * p < 0.0);
        }
    }

    #[test]
    fn zero_spec_comparison_is_exact() {
        let sc = regime_scenario(0.05).unwrap();
        let rep = compare_quantum_fp(&DissipatorSpec::empty(), &sc.params, &sc.rho0, 1.0, &ComparisonOptions::default()).unwrap();
        assert!(rep.discrepancy < 1e-12);
        assert_eq!(rep.regime_parameter, 0.0);
    }
}
