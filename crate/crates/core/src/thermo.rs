//! Optimal thermalization of a harmonic mode with exponential friction profiles.
//!
//! For a target temperature `θ₀` with `r₀ = tanh(ħω/2θ₀)`, the profiles
//! `f̃(p) = c·exp(βħλ p)` with `λ± = (κ/r₀)(1 ± √(1-r₀²))` leave the Boltzmann
//! weights of the target unchanged to first order. Their energy flow out of a
//! thermal state at `θ` has the sign of `θ₀ - θ`.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dissipators::{build_jump_operators, DissipatorSpec, DissipatorTerm};
use crate::error::{Error, Result};
use crate::fock::{
    bures_distance, build_mode_operators, r_of_theta, thermal_state, Basis, ModeOperators, ModeParams,
    EPS_TAIL,
};
use crate::linalg::{self, c, matmul, CMatrix, HermitianEigen};
use crate::liouville::{lindblad_dissipator, Liouvillian};
use crate::profile::{FrictionProfile, Shape};
use crate::steady::{steady_state, SteadyOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branch {
    Plus,
    /// Slower-growing exponent; the default.
    #[default]
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalTarget {
    pub theta0: f64,
    pub mode: ModeParams,
}

impl ThermalTarget {
    pub fn new(theta0: f64, mode: ModeParams) -> Result<Self> {
        mode.validate()?;
        if mode.basis != Basis::Fock {
            return Err(Error::UnsupportedBasis {
                reason: "thermal targets need a harmonic mode".into(),
            });
        }
        if !(theta0 >= 0.0) || !theta0.is_finite() {
            return Err(Error::param("theta0", "must be finite and non-negative"));
        }
        Ok(ThermalTarget { theta0, mode })
    }

    pub fn r0(&self) -> f64 {
        r_of_theta(&self.mode, self.theta0)
    }

    pub fn lambda(&self, kappa: f64, branch: Branch) -> f64 {
        let r0 = self.r0();
        kappa / r0 * (1.0 + branch.sign() * (1.0 - r0 * r0).max(0.0).sqrt())
    }

    /// `γ^en(θ) = 2ωβħ²κλ exp(βħ²λ²/r(θ))`.
    pub fn gamma_en(&self, kappa: f64, branch: Branch, theta: f64) -> f64 {
        let m = &self.mode;
        let beta = m.beta();
        let lam = self.lambda(kappa, branch);
        let h2 = m.hbar * m.hbar;
        2.0 * m.omega * beta * h2 * kappa * lam * (beta * h2 * lam * lam / r_of_theta(m, theta)).exp()
    }

    /// Profile parameters with the amplitude fixed by `c = √Γ ω / √γ^en(θ₀)`.
    pub fn optimal_params(&self, branch: Branch, kappa: f64, gamma: f64) -> Result<OptimalProfileParams> {
        if kappa == 0.0 || !kappa.is_finite() {
            return Err(Error::param("kappa", "must be finite and non-zero"));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::param("gamma", "must be positive"));
        }
        let lambda = self.lambda(kappa, branch);
        let gen = self.gamma_en(kappa, branch, self.theta0);
        let amplitude = gamma.sqrt() * self.mode.omega / gen.sqrt();
        if !amplitude.is_finite() || amplitude <= 0.0 {
            return Err(Error::NonFiniteProfile { p: 0.0 });
        }
        let params = OptimalProfileParams {
            branch,
            kappa,
            amplitude,
            lambda,
            beta: self.mode.beta(),
            hbar: self.mode.hbar,
        };
        // largest eigenvalue of the truncated p̂ is below √(mħω(2D+1))
        let m = &self.mode;
        let p_max = (m.mass * m.hbar * m.omega * (2.0 * m.cutoff as f64 + 1.0)).sqrt();
        if params.rate().abs() * p_max + amplitude.ln() > 700.0 {
            return Err(Error::NonFiniteProfile { p: p_max });
        }
        Ok(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalProfileParams {
    pub branch: Branch,
    pub kappa: f64,
    pub amplitude: f64,
    pub lambda: f64,
    pub beta: f64,
    pub hbar: f64,
}

impl OptimalProfileParams {
    /// Exponential rate `βħλ` of the profile.
    pub fn rate(&self) -> f64 {
        self.beta * self.hbar * self.lambda
    }

    pub fn profile(&self) -> FrictionProfile {
        FrictionProfile {
            shape: Shape::Exponential { rate: self.rate() },
            amplitude: self.amplitude,
            phase: None,
        }
    }

    /// Isotropic dissipator built from `profile`.
    pub fn spec_with(&self, profile: FrictionProfile, isotropic: bool) -> DissipatorSpec {
        let term = if isotropic {
            DissipatorTerm::isotropic(self.kappa, profile)
        } else {
            DissipatorTerm::new(self.kappa, profile)
        };
        DissipatorSpec::new(alloc::vec![term])
    }
}

pub fn optimal_profile(target: &ThermalTarget, branch: Branch, kappa: f64, gamma: f64) -> Result<FrictionProfile> {
    Ok(target.optimal_params(branch, kappa, gamma)?.profile())
}

/// The exact profile with its tail `κp < -p_clip` removed.
pub fn clipped_profile(base: &OptimalProfileParams, p_clip: f64) -> Result<FrictionProfile> {
    if !(p_clip >= 0.0) {
        return Err(Error::param("p_clip", "must be non-negative"));
    }
    FrictionProfile::new(
        Shape::ClippedExponential {
            rate: base.rate(),
            kappa: base.kappa,
            p_clip,
        },
        base.amplitude,
    )
}

/// Value, first and second derivative at `p = 0` of `c1 (p-c3)/(c2² + (p-c3)²)`.
pub fn lorentzian_derivatives(c1: f64, c2: f64, c3: f64) -> [f64; 3] {
    let y = -c3;
    let s = c2 * c2 + y * y;
    let g = c1 * y / s;
    let g1 = c1 * (c2 * c2 - y * y) / (s * s);
    let g2 = c1 * 2.0 * y * (y * y - 3.0 * c2 * c2) / (s * s * s);
    [g, g1, g2]
}

/// Coefficients `(c1, c2, c3)` whose rational profile matches `f(0), f'(0), f''(0)`.
///
/// With `w = y₀²/(c2² + y₀²)` and `y₀ = -c3`, the log-derivative ratio
/// `R = (ln f)''/((ln f)')²` obeys `4(R-1)w² + (2-4R)w + (R+1) = 0`. Falls back to
/// Newton iteration from several starts when no admissible root exists.
pub fn fit_lorentzian(f0: f64, f1: f64, f2: f64) -> Result<(f64, f64, f64)> {
    if f0 == 0.0 || f1 == 0.0 || ![f0, f1, f2].iter().all(|v| v.is_finite()) {
        return Err(Error::NoRealSolution {
            reason: "needs a non-zero value and slope at p = 0".into(),
        });
    }
    let l1 = f1 / f0;
    let l2 = f2 / f0 - l1 * l1;
    let r = l2 / (l1 * l1);
    let (qa, qb, qc) = (4.0 * (r - 1.0), 2.0 - 4.0 * r, r + 1.0);
    let mut roots = Vec::new();
    if qa.abs() < 1e-14 {
        roots.push(-qc / qb);
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            roots.push((-qb + sq) / (2.0 * qa));
            roots.push((-qb - sq) / (2.0 * qa));
        }
    }
    let golden = (1.0 + 5.0f64.sqrt()) / 4.0;
    roots.retain(|w| *w > 0.0 && *w < 1.0 && (w - 0.5).abs() > 1e-12);
    roots.sort_by(|a, b| (a - golden).abs().total_cmp(&(b - golden).abs()));
    if let Some(&w) = roots.first() {
        let y0 = (1.0 - 2.0 * w) / l1;
        let s = y0 * y0 / w;
        let c2 = (s - y0 * y0).sqrt();
        return Ok((f0 * s / y0, c2, -y0));
    }
    newton_fit(f0, f1, f2)
}

fn newton_fit(f0: f64, f1: f64, f2: f64) -> Result<(f64, f64, f64)> {
    let target = [f0, f1, f2];
    let scale = f0.abs().max(f1.abs()).max(f2.abs());
    let l1 = f1 / f0;
    let starts = [(-1.0, 1.0), (1.0, 1.0), (-0.5, 2.0), (0.5, 0.5), (-2.0, 0.5), (2.0, 2.0)];
    for &(y_fac, c2_fac) in &starts {
        let y0 = y_fac / l1.abs();
        let mut v = [0.0, c2_fac / l1.abs(), -y0];
        v[0] = f0 * (v[1] * v[1] + y0 * y0) / y0;
        for _ in 0..100 {
            let g = lorentzian_derivatives(v[0], v[1], v[2]);
            let res: [f64; 3] = core::array::from_fn(|i| g[i] - target[i]);
            if res.iter().all(|r| r.abs() <= 1e-13 * scale) {
                return Ok((v[0], v[1].abs(), v[2]));
            }
            let mut jac = [[0.0; 3]; 3];
            for k in 0..3 {
                let h = 1e-7 * v[k].abs().max(1e-7);
                let mut vp = v;
                vp[k] += h;
                let mut vm = v;
                vm[k] -= h;
                let (gp, gm) = (lorentzian_derivatives(vp[0], vp[1], vp[2]), lorentzian_derivatives(vm[0], vm[1], vm[2]));
                for i in 0..3 {
                    jac[i][k] = (gp[i] - gm[i]) / (2.0 * h);
                }
            }
            let Some(step) = solve3(jac, res) else { break };
            for k in 0..3 {
                v[k] -= step[k];
            }
            if !v.iter().all(|x| x.is_finite()) || v[1] == 0.0 {
                break;
            }
        }
    }
    Err(Error::NoRealSolution {
        reason: "no rational profile matches the first three derivatives".into(),
    })
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let m = nalgebra::Matrix3::from_fn(|i, j| a[i][j]);
    m.lu().solve(&nalgebra::Vector3::from(b)).map(|v| [v[0], v[1], v[2]])
}

/// Rational profile matching the exact profile to second order at `p = 0`.
pub fn lorentzian_fit(base: &OptimalProfileParams) -> Result<FrictionProfile> {
    let a = base.rate();
    let f0 = base.amplitude;
    let (c1, c2, c3) = fit_lorentzian(f0, f0 * a, f0 * a * a)?;
    // The amplitude field must be non-negative, so any sign lives in c1.
    FrictionProfile::new(Shape::Lorentzian { c1, c2, c3 }, 1.0)
}

/// `Tr[Ĥ D[ρ_θ]]`, the energy flow of the dissipator out of the thermal state at `θ`.
pub fn energy_flow_direct(jumps: &[CMatrix], ops: &ModeOperators, theta: f64) -> Result<f64> {
    let rho = thermal_state(&ops.params, theta)?;
    Ok(linalg::trace_product(&ops.h, &lindblad_dissipator(jumps, rho.matrix())).re)
}

/// `(c²/ω) γ^en(θ) (r(θ) - r₀)/r₀ · Tr[Ĥρ_θ]`, doubled for an isotropic pair.
///
/// The `1/r₀` factor is absent from the usual statement of this law, which is
/// exact only for `θ₀ = 0`; the direct trace requires it for any target.
pub fn energy_flow_predicted(target: &ThermalTarget, base: &OptimalProfileParams, theta: f64, isotropic: bool) -> f64 {
    let m = &target.mode;
    let r0 = target.r0();
    let e_theta = crate::fock::thermal_energy(m, theta);
    let single = base.amplitude * base.amplitude / m.omega
        * target.gamma_en(base.kappa, base.branch, theta)
        * (r_of_theta(m, theta) - r0)
        / r0
        * e_theta;
    if isotropic {
        2.0 * single
    } else {
        single
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityCheck {
    pub alpha: f64,
    /// `Tr[ρ_θ₀ L^T[exp(-αĤ)]]`.
    pub value: f64,
    /// Sum of the magnitudes of the individual sandwich and decay terms.
    pub scale: f64,
}

impl StationarityCheck {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.value.abs() / self.scale
        } else {
            self.value.abs()
        }
    }
}

/// First-order stationarity of the Boltzmann weights under the dissipator.
pub fn stationarity_residuals(
    target: &ThermalTarget,
    jumps: &[CMatrix],
    ops: &ModeOperators,
    alphas: &[f64],
) -> Result<Vec<StationarityCheck>> {
    let rho = thermal_state(&target.mode, target.theta0)?;
    let rho = rho.matrix();
    let d_rho = lindblad_dissipator(jumps, rho);
    let eig = HermitianEigen::new(&ops.h);
    let pieces: Vec<(CMatrix, CMatrix)> = jumps
        .iter()
        .map(|a| {
            let ad = a.adjoint();
            (matmul(&matmul(a, rho), &ad), matmul(&matmul(&ad, a), rho))
        })
        .collect();
    Ok(alphas
        .iter()
        .map(|&alpha| {
            let o = eig.map(|e| c((-alpha * e).exp(), 0.0));
            let value = linalg::trace_product(&o, &d_rho).re;
            let scale = pieces
                .iter()
                .map(|(s, dk)| linalg::trace_product(&o, s).norm() + linalg::trace_product(&o, dk).norm())
                .sum();
            StationarityCheck { alpha, value, scale }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProfileKind {
    Exact,
    Clipped,
    Lorentzian,
}

impl ProfileKind {
    pub const ALL: [ProfileKind; 3] = [ProfileKind::Exact, ProfileKind::Clipped, ProfileKind::Lorentzian];

    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::Exact => "exact",
            ProfileKind::Clipped => "clipped",
            ProfileKind::Lorentzian => "lorentzian",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub target: ThermalTarget,
    pub branch: Branch,
    /// Values of `κ√β`.
    pub kappa_sqrt_beta: Vec<f64>,
    /// Values of `Γ/ω`.
    pub gamma_over_omega: Vec<f64>,
    pub kinds: Vec<ProfileKind>,
    pub p_clip: f64,
    pub isotropic: bool,
    pub steady: SteadyOptions,
}

impl SweepConfig {
    pub fn new(target: ThermalTarget, kappa_sqrt_beta: Vec<f64>, gamma_over_omega: Vec<f64>, kinds: Vec<ProfileKind>) -> Self {
        SweepConfig {
            target,
            branch: Branch::Minus,
            kappa_sqrt_beta,
            gamma_over_omega,
            kinds,
            p_clip: 0.0,
            isotropic: true,
            steady: SteadyOptions::default(),
        }
    }

    /// Grid points ordered by kind, then `Γ`, then `κ`.
    pub fn points(&self) -> Vec<(ProfileKind, f64, f64)> {
        let mut kinds = self.kinds.clone();
        kinds.sort();
        kinds.dedup();
        let mut out = Vec::new();
        for &k in &kinds {
            for &g in &self.gamma_over_omega {
                for &q in &self.kappa_sqrt_beta {
                    out.push((k, g, q));
                }
            }
        }
        out
    }
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub kind: ProfileKind,
    pub kappa_sqrt_beta: f64,
    pub gamma_over_omega: f64,
    /// NaN when the point failed.
    pub bures: f64,
    pub energy_ss: f64,
    pub residual: f64,
    pub trunc_flag: bool,
    pub converged: bool,
    pub degenerate: bool,
    pub ground_population: f64,
    pub error: Option<String>,
}

/// One steady-state solve; failures are recorded rather than propagated.
pub fn solve_point(cfg: &SweepConfig, kind: ProfileKind, gamma_over_omega: f64, kappa_sqrt_beta: f64) -> SweepRecord {
    let mut rec = SweepRecord {
        kind,
        kappa_sqrt_beta,
        gamma_over_omega,
        bures: f64::NAN,
        energy_ss: f64::NAN,
        residual: f64::NAN,
        trunc_flag: false,
        converged: false,
        degenerate: false,
        ground_population: f64::NAN,
        error: None,
    };
    if let Err(e) = fill_point(cfg, &mut rec) {
        rec.error = Some(alloc::format!("{e}"));
    }
    rec
}

fn fill_point(cfg: &SweepConfig, rec: &mut SweepRecord) -> Result<()> {
    let target = &cfg.target;
    let mode = &target.mode;
    let kappa = rec.kappa_sqrt_beta / mode.beta().sqrt();
    let gamma = rec.gamma_over_omega * mode.omega;
    let base = target.optimal_params(cfg.branch, kappa, gamma)?;
    let profile = match rec.kind {
        ProfileKind::Exact => base.profile(),
        ProfileKind::Clipped => clipped_profile(&base, cfg.p_clip)?,
        ProfileKind::Lorentzian => lorentzian_fit(&base)?,
    };
    let ops = build_mode_operators(mode)?;
    let jumps = build_jump_operators(&base.spec_with(profile, cfg.isotropic), &ops)?;
    let l = Liouvillian::new(ops.h.clone(), jumps, mode.hbar)?;
    let ss = steady_state(&l, &cfg.steady)?;
    let reference = thermal_state(mode, target.theta0)?;
    rec.bures = bures_distance(&ss.state, &reference)?;
    rec.energy_ss = ss.state.expect(&ops.h).re;
    rec.residual = ss.residual;
    rec.converged = ss.converged && !ss.degenerate;
    rec.degenerate = ss.degenerate;
    rec.trunc_flag = ss.state.population(&mode.guard_indices()) > EPS_TAIL;
    rec.ground_population = ss.state.matrix()[(0, 0)].re;
    Ok(())
}

/// Sequential sweep in [`SweepConfig::points`] order.
pub fn run_sweep(cfg: &SweepConfig) -> Vec<SweepRecord> {
    cfg.points()
        .into_iter()
        .map(|(k, g, q)| solve_point(cfg, k, g, q))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn target(theta0: f64, d: usize) -> ThermalTarget {
        ThermalTarget::new(theta0, ModeParams::unit(d)).unwrap()
    }

    #[test]
    fn lambda_examples() {
        let t = target(0.0, 20);
        assert_eq!(t.lambda(0.4, Branch::Plus), 0.4);
        assert_eq!(t.lambda(0.4, Branch::Minus), 0.4);
        let t = target(0.5, 20);
        assert!((t.r0() - 0.761594).abs() < 1e-6);
        let k = 0.3;
        assert!((t.lambda(k, Branch::Plus) - k / 0.761594 * 1.648054).abs() < 1e-6);
        assert!((t.lambda(k, Branch::Minus) - k / 0.761594 * 0.351946).abs() < 1e-6);
    }

    #[test]
    fn lorentzian_matches_three_derivatives() {
        let t = target(0.0, 30);
        for &k in &[0.05, 0.3, 1.0, -0.7] {
            let base = t.optimal_params(Branch::Minus, k, 0.1).unwrap();
            let FrictionProfile {
                shape: Shape::Lorentzian { c1, c2, c3 },
                ..
            } = lorentzian_fit(&base).unwrap()
            else {
                panic!()
            };
            let g = lorentzian_derivatives(c1, c2, c3);
            let a = base.rate();
            let f = [base.amplitude, base.amplitude * a, base.amplitude * a * a];
            for l in 0..3 {
                assert!((g[l] - f[l]).abs() <= 1e-8 * f[0].max(1.0), "{k} {l} {} {}", g[l], f[l]);
            }
        }
    }

    #[test]
    fn newton_fallback_solves_generic_data() {
        let (f0, f1, f2) = (1.0, 0.5, -3.0);
        let (c1, c2, c3) = newton_fit(f0, f1, f2).unwrap();
        let g = lorentzian_derivatives(c1, c2, c3);
        for (a, b) in g.iter().zip([f0, f1, f2]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_temperature_cools() {
        let t = target(0.0, 40);
        let base = t.optimal_params(Branch::Minus, 0.3, 0.1).unwrap();
        let ops = build_mode_operators(&t.mode).unwrap();
        let jumps = build_jump_operators(&base.spec_with(base.profile(), true), &ops).unwrap();
        for theta in [0.3, 0.6, 1.0] {
            let direct = energy_flow_direct(&jumps, &ops, theta).unwrap();
            let pred = energy_flow_predicted(&t, &base, theta, true);
            assert!(direct < 0.0);
            assert!((direct - pred).abs() < 1e-3 * pred.abs(), "{direct} {pred}");
        }
    }

    #[test]
    fn finite_target_energy_flow_and_stationarity() {
        let t = target(0.5, 50);
        let ops = build_mode_operators(&t.mode).unwrap();
        for branch in [Branch::Plus, Branch::Minus] {
            let base = t.optimal_params(branch, 0.3, 0.1).unwrap();
            let jumps = build_jump_operators(&base.spec_with(base.profile(), false), &ops).unwrap();
            for chk in stationarity_residuals(&t, &jumps, &ops, &[0.5, 1.0, 2.0]).unwrap() {
                assert!(chk.relative() < 1e-6, "{chk:?}");
            }
            for theta in [0.25, 0.4, 0.8, 1.2] {
                let direct = energy_flow_direct(&jumps, &ops, theta).unwrap();
                let pred = energy_flow_predicted(&t, &base, theta, false);
                assert_eq!(direct.signum(), (0.5 - theta).signum());
                assert!((direct - pred).abs() < 0.02 * pred.abs(), "{branch:?} {theta} {direct} {pred}");
            }
        }
    }

    #[test]
    fn oversized_rate_is_a_truncation_error() {
        let t = target(0.0, 50);
        assert!(matches!(
            t.optimal_params(Branch::Minus, 80.0, 0.1),
            Err(Error::NonFiniteProfile { .. })
        ));
    }

    #[test]
    fn sweep_orders_points_and_handles_empty_grid() {
        let cfg = SweepConfig::new(target(0.0, 12), vec![0.2, 0.1], vec![], vec![ProfileKind::Exact]);
        assert!(run_sweep(&cfg).is_empty());
        let cfg = SweepConfig::new(
            target(0.0, 12),
            vec![0.2, 0.1],
            vec![0.1],
            vec![ProfileKind::Lorentzian, ProfileKind::Exact],
        );
        let pts = cfg.points();
        assert_eq!(pts[0], (ProfileKind::Exact, 0.1, 0.2));
        assert_eq!(pts[3].0, ProfileKind::Lorentzian);
    }
}
