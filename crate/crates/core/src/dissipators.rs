//! Translationally invariant jump operators `A = exp(-iκx̂) f̃(p̂)`.
//!
//! An isotropic term expands into the pair `A± = exp(∓iκx̂) f̃(±p̂)`. Internally every
//! term is flattened into channels `(ακ, p ↦ f̃(αp))` with `α = ±1`, so all formulas
//! below are written once for a plain list of channels.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Result;
use crate::fock::{DensityMatrix, ModeOperators, EPS_TAIL};
use crate::linalg::{self, c, matmul, max_abs, CMatrix, C64};
use crate::liouville::lindblad_dissipator;
use crate::profile::FrictionProfile;

#[derive(Debug, Clone, PartialEq)]
pub struct DissipatorTerm {
    pub kappa: f64,
    pub profile: FrictionProfile,
    pub isotropic: bool,
}

impl DissipatorTerm {
    pub fn new(kappa: f64, profile: FrictionProfile) -> Self {
        DissipatorTerm {
            kappa,
            profile,
            isotropic: false,
        }
    }

    pub fn isotropic(kappa: f64, profile: FrictionProfile) -> Self {
        DissipatorTerm {
            kappa,
            profile,
            isotropic: true,
        }
    }
}

/// A list of terms; the empty spec generates unitary dynamics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DissipatorSpec {
    pub terms: Vec<DissipatorTerm>,
}

/// One jump operator `exp(-i·kappa·x̂) f̃(alpha·p̂)`.
#[derive(Debug, Clone, Copy)]
pub struct Channel<'a> {
    pub kappa: f64,
    pub alpha: f64,
    pub profile: &'a FrictionProfile,
}

impl Channel<'_> {
    pub fn eval(&self, p: f64) -> C64 {
        self.profile.eval(self.alpha * p)
    }

    pub fn derivative(&self, p: f64, h: f64) -> C64 {
        self.profile.derivative(self.alpha * p, h) * self.alpha
    }
}

impl DissipatorSpec {
    pub fn new(terms: Vec<DissipatorTerm>) -> Self {
        DissipatorSpec { terms }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn channels(&self) -> Vec<Channel<'_>> {
        let mut out = Vec::new();
        for t in &self.terms {
            out.push(Channel {
                kappa: t.kappa,
                alpha: 1.0,
                profile: &t.profile,
            });
            if t.isotropic {
                out.push(Channel {
                    kappa: -t.kappa,
                    alpha: -1.0,
                    profile: &t.profile,
                });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.terms {
            if !t.kappa.is_finite() {
                return Err(crate::Error::param("kappa", "must be finite"));
            }
            t.profile.validate()?;
        }
        Ok(())
    }
}

/// Jump operators in channel order; isotropic terms contribute `A+` then `A-`.
pub fn build_jump_operators(spec: &DissipatorSpec, ops: &ModeOperators) -> Result<Vec<CMatrix>> {
    spec.validate()?;
    let mut out = Vec::new();
    for ch in spec.channels() {
        let f = ops.try_function_of_p(|p| ch.eval(p))?;
        let a = if ch.kappa == 0.0 {
            f
        } else {
            matmul(&ops.displacement(ch.kappa), &f)
        };
        out.push(a);
    }
    Ok(out)
}

/// `F(p) = -Σ ħκ_k |f̃_k(p)|²` summed over channels.
pub fn friction_force(spec: &DissipatorSpec, hbar: f64, p: f64) -> f64 {
    spec.channels()
        .iter()
        .map(|ch| -hbar * ch.kappa * ch.eval(p).norm_sqr())
        .sum()
}

/// Momentum diffusion `D(p) = (ħ²/2) Σ κ_k² |f̃_k(p)|²`.
pub fn diffusion(spec: &DissipatorSpec, hbar: f64, p: f64) -> f64 {
    spec.channels()
        .iter()
        .map(|ch| 0.5 * hbar * hbar * ch.kappa * ch.kappa * ch.eval(p).norm_sqr())
        .sum()
}

/// Second-moment rates from the closed-form expressions and from direct traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentFlows {
    pub p2_analytic: f64,
    pub p2_direct: f64,
    pub x2_analytic: f64,
    pub x2_direct: f64,
    pub truncation_flag: bool,
}

impl MomentFlows {
    pub fn p2_relative_error(&self) -> f64 {
        rel(self.p2_analytic, self.p2_direct)
    }

    pub fn x2_relative_error(&self) -> f64 {
        rel(self.x2_analytic, self.x2_direct)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Finite-difference step tied to the smallest gap of the `p̂` spectrum.
pub fn derivative_step(ops: &ModeOperators) -> f64 {
    let v = &ops.p_eigen.values;
    let gap = v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if gap.is_finite() && gap > 0.0 {
        1e-4 * gap
    } else {
        1e-6
    }
}

/// `⟨L^T[p̂²]⟩ = -2ħ Σ κ ⟨f²(p̂)(p̂ - ħκ/2)⟩` and
/// `⟨L^T[x̂²]⟩ = -ħ Σ ⟨{x̂, f² ∂φ}⟩ + ħ² Σ ⟨(∂f)² + f²(∂φ)²⟩`, together with
/// `Tr[p̂² L[ρ]]` and `Tr[x̂² L[ρ]]` computed with the full dissipator.
pub fn moment_flows(spec: &DissipatorSpec, ops: &ModeOperators, rho: &DensityMatrix) -> Result<MomentFlows> {
    let hb = ops.params.hbar;
    let h = derivative_step(ops);
    let v = &ops.p_eigen.vectors;
    let rho_p = matmul(&matmul(&v.adjoint(), rho.matrix()), v);
    let weights: Vec<f64> = (0..rho.dim()).map(|k| rho_p[(k, k)].re).collect();
    let lambdas = &ops.p_eigen.values;
    let expect_p = |g: &dyn Fn(f64) -> f64| -> f64 { lambdas.iter().zip(&weights).map(|(&l, &w)| g(l) * w).sum() };

    let channels = spec.channels();
    let mut p2 = 0.0;
    let mut x2 = 0.0;
    for ch in &channels {
        let k = ch.kappa;
        p2 += -2.0 * hb * k * expect_p(&|p| ch.eval(p).norm_sqr() * (p - hb * k / 2.0));
        // |g'|² = f'² + f²φ'², Im(ḡ g') = f² φ'
        x2 += hb * hb * expect_p(&|p| ch.derivative(p, h).norm_sqr());
        if !ch.profile.is_real() {
            let m = ops.function_of_p(|p| c((ch.eval(p).conj() * ch.derivative(p, h)).im, 0.0));
            let anti = linalg::anticommutator(&ops.x, &m);
            x2 -= hb * rho.expect(&anti).re;
        }
    }

    let jumps = build_jump_operators(spec, ops)?;
    let lr = lindblad_dissipator(&jumps, rho.matrix());
    let p2_op = matmul(&ops.p, &ops.p);
    let x2_op = matmul(&ops.x, &ops.x);
    let guard = ops.params.guard_indices();
    Ok(MomentFlows {
        p2_analytic: p2,
        p2_direct: linalg::trace_product(&p2_op, &lr).re,
        x2_analytic: x2,
        x2_direct: linalg::trace_product(&x2_op, &lr).re,
        truncation_flag: rho.population(&guard) > EPS_TAIL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvarianceSample {
    /// `‖[p̂, L[ρ]] - L[[p̂, ρ]]‖_max`.
    pub defect: f64,
    /// `defect / ‖L[ρ]‖_max`.
    pub relative: f64,
    /// Whether the sample keeps the top quarter of the basis below the tail threshold.
    pub interior: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub threshold: f64,
    pub samples: Vec<InvarianceSample>,
}

impl InvarianceReport {
    pub fn pass(&self) -> bool {
        self.samples.iter().all(|s| s.pass)
    }

    pub fn worst_relative(&self) -> f64 {
        self.samples.iter().map(|s| s.relative).fold(0.0, f64::max)
    }
}

/// Default relative threshold for the invariance audit.
pub const EPS_TI: f64 = 1e-4;

/// Audits `[p̂, L[ρ]] = L[[p̂, ρ]]` for an arbitrary jump list.
pub fn check_translational_invariance(
    jumps: &[CMatrix],
    ops: &ModeOperators,
    samples: &[DensityMatrix],
    threshold: f64,
) -> InvarianceReport {
    let d = ops.dim();
    let top: Vec<usize> = (d - d / 4..d).collect();
    let samples = samples
        .iter()
        .map(|rho| {
            let r = rho.matrix();
            let lr = lindblad_dissipator(jumps, r);
            let lhs = linalg::commutator(&ops.p, &lr);
            let rhs = lindblad_dissipator(jumps, &linalg::commutator(&ops.p, r));
            let defect = max_abs(&(lhs - rhs));
            let scale = max_abs(&lr);
            let relative = if scale > 0.0 { defect / scale } else { defect };
            InvarianceSample {
                defect,
                relative,
                interior: rho.population(&top) <= EPS_TAIL,
                pass: relative <= threshold,
            }
        })
        .collect();
    InvarianceReport { threshold, samples }
}

/// [`check_translational_invariance`] on the jump operators of `spec`.
pub fn check_spec_invariance(
    spec: &DissipatorSpec,
    ops: &ModeOperators,
    samples: &[DensityMatrix],
) -> Result<InvarianceReport> {
    let jumps = build_jump_operators(spec, ops)?;
    Ok(check_translational_invariance(&jumps, ops, samples, EPS_TI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_mode_operators, thermal_state, ModeParams};
    use crate::phase_space::laguerre;
    use crate::profile::Shape;
    use proptest::prelude::*;

    fn unit_ops(d: usize) -> ModeOperators {
        build_mode_operators(&ModeParams::unit(d)).unwrap()
    }

    /// `⟨m|D(α)|n⟩` for the displacement operator.
    fn displacement_element(alpha: C64, m: usize, n: usize) -> C64 {
        let r2 = alpha.norm_sqr();
        let fact_ratio = |lo: usize, hi: usize| -> f64 { (lo + 1..=hi).map(|k| 1.0 / (k as f64).sqrt()).product() };
        let g = (-r2 / 2.0).exp();
        if m >= n {
            alpha.powu((m - n) as u32) * (fact_ratio(n, m) * g * laguerre(n, (m - n) as f64, r2))
        } else {
            (-alpha.conj()).powu((n - m) as u32) * (fact_ratio(m, n) * g * laguerre(m, (n - m) as f64, r2))
        }
    }

    #[test]
    fn displacement_matches_laguerre_closed_form() {
        let ops = unit_ops(40);
        let kappa = 0.3;
        let e = ops.displacement(kappa);
        let u = matmul(&e.adjoint(), &e);
        assert!(max_abs(&(u - linalg::identity(40))) < 1e-9);
        let alpha = c(0.0, -kappa / 2.0f64.sqrt());
        let mut worst: f64 = 0.0;
        for m in 0..30 {
            for n in 0..30 {
                worst = worst.max((e[(m, n)] - displacement_element(alpha, m, n)).norm());
            }
        }
        assert!(worst < 1e-7, "{worst}");
    }

    #[test]
    fn constant_profile_at_zero_kappa_is_dissipation_free() {
        let ops = unit_ops(10);
        let spec = DissipatorSpec::new(alloc::vec![DissipatorTerm::new(0.0, FrictionProfile::constant(0.7))]);
        let jumps = build_jump_operators(&spec, &ops).unwrap();
        assert!(max_abs(&(&jumps[0] - linalg::identity(10) * c(0.7, 0.0))) < 1e-14);
        let rho = thermal_state(&ModeParams::unit(10), 0.5).unwrap();
        assert!(max_abs(&lindblad_dissipator(&jumps, rho.matrix())) < 1e-14);
    }

    #[test]
    fn isotropic_term_gives_reflected_pair() {
        let ops = unit_ops(16);
        let prof = FrictionProfile::new(Shape::Exponential { rate: 0.4 }, 1.0).unwrap();
        let spec = DissipatorSpec::new(alloc::vec![DissipatorTerm::isotropic(0.5, prof)]);
        let jumps = build_jump_operators(&spec, &ops).unwrap();
        assert_eq!(jumps.len(), 2);
        let am = matmul(&ops.displacement(-0.5), &ops.function_of_p(|p| c((-0.4 * p).exp(), 0.0)));
        assert!(max_abs(&(&jumps[1] - am)) < 1e-12);
    }

    #[test]
    fn friction_force_examples() {
        let one = DissipatorSpec::new(alloc::vec![DissipatorTerm::new(0.8, FrictionProfile::constant(1.5))]);
        for p in [-2.0, 0.0, 3.0] {
            assert!((friction_force(&one, 1.0, p) + 0.8 * 2.25).abs() < 1e-14);
        }
        let even = FrictionProfile::new(Shape::Lorentzian { c1: 1.0, c2: 1.0, c3: 0.0 }, 1.0).unwrap();
        let iso = DissipatorSpec::new(alloc::vec![DissipatorTerm::isotropic(0.8, even)]);
        for p in [-2.0, -0.1, 0.0, 0.7] {
            assert!(friction_force(&iso, 1.0, p).abs() < 1e-15);
        }
        let c_iso = DissipatorSpec::new(alloc::vec![DissipatorTerm::isotropic(0.6, FrictionProfile::constant(2.0))]);
        assert!((diffusion(&c_iso, 1.0, 0.3) - 0.36 * 4.0).abs() < 1e-14);
    }

    #[test]
    fn constant_profile_momentum_flow() {
        let ops = unit_ops(30);
        let spec = DissipatorSpec::new(alloc::vec![DissipatorTerm::new(0.4, FrictionProfile::constant(0.9))]);
        let rho = crate::fock::coherent_state(&ModeParams::unit(30), 0.3, 0.8).unwrap();
        let flows = moment_flows(&spec, &ops, &rho).unwrap();
        let mean_p = rho.expect(&ops.p).re;
        let expected = -2.0 * 0.4 * 0.81 * (mean_p - 0.2);
        assert!((flows.p2_analytic - expected).abs() < 1e-12);
        assert!(flows.p2_relative_error() < 1e-8);
        // constant profile has no slope, so x̂² is untouched
        assert!(flows.x2_analytic.abs() < 1e-12);
    }

    #[test]
    fn phase_term_enters_position_flow() {
        let ops = unit_ops(40);
        let phase = crate::profile::Table::uniform(-12.0, 0.01, (0..=2400).map(|i| {
            let p = -12.0 + 0.01 * i as f64;
            0.3 * (0.5 * p).sin()
        }).collect()).unwrap();
        let prof = FrictionProfile::new(Shape::Exponential { rate: 0.2 }, 0.5).unwrap().with_phase(phase);
        let spec = DissipatorSpec::new(alloc::vec![DissipatorTerm::new(0.3, prof)]);
        let rho = crate::fock::coherent_state(&ModeParams::unit(40), 0.8, -0.4).unwrap();
        let flows = moment_flows(&spec, &ops, &rho).unwrap();
        // the tabulated phase is piecewise linear, so the tolerance reflects the table
        assert!(flows.x2_relative_error() < 1e-3, "{flows:?}");
        assert!(flows.p2_relative_error() < 1e-6, "{flows:?}");
    }

    #[test]
    fn annihilation_jump_breaks_invariance() {
        let ops = unit_ops(30);
        let rho = thermal_state(&ModeParams::unit(30), 0.5).unwrap();
        let a = (&ops.x + &ops.p * c(0.0, 1.0)) / c(2.0f64.sqrt(), 0.0);
        let report = check_translational_invariance(&[a], &ops, core::slice::from_ref(&rho), EPS_TI);
        assert!(!report.pass());
        assert!(report.worst_relative() > 0.1);
        let empty = check_spec_invariance(&DissipatorSpec::empty(), &ops, &[rho]).unwrap();
        assert_eq!(empty.samples[0].defect, 0.0);
    }

    #[test]
    fn position_jump_is_the_gaussian_invariant_limit() {
        // L_x = -½[x,[x,·]] commutes with [p,·] by the Jacobi identity
        let ops = unit_ops(30);
        let rho = thermal_state(&ModeParams::unit(30), 0.5).unwrap();
        let report = check_translational_invariance(core::slice::from_ref(&ops.x), &ops, &[rho], EPS_TI);
        assert!(report.pass(), "{report:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn isotropic_even_profiles_have_no_force(c2 in 0.2f64..3.0, k in -2.0f64..2.0, p in -5.0f64..5.0) {
            let prof = FrictionProfile::new(Shape::Lorentzian { c1: 1.0, c2, c3: 0.0 }, 1.0).unwrap();
            let spec = DissipatorSpec::new(alloc::vec![DissipatorTerm::isotropic(k, prof)]);
            prop_assert!(friction_force(&spec, 1.0, p).abs() < 1e-14);
            prop_assert!(diffusion(&spec, 1.0, p) >= 0.0);
        }
    }
}
