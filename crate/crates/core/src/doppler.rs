//! Doppler-cooling profiles for an atom driven by coherent or incoherent light.

use alloc::format;
use alloc::string::String;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dissipators::{DissipatorSpec, DissipatorTerm};
use crate::error::{Error, Result};
use crate::profile::{doppler_shift, DopplerArgument, FrictionProfile, Shape, Table};

/// Ratio `ξ/|Δ|` above which the weak-field picture is doubtful.
pub const WEAK_FIELD_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum Regime {
    Coherent,
    /// Broadband light described by a tabulated spectral density `I(ω)`.
    Incoherent {
        spectrum: Table,
        /// Laser reference frequency `ω`; the profile samples `I(ω + Δ₁)`.
        carrier: f64,
        /// All constant factors in front of `√I`, such as `πd/(ħ√(2c))`.
        prefactor: f64,
        argument: DopplerArgument,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DopplerParams {
    /// Rabi scale `ξ = ℰd/2`.
    pub xi: f64,
    /// `Δ = ω_a - ω`; positive is red detuning.
    pub detuning: f64,
    pub linewidth: f64,
    pub kappa: f64,
    pub mass: f64,
    pub hbar: f64,
    pub regime: Regime,
}

impl DopplerParams {
    pub fn coherent(xi: f64, detuning: f64, linewidth: f64, kappa: f64, mass: f64, hbar: f64) -> Self {
        DopplerParams {
            xi,
            detuning,
            linewidth,
            kappa,
            mass,
            hbar,
            regime: Regime::Coherent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.linewidth > 0.0) || !self.linewidth.is_finite() {
            return Err(Error::param("linewidth", "must be positive"));
        }
        if !(self.mass > 0.0) || !(self.hbar > 0.0) {
            return Err(Error::param("mass", "mass and hbar must be positive"));
        }
        if ![self.xi, self.detuning, self.kappa].iter().all(|v| v.is_finite()) {
            return Err(Error::param("doppler", "parameters must be finite"));
        }
        Ok(())
    }

    /// `Δ₁(p) = Δ - κ(p + ħκ/2)/m`.
    pub fn shifted_detuning(&self, p: f64) -> f64 {
        doppler_shift(self.detuning, self.kappa, self.mass, self.hbar, p)
    }

    /// Momentum at which the shifted detuning vanishes.
    pub fn resonant_momentum(&self) -> f64 {
        self.mass * self.detuning / self.kappa - self.hbar * self.kappa / 2.0
    }

    /// A message when `ξ/|Δ|` exceeds [`WEAK_FIELD_LIMIT`].
    pub fn weak_field_advisory(&self) -> Option<String> {
        let ratio = self.xi.abs() / self.detuning.abs();
        (ratio > WEAK_FIELD_LIMIT).then(|| {
            format!("xi/|detuning| = {ratio:.3} exceeds {WEAK_FIELD_LIMIT}; the weak-field profile may be inaccurate")
        })
    }
}

/// `f̃(p) = (|ξ|/ħ) √γ Δ₁(p) / ((γ/2)² + Δ₁(p)²)`.
pub fn coherent_profile(dp: &DopplerParams) -> Result<FrictionProfile> {
    dp.validate()?;
    if dp.regime != Regime::Coherent {
        return Err(Error::param("regime", "coherent profile needs the coherent regime"));
    }
    FrictionProfile::new(
        Shape::DopplerCoherent {
            detuning: dp.detuning,
            linewidth: dp.linewidth,
            kappa: dp.kappa,
            mass: dp.mass,
            hbar: dp.hbar,
        },
        dp.xi.abs() / dp.hbar,
    )
}

/// `f̃(p) = prefactor·√I(ω + Δ₁(±p))`, checked to be defined for `|p| ≤ p_max`.
pub fn incoherent_profile(dp: &DopplerParams, p_max: f64) -> Result<FrictionProfile> {
    dp.validate()?;
    let Regime::Incoherent {
        spectrum,
        carrier,
        prefactor,
        argument,
    } = &dp.regime
    else {
        return Err(Error::param("regime", "incoherent profile needs a spectral density"));
    };
    let (lo, hi) = spectrum.range();
    // Δ₁ is affine in p, so the endpoints bound the sampled frequencies.
    for p in [-p_max, p_max] {
        let w = carrier + dp.shifted_detuning(p);
        if !(w >= lo && w <= hi) {
            return Err(Error::NonFiniteProfile { p });
        }
    }
    FrictionProfile::new(
        Shape::DopplerIncoherent {
            spectrum: spectrum.clone(),
            carrier: *carrier,
            detuning: dp.detuning,
            kappa: dp.kappa,
            mass: dp.mass,
            hbar: dp.hbar,
            argument: *argument,
        },
        *prefactor,
    )
}

/// The isotropic pair built from a Doppler profile.
pub fn doppler_spec(dp: &DopplerParams, profile: FrictionProfile) -> DissipatorSpec {
    DissipatorSpec::new(alloc::vec![DissipatorTerm::isotropic(dp.kappa, profile)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipators::friction_force;
    use alloc::vec::Vec;

    fn coherent() -> DopplerParams {
        DopplerParams::coherent(0.05, 3.0, 1.0, 0.7, 1.3, 1.0)
    }

    #[test]
    fn coherent_zero_and_extremum() {
        let dp = coherent();
        let f = coherent_profile(&dp).unwrap();
        assert!(f.eval(dp.resonant_momentum()).norm() < 1e-15);
        // Δ₁ = γ/2 at p = m(Δ - γ/2)/κ - ħκ/2
        let p_ext = dp.mass * (dp.detuning - 0.5) / dp.kappa - dp.hbar * dp.kappa / 2.0;
        let expected = dp.xi / (dp.hbar * dp.linewidth.sqrt());
        assert!((f.modulus(p_ext) - expected).abs() < 1e-12);
        assert!(f.modulus(1e6) < 1e-6 && f.modulus(-1e6) < 1e-6);
        assert!(f.is_real());
    }

    #[test]
    fn coherent_red_detuning_damps() {
        let dp = coherent();
        let spec = doppler_spec(&dp, coherent_profile(&dp).unwrap());
        for p in [-0.5, -0.1, 0.1, 0.5] {
            assert!(friction_force(&spec, dp.hbar, p) * p < 0.0);
        }
    }

    fn incoherent(spectrum: Table, argument: DopplerArgument) -> DopplerParams {
        DopplerParams {
            regime: Regime::Incoherent {
                spectrum,
                carrier: 10.0,
                prefactor: 1.0,
                argument,
            },
            ..coherent()
        }
    }

    fn gaussian_spectrum(center: f64) -> Table {
        let xs: Vec<f64> = (0..=400).map(|i| i as f64 * 0.1).collect();
        let ys = xs.iter().map(|w| (-(w - center) * (w - center) / 2.0).exp()).collect();
        Table::new(xs, ys).unwrap()
    }

    #[test]
    fn incoherent_limits() {
        let zero = Table::uniform(0.0, 1.0, alloc::vec![0.0; 41]).unwrap();
        let dp = incoherent(zero, DopplerArgument::Direct);
        let f = incoherent_profile(&dp, 5.0).unwrap();
        assert_eq!(f.modulus(0.3), 0.0);
        let flat = Table::uniform(0.0, 1.0, alloc::vec![2.0; 41]).unwrap();
        let dp = incoherent(flat, DopplerArgument::Direct);
        let spec = doppler_spec(&dp, incoherent_profile(&dp, 5.0).unwrap());
        for p in [-1.0, 0.0, 2.0] {
            assert!(friction_force(&spec, 1.0, p).abs() < 1e-12);
        }
    }

    #[test]
    fn incoherent_sign_conventions() {
        // spectrum centred below the atomic line ω + Δ = 13
        let dp = incoherent(gaussian_spectrum(12.0), DopplerArgument::Direct);
        let spec = doppler_spec(&dp, incoherent_profile(&dp, 5.0).unwrap());
        let dp_r = incoherent(gaussian_spectrum(12.0), DopplerArgument::Reflected);
        let spec_r = doppler_spec(&dp_r, incoherent_profile(&dp_r, 5.0).unwrap());
        for p in [-0.2, -0.05, 0.05, 0.2] {
            assert!(friction_force(&spec, 1.0, p) * p < 0.0);
            assert!(friction_force(&spec_r, 1.0, p) * p > 0.0);
        }
    }

    #[test]
    fn incoherent_requires_spectrum_coverage() {
        let dp = incoherent(gaussian_spectrum(12.0), DopplerArgument::Direct);
        assert!(matches!(incoherent_profile(&dp, 100.0), Err(Error::NonFiniteProfile { .. })));
        assert!(incoherent_profile(&coherent(), 1.0).is_err());
    }

    #[test]
    fn weak_field_advisory() {
        assert!(coherent().weak_field_advisory().is_none());
        let strong = DopplerParams { xi: 1.0, ..coherent() };
        assert!(strong.weak_field_advisory().is_some());
    }
}
