//! Momentum profiles `f̃(p)` of translationally invariant jump operators.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{c, C64};

/// Piecewise-linear function on sorted abscissae. Evaluation outside the tabulated
/// range yields NaN, which callers surface as a non-finite profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Table {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        if xs.len() < 2 {
            return Err(Error::param("table", "needs at least two points"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("table", "abscissae must be strictly increasing"));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::param("table", "entries must be finite"));
        }
        Ok(Table { xs, ys })
    }

    pub fn uniform(start: f64, step: f64, ys: Vec<f64>) -> Result<Self> {
        let xs = (0..ys.len()).map(|i| start + i as f64 * step).collect();
        Self::new(xs, ys)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.range();
        if !(x >= lo && x <= hi) {
            return f64::NAN;
        }
        let i = match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => return self.ys[i],
            Err(i) => i,
        };
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let t = (x - x0) / (x1 - x0);
        self.ys[i - 1] * (1.0 - t) + self.ys[i] * t
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }
}

/// Which Doppler-shifted frequency the incoherent profile samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DopplerArgument {
    /// `ω + Δ₁(p)`: the same convention as the coherent profile; cools for red detuning.
    #[default]
    Direct,
    /// `ω + Δ₁(-p)`, taken literally from the incoherent-light formula.
    Reflected,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Constant,
    /// `exp(rate·p)`.
    Exponential { rate: f64 },
    /// `exp(rate·p)` where `κp ≥ -p_clip`, zero elsewhere.
    ClippedExponential { rate: f64, kappa: f64, p_clip: f64 },
    /// `c1 (p - c3) / (c2² + (p - c3)²)`.
    Lorentzian { c1: f64, c2: f64, c3: f64 },
    /// `√γ Δ₁(p) / ((γ/2)² + Δ₁(p)²)` with `Δ₁(p) = Δ - κ(p + ħκ/2)/m`.
    DopplerCoherent {
        detuning: f64,
        linewidth: f64,
        kappa: f64,
        mass: f64,
        hbar: f64,
    },
    /// `√I(ω + Δ₁(±p))` for a tabulated spectral density `I`.
    DopplerIncoherent {
        spectrum: Table,
        carrier: f64,
        detuning: f64,
        kappa: f64,
        mass: f64,
        hbar: f64,
        argument: DopplerArgument,
    },
    Tabulated(Table),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrictionProfile {
    pub shape: Shape,
    pub amplitude: f64,
    /// Optional phase `φ(p)`; zero when absent.
    pub phase: Option<Table>,
}

pub(crate) fn doppler_shift(detuning: f64, kappa: f64, mass: f64, hbar: f64, p: f64) -> f64 {
    detuning - kappa * (p + hbar * kappa / 2.0) / mass
}

impl FrictionProfile {
    pub fn new(shape: Shape, amplitude: f64) -> Result<Self> {
        let prof = FrictionProfile {
            shape,
            amplitude,
            phase: None,
        };
        prof.validate()?;
        Ok(prof)
    }

    pub fn constant(amplitude: f64) -> Self {
        FrictionProfile {
            shape: Shape::Constant,
            amplitude,
            phase: None,
        }
    }

    pub fn with_phase(mut self, phase: Table) -> Self {
        self.phase = Some(phase);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::param("amplitude", "must be finite and non-negative"));
        }
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        let ok = match &self.shape {
            Shape::Constant | Shape::Tabulated(_) => true,
            Shape::Exponential { rate } => finite(&[*rate]),
            Shape::ClippedExponential { rate, kappa, p_clip } => finite(&[*rate, *kappa]) && !p_clip.is_nan(),
            Shape::Lorentzian { c1, c2, c3 } => finite(&[*c1, *c2, *c3]) && *c2 != 0.0,
            Shape::DopplerCoherent {
                detuning,
                linewidth,
                kappa,
                mass,
                hbar,
            } => finite(&[*detuning, *linewidth, *kappa, *mass, *hbar]) && *linewidth > 0.0 && *mass > 0.0,
            Shape::DopplerIncoherent {
                spectrum,
                carrier,
                detuning,
                kappa,
                mass,
                ..
            } => {
                finite(&[*carrier, *detuning, *kappa, *mass])
                    && *mass > 0.0
                    && spectrum.values().iter().all(|v| *v >= 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param("profile", "invalid shape parameters"))
        }
    }

    fn shape_value(&self, p: f64) -> f64 {
        match &self.shape {
            Shape::Constant => 1.0,
            Shape::Exponential { rate } => (rate * p).exp(),
            Shape::ClippedExponential { rate, kappa, p_clip } => {
                if kappa * p >= -p_clip {
                    (rate * p).exp()
                } else {
                    0.0
                }
            }
            Shape::Lorentzian { c1, c2, c3 } => {
                let y = p - c3;
                c1 * y / (c2 * c2 + y * y)
            }
            Shape::DopplerCoherent {
                detuning,
                linewidth,
                kappa,
                mass,
                hbar,
            } => {
                let d1 = doppler_shift(*detuning, *kappa, *mass, *hbar, p);
                linewidth.sqrt() * d1 / (linewidth * linewidth / 4.0 + d1 * d1)
            }
            Shape::DopplerIncoherent {
                spectrum,
                carrier,
                detuning,
                kappa,
                mass,
                hbar,
                argument,
            } => {
                let q = match argument {
                    DopplerArgument::Direct => p,
                    DopplerArgument::Reflected => -p,
                };
                let w = carrier + doppler_shift(*detuning, *kappa, *mass, *hbar, q);
                spectrum.eval(w).max(0.0).sqrt()
            }
            Shape::Tabulated(t) => t.eval(p),
        }
    }

    /// `f̃(p)`.
    pub fn eval(&self, p: f64) -> C64 {
        let v = self.amplitude * self.shape_value(p);
        match &self.phase {
            None => c(v, 0.0),
            Some(t) => C64::from_polar(v, t.eval(p)),
        }
    }

    /// `|f̃(p)|`.
    pub fn modulus(&self, p: f64) -> f64 {
        self.eval(p).norm()
    }

    /// Central-difference derivative of `f̃` at `p` with step `h`.
    pub fn derivative(&self, p: f64, h: f64) -> C64 {
        (self.eval(p + h) - self.eval(p - h)) / (2.0 * h)
    }

    pub fn is_real(&self) -> bool {
        self.phase.is_none()
    }
}
