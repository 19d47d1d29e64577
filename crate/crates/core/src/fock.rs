//! Single-mode operator algebra on a truncated basis.
//!
//! A harmonic mode (ω > 0) lives in the Fock basis, where `x̂` and `p̂` are built
//! from the truncated ladder operator and `Ĥ = p̂²/2m + mω²x̂²/2` is formed from those
//! truncated matrices. That makes `Ĥ` diagonal with `ħω(n + ½)` on every level except
//! the top one, which is a truncation artifact.
//!
//! A free particle (ω = 0) lives on a periodic momentum grid. There `p̂` is diagonal,
//! `x̂` is the discrete-Fourier conjugate, and `exp(-iκx̂)` is an exact cyclic shift
//! whenever `ħκ` is an integer multiple of the grid spacing.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, HermitianEigen, C64, ZERO};

/// Population threshold for the top-of-basis guard band.
pub const EPS_TAIL: f64 = 1e-6;
/// Negative eigenvalues down to `-EPS_POS` are clamped before fidelity evaluations.
pub const EPS_POS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Basis {
    Fock,
    /// `p_j = center + (j - (D-1)/2) * spacing`, periodic with period `D * spacing`.
    MomentumGrid { spacing: f64, center: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams {
    pub mass: f64,
    pub omega: f64,
    pub hbar: f64,
    pub cutoff: usize,
    pub basis: Basis,
}

impl ModeParams {
    /// Harmonic mode in the Fock basis.
    pub fn harmonic(mass: f64, omega: f64, hbar: f64, cutoff: usize) -> Self {
        ModeParams {
            mass,
            omega,
            hbar,
            cutoff,
            basis: Basis::Fock,
        }
    }

    /// Dimensionless oscillator `ħ = m = ω = 1`.
    pub fn unit(cutoff: usize) -> Self {
        Self::harmonic(1.0, 1.0, 1.0, cutoff)
    }

    /// Free particle on a momentum grid of `cutoff` points.
    pub fn free(mass: f64, hbar: f64, cutoff: usize, spacing: f64, center: f64) -> Self {
        ModeParams {
            mass,
            omega: 0.0,
            hbar,
            cutoff,
            basis: Basis::MomentumGrid { spacing, center },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.mass.is_finite() && self.omega.is_finite() && self.hbar.is_finite();
        if !finite {
            return Err(Error::param("mode", "non-finite parameter"));
        }
        if self.mass <= 0.0 {
            return Err(Error::param("mass", "must be positive"));
        }
        if self.omega < 0.0 {
            return Err(Error::param("omega", "must be non-negative"));
        }
        if self.hbar <= 0.0 {
            return Err(Error::param("hbar", "must be positive"));
        }
        if self.cutoff < 2 {
            return Err(Error::param("cutoff", "must be at least 2"));
        }
        match self.basis {
            Basis::Fock if self.omega == 0.0 => Err(Error::UnsupportedBasis {
                reason: "a free particle (omega = 0) needs a momentum-grid basis".into(),
            }),
            Basis::MomentumGrid { spacing, center } => {
                if !(spacing > 0.0) || !spacing.is_finite() || !center.is_finite() {
                    Err(Error::param("spacing", "momentum-grid spacing must be positive and finite"))
                } else if self.omega != 0.0 {
                    Err(Error::UnsupportedBasis {
                        reason: "momentum-grid basis only supports a free particle".into(),
                    })
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// `β = 1/(mħω)`.
    pub fn beta(&self) -> f64 {
        1.0 / (self.mass * self.hbar * self.omega)
    }

    /// Oscillator length `√(ħ/mω)`.
    pub fn length(&self) -> f64 {
        (self.hbar / (self.mass * self.omega)).sqrt()
    }

    /// Grid momenta (free particle only).
    pub fn grid_momenta(&self) -> Option<Vec<f64>> {
        match self.basis {
            Basis::MomentumGrid { spacing, center } => {
                let mid = (self.cutoff as f64 - 1.0) / 2.0;
                Some((0..self.cutoff).map(|j| center + (j as f64 - mid) * spacing).collect())
            }
            Basis::Fock => None,
        }
    }

    /// Indices of the basis states watched by the truncation guard.
    pub fn guard_indices(&self) -> Vec<usize> {
        let d = self.cutoff;
        match self.basis {
            Basis::Fock => (d.saturating_sub(2)..d).collect(),
            Basis::MomentumGrid { .. } => {
                let mut v: Vec<usize> = (0..2.min(d)).collect();
                v.extend(d.saturating_sub(2).max(2)..d);
                v
            }
        }
    }
}

/// The canonical operators of one mode together with the spectral data of `p̂`.
#[derive(Debug, Clone)]
pub struct ModeOperators {
    pub params: ModeParams,
    pub x: CMatrix,
    pub p: CMatrix,
    pub h: CMatrix,
    pub p_eigen: HermitianEigen,
}

pub fn build_mode_operators(params: &ModeParams) -> Result<ModeOperators> {
    params.validate()?;
    let d = params.cutoff;
    let (m, w, hb) = (params.mass, params.omega, params.hbar);
    match params.basis {
        Basis::Fock => {
            let mut a = CMatrix::zeros(d, d);
            for n in 1..d {
                a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
            }
            let ad = a.adjoint();
            let x = (&a + &ad).scale((hb / (2.0 * m * w)).sqrt());
            let p = (&ad - &a) * c(0.0, (m * hb * w / 2.0).sqrt());
            let h = linalg::matmul(&p, &p).unscale(2.0 * m)
                + linalg::matmul(&x, &x).scale(m * w * w / 2.0);
            let p_eigen = HermitianEigen::new(&p);
            Ok(ModeOperators {
                params: *params,
                x,
                p,
                h,
                p_eigen,
            })
        }
        Basis::MomentumGrid { spacing, .. } => {
            let ps = params.grid_momenta().unwrap_or_default();
            let mid = (d as f64 - 1.0) / 2.0;
            let dx = 2.0 * PI * hb / (d as f64 * spacing);
            // integer conjugate labels make exp(-iκx̂) an exact cyclic shift
            let ks: Vec<f64> = (0..d).map(|k| (k as f64 - mid).round()).collect();
            let xs: Vec<f64> = ks.iter().map(|k| k * dx).collect();
            let norm = 1.0 / (d as f64).sqrt();
            let u = CMatrix::from_fn(d, d, |k, l| C64::from_polar(norm, xs[k] * ps[l] / hb));
            let mut ux = u.clone();
            for k in 0..d {
                for l in 0..d {
                    ux[(k, l)] *= xs[k];
                }
            }
            let x = linalg::hermitian_part(&linalg::matmul(&u.adjoint(), &ux));
            let p = CMatrix::from_fn(d, d, |i, j| if i == j { c(ps[i], 0.0) } else { ZERO });
            let h = CMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    c(ps[i] * ps[i] / (2.0 * m), 0.0)
                } else {
                    ZERO
                }
            });
            let p_eigen = HermitianEigen {
                values: ps,
                vectors: linalg::identity(d),
            };
            Ok(ModeOperators {
                params: *params,
                x,
                p,
                h,
                p_eigen,
            })
        }
    }
}

impl ModeOperators {
    pub fn dim(&self) -> usize {
        self.params.cutoff
    }

    /// `g(p̂)` through the eigendecomposition of the truncated `p̂`.
    pub fn function_of_p(&self, g: impl Fn(f64) -> C64) -> CMatrix {
        self.p_eigen.map(g)
    }

    /// Fallible variant that rejects non-finite values on the spectrum of `p̂`.
    pub fn try_function_of_p(&self, g: impl Fn(f64) -> C64) -> Result<CMatrix> {
        let mut vals = Vec::with_capacity(self.dim());
        for &p in &self.p_eigen.values {
            let v = g(p);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFiniteProfile { p });
            }
            vals.push(v);
        }
        Ok(self.p_eigen.map_values(&vals))
    }

    /// `exp(-iκx̂)`, which shifts momentum eigenstates by `-ħκ`.
    pub fn displacement(&self, kappa: f64) -> CMatrix {
        linalg::expm(&(&self.x * c(0.0, -kappa)))
    }
}

/// Diagnostics collected when a matrix is accepted as a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDiagnostics {
    pub hermiticity_defect: f64,
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateTolerance {
    pub hermiticity: f64,
    pub trace: f64,
    pub positivity: f64,
}

impl Default for StateTolerance {
    fn default() -> Self {
        StateTolerance {
            hermiticity: 1e-8,
            trace: 1e-8,
            positivity: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: CMatrix,
    diagnostics: StateDiagnostics,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, &StateTolerance::default())
    }

    pub fn with_tolerance(matrix: CMatrix, tol: &StateTolerance) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        if matrix.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidState {
                reason: "non-finite entries".into(),
            });
        }
        let diagnostics = diagnose(&matrix);
        if diagnostics.hermiticity_defect > tol.hermiticity {
            return Err(Error::InvalidState {
                reason: format!("hermiticity defect {:.3e}", diagnostics.hermiticity_defect),
            });
        }
        if diagnostics.trace_defect > tol.trace {
            return Err(Error::InvalidState {
                reason: format!("trace defect {:.3e}", diagnostics.trace_defect),
            });
        }
        if diagnostics.min_eigenvalue < -tol.positivity {
            return Err(Error::InvalidState {
                reason: format!("eigenvalue {:.3e}", diagnostics.min_eigenvalue),
            });
        }
        Ok(DensityMatrix {
            matrix,
            diagnostics,
        })
    }

    /// Wraps a matrix without checks; diagnostics are still recorded.
    pub fn new_unchecked(matrix: CMatrix) -> Self {
        let diagnostics = diagnose(&matrix);
        DensityMatrix {
            matrix,
            diagnostics,
        }
    }

    pub fn from_populations(pops: &[f64]) -> Result<Self> {
        let total: f64 = pops.iter().sum();
        if pops.iter().any(|&p| p < 0.0 || !p.is_finite()) || !(total > 0.0) {
            return Err(Error::InvalidState {
                reason: "populations must be finite, non-negative and not all zero".into(),
            });
        }
        let d = pops.len();
        let m = CMatrix::from_fn(d, d, |i, j| if i == j { c(pops[i] / total, 0.0) } else { ZERO });
        Self::new(m)
    }

    /// `|ψ⟩⟨ψ|` for a normalized copy of `psi`.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let nrm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::InvalidState {
                reason: "zero or non-finite state vector".into(),
            });
        }
        let d = psi.len();
        let m = CMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / (nrm * nrm));
        Self::new(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn diagnostics(&self) -> StateDiagnostics {
        self.diagnostics
    }

    /// `Tr[O ρ]`.
    pub fn expect(&self, op: &CMatrix) -> C64 {
        linalg::trace_product(op, &self.matrix)
    }

    pub fn population(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.matrix[(i, i)].re).sum()
    }
}

fn diagnose(m: &CMatrix) -> StateDiagnostics {
    StateDiagnostics {
        hermiticity_defect: linalg::hermiticity_defect(m),
        trace_defect: (linalg::trace(m) - c(1.0, 0.0)).norm(),
        min_eigenvalue: HermitianEigen::new(m).min(),
    }
}

/// Mean energy `(ħω/2) coth(ħω/2θ)` of an untruncated oscillator.
pub fn thermal_energy(params: &ModeParams, theta: f64) -> f64 {
    let e = params.hbar * params.omega;
    if theta == 0.0 {
        e / 2.0
    } else {
        e / 2.0 / (e / (2.0 * theta)).tanh()
    }
}

/// `r(θ) = tanh(ħω/2θ)`, with `r(0) = 1`.
pub fn r_of_theta(params: &ModeParams, theta: f64) -> f64 {
    if theta == 0.0 {
        1.0
    } else {
        (params.hbar * params.omega / (2.0 * theta)).tanh()
    }
}

/// Gibbs state `∝ exp(-Ĥ/θ)` with Fock populations `∝ exp(-ħωn/θ)`.
pub fn thermal_state(params: &ModeParams, theta: f64) -> Result<DensityMatrix> {
    params.validate()?;
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::param("theta", "must be finite and non-negative"));
    }
    if params.basis != Basis::Fock {
        return Err(Error::UnsupportedBasis {
            reason: "a free particle has no normalizable thermal state".into(),
        });
    }
    let d = params.cutoff;
    let mut pops = alloc::vec![0.0; d];
    if theta == 0.0 {
        pops[0] = 1.0;
    } else {
        let q = (-params.hbar * params.omega / theta).exp();
        let mut w = 1.0;
        for p in pops.iter_mut() {
            *p = w;
            w *= q;
        }
        let total: f64 = pops.iter().sum();
        let tail: f64 = pops[d - 2..].iter().sum::<f64>() / total;
        if tail > EPS_TAIL {
            return Err(Error::CutoffInsufficient {
                tail,
                limit: EPS_TAIL,
            });
        }
    }
    DensityMatrix::from_populations(&pops)
}

pub fn fock_state(params: &ModeParams, n: usize) -> Result<DensityMatrix> {
    if n >= params.cutoff {
        return Err(Error::param("n", "level beyond cutoff"));
    }
    let mut pops = alloc::vec![0.0; params.cutoff];
    pops[n] = 1.0;
    DensityMatrix::from_populations(&pops)
}

/// Fock amplitudes of the coherent state centred at `(x0, p0)`.
pub fn coherent_amplitudes(params: &ModeParams, x0: f64, p0: f64) -> Result<Vec<C64>> {
    if params.basis != Basis::Fock {
        return Err(Error::UnsupportedBasis {
            reason: "coherent states are defined in the Fock basis".into(),
        });
    }
    let l = params.length();
    let alpha = c(x0 / l, p0 * l / params.hbar) / 2.0f64.sqrt();
    let d = params.cutoff;
    let mut amps = Vec::with_capacity(d);
    let mut term = c((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..d {
        amps.push(term);
        term = term * alpha / ((n + 1) as f64).sqrt();
    }
    let tail: f64 = amps[d.saturating_sub(2)..].iter().map(|z| z.norm_sqr()).sum();
    if tail > EPS_TAIL {
        return Err(Error::CutoffInsufficient {
            tail,
            limit: EPS_TAIL,
        });
    }
    Ok(amps)
}

pub fn coherent_state(params: &ModeParams, x0: f64, p0: f64) -> Result<DensityMatrix> {
    DensityMatrix::pure(&coherent_amplitudes(params, x0, p0)?)
}

/// Populations `∝ exp(-(p - mean)²/2σ²)` on a momentum grid, as a diagonal state.
pub fn momentum_gaussian(params: &ModeParams, mean: f64, sigma: f64) -> Result<DensityMatrix> {
    let ps = params.grid_momenta().ok_or_else(|| Error::UnsupportedBasis {
        reason: "momentum Gaussian requires a momentum-grid basis".into(),
    })?;
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", "must be positive"));
    }
    let pops: Vec<f64> = ps
        .iter()
        .map(|p| (-(p - mean) * (p - mean) / (2.0 * sigma * sigma)).exp())
        .collect();
    DensityMatrix::from_populations(&pops)
}

/// Clamps eigenvalues at zero, renormalizes and returns `√ρ` alongside.
fn clamp_state(rho: &DensityMatrix) -> Result<(HermitianEigen, f64)> {
    let e = HermitianEigen::new(rho.matrix());
    if e.min() < -EPS_POS {
        return Err(Error::InvalidState {
            reason: format!("eigenvalue {:.3e} below -{:.0e}", e.min(), EPS_POS),
        });
    }
    let total: f64 = e.values.iter().map(|v| v.max(0.0)).sum();
    Ok((e, total))
}

/// Uhlmann fidelity `(Tr√(√ρ σ √ρ))²`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: sigma.dim(),
        });
    }
    let (er, tr) = clamp_state(rho)?;
    let (es, ts) = clamp_state(sigma)?;
    let sr = er.map(|l| c((l.max(0.0) / tr).sqrt(), 0.0));
    let ss = es.map(|l| c((l.max(0.0) / ts).sqrt(), 0.0));
    // Tr√(√ρ σ √ρ) is the nuclear norm of √ρ√σ; singular values keep absolute
    // accuracy ε where square roots of eigenvalues would only reach √ε
    let root: f64 = linalg::matmul(&sr, &ss).singular_values().iter().sum();
    Ok((root * root).min(1.0))
}

/// `D_B = √(2(1 − √F))`.
pub fn bures_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let f = fidelity(rho, sigma)?;
    Ok((2.0 * (1.0 - f.sqrt())).max(0.0).sqrt())
}
