//! Conversion of config blocks into core objects, with config-level validation.

use qfric_core::dissipators::{DissipatorSpec, DissipatorTerm};
use qfric_core::doppler::{DopplerParams, Regime};
use qfric_core::fock::{coherent_state, fock_state, momentum_gaussian, thermal_state, DensityMatrix, ModeParams};
use qfric_core::linalg::{c, CMatrix};
use qfric_core::nonreciprocal::Coupling;
use qfric_core::profile::{DopplerArgument, FrictionProfile, Shape, Table};
use qfric_core::steady::{MethodChoice, SteadyOptions};
use qfric_core::thermo::{linspace, Branch, ProfileKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::*;
use crate::error::RunError;

fn bad(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

fn expect_params(what: &str, params: &[f64], names: &[&str]) -> Result<(), RunError> {
    if params.len() != names.len() {
        return Err(bad(format!(
            "{what} expects {} parameter(s) [{}], got {}",
            names.len(),
            names.join(", "),
            params.len()
        )));
    }
    if params.iter().any(|v| !v.is_finite()) {
        return Err(bad(format!("{what} parameters must be finite")));
    }
    Ok(())
}

pub fn mode(m: &ModeConfig) -> Result<ModeParams, RunError> {
    let params = match m.basis {
        BasisKind::Fock => {
            if m.spacing.is_some() {
                return Err(bad("mode.spacing applies to the momentum-grid basis only"));
            }
            ModeParams::harmonic(m.mass, m.omega, m.hbar, m.cutoff)
        }
        BasisKind::MomentumGrid => {
            let spacing = m.spacing.ok_or_else(|| bad("momentum-grid basis requires mode.spacing"))?;
            ModeParams::free(m.mass, m.hbar, m.cutoff, spacing, m.center)
        }
    };
    params.validate()?;
    Ok(params)
}

pub fn table(t: &TableConfig) -> Result<Table, RunError> {
    Ok(Table::new(t.xs.clone(), t.ys.clone())?)
}

fn argument(a: &Option<String>) -> Result<DopplerArgument, RunError> {
    match a.as_deref() {
        None | Some("direct") => Ok(DopplerArgument::Direct),
        Some("reflected") => Ok(DopplerArgument::Reflected),
        Some(other) => Err(bad(format!("unknown doppler argument `{other}` (direct | reflected)"))),
    }
}

pub fn profile(p: &ProfileConfig) -> Result<FrictionProfile, RunError> {
    let v = &p.params;
    let needs_table = matches!(p.kind, ProfileKindConfig::Tabulated | ProfileKindConfig::DopplerIncoherent);
    if p.table.is_some() && !needs_table {
        return Err(bad("profile.table applies to tabulated and doppler-incoherent profiles only"));
    }
    if p.argument.is_some() && p.kind != ProfileKindConfig::DopplerIncoherent {
        return Err(bad("profile.argument applies to doppler-incoherent profiles only"));
    }
    let shape = match p.kind {
        ProfileKindConfig::Constant => {
            expect_params("constant", v, &[])?;
            Shape::Constant
        }
        ProfileKindConfig::Exponential => {
            expect_params("exponential", v, &["rate"])?;
            Shape::Exponential { rate: v[0] }
        }
        ProfileKindConfig::ClippedExponential => {
            expect_params("clipped-exponential", v, &["rate", "kappa", "p_clip"])?;
            Shape::ClippedExponential {
                rate: v[0],
                kappa: v[1],
                p_clip: v[2],
            }
        }
        ProfileKindConfig::Lorentzian => {
            expect_params("lorentzian", v, &["c1", "c2", "c3"])?;
            Shape::Lorentzian {
                c1: v[0],
                c2: v[1],
                c3: v[2],
            }
        }
        ProfileKindConfig::DopplerCoherent => {
            expect_params("doppler-coherent", v, &["detuning", "linewidth", "kappa", "mass", "hbar"])?;
            Shape::DopplerCoherent {
                detuning: v[0],
                linewidth: v[1],
                kappa: v[2],
                mass: v[3],
                hbar: v[4],
            }
        }
        ProfileKindConfig::DopplerIncoherent => {
            expect_params("doppler-incoherent", v, &["carrier", "detuning", "kappa", "mass", "hbar"])?;
            let t = p.table.as_ref().ok_or_else(|| bad("doppler-incoherent requires profile.table (the spectrum)"))?;
            Shape::DopplerIncoherent {
                spectrum: table(t)?,
                carrier: v[0],
                detuning: v[1],
                kappa: v[2],
                mass: v[3],
                hbar: v[4],
                argument: argument(&p.argument)?,
            }
        }
        ProfileKindConfig::Tabulated => {
            expect_params("tabulated", v, &[])?;
            let t = p.table.as_ref().ok_or_else(|| bad("tabulated profile requires profile.table"))?;
            Shape::Tabulated(table(t)?)
        }
    };
    let mut prof = FrictionProfile::new(shape, p.amplitude)?;
    if let Some(ph) = &p.phase {
        prof = prof.with_phase(table(ph)?);
        prof.validate()?;
    }
    Ok(prof)
}

pub fn spec(terms: &[TermConfig]) -> Result<DissipatorSpec, RunError> {
    let mut out = Vec::with_capacity(terms.len());
    for t in terms {
        let prof = profile(&t.profile)?;
        out.push(if t.isotropic {
            DissipatorTerm::isotropic(t.kappa, prof)
        } else {
            DissipatorTerm::new(t.kappa, prof)
        });
    }
    let spec = DissipatorSpec::new(out);
    spec.validate()?;
    Ok(spec)
}

pub fn state(s: &StateConfig, mode: &ModeParams, seed: u64) -> Result<DensityMatrix, RunError> {
    let v = &s.params;
    match s.kind {
        StateKind::Thermal => {
            expect_params("thermal state", v, &["theta"])?;
            Ok(thermal_state(mode, v[0])?)
        }
        StateKind::Coherent => {
            expect_params("coherent state", v, &["x0", "p0"])?;
            Ok(coherent_state(mode, v[0], v[1])?)
        }
        StateKind::Fock => {
            expect_params("fock state", v, &["n"])?;
            if v[0] < 0.0 || v[0].fract() != 0.0 {
                return Err(bad("fock state level must be a non-negative integer"));
            }
            Ok(fock_state(mode, v[0] as usize)?)
        }
        StateKind::MomentumGaussian => {
            expect_params("momentum-gaussian state", v, &["mean", "sigma"])?;
            Ok(momentum_gaussian(mode, v[0], v[1])?)
        }
        StateKind::Random => {
            expect_params("random state", v, &["support", "rank"])?;
            if v.iter().any(|x| *x < 1.0 || x.fract() != 0.0) {
                return Err(bad("random state support and rank must be positive integers"));
            }
            Ok(random_state(mode.cutoff, v[0] as usize, v[1] as usize, seed)?)
        }
    }
}

/// Mixture of `rank` random pure states supported on the lowest `support` levels.
pub fn random_state(dim: usize, support: usize, rank: usize, seed: u64) -> Result<DensityMatrix, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = support.min(dim);
    let mut m = CMatrix::zeros(dim, dim);
    let mut total = 0.0;
    for _ in 0..rank {
        let w: f64 = rng.gen_range(0.1..1.0);
        let psi: Vec<_> = (0..support)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        for i in 0..support {
            for j in 0..support {
                m[(i, j)] += psi[i] * psi[j].conj() * (w / norm);
            }
        }
        total += w;
    }
    Ok(DensityMatrix::new(m.unscale(total))?)
}

pub fn steady_options(s: Option<&SteadyConfig>) -> Result<SteadyOptions, RunError> {
    let mut o = SteadyOptions::default();
    if let Some(s) = s {
        o.method = match s.method {
            SteadyMethodConfig::Auto => MethodChoice::Auto,
            SteadyMethodConfig::Nullspace => MethodChoice::Nullspace,
            SteadyMethodConfig::LongTime => MethodChoice::LongTime,
        };
        if let Some(t) = s.tolerance {
            if !(t > 0.0) {
                return Err(bad("steady.tolerance must be positive"));
            }
            o.tolerance = t;
        }
        if let Some(n) = s.nullspace_limit {
            o.nullspace_limit = n;
        }
        if let Some(t) = s.max_time {
            if !(t > 0.0) {
                return Err(bad("steady.max_time must be positive"));
            }
            o.max_time = t;
        }
    }
    Ok(o)
}

pub fn branch(b: BranchConfig) -> Branch {
    match b {
        BranchConfig::Plus => Branch::Plus,
        BranchConfig::Minus => Branch::Minus,
    }
}

pub fn sweep_kinds(kinds: &[String]) -> Result<Vec<ProfileKind>, RunError> {
    kinds
        .iter()
        .map(|k| ProfileKind::parse(k).ok_or_else(|| bad(format!("unknown sweep kind `{k}` (exact | clipped | lorentzian)"))))
        .collect()
}

pub fn kappa_grid(s: &SweepSection) -> Result<Vec<f64>, RunError> {
    match (&s.kappa_sqrt_beta, s.kappa_sqrt_beta_linspace) {
        (Some(v), None) => Ok(v.clone()),
        (None, Some((a, b, n))) => Ok(linspace(a, b, n)),
        _ => Err(bad("sweep needs exactly one of kappa_sqrt_beta and kappa_sqrt_beta_linspace")),
    }
}

pub fn doppler_params(d: &DopplerSection, mode: &ModeParams) -> Result<DopplerParams, RunError> {
    let mut dp = DopplerParams::coherent(d.xi, d.detuning, d.linewidth, d.kappa, mode.mass, mode.hbar);
    match d.light {
        LightConfig::Coherent => {
            if d.spectrum.is_some() || d.argument.is_some() {
                return Err(bad("doppler.spectrum and doppler.argument apply to incoherent light only"));
            }
        }
        LightConfig::Incoherent => {
            let s = d.spectrum.as_ref().ok_or_else(|| bad("incoherent light requires doppler.spectrum"))?;
            dp.regime = Regime::Incoherent {
                spectrum: table(s)?,
                carrier: d.carrier,
                prefactor: d.prefactor,
                argument: argument(&d.argument)?,
            };
        }
    }
    dp.validate()?;
    Ok(dp)
}

pub fn coupling(c: &CouplingConfig) -> Coupling {
    match c.kind {
        CouplingKind::Zero => Coupling::Zero,
        CouplingKind::Tanh => Coupling::Tanh {
            strength: c.strength,
            width: c.width,
        },
        CouplingKind::Linear => Coupling::Linear { strength: c.strength },
    }
}
