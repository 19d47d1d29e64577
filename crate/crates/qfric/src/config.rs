//! Run configuration: a TOML file whose top-level `kind` selects the experiment.
//!
//! Every table rejects unknown keys. The full schema is documented in `CONFIG.md`
//! at the repository root.

use std::path::PathBuf;

use serde::Deserialize;

use crate::error::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Evolve,
    Steady,
    Sweep,
    NogoAudit,
    FokkerPlanck,
    DopplerCool,
    Nonreciprocal,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Evolve => "evolve",
            Kind::Steady => "steady",
            Kind::Sweep => "sweep",
            Kind::NogoAudit => "nogo-audit",
            Kind::FokkerPlanck => "fokker-planck",
            Kind::DopplerCool => "doppler-cool",
            Kind::Nonreciprocal => "nonreciprocal",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kind: Kind,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Seeds the `random` initial state; otherwise only recorded.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub plot: bool,
    pub mode: Option<ModeConfig>,
    pub dissipator: Option<Vec<TermConfig>>,
    pub initial: Option<StateConfig>,
    pub evolve: Option<EvolveConfig>,
    pub steady: Option<SteadyConfig>,
    pub sweep: Option<SweepSection>,
    pub nogo: Option<NogoSection>,
    pub fokker_planck: Option<FpSection>,
    pub doppler: Option<DopplerSection>,
    pub nonreciprocal: Option<NrSection>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("qfric-out")
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    #[default]
    Fock,
    MomentumGrid,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default)]
    pub basis: BasisKind,
    /// Momentum-grid spacing (momentum-grid basis only).
    pub spacing: Option<f64>,
    #[serde(default)]
    pub center: f64,
}

fn default_cutoff() -> usize {
    40
}

impl Default for ModeConfig {
    fn default() -> Self {
        ModeConfig {
            mass: 1.0,
            omega: 1.0,
            hbar: 1.0,
            cutoff: default_cutoff(),
            basis: BasisKind::Fock,
            spacing: None,
            center: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub kappa: f64,
    #[serde(default)]
    pub isotropic: bool,
    pub profile: ProfileConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKindConfig {
    Constant,
    Exponential,
    ClippedExponential,
    Lorentzian,
    DopplerCoherent,
    DopplerIncoherent,
    Tabulated,
}

/// A friction profile given by kind and a positional parameter list.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub kind: ProfileKindConfig,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Tabulated profile values, or the spectral density of `doppler-incoherent`.
    pub table: Option<TableConfig>,
    /// Optional phase `φ(p)`.
    pub phase: Option<TableConfig>,
    /// `direct` or `reflected` (`doppler-incoherent` only).
    pub argument: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    Thermal,
    Coherent,
    Fock,
    MomentumGaussian,
    Random,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub kind: StateKind,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub t_final: f64,
    pub dt_save: f64,
    #[serde(default = "default_tol")]
    pub atol: f64,
    #[serde(default = "default_tol")]
    pub rtol: f64,
    #[serde(default)]
    pub fatal_truncation: bool,
    #[serde(default = "default_observables")]
    pub observables: Vec<String>,
}

fn default_tol() -> f64 {
    1e-9
}

fn default_observables() -> Vec<String> {
    ["x", "p", "h"].iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SteadyMethodConfig {
    #[default]
    Auto,
    Nullspace,
    LongTime,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyConfig {
    #[serde(default)]
    pub method: SteadyMethodConfig,
    pub tolerance: Option<f64>,
    pub nullspace_limit: Option<usize>,
    pub max_time: Option<f64>,
    /// Reports the Bures distance to the thermal state at this temperature.
    pub reference_theta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BranchConfig {
    Plus,
    #[default]
    Minus,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub theta0: f64,
    #[serde(default)]
    pub branch: BranchConfig,
    /// Explicit `κ√β` values.
    pub kappa_sqrt_beta: Option<Vec<f64>>,
    /// `[start, stop, points]`, used when `kappa_sqrt_beta` is absent.
    pub kappa_sqrt_beta_linspace: Option<(f64, f64, usize)>,
    pub gamma_over_omega: Vec<f64>,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<String>,
    #[serde(default)]
    pub p_clip: f64,
    #[serde(default = "yes")]
    pub isotropic: bool,
}

fn default_kinds() -> Vec<String> {
    vec!["exact".into()]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NogoSection {
    #[serde(default)]
    pub theta0: f64,
    #[serde(default = "default_nogo_kappa")]
    pub kappa_sqrt_beta: f64,
    #[serde(default = "default_nogo_gamma")]
    pub gamma_over_omega: f64,
    #[serde(default)]
    pub p_clip: f64,
    /// `[ξ, Δ, γ, κ]` of the coherent Doppler member.
    #[serde(default = "default_nogo_doppler")]
    pub doppler: [f64; 4],
    #[serde(default = "default_levels")]
    pub n_levels: usize,
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
    #[serde(default = "yes")]
    pub steady_distance: bool,
    #[serde(default = "default_wigner_points")]
    pub wigner_points: usize,
    #[serde(default = "default_n_sigma")]
    pub n_sigma: f64,
}

fn default_nogo_kappa() -> f64 {
    0.3
}
fn default_nogo_gamma() -> f64 {
    0.1
}
fn default_nogo_doppler() -> [f64; 4] {
    [0.05, 1.0, 1.0, 0.3]
}
fn default_levels() -> usize {
    3
}
fn default_thetas() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0]
}
fn default_wigner_points() -> usize {
    61
}
fn default_n_sigma() -> f64 {
    6.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpSection {
    /// Values of `(ħκ)²/⟨p²⟩` to run.
    pub regime: Vec<f64>,
    #[serde(default = "default_detuning_p")]
    pub detuning_p: f64,
    #[serde(default = "default_linewidth_p")]
    pub linewidth_p: f64,
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default = "default_fp_time")]
    pub t_final: f64,
    #[serde(default = "default_fp_saves")]
    pub n_saves: usize,
    #[serde(default = "default_refinement")]
    pub refinement: usize,
}

fn default_detuning_p() -> f64 {
    3.0
}
fn default_linewidth_p() -> f64 {
    2.0
}
fn default_xi() -> f64 {
    2.0
}
fn default_fp_time() -> f64 {
    3.0
}
fn default_fp_saves() -> usize {
    20
}
fn default_refinement() -> usize {
    5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LightConfig {
    #[default]
    Coherent,
    Incoherent,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DopplerSection {
    pub xi: f64,
    pub detuning: f64,
    pub linewidth: f64,
    pub kappa: f64,
    #[serde(default)]
    pub light: LightConfig,
    /// Spectral density `I(ω)` for incoherent light.
    pub spectrum: Option<TableConfig>,
    #[serde(default)]
    pub carrier: f64,
    #[serde(default = "one")]
    pub prefactor: f64,
    /// `direct` or `reflected`.
    pub argument: Option<String>,
    /// Momentum range the incoherent profile must cover.
    #[serde(default = "default_p_max")]
    pub p_max: f64,
    pub t_final: f64,
    pub dt_save: f64,
    #[serde(default = "yes")]
    pub steady: bool,
}

fn default_p_max() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingKind {
    Zero,
    Tanh,
    Linear,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub kind: CouplingKind,
    #[serde(default)]
    pub strength: f64,
    #[serde(default = "one")]
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NrDissipator {
    #[default]
    TwoTerm,
    SingleTerm,
    None,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NrSection {
    #[serde(default)]
    pub controller: ModeConfig,
    #[serde(default)]
    pub target: ModeConfig,
    pub coupling: CouplingConfig,
    pub kappa: f64,
    #[serde(default)]
    pub dissipator: NrDissipator,
    pub controller_state: StateConfig,
    pub targets: [StateConfig; 2],
    pub t_final: f64,
    #[serde(default = "default_nr_saves")]
    pub n_saves: usize,
    #[serde(default = "default_nr_tol")]
    pub atol: f64,
    #[serde(default = "default_nr_tol")]
    pub rtol: f64,
    #[serde(default)]
    pub fatal_truncation: bool,
    /// Controller-deviation tolerance used for the verdict in the manifest.
    pub tol_nr: Option<f64>,
}

fn default_nr_saves() -> usize {
    40
}
fn default_nr_tol() -> f64 {
    1e-10
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Config(e.to_string().trim_end().to_string()))
    }

    pub fn section<'a, T>(&self, s: &'a Option<T>, name: &str) -> Result<&'a T, RunError> {
        s.as_ref().ok_or_else(|| {
            RunError::Config(format!("kind `{}` requires a [{name}] section", self.kind.name()))
        })
    }
}
