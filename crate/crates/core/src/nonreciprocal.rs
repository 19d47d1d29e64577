//! Two coupled oscillators where a controller drives a target without back-action.
//!
//! `Ĥ = Ĥ₁ + Ĥ₂ + x̂₁χ(x̂₂)` with jump operators `B̂_k = exp(-iκ_k x̂₁) g_k(x̂₂)`.
//! Choosing `κ₁ = -κ₂ = κ` and `g_k² = (M - χ/κ_k)/2ħ` cancels the force that
//! the coupling exerts on the controller and leaves a constant diffusion.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::evolve::{evolve, EvolutionResult, EvolveOptions, Observable};
use crate::fock::{build_mode_operators, Basis, DensityMatrix, ModeOperators, ModeParams};
use crate::linalg::{self, c, max_abs, trace_product, CMatrix, HermitianEigen, C64};
use crate::liouville::{Generator, KronLiouvillian, KronOp};

/// Default cap on `D₁·D₂`.
pub const TWO_MODE_LIMIT: usize = 1024;

/// Ratio `ħκ/√(⟨Ĥ₁⟩m₁)` above which the small-recoil advisory is raised.
pub const RECOIL_ADVISORY: f64 = 0.1;

/// The coupling function `χ(x₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    Zero,
    /// `g·tanh(x/x₀)`, bounded by `|g|`.
    Tanh { strength: f64, width: f64 },
    /// `g·x`, unbounded and rejected by [`build_nr_spec`] unless `g = 0`.
    Linear { strength: f64 },
}

impl Coupling {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Coupling::Zero => 0.0,
            Coupling::Tanh { strength, width } => strength * (x / width).tanh(),
            Coupling::Linear { strength } => strength * x,
        }
    }

    /// `sup |χ|` over the real line, `None` when unbounded.
    pub fn bound(&self) -> Option<f64> {
        match *self {
            Coupling::Zero => Some(0.0),
            Coupling::Tanh { strength, .. } => Some(strength.abs()),
            Coupling::Linear { strength } => (strength == 0.0).then_some(0.0),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Coupling::Zero => Ok(()),
            Coupling::Tanh { strength, width } => {
                if !strength.is_finite() || !(width > 0.0) || !width.is_finite() {
                    return Err(Error::param("coupling", "tanh needs finite strength and positive width"));
                }
                Ok(())
            }
            Coupling::Linear { strength } => {
                if !strength.is_finite() {
                    return Err(Error::param("coupling", "strength must be finite"));
                }
                Ok(())
            }
        }
    }
}

/// Controller (mode 1) and target (mode 2), both harmonic in the Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeSystem {
    pub controller: ModeParams,
    pub target: ModeParams,
    pub coupling: Coupling,
    pub limit: usize,
}

impl TwoModeSystem {
    pub fn new(controller: ModeParams, target: ModeParams, coupling: Coupling) -> Result<Self> {
        let sys = TwoModeSystem {
            controller,
            target,
            coupling,
            limit: TWO_MODE_LIMIT,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        self.controller.validate()?;
        self.target.validate()?;
        self.coupling.validate()?;
        for m in [&self.controller, &self.target] {
            if m.basis != Basis::Fock {
                return Err(Error::UnsupportedBasis {
                    reason: "two-mode systems need harmonic Fock modes".into(),
                });
            }
        }
        if self.controller.hbar != self.target.hbar {
            return Err(Error::param("hbar", "both modes must share ħ"));
        }
        let n = self.controller.cutoff * self.target.cutoff;
        if n > self.limit {
            return Err(Error::param("cutoff", format!("D1*D2 = {n} exceeds the two-mode limit {}", self.limit)));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.controller.cutoff, self.target.cutoff)
    }

    pub fn hbar(&self) -> f64 {
        self.controller.hbar
    }

    /// Basis indices whose controller or target label lies in the top band.
    pub fn guard_indices(&self) -> Vec<usize> {
        let (d1, d2) = self.dims();
        let g1 = self.controller.guard_indices();
        let g2 = self.target.guard_indices();
        (0..d1 * d2).filter(|i| g1.contains(&(i / d2)) || g2.contains(&(i % d2))).collect()
    }
}

/// One term `exp(-iκx̂₁) g(x̂₂)` with `g² = (bound - χ/κ)/2ħ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrTerm {
    pub kappa: f64,
    /// `M = sup|χ/κ|` shared by all terms of a spec.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NRDissipatorSpec {
    pub terms: Vec<NrTerm>,
    pub coupling: Coupling,
    pub hbar: f64,
}

impl NRDissipatorSpec {
    pub fn g_squared(&self, k: usize, x: f64) -> f64 {
        let t = &self.terms[k];
        let r = (t.bound - self.coupling.eval(x) / t.kappa) / (2.0 * self.hbar);
        // non-negative by construction; the tolerance only absorbs rounding
        assert!(r >= -1e-12 * (1.0 + t.bound.abs()), "negative radicand {r} at x = {x}");
        r.max(0.0)
    }

    pub fn g(&self, k: usize, x: f64) -> f64 {
        self.g_squared(k, x).sqrt()
    }

    /// `F^nr(x) = -χ(x) - ħΣκ_k g_k(x)²`.
    pub fn force(&self, x: f64) -> f64 {
        let s: f64 = (0..self.terms.len()).map(|k| self.terms[k].kappa * self.g_squared(k, x)).sum();
        -self.coupling.eval(x) - self.hbar * s
    }

    /// `D^nr(x) = (ħ²/2)Σκ_k² g_k(x)²`.
    pub fn diffusion(&self, x: f64) -> f64 {
        let s: f64 = (0..self.terms.len())
            .map(|k| self.terms[k].kappa * self.terms[k].kappa * self.g_squared(k, x))
            .sum();
        0.5 * self.hbar * self.hbar * s
    }

    /// The same spec with only the first term, a control case that breaks the cancellation.
    pub fn single_term(&self) -> Self {
        NRDissipatorSpec {
            terms: self.terms.iter().take(1).copied().collect(),
            ..self.clone()
        }
    }

    /// `ħκ²M/2` for the canonical two-term choice.
    pub fn expected_diffusion(&self) -> f64 {
        self.terms
            .first()
            .map_or(0.0, |t| 0.5 * self.hbar * t.kappa * t.kappa * t.bound)
    }
}

/// Canonical two-term spec `κ₁ = -κ₂ = κ`.
pub fn build_nr_spec(sys: &TwoModeSystem, kappa: f64) -> Result<NRDissipatorSpec> {
    sys.validate()?;
    if kappa == 0.0 || !kappa.is_finite() {
        return Err(Error::param("kappa", "must be finite and nonzero"));
    }
    let sup = sys.coupling.bound().ok_or(Error::UnboundedCoupling)?;
    let bound = sup / kappa.abs();
    Ok(NRDissipatorSpec {
        terms: vec![NrTerm { kappa, bound }, NrTerm { kappa: -kappa, bound }],
        coupling: sys.coupling,
        hbar: sys.hbar(),
    })
}

/// Grid maxima of `|F^nr|` and of the spread of `D^nr` around `ħκ²M/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CancellationReport {
    pub max_force: f64,
    pub max_diffusion_defect: f64,
    pub diffusion: f64,
}

pub fn cancellation_report(spec: &NRDissipatorSpec, xs: &[f64]) -> CancellationReport {
    let diffusion = spec.expected_diffusion();
    let mut max_force: f64 = 0.0;
    let mut max_diffusion_defect: f64 = 0.0;
    for &x in xs {
        max_force = max_force.max(spec.force(x).abs());
        max_diffusion_defect = max_diffusion_defect.max((spec.diffusion(x) - diffusion).abs());
    }
    CancellationReport {
        max_force,
        max_diffusion_defect,
        diffusion,
    }
}

/// Single-mode operators of both factors plus `x̂₂`'s eigendecomposition.
#[derive(Debug, Clone)]
pub struct TwoModeOperators {
    pub controller: ModeOperators,
    pub target: ModeOperators,
    pub x2_eigen: HermitianEigen,
}

impl TwoModeOperators {
    pub fn new(sys: &TwoModeSystem) -> Result<Self> {
        let controller = build_mode_operators(&sys.controller)?;
        let target = build_mode_operators(&sys.target)?;
        let x2_eigen = HermitianEigen::new(&target.x);
        Ok(TwoModeOperators {
            controller,
            target,
            x2_eigen,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.controller.dim(), self.target.dim())
    }

    /// `f(x̂₂)` on the target factor.
    pub fn function_of_x2(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        self.x2_eigen.map(|x| c(f(x), 0.0))
    }

    /// Eigenvalues of the truncated `x̂₂`, the resolved target range.
    pub fn x2_range(&self) -> &[f64] {
        &self.x2_eigen.values
    }

    /// `A ⊗ 1`.
    pub fn on_controller(&self, a: &CMatrix) -> CMatrix {
        linalg::kron(a, &linalg::identity(self.target.dim()))
    }

    /// `1 ⊗ B`.
    pub fn on_target(&self, b: &CMatrix) -> CMatrix {
        linalg::kron(&linalg::identity(self.controller.dim()), b)
    }

    fn hamiltonian_terms(&self, coupling: &Coupling) -> Vec<KronOp> {
        let mut terms = vec![
            KronOp::new(Some(self.controller.h.clone()), None),
            KronOp::new(None, Some(self.target.h.clone())),
        ];
        if *coupling != Coupling::Zero {
            let chi = self.function_of_x2(|x| coupling.eval(x));
            terms.push(KronOp::new(Some(self.controller.x.clone()), Some(chi)));
        }
        terms
    }

    /// Full generator; `None` gives the purely Hamiltonian (reciprocal) coupling.
    pub fn generator(&self, coupling: &Coupling, spec: Option<&NRDissipatorSpec>) -> Result<KronLiouvillian> {
        let mut jumps = Vec::new();
        if let Some(spec) = spec {
            for (k, t) in spec.terms.iter().enumerate() {
                let e = self.controller.displacement(t.kappa);
                let g = self.function_of_x2(|x| spec.g(k, x));
                jumps.push(KronOp::new(Some(e), Some(g)));
            }
        }
        self.generator_with_jumps(coupling, jumps)
    }

    /// Generator with arbitrary product jump operators, used for control cases.
    pub fn generator_with_jumps(&self, coupling: &Coupling, jumps: Vec<KronOp>) -> Result<KronLiouvillian> {
        let (d1, d2) = self.dims();
        KronLiouvillian::new(d1, d2, self.hamiltonian_terms(coupling), jumps, self.controller.params.hbar)
    }
}

/// `|Tr[x̂₂ L_D[ρ]]|` and `|Tr[p̂₂ L_D[ρ]]|` with `L_D` the dissipative part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetDefects {
    pub x: f64,
    pub p: f64,
    /// `max(‖x̂₂‖, ‖p̂₂‖)·Σ_k Tr[B†Bρ]`.
    pub scale: f64,
}

impl TargetDefects {
    pub fn within(&self, rel: f64) -> bool {
        self.x <= rel * self.scale && self.p <= rel * self.scale
    }
}

/// Target first-moment defects for any two-mode generator.
pub fn target_moment_defects(gen: &KronLiouvillian, ops: &TwoModeOperators, rho: &CMatrix) -> TargetDefects {
    let d = gen.dissipative(rho);
    let x2 = ops.on_target(&ops.target.x);
    let p2 = ops.on_target(&ops.target.p);
    let rate: f64 = gen
        .dense_jumps()
        .iter()
        .map(|b| trace_product(&linalg::matmul(&b.adjoint(), b), rho).re.abs())
        .sum();
    TargetDefects {
        x: trace_product(&x2, &d).norm(),
        p: trace_product(&p2, &d).norm(),
        scale: max_abs(&ops.target.x).max(max_abs(&ops.target.p)) * rate,
    }
}

pub fn verify_target_first_moments(sys: &TwoModeSystem, spec: &NRDissipatorSpec, rho: &CMatrix) -> Result<TargetDefects> {
    let ops = TwoModeOperators::new(sys)?;
    let gen = ops.generator(&sys.coupling, Some(spec))?;
    Ok(target_moment_defects(&gen, &ops, rho))
}

/// Instantaneous controller flows `Tr[O L[ρ]]` split into the pieces that the
/// cancellation argument predicts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerFlows {
    pub dx1: f64,
    pub p1_over_m: f64,
    pub dp1: f64,
    /// `-mω²⟨x̂₁⟩`.
    pub potential_force: f64,
    /// `d⟨p̂₁²⟩/dt` minus the part generated by `Ĥ₁ + Ĥ₂`.
    pub dp1_sq_dissipative: f64,
    pub two_diffusion: f64,
}

pub fn controller_flows(sys: &TwoModeSystem, spec: &NRDissipatorSpec, rho: &CMatrix) -> Result<ControllerFlows> {
    let ops = TwoModeOperators::new(sys)?;
    let full = ops.generator(&sys.coupling, Some(spec))?;
    let hamiltonian = ops.generator(&Coupling::Zero, None)?;
    let x1 = ops.on_controller(&ops.controller.x);
    let p1 = ops.on_controller(&ops.controller.p);
    let p1sq = linalg::matmul(&p1, &p1);
    let l = full.apply(rho);
    let m = sys.controller.mass;
    let w = sys.controller.omega;
    // only the uncoupled Hamiltonian is subtracted; the coupling force cancels against the jumps
    let h_part = trace_product(&p1sq, &hamiltonian.apply(rho)).re;
    Ok(ControllerFlows {
        dx1: trace_product(&x1, &l).re,
        p1_over_m: trace_product(&p1, rho).re / m,
        dp1: trace_product(&p1, &l).re,
        potential_force: -m * w * w * trace_product(&x1, rho).re,
        dp1_sq_dissipative: trace_product(&p1sq, &l).re - h_part,
        two_diffusion: 2.0 * spec.expected_diffusion(),
    })
}

pub const CONTROLLER_OBSERVABLES: [&str; 3] = ["x1", "p1", "p1sq"];
pub const TARGET_OBSERVABLES: [&str; 2] = ["x2", "p2"];

fn observables(ops: &TwoModeOperators) -> Vec<Observable> {
    let x1 = ops.on_controller(&ops.controller.x);
    let p1 = ops.on_controller(&ops.controller.p);
    let p1sq = linalg::matmul(&p1, &p1);
    vec![
        Observable::new("x1", x1),
        Observable::new("p1", p1),
        Observable::new("p1sq", p1sq),
        Observable::new("x2", ops.on_target(&ops.target.x)),
        Observable::new("p2", ops.on_target(&ops.target.p)),
    ]
}

/// Paired-evolution comparison.
#[derive(Debug, Clone)]
pub struct NonreciprocityReport {
    pub times: Vec<f64>,
    /// `[observable][run]` series, observables ordered as [`CONTROLLER_OBSERVABLES`].
    pub controller: Vec<[Vec<f64>; 2]>,
    /// Ordered as [`TARGET_OBSERVABLES`].
    pub target: Vec<[Vec<f64>; 2]>,
    pub controller_deviation: f64,
    pub target_deviation: f64,
    pub truncation_flag: bool,
    /// Largest top-band population seen in either run.
    pub max_guard_population: f64,
    pub advisories: Vec<String>,
}

impl NonreciprocityReport {
    pub fn from_runs(a: &EvolutionResult, b: &EvolutionResult, advisories: Vec<String>) -> Self {
        let real = |r: &EvolutionResult, i: usize| -> Vec<f64> { r.series(i).iter().map(|v| v.re).collect() };
        let n = a.samples.len().min(b.samples.len());
        let pair = |i: usize| -> [Vec<f64>; 2] {
            let mut s = [real(a, i), real(b, i)];
            s[0].truncate(n);
            s[1].truncate(n);
            s
        };
        let controller: Vec<_> = (0..3).map(pair).collect();
        let target: Vec<_> = (3..5).map(pair).collect();
        let dev = |set: &[[Vec<f64>; 2]]| {
            set.iter()
                .flat_map(|[u, v]| u.iter().zip(v).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max)
        };
        NonreciprocityReport {
            times: a.times().into_iter().take(n).collect(),
            controller_deviation: dev(&controller),
            target_deviation: dev(&target),
            controller,
            target,
            truncation_flag: a.truncation_flag() || b.truncation_flag(),
            max_guard_population: a.samples.iter().chain(&b.samples).map(|s| s.guard_population).fold(0.0, f64::max),
            advisories,
        }
    }
}

/// `ħκ/√(⟨Ĥ₁⟩m₁)` for the controller state.
pub fn recoil_ratio(sys: &TwoModeSystem, kappa: f64, rho_c: &DensityMatrix) -> Result<f64> {
    let ops = build_mode_operators(&sys.controller)?;
    let e = rho_c.expect(&ops.h).re;
    Ok(sys.hbar() * kappa.abs() / (e * sys.controller.mass).sqrt())
}

/// Options for [`verify_nonreciprocity`].
#[derive(Debug, Clone, PartialEq)]
pub struct PairedOptions {
    pub n_saves: usize,
    pub evolve: EvolveOptions,
}

impl Default for PairedOptions {
    fn default() -> Self {
        PairedOptions {
            n_saves: 40,
            evolve: EvolveOptions {
                atol: 1e-10,
                rtol: 1e-10,
                ..EvolveOptions::default()
            },
        }
    }
}

/// The two-mode generator in the joint eigenbasis of the truncated `x̂₁` and `x̂₂`.
///
/// There the coupling and all jump operators are diagonal, so only `Ĥ₁` and `Ĥ₂`
/// need matrix products. It is the same generator as [`TwoModeOperators::generator`]
/// up to a unitary change of basis.
#[derive(Debug, Clone)]
pub struct PositionGenerator {
    d1: usize,
    d2: usize,
    hbar: f64,
    h1: KronOp,
    h2: KronOp,
    /// Diagonal of `x̂₁χ(x̂₂) - (iħ/2)Σ_k B_k†B_k`.
    g_diag: Vec<C64>,
    /// Diagonals of the jump operators.
    jumps: Vec<Vec<C64>>,
    /// `W[r, c] = Σ_k b_k[r] conj(b_k[c])`, column-major.
    sandwich: Vec<C64>,
    decay: Vec<f64>,
    /// `V₁ ⊗ V₂`, columns are the basis states.
    basis: CMatrix,
}

impl PositionGenerator {
    pub fn new(ops: &TwoModeOperators, coupling: &Coupling, spec: Option<&NRDissipatorSpec>) -> Self {
        let (d1, d2) = ops.dims();
        let hbar = ops.controller.params.hbar;
        let e1 = HermitianEigen::new(&ops.controller.x);
        let e2 = &ops.x2_eigen;
        let rotate = |v: &CMatrix, h: &CMatrix| linalg::matmul(&v.adjoint(), &linalg::matmul(h, v));
        let n = d1 * d2;
        let mut jumps = Vec::new();
        if let Some(spec) = spec {
            for (k, t) in spec.terms.iter().enumerate() {
                let b: Vec<C64> = (0..n)
                    .map(|r| {
                        let (x1, x2) = (e1.values[r / d2], e2.values[r % d2]);
                        C64::from_polar(spec.g(k, x2), -t.kappa * x1)
                    })
                    .collect();
                jumps.push(b);
            }
        }
        let decay: Vec<f64> = (0..n).map(|r| jumps.iter().map(|b| b[r].norm_sqr()).sum()).collect();
        let g_diag = (0..n)
            .map(|r| c(e1.values[r / d2] * coupling.eval(e2.values[r % d2]), -0.5 * hbar * decay[r]))
            .collect();
        let mut sandwich = vec![C64::new(0.0, 0.0); n * n];
        for b in &jumps {
            for col in 0..n {
                let bc = b[col].conj();
                for row in 0..n {
                    sandwich[col * n + row] += b[row] * bc;
                }
            }
        }
        PositionGenerator {
            d1,
            d2,
            hbar,
            h1: KronOp::new(Some(rotate(&e1.vectors, &ops.controller.h)), None),
            h2: KronOp::new(None, Some(rotate(&e2.vectors, &ops.target.h))),
            g_diag,
            jumps,
            sandwich,
            decay,
            basis: linalg::kron(&e1.vectors, &e2.vectors),
        }
    }

    /// `V†OV`.
    pub fn to_position(&self, op: &CMatrix) -> CMatrix {
        linalg::matmul(&self.basis.adjoint(), &linalg::matmul(op, &self.basis))
    }

    /// `VOV†`.
    pub fn from_position(&self, op: &CMatrix) -> CMatrix {
        linalg::matmul(&self.basis, &linalg::matmul(op, &self.basis.adjoint()))
    }

    fn g_left(&self, rho: &CMatrix) -> CMatrix {
        let mut out = self.h1.left_mul(self.d1, self.d2, rho);
        out += self.h2.left_mul(self.d1, self.d2, rho);
        let n = self.dim();
        for col in 0..rho.ncols() {
            for row in 0..n {
                out[(row, col)] += self.g_diag[row] * rho[(row, col)];
            }
        }
        out
    }

    fn sandwich(&self, rho: &CMatrix) -> CMatrix {
        let n = self.dim();
        CMatrix::from_fn(n, n, |r, col| self.sandwich[col * n + r] * rho[(r, col)])
    }
}

impl Generator for PositionGenerator {
    fn dim(&self) -> usize {
        self.d1 * self.d2
    }

    fn hbar(&self) -> f64 {
        self.hbar
    }

    fn apply(&self, rho: &CMatrix) -> CMatrix {
        let gr = self.g_left(rho);
        let grd = self.g_left(&rho.adjoint());
        (gr - grd.adjoint()) * c(0.0, -1.0 / self.hbar) + self.sandwich(rho)
    }

    fn apply_hermitian(&self, rho: &CMatrix) -> CMatrix {
        let gr = self.g_left(rho);
        (&gr - gr.adjoint()) * c(0.0, -1.0 / self.hbar) + self.sandwich(rho)
    }

    fn dissipative(&self, rho: &CMatrix) -> CMatrix {
        let n = self.dim();
        let mut out = self.sandwich(rho);
        for col in 0..n {
            for r in 0..n {
                out[(r, col)] -= rho[(r, col)] * (0.5 * (self.decay[r] + self.decay[col]));
            }
        }
        out
    }

    fn term_scale(&self, rho: &CMatrix) -> f64 {
        let n = self.dim();
        let mut s = max_abs(&self.g_left(rho)) / self.hbar;
        for b in &self.jumps {
            let mut m: f64 = 0.0;
            for col in 0..n {
                for r in 0..n {
                    m = m.max((b[r] * rho[(r, col)] * b[col].conj()).norm());
                }
            }
            s += m;
        }
        s
    }
}

/// One of the two paired runs; exposed so callers may run them concurrently.
///
/// The guard population is tracked through a projector observable because the
/// evolution runs in the position basis.
pub fn paired_run(
    sys: &TwoModeSystem,
    gen: &PositionGenerator,
    rho: &DensityMatrix,
    t_final: f64,
    opts: &PairedOptions,
) -> Result<EvolutionResult> {
    let ops = TwoModeOperators::new(sys)?;
    let n = gen.dim();
    let guard = sys.guard_indices();
    let projector = CMatrix::from_fn(n, n, |r, col| {
        if r == col && guard.contains(&r) {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let mut obs: Vec<Observable> = observables(&ops);
    obs.push(Observable::new("guard", projector));
    for o in &mut obs {
        o.op = gen.to_position(&o.op);
    }
    let mut eo = opts.evolve.clone();
    eo.guard = Vec::new();
    let rho_pos = DensityMatrix::new_unchecked(gen.to_position(rho.matrix()));
    let dt = t_final / opts.n_saves.max(1) as f64;
    let mut res = evolve(gen, &rho_pos, t_final, dt, &obs, &eo)?;
    let gi = obs.len() - 1;
    for s in &mut res.samples {
        s.guard_population = s.values[gi].re;
        s.truncation_flag = s.guard_population > eo.tail_limit;
        if s.truncation_flag && eo.fatal_truncation {
            return Err(Error::TruncationTrip {
                time: s.t,
                population: s.guard_population,
            });
        }
        s.values.truncate(gi);
    }
    res.observable_names.truncate(gi);
    res.final_state = gen.from_position(&res.final_state);
    Ok(res)
}

/// Evolves `ρ_c ⊗ ρ_t1` and `ρ_c ⊗ ρ_t2`; `spec = None` keeps only the unitary coupling.
pub fn verify_nonreciprocity(
    sys: &TwoModeSystem,
    spec: Option<&NRDissipatorSpec>,
    rho_c: &DensityMatrix,
    targets: (&DensityMatrix, &DensityMatrix),
    t_final: f64,
    opts: &PairedOptions,
) -> Result<NonreciprocityReport> {
    let ops = TwoModeOperators::new(sys)?;
    let gen = PositionGenerator::new(&ops, &sys.coupling, spec);
    let mut advisories = Vec::new();
    if let Some(spec) = spec {
        if let Some(t) = spec.terms.first() {
            let r = recoil_ratio(sys, t.kappa, rho_c)?;
            if r > RECOIL_ADVISORY {
                advisories.push(format!(
                    "hbar*kappa/sqrt(<H1> m1) = {r:.3} exceeds {RECOIL_ADVISORY}; controller moments beyond first order may be affected"
                ));
            }
        }
    }
    let (d1, d2) = sys.dims();
    if rho_c.dim() != d1 {
        return Err(Error::DimensionMismatch { expected: d1, got: rho_c.dim() });
    }
    let mut runs = Vec::with_capacity(2);
    for t in [targets.0, targets.1] {
        if t.dim() != d2 {
            return Err(Error::DimensionMismatch { expected: d2, got: t.dim() });
        }
        let rho = DensityMatrix::new_unchecked(linalg::kron(rho_c.matrix(), t.matrix()));
        runs.push(paired_run(sys, &gen, &rho, t_final, opts)?);
    }
    Ok(NonreciprocityReport::from_runs(&runs[0], &runs[1], advisories))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, thermal_state};

    fn system(d: usize, g: f64) -> TwoModeSystem {
        let m = ModeParams::unit(d);
        TwoModeSystem::new(m, m, Coupling::Tanh { strength: g, width: 1.0 }).unwrap()
    }

    #[test]
    fn cancellation_is_algebraic() {
        let sys = system(8, 0.7);
        let spec = build_nr_spec(&sys, 1.0).unwrap();
        let xs: Vec<f64> = (0..=400).map(|i| -20.0 + 0.1 * i as f64).collect();
        let r = cancellation_report(&spec, &xs);
        assert!(r.max_force <= 1e-10);
        assert!(r.max_diffusion_defect <= 1e-10);
        assert!((r.diffusion - 0.5 * 0.7).abs() < 1e-10);
        let single = cancellation_report(&spec.single_term(), &xs);
        assert!(single.max_force > 0.1);
    }

    #[test]
    fn unbounded_and_zero_couplings() {
        let m = ModeParams::unit(6);
        let lin = TwoModeSystem::new(m, m, Coupling::Linear { strength: 0.3 }).unwrap();
        assert_eq!(build_nr_spec(&lin, 1.0), Err(Error::UnboundedCoupling));
        let zero = TwoModeSystem::new(m, m, Coupling::Zero).unwrap();
        let spec = build_nr_spec(&zero, 0.5).unwrap();
        assert!((0..2).all(|k| spec.g(k, 3.0) == 0.0));
        let big = ModeParams::unit(40);
        assert!(TwoModeSystem::new(big, big, Coupling::Zero).is_err());
    }

    #[test]
    fn target_first_moments_and_control() {
        // the p̂₂ defect vanishes only up to truncation, so use interior-supported states
        let sys = system(32, 0.5);
        let spec = build_nr_spec(&sys, 0.4).unwrap();
        let rho_c = coherent_state(&sys.controller, 0.3, -0.2).unwrap();
        let rho_t = coherent_state(&sys.target, 0.5, 0.6).unwrap();
        let rho = linalg::kron(rho_c.matrix(), rho_t.matrix());
        let d = verify_target_first_moments(&sys, &spec, &rho).unwrap();
        assert!(d.scale > 0.0 && d.within(1e-9), "{d:?}");
        let th = linalg::kron(
            thermal_state(&sys.controller, 0.5).unwrap().matrix(),
            thermal_state(&sys.target, 0.5).unwrap().matrix(),
        );
        assert!(verify_target_first_moments(&sys, &spec, &th).unwrap().within(1e-9));

        let ops = TwoModeOperators::new(&sys).unwrap();
        let e = ops.controller.displacement(0.4);
        let a2 = (&ops.target.x + &ops.target.p * c(0.0, 1.0)).unscale(2f64.sqrt());
        let wrong = ops
            .generator_with_jumps(&sys.coupling, vec![KronOp::new(Some(e), Some(a2))])
            .unwrap();
        let dw = target_moment_defects(&wrong, &ops, &rho);
        assert!(dw.p > 1e-3 * dw.scale, "{dw:?}");
    }

    #[test]
    fn controller_flows_match_construction() {
        let sys = system(14, 0.5);
        let spec = build_nr_spec(&sys, 0.2).unwrap();
        let rho_c = coherent_state(&sys.controller, 0.4, 0.1).unwrap();
        let rho_t = coherent_state(&sys.target, -0.6, 0.3).unwrap();
        let rho = linalg::kron(rho_c.matrix(), rho_t.matrix());
        let f = controller_flows(&sys, &spec, &rho).unwrap();
        assert!((f.dx1 - f.p1_over_m).abs() <= 1e-5 * f.p1_over_m.abs().max(1e-3));
        assert!((f.dp1 - f.potential_force).abs() <= 1e-5 * f.potential_force.abs().max(1e-3));
        assert!((f.dp1_sq_dissipative - f.two_diffusion).abs() <= 1e-4 * f.two_diffusion);
    }

    #[test]
    fn position_generator_matches_product_form() {
        let sys = system(10, 0.5);
        let spec = build_nr_spec(&sys, 0.3).unwrap();
        let ops = TwoModeOperators::new(&sys).unwrap();
        let kron = ops.generator(&sys.coupling, Some(&spec)).unwrap();
        let pos = PositionGenerator::new(&ops, &sys.coupling, Some(&spec));
        let rho = linalg::kron(
            coherent_state(&sys.controller, 0.3, 0.2).unwrap().matrix(),
            coherent_state(&sys.target, -0.4, 0.1).unwrap().matrix(),
        );
        let direct = kron.apply(&rho);
        let via = pos.from_position(&pos.apply(&pos.to_position(&rho)));
        assert!(max_abs(&(direct - via)) < 1e-12);
        let dd = kron.dissipative(&rho);
        let dv = pos.from_position(&pos.dissipative(&pos.to_position(&rho)));
        assert!(max_abs(&(dd - dv)) < 1e-12);
    }

    #[test]
    fn uncoupled_runs_agree() {
        let m = ModeParams::unit(10);
        let sys = TwoModeSystem::new(m, m, Coupling::Zero).unwrap();
        let rho_c = coherent_state(&m, 0.5, 0.0).unwrap();
        let t1 = coherent_state(&m, 0.5, 0.0).unwrap();
        let t2 = coherent_state(&m, -0.5, 0.2).unwrap();
        let opts = PairedOptions {
            n_saves: 4,
            ..PairedOptions::default()
        };
        let r = verify_nonreciprocity(&sys, None, &rho_c, (&t1, &t2), 1.0, &opts).unwrap();
        // only the adaptive step sequences differ between the runs
        assert!(r.controller_deviation < 1e-9);
        assert!(r.target_deviation > 0.1);
    }
}
