//! Stationary states of a Lindblad generator.
//!
//! The nullspace method works on the real matrix `R` of the generator restricted
//! to Hermitian matrices. When the generator commutes with index parity, `R` splits
//! into the even sector (which holds every state with a unique stationary point)
//! and the odd sector; only the even one is solved, the odd one is probed for a
//! spurious null vector. The smallest singular value comes from inverse iteration
//! with an LU factorization whose vanishing pivots are floored. The second smallest
//! is read off the bordered matrix `[[R, u₁], [v₁ᵀ, 0]]`, which is well conditioned
//! exactly when the nullspace is one dimensional.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::evolve;
use crate::fock::DensityMatrix;
use crate::linalg::{self, c, dot, orthonormalize, real_matvec, CMatrix, HermitianEigen, RealLu};
use crate::liouville::{Generator, HermitianCoords, Liouvillian};

/// Target residual `‖L[ρ]‖_max`.
pub const EPS_SS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyMethod {
    Nullspace,
    LongTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MethodChoice {
    /// Nullspace up to `nullspace_limit`, long-time evolution beyond.
    #[default]
    Auto,
    Nullspace,
    LongTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyOptions {
    pub method: MethodChoice,
    pub tolerance: f64,
    pub nullspace_limit: usize,
    /// Also look for a null vector in the odd parity sector.
    pub check_odd_sector: bool,
    pub initial_horizon: f64,
    pub max_time: f64,
    pub atol: f64,
    pub rtol: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions {
            method: MethodChoice::Auto,
            tolerance: EPS_SS,
            nullspace_limit: 90,
            check_odd_sector: true,
            initial_horizon: 20.0,
            max_time: 1e5,
            atol: 1e-12,
            rtol: 1e-11,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyStateResult {
    pub state: DensityMatrix,
    /// `‖L[ρ]‖_max`.
    pub residual: f64,
    pub relative_residual: f64,
    pub converged: bool,
    pub method: SteadyMethod,
    /// More than one stationary direction was found.
    pub degenerate: bool,
    /// Smallest and second smallest singular values of the restricted generator
    /// (nullspace method only).
    pub sigma: Option<(f64, f64)>,
    /// Most negative eigenvalue before clamping.
    pub raw_min_eigenvalue: f64,
    /// Total evolution time used (long-time method only).
    pub evolution_time: f64,
}

pub fn steady_state(l: &Liouvillian, opts: &SteadyOptions) -> Result<SteadyStateResult> {
    match opts.method {
        MethodChoice::Nullspace => steady_state_nullspace(l, opts),
        MethodChoice::LongTime => steady_state_long_time(l, None, opts),
        MethodChoice::Auto if l.dim() <= opts.nullspace_limit => steady_state_nullspace(l, opts),
        MethodChoice::Auto => steady_state_long_time(l, None, opts),
    }
}

/// Deterministic pseudo-random seed vector.
fn seed(n: usize, salt: u64) -> Vec<f64> {
    let mut s = 0x9E37_79B9_7F4A_7C15u64 ^ salt;
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 && n.is_finite() {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Right and left singular vectors for the smallest singular value, plus the value.
struct NullPair {
    right: Vec<f64>,
    left: Vec<f64>,
    sigma: f64,
}

/// Inverse iteration on `(RᵀR)⁻¹ = R⁻¹R⁻ᵀ`.
fn smallest_singular(r: &[f64], lu: &RealLu, start: Vec<f64>, iters: usize) -> NullPair {
    let n = lu.dim();
    let mut v = start;
    normalize(&mut v);
    let mut w = v.clone();
    for _ in 0..iters {
        w.copy_from_slice(&v);
        lu.solve_transposed(&mut w);
        normalize(&mut w);
        v.copy_from_slice(&w);
        lu.solve(&mut v);
        normalize(&mut v);
    }
    let rv = real_matvec(r, n, &v);
    let sigma = dot(&rv, &rv).sqrt();
    // u₁ ∝ R v₁ when σ₁ > 0; otherwise the last left iterate is the best estimate.
    let mut left = w;
    if sigma > 0.0 {
        let mut cand = rv;
        normalize(&mut cand);
        if dot(&cand, &left).abs() > 0.5 {
            left = cand;
        }
    }
    NullPair { right: v, left, sigma }
}

/// The bordered matrix `[[R, u₁], [v₁ᵀ, 0]]`, nonsingular exactly when the nullspace
/// of `R` is one dimensional.
struct Bordered {
    k: Vec<f64>,
    lu: RealLu,
}

impl Bordered {
    fn new(r: &[f64], n: usize, pair: &NullPair) -> Self {
        let m = n + 1;
        let mut k = vec![0.0; m * m];
        for i in 0..n {
            k[i * m..i * m + n].copy_from_slice(&r[i * n..(i + 1) * n]);
            k[i * m + n] = pair.left[i];
            k[n * m + i] = pair.right[i];
        }
        let lu = RealLu::factor(k.clone(), m);
        Bordered { k, lu }
    }

    /// Smallest singular value, a proxy for `σ₂` of `R`.
    fn sigma_min(&self) -> f64 {
        let m = self.lu.dim();
        let mut vs = vec![seed(m, 3), seed(m, 4)];
        orthonormalize(&mut vs);
        for _ in 0..4 {
            for v in vs.iter_mut() {
                self.lu.solve_transposed(v);
                self.lu.solve(v);
            }
            if !orthonormalize(&mut vs) || !orthonormalize(&mut vs) {
                return 0.0;
            }
        }
        // Rayleigh–Ritz on the block
        let kv: Vec<Vec<f64>> = vs.iter().map(|v| real_matvec(&self.k, m, v)).collect();
        let g = nalgebra::Matrix2::new(
            dot(&kv[0], &kv[0]),
            dot(&kv[0], &kv[1]),
            dot(&kv[1], &kv[0]),
            dot(&kv[1], &kv[1]),
        );
        g.symmetric_eigenvalues().min().max(0.0).sqrt()
    }

    /// Iterative refinement of the null vector: solve `Rδ + μu₁ = Rv`, `v₁ᵀδ = 0`
    /// and keep `v - δ` while the residual shrinks.
    fn refine(&self, r: &[f64], v: &mut Vec<f64>) {
        let n = v.len();
        let norm = |x: &[f64]| x.iter().fold(0.0f64, |m, y| m.max(y.abs()));
        let mut res = real_matvec(r, n, v);
        let mut best = norm(&res);
        for _ in 0..3 {
            let mut rhs = res.clone();
            rhs.push(0.0);
            self.lu.solve(&mut rhs);
            let cand: Vec<f64> = v.iter().zip(&rhs).map(|(a, d)| a - d).collect();
            let cres = real_matvec(r, n, &cand);
            let cn = norm(&cres);
            if !(cn < 0.5 * best) {
                break;
            }
            *v = cand;
            res = cres;
            best = cn;
        }
    }
}

fn degeneracy_threshold(l: &Liouvillian, sigma1: f64) -> f64 {
    (10.0 * sigma1).max(1e-10 * linalg::max_abs(l.hamiltonian()).max(1.0))
}

/// Nullspace solve of `L[ρ] = 0`, `Tr ρ = 1`.
pub fn steady_state_nullspace(l: &Liouvillian, opts: &SteadyOptions) -> Result<SteadyStateResult> {
    let d = l.dim();
    let parity = l.is_parity_symmetric();
    let coords = HermitianCoords::new(d, parity.then_some(0));
    let n = coords.len();
    let r = l.real_matrix(&coords);
    let lu = RealLu::factor(r.clone(), n);
    let mut start = coords.from_matrix(&linalg::identity(d));
    for (x, s) in start.iter_mut().zip(seed(n, 1)) {
        *x += 1e-3 * s;
    }
    let mut pair = smallest_singular(&r, &lu, start, 3);
    drop(lu);
    let sigma1 = pair.sigma;
    let bordered = Bordered::new(&r, n, &pair);
    let mut sigma2 = bordered.sigma_min();
    if parity && opts.check_odd_sector {
        let odd = HermitianCoords::new(d, Some(1));
        if !odd.is_empty() {
            let ro = l.real_matrix(&odd);
            let luo = RealLu::factor(ro.clone(), odd.len());
            let po = smallest_singular(&ro, &luo, seed(odd.len(), 2), 3);
            sigma2 = sigma2.min(po.sigma);
        }
    }
    let degenerate = sigma2 < degeneracy_threshold(l, sigma1);
    if !degenerate {
        bordered.refine(&r, &mut pair.right);
    }
    drop(bordered);
    let mut m = coords.to_matrix(&pair.right);
    let tr = linalg::trace(&m).re;
    if tr.abs() < 1e-300 {
        return Err(Error::NoConvergence {
            reason: "null vector is traceless".into(),
        });
    }
    m /= c(tr, 0.0);
    finish(l, m, SteadyMethod::Nullspace, degenerate, Some((sigma1, sigma2)), 0.0, opts)
}

fn finish(
    gen: &dyn Generator,
    mut m: CMatrix,
    method: SteadyMethod,
    degenerate: bool,
    sigma: Option<(f64, f64)>,
    evolution_time: f64,
    opts: &SteadyOptions,
) -> Result<SteadyStateResult> {
    let eig = HermitianEigen::new(&m);
    let raw_min = eig.min();
    if raw_min < -1e-6 && !degenerate {
        return Err(Error::NegativeSteadyState { min_eigenvalue: raw_min });
    }
    if raw_min < 0.0 && !degenerate {
        m = eig.map(|v| c(v.max(0.0), 0.0));
        let tr = linalg::trace(&m).re;
        m /= c(tr, 0.0);
    }
    let residual = linalg::max_abs(&gen.apply_hermitian(&m));
    let relative_residual = gen.relative_residual(&m);
    Ok(SteadyStateResult {
        state: DensityMatrix::new_unchecked(m),
        residual,
        relative_residual,
        converged: residual <= opts.tolerance,
        method,
        degenerate,
        sigma,
        raw_min_eigenvalue: raw_min,
        evolution_time,
    })
}

/// Evolves until the residual drops below the tolerance, doubling the
/// horizon between checks. Starts from the maximally mixed state by default.
pub fn steady_state_long_time(
    gen: &dyn Generator,
    initial: Option<&DensityMatrix>,
    opts: &SteadyOptions,
) -> Result<SteadyStateResult> {
    let d = gen.dim();
    let mut y = match initial {
        Some(rho) => rho.matrix().clone(),
        None => linalg::identity(d) / c(d as f64, 0.0),
    };
    let mut horizon = opts.initial_horizon;
    let mut elapsed = 0.0;
    loop {
        y = evolve::propagate(gen, &y, horizon, opts.atol, opts.rtol)?;
        elapsed += horizon;
        let res = linalg::max_abs(&gen.apply_hermitian(&y));
        if res <= opts.tolerance {
            let tr = linalg::trace(&y).re;
            y /= c(tr, 0.0);
            return finish(gen, y, SteadyMethod::LongTime, false, None, elapsed, opts);
        }
        if elapsed >= opts.max_time {
            return Err(Error::NoConvergence {
                reason: alloc::format!("residual {res:.3e} after evolving to t = {elapsed}"),
            });
        }
        horizon *= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{bures_distance, build_mode_operators, thermal_state, ModeParams};

    fn thermal_bath(d: usize, n_th: f64, gamma: f64) -> (Liouvillian, ModeParams) {
        let params = ModeParams::unit(d);
        let ops = build_mode_operators(&params).unwrap();
        let a = CMatrix::from_fn(d, d, |i, j| if j == i + 1 { c((j as f64).sqrt(), 0.0) } else { c(0.0, 0.0) });
        let jumps = vec![
            a.clone() * c((gamma * (n_th + 1.0)).sqrt(), 0.0),
            a.adjoint() * c((gamma * n_th).sqrt(), 0.0),
        ];
        (Liouvillian::new(ops.h.clone(), jumps, 1.0).unwrap(), params)
    }

    #[test]
    fn thermal_bath_relaxes_to_gibbs_state() {
        let (l, params) = thermal_bath(30, 0.2, 0.1);
        let res = steady_state_nullspace(&l, &SteadyOptions::default()).unwrap();
        assert!(res.converged, "{}", res.relative_residual);
        assert!(!res.degenerate);
        // n̄ = 1/(e^{1/θ} - 1)
        let theta = 1.0 / (1.0f64 / 0.2 + 1.0).ln();
        let gibbs = thermal_state(&params, theta).unwrap();
        assert!(bures_distance(&res.state, &gibbs).unwrap() < 1e-5);
    }

    #[test]
    fn long_time_agrees_with_nullspace() {
        let (l, _) = thermal_bath(12, 0.3, 0.5);
        let a = steady_state_nullspace(&l, &SteadyOptions::default()).unwrap();
        let b = steady_state_long_time(&l, None, &SteadyOptions::default()).unwrap();
        assert!(b.converged);
        assert!(bures_distance(&a.state, &b.state).unwrap() < 1e-5);
    }

    #[test]
    fn unitary_dynamics_is_degenerate() {
        let params = ModeParams::unit(10);
        let ops = build_mode_operators(&params).unwrap();
        let l = Liouvillian::new(ops.h.clone(), vec![], 1.0).unwrap();
        let res = steady_state_nullspace(&l, &SteadyOptions::default()).unwrap();
        assert!(res.degenerate);
    }
}
