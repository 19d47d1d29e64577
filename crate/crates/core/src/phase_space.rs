//! Wigner and Blokhintsev functions on uniform phase-space grids.
//!
//! Fock-basis Wigner functions use the Laguerre closed form. In oscillator units
//! `ξ = x/ℓ`, `η = pℓ/ħ`, `α = (ξ + iη)/√2` and for `m ≥ n`
//!
//! `W[|m⟩⟨n|] = (1/πħ) (-1)^n √(n!/m!) (2ᾱ)^(m-n) e^(-2|α|²) L_n^(m-n)(4|α|²)`,
//!
//! with the `m < n` case given by complex conjugation.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fock::{Basis, DensityMatrix, ModeParams};
use crate::linalg::{c, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformGrid {
    /// Odd number of points, symmetric about zero, spanning `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, len: usize) -> Self {
        let len = if len.is_multiple_of(2) { len + 1 } else { len }.max(3);
        let step = 2.0 * half_width / (len - 1) as f64;
        UniformGrid {
            start: -half_width,
            step,
            len,
        }
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.point(i)).collect()
    }

    pub fn end(&self) -> f64 {
        self.point(self.len.saturating_sub(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpaceGrid {
    pub x: UniformGrid,
    pub p: UniformGrid,
}

/// Thermal standard deviations `(σ_x, σ_p)` of an oscillator at temperature `θ`.
pub fn thermal_widths(params: &ModeParams, theta: f64) -> (f64, f64) {
    let coth = if theta == 0.0 {
        1.0
    } else {
        1.0 / (params.hbar * params.omega / (2.0 * theta)).tanh()
    };
    let sx = (params.hbar / (2.0 * params.mass * params.omega) * coth).sqrt();
    let sp = (params.mass * params.hbar * params.omega / 2.0 * coth).sqrt();
    (sx, sp)
}

impl PhaseSpaceGrid {
    /// Grid covering `n_sigma` thermal standard deviations in both directions.
    pub fn for_thermal(params: &ModeParams, theta: f64, n_sigma: f64, nx: usize, np: usize) -> Self {
        let (sx, sp) = thermal_widths(params, theta);
        PhaseSpaceGrid {
            x: UniformGrid::symmetric(n_sigma * sx, nx),
            p: UniformGrid::symmetric(n_sigma * sp, np),
        }
    }

    /// True when both axes reach at least `n_sigma` thermal deviations.
    pub fn covers(&self, params: &ModeParams, theta: f64, n_sigma: f64) -> bool {
        let (sx, sp) = thermal_widths(params, theta);
        let reach = |g: &UniformGrid, s: f64| -g.start >= n_sigma * s * 0.999 && g.end() >= n_sigma * s * 0.999;
        reach(&self.x, sx) && reach(&self.p, sp)
    }
}

/// Row-major field with rows indexed by momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Field<T> {
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }
}

/// Wigner function `W(p, x)` of a Fock-basis state; rows follow `grid.p`, columns `grid.x`.
pub fn wigner(rho: &DensityMatrix, params: &ModeParams, grid: &PhaseSpaceGrid) -> Result<Field<f64>> {
    if params.basis != Basis::Fock {
        return Err(Error::UnsupportedBasis {
            reason: "Wigner transform is implemented for the Fock basis".into(),
        });
    }
    let d = rho.dim();
    if d != params.cutoff {
        return Err(Error::DimensionMismatch {
            expected: params.cutoff,
            got: d,
        });
    }
    let m = rho.matrix();
    let l = params.length();
    let hb = params.hbar;
    // √(n!/(n+k)!) is accumulated per diagonal to stay in range
    let mut data = vec![0.0; grid.p.len * grid.x.len];
    let mut lag = vec![0.0; d];
    for ip in 0..grid.p.len {
        let eta = grid.p.point(ip) * l / hb;
        for ix in 0..grid.x.len {
            let xi = grid.x.point(ix) / l;
            let alpha = c(xi, eta) / 2.0f64.sqrt();
            let r2 = alpha.norm_sqr();
            let arg = 4.0 * r2;
            let gauss = (-2.0 * r2).exp();
            let two_abar = alpha.conj() * 2.0;
            let mut acc = 0.0;
            let mut pow = c(1.0, 0.0); // (2ᾱ)^k
            for k in 0..d {
                let count = d - k;
                laguerre_column(k as f64, arg, &mut lag[..count]);
                let mut ratio = 1.0; // √(n!/(n+k)!)
                for j in 1..=k {
                    ratio /= (j as f64).sqrt();
                }
                let mut diag = ZERO;
                for n in 0..count {
                    if n > 0 {
                        ratio *= (n as f64 / (n + k) as f64).sqrt();
                    }
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    // ρ_{n+k,n} multiplies W[|n+k⟩⟨n|]
                    diag += m[(n + k, n)] * (sign * ratio * lag[n]);
                }
                let term = diag * pow;
                // with Hermitian ρ the k and -k diagonals are conjugates
                acc += if k == 0 { term.re } else { 2.0 * term.re };
                pow *= two_abar;
            }
            data[ip * grid.x.len + ix] = acc * gauss / (PI * hb);
        }
    }
    let field = Field {
        rows: grid.p.len,
        cols: grid.x.len,
        data,
    };
    let total: f64 = field.data.iter().sum::<f64>() * grid.x.step * grid.p.step;
    let defect = (total - 1.0).abs();
    if defect > 1e-4 {
        return Err(Error::GridUnderresolved { defect });
    }
    Ok(field)
}

/// Fills `out[n] = L_n^(a)(x)` for `n = 0..out.len()`.
fn laguerre_column(a: f64, x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = 1.0 + a - x;
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + 1.0 + a - x) * out[k] - (kf + a) * out[k - 1]) / (kf + 1.0);
    }
}

/// Generalized Laguerre polynomial `L_n^(a)(x)`.
pub fn laguerre(n: usize, a: f64, x: f64) -> f64 {
    let mut v = vec![0.0; n + 1];
    laguerre_column(a, x, &mut v);
    v[n]
}

/// `λ_k = 2πk/(NΔx)` for `k = -(N-1)/2 .. (N-1)/2`, which makes the transform an
/// exactly invertible DFT on a symmetric odd grid.
pub fn conjugate_lambdas(x: &UniformGrid) -> Vec<f64> {
    let n = x.len as i64;
    let half = (n - 1) / 2;
    (-half..=n - 1 - half)
        .map(|k| 2.0 * PI * k as f64 / (n as f64 * x.step))
        .collect()
}

/// `B(p, λ) = ∫ e^{iλx} W(p, x) dx` by the rectangle rule; rows follow `grid.p`,
/// columns follow `lambdas`.
pub fn blokhintsev(w: &Field<f64>, grid: &PhaseSpaceGrid, lambdas: &[f64]) -> Field<C64> {
    let xs = grid.x.points();
    let mut data = vec![ZERO; w.rows * lambdas.len()];
    let phases: Vec<Vec<C64>> = lambdas
        .iter()
        .map(|&lam| xs.iter().map(|&x| C64::from_polar(grid.x.step, lam * x)).collect())
        .collect();
    for ip in 0..w.rows {
        let row = &w.data[ip * w.cols..(ip + 1) * w.cols];
        for (il, ph) in phases.iter().enumerate() {
            let mut acc = ZERO;
            for (wv, e) in row.iter().zip(ph) {
                acc += e * *wv;
            }
            data[ip * lambdas.len() + il] = acc;
        }
    }
    Field {
        rows: w.rows,
        cols: lambdas.len(),
        data,
    }
}

/// Inverse of [`blokhintsev`] on the full conjugate grid of [`conjugate_lambdas`].
pub fn inverse_blokhintsev(b: &Field<C64>, grid: &PhaseSpaceGrid, lambdas: &[f64]) -> Field<f64> {
    let xs = grid.x.points();
    let norm = 1.0 / (xs.len() as f64 * grid.x.step);
    let mut data = vec![0.0; b.rows * xs.len()];
    for ip in 0..b.rows {
        for (ix, &x) in xs.iter().enumerate() {
            let mut acc = ZERO;
            for (il, &lam) in lambdas.iter().enumerate() {
                acc += b.get(ip, il) * C64::from_polar(norm, -lam * x);
            }
            data[ip * xs.len() + ix] = acc.re;
        }
    }
    Field {
        rows: b.rows,
        cols: xs.len(),
        data,
    }
}

/// Momentum marginal `∫ W(p, x) dx` per grid row.
pub fn momentum_marginal(w: &Field<f64>, grid: &PhaseSpaceGrid) -> Vec<f64> {
    (0..w.rows)
        .map(|i| w.data[i * w.cols..(i + 1) * w.cols].iter().sum::<f64>() * grid.x.step)
        .collect()
}
