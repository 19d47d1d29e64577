//! Lindblad generators.
//!
//! Every generator is written as `L[ρ] = -(i/ħ)(Gρ - ρG†) + Σ_k A_k ρ A_k†` with the
//! effective operator `G = Ĥ - (iħ/2) Σ_k A_k†A_k`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{self, c, gemm, matmul, max_abs, CMatrix, C64, I, ZERO};

/// Anything that can act as `ρ ↦ L[ρ]` on `dim × dim` matrices.
pub trait Generator: Sync {
    fn dim(&self) -> usize;

    fn hbar(&self) -> f64;

    /// `L[ρ]` for an arbitrary square matrix.
    fn apply(&self, rho: &CMatrix) -> CMatrix;

    /// `L[ρ]` for Hermitian `ρ`; implementations may exploit the symmetry.
    fn apply_hermitian(&self, rho: &CMatrix) -> CMatrix {
        self.apply(rho)
    }

    /// Dissipative part `Σ_k (AρA† - ½{A†A, ρ})` alone.
    fn dissipative(&self, rho: &CMatrix) -> CMatrix;

    /// `‖Gρ‖_max/ħ + Σ_k ‖AρA†‖_max`, the natural size of the terms in `L[ρ]`.
    fn term_scale(&self, rho: &CMatrix) -> f64;

    /// `‖L[ρ]‖_max / term_scale(ρ)`.
    fn relative_residual(&self, rho: &CMatrix) -> f64 {
        let s = self.term_scale(rho);
        let r = max_abs(&self.apply_hermitian(rho));
        if s > 0.0 {
            r / s
        } else {
            r
        }
    }
}

/// Dense generator built from explicit operator matrices.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    hbar: f64,
    h: CMatrix,
    jumps: Vec<CMatrix>,
    jumps_adj: Vec<CMatrix>,
    decay: CMatrix,
    g: CMatrix,
    g_adj: CMatrix,
}

impl Liouvillian {
    pub fn new(h: CMatrix, jumps: Vec<CMatrix>, hbar: f64) -> Result<Self> {
        let d = h.nrows();
        if h.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: h.ncols(),
            });
        }
        for a in &jumps {
            if a.shape() != (d, d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: a.nrows().max(a.ncols()),
                });
            }
        }
        if !(hbar > 0.0) {
            return Err(Error::param("hbar", "must be positive"));
        }
        let jumps_adj: Vec<CMatrix> = jumps.iter().map(|a| a.adjoint()).collect();
        let mut decay = CMatrix::zeros(d, d);
        for (a, ad) in jumps.iter().zip(&jumps_adj) {
            decay += matmul(ad, a);
        }
        let g = &h - &decay * c(0.0, hbar / 2.0);
        let g_adj = g.adjoint();
        Ok(Liouvillian {
            hbar,
            h,
            jumps,
            jumps_adj,
            decay,
            g,
            g_adj,
        })
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.h
    }

    pub fn jumps(&self) -> &[CMatrix] {
        &self.jumps
    }

    pub fn effective(&self) -> &CMatrix {
        &self.g
    }

    /// Heisenberg-picture generator `L^T[O] = (i/ħ)(G†O - OG) + Σ A†OA`.
    pub fn adjoint_apply(&self, op: &CMatrix) -> CMatrix {
        let mut out = (matmul(&self.g_adj, op) - matmul(op, &self.g)) * c(0.0, 1.0 / self.hbar);
        for (a, ad) in self.jumps.iter().zip(&self.jumps_adj) {
            out += matmul(&matmul(ad, op), a);
        }
        out
    }

    /// Dissipative part of the Heisenberg generator.
    pub fn adjoint_dissipative(&self, op: &CMatrix) -> CMatrix {
        let mut out = -(matmul(&self.decay, op) + matmul(op, &self.decay)).scale(0.5);
        for (a, ad) in self.jumps.iter().zip(&self.jumps_adj) {
            out += matmul(&matmul(ad, op), a);
        }
        out
    }

    /// True when conjugation by the index parity `P = diag((-1)^n)` commutes with
    /// the generator, checked on a fixed pseudo-random probe.
    pub fn is_parity_symmetric(&self) -> bool {
        let d = self.dim();
        let probe = CMatrix::from_fn(d, d, |i, j| {
            let t = (i * 31 + j * 17 + 7) as f64;
            c((t * 0.7548).sin(), (t * 0.5698).cos())
        });
        let sign = |i: usize| if i.is_multiple_of(2) { 1.0 } else { -1.0 };
        let conj_p = |m: &CMatrix| CMatrix::from_fn(d, d, |i, j| m[(i, j)] * (sign(i) * sign(j)));
        let lhs = conj_p(&self.apply(&conj_p(&probe)));
        let rhs = self.apply(&probe);
        let scale = max_abs(&rhs).max(f64::MIN_POSITIVE);
        max_abs(&(lhs - &rhs)) <= 1e-10 * scale
    }

    /// Real matrix of the generator restricted to Hermitian matrices, in the
    /// orthonormal coordinates of [`HermitianCoords`].
    ///
    /// Returns a row-major square matrix acting on the coordinates of `coords`; the
    /// caller guarantees the generator maps that subspace into itself.
    pub fn real_matrix(&self, coords: &HermitianCoords) -> Vec<f64> {
        let d = self.dim();
        let n = coords.len();
        let mut out = vec![0.0; n * n];
        let mut m = CMatrix::zeros(d, d);
        let s2 = core::f64::consts::SQRT_2;
        let mut col_buf = vec![0.0; n];
        for (a, &(ci, di, kind)) in coords.items.iter().enumerate() {
            // M = L[E_cd]; then L[E_dc] = M†
            self.unit_image(ci, di, &mut m);
            for (b, &(i, j, k2)) in coords.items.iter().enumerate() {
                // X = image of the basis element at (i, j)
                let (mij, mji) = (m[(i, j)], m[(j, i)]);
                let x_ij = match kind {
                    CoordKind::Diag => mij,
                    CoordKind::Re => (mij + mji.conj()) / s2,
                    CoordKind::Im => (mij - mji.conj()) * I / s2,
                };
                col_buf[b] = match k2 {
                    CoordKind::Diag => x_ij.re,
                    CoordKind::Re => s2 * x_ij.re,
                    CoordKind::Im => s2 * x_ij.im,
                };
            }
            for (b, v) in col_buf.iter().enumerate() {
                out[b * n + a] = *v;
            }
        }
        out
    }

    /// `L[E_cd]` written into `out`.
    fn unit_image(&self, cidx: usize, didx: usize, out: &mut CMatrix) {
        let d = self.dim();
        out.fill(ZERO);
        let f = c(0.0, 1.0 / self.hbar);
        for i in 0..d {
            out[(i, didx)] -= f * self.g[(i, cidx)];
        }
        for j in 0..d {
            out[(cidx, j)] += f * self.g[(j, didx)].conj();
        }
        for a in &self.jumps {
            for j in 0..d {
                let ajd = a[(j, didx)].conj();
                if ajd == ZERO {
                    continue;
                }
                for i in 0..d {
                    out[(i, j)] += a[(i, cidx)] * ajd;
                }
            }
        }
    }
}

impl Generator for Liouvillian {
    fn dim(&self) -> usize {
        self.h.nrows()
    }

    fn hbar(&self) -> f64 {
        self.hbar
    }

    fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = (matmul(&self.g, rho) - matmul(rho, &self.g_adj)) * c(0.0, -1.0 / self.hbar);
        for (a, ad) in self.jumps.iter().zip(&self.jumps_adj) {
            out += matmul(&matmul(a, rho), ad);
        }
        out
    }

    fn apply_hermitian(&self, rho: &CMatrix) -> CMatrix {
        let gr = matmul(&self.g, rho);
        let mut out = (&gr - gr.adjoint()) * c(0.0, -1.0 / self.hbar);
        for (a, ad) in self.jumps.iter().zip(&self.jumps_adj) {
            out += matmul(&matmul(a, rho), ad);
        }
        out
    }

    fn dissipative(&self, rho: &CMatrix) -> CMatrix {
        lindblad_dissipator(&self.jumps, rho)
    }

    fn term_scale(&self, rho: &CMatrix) -> f64 {
        let mut s = max_abs(&matmul(&self.g, rho)) / self.hbar;
        for (a, ad) in self.jumps.iter().zip(&self.jumps_adj) {
            s += max_abs(&matmul(&matmul(a, rho), ad));
        }
        s
    }
}

/// `Σ_k (A ρ A† - ½{A†A, ρ})` for an explicit jump list.
pub fn lindblad_dissipator(jumps: &[CMatrix], rho: &CMatrix) -> CMatrix {
    let d = rho.nrows();
    let mut out = CMatrix::zeros(d, d);
    for a in jumps {
        let ad = a.adjoint();
        let k = matmul(&ad, a);
        out += matmul(&matmul(a, rho), &ad) - (matmul(&k, rho) + matmul(rho, &k)).scale(0.5);
    }
    out
}

/// Full `−(i/ħ)[H, ρ] + Σ_k L^lbd_{A_k}[ρ]` without building a generator.
pub fn lindblad_rhs(h: &CMatrix, jumps: &[CMatrix], hbar: f64, rho: &CMatrix) -> CMatrix {
    linalg::commutator(h, rho) * c(0.0, -1.0 / hbar) + lindblad_dissipator(jumps, rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordKind {
    Diag,
    Re,
    Im,
}

/// Orthonormal real coordinates of Hermitian matrices: diagonal entries, and
/// `√2 Re X_ij`, `√2 Im X_ij` for `i < j`. The matching basis elements are `E_ii`,
/// `(E_ij + E_ji)/√2` and `i(E_ij - E_ji)/√2`. Optionally restricted to index pairs
/// of one parity of `i + j`.
#[derive(Debug, Clone)]
pub struct HermitianCoords {
    pub dim: usize,
    pub items: Vec<(usize, usize, CoordKind)>,
}

impl HermitianCoords {
    pub fn new(dim: usize, parity: Option<usize>) -> Self {
        let mut items = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                if let Some(par) = parity {
                    if (i + j) % 2 != par {
                        continue;
                    }
                }
                if i == j {
                    items.push((i, i, CoordKind::Diag));
                } else {
                    items.push((i, j, CoordKind::Re));
                    items.push((i, j, CoordKind::Im));
                }
            }
        }
        HermitianCoords { dim, items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn to_matrix(&self, v: &[f64]) -> CMatrix {
        let s2 = core::f64::consts::SQRT_2;
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (&(i, j, k), &x) in self.items.iter().zip(v) {
            match k {
                CoordKind::Diag => m[(i, i)] += c(x, 0.0),
                CoordKind::Re => {
                    m[(i, j)] += c(x / s2, 0.0);
                    m[(j, i)] += c(x / s2, 0.0);
                }
                CoordKind::Im => {
                    m[(i, j)] += c(0.0, x / s2);
                    m[(j, i)] += c(0.0, -x / s2);
                }
            }
        }
        m
    }

    pub fn from_matrix(&self, m: &CMatrix) -> Vec<f64> {
        let s2 = core::f64::consts::SQRT_2;
        self.items
            .iter()
            .map(|&(i, j, k)| match k {
                CoordKind::Diag => m[(i, i)].re,
                CoordKind::Re => s2 * m[(i, j)].re,
                CoordKind::Im => s2 * m[(i, j)].im,
            })
            .collect()
    }
}

/// `A ⊗ B` on a bipartite space with the first factor as the slow index.
#[derive(Debug, Clone)]
pub struct KronOp {
    pub left: Option<CMatrix>,
    pub right: Option<CMatrix>,
}

impl KronOp {
    /// `None` factors stand for the identity.
    pub fn new(left: Option<CMatrix>, right: Option<CMatrix>) -> Self {
        KronOp { left, right }
    }

    pub fn adjoint(&self) -> Self {
        KronOp {
            left: self.left.as_ref().map(|m| m.adjoint()),
            right: self.right.as_ref().map(|m| m.adjoint()),
        }
    }

    pub fn dense(&self, d1: usize, d2: usize) -> CMatrix {
        let l = self.left.clone().unwrap_or_else(|| linalg::identity(d1));
        let r = self.right.clone().unwrap_or_else(|| linalg::identity(d2));
        linalg::kron(&l, &r)
    }

    /// `(A ⊗ B) ρ` without forming the Kronecker product.
    pub fn left_mul(&self, d1: usize, d2: usize, rho: &CMatrix) -> CMatrix {
        let n = d1 * d2;
        let cols = rho.ncols();
        let mut cur: Vec<C64> = rho.as_slice().to_vec();
        if let Some(b) = &self.right {
            // storage viewed as a d2 × (d1·cols) column-major matrix
            let mut out = vec![ZERO; cur.len()];
            gemm(d2, d2, d1 * cols, b.as_slice(), &cur, &mut out);
            cur = out;
        }
        if let Some(a) = &self.left {
            // each column is a d2 × d1 block; right-multiply it by Aᵀ
            let at = a.transpose();
            let mut out = vec![ZERO; cur.len()];
            for col in 0..cols {
                let s = col * n;
                gemm(d2, d1, d1, &cur[s..s + n], at.as_slice(), &mut out[s..s + n]);
            }
            cur = out;
        }
        CMatrix::from_vec(n, cols, cur)
    }
}

/// Generator on a two-mode space whose operators are sums of Kronecker products.
#[derive(Debug, Clone)]
pub struct KronLiouvillian {
    d1: usize,
    d2: usize,
    hbar: f64,
    g_terms: Vec<KronOp>,
    jumps: Vec<KronOp>,
    decay_terms: Vec<KronOp>,
}

impl KronLiouvillian {
    /// `h_terms` sum to `Ĥ`; each jump is a single product `A ⊗ B`.
    pub fn new(d1: usize, d2: usize, h_terms: Vec<KronOp>, jumps: Vec<KronOp>, hbar: f64) -> Result<Self> {
        let check = |op: &KronOp| -> Result<()> {
            for (m, d) in [(&op.left, d1), (&op.right, d2)] {
                if let Some(m) = m {
                    if m.shape() != (d, d) {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: m.nrows(),
                        });
                    }
                }
            }
            Ok(())
        };
        for op in h_terms.iter().chain(&jumps) {
            check(op)?;
        }
        let mut decay_terms = Vec::new();
        for j in &jumps {
            let l = j.left.as_ref().map(|a| matmul(&a.adjoint(), a));
            let r = j.right.as_ref().map(|b| matmul(&b.adjoint(), b));
            decay_terms.push(KronOp::new(l, r));
        }
        let mut g_terms = h_terms;
        for t in &decay_terms {
            let scaled = match (&t.left, &t.right) {
                (Some(l), r) => KronOp::new(Some(l * c(0.0, -hbar / 2.0)), r.clone()),
                (None, Some(r)) => KronOp::new(None, Some(r * c(0.0, -hbar / 2.0))),
                (None, None) => KronOp::new(Some(linalg::identity(d1) * c(0.0, -hbar / 2.0)), None),
            };
            g_terms.push(scaled);
        }
        Ok(KronLiouvillian {
            d1,
            d2,
            hbar,
            g_terms,
            jumps,
            decay_terms,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    fn g_left(&self, rho: &CMatrix) -> CMatrix {
        let n = self.d1 * self.d2;
        let mut out = CMatrix::zeros(n, rho.ncols());
        for t in &self.g_terms {
            out += t.left_mul(self.d1, self.d2, rho);
        }
        out
    }

    fn jump_sandwich(&self, j: &KronOp, rho: &CMatrix) -> CMatrix {
        // JρJ† = (J (Jρ)†)†
        let y = j.left_mul(self.d1, self.d2, rho);
        j.left_mul(self.d1, self.d2, &y.adjoint()).adjoint()
    }

    /// Dense matrices of all jump operators.
    pub fn dense_jumps(&self) -> Vec<CMatrix> {
        self.jumps.iter().map(|j| j.dense(self.d1, self.d2)).collect()
    }
}

impl Generator for KronLiouvillian {
    fn dim(&self) -> usize {
        self.d1 * self.d2
    }

    fn hbar(&self) -> f64 {
        self.hbar
    }

    fn apply(&self, rho: &CMatrix) -> CMatrix {
        let gr = self.g_left(rho);
        let grd = self.g_left(&rho.adjoint());
        let mut out = (gr - grd.adjoint()) * c(0.0, -1.0 / self.hbar);
        for j in &self.jumps {
            out += self.jump_sandwich(j, rho);
        }
        out
    }

    fn apply_hermitian(&self, rho: &CMatrix) -> CMatrix {
        let gr = self.g_left(rho);
        let mut out = (&gr - gr.adjoint()) * c(0.0, -1.0 / self.hbar);
        for j in &self.jumps {
            out += self.jump_sandwich(j, rho);
        }
        out
    }

    fn dissipative(&self, rho: &CMatrix) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for (j, k) in self.jumps.iter().zip(&self.decay_terms) {
            let kr = k.left_mul(self.d1, self.d2, rho);
            let rk = k.left_mul(self.d1, self.d2, &rho.adjoint()).adjoint();
            out += self.jump_sandwich(j, rho) - (kr + rk).scale(0.5);
        }
        out
    }

    fn term_scale(&self, rho: &CMatrix) -> f64 {
        let mut s = max_abs(&self.g_left(rho)) / self.hbar;
        for j in &self.jumps {
            s += max_abs(&self.jump_sandwich(j, rho));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_mode_operators, ModeParams};

    fn sample(d: usize, seed: usize) -> CMatrix {
        let m = CMatrix::from_fn(d, d, |i, j| {
            let t = (i * 13 + j * 29 + seed * 101) as f64;
            c((t * 0.37).sin(), (t * 0.91).cos())
        });
        linalg::matmul(&m, &m.adjoint())
    }

    fn toy(d: usize) -> Liouvillian {
        let ops = build_mode_operators(&ModeParams::unit(d)).unwrap();
        let a = ops.displacement(0.4) * c(0.3, 0.0);
        let b = linalg::matmul(&ops.displacement(-0.4), &ops.function_of_p(|p| c((-0.2 * p).exp(), 0.0)));
        Liouvillian::new(ops.h.clone(), vec![a, b], 1.0).unwrap()
    }

    #[test]
    fn adjoint_is_transpose_of_generator() {
        let l = toy(12);
        let rho = sample(12, 1);
        let op = sample(12, 2);
        let lhs = linalg::trace_product(&op, &l.apply(&rho));
        let rhs = linalg::trace_product(&l.adjoint_apply(&op), &rho);
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
    }

    #[test]
    fn real_matrix_matches_action() {
        let l = toy(7);
        let coords = HermitianCoords::new(7, None);
        let r = l.real_matrix(&coords);
        let rho = sample(7, 3);
        let v = coords.from_matrix(&rho);
        let lv = linalg::real_matvec(&r, coords.len(), &v);
        let direct = coords.from_matrix(&l.apply(&rho));
        for (a, b) in lv.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn isotropic_pair_is_parity_symmetric() {
        let ops = build_mode_operators(&ModeParams::unit(10)).unwrap();
        let f = |s: f64| ops.function_of_p(move |p| c((0.3 * s * p).exp(), 0.0));
        let ap = linalg::matmul(&ops.displacement(0.5), &f(1.0));
        let am = linalg::matmul(&ops.displacement(-0.5), &f(-1.0));
        let pair = Liouvillian::new(ops.h.clone(), vec![ap.clone(), am], 1.0).unwrap();
        assert!(pair.is_parity_symmetric());
        let single = Liouvillian::new(ops.h.clone(), vec![ap], 1.0).unwrap();
        assert!(!single.is_parity_symmetric());
    }

    #[test]
    fn kron_generator_matches_dense() {
        let (d1, d2) = (4, 3);
        let h1 = sample(d1, 4);
        let h2 = sample(d2, 5);
        let x1 = sample(d1, 6);
        let chi = sample(d2, 7);
        let j1 = sample(d1, 8) * c(0.1, 0.2);
        let j2 = sample(d2, 9);
        let h_terms = vec![
            KronOp::new(Some(h1.clone()), None),
            KronOp::new(None, Some(h2.clone())),
            KronOp::new(Some(x1.clone()), Some(chi.clone())),
        ];
        let jumps = vec![KronOp::new(Some(j1.clone()), Some(j2.clone()))];
        let kl = KronLiouvillian::new(d1, d2, h_terms.clone(), jumps.clone(), 1.0).unwrap();
        let hd: CMatrix = h_terms.iter().map(|t| t.dense(d1, d2)).fold(CMatrix::zeros(12, 12), |a, b| a + b);
        let dl = Liouvillian::new(hd, vec![jumps[0].dense(d1, d2)], 1.0).unwrap();
        let rho = CMatrix::from_fn(12, 12, |i, j| c((i as f64 * 0.3 + j as f64).sin(), (i * j) as f64 * 0.01));
        assert!(max_abs(&(kl.apply(&rho) - dl.apply(&rho))) < 1e-10);
        assert!(max_abs(&(kl.dissipative(&rho) - dl.dissipative(&rho))) < 1e-10);
        let herm = sample(12, 10);
        assert!(max_abs(&(kl.apply_hermitian(&herm) - dl.apply(&herm))) < 1e-9);
    }
}
