//! Dense complex linear algebra helpers on top of `nalgebra`.
//!
//! Matrices are column-major `DMatrix<C64>`. The product kernel here is a plain
//! column-axpy loop that skips structural zeros of the right factor, which is
//! what makes products with diagonal or banded operators cheap.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::DMatrix;
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `out = a * b`, reusing `out`'s allocation.
pub fn matmul_into(out: &mut CMatrix, a: &CMatrix, b: &CMatrix) {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "inner dimensions differ");
    if out.shape() != (m, n) {
        *out = CMatrix::zeros(m, n);
    }
    gemm(m, k, n, a.as_slice(), b.as_slice(), out.as_mut_slice());
}

/// Column-major `out (m×n) = a (m×k) · b (k×n)` on raw slices.
pub fn gemm(m: usize, k: usize, n: usize, a: &[C64], b: &[C64], out: &mut [C64]) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && out.len() >= m * n);
    for j in 0..n {
        let col = &mut out[j * m..(j + 1) * m];
        col.fill(ZERO);
        let bcol = &b[j * k..(j + 1) * k];
        for (kk, &bkj) in bcol.iter().enumerate() {
            if bkj.re == 0.0 && bkj.im == 0.0 {
                continue;
            }
            let acol = &a[kk * m..(kk + 1) * m];
            for (o, &x) in col.iter_mut().zip(acol) {
                o.re += x.re * bkj.re - x.im * bkj.im;
                o.im += x.re * bkj.im + x.im * bkj.re;
            }
        }
    }
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.nrows(), b.ncols());
    matmul_into(&mut out, a, b);
    out
}

pub fn adjoint(a: &CMatrix) -> CMatrix {
    a.adjoint()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    matmul(a, b) - matmul(b, a)
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    matmul(a, b) + matmul(b, a)
}

pub fn trace(a: &CMatrix) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// `Tr[a b]` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Largest entry modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Largest entry of `a - a†`.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut d: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            d = d.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    d
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

fn norm1(a: &CMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
///
/// The argument is scaled by `2^-s` until its 1-norm is at most 1/2, the series is
/// summed until terms drop below machine precision, and the result is squared back.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let nrm = norm1(a);
    let mut s = 0i32;
    if nrm > 0.5 {
        s = (nrm / 0.5).log2().ceil() as i32;
    }
    let scaled = a.scale(0.5f64.powi(s));
    let mut sum = identity(n);
    let mut term = identity(n);
    let mut tmp = CMatrix::zeros(n, n);
    for k in 1..40 {
        matmul_into(&mut tmp, &term, &scaled);
        term = tmp.unscale(k as f64);
        sum += &term;
        if norm1(&term) <= f64::EPSILON * 1e-2 * norm1(&sum) {
            break;
        }
    }
    for _ in 0..s {
        matmul_into(&mut tmp, &sum, &sum);
        core::mem::swap(&mut sum, &mut tmp);
    }
    sum
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(h: &CMatrix) -> Self {
        let eig = hermitian_part(h).symmetric_eigen();
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
        HermitianEigen { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `V diag(f(λ)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let diag: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        self.map_values(&diag)
    }

    pub fn map_values(&self, diag: &[C64]) -> CMatrix {
        let v = &self.vectors;
        let n = v.nrows();
        let mut scaled = v.clone();
        for (j, d) in diag.iter().enumerate() {
            for i in 0..n {
                scaled[(i, j)] *= d;
            }
        }
        matmul(&scaled, &v.adjoint())
    }
}

/// Square root of a Hermitian positive semidefinite matrix; negative eigenvalues
/// are clamped to zero.
pub fn sqrt_psd(h: &CMatrix) -> CMatrix {
    HermitianEigen::new(h).map(|l| c(l.max(0.0).sqrt(), 0.0))
}

/// Dense LU factorization with partial pivoting of a real square matrix
/// stored row-major.
///
/// Pivots that vanish to working precision are replaced by a tiny floor so that
/// the factorization of a singular matrix can drive inverse iteration.
#[derive(Debug, Clone)]
pub struct RealLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    floored_pivots: usize,
}

impl RealLu {
    pub fn factor(mut a: Vec<f64>, n: usize) -> Self {
        assert_eq!(a.len(), n * n);
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        let floor = scale * 1e-300f64.max(f64::EPSILON * 1e-6);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut floored = 0;
        for col in 0..n {
            let mut p = col;
            let mut best = a[col * n + col].abs();
            for r in col + 1..n {
                let v = a[r * n + col].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if p != col {
                for j in 0..n {
                    a.swap(col * n + j, p * n + j);
                }
                perm.swap(col, p);
            }
            let mut piv = a[col * n + col];
            if piv.abs() < floor {
                piv = if piv < 0.0 { -floor } else { floor };
                a[col * n + col] = piv;
                floored += 1;
            }
            let (top, rest) = a.split_at_mut((col + 1) * n);
            let prow = &top[col * n + col + 1..col * n + n];
            for r in 0..(n - col - 1) {
                let row = &mut rest[r * n..(r + 1) * n];
                let l = row[col] / piv;
                row[col] = l;
                if l != 0.0 {
                    for (x, y) in row[col + 1..].iter_mut().zip(prow) {
                        *x -= l * y;
                    }
                }
            }
        }
        RealLu {
            n,
            lu: a,
            perm,
            floored_pivots: floored,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn floored_pivots(&self) -> usize {
        self.floored_pivots
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&y[i + 1..]).map(|(u, v)| u * v).sum();
            y[i] = (y[i] - s) / self.lu[i * n + i];
        }
        b.copy_from_slice(&y);
    }

    /// Solves `Aᵀ x = b` in place.
    pub fn solve_transposed(&self, b: &mut [f64]) {
        let n = self.n;
        let mut z = b.to_vec();
        // Uᵀ z = b (forward, column sweeps keep row-major access contiguous)
        for i in 0..n {
            z[i] /= self.lu[i * n + i];
            let zi = z[i];
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            for (zz, u) in z[i + 1..].iter_mut().zip(row) {
                *zz -= u * zi;
            }
        }
        // Lᵀ w = z (backward)
        for i in (0..n).rev() {
            let wi = z[i];
            let row = &self.lu[i * n..i * n + i];
            for (zz, l) in z[..i].iter_mut().zip(row) {
                *zz -= l * wi;
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        b.copy_from_slice(&x);
    }
}

/// Dense real matrix-vector product, row-major.
pub fn real_matvec(a: &[f64], n_rows: usize, x: &[f64]) -> Vec<f64> {
    let n_cols = x.len();
    (0..n_rows)
        .map(|i| {
            a[i * n_cols..(i + 1) * n_cols]
                .iter()
                .zip(x)
                .map(|(p, q)| p * q)
                .sum()
        })
        .collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram–Schmidt on a set of vectors; returns false if one collapsed.
pub(crate) fn orthonormalize(vs: &mut [Vec<f64>]) -> bool {
    for i in 0..vs.len() {
        for j in 0..i {
            let (head, tail) = vs.split_at_mut(i);
            let proj = dot(&tail[0], &head[j]);
            for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                *x -= proj * y;
            }
        }
        let nrm = dot(&vs[i], &vs[i]).sqrt();
        if !(nrm > 0.0) || !nrm.is_finite() {
            return false;
        }
        for x in vs[i].iter_mut() {
            *x /= nrm;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: &CMatrix, b: &CMatrix) -> f64 {
        max_abs(&(a - b))
    }

    #[test]
    fn matmul_matches_nalgebra() {
        let a = CMatrix::from_fn(5, 4, |i, j| c(i as f64 - j as f64, 0.3 * (i * j) as f64));
        let b = CMatrix::from_fn(4, 3, |i, j| c((i + 2 * j) as f64, -(i as f64)));
        assert!(approx(&matmul(&a, &b), &(&a * &b)) < 1e-12);
    }

    #[test]
    fn expm_of_diagonal_and_rotation() {
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.5, 0.0), c(-3.0, 2.0)]));
        let e = expm(&d);
        assert!((e[(0, 0)] - c(0.5f64.exp(), 0.0)).norm() < 1e-14);
        assert!((e[(1, 1)] - c(-3.0, 2.0).exp()).norm() < 1e-14);
        // exp(-iθσ_y) is a rotation by 2θ... here a large argument exercises squaring.
        let theta = 7.3;
        let gen = CMatrix::from_row_slice(2, 2, &[ZERO, c(-theta, 0.0), c(theta, 0.0), ZERO]);
        let r = expm(&gen);
        assert!((r[(0, 0)].re - theta.cos()).abs() < 1e-12);
        assert!((r[(1, 0)].re - theta.sin()).abs() < 1e-12);
    }

    #[test]
    fn lu_solves_and_transposed_solves() {
        let n = 6;
        let a: Vec<f64> = (0..n * n)
            .map(|k| ((k * 37 % 11) as f64) - 5.0 + if k % (n + 1) == 0 { 9.0 } else { 0.0 })
            .collect();
        let lu = RealLu::factor(a.clone(), n);
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 2.5).collect();
        let mut b = real_matvec(&a, n, &x);
        lu.solve(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
        let at: Vec<f64> = (0..n * n).map(|k| a[(k % n) * n + k / n]).collect();
        let mut bt = real_matvec(&at, n, &x);
        lu.solve_transposed(&mut bt);
        for (u, v) in bt.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_gets_floored_pivot() {
        let lu = RealLu::factor(vec![1.0, 2.0, 2.0, 4.0], 2);
        assert_eq!(lu.floored_pivots(), 1);
    }

    #[test]
    fn hermitian_eigen_sorted_and_reconstructs() {
        let h = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let e = HermitianEigen::new(&h);
        assert!((e.values[0] - 1.0).abs() < 1e-12 && (e.values[1] - 3.0).abs() < 1e-12);
        assert!(approx(&e.map(|l| c(l, 0.0)), &h) < 1e-12);
    }
}
