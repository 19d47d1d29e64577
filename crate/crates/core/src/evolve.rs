//! Adaptive Dormand–Prince 5(4) propagation of `dρ/dt = L[ρ]`.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, EPS_TAIL};
use crate::linalg::{self, c, CMatrix, HermitianEigen, C64};
use crate::liouville::Generator;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub atol: f64,
    pub rtol: f64,
    /// Basis indices whose summed population is watched by the truncation guard.
    pub guard: Vec<usize>,
    pub tail_limit: f64,
    /// Abort with [`Error::TruncationTrip`] instead of flagging.
    pub fatal_truncation: bool,
    /// Diagonalize the state at every saved time to monitor positivity.
    pub check_positivity: bool,
    pub max_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            atol: 1e-9,
            rtol: 1e-9,
            guard: Vec::new(),
            tail_limit: EPS_TAIL,
            fatal_truncation: false,
            check_positivity: true,
            max_steps: 2_000_000,
        }
    }
}

impl EvolveOptions {
    pub fn with_guard(mut self, guard: Vec<usize>) -> Self {
        self.guard = guard;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Observable {
    pub name: String,
    pub op: CMatrix,
}

impl Observable {
    pub fn new(name: &str, op: CMatrix) -> Self {
        Observable {
            name: name.into(),
            op,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// `Tr[O ρ(t)]` in observable order.
    pub values: Vec<C64>,
    pub guard_population: f64,
    pub trace_defect: f64,
    /// Smallest eigenvalue, when positivity monitoring is on.
    pub min_eigenvalue: Option<f64>,
    pub truncation_flag: bool,
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub observable_names: Vec<String>,
    pub samples: Vec<Sample>,
    pub final_state: CMatrix,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl EvolutionResult {
    pub fn truncation_flag(&self) -> bool {
        self.samples.iter().any(|s| s.truncation_flag)
    }

    /// True when some saved state had an eigenvalue below `-1e-6`.
    pub fn positivity_flag(&self) -> bool {
        self.samples
            .iter()
            .any(|s| s.min_eigenvalue.is_some_and(|m| m < -1e-6))
    }

    pub fn max_trace_defect(&self) -> f64 {
        self.samples.iter().map(|s| s.trace_defect).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.samples
            .iter()
            .filter_map(|s| s.min_eigenvalue)
            .fold(None, |acc, m| Some(acc.map_or(m, |a: f64| a.min(m))))
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Time series of one observable.
    pub fn series(&self, idx: usize) -> Vec<C64> {
        self.samples.iter().map(|s| s.values[idx]).collect()
    }

    pub fn series_by_name(&self, name: &str) -> Option<Vec<C64>> {
        self.observable_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.series(i))
    }
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus the embedded fourth-order ones.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in i + 1..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

fn axpy_into(out: &mut CMatrix, base: &CMatrix, terms: &[(f64, &CMatrix)], h: f64) {
    out.copy_from(base);
    let o = out.as_mut_slice();
    for (w, k) in terms {
        if *w == 0.0 {
            continue;
        }
        let s = w * h;
        for (x, y) in o.iter_mut().zip(k.as_slice()) {
            x.re += s * y.re;
            x.im += s * y.im;
        }
    }
}

/// Stepper state shared between [`evolve`] and the long-time steady-state search.
struct Stepper<'a, G: Generator + ?Sized> {
    gen: &'a G,
    atol: f64,
    rtol: f64,
    h: f64,
    k1: CMatrix,
    accepted: usize,
    rejected: usize,
}

impl<'a, G: Generator + ?Sized> Stepper<'a, G> {
    fn new(gen: &'a G, y: &CMatrix, atol: f64, rtol: f64, hint: f64) -> Self {
        let k1 = gen.apply_hermitian(y);
        let ny = linalg::max_abs(y).max(1e-300);
        let nf = linalg::max_abs(&k1);
        let h = if nf > 0.0 { (0.01 * ny / nf).min(hint) } else { hint };
        Stepper {
            gen,
            atol,
            rtol,
            h: h.max(1e-12 * hint),
            k1,
            accepted: 0,
            rejected: 0,
        }
    }

    /// Advances `y` from `t` to exactly `t_end`.
    fn advance(&mut self, y: &mut CMatrix, t: &mut f64, t_end: f64, max_steps: usize) -> Result<()> {
        let n = y.nrows();
        let mut stage = CMatrix::zeros(n, n);
        let mut ynew = CMatrix::zeros(n, n);
        let mut ks: Vec<CMatrix> = Vec::with_capacity(6);
        while *t < t_end {
            if self.accepted + self.rejected >= max_steps {
                return Err(Error::NoConvergence {
                    reason: alloc::format!("step budget of {max_steps} exhausted at t = {}", *t),
                });
            }
            let remaining = t_end - *t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            ks.clear();
            for (s, row) in A.iter().enumerate() {
                let mut terms: Vec<(f64, &CMatrix)> = Vec::with_capacity(6);
                terms.push((row[0], &self.k1));
                for (j, k) in ks.iter().enumerate() {
                    terms.push((row[j + 1], k));
                }
                if s == 5 {
                    axpy_into(&mut ynew, y, &terms, h);
                } else {
                    axpy_into(&mut stage, y, &terms, h);
                    let k = self.gen.apply_hermitian(&stage);
                    ks.push(k);
                }
            }
            let k7 = self.gen.apply_hermitian(&ynew);
            // error estimate
            let mut err: f64 = 0.0;
            {
                let all: [&CMatrix; 7] = [&self.k1, &ks[0], &ks[1], &ks[2], &ks[3], &ks[4], &k7];
                let yv = y.as_slice();
                let nv = ynew.as_slice();
                for idx in 0..yv.len() {
                    let mut e = C64::new(0.0, 0.0);
                    for (w, k) in E.iter().zip(all.iter()) {
                        if *w != 0.0 {
                            e += k.as_slice()[idx] * *w;
                        }
                    }
                    let sc = self.atol + self.rtol * yv[idx].norm().max(nv[idx].norm());
                    err = err.max((e * h).norm() / sc);
                }
            }
            if !err.is_finite() {
                err = 1e10;
            }
            if err <= 1.0 {
                *t = if last { t_end } else { *t + h };
                core::mem::swap(y, &mut ynew);
                hermitize(y);
                self.k1 = k7;
                self.accepted += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || fac < 1.0 {
                    self.h = h * fac;
                }
            } else {
                self.rejected += 1;
                self.h = h * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if self.h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepSizeCollapse {
                        time: *t,
                        step: self.h,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Evolves `rho0` to `t_final`, saving at every multiple of `dt_save` and at the end.
pub fn evolve<G: Generator + ?Sized>(
    gen: &G,
    rho0: &DensityMatrix,
    t_final: f64,
    dt_save: f64,
    observables: &[Observable],
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    if rho0.dim() != gen.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            got: rho0.dim(),
        });
    }
    if !(t_final >= 0.0) || !(dt_save > 0.0) {
        return Err(Error::param("t_final", "need t_final >= 0 and dt_save > 0"));
    }
    let n_saves = (t_final / dt_save - 1e-9).ceil().max(0.0) as usize;
    let mut save_times: Vec<f64> = (0..=n_saves).map(|k| (k as f64 * dt_save).min(t_final)).collect();
    save_times.dedup();
    let mut y = rho0.matrix().clone();
    let mut t = 0.0;
    let mut stepper = Stepper::new(gen, &y, opts.atol, opts.rtol, dt_save);
    let mut samples = Vec::with_capacity(save_times.len());
    for &ts in &save_times {
        stepper.advance(&mut y, &mut t, ts, opts.max_steps)?;
        let sample = record(&y, ts, observables, opts);
        if sample.truncation_flag && opts.fatal_truncation {
            return Err(Error::TruncationTrip {
                time: ts,
                population: sample.guard_population,
            });
        }
        samples.push(sample);
    }
    Ok(EvolutionResult {
        observable_names: observables.iter().map(|o| o.name.clone()).collect(),
        samples,
        final_state: y,
        accepted_steps: stepper.accepted,
        rejected_steps: stepper.rejected,
    })
}

fn record(y: &CMatrix, t: f64, observables: &[Observable], opts: &EvolveOptions) -> Sample {
    let guard_population: f64 = opts.guard.iter().map(|&i| y[(i, i)].re).sum();
    Sample {
        t,
        values: observables.iter().map(|o| linalg::trace_product(&o.op, y)).collect(),
        guard_population,
        trace_defect: (linalg::trace(y) - c(1.0, 0.0)).norm(),
        min_eigenvalue: opts.check_positivity.then(|| HermitianEigen::new(y).min()),
        truncation_flag: guard_population > opts.tail_limit,
    }
}

/// Propagates a Hermitian matrix for time `t` and returns the final state only.
pub fn propagate<G: Generator + ?Sized>(gen: &G, rho: &CMatrix, t: f64, atol: f64, rtol: f64) -> Result<CMatrix> {
    let mut y = rho.clone();
    let mut now = 0.0;
    let mut stepper = Stepper::new(gen, &y, atol, rtol, t.max(1e-12));
    stepper.advance(&mut y, &mut now, t, usize::MAX)?;
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_mode_operators, coherent_state, ModeParams};
    use crate::liouville::Liouvillian;
    use alloc::vec;

    #[test]
    fn closed_oscillator_follows_ehrenfest() {
        let params = ModeParams::unit(40);
        let ops = build_mode_operators(&params).unwrap();
        let l = Liouvillian::new(ops.h.clone(), vec![], 1.0).unwrap();
        let rho = coherent_state(&params, 1.0, 0.5).unwrap();
        let obs = [Observable::new("x", ops.x.clone())];
        let res = evolve(&l, &rho, 6.0, 0.5, &obs, &EvolveOptions::default().with_guard(params.guard_indices())).unwrap();
        for s in &res.samples {
            let exact = s.t.cos() + 0.5 * s.t.sin();
            assert!((s.values[0].re - exact).abs() < 1e-6, "{} {}", s.t, s.values[0].re);
            assert!(s.trace_defect < 1e-6);
        }
        assert_eq!(res.samples.len(), 13);
        assert!(!res.truncation_flag());
    }

    #[test]
    fn two_level_decay_matches_exponential() {
        let sm = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let h = CMatrix::zeros(2, 2);
        let l = Liouvillian::new(h, vec![sm], 1.0).unwrap();
        let rho = DensityMatrix::from_populations(&[0.0, 1.0]).unwrap();
        let pop = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let res = evolve(&l, &rho, 4.0, 1.0, &[Observable::new("n", pop)], &EvolveOptions::default()).unwrap();
        for s in &res.samples {
            assert!((s.values[0].re - (-0.25 * s.t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn fatal_guard_trips() {
        let params = ModeParams::unit(8);
        let ops = build_mode_operators(&params).unwrap();
        let l = Liouvillian::new(ops.h.clone(), vec![ops.x.clone() * c(2.0, 0.0)], 1.0).unwrap();
        let rho = DensityMatrix::from_populations(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let opts = EvolveOptions {
            fatal_truncation: true,
            ..EvolveOptions::default().with_guard(params.guard_indices())
        };
        assert!(matches!(
            evolve(&l, &rho, 5.0, 1.0, &[], &opts),
            Err(Error::TruncationTrip { .. })
        ));
    }
}
