#![allow(dead_code)]

use qfric_core::dissipators::{DissipatorSpec, DissipatorTerm};
use qfric_core::fock::DensityMatrix;
use qfric_core::linalg::{self, c, CMatrix, C64};
use qfric_core::profile::{FrictionProfile, Shape, Table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random mixed state of rank ≤ `rank` supported on the lowest `support` levels.
pub fn random_state(rng: &mut ChaCha8Rng, dim: usize, support: usize, rank: usize) -> DensityMatrix {
    let support = support.min(dim);
    let mut m = CMatrix::zeros(dim, dim);
    let mut total = 0.0;
    for _ in 0..rank {
        let w: f64 = rng.gen_range(0.1..1.0);
        let psi: Vec<C64> = (0..support)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..support {
            for j in 0..support {
                m[(i, j)] += psi[i] * psi[j].conj() * (w / (norm * norm));
            }
        }
        total += w;
    }
    DensityMatrix::new(m.unscale(total)).unwrap()
}

/// Random friction profile from the smooth families, optionally with a tabulated phase.
///
/// Widths stay above about 2.5 in units of `√(mħω)` so that the profile is resolved
/// by the p̂ spectrum of a D = 40..60 Fock basis.
pub fn random_profile(rng: &mut ChaCha8Rng, allow_phase: bool) -> FrictionProfile {
    let amp = rng.gen_range(0.1..0.8);
    let shape = match rng.gen_range(0..4) {
        0 => Shape::Constant,
        1 => Shape::Exponential {
            rate: rng.gen_range(-0.3..0.3),
        },
        2 => Shape::Lorentzian {
            c1: rng.gen_range(0.5..2.0),
            c2: rng.gen_range(2.5..4.0),
            c3: rng.gen_range(-1.0..1.0),
        },
        _ => Shape::DopplerCoherent {
            detuning: rng.gen_range(0.5..2.0),
            linewidth: rng.gen_range(2.0..4.0),
            kappa: rng.gen_range(0.2..0.6),
            mass: 1.0,
            hbar: 1.0,
        },
    };
    let mut prof = FrictionProfile::new(shape, amp).unwrap();
    if allow_phase && rng.gen_bool(0.3) {
        // smooth phase a·sin(p/ℓ + φ₀), finely tabulated
        let (a, l, p0) = (rng.gen_range(0.1..0.5), rng.gen_range(2.0..4.0), rng.gen_range(0.0..6.0));
        let ys = (0..=4000).map(|i| a * ((-40.0 + 0.02 * i as f64) / l + p0).sin()).collect();
        prof = prof.with_phase(Table::uniform(-40.0, 0.02, ys).unwrap());
    }
    prof
}

/// Random spec of one or two terms, isotropic or not.
pub fn random_spec(rng: &mut ChaCha8Rng, allow_phase: bool) -> DissipatorSpec {
    let n = rng.gen_range(1..=2);
    let terms = (0..n)
        .map(|_| {
            let kappa = rng.gen_range(0.1..0.6) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let prof = random_profile(rng, allow_phase);
            if rng.gen_bool(0.5) {
                DissipatorTerm::isotropic(kappa, prof)
            } else {
                DissipatorTerm::new(kappa, prof)
            }
        })
        .collect();
    DissipatorSpec::new(terms)
}

pub fn trace_defect(m: &CMatrix) -> f64 {
    linalg::trace(m).norm()
}
