//! Translationally invariant Markovian open quantum systems ("quantum friction")
//! simulated in a truncated Fock basis.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! file system, threads or configuration lives in the `qfric` companion crate.
//!
//! Module map:
//!
//! - [`fock`]: mode operators, density matrices, thermal states, Bures distance
//! - [`phase_space`]: Wigner and Blokhintsev functions on uniform grids
//! - [`profile`], [`dissipators`]: jump operators `exp(-iκx) f(p)`, friction forces,
//!   second-moment flows and the translational-invariance audit
//! - [`liouville`], [`evolve`], [`steady`]: the generator, adaptive propagation and
//!   steady states
//! - [`thermo`]: optimal thermalization profiles and the (κ, Γ) sweep
//! - [`nogo`]: eigenstate / thermal-state non-stationarity audits
//! - [`fokker_planck`]: the weak-recoil momentum-space Fokker–Planck limit
//! - [`doppler`]: Doppler-cooling friction profiles
//! - [`nonreciprocal`]: two-oscillator nonreciprocal coupling

#![no_std]
// `!(x > 0.0)` deliberately rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod doppler;
pub mod dissipators;
pub mod error;
pub mod evolve;
pub mod fock;
pub mod fokker_planck;
pub mod linalg;
pub mod liouville;
pub mod nogo;
pub mod nonreciprocal;
pub mod phase_space;
pub mod profile;
pub mod steady;
pub mod thermo;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
