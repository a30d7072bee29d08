//! Lattice Gaussian coding for the additive white Gaussian noise channel.
//!
//! * [`lattice`]: bases, closest-point search and coset arithmetic.
//! * [`analytics`]: theta series, flatness factor and the checks built on it.
//! * [`sampler`]: exact discrete Gaussian distributions over lattice cosets.
//! * [`scheme`]: the AWGN scheme, its decoders, Monte Carlo error rates and
//!   the analytic exponent, conditions and rate budget.
//! * [`construction_a`]: mod-p lattices from linear codes.

pub mod analytics;
pub mod construction_a;
mod enumerate;
pub mod error;
pub mod lattice;
pub mod rng;
pub mod sampler;
pub mod scheme;

pub use enumerate::TIE_REL;
pub use error::{LatticeError, Result};
pub use lattice::{make_lattice, standard_lattice, Lattice, LatticePoint, Shift, StandardLattice};
pub use rng::RngSeed;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
