//! Simulation and analysis of the measurement-induced phase transition on
//! dynamical quantum trees.
//!
//! The crate is organised bottom-up:
//!
//! * [`qmath`]: fixed-size complex linear algebra, Haar sampling, Kraus pairs
//!   and qubit density matrices.
//! * [`tree`]: tree-circuit realizations, node indexing, measurement records,
//!   truncation and the on-disk formats.
//! * [`sampler`]: Born-rule sampling of measurement records from the
//!   expansion process (statevector and branch-recursive backends).
//! * [`decoder`]: linear-time reconstruction of the probe state through the
//!   collapse process.
//! * [`estimator`]: the sign-decoding estimator of the averaged order
//!   parameter, plus exact enumeration for small trees.
//! * [`pool`]: population-dynamics Monte Carlo for `Z_t` and `Z_t^typ`.
//! * [`theory`]: linearized recursion coefficients, front velocity,
//!   critical point and scaling fits.
//! * [`circuits`]: gate-level circuits, weak-measurement blocks and
//!   OpenQASM 2.0 export.

pub mod circuits;
pub mod decoder;
pub mod error;
pub mod estimator;
pub mod pool;
pub mod qmath;
pub mod rng;
pub mod sampler;
pub mod spectral;
pub mod stats;
pub mod theory;
pub mod tree;

pub use error::{Error, Result};

/// Toolkit version embedded in output file headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
