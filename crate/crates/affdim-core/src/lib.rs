//! Numerical toolkit for planar self-affine measures.
//!
//! Everything is built around a finite system of invertible affine
//! contractions of the plane together with a probability vector. The crate
//! provides:
//!
//! - exact 2x2 singular-value geometry and computable metrics on the affine
//!   group ([`affine`]),
//! - cylinder-word machinery and seeded attractor sampling ([`ifs`]),
//! - Lyapunov exponents, Furstenberg measures and structural hypothesis
//!   checks ([`spectral`]),
//! - dyadic frames and a scale-entropy calculus for empirical measures
//!   ([`frames`], [`entropy`]),
//! - exact closest-pair search over cylinder maps for exponential-separation
//!   diagnostics ([`separation`]),
//! - the Lyapunov-dimension formula, entropy-budget accounting and the
//!   end-to-end verification pipeline ([`dimension`]),
//! - measures on the affine group, action convolutions and entropy-growth
//!   experiments ([`convolution`]).
//!
//! All stochastic routines take explicit 64-bit seeds and derive per-work-item
//! substreams, so results are reproducible bit-for-bit regardless of thread
//! count.

pub mod affine;
pub mod config;
pub mod convolution;
pub mod dimension;
pub mod entropy;
mod error;
pub mod fixtures;
pub mod frames;
pub mod ifs;
pub mod linalg;
pub mod measure;
pub mod rng;
pub mod separation;
pub mod spectral;

pub use error::{Error, Result};

/// Tool version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
