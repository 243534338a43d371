//! Simulation and analysis core for auto-regressive coordinate-update Markov
//! chains on `R^d`.
//!
//! At each step one coordinate `i` of the state is replaced by a damped
//! weighted average of the other coordinates plus scaled noise:
//!
//! ```text
//! X_k = A_{I_k} X_{k-1} + b_{I_k}(Z_k),   (A_i x)_i = e_i (P x)_i,   b_i(z) = sigma_i z e_i
//! ```
//!
//! The crate is `no_std` (it needs `alloc`) and contains no IO. It provides
//!
//! - [`model`]: networks, parameters, noise laws, scan policies and the chain step,
//! - [`sphere`]: the noise-averaged walk projected onto the positive unit sphere,
//!   the Hilbert projective metric and the Lyapunov constant estimator,
//! - [`stationary`]: backward-iteration sampling of the stationary law,
//! - [`gaussian`]: exact Gaussian propagation and total variation for `d = 2`,
//! - [`cutoff`]: the cutoff schedule and Monte-Carlo total-variation brackets.
//!
//! Coordinate indices are 0-based throughout this crate. Configuration files and
//! the command line use 1-based indices and convert at the boundary.
//!
//! Every randomized routine takes a `u64` seed. Replica `r` of a Monte-Carlo
//! loop draws from ChaCha stream `r` of that seed (see [`streams`]), so results
//! do not depend on how callers schedule work.
#![no_std]

extern crate alloc;

pub mod cutoff;
pub mod error;
pub mod gaussian;
pub mod model;
pub mod quadrature;
pub mod special;
pub mod sphere;
pub mod stationary;
pub mod stats;
pub mod streams;

pub use error::{Error, Result};
pub use sphere::SphereState;
pub use model::{Model, ModelParams, Network, NoiseKind, NoiseSpec, ScanPolicy, StateVec};

