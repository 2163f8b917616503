//! Steady-state manifolds of open quantum systems whose time-dependent
//! generators commute at different times.
//!
//! The crate builds generators `L(t) = Σ_k f_k(t) G_k`, checks that
//! `[L(t), L(t')] = 0`, computes the common damping basis and the exact
//! propagator, constructs the steady-state projector from Cesàro limits,
//! decomposes the fixed-point structure into noiseless and noisy factors,
//! and evolves states numerically.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod manifold;
pub mod models;
pub mod operator_space;
pub mod spectral;

pub use error::{Error, Result};

/// Seed used by every randomized step unless overridden.
pub const DEFAULT_SEED: u64 = 0x7c1_5eed;
