//! Open two-spin dynamics with state-dependent disentanglement terms.
//!
//! Modules build on each other in order: [`qcore`] (matrices, states,
//! spectral functions), [`bases`] (operator bases and Bloch/Weyl matrices),
//! [`entangle`] (entanglement measures and Θ operators), [`dynamics`]
//! (master equation and stochastic trajectories) and [`twospin`] (the
//! two-spin model, sweeps and presets).

pub mod bases;
pub mod dynamics;
pub mod entangle;
pub mod error;
pub mod qcore;
pub mod twospin;

pub use error::{Error, Result};
