//! Two-surface one-dimensional wavepacket dynamics for two-pulse
//! femtosecond excitation: impulsive-limit cat states, split-operator
//! propagation, photon-echo detection and echo-decay fitting.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod state;
pub mod units;

pub use error::{Error, Result};
pub use grid::{make_grid, Grid};
pub use state::{Expectations, Representation, VibronicState};
pub mod analysis;
pub mod analytic;
pub mod cli;
pub mod config;
pub mod model;
pub mod observables;
pub mod propagator;

pub use model::{ModelParams, PulseEvent, PulseShape, Schedule};
