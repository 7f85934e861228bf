use thiserror::Error;

/// Errors raised by grid construction, state algebra and propagation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid size {0} is not a power of two >= 64")]
    GridSize(usize),
    #[error("grid extent must be positive and finite, got {0}")]
    GridExtent(f64),
    #[error("wavepacket under-resolved: {0}")]
    UnderResolved(String),
    #[error("states live on different grids")]
    GridMismatch,
    #[error("representation mismatch: expected {expected:?}, found {found:?}")]
    Representation {
        expected: crate::state::Representation,
        found: crate::state::Representation,
    },
    #[error("amplitude arrays have length {found}, grid has {expected} nodes")]
    Length { expected: usize, found: usize },
    #[error("invalid model parameter: {0}")]
    Params(String),
    #[error("invalid pulse: {0}")]
    Pulse(String),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("negative delay tau = {0}")]
    NegativeDelay(f64),
    #[error("grid wraparound at t = {t}: edge probability {edge_mass:e} exceeds 1e-8")]
    Wraparound { t: f64, edge_mass: f64 },
    #[error("time series does not cover the echo window [{lo}, {hi}]")]
    WindowNotCovered { lo: f64, hi: f64 },
    #[error("sweep error: {0}")]
    Sweep(String),
    #[error("fit error: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
