//! Error type shared by every module.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A field contained NaN or Inf where finite values are required.
    #[error("non-finite value {value} at flat index {index}")]
    NonFinite { index: usize, value: f64 },

    /// Sobolev norms are only defined here for s ≥ 0.
    #[error("negative Sobolev index {0}")]
    NegativeSobolevIndex(f64),

    /// Two fields on different grids were combined.
    #[error("grid mismatch: {left} vs {right} points per side")]
    GridMismatch { left: usize, right: usize },

    /// The Riccati denominator I + τJ(I − e^{tJ/τ})M₀ became singular.
    #[error("threshold breakdown at t = {t}: |det| = {det:.3e} for M0 = {m0:?}")]
    ThresholdBreakdown { t: f64, det: f64, m0: [[f64; 2]; 2] },

    /// The flow-map inversion did not converge within the iteration cap.
    #[error("flow-map inversion failure at t = {t}: worst residual {residual:.3e}")]
    InversionFailure { t: f64, residual: f64 },

    /// The relative vorticity crossed zero, so the conserved-ratio transport
    /// is undefined.
    #[error("vorticity degeneracy: phi = {phi:.3e} at t = {t}")]
    VorticityDegeneracy { t: f64, phi: f64 },

    /// Normalized variables require 1 + σh > 0 everywhere.
    #[error("vacuum: min(1 + sigma*h) = {min:.3e}")]
    Vacuum { min: f64 },

    /// A requested time step exceeds the admissible CFL step.
    #[error("time step {dt:.3e} exceeds admissible {admissible:.3e}")]
    StepTooLarge { dt: f64, admissible: f64 },

    /// Invalid parameter or configuration value; the message names the key.
    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// Snapshot file did not match the expected layout.
    #[error("snapshot format: {0}")]
    SnapshotFormat(String),
}
