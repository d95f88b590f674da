//! rotlab: a numerical laboratory for rapidly rotating shallow-water and
//! Euler flows on the 2D torus `[0, 2π)²`.
//!
//! The library is organised around three layers:
//!
//! * [`grid`], [`field`], [`spectral`] — uniform-grid fields with spectral
//!   differentiation, two-thirds dealiasing, Sobolev norms and trigonometric
//!   off-grid interpolation; binary snapshots live in [`snapshot`].
//! * [`pressureless`] and [`approx`] — the closed-form rotating pressureless
//!   flow (trajectories, Riccati gradient matrix, Eulerian reconstruction)
//!   and the periodic two-term approximation `(h₂, u₂, S₂)` built on it,
//!   including normalized-variable transforms and the vacuum guard.
//! * [`solver`] and [`experiments`] — pseudo-spectral RK4 integration of the
//!   full symmetrized systems (shallow-water, isentropic and ideal-gas
//!   families) with breakdown detection, plus scripted studies: periodicity,
//!   residual/error scaling in `δ = τ/σ²`, life-span growth and the
//!   near-inertial-oscillation scenario.

pub mod approx;
pub mod error;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod params;
pub mod presets;
pub mod pressureless;
pub mod rotation;
pub mod snapshot;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{ScalarField, VectorField};
pub use grid::TorusGrid;
pub use params::{Family, FlowParams};
pub use rotation::{Mat2, Vec2};
