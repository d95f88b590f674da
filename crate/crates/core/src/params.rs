//! Flow parameters: Rossby and Froude/Mach numbers, their ratio δ = τ/σ²,
//! the adiabatic exponent and the equation family.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Equation family evolved by the solver and approximated by `approx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Rotating shallow water; fixed γ = 2.
    Rsw,
    /// Isentropic gas with γ-power pressure law.
    Isentropic,
    /// Ideal gas with an entropy field.
    Ideal,
}

impl Family {
    pub fn has_entropy(&self) -> bool {
        matches!(self, Family::Ideal)
    }

    /// Factor multiplying `(1/σ + h)∇·u` in the transported-height equation:
    /// 1 for shallow water, γ−1 for the isentropic height variable,
    /// (γ−1)/2 for the ideal-gas normalized pressure.
    pub fn divergence_factor(&self, gamma: f64) -> f64 {
        match self {
            Family::Rsw => 1.0,
            Family::Isentropic => gamma - 1.0,
            Family::Ideal => 0.5 * (gamma - 1.0),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Rsw => write!(f, "rsw"),
            Family::Isentropic => write!(f, "isentropic"),
            Family::Ideal => write!(f, "ideal"),
        }
    }
}

/// Nondimensional parameters of a run.
///
/// τ is the Rossby number (inverse rotational forcing), σ the Froude or
/// Mach number (inverse pressure forcing), δ = τ/σ² their ratio. The
/// theorem regime assumes σ ≤ 1; fixed-τ sweeps push σ above 1, so values
/// larger than 1 are accepted and only flagged by [`FlowParams::sigma_in_regime`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub tau: f64,
    pub sigma: f64,
    /// Cached ratio τ/σ².
    pub delta: f64,
    pub gamma: f64,
    pub family: Family,
    /// Grid points per side.
    pub n: usize,
    /// CFL constant for explicit stepping.
    pub cfl: f64,
}

impl FlowParams {
    pub fn new(family: Family, tau: f64, sigma: f64, gamma: f64, n: usize, cfl: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::Config(format!("tau: must be > 0, got {tau}")));
        }
        if !(sigma > 0.0) {
            return Err(Error::Config(format!("sigma: must be > 0, got {sigma}")));
        }
        let gamma = if family == Family::Rsw { 2.0 } else { gamma };
        if !(gamma > 1.0) {
            return Err(Error::Config(format!("gamma: must be > 1, got {gamma}")));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Config(format!("cfl: must lie in (0, 1], got {cfl}")));
        }
        Ok(Self {
            tau,
            sigma,
            delta: tau / (sigma * sigma),
            gamma,
            family,
            n,
            cfl,
        })
    }

    /// Same parameters with τ, σ replaced (δ recomputed).
    pub fn with_tau_sigma(&self, tau: f64, sigma: f64) -> Result<Self> {
        Self::new(self.family, tau, sigma, self.gamma, self.n, self.cfl)
    }

    /// One rotation period of the fast dynamics.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.tau
    }

    /// Whether σ lies in the theorem regime σ ≤ 1.
    pub fn sigma_in_regime(&self) -> bool {
        self.sigma <= 1.0
    }

    /// Symmetrized sound-speed coefficient √(γ−1)/σ + ((γ−1)/2)·p at a given
    /// pointwise value of the normalized height/pressure.
    pub fn pressure_coefficient(&self, p: f64) -> f64 {
        (self.gamma - 1.0).sqrt() / self.sigma + 0.5 * (self.gamma - 1.0) * p
    }
}

/// Resolve (τ, σ, δ) from any two of the three, checking consistency when
/// all three are given. Used by configuration loading.
pub fn resolve_tau_sigma_delta(
    tau: Option<f64>,
    sigma: Option<f64>,
    delta: Option<f64>,
) -> Result<(f64, f64)> {
    match (tau, sigma, delta) {
        (Some(t), Some(s), None) => Ok((t, s)),
        (Some(t), None, Some(d)) => {
            if d <= 0.0 {
                return Err(Error::Config(format!("delta: must be > 0, got {d}")));
            }
            Ok((t, (t / d).sqrt()))
        }
        (None, Some(s), Some(d)) => Ok((d * s * s, s)),
        (Some(t), Some(s), Some(d)) => {
            let implied = t / (s * s);
            if (implied - d).abs() > 1e-12 * d.abs().max(1.0) {
                return Err(Error::Config(format!(
                    "delta: inconsistent with tau/sigma^2 = {implied}, got {d}"
                )));
            }
            Ok((t, s))
        }
        _ => Err(Error::Config(
            "tau/sigma/delta: at least two of the three are required".into(),
        )),
    }
}
