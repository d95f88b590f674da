//! Named analytic initial-data presets.
//!
//! Exact formulas (amplitudes `a`, `b`, `c` are the velocity, height and
//! entropy amplitudes):
//!
//! * `zero`   — u₀ = 0, h₀ = 0.
//! * `shear`  — u₀ = a(sin y, 0),              h₀ = b cos x.
//! * `rigid`  — u₀ = a(−sin y, sin x),         h₀ = b cos x cos y
//!   (the periodization of a rigid rotation Ω(−y, x) near the origin).
//! * `storm`  — u₀ = a(−cos x sin y, sin x cos y), h₀ = b cos x cos y
//!   (divergence-free vortex with negative vorticity at the origin, the
//!   post-storm configuration).
//! * `steepen` — u₀ = a(sin x, 0), h₀ = 0 (one-dimensional steepening data
//!   used by the life-span study).
//! * `random-bandlimited` — seeded random modes with max(|k₁|,|k₂|) ≤ 4,
//!   rescaled until the threshold margin at the requested τ is ≥ 0.5.
//!
//! Entropy data, when requested, are always c·cos x·sin y.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::TorusGrid;
use crate::pressureless::threshold_analyze;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Zero,
    Shear,
    Rigid,
    Storm,
    Steepen,
    RandomBandlimited,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Preset::Zero),
            "shear" => Ok(Preset::Shear),
            "rigid" => Ok(Preset::Rigid),
            "storm" => Ok(Preset::Storm),
            "steepen" => Ok(Preset::Steepen),
            "random-bandlimited" => Ok(Preset::RandomBandlimited),
            other => Err(Error::Config(format!("data: unknown preset '{other}'"))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Preset::Zero => "zero",
            Preset::Shear => "shear",
            Preset::Rigid => "rigid",
            Preset::Storm => "storm",
            Preset::Steepen => "steepen",
            Preset::RandomBandlimited => "random-bandlimited",
        };
        write!(f, "{s}")
    }
}

/// A preset plus its amplitudes and seed; serializable so sweep specs can
/// carry it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub preset: Preset,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub h_amplitude: f64,
    #[serde(default)]
    pub s_amplitude: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_amplitude() -> f64 {
    1.0
}

impl DataSpec {
    pub fn new(preset: Preset) -> Self {
        Self {
            preset,
            amplitude: 1.0,
            h_amplitude: 0.0,
            s_amplitude: 0.0,
            seed: 0,
        }
    }

    pub fn amplitude(mut self, a: f64) -> Self {
        self.amplitude = a;
        self
    }

    pub fn h_amplitude(mut self, b: f64) -> Self {
        self.h_amplitude = b;
        self
    }

    pub fn s_amplitude(mut self, c: f64) -> Self {
        self.s_amplitude = c;
        self
    }

    pub fn seed(mut self, s: u64) -> Self {
        self.seed = s;
        self
    }

    /// Sample the preset on the grid. `tau` is only used by
    /// `random-bandlimited` for its margin rescaling.
    pub fn build(&self, grid: TorusGrid, tau: f64) -> Result<InitialData> {
        let a = self.amplitude;
        let b = self.h_amplitude;
        let (u0, h0) = match self.preset {
            Preset::Zero => (VectorField::zeros(grid), ScalarField::zeros(grid)),
            Preset::Shear => (
                VectorField::from_fn(grid, |_, y| (a * y.sin(), 0.0)),
                ScalarField::from_fn(grid, |x, _| b * x.cos()),
            ),
            Preset::Rigid => (
                VectorField::from_fn(grid, |x, y| (-a * y.sin(), a * x.sin())),
                ScalarField::from_fn(grid, |x, y| b * x.cos() * y.cos()),
            ),
            Preset::Storm => (
                VectorField::from_fn(grid, |x, y| {
                    (-a * x.cos() * y.sin(), a * x.sin() * y.cos())
                }),
                ScalarField::from_fn(grid, |x, y| b * x.cos() * y.cos()),
            ),
            Preset::Steepen => (
                VectorField::from_fn(grid, |x, _| (a * x.sin(), 0.0)),
                ScalarField::zeros(grid),
            ),
            Preset::RandomBandlimited => {
                let (u0, h0) = random_bandlimited(grid, a, b, self.seed, tau)?;
                (u0, h0)
            }
        };
        let s0 = if self.s_amplitude != 0.0 {
            let c = self.s_amplitude;
            Some(ScalarField::from_fn(grid, |x, y| c * x.cos() * y.sin()))
        } else {
            None
        };
        Ok(InitialData { u0, h0, s0 })
    }
}

/// Initial fields for a run: velocity, height anomaly, optional entropy.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub u0: VectorField,
    pub h0: ScalarField,
    pub s0: Option<ScalarField>,
}

impl InitialData {
    /// Entropy field, zero when the preset did not specify one.
    pub fn entropy_or_zero(&self) -> ScalarField {
        self.s0
            .clone()
            .unwrap_or_else(|| ScalarField::zeros(self.h0.grid()))
    }
}

/// Band-limited (modes ≤ 4) seeded random data, amplitude-rescaled until
/// the threshold margin at `tau` is at least 0.5.
fn random_bandlimited(
    grid: TorusGrid,
    amplitude: f64,
    h_amplitude: f64,
    seed: u64,
    tau: f64,
) -> Result<(VectorField, ScalarField)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for kx in -4i64..=4 {
        for ky in -4i64..=4 {
            if kx == 0 && ky == 0 {
                continue;
            }
            // One phase/amplitude pair per (velocity component, height).
            let row: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            modes.push((kx as f64, ky as f64, row));
        }
    }
    let sample = |grid: TorusGrid, pick: usize, modes: &[(f64, f64, [f64; 6])]| {
        ScalarField::from_fn(grid, |x, y| {
            modes
                .iter()
                .map(|&(kx, ky, row)| {
                    let phase = kx * x + ky * y;
                    row[pick] * phase.cos() + row[pick + 1] * phase.sin()
                })
                .sum::<f64>()
        })
    };
    let raw_u = VectorField::new(sample(grid, 0, &modes), sample(grid, 2, &modes))?;
    let raw_h = sample(grid, 4, &modes);
    // Normalize to unit max speed, then shrink until the margin clears 0.5.
    let speed = raw_u.linf_norm().max(1e-300);
    let mut scale = amplitude / speed;
    for _ in 0..60 {
        let u0 = raw_u.scale(scale);
        let report = threshold_analyze(&u0, tau)?;
        if report.margin >= 0.5 {
            let h_scale = if raw_h.linf_norm() > 0.0 {
                h_amplitude / raw_h.linf_norm()
            } else {
                0.0
            };
            return Ok((u0, raw_h.scale(h_scale)));
        }
        scale *= 0.5;
    }
    Err(Error::Config(
        "data: could not rescale random data to margin >= 0.5".into(),
    ))
}
