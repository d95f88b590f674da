//! Spectral machinery: 2D FFTs, differentiation by ik multiplication,
//! two-thirds dealiasing, Sobolev norms and trigonometric interpolation.
//!
//! Conventions: the forward transform is normalized by 1/n², so the zeroth
//! coefficient is the mean of the field and `f(x) = Σ_k f̂_k e^{i k·x}`.
//! Wavenumbers per axis run over the integers −n/2+1 … n/2; the Nyquist
//! mode k = n/2 is annihilated by differentiation (its odd derivative is
//! sign-ambiguous on an even grid).

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::TorusGrid;
use crate::rotation::{Mat2, Vec2};
use once_cell::sync::Lazy;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

/// Differentiation axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

static PLANS: Lazy<Mutex<HashMap<usize, PlanPair>>> = Lazy::new(|| Mutex::new(HashMap::new()));

fn plans(n: usize) -> PlanPair {
    let mut cache = PLANS.lock().expect("fft plan cache poisoned");
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Spectral coefficients of a real field, same flat layout as the samples:
/// bin `kyb * n + kxb`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Forward transform, normalized so `coeffs[0]` is the field mean.
    pub fn forward(field: &ScalarField) -> Spectrum {
        let grid = field.grid();
        let n = grid.n();
        let mut buf: Vec<Complex64> = field
            .values()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft2(&mut buf, n, true);
        let scale = 1.0 / (n * n) as f64;
        for c in &mut buf {
            *c *= scale;
        }
        Spectrum { grid, coeffs: buf }
    }

    /// Inverse transform back to real samples (imaginary parts discarded).
    pub fn inverse(&self) -> ScalarField {
        let n = self.grid.n();
        let mut buf = self.coeffs.clone();
        fft2(&mut buf, n, false);
        ScalarField::from_values(self.grid, buf.iter().map(|c| c.re).collect())
            .expect("layout preserved")
    }

    /// Multiply by ik along `axis`; the Nyquist mode is zeroed.
    pub fn derivative(&self, axis: Axis) -> Spectrum {
        let n = self.grid.n();
        let nyquist = n / 2;
        let mut out = self.coeffs.clone();
        for kyb in 0..n {
            let ky = self.grid.wavenumber(kyb);
            for kxb in 0..n {
                let kx = self.grid.wavenumber(kxb);
                let idx = kyb * n + kxb;
                let (k, at_nyquist) = match axis {
                    Axis::X => (kx, kxb == nyquist),
                    Axis::Y => (ky, kyb == nyquist),
                };
                out[idx] = if at_nyquist {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, k as f64) * out[idx]
                };
            }
        }
        Spectrum {
            grid: self.grid,
            coeffs: out,
        }
    }

    /// Zero every mode with max(|k₁|, |k₂|) > n/3 (two-thirds rule).
    pub fn dealias(&self) -> Spectrum {
        let n = self.grid.n();
        let mut out = self.coeffs.clone();
        for kyb in 0..n {
            let ky = self.grid.wavenumber(kyb).unsigned_abs() as usize;
            for kxb in 0..n {
                let kx = self.grid.wavenumber(kxb).unsigned_abs() as usize;
                if 3 * kx.max(ky) > n {
                    out[kyb * n + kxb] = Complex64::new(0.0, 0.0);
                }
            }
        }
        Spectrum {
            grid: self.grid,
            coeffs: out,
        }
    }

    /// H^s norm (2π √Σ (1+|k|²)^s |f̂_k|²).
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let n = self.grid.n();
        let mut sum = 0.0;
        for kyb in 0..n {
            let ky = self.grid.wavenumber(kyb) as f64;
            for kxb in 0..n {
                let kx = self.grid.wavenumber(kxb) as f64;
                let c = self.coeffs[kyb * n + kxb];
                sum += (1.0 + kx * kx + ky * ky).powf(s) * c.norm_sqr();
            }
        }
        2.0 * PI * sum.sqrt()
    }
}

fn fft2(buf: &mut [Complex64], n: usize, forward: bool) {
    let (fwd, inv) = plans(n);
    let plan = if forward { fwd } else { inv };
    // Rows (x varies fastest).
    for row in buf.chunks_exact_mut(n) {
        plan.process(row);
    }
    // Columns via gather/scatter.
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for (i, c) in col.iter_mut().enumerate() {
            *c = buf[i * n + j];
        }
        plan.process(&mut col);
        for (i, c) in col.iter().enumerate() {
            buf[i * n + j] = *c;
        }
    }
}

/// ∂f/∂axis by spectral differentiation. Rejects non-finite input.
pub fn spectral_derivative(f: &ScalarField, axis: Axis) -> Result<ScalarField> {
    f.ensure_finite()?;
    Ok(Spectrum::forward(f).derivative(axis).inverse())
}

/// Both partial derivatives from a single forward transform.
pub fn gradient(f: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    f.ensure_finite()?;
    Ok(gradient_unchecked(f))
}

/// [`gradient`] without the finiteness check; NaNs propagate through the
/// transforms, which lets time steppers detect breakdown themselves.
pub fn gradient_unchecked(f: &ScalarField) -> (ScalarField, ScalarField) {
    let spec = Spectrum::forward(f);
    (
        spec.derivative(Axis::X).inverse(),
        spec.derivative(Axis::Y).inverse(),
    )
}

/// Two-thirds dealiasing in physical space.
pub fn dealias(f: &ScalarField) -> ScalarField {
    Spectrum::forward(f).dealias().inverse()
}

/// H^s norm of a field; `s` must be ≥ 0.
pub fn sobolev_norm(f: &ScalarField, s: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::NegativeSobolevIndex(s));
    }
    f.ensure_finite()?;
    Ok(Spectrum::forward(f).sobolev_norm(s))
}

/// H^s norm of a vector field, (‖u⁽¹⁾‖_s² + ‖u⁽²⁾‖_s²)^½.
pub fn sobolev_norm_vec(v: &VectorField, s: f64) -> Result<f64> {
    let a = sobolev_norm(&v.x, s)?;
    let b = sobolev_norm(&v.y, s)?;
    Ok(a.hypot(b))
}

/// ∇·v computed spectrally.
pub fn divergence(v: &VectorField) -> Result<ScalarField> {
    let dx = spectral_derivative(&v.x, Axis::X)?;
    let dy = spectral_derivative(&v.y, Axis::Y)?;
    dx.add(&dy)
}

/// Standard curl ∂_x v⁽²⁾ − ∂_y v⁽¹⁾.
pub fn curl(v: &VectorField) -> Result<ScalarField> {
    let dvx = spectral_derivative(&v.y, Axis::X)?;
    let duy = spectral_derivative(&v.x, Axis::Y)?;
    dvx.sub(&duy)
}

/// All four entries of ∇v with `m[i][j] = ∂_j v⁽ⁱ⁾`, as fields.
pub struct GradientFields {
    pub dux: ScalarField,
    pub duy: ScalarField,
    pub dvx: ScalarField,
    pub dvy: ScalarField,
}

impl GradientFields {
    pub fn of(v: &VectorField) -> Result<Self> {
        v.ensure_finite()?;
        Ok(Self::of_unchecked(v))
    }

    pub fn of_unchecked(v: &VectorField) -> Self {
        let (dux, duy) = gradient_unchecked(&v.x);
        let (dvx, dvy) = gradient_unchecked(&v.y);
        Self {
            dux,
            duy,
            dvx,
            dvy,
        }
    }

    pub fn at(&self, i: usize) -> Mat2 {
        Mat2([
            [self.dux.values()[i], self.duy.values()[i]],
            [self.dvx.values()[i], self.dvy.values()[i]],
        ])
    }
}

/// max over the grid of the Frobenius norm of ∇v.
pub fn grad_linf(v: &VectorField) -> Result<f64> {
    let g = GradientFields::of(v)?;
    let mut m: f64 = 0.0;
    for i in 0..v.grid().len() {
        m = m.max(g.at(i).frobenius());
    }
    Ok(m)
}

/// Grid quadrature of f·g over [0,2π)², i.e. Σ f g Δx².
pub fn quadrature_inner(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    f.check_grid(g)?;
    let h = f.grid().spacing();
    Ok(f.values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * h
        * h)
}

/// Pruned mode list of a real field for fast off-grid evaluation.
///
/// Exact (to roundoff) for band-limited fields; the trigonometric
/// interpolant of general fields when no modes are pruned.
#[derive(Debug, Clone)]
pub struct SparseSpectrum {
    modes: Vec<(f64, f64, Complex64)>,
}

impl SparseSpectrum {
    /// Keep modes with |f̂_k| above `rel_tol` times the largest coefficient.
    pub fn from_spectrum(spec: &Spectrum, rel_tol: f64) -> Self {
        let n = spec.grid().n();
        let peak = spec
            .coeffs()
            .iter()
            .fold(0.0_f64, |m, c| m.max(c.norm()));
        let cut = peak * rel_tol;
        let mut modes = Vec::new();
        for kyb in 0..n {
            let ky = spec.grid().wavenumber(kyb) as f64;
            for kxb in 0..n {
                let kx = spec.grid().wavenumber(kxb) as f64;
                let c = spec.coeffs()[kyb * n + kxb];
                if c.norm() > cut {
                    modes.push((kx, ky, c));
                }
            }
        }
        Self { modes }
    }

    pub fn of_field(f: &ScalarField) -> Self {
        Self::from_spectrum(&Spectrum::forward(f), 1e-13)
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Evaluate the trigonometric interpolant at an arbitrary point.
    pub fn eval(&self, p: Vec2) -> f64 {
        let mut acc = 0.0;
        for &(kx, ky, c) in &self.modes {
            let phase = kx * p.x() + ky * p.y();
            let (s, co) = phase.sin_cos();
            acc += c.re * co - c.im * s;
        }
        acc
    }
}
