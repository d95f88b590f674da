//! The rotating pressureless flow ∂_t u₁ + u₁·∇u₁ = (1/τ)Ju₁ in closed form:
//! critical-threshold analysis of the initial data, circular particle
//! trajectories of period 2πτ, the Riccati gradient matrix, and Eulerian
//! reconstruction of u₁(t,·) by flow-map inversion.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::TorusGrid;
use crate::rotation::{rot, trajectory_matrix, Mat2, Vec2};
use crate::spectral::{curl, GradientFields, SparseSpectrum, Spectrum};
use rayon::prelude::*;
use serde_json::json;

/// Determinants below this magnitude count as a singular Riccati inversion.
pub const SINGULAR_DET: f64 = 1e-12;

const INVERSION_TOL: f64 = 1e-12;
const INVERSION_CAP: usize = 200;
const FIXED_POINT_PHASE: usize = 50;
const DAMPING: f64 = 0.5;

/// Outcome of the critical-threshold analysis of initial data `u₀` at a
/// given Rossby number τ.
///
/// `margin` is the grid minimum of 1 − τω₀ − (τ²/2)η₀²; the data are
/// sub-critical when it is positive. `tau_c` is the grid minimum over the
/// pointwise smallest positive roots of (τ²/2)η₀² + τω₀ − 1 = 0, with
/// `f64::INFINITY` as the sentinel when no grid point admits one.
#[derive(Debug, Clone)]
pub struct ThresholdReport {
    pub tau: f64,
    /// ω₀ = ∂_y u⁽¹⁾ − ∂_x u⁽²⁾ (minus the standard curl).
    pub omega0: ScalarField,
    /// η₀² = (tr ∇u₀)² − 4 det ∇u₀; negative for complex eigenvalue pairs.
    pub eta0_sq: ScalarField,
    pub margin: f64,
    pub tau_c: f64,
    /// Pointwise critical Rossby number (∞ sentinel entries allowed).
    pub tau_c_field: ScalarField,
    pub subcritical: bool,
    /// Grid location achieving the minimal margin.
    pub extremal_point: (f64, f64),
}

impl ThresholdReport {
    /// The serialized summary: {tau, margin, tau_c, subcritical, extremal_point}.
    /// τ_c = ∞ is encoded as the string "inf".
    pub fn to_summary_json(&self) -> serde_json::Value {
        json!({
            "tau": self.tau,
            "margin": self.margin,
            "tau_c": encode_tau_c(self.tau_c),
            "subcritical": self.subcritical,
            "extremal_point": [self.extremal_point.0, self.extremal_point.1],
        })
    }
}

fn encode_tau_c(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!("inf")
    }
}

/// Smallest positive root of (η²/2)τ² + ωτ − 1 = 0, or ∞ when none exists.
fn pointwise_tau_c(omega: f64, eta_sq: f64) -> f64 {
    let a = 0.5 * eta_sq;
    let b = omega;
    if a.abs() < 1e-14 {
        return if b > 1e-14 { 1.0 / b } else { f64::INFINITY };
    }
    let disc = b * b + 4.0 * a;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    let r1 = (-b - sq) / (2.0 * a);
    let r2 = (-b + sq) / (2.0 * a);
    let mut best = f64::INFINITY;
    for r in [r1, r2] {
        if r > 0.0 && r < best {
            best = r;
        }
    }
    best
}

/// Pointwise critical-threshold analysis of `u₀` at Rossby number τ.
pub fn threshold_analyze(u0: &VectorField, tau: f64) -> Result<ThresholdReport> {
    u0.ensure_finite()?;
    let grid = u0.grid();
    let g = GradientFields::of(u0)?;
    let len = grid.len();
    let mut omega = vec![0.0; len];
    let mut eta_sq = vec![0.0; len];
    let mut tau_c_pt = vec![0.0; len];
    let mut margin = f64::INFINITY;
    let mut tau_c = f64::INFINITY;
    let mut extremal = 0usize;
    for i in 0..len {
        let m = g.at(i);
        let w = m.0[0][1] - m.0[1][0];
        let e = m.spectral_gap_sq();
        omega[i] = w;
        eta_sq[i] = e;
        tau_c_pt[i] = pointwise_tau_c(w, e);
        tau_c = tau_c.min(tau_c_pt[i]);
        let mi = 1.0 - tau * w - 0.5 * tau * tau * e;
        if mi < margin {
            margin = mi;
            extremal = i;
        }
    }
    let n = grid.n();
    let (ix, iy) = (extremal % n, extremal / n);
    Ok(ThresholdReport {
        tau,
        omega0: ScalarField::from_values(grid, omega)?,
        eta0_sq: ScalarField::from_values(grid, eta_sq)?,
        margin,
        tau_c,
        tau_c_field: ScalarField::from_values(grid, tau_c_pt)?,
        subcritical: margin > 0.0,
        extremal_point: (grid.coord(ix), grid.coord(iy)),
    })
}

/// Exact particle position x(t) = x₀ + τJ(I − e^{tJ/τ})u₀(x₀), the integral
/// of ẋ = u₁ with u₁(t, x(t)) = e^{tJ/τ}u₀(x₀).
pub fn trajectory_position(x0: Vec2, u0_at_x0: Vec2, t: f64, tau: f64) -> Vec2 {
    x0 + trajectory_matrix(t, tau) * u0_at_x0
}

/// Exact Lagrangian velocity e^{tJ/τ}u₀(x₀).
pub fn lagrangian_velocity(u0_at_x0: Vec2, t: f64, tau: f64) -> Vec2 {
    rot(t / tau) * u0_at_x0
}

/// Denominator matrix of the Riccati closed form, which is also the
/// Jacobian of the flow map x₀ ↦ x(t).
pub fn riccati_denominator(m0: Mat2, t: f64, tau: f64) -> Mat2 {
    Mat2::IDENTITY + trajectory_matrix(t, tau) * m0
}

/// Closed-form solution of the gradient-matrix Riccati equation
/// M′ + M² = τ⁻¹JM along a trajectory:
///
/// M(t) = e^{tJ/τ} M₀ (I + τJ(I − e^{tJ/τ})M₀)⁻¹.
///
/// Errors with a threshold breakdown when the denominator determinant
/// drops below [`SINGULAR_DET`] in magnitude.
pub fn gradient_matrix(m0: Mat2, t: f64, tau: f64) -> Result<Mat2> {
    let denom = riccati_denominator(m0, t, tau);
    let det = denom.det();
    if det.abs() < SINGULAR_DET {
        return Err(Error::ThresholdBreakdown { t, det, m0: m0.0 });
    }
    let inv = denom.inverse().ok_or(Error::ThresholdBreakdown { t, det, m0: m0.0 })?;
    Ok(rot(t / tau) * m0 * inv)
}

/// First t > 0 at which the Riccati denominator along one trajectory
/// becomes singular, or `None` if it stays bounded away from zero forever.
///
/// With A = τω₀ − 2τ² det M₀ and B = τ tr M₀ the determinant is
/// 1 − A(1 − cos θ) + B sin θ, θ = t/τ; its zeros are found in closed form.
pub fn first_singular_time(m0: Mat2, tau: f64) -> Option<f64> {
    let omega = m0.0[0][1] - m0.0[1][0];
    let a = tau * omega - 2.0 * tau * tau * m0.det();
    let b = tau * m0.trace();
    let amp = a.hypot(b);
    // det(θ) = (1 − A) + amp·cos(θ − φ); zero requires |A − 1| ≤ amp.
    if amp < (a - 1.0).abs() {
        return None;
    }
    if amp == 0.0 {
        return None;
    }
    let phi = b.atan2(a);
    let alpha = ((a - 1.0) / amp).clamp(-1.0, 1.0).acos();
    let mut best = f64::INFINITY;
    for base in [phi + alpha, phi - alpha] {
        let mut theta = base.rem_euclid(2.0 * std::f64::consts::PI);
        if theta <= 1e-15 {
            theta += 2.0 * std::f64::consts::PI;
        }
        best = best.min(theta);
    }
    best.is_finite().then(|| tau * best)
}

/// Grid minimum of [`first_singular_time`] over all trajectories seeded at
/// grid nodes, i.e. the closed-form breakdown time of the pressureless flow.
pub fn flow_breakdown_time(u0: &VectorField, tau: f64) -> Result<Option<f64>> {
    u0.ensure_finite()?;
    let g = GradientFields::of(u0)?;
    let mut best: Option<f64> = None;
    for i in 0..u0.grid().len() {
        if let Some(t) = first_singular_time(g.at(i), tau) {
            best = Some(best.map_or(t, |b: f64| b.min(t)));
        }
    }
    Ok(best)
}

/// Relative vorticity φ = ∂_x u⁽²⁾ − ∂_y u⁽¹⁾ + 1/τ.
///
/// The curl sign is the standard one; it is the sign for which φ satisfies
/// the continuity equation ∂_t φ + ∇·(u₁ φ) = 0 along the pressureless
/// flow (verified numerically in this module's tests).
pub fn relative_vorticity(u1: &VectorField, tau: f64) -> Result<ScalarField> {
    Ok(curl(u1)?.map(|c| c + 1.0 / tau))
}

/// The pressureless flow generated by fixed initial data, with the sparse
/// spectra needed to evaluate u₀ and ∇u₀ off-grid.
///
/// All per-point operations are pure; reconstruction parallelizes over
/// grid nodes.
pub struct PressurelessFlow {
    tau: f64,
    u0: VectorField,
    u0_sp: [SparseSpectrum; 2],
    grad_sp: [SparseSpectrum; 4],
}

impl PressurelessFlow {
    pub fn new(u0: VectorField, tau: f64) -> Result<Self> {
        u0.ensure_finite()?;
        if !(tau > 0.0) {
            return Err(Error::Config(format!("tau: must be > 0, got {tau}")));
        }
        let sx = Spectrum::forward(&u0.x);
        let sy = Spectrum::forward(&u0.y);
        let u0_sp = [
            SparseSpectrum::from_spectrum(&sx, 1e-13),
            SparseSpectrum::from_spectrum(&sy, 1e-13),
        ];
        use crate::spectral::Axis;
        let grad_sp = [
            SparseSpectrum::from_spectrum(&sx.derivative(Axis::X), 1e-13),
            SparseSpectrum::from_spectrum(&sx.derivative(Axis::Y), 1e-13),
            SparseSpectrum::from_spectrum(&sy.derivative(Axis::X), 1e-13),
            SparseSpectrum::from_spectrum(&sy.derivative(Axis::Y), 1e-13),
        ];
        Ok(Self {
            tau,
            u0,
            u0_sp,
            grad_sp,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn grid(&self) -> TorusGrid {
        self.u0.grid()
    }

    pub fn initial_velocity(&self) -> &VectorField {
        &self.u0
    }

    /// Trigonometric interpolation of u₀ at an arbitrary point.
    pub fn u0_at(&self, p: Vec2) -> Vec2 {
        Vec2::new(self.u0_sp[0].eval(p), self.u0_sp[1].eval(p))
    }

    /// Trigonometric interpolation of ∇u₀ at an arbitrary point.
    pub fn grad_u0_at(&self, p: Vec2) -> Mat2 {
        Mat2([
            [self.grad_sp[0].eval(p), self.grad_sp[1].eval(p)],
            [self.grad_sp[2].eval(p), self.grad_sp[3].eval(p)],
        ])
    }

    /// Particle position at time t seeded from x₀.
    pub fn position(&self, x0: Vec2, t: f64) -> Vec2 {
        trajectory_position(x0, self.u0_at(x0), t, self.tau)
    }

    /// Invert the flow map at a single target point: find x₀ with
    /// x₀ + τJ(I − e^{tJ/τ})u₀(x₀) = x.
    ///
    /// Damped fixed point (λ = 0.5, tolerance 1e−12) with a Newton fallback
    /// using the analytic Jacobian I + τJ(I − e^{tJ/τ})∇u₀ once the fixed
    /// point stalls, capped at 200 iterations in total.
    pub fn invert_flow_map(&self, x: Vec2, t: f64) -> Result<Vec2> {
        let d = trajectory_matrix(t, self.tau);
        let mut x0 = x;
        let mut residual = f64::INFINITY;
        for iter in 0..INVERSION_CAP {
            let r = x0 + d * self.u0_at(x0) - x;
            residual = r.norm_inf();
            if residual <= INVERSION_TOL {
                return Ok(x0);
            }
            if iter < FIXED_POINT_PHASE {
                x0 = x0 - r * DAMPING;
            } else {
                let jac = Mat2::IDENTITY + d * self.grad_u0_at(x0);
                match jac.inverse() {
                    Some(inv) if jac.det().abs() >= SINGULAR_DET => {
                        x0 = x0 - inv * r;
                    }
                    _ => break,
                }
            }
        }
        Err(Error::InversionFailure { t, residual })
    }

    /// Flow-map origins x₀ for every grid node at time t.
    pub fn flow_map_origins(&self, t: f64) -> Result<Vec<Vec2>> {
        let grid = self.grid();
        let targets: Vec<Vec2> = grid
            .points()
            .map(|(_, _, x, y)| Vec2::new(x, y))
            .collect();
        targets
            .par_iter()
            .map(|&x| self.invert_flow_map(x, t))
            .collect()
    }

    /// Eulerian velocity u₁(t, ·) on the grid via flow-map inversion.
    pub fn velocity(&self, t: f64) -> Result<VectorField> {
        let origins = self.flow_map_origins(t)?;
        self.velocity_from_origins(&origins, t)
    }

    /// Eulerian velocity reusing precomputed origins.
    pub fn velocity_from_origins(&self, origins: &[Vec2], t: f64) -> Result<VectorField> {
        let grid = self.grid();
        let r = rot(t / self.tau);
        let mut ux = vec![0.0; grid.len()];
        let mut uy = vec![0.0; grid.len()];
        for (i, &x0) in origins.iter().enumerate() {
            let v = r * self.u0_at(x0);
            ux[i] = v.x();
            uy[i] = v.y();
        }
        VectorField::new(
            ScalarField::from_values(grid, ux)?,
            ScalarField::from_values(grid, uy)?,
        )
    }

    /// Eulerian gradient matrix ∇u₁(t, x) at grid node index `i`, from the
    /// Riccati closed form seeded at the node's flow-map origin.
    pub fn gradient_at_origin(&self, x0: Vec2, t: f64) -> Result<Mat2> {
        gradient_matrix(self.grad_u0_at(x0), t, self.tau)
    }
}
