//! Small fixed-size linear algebra: 2-vectors, 2×2 matrices and the
//! rotation structure J, e^{θJ} used throughout the closed-form solutions.

use std::ops::{Add, Mul, Neg, Sub};

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2(pub [f64; 2]);

/// A 2×2 real matrix, row-major: `m.0[i][j]` is row i, column j.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Vec2([x, y])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn norm(&self) -> f64 {
        self.0[0].hypot(self.0[1])
    }

    pub fn norm_inf(&self) -> f64 {
        self.0[0].abs().max(self.0[1].abs())
    }

    pub fn dot(&self, other: Vec2) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1]
    }
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    /// The rotation generator J = [[0, 1], [−1, 0]], so Ju = u⊥.
    pub const J: Mat2 = Mat2([[0.0, 1.0], [-1.0, 0.0]]);

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Squared spectral gap (λ₁ − λ₂)² = tr² − 4 det; real even when the
    /// eigenvalues are complex (then it is negative).
    pub fn spectral_gap_sq(&self) -> f64 {
        let t = self.trace();
        t * t - 4.0 * self.det()
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2([
            [self.0[0][0], self.0[1][0]],
            [self.0[0][1], self.0[1][1]],
        ])
    }

    /// Inverse; `None` when |det| vanishes.
    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 {
            return None;
        }
        Some(Mat2([
            [self.0[1][1] / d, -self.0[0][1] / d],
            [-self.0[1][0] / d, self.0[0][0] / d],
        ]))
    }

    pub fn frobenius(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Rotation matrix e^{θJ} = [[cos θ, sin θ], [−sin θ, cos θ]].
pub fn rot(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    Mat2([[c, s], [-s, c]])
}

/// The matrix τ J (I − e^{tJ/τ}) that integrates the rotating trajectory:
/// x(t) = x₀ + τ J (I − e^{tJ/τ}) u₀(x₀).
pub fn trajectory_matrix(t: f64, tau: f64) -> Mat2 {
    Mat2::J * (Mat2::IDENTITY - rot(t / tau)) * tau
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2([self.0[0] * s, self.0[1] * s])
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2([-self.0[0], -self.0[1]])
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        Vec2([
            self.0[0][0] * v.0[0] + self.0[0][1] * v.0[1],
            self.0[1][0] * v.0[0] + self.0[1][1] * v.0[1],
        ])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = self.0[i][0] * o.0[0][j] + self.0[i][1] * o.0[1][j];
            }
        }
        Mat2(r)
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        Mat2([
            [self.0[0][0] * s, self.0[0][1] * s],
            [self.0[1][0] * s, self.0[1][1] * s],
        ])
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = self.0[i][j] + o.0[i][j];
            }
        }
        Mat2(r)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = self.0[i][j] - o.0[i][j];
            }
        }
        Mat2(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn j_squares_to_minus_identity() {
        let jj = Mat2::J * Mat2::J;
        assert_eq!(jj, Mat2([[-1.0, 0.0], [0.0, -1.0]]));
    }

    #[test]
    fn rotation_is_orthogonal_and_periodic() {
        let r = rot(0.7);
        let rtr = r.transpose() * r;
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((rtr.0[i][j] - expect).abs() < 1e-15);
            }
        }
        let full = rot(2.0 * PI);
        assert!((full - Mat2::IDENTITY).frobenius() < 1e-14);
        // e^{πJ} = −I
        let half = rot(PI);
        assert!((half + Mat2::IDENTITY).frobenius() < 1e-15);
    }

    #[test]
    fn trajectory_matrix_derivative_matches_rotation() {
        // d/dt [τJ(I − e^{tJ/τ})] u = e^{tJ/τ} u, checked by finite differences.
        let tau = 0.37;
        let t = 0.51;
        let u = Vec2::new(0.3, -0.8);
        let dt = 1e-6;
        let fwd = trajectory_matrix(t + dt, tau) * u;
        let bwd = trajectory_matrix(t - dt, tau) * u;
        let fd = (fwd - bwd) * (1.0 / (2.0 * dt));
        let exact = rot(t / tau) * u;
        assert!((fd - exact).norm() < 1e-8);
    }
}
