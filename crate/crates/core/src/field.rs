//! Real-valued scalar and vector fields sampled on a [`TorusGrid`].

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::rotation::{Mat2, Vec2};

/// Real samples of a scalar function on the torus, length `n²`,
/// row-major over `(x, y)`: flat index `iy * n + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Sample `f(x, y)` on the grid.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = vec![0.0; grid.len()];
        for (ix, iy, x, y) in grid.points() {
            values[grid.index(ix, iy)] = f(x, y);
        }
        Self { grid, values }
    }

    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "values: expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.index(ix, iy)]
    }

    /// Error if any sample is NaN or infinite, naming the first bad index.
    pub fn ensure_finite(&self) -> Result<()> {
        for (i, &v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i, value: v });
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// max |f|.
    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Pointwise map into a new field.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        self.check_grid(other)?;
        Ok(ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        self.map(|v| v * s)
    }

    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += a * o;
        }
    }

    pub fn check_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                left: self.grid.n(),
                right: other.grid.n(),
            });
        }
        Ok(())
    }
}

/// Two scalar components `(u⁽¹⁾, u⁽²⁾)` sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    pub fn new(x: ScalarField, y: ScalarField) -> Result<Self> {
        x.check_grid(&y)?;
        Ok(Self { x, y })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            x: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut fx = vec![0.0; grid.len()];
        let mut fy = vec![0.0; grid.len()];
        for (ix, iy, x, y) in grid.points() {
            let (a, b) = f(x, y);
            fx[grid.index(ix, iy)] = a;
            fy[grid.index(ix, iy)] = b;
        }
        Self {
            x: ScalarField::from_values(grid, fx).expect("sized above"),
            y: ScalarField::from_values(grid, fy).expect("sized above"),
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.x.grid()
    }

    pub fn at(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(self.x.at(ix, iy), self.y.at(ix, iy))
    }

    pub fn ensure_finite(&self) -> Result<()> {
        self.x.ensure_finite()?;
        self.y.ensure_finite()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// max over the grid of the Euclidean magnitude |u|.
    pub fn linf_norm(&self) -> f64 {
        self.x
            .values()
            .iter()
            .zip(self.y.values())
            .fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        Ok(VectorField {
            x: self.x.sub(&other.x)?,
            y: self.y.sub(&other.y)?,
        })
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        Ok(VectorField {
            x: self.x.add(&other.x)?,
            y: self.y.add(&other.y)?,
        })
    }

    pub fn scale(&self, s: f64) -> VectorField {
        VectorField {
            x: self.x.scale(s),
            y: self.y.scale(s),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &VectorField) {
        self.x.axpy(a, &other.x);
        self.y.axpy(a, &other.y);
    }

    /// Apply a (possibly point-dependent) 2×2 matrix to every sample.
    pub fn map_matrix(&self, m: impl Fn(usize) -> Mat2) -> VectorField {
        let grid = self.grid();
        let mut fx = vec![0.0; grid.len()];
        let mut fy = vec![0.0; grid.len()];
        for i in 0..grid.len() {
            let v = Vec2::new(self.x.values()[i], self.y.values()[i]);
            let w = m(i) * v;
            fx[i] = w.x();
            fy[i] = w.y();
        }
        VectorField {
            x: ScalarField::from_values(grid, fx).expect("sized above"),
            y: ScalarField::from_values(grid, fy).expect("sized above"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TorusGrid {
        TorusGrid::new(16).unwrap()
    }

    #[test]
    fn linf_of_sine_is_one_on_grids_divisible_by_four() {
        let f = ScalarField::from_fn(grid(), |x, _| x.sin());
        assert_eq!(f.linf_norm(), 1.0);
    }

    #[test]
    fn non_finite_is_reported_with_first_index() {
        let mut f = ScalarField::zeros(grid());
        f.values_mut()[7] = f64::NAN;
        f.values_mut()[3] = f64::INFINITY;
        match f.ensure_finite() {
            Err(Error::NonFinite { index, .. }) => assert_eq!(index, 3),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = ScalarField::zeros(TorusGrid::new(16).unwrap());
        let b = ScalarField::zeros(TorusGrid::new(32).unwrap());
        assert!(a.add(&b).is_err());
    }
}
