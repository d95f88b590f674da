//! Uniform grid on the 2π-periodic 2D torus.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Uniform `n × n` grid on `[0, 2π)²`.
///
/// Samples live at `x_i = 2π i / n`; the wavenumbers per axis are the
/// integers `−n/2+1 … n/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    n: usize,
}

impl TorusGrid {
    /// `n` must be even and at least 16.
    pub fn new(n: usize) -> Result<Self> {
        if n < 16 || n % 2 != 0 {
            return Err(Error::Config(format!(
                "n: grid size must be even and >= 16, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of samples, `n²`.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing Δx = 2π/n.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Coordinate of sample `i` along one axis.
    pub fn coord(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.n as f64
    }

    /// Flat index of the sample at column `ix`, row `iy` (row-major in y).
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.n + ix
    }

    /// Signed wavenumber for FFT bin `i`: `0, 1, …, n/2, −n/2+1, …, −1`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Iterator over `(ix, iy, x, y)` in flat-index order.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |iy| (0..n).map(move |ix| (ix, iy, self.coord(ix), self.coord(iy))))
    }
}
