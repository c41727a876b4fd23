//! Uniform sample grid with its spectral companion.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("grid size {0} must be a power of two, at least 8")]
    BadSize(usize),
    #[error("grid extent must be positive and finite")]
    BadExtent,
}

/// Uniform grid of `n` samples spanning `[-l/2, l/2)` with the centered dual
/// grid `p_k = 2 pi k / l` for `k` in `[-n/2, n/2)`. `dx * dp = 2 pi / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub l: f64,
    pub dx: f64,
    pub dp: f64,
    #[serde(skip)]
    points: Arc<GridPoints>,
}

#[derive(Debug, Default, PartialEq)]
struct GridPoints {
    x: Vec<f64>,
    p: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize, l: f64) -> Result<Grid, GridError> {
        if n < 8 || !n.is_power_of_two() {
            return Err(GridError::BadSize(n));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(GridError::BadExtent);
        }
        let dx = l / n as f64;
        let dp = 2.0 * PI / l;
        let half = (n / 2) as i64;
        let x = (0..n).map(|j| (j as i64 - half) as f64 * dx).collect();
        let p = (0..n).map(|k| (k as i64 - half) as f64 * dp).collect();
        Ok(Grid { n, l, dx, dp, points: Arc::new(GridPoints { x, p }) })
    }

    /// Position samples, ascending from -l/2.
    pub fn x(&self) -> &[f64] {
        &self.points.x
    }

    /// Dual (frequency) samples, centered and ascending.
    pub fn p(&self) -> &[f64] {
        &self.points.p
    }

    pub fn p_max(&self) -> f64 {
        PI / self.dx
    }

    /// Rebuild the cached sample points after deserialization.
    pub fn rehydrate(self) -> Result<Grid, GridError> {
        Grid::new(self.n, self.l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_identity() {
        let g = Grid::new(512, 20.0).unwrap();
        assert!((g.dx * g.dp - 2.0 * PI / 512.0).abs() < 1e-15);
        assert_eq!(g.x().len(), 512);
        assert_eq!(g.x()[0], -10.0);
        assert_eq!(g.x()[256], 0.0);
        assert_eq!(g.p()[256], 0.0);
        assert!((g.p()[257] - 2.0 * PI / 20.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(Grid::new(96, 20.0), Err(GridError::BadSize(96))));
        assert!(matches!(Grid::new(4, 20.0), Err(GridError::BadSize(4))));
        assert!(matches!(Grid::new(128, -1.0), Err(GridError::BadExtent)));
    }
}
