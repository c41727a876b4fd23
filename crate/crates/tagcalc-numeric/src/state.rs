//! Complex state vectors sampled on a grid, with the measure conventions of
//! the two bases baked into norms and inner products, plus the standard
//! Hermite-Gauss and coherent-state fixtures.

use crate::grid::Grid;
use crate::transform::{forward_samples, inverse_samples};
use crate::C64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateBasis {
    /// Position samples; measure weight dx.
    Q,
    /// Frequency samples; measure weight dp/(2 pi).
    P,
}

#[derive(Debug, Clone)]
pub struct NumericState {
    pub grid: Grid,
    pub basis: StateBasis,
    pub samples: Vec<C64>,
}

impl NumericState {
    pub fn new(grid: Grid, basis: StateBasis, samples: Vec<C64>) -> NumericState {
        assert_eq!(samples.len(), grid.n);
        NumericState { grid, basis, samples }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> C64) -> NumericState {
        let samples = grid.x().iter().map(|&x| f(x)).collect();
        NumericState::new(grid.clone(), StateBasis::Q, samples)
    }

    /// Weight of one sample in sums approximating integrals.
    pub fn measure_weight(&self) -> f64 {
        match self.basis {
            StateBasis::Q => self.grid.dx,
            StateBasis::P => self.grid.dp / (2.0 * PI),
        }
    }

    pub fn inner(&self, other: &NumericState) -> C64 {
        assert_eq!(self.basis, other.basis);
        assert_eq!(self.grid.n, other.grid.n);
        let w = self.measure_weight();
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            * w
    }

    pub fn norm2(&self) -> f64 {
        let w = self.measure_weight();
        self.samples.iter().map(|a| a.norm_sqr()).sum::<f64>() * w
    }

    pub fn norm(&self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn normalized(&self) -> NumericState {
        let n = self.norm();
        let samples = self.samples.iter().map(|a| a / n).collect();
        NumericState::new(self.grid.clone(), self.basis, samples)
    }

    pub fn scale(&self, c: C64) -> NumericState {
        NumericState::new(
            self.grid.clone(),
            self.basis,
            self.samples.iter().map(|a| a * c).collect(),
        )
    }

    pub fn sub(&self, other: &NumericState) -> NumericState {
        assert_eq!(self.basis, other.basis);
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a - b).collect();
        NumericState::new(self.grid.clone(), self.basis, samples)
    }

    pub fn add(&self, other: &NumericState) -> NumericState {
        assert_eq!(self.basis, other.basis);
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect();
        NumericState::new(self.grid.clone(), self.basis, samples)
    }

    /// Forward transform into the dual basis.
    pub fn forward(&self) -> NumericState {
        assert_eq!(self.basis, StateBasis::Q, "forward maps position states");
        NumericState::new(self.grid.clone(), StateBasis::P, forward_samples(&self.grid, &self.samples))
    }

    pub fn inverse(&self) -> NumericState {
        assert_eq!(self.basis, StateBasis::P, "inverse maps frequency states");
        NumericState::new(self.grid.clone(), StateBasis::Q, inverse_samples(&self.grid, &self.samples))
    }

    /// Discrete Schwartz-likeness: the first and last `margin` samples are
    /// negligible relative to the peak.
    pub fn edge_decay_ok(&self, margin: usize, tol: f64) -> bool {
        let peak = self.samples.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return true;
        }
        let n = self.samples.len();
        (0..margin.min(n))
            .all(|j| self.samples[j].norm() <= tol * peak && self.samples[n - 1 - j].norm() <= tol * peak)
    }
}

/// Unit-norm Hermite-Gauss function of order `n`, via the stable three-term
/// recurrence psi_{k+1} = sqrt(2/(k+1)) q psi_k - sqrt(k/(k+1)) psi_{k-1}.
pub fn hermite_gauss(grid: &Grid, n: usize) -> NumericState {
    assert!(n <= 20, "orders above 20 need a wider grid than the defaults");
    let mut prev: Vec<C64> = vec![C64::new(0.0, 0.0); grid.n];
    let mut cur: Vec<C64> = grid
        .x()
        .iter()
        .map(|&x| C64::new(PI.powf(-0.25) * (-x * x / 2.0).exp(), 0.0))
        .collect();
    for k in 0..n {
        let a = (2.0 / (k as f64 + 1.0)).sqrt();
        let b = (k as f64 / (k as f64 + 1.0)).sqrt();
        let next: Vec<C64> = grid
            .x()
            .iter()
            .enumerate()
            .map(|(j, &x)| cur[j] * a * x - prev[j] * b)
            .collect();
        prev = cur;
        cur = next;
    }
    NumericState::new(grid.clone(), StateBasis::Q, cur)
}

/// Coherent state: the normalized eigenstate of (q + d/dq)/sqrt2 with
/// eigenvalue alpha, psi(q) = pi^(-1/4) exp(sqrt2 alpha q - q^2/2 - (Re alpha)^2),
/// with the phase fixed by that formula.
pub fn coherent(grid: &Grid, alpha: C64) -> NumericState {
    let norm_shift = alpha.re * alpha.re;
    let samples = grid
        .x()
        .iter()
        .map(|&x| {
            let exponent = alpha * std::f64::consts::SQRT_2 * x
                - C64::new(x * x / 2.0 + norm_shift, 0.0);
            C64::new(PI.powf(-0.25), 0.0) * exponent.exp()
        })
        .collect();
    NumericState::new(grid.clone(), StateBasis::Q, samples)
}
