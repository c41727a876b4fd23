//! Spectral transforms under the fixed convention
//!
//!   forward:  f~(p) = int exp(-i q p) f(q) dq
//!   inverse:  f(q)  = int exp(+i q p) f~(p) dp / (2 pi)
//!
//! Discretized on the centered grid, the forward transform is an FFT with
//! (-1)^j pre/post twiddles and a dx weight; since q_j p_k expands to
//! 2 pi jk/n - pi (j + k) + pi n/2, the stray factor is exactly
//! (-1)^(j+k) i^n, which is exact in floating point.

use crate::grid::Grid;
use crate::C64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

fn i_pow(n: i64) -> C64 {
    match n.rem_euclid(4) {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Forward transform of samples on `grid`: position to frequency.
pub fn forward_samples(grid: &Grid, f: &[C64]) -> Vec<C64> {
    let n = grid.n;
    assert_eq!(f.len(), n);
    let mut buf: Vec<C64> = (0..n)
        .map(|j| if j % 2 == 0 { f[j] } else { -f[j] })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let phase = i_pow(-(n as i64));
    (0..n)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            buf[k] * grid.dx * sign * phase
        })
        .collect()
}

/// Inverse transform: frequency to position, with the 1/(2 pi) measure.
pub fn inverse_samples(grid: &Grid, f_hat: &[C64]) -> Vec<C64> {
    let n = grid.n;
    assert_eq!(f_hat.len(), n);
    let mut buf: Vec<C64> = (0..n)
        .map(|k| if k % 2 == 0 { f_hat[k] } else { -f_hat[k] })
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let phase = i_pow(n as i64);
    let scale = 1.0 / grid.l;
    (0..n)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            buf[j] * scale * sign * phase
        })
        .collect()
}

/// Apply `diag(w(p_k))` in the spectral domain.
pub fn apply_spectral_multiplier(grid: &Grid, f: &[C64], w: impl Fn(f64) -> C64) -> Vec<C64> {
    let mut hat = forward_samples(grid, f);
    for (k, h) in hat.iter_mut().enumerate() {
        *h *= w(grid.p()[k]);
    }
    inverse_samples(grid, &hat)
}

/// Reference quadrature of int exp(-i q p) f(q) dq by direct summation;
/// used as the oracle for the FFT path in tests.
pub fn direct_forward_at(grid: &Grid, f: &[C64], p: f64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (j, &x) in grid.x().iter().enumerate() {
        let phase = C64::from_polar(1.0, -x * p);
        acc += phase * f[j];
    }
    acc * grid.dx
}

/// Gaussian forward-transform pair used widely in the oracles: the unit-norm
/// Gaussian pi^(-1/4) exp(-q^2/2) maps to sqrt2 pi^(1/4) exp(-p^2/2).
pub fn gaussian_forward_analytic(p: f64) -> C64 {
    C64::new(std::f64::consts::SQRT_2 * PI.powf(0.25) * (-p * p / 2.0).exp(), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vacuum(grid: &Grid) -> Vec<C64> {
        grid.x()
            .iter()
            .map(|&x| C64::new(PI.powf(-0.25) * (-x * x / 2.0).exp(), 0.0))
            .collect()
    }

    #[test]
    fn forward_matches_direct_quadrature() {
        let g = Grid::new(256, 20.0).unwrap();
        let f = vacuum(&g);
        let hat = forward_samples(&g, &f);
        for k in [40, 128, 130, 200] {
            let direct = direct_forward_at(&g, &f, g.p()[k]);
            assert!((hat[k] - direct).norm() < 1e-12, "k={k}: {} vs {direct}", hat[k]);
        }
    }

    #[test]
    fn gaussian_transform_is_analytic() {
        let g = Grid::new(512, 20.0).unwrap();
        let hat = forward_samples(&g, &vacuum(&g));
        for (k, value) in hat.iter().enumerate().take(312).skip(200) {
            let expect = gaussian_forward_analytic(g.p()[k]);
            assert!((value - expect).norm() < 1e-10, "p={}: {value}", g.p()[k]);
        }
    }

    #[test]
    fn round_trip_is_tight() {
        let g = Grid::new(128, 16.0).unwrap();
        let f: Vec<C64> = g
            .x()
            .iter()
            .enumerate()
            .map(|(j, &x)| C64::new((-x * x / 3.0).exp() * (j as f64).sin(), (x / 2.0).cos()))
            .collect();
        let back = inverse_samples(&g, &forward_samples(&g, &f));
        let err: f64 = f.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "round trip error {err}");
    }

    #[test]
    fn shift_theorem() {
        // f(q - a) transforms to exp(-i a p) f~(p)
        let g = Grid::new(512, 24.0).unwrap();
        let a = 1.5;
        let f = vacuum(&g);
        let shifted: Vec<C64> = g
            .x()
            .iter()
            .map(|&x| C64::new(PI.powf(-0.25) * (-(x - a) * (x - a) / 2.0).exp(), 0.0))
            .collect();
        let hat = forward_samples(&g, &f);
        let hat_shifted = forward_samples(&g, &shifted);
        for k in 220..292 {
            let expect = C64::from_polar(1.0, -a * g.p()[k]) * hat[k];
            assert!((hat_shifted[k] - expect).norm() < 1e-10);
        }
    }
}
