//! Wigner maps: the offset-Fourier transform of midpoint-resampled kernel
//! rows,
//!
//!   W(q, p) = int K(q + x/2, q - x/2) exp(-i x p) dx .
//!
//! With x = 2u the anti-diagonal slice lands on integer grid offsets and the
//! transform evaluates on the half-spaced dual grid, so the map covers
//! |p| < p_max/2. Density kernels decay and slice cleanly. Operator kernels
//! built from the momentum quadrature are full-band, and the factor-two
//! resampling would alias them; `wigner_of_operator` therefore applies a
//! smooth spectral window first. The window is identically 1 on the interior
//! band, and a window in p star-multiplies polynomial symbols exactly, so
//! interior values are unaffected while the wrapped tails are suppressed
//! below the target tolerance.

use crate::grid::Grid;
use crate::operator::NumericOperator;
use crate::state::NumericState;
use crate::transform::{apply_spectral_multiplier, forward_samples};
use crate::C64;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Serialize)]
pub struct WignerMap {
    pub n: usize,
    pub l: f64,
    /// Position axis (the grid's sample points).
    pub q: Vec<f64>,
    /// Frequency axis: half-spaced dual grid, |p| < p_max / 2.
    pub p: Vec<f64>,
    /// Row-major values, rows indexed by q.
    pub w_re: Vec<f64>,
    pub w_im: Vec<f64>,
}

impl WignerMap {
    pub fn value(&self, i: usize, m: usize) -> C64 {
        C64::new(self.w_re[i * self.p.len() + m], self.w_im[i * self.p.len() + m])
    }

    /// Total mass int int W dq dp / (2 pi).
    pub fn mass(&self) -> C64 {
        let dq = self.l / self.n as f64;
        let dp_half = PI / self.l * 2.0 / 2.0; // half the dual spacing
        let sum: C64 = self
            .w_re
            .iter()
            .zip(&self.w_im)
            .map(|(re, im)| C64::new(*re, *im))
            .sum();
        sum * dq * dp_half / (2.0 * PI)
    }

    /// Largest |W(q,p) - f(q,p)| over the window |q|,|p| <= bound.
    pub fn max_abs_error(&self, bound: f64, f: impl Fn(f64, f64) -> C64) -> f64 {
        let mut worst = 0.0f64;
        for (i, &qi) in self.q.iter().enumerate() {
            if qi.abs() > bound {
                continue;
            }
            for (m, &pm) in self.p.iter().enumerate() {
                if pm.abs() > bound {
                    continue;
                }
                worst = worst.max((self.value(i, m) - f(qi, pm)).norm());
            }
        }
        worst
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# tagcalc wigner map\n");
        out.push_str(&format!(
            "# n={} l={} q0={} dq={} p0={} dp={}\n",
            self.n,
            self.l,
            self.q[0],
            self.l / self.n as f64,
            self.p[0],
            self.p[1] - self.p[0]
        ));
        out.push_str("q,p,w_re,w_im\n");
        for (i, &qi) in self.q.iter().enumerate() {
            for (m, &pm) in self.p.iter().enumerate() {
                let v = self.value(i, m);
                out.push_str(&format!("{qi:.17e},{pm:.17e},{:.17e},{:.17e}\n", v.re, v.im));
            }
        }
        out
    }
}

/// Wigner map of a (mixture) density built from pure states with weights.
pub fn wigner_of_density(grid: &Grid, states: &[(f64, NumericState)]) -> WignerMap {
    let _n = grid.n;
    let kernel = |a: usize, b: usize| -> C64 {
        states
            .iter()
            .map(|(w, psi)| psi.samples[a] * psi.samples[b].conj() * *w)
            .sum()
    };
    slice_transform(grid, kernel)
}

/// Wigner symbol of an operator matrix. A smooth band limit (identity on the
/// interior of the spectral band) is applied on the left before slicing; see
/// the module docs for why this leaves interior symbol values exact.
pub fn wigner_of_operator(op: &NumericOperator) -> WignerMap {
    let grid = &op.grid;
    let n = grid.n;
    let p_cut = 0.375 * grid.p_max();
    // Soft enough that the windowed kernel decays below roundoff within the
    // |u| <= L/4 slice, sharp enough to stay identically 1 on the interior.
    let softness = (p_cut / 30.0).max(11.7 / grid.l);
    let window = move |p: f64| -> C64 {
        let up = 1.0 / (1.0 + ((p - p_cut) / softness).exp());
        let down = 1.0 / (1.0 + ((-p - p_cut) / softness).exp());
        C64::new(up * down, 0.0)
    };
    // band-limit each column in its row index
    let mut banded = NumericOperator::zeros(grid);
    for b in 0..n {
        let col: Vec<C64> = (0..n).map(|a| op.at(a, b)).collect();
        let filtered = apply_spectral_multiplier(grid, &col, window);
        for (a, v) in filtered.into_iter().enumerate() {
            banded.set(a, b, v);
        }
    }
    slice_transform(grid, |a, b| banded.at(a, b))
}

/// Shared core: resample the kernel along anti-diagonals and transform the
/// offset coordinate. The slice keeps offsets |u| <= L/4 only: beyond that,
/// grid kernels show their periodic images (a separation of L - t is
/// indistinguishable from -t), while every kernel this runs on has decayed
/// by L/2 separation. Offsets reaching outside the grid contribute zero.
fn slice_transform(grid: &Grid, kernel: impl Fn(usize, usize) -> C64) -> WignerMap {
    let n = grid.n;
    let half = n as i64 / 2;
    let quarter = n as i64 / 4;
    let mut w_re = vec![0.0; n * n];
    let mut w_im = vec![0.0; n * n];
    for i in 0..n {
        let row: Vec<C64> = (0..n)
            .map(|j| {
                if (j as i64 - half).abs() > quarter {
                    return C64::new(0.0, 0.0);
                }
                let a = i as i64 + j as i64 - half;
                let b = i as i64 - j as i64 + half;
                if a < 0 || a >= n as i64 || b < 0 || b >= n as i64 {
                    return C64::new(0.0, 0.0);
                }
                kernel(a as usize, b as usize)
            })
            .collect();
        // W(q_i, p_m) = 2 * (forward transform of the row)(s = 2 p_m);
        // 2 p_m runs over the full dual grid when p_m is half-spaced.
        let hat = forward_samples(grid, &row);
        for m in 0..n {
            let v = hat[m] * 2.0;
            w_re[i * n + m] = v.re;
            w_im[i * n + m] = v.im;
        }
    }
    let p = grid.p().iter().map(|&s| s / 2.0).collect();
    WignerMap { n, l: grid.l, q: grid.x().to_vec(), p, w_re, w_im }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_q, ladder_matrices};
    use crate::state::hermite_gauss;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn vacuum_wigner_is_twice_the_gaussian() {
        let g = Grid::new(512, 20.0).unwrap();
        let psi = hermite_gauss(&g, 0);
        let map = wigner_of_density(&g, &[(1.0, psi)]);
        let err = map.max_abs_error(4.0, |q, p| C64::new(2.0 * (-q * q - p * p).exp(), 0.0));
        assert!(err < 1e-6, "max error {err}");
    }

    #[test]
    fn vacuum_wigner_mass_is_one() {
        let g = Grid::new(512, 20.0).unwrap();
        let psi = hermite_gauss(&g, 0);
        let map = wigner_of_density(&g, &[(1.0, psi)]);
        let mass = map.mass();
        assert!((mass - C64::new(1.0, 0.0)).norm() < 1e-6, "mass {mass}");
    }

    #[test]
    fn first_excited_wigner_mass_is_one() {
        let g = Grid::new(512, 20.0).unwrap();
        let psi = hermite_gauss(&g, 1);
        let map = wigner_of_density(&g, &[(1.0, psi)]);
        assert!((map.mass() - C64::new(1.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn annihilation_symbol_is_alpha_on_the_interior() {
        let g = Grid::new(512, 20.0).unwrap();
        let (a, _) = ladder_matrices(&g);
        let map = wigner_of_operator(&a);
        let err = map.max_abs_error(5.0, |q, p| {
            C64::new(FRAC_1_SQRT_2 * q, FRAC_1_SQRT_2 * p)
        });
        assert!(err < 1e-6, "max interior error {err}");
    }

    #[test]
    fn identity_symbol_is_one_on_the_interior() {
        let g = Grid::new(512, 20.0).unwrap();
        let mut id = NumericOperator::zeros(&g);
        for i in 0..g.n {
            id.set(i, i, C64::new(1.0 / g.dx, 0.0));
        }
        let map = wigner_of_operator(&id);
        let err = map.max_abs_error(5.0, |_, _| C64::new(1.0, 0.0));
        assert!(err < 1e-6, "max interior error {err}");
    }

    #[test]
    fn position_symbol_is_q_on_the_interior() {
        let g = Grid::new(512, 20.0).unwrap();
        let map = wigner_of_operator(&build_q(&g));
        let err = map.max_abs_error(5.0, |q, _| C64::new(q, 0.0));
        assert!(err < 1e-6, "max interior error {err}");
    }

    #[test]
    fn momentum_symbol_is_p_on_the_interior() {
        let g = Grid::new(512, 20.0).unwrap();
        let map = wigner_of_operator(&crate::operator::build_p(&g));
        let err = map.max_abs_error(5.0, |_, p| C64::new(p, 0.0));
        assert!(err < 1e-6, "max interior error {err}");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = Grid::new(8, 4.0).unwrap();
        let psi = hermite_gauss(&g, 0);
        let map = wigner_of_density(&g, &[(1.0, psi)]);
        let csv = map.to_csv();
        assert!(csv.starts_with("# tagcalc wigner map\n# n=8 l=4"));
        assert!(csv.lines().nth(2).unwrap().starts_with("q,p,w_re,w_im"));
        assert_eq!(csv.lines().count(), 3 + 64);
    }
}
