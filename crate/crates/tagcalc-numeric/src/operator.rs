//! Dense operator matrices under the kernel convention
//! `(A psi)(x_i) = sum_j A[i,j] psi_j dx`, plus the spectral quadrature pair
//! and the ladder operators.

use crate::grid::Grid;
use crate::state::{NumericState, StateBasis};
use crate::transform::apply_spectral_multiplier;
use crate::C64;
use std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone)]
pub struct NumericOperator {
    pub grid: Grid,
    /// Row-major n*n kernel samples A(x_i, x_j).
    pub mat: Vec<C64>,
}

impl NumericOperator {
    pub fn zeros(grid: &Grid) -> NumericOperator {
        NumericOperator { grid: grid.clone(), mat: vec![C64::new(0.0, 0.0); grid.n * grid.n] }
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.mat[i * self.grid.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.mat[i * self.grid.n + j] = v;
    }

    /// Kernel application: `(A psi)(x_i) = sum_j A[i,j] psi_j dx`.
    pub fn apply(&self, psi: &NumericState) -> NumericState {
        assert_eq!(psi.basis, StateBasis::Q);
        assert_eq!(psi.grid.n, self.grid.n);
        let n = self.grid.n;
        let out = self
            .mat
            .chunks_exact(n)
            .map(|row| {
                row.iter().zip(&psi.samples).map(|(a, b)| a * b).sum::<C64>() * self.grid.dx
            })
            .collect();
        NumericState::new(self.grid.clone(), StateBasis::Q, out)
    }

    pub fn scale(&self, c: C64) -> NumericOperator {
        NumericOperator {
            grid: self.grid.clone(),
            mat: self.mat.iter().map(|a| a * c).collect(),
        }
    }

    pub fn add(&self, other: &NumericOperator) -> NumericOperator {
        NumericOperator {
            grid: self.grid.clone(),
            mat: self.mat.iter().zip(&other.mat).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &NumericOperator) -> NumericOperator {
        NumericOperator {
            grid: self.grid.clone(),
            mat: self.mat.iter().zip(&other.mat).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn adjoint(&self) -> NumericOperator {
        let n = self.grid.n;
        let mut out = NumericOperator::zeros(&self.grid);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, self.at(j, i).conj());
            }
        }
        out
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        self.mat.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Relative Hermiticity defect ||A - A^dag|| / ||A||.
    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.adjoint()).fro_norm() / self.fro_norm()
    }

    /// dx-weighted kernel trace.
    pub fn trace(&self) -> C64 {
        (0..self.grid.n).map(|i| self.at(i, i)).sum::<C64>() * self.grid.dx
    }

    /// tr(A B) with the kernel measure.
    pub fn trace_product(&self, other: &NumericOperator) -> C64 {
        let n = self.grid.n;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.at(i, j) * other.at(j, i);
            }
        }
        acc * self.grid.dx * self.grid.dx
    }

    /// Build a matrix column-by-column from an action on sample states.
    pub fn from_action(grid: &Grid, action: impl Fn(&NumericState) -> NumericState) -> NumericOperator {
        let n = grid.n;
        let mut out = NumericOperator::zeros(grid);
        for j in 0..n {
            let mut unit = vec![C64::new(0.0, 0.0); n];
            unit[j] = C64::new(1.0, 0.0);
            let col = action(&NumericState::new(grid.clone(), StateBasis::Q, unit));
            // (A u_j)(x_i) = A[i,j] dx
            for i in 0..n {
                out.set(i, j, col.samples[i] / grid.dx);
            }
        }
        out
    }
}

/// Position quadrature: real diagonal kernel q delta(q - q').
pub fn build_q(grid: &Grid) -> NumericOperator {
    let mut out = NumericOperator::zeros(grid);
    for (i, &x) in grid.x().iter().enumerate() {
        out.set(i, i, C64::new(x / grid.dx, 0.0));
    }
    out
}

/// Spectral application of the momentum quadrature.
pub fn apply_p(psi: &NumericState) -> NumericState {
    let samples =
        apply_spectral_multiplier(&psi.grid, &psi.samples, |p| C64::new(p, 0.0));
    NumericState::new(psi.grid.clone(), StateBasis::Q, samples)
}

/// Momentum quadrature as a dense matrix (inverse o diag(p) o forward).
pub fn build_p(grid: &Grid) -> NumericOperator {
    NumericOperator::from_action(grid, apply_p)
}

/// Ladder pair (A, A^dag) = ((Q + iP)/sqrt2, (Q - iP)/sqrt2).
pub fn ladder_matrices(grid: &Grid) -> (NumericOperator, NumericOperator) {
    let q = build_q(grid);
    let p = build_p(grid);
    let a = q.add(&p.scale(C64::new(0.0, 1.0))).scale(C64::new(FRAC_1_SQRT_2, 0.0));
    let adag = q.add(&p.scale(C64::new(0.0, -1.0))).scale(C64::new(FRAC_1_SQRT_2, 0.0));
    (a, adag)
}

/// Ladder actions without materializing matrices.
pub fn apply_lower(psi: &NumericState) -> NumericState {
    let qpsi = multiply_by_x(psi);
    let ppsi = apply_p(psi);
    qpsi.add(&ppsi.scale(C64::new(0.0, 1.0))).scale(C64::new(FRAC_1_SQRT_2, 0.0))
}

pub fn apply_raise(psi: &NumericState) -> NumericState {
    let qpsi = multiply_by_x(psi);
    let ppsi = apply_p(psi);
    qpsi.sub(&ppsi.scale(C64::new(0.0, 1.0))).scale(C64::new(FRAC_1_SQRT_2, 0.0))
}

fn multiply_by_x(psi: &NumericState) -> NumericState {
    let samples = psi
        .grid
        .x()
        .iter()
        .zip(&psi.samples)
        .map(|(&x, a)| a * x)
        .collect();
    NumericState::new(psi.grid.clone(), psi.basis, samples)
}

/// Relative residual ||(QP - PQ - i) psi|| / ||psi||, the desk-scale check
/// of the canonical commutator on the discrete Schwartz domain. States that
/// fail the edge-decay precondition are still evaluated, with a warning flag.
pub struct ResidualReport {
    pub residual: f64,
    pub precondition_ok: bool,
}

pub fn commutator_residual(psi: &NumericState) -> ResidualReport {
    let precondition_ok = psi.edge_decay_ok(10, 1e-12);
    let qp = multiply_by_x(&apply_p(psi));
    let pq = apply_p(&multiply_by_x(psi));
    let ipsi = psi.scale(C64::new(0.0, 1.0));
    let residual = qp.sub(&pq).sub(&ipsi).norm() / psi.norm();
    ResidualReport { residual, precondition_ok }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::hermite_gauss;

    #[test]
    fn q_is_diagonal_multiplication() {
        let g = Grid::new(128, 16.0).unwrap();
        let q = build_q(&g);
        let psi = hermite_gauss(&g, 2);
        let qpsi = q.apply(&psi);
        for (j, &x) in g.x().iter().enumerate() {
            assert!((qpsi.samples[j] - psi.samples[j] * x).norm() < 1e-12);
        }
    }

    #[test]
    fn p_matrix_matches_spectral_action() {
        let g = Grid::new(128, 16.0).unwrap();
        let p = build_p(&g);
        let psi = hermite_gauss(&g, 3);
        let via_matrix = p.apply(&psi);
        let via_fft = apply_p(&psi);
        let err: f64 = via_matrix
            .samples
            .iter()
            .zip(&via_fft.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "max deviation {err}");
    }

    #[test]
    fn p_is_hermitian() {
        let g = Grid::new(256, 20.0).unwrap();
        let p = build_p(&g);
        assert!(p.hermiticity_defect() < 1e-12);
    }

    #[test]
    fn p_expectation_tracks_carrier_frequency() {
        let g = Grid::new(512, 20.0).unwrap();
        let p0 = g.p()[300]; // on-grid carrier
        let psi = NumericState::from_fn(&g, |x| {
            C64::from_polar((-x * x / 2.0).exp(), p0 * x)
        })
        .normalized();
        let expect = psi.inner(&apply_p(&psi));
        assert!((expect.re - p0).abs() < 1e-6, "got {} want {p0}", expect.re);
        assert!(expect.im.abs() < 1e-10);
    }

    #[test]
    fn p_expectation_is_real_for_random_states() {
        let g = Grid::new(128, 16.0).unwrap();
        let mut rng = crate::rng::SplitMix64::new(7);
        let psi = NumericState::new(
            g.clone(),
            StateBasis::Q,
            (0..g.n)
                .map(|j| {
                    let x = g.x()[j];
                    let env = (-x * x / 4.0).exp();
                    C64::new(env * (rng.next_f64() - 0.5), env * (rng.next_f64() - 0.5))
                })
                .collect(),
        );
        let expect = psi.inner(&apply_p(&psi));
        assert!(expect.im.abs() / psi.norm2() < 1e-10);
    }

    #[test]
    fn vacuum_commutator_residual_is_tiny() {
        let g = Grid::new(512, 20.0).unwrap();
        let psi = hermite_gauss(&g, 0);
        let r = commutator_residual(&psi);
        assert!(r.precondition_ok);
        assert!(r.residual < 1e-6, "residual {}", r.residual);
    }

    #[test]
    fn edge_bump_residual_is_large_with_warning() {
        let g = Grid::new(256, 20.0).unwrap();
        let bump = NumericState::from_fn(&g, |x| {
            C64::new((-(x - 9.7) * (x - 9.7) / 0.05).exp(), 0.0)
        })
        .normalized();
        let r = commutator_residual(&bump);
        assert!(!r.precondition_ok);
        assert!(r.residual > 0.05, "residual {}", r.residual);
    }

    #[test]
    fn ladder_annihilates_vacuum_and_raises_to_psi1() {
        let g = Grid::new(512, 20.0).unwrap();
        let psi0 = hermite_gauss(&g, 0);
        let lowered = apply_lower(&psi0);
        assert!(lowered.norm() < 1e-6, "A psi0 norm {}", lowered.norm());

        let raised = apply_raise(&psi0);
        let psi1 = hermite_gauss(&g, 1);
        assert!(raised.sub(&psi1).norm() < 1e-6);
    }

    #[test]
    fn ladder_commutator_on_vacuum() {
        let g = Grid::new(512, 20.0).unwrap();
        let (a, adag) = ladder_matrices(&g);
        let psi0 = hermite_gauss(&g, 0);
        let lhs = a.apply(&adag.apply(&psi0)).sub(&adag.apply(&a.apply(&psi0)));
        let defect = lhs.sub(&psi0).norm();
        assert!(defect < 1e-6, "[A, Adag] psi0 defect {defect}");
    }
}
