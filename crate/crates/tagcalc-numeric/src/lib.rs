//! Grid discretization of the position/momentum bases and the numerical
//! oracle for the symbolic identities: spectral transforms under the
//! exp(-iqp) / dp/(2 pi) convention, quadrature operator matrices,
//! commutator residuals, ladder operators, Hermite-Gauss and coherent
//! states, Wigner maps, moments, traces and unitary-invariance checks.
//!
//! States and operators are immutable after construction; everything here is
//! a pure function of its inputs plus an explicit seed, so outputs are
//! bit-stable given a configuration.

pub mod checks;
pub mod grid;
pub mod operator;
pub mod rng;
pub mod state;
pub mod transform;
pub mod wigner;

pub use checks::{run_all_checks, CheckEntry, CheckReport, Comparison};
pub use grid::{Grid, GridError};
pub use operator::NumericOperator;
pub use rng::SplitMix64;
pub use state::{coherent, hermite_gauss, NumericState, StateBasis};
pub use wigner::WignerMap;

pub type C64 = num_complex::Complex64;
