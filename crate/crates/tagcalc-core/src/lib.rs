//! Symbolic calculus for tagged vector spaces.
//!
//! A tag is a formal labelled device that makes components of a composite
//! entity extractable: unit vectors against a dot product, basis kets of a
//! qubit against their bras, powers of a generating parameter against
//! differentiation at zero are all discrete instances of the same idea.
//! This crate mechanizes the continuous case, where tags carry real indices,
//! extractors pair with them to deltas, Fourier phases, or unitary kernels,
//! and composite entities are integrals of tags against coefficient
//! functions.
//!
//! Expressions are formal sums of terms, where each term is an ordered word
//! of noncommuting atoms (tags and extractors indexed by basis labels), a
//! commuting multiset of scalar atoms (deltas, phases, monomials, coefficient
//! functions, kernels), an exact complex-rational coefficient with tracked
//! powers of pi and sqrt(2), and a set of integration binders whose measure
//! weights are attached to their basis.
//!
//! The crate provides:
//!
//! - [`expr`]: the expression data model and structural operations
//!   (alpha-renaming, substitution, adjoint, products, structural equality),
//! - [`basis`]: the registry of basis labels, measure weights and pairing
//!   results,
//! - [`rewrite`]: a staged, terminating rewrite system with a fixpoint
//!   normalizer and the operator trace,
//! - [`dsl`]: an ASCII Dirac-notation front end (parser and printer),
//! - [`mod@derive`]: canned derivation pipelines (quadratures, ladder operators,
//!   commutators, Weyl symbols, symplectic checks, rebasing, moments,
//!   densities).
//!
//! All values are immutable; every operation is a pure function, so
//! expressions can be shared and normalized from multiple threads freely.

pub mod affine;
pub mod basis;
pub mod canon;
pub mod coeff;
pub mod derive;
pub mod dsl;
pub mod expr;
pub mod rewrite;

pub use affine::Affine;
pub use basis::{BasisTable, Pairing};
pub use canon::{alpha_normalize, canonical_expr, structural_eq};
pub use coeff::{Coeff, Rat};
pub use expr::{
    Basis, Binder, BraState, Expr, KetState, OperatorExpr, ScalarAtom, Term, Var, WordAtom,
};
pub use rewrite::{normalize, NormalizeMode, NormalizeReport, RewriteError};
