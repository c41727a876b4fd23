//! Registry of basis labels, measure weights, and pairing results.
//!
//! Contracting an extractor against a tag consults this table:
//! a basis paired with itself gives a delta scaled by the basis delta-scale,
//! a registered unbiased pair gives a pure phase, and a registered unitary
//! kernel pair gives a named kernel atom. The invariant
//! `measure_weight * delta_scale = 1` makes resolving the identity exact.

use crate::coeff::Coeff;
use crate::expr::Basis;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Pairing {
    /// delta(u - v) scaled by the basis delta-scale.
    Delta { scale: Coeff },
    /// exp(sign * i * u * v)
    Phase { sign: i8 },
    /// Named unitary kernel U(u, v), adjoint when flagged.
    Unitary { name: String, adjoint: bool },
}

#[derive(Debug, Clone)]
struct BasisInfo {
    /// Weight multiplying `d var` for binders in this basis.
    measure: Coeff,
    /// Scale of the self-pairing delta.
    delta_scale: Coeff,
    /// Basis that tags/extractors of this basis rewrite into during
    /// normalization (for unbiased partners of the canonical basis).
    align_to: Option<Basis>,
}

#[derive(Debug, Clone)]
pub struct UnitaryInfo {
    pub from: Basis,
    pub to: Basis,
}

#[derive(Debug, Clone)]
pub struct Kernel2Info {
    pub hermitian: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BasisError {
    #[error("no pairing registered for extractor basis `{0}` against tag basis `{1}`")]
    UnregisteredPair(String, String),
    #[error("basis `{0}`: measure weight times delta scale must be exactly 1")]
    MeasureScaleMismatch(String),
    #[error("unitary kernel `{0}` is not registered")]
    UnregisteredKernel(String),
    #[error("kernel `{0}` is already registered")]
    DuplicateKernel(String),
    #[error("bases `{0}` and `{1}` are required to be registered as mutually unbiased")]
    MissingUnbiasedPair(String, String),
}

#[derive(Debug, Clone, Default)]
pub struct BasisTable {
    bases: BTreeMap<Basis, BasisInfo>,
    /// (extractor basis, tag basis) -> phase sign
    unbiased: BTreeMap<(Basis, Basis), i8>,
    /// (extractor basis, tag basis) -> (kernel name, adjoint flag)
    unitary_pairs: BTreeMap<(Basis, Basis), (String, bool)>,
    unitaries: BTreeMap<String, UnitaryInfo>,
    kernel2s: BTreeMap<String, Kernel2Info>,
}

impl BasisTable {
    pub fn empty() -> Self {
        BasisTable::default()
    }

    /// The standard quadrature setup: `q` with unit measure and delta scale,
    /// `p` with measure 1/(2 pi) and delta scale 2 pi, mutually unbiased with
    /// `<q|p> = exp(+i q p)`, and `p` aligning to `q` during normalization.
    pub fn standard() -> Self {
        let mut t = BasisTable::empty();
        t.register_basis(Basis::q(), Coeff::one(), Coeff::one()).unwrap();
        t.register_basis(Basis::p(), Coeff::inv_two_pi(), Coeff::two_pi()).unwrap();
        t.register_unbiased(Basis::q(), Basis::p(), 1);
        t.set_alignment(Basis::p(), Basis::q());
        t
    }

    pub fn register_basis(
        &mut self,
        basis: Basis,
        measure: Coeff,
        delta_scale: Coeff,
    ) -> Result<(), BasisError> {
        if !measure.mul(&delta_scale).is_one() {
            return Err(BasisError::MeasureScaleMismatch(basis.0));
        }
        self.bases.insert(basis, BasisInfo { measure, delta_scale, align_to: None });
        Ok(())
    }

    /// Register `ext` and `tag` as mutually unbiased with
    /// `<ext|tag> = exp(sign i u v)`; the reverse pairing is the conjugate.
    pub fn register_unbiased(&mut self, ext: Basis, tag: Basis, sign: i8) {
        self.unbiased.insert((ext.clone(), tag.clone()), sign);
        self.unbiased.insert((tag, ext), -sign);
    }

    /// Direct tags/extractors of `from` to rewrite into `to` (with the
    /// registered phase kernels inserted) during normalization.
    pub fn set_alignment(&mut self, from: Basis, to: Basis) {
        if let Some(info) = self.bases.get_mut(&from) {
            info.align_to = Some(to);
        }
    }

    /// Register an abstract unitary kernel relating two bases. Pairings for
    /// the mixed extractor/tag combinations are installed in both directions.
    pub fn register_unitary(
        &mut self,
        name: impl Into<String>,
        from: Basis,
        to: Basis,
    ) -> Result<(), BasisError> {
        let name = name.into();
        if self.unitaries.contains_key(&name) {
            return Err(BasisError::DuplicateKernel(name));
        }
        // <from_ext | to_tag> = U(u, v); <to_ext | from_tag> = U^dag(u, v)
        self.unitary_pairs.insert((from.clone(), to.clone()), (name.clone(), false));
        self.unitary_pairs.insert((to.clone(), from.clone()), (name.clone(), true));
        self.unitaries.insert(name, UnitaryInfo { from, to });
        Ok(())
    }

    pub fn register_kernel2(&mut self, name: impl Into<String>, hermitian: bool) {
        self.kernel2s.insert(name.into(), Kernel2Info { hermitian });
    }

    pub fn unitary(&self, name: &str) -> Result<&UnitaryInfo, BasisError> {
        self.unitaries.get(name).ok_or_else(|| BasisError::UnregisteredKernel(name.to_string()))
    }

    pub fn is_unitary(&self, name: &str) -> bool {
        self.unitaries.contains_key(name)
    }

    pub fn kernel2(&self, name: &str) -> Option<&Kernel2Info> {
        self.kernel2s.get(name)
    }

    fn info(&self, basis: &Basis) -> BasisInfo {
        self.bases.get(basis).cloned().unwrap_or(BasisInfo {
            measure: Coeff::one(),
            delta_scale: Coeff::one(),
            align_to: None,
        })
    }

    /// Measure weight consumed when a binder in this basis is eliminated.
    pub fn measure(&self, basis: &Basis) -> Coeff {
        self.info(basis).measure
    }

    pub fn delta_scale(&self, basis: &Basis) -> Coeff {
        self.info(basis).delta_scale
    }

    pub fn alignment(&self, basis: &Basis) -> Option<Basis> {
        self.info(basis).align_to
    }

    /// Phase sign of `<ext|tag>` for an unbiased registered pair.
    pub fn unbiased_sign(&self, ext: &Basis, tag: &Basis) -> Option<i8> {
        self.unbiased.get(&(ext.clone(), tag.clone())).copied()
    }

    /// Pairing of an extractor in `ext` with a tag in `tag`.
    pub fn pairing(&self, ext: &Basis, tag: &Basis) -> Result<Pairing, BasisError> {
        if ext == tag {
            return Ok(Pairing::Delta { scale: self.delta_scale(ext) });
        }
        if let Some(sign) = self.unbiased.get(&(ext.clone(), tag.clone())) {
            return Ok(Pairing::Phase { sign: *sign });
        }
        if let Some((name, adjoint)) = self.unitary_pairs.get(&(ext.clone(), tag.clone())) {
            return Ok(Pairing::Unitary { name: name.clone(), adjoint: *adjoint });
        }
        Err(BasisError::UnregisteredPair(ext.0.clone(), tag.0.clone()))
    }

    /// Check that the quadrature pair is fully registered.
    pub fn require_unbiased(&self, a: &Basis, b: &Basis) -> Result<i8, BasisError> {
        self.unbiased_sign(a, b)
            .ok_or_else(|| BasisError::MissingUnbiasedPair(a.0.clone(), b.0.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_table_axioms() {
        let t = BasisTable::standard();
        match t.pairing(&Basis::q(), &Basis::q()).unwrap() {
            Pairing::Delta { scale } => assert!(scale.is_one()),
            other => panic!("unexpected pairing {other:?}"),
        }
        match t.pairing(&Basis::p(), &Basis::p()).unwrap() {
            Pairing::Delta { scale } => assert_eq!(scale, Coeff::two_pi()),
            other => panic!("unexpected pairing {other:?}"),
        }
        assert_eq!(t.unbiased_sign(&Basis::q(), &Basis::p()), Some(1));
        assert_eq!(t.unbiased_sign(&Basis::p(), &Basis::q()), Some(-1));
        // measure * delta_scale = 1 for both bases
        for b in [Basis::q(), Basis::p()] {
            assert!(t.measure(&b).mul(&t.delta_scale(&b)).is_one());
        }
    }

    #[test]
    fn unregistered_cross_pair_errors() {
        let t = BasisTable::standard();
        let err = t.pairing(&Basis::new("nu"), &Basis::q()).unwrap_err();
        assert!(matches!(err, BasisError::UnregisteredPair(a, b) if a == "nu" && b == "q"));
    }

    #[test]
    fn mismatched_measure_rejected() {
        let mut t = BasisTable::empty();
        let err = t.register_basis(Basis::new("b"), Coeff::one(), Coeff::two_pi());
        assert!(matches!(err, Err(BasisError::MeasureScaleMismatch(_))));
    }
}
