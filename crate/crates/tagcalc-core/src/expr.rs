//! Expression data model: atoms, terms, formal sums, and the structural
//! operations (renaming, substitution, adjoint, products).
//!
//! A term's word is an ordered sequence of noncommuting atoms (tags and
//! extractors); the scalar part commutes freely. Binders are integration
//! variables whose measure weight is attached to their basis and consumed
//! when the rewrite engine eliminates them.

use crate::affine::Affine;
use crate::coeff::{Coeff, Rat};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Var(pub String);

impl Var {
    pub fn new(s: impl Into<String>) -> Self {
        Var(s.into())
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Basis(pub String);

impl Basis {
    pub fn new(s: impl Into<String>) -> Self {
        Basis(s.into())
    }
    pub fn q() -> Self {
        Basis("q".into())
    }
    pub fn p() -> Self {
        Basis("p".into())
    }
}

/// Noncommuting word atom: a tag (ket) or an extractor (bra).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WordAtom {
    Tag { basis: Basis, var: Var },
    Extractor { basis: Basis, var: Var },
}

impl WordAtom {
    pub fn var(&self) -> &Var {
        match self {
            WordAtom::Tag { var, .. } | WordAtom::Extractor { var, .. } => var,
        }
    }
    pub fn basis(&self) -> &Basis {
        match self {
            WordAtom::Tag { basis, .. } | WordAtom::Extractor { basis, .. } => basis,
        }
    }
    pub fn is_tag(&self) -> bool {
        matches!(self, WordAtom::Tag { .. })
    }
    fn rename(&self, from: &Var, to: &Var) -> WordAtom {
        let map = |v: &Var| if v == from { to.clone() } else { v.clone() };
        match self {
            WordAtom::Tag { basis, var } => WordAtom::Tag { basis: basis.clone(), var: map(var) },
            WordAtom::Extractor { basis, var } => {
                WordAtom::Extractor { basis: basis.clone(), var: map(var) }
            }
        }
    }
}

/// Commuting scalar atoms.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarAtom {
    /// delta(arg); scale and sign live in the term coefficient.
    Delta { arg: Affine },
    /// delta'(arg), the derivative of delta evaluated at the affine argument.
    DeltaPrime { arg: Affine },
    /// exp(i * coef * u * v)
    Phase {
        #[serde(with = "crate::coeff::rat_serde")]
        coef: Rat,
        u: Var,
        v: Var,
    },
    /// exp(i * coef * var); produced only by substitutions with constants.
    LinPhase {
        #[serde(with = "crate::coeff::rat_serde")]
        coef: Rat,
        var: Var,
    },
    /// exp(i * coef); constant unimodular factor kept symbolic.
    PhaseConst {
        #[serde(with = "crate::coeff::rat_serde")]
        coef: Rat,
    },
    /// var^pow. Negative powers occur internally in the integration-by-parts
    /// route and always cancel before a normal form is reported.
    Mono { var: Var, pow: i64 },
    /// Named coefficient function, optionally conjugated/differentiated.
    CoeffFn { name: String, arg: Affine, conj: bool, deriv: u32, schwartz: bool },
    /// Registered unitary kernel U(u, v) or its adjoint.
    Kernel { name: String, u: Affine, v: Affine, adjoint: bool },
    /// Registered general two-slot kernel (e.g. a density kernel).
    Kernel2 { name: String, u: Affine, v: Affine, conj: bool, hermitian: bool },
    /// Unevaluated limit bracket from integration by parts. `limit_var` is
    /// the variable sent to the boundary; the payload is opaque to rewriting.
    Boundary { limit_var: Var, payload: Box<Expr> },
}

impl ScalarAtom {
    pub fn delta_vars(u: Var, v: Var) -> ScalarAtom {
        ScalarAtom::Delta { arg: Affine::var(u).with_coef(v, -Rat::one()) }
    }

    pub fn phase(sign: i8, u: Var, v: Var) -> ScalarAtom {
        let coef = if sign >= 0 { Rat::one() } else { -Rat::one() };
        let (u, v) = if u <= v { (u, v) } else { (v, u) };
        ScalarAtom::Phase { coef, u, v }
    }

    pub fn mono(var: Var, pow: i64) -> ScalarAtom {
        ScalarAtom::Mono { var, pow }
    }

    pub fn coeff_fn(name: impl Into<String>, var: Var) -> ScalarAtom {
        ScalarAtom::CoeffFn {
            name: name.into(),
            arg: Affine::var(var),
            conj: false,
            deriv: 0,
            schwartz: true,
        }
    }

    /// Variables occurring in this atom (for boundary payloads: free ones).
    pub fn vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            ScalarAtom::Delta { arg } | ScalarAtom::DeltaPrime { arg } => {
                out.extend(arg.vars().cloned())
            }
            ScalarAtom::Phase { u, v, .. } => {
                out.insert(u.clone());
                out.insert(v.clone());
            }
            ScalarAtom::LinPhase { var, .. } => {
                out.insert(var.clone());
            }
            ScalarAtom::PhaseConst { .. } => {}
            ScalarAtom::Mono { var, .. } => {
                out.insert(var.clone());
            }
            ScalarAtom::CoeffFn { arg, .. } => out.extend(arg.vars().cloned()),
            ScalarAtom::Kernel { u, v, .. } | ScalarAtom::Kernel2 { u, v, .. } => {
                out.extend(u.vars().cloned());
                out.extend(v.vars().cloned());
            }
            ScalarAtom::Boundary { limit_var, payload } => {
                let mut inner = payload.free_vars();
                inner.remove(limit_var);
                out.extend(inner);
            }
        }
    }

    fn rename(&self, from: &Var, to: &Var) -> ScalarAtom {
        let map_var = |v: &Var| if v == from { to.clone() } else { v.clone() };
        match self {
            ScalarAtom::Delta { arg } => ScalarAtom::Delta { arg: arg.rename(from, to) },
            ScalarAtom::DeltaPrime { arg } => ScalarAtom::DeltaPrime { arg: arg.rename(from, to) },
            ScalarAtom::Phase { coef, u, v } => {
                ScalarAtom::Phase { coef: coef.clone(), u: map_var(u), v: map_var(v) }
            }
            ScalarAtom::LinPhase { coef, var } => {
                ScalarAtom::LinPhase { coef: coef.clone(), var: map_var(var) }
            }
            ScalarAtom::PhaseConst { .. } => self.clone(),
            ScalarAtom::Mono { var, pow } => ScalarAtom::Mono { var: map_var(var), pow: *pow },
            ScalarAtom::CoeffFn { name, arg, conj, deriv, schwartz } => ScalarAtom::CoeffFn {
                name: name.clone(),
                arg: arg.rename(from, to),
                conj: *conj,
                deriv: *deriv,
                schwartz: *schwartz,
            },
            ScalarAtom::Kernel { name, u, v, adjoint } => ScalarAtom::Kernel {
                name: name.clone(),
                u: u.rename(from, to),
                v: v.rename(from, to),
                adjoint: *adjoint,
            },
            ScalarAtom::Kernel2 { name, u, v, conj, hermitian } => ScalarAtom::Kernel2 {
                name: name.clone(),
                u: u.rename(from, to),
                v: v.rename(from, to),
                conj: *conj,
                hermitian: *hermitian,
            },
            ScalarAtom::Boundary { limit_var, payload } => {
                // limit_var is bound inside the bracket; free vars rename.
                if limit_var == from {
                    self.clone()
                } else {
                    ScalarAtom::Boundary {
                        limit_var: limit_var.clone(),
                        payload: Box::new(payload.rename_free(from, to)),
                    }
                }
            }
        }
    }

    fn conjugate(&self) -> ScalarAtom {
        match self {
            ScalarAtom::Delta { .. } | ScalarAtom::DeltaPrime { .. } | ScalarAtom::Mono { .. } => {
                self.clone()
            }
            ScalarAtom::Phase { coef, u, v } => {
                ScalarAtom::Phase { coef: -coef.clone(), u: u.clone(), v: v.clone() }
            }
            ScalarAtom::LinPhase { coef, var } => {
                ScalarAtom::LinPhase { coef: -coef.clone(), var: var.clone() }
            }
            ScalarAtom::PhaseConst { coef } => ScalarAtom::PhaseConst { coef: -coef.clone() },
            ScalarAtom::CoeffFn { name, arg, conj, deriv, schwartz } => ScalarAtom::CoeffFn {
                name: name.clone(),
                arg: arg.clone(),
                conj: !conj,
                deriv: *deriv,
                schwartz: *schwartz,
            },
            // conj U(u,v) = U^dag(v,u)
            ScalarAtom::Kernel { name, u, v, adjoint } => ScalarAtom::Kernel {
                name: name.clone(),
                u: v.clone(),
                v: u.clone(),
                adjoint: !adjoint,
            },
            ScalarAtom::Kernel2 { name, u, v, conj, hermitian } => ScalarAtom::Kernel2 {
                name: name.clone(),
                u: u.clone(),
                v: v.clone(),
                conj: !conj,
                hermitian: *hermitian,
            },
            ScalarAtom::Boundary { limit_var, payload } => ScalarAtom::Boundary {
                limit_var: limit_var.clone(),
                payload: Box::new(payload.adjoint()),
            },
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Binder {
    pub var: Var,
    pub basis: Basis,
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Term {
    pub word: Vec<WordAtom>,
    pub scalars: Vec<ScalarAtom>,
    pub binders: Vec<Binder>,
    pub coeff: Coeff,
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default, Serialize, Deserialize)]
pub struct Expr {
    pub terms: Vec<Term>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("replacement for bound variable `{0}` must be a nonzero scale of a single variable plus a constant")]
    BoundReplacementShape(String),
    #[error("cannot substitute a multi-variable expression into `{0}^{1}`")]
    NegativePowerSubstitution(String, i64),
    #[error("expression is not {0}-shaped")]
    Shape(&'static str),
    #[error("nonlinear replacement is rejected; substitutions must be affine")]
    NonAffine,
}

impl Term {
    pub fn scalar_one() -> Term {
        Term { word: vec![], scalars: vec![], binders: vec![], coeff: Coeff::one() }
    }

    pub fn with_coeff(mut self, c: Coeff) -> Term {
        self.coeff = c;
        self
    }

    pub fn all_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for w in &self.word {
            out.insert(w.var().clone());
        }
        for s in &self.scalars {
            s.vars(&mut out);
        }
        for b in &self.binders {
            out.insert(b.var.clone());
        }
        out
    }

    pub fn bound_vars(&self) -> BTreeSet<Var> {
        self.binders.iter().map(|b| b.var.clone()).collect()
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let bound = self.bound_vars();
        self.all_vars().into_iter().filter(|v| !bound.contains(v)).collect()
    }

    pub fn is_bound(&self, v: &Var) -> bool {
        self.binders.iter().any(|b| &b.var == v)
    }

    /// Binders whose variable occurs in no atom (a bare divergent measure).
    pub fn unused_binders(&self) -> Vec<Var> {
        let mut used = BTreeSet::new();
        for w in &self.word {
            used.insert(w.var().clone());
        }
        for s in &self.scalars {
            s.vars(&mut used);
        }
        self.binders
            .iter()
            .filter(|b| !used.contains(&b.var))
            .map(|b| b.var.clone())
            .collect()
    }

    /// Occurrences of `v` counted per atom class, used by rule guards.
    pub fn occurrences(&self, v: &Var) -> Occurrences {
        let mut occ = Occurrences::default();
        for w in &self.word {
            if w.var() == v {
                occ.word += 1;
            }
        }
        for (idx, s) in self.scalars.iter().enumerate() {
            let mut vars = BTreeSet::new();
            s.vars(&mut vars);
            if !vars.contains(v) {
                continue;
            }
            match s {
                ScalarAtom::Delta { .. } => occ.delta.push(idx),
                ScalarAtom::DeltaPrime { .. } => occ.delta_prime.push(idx),
                ScalarAtom::Phase { .. } | ScalarAtom::LinPhase { .. } => occ.phase.push(idx),
                ScalarAtom::Mono { .. } => occ.mono.push(idx),
                ScalarAtom::CoeffFn { .. } => occ.coeff_fn.push(idx),
                ScalarAtom::Kernel { .. } | ScalarAtom::Kernel2 { .. } => occ.kernel.push(idx),
                ScalarAtom::Boundary { .. } => occ.boundary.push(idx),
                ScalarAtom::PhaseConst { .. } => {}
            }
        }
        occ
    }

    /// Rename every occurrence of a variable, binders included.
    pub fn rename_var(&self, from: &Var, to: &Var) -> Term {
        Term {
            word: self.word.iter().map(|w| w.rename(from, to)).collect(),
            scalars: self.scalars.iter().map(|s| s.rename(from, to)).collect(),
            binders: self
                .binders
                .iter()
                .map(|b| Binder {
                    var: if &b.var == from { to.clone() } else { b.var.clone() },
                    basis: b.basis.clone(),
                })
                .collect(),
            coeff: self.coeff.clone(),
        }
    }

    /// Rename binders that collide with `taken`, returning a capture-free term.
    pub fn avoid_capture(&self, taken: &BTreeSet<Var>) -> Term {
        let mut t = self.clone();
        let mut all: BTreeSet<Var> = taken.clone();
        all.extend(t.all_vars());
        let binders: Vec<Var> = t.bound_vars().into_iter().collect();
        for v in binders {
            if taken.contains(&v) {
                let fresh = fresh_var(&v, &all);
                all.insert(fresh.clone());
                t = t.rename_var(&v, &fresh);
            }
        }
        t
    }

    /// Product of two terms: words concatenate, scalars merge, binders union
    /// (right side renamed away from the left's variables).
    pub fn mul(&self, other: &Term) -> Term {
        let left_vars = self.all_vars();
        let rhs = other.avoid_capture(&left_vars);
        let mut word = self.word.clone();
        word.extend(rhs.word);
        let mut scalars = self.scalars.clone();
        scalars.extend(rhs.scalars);
        let mut binders = self.binders.clone();
        binders.extend(rhs.binders);
        Term { word, scalars, binders, coeff: self.coeff.mul(&rhs.coeff) }
    }

    pub fn adjoint(&self) -> Term {
        let mut word: Vec<WordAtom> = self
            .word
            .iter()
            .map(|w| match w {
                WordAtom::Tag { basis, var } => {
                    WordAtom::Extractor { basis: basis.clone(), var: var.clone() }
                }
                WordAtom::Extractor { basis, var } => {
                    WordAtom::Tag { basis: basis.clone(), var: var.clone() }
                }
            })
            .collect();
        word.reverse();
        Term {
            word,
            scalars: self.scalars.iter().map(|s| s.conjugate()).collect(),
            binders: self.binders.clone(),
            coeff: self.coeff.conj(),
        }
    }
}

#[derive(Default, Debug, Clone)]
pub struct Occurrences {
    pub word: usize,
    pub delta: Vec<usize>,
    pub delta_prime: Vec<usize>,
    pub phase: Vec<usize>,
    pub mono: Vec<usize>,
    pub coeff_fn: Vec<usize>,
    pub kernel: Vec<usize>,
    pub boundary: Vec<usize>,
}

impl Occurrences {
    pub fn total_scalar(&self) -> usize {
        self.delta.len()
            + self.delta_prime.len()
            + self.phase.len()
            + self.mono.len()
            + self.coeff_fn.len()
            + self.kernel.len()
            + self.boundary.len()
    }
}

pub fn fresh_var(base: &Var, taken: &BTreeSet<Var>) -> Var {
    let stem = base.0.split('~').next().unwrap_or(&base.0).to_string();
    for i in 1.. {
        let candidate = Var(format!("{stem}~{i}"));
        if !taken.contains(&candidate) {
            return candidate;
        }
    }
    unreachable!()
}

impl Expr {
    pub fn zero() -> Expr {
        Expr { terms: vec![] }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn from_term(t: Term) -> Expr {
        Expr { terms: vec![t] }
    }

    /// The scalar constant `c` as an expression.
    pub fn constant(c: Coeff) -> Expr {
        if c.is_zero() {
            Expr::zero()
        } else {
            Expr::from_term(Term::scalar_one().with_coeff(c))
        }
    }

    /// Resolved identity in the given basis: the tag-extractor integral over
    /// the whole index space.
    ///
    /// Index variables are always named by their basis stem plus a counter
    /// (`q0`, `p1`, `nu0`, ...), which is how the text syntax recovers the
    /// basis of a label.
    pub fn identity(basis: &Basis) -> Expr {
        let v = Var(format!("{}0", basis.0));
        Expr::from_term(Term {
            word: vec![
                WordAtom::Tag { basis: basis.clone(), var: v.clone() },
                WordAtom::Extractor { basis: basis.clone(), var: v.clone() },
            ],
            scalars: vec![],
            binders: vec![Binder { var: v, basis: basis.clone() }],
            coeff: Coeff::one(),
        })
    }

    /// State built from a named coefficient function: the integral of tags
    /// against the function.
    pub fn ket(name: &str, basis: &Basis, schwartz: bool) -> Expr {
        let v = Var(format!("{}0", basis.0));
        Expr::from_term(Term {
            word: vec![WordAtom::Tag { basis: basis.clone(), var: v.clone() }],
            scalars: vec![ScalarAtom::CoeffFn {
                name: name.to_string(),
                arg: Affine::var(v.clone()),
                conj: false,
                deriv: 0,
                schwartz,
            }],
            binders: vec![Binder { var: v, basis: basis.clone() }],
            coeff: Coeff::one(),
        })
    }

    pub fn bra(name: &str, basis: &Basis, schwartz: bool) -> Expr {
        Expr::ket(name, basis, schwartz).adjoint()
    }

    /// Diagonal first-moment-style operator with kernel var^pow.
    pub fn diagonal_operator(basis: &Basis, pow: u32) -> Expr {
        let v = Var(format!("{}0", basis.0));
        let mut scalars = vec![];
        if pow > 0 {
            scalars.push(ScalarAtom::Mono { var: v.clone(), pow: pow as i64 });
        }
        Expr::from_term(Term {
            word: vec![
                WordAtom::Tag { basis: basis.clone(), var: v.clone() },
                WordAtom::Extractor { basis: basis.clone(), var: v.clone() },
            ],
            scalars,
            binders: vec![Binder { var: v, basis: basis.clone() }],
            coeff: Coeff::one(),
        })
    }

    pub fn add(&self, other: &Expr) -> Expr {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.clone());
        Expr { terms }
    }

    pub fn neg(&self) -> Expr {
        Expr { terms: self.terms.iter().map(|t| t.clone().with_coeff(t.coeff.neg())).collect() }
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Coeff) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr {
            terms: self.terms.iter().map(|t| t.clone().with_coeff(t.coeff.mul(c))).collect(),
        }
    }

    /// Formal product; the empty sum is absorbing.
    pub fn mul(&self, other: &Expr) -> Expr {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(a.mul(b));
            }
        }
        Expr { terms }
    }

    pub fn adjoint(&self) -> Expr {
        Expr { terms: self.terms.iter().map(|t| t.adjoint()).collect() }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for t in &self.terms {
            out.extend(t.free_vars());
        }
        out
    }

    /// Rename a free variable everywhere (no capture checks; callers ensure
    /// `to` is unused).
    pub fn rename_free(&self, from: &Var, to: &Var) -> Expr {
        Expr {
            terms: self
                .terms
                .iter()
                .map(|t| {
                    if t.is_bound(from) {
                        t.clone()
                    } else {
                        t.rename_var(from, to)
                    }
                })
                .collect(),
        }
    }

    /// Substitute an affine replacement for a variable.
    ///
    /// Free variables substitute atom-wise, with monomials expanded
    /// binomially; binders shadowing the replacement's variables are renamed
    /// first. For a bound variable this is a change of integration
    /// variables: the replacement must be `a*w + c` with one variable, and
    /// the Jacobian `|a|` multiplies the coefficient.
    pub fn substitute(&self, v: &Var, replacement: &Affine) -> Result<Expr, ExprError> {
        let mut out = Vec::new();
        for t in &self.terms {
            if t.is_bound(v) {
                out.extend(substitute_bound(t, v, replacement)?.terms);
            } else {
                out.extend(substitute_term_free(t, v, replacement)?.terms);
            }
        }
        Ok(Expr { terms: out })
    }

    /// Substitution that lets existing binders capture the replacement's
    /// variables. Sifting needs this: a delta identifies two variables under
    /// the same integral sign, so replacing one by the other must land back
    /// inside the binder's scope.
    pub fn substitute_captured(&self, v: &Var, replacement: &Affine) -> Result<Expr, ExprError> {
        let mut out = Vec::new();
        for t in &self.terms {
            out.extend(substitute_term_raw(t, v, replacement)?.terms);
        }
        Ok(Expr { terms: out })
    }

    /// Shape predicate: every term's word is a single tag.
    pub fn is_ket_shaped(&self) -> bool {
        self.terms.iter().all(|t| t.word.len() == 1 && t.word[0].is_tag())
    }

    /// Shape predicate: every term's word is a single extractor.
    pub fn is_bra_shaped(&self) -> bool {
        self.terms.iter().all(|t| t.word.len() == 1 && !t.word[0].is_tag())
    }

    /// Shape predicate: every term's word is a tag followed by an extractor.
    pub fn is_operator_shaped(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.word.len() == 2 && t.word[0].is_tag() && !t.word[1].is_tag())
    }

    /// Shape predicate: no word atoms anywhere.
    pub fn is_scalar_shaped(&self) -> bool {
        self.terms.iter().all(|t| t.word.is_empty())
    }
}

fn substitute_term_free(t: &Term, v: &Var, rep: &Affine) -> Result<Expr, ExprError> {
    // Protect the replacement's variables from capture by binders.
    let mut taken: BTreeSet<Var> = rep.vars().cloned().collect();
    taken.insert(v.clone());
    let t = t.avoid_capture(&taken);
    substitute_term_raw(&t, v, rep)
}

fn substitute_term_raw(t: &Term, v: &Var, rep: &Affine) -> Result<Expr, ExprError> {
    let mut out = vec![(t.coeff.clone(), Vec::<ScalarAtom>::new())];
    for s in &t.scalars {
        let pieces = substitute_atom(s, v, rep)?;
        let mut next = Vec::with_capacity(out.len() * pieces.len());
        for (c, atoms) in &out {
            for (pc, patoms) in &pieces {
                let mut atoms2 = atoms.clone();
                atoms2.extend(patoms.clone());
                next.push((c.mul(pc), atoms2));
            }
        }
        out = next;
    }
    // Word atom indices are plain variables; an affine replacement for a tag
    // index only makes sense as a plain renaming.
    let word = if t.word.iter().any(|w| w.var() == v) {
        match rep.as_plain_var() {
            Some(w) => t.word.iter().map(|a| a.rename(v, w)).collect(),
            None => return Err(ExprError::BoundReplacementShape(v.0.clone())),
        }
    } else {
        t.word.clone()
    };
    Ok(Expr {
        terms: out
            .into_iter()
            .map(|(coeff, scalars)| Term {
                word: word.clone(),
                scalars,
                binders: t.binders.clone(),
                coeff,
            })
            .collect(),
    })
}

/// Substitute into one scalar atom, returning multiplicative pieces
/// (sums arise only from monomial expansion).
fn substitute_atom(
    s: &ScalarAtom,
    v: &Var,
    rep: &Affine,
) -> Result<Vec<(Coeff, Vec<ScalarAtom>)>, ExprError> {
    let single = |a: ScalarAtom| vec![(Coeff::one(), vec![a])];
    Ok(match s {
        ScalarAtom::Delta { arg } => single(ScalarAtom::Delta { arg: arg.substitute(v, rep) }),
        ScalarAtom::DeltaPrime { arg } => {
            single(ScalarAtom::DeltaPrime { arg: arg.substitute(v, rep) })
        }
        ScalarAtom::CoeffFn { name, arg, conj, deriv, schwartz } => single(ScalarAtom::CoeffFn {
            name: name.clone(),
            arg: arg.substitute(v, rep),
            conj: *conj,
            deriv: *deriv,
            schwartz: *schwartz,
        }),
        ScalarAtom::Kernel { name, u, v: kv, adjoint } => single(ScalarAtom::Kernel {
            name: name.clone(),
            u: u.substitute(v, rep),
            v: kv.substitute(v, rep),
            adjoint: *adjoint,
        }),
        ScalarAtom::Kernel2 { name, u, v: kv, conj, hermitian } => single(ScalarAtom::Kernel2 {
            name: name.clone(),
            u: u.substitute(v, rep),
            v: kv.substitute(v, rep),
            conj: *conj,
            hermitian: *hermitian,
        }),
        ScalarAtom::PhaseConst { .. } => single(s.clone()),
        ScalarAtom::Boundary { limit_var, payload } => {
            if limit_var == v {
                single(s.clone())
            } else {
                single(ScalarAtom::Boundary {
                    limit_var: limit_var.clone(),
                    payload: Box::new(payload.substitute(v, rep)?),
                })
            }
        }
        ScalarAtom::LinPhase { coef, var } => {
            if var != v {
                single(s.clone())
            } else {
                // exp(i k (sum a_j w_j + c)) -> product of linear phases and a constant phase
                let mut atoms = Vec::new();
                for (w, a) in &rep.terms {
                    atoms.push(ScalarAtom::LinPhase { coef: coef * a, var: w.clone() });
                }
                if !rep.constant.is_zero() {
                    atoms.push(ScalarAtom::PhaseConst { coef: coef * &rep.constant });
                }
                vec![(Coeff::one(), atoms)]
            }
        }
        ScalarAtom::Phase { coef, u, v: pv } => {
            if u != v && pv != v {
                single(s.clone())
            } else if u == v && pv == v {
                // exp(i k v^2): quadratic in the substituted variable; only a
                // plain renaming keeps it representable.
                match rep.as_plain_var() {
                    Some(w) => single(ScalarAtom::Phase {
                        coef: coef.clone(),
                        u: w.clone(),
                        v: w.clone(),
                    }),
                    None => return Err(ExprError::NonAffine),
                }
            } else {
                let other = if u == v { pv } else { u };
                // exp(i k (sum a_j w_j + c) * other)
                let mut atoms = Vec::new();
                for (w, a) in &rep.terms {
                    let (x, y) =
                        if w <= other { (w.clone(), other.clone()) } else { (other.clone(), w.clone()) };
                    atoms.push(ScalarAtom::Phase { coef: coef * a, u: x, v: y });
                }
                if !rep.constant.is_zero() {
                    atoms.push(ScalarAtom::LinPhase {
                        coef: coef * &rep.constant,
                        var: other.clone(),
                    });
                }
                vec![(Coeff::one(), atoms)]
            }
        }
        ScalarAtom::Mono { var, pow } => {
            if var != v {
                single(s.clone())
            } else if let Some(w) = rep.as_plain_var() {
                single(ScalarAtom::Mono { var: w.clone(), pow: *pow })
            } else if *pow < 0 {
                // 1/v^n with v -> a*w: a^pow * w^pow; anything wider is out.
                if rep.constant.is_zero() && rep.terms.len() == 1 {
                    let (w, a) = rep.terms.iter().next().unwrap();
                    let mut c = Coeff::one();
                    for _ in 0..pow.unsigned_abs() {
                        c = c.mul_rat(&a.recip());
                    }
                    vec![(c, vec![ScalarAtom::Mono { var: w.clone(), pow: *pow }])]
                } else {
                    return Err(ExprError::NegativePowerSubstitution(var.0.clone(), *pow));
                }
            } else {
                expand_affine_power(rep, *pow as u32)
            }
        }
    })
}

/// (sum a_j w_j + c)^n expanded into monomial pieces.
fn expand_affine_power(rep: &Affine, n: u32) -> Vec<(Coeff, Vec<ScalarAtom>)> {
    let mut acc: Vec<(Rat, std::collections::BTreeMap<Var, i64>)> =
        vec![(Rat::one(), Default::default())];
    for _ in 0..n {
        let mut next = Vec::new();
        for (c, monos) in &acc {
            for (w, a) in &rep.terms {
                let mut m = monos.clone();
                *m.entry(w.clone()).or_insert(0) += 1;
                next.push((c * a, m));
            }
            if !rep.constant.is_zero() {
                next.push((c * &rep.constant, monos.clone()));
            }
        }
        acc = next;
    }
    acc.into_iter()
        .map(|(c, monos)| {
            let atoms = monos
                .into_iter()
                .filter(|(_, p)| *p != 0)
                .map(|(var, pow)| ScalarAtom::Mono { var, pow })
                .collect();
            (Coeff::from_rat(c), atoms)
        })
        .collect()
}

/// Change of integration variables for a single binder.
fn substitute_bound(t: &Term, v: &Var, rep: &Affine) -> Result<Expr, ExprError> {
    // rep must be a*w + c with a != 0
    if rep.terms.len() != 1 {
        return Err(ExprError::BoundReplacementShape(v.0.clone()));
    }
    let (w, a) = rep.terms.iter().next().unwrap();
    if a.is_zero() {
        return Err(ExprError::BoundReplacementShape(v.0.clone()));
    }
    let (w, a) = (w.clone(), a.clone());

    // The new integration variable must not collide with anything else.
    if w != *v && t.all_vars().contains(&w) {
        return Err(ExprError::BoundReplacementShape(v.0.clone()));
    }
    let basis = t
        .binders
        .iter()
        .find(|b| &b.var == v)
        .map(|b| b.basis.clone())
        .expect("caller checked v is bound");

    // Detach the binder, substitute the old variable by its affine image in
    // the new variable, then bind the new variable.
    let tmp = fresh_var(v, &t.all_vars());
    let mut detached = t.rename_var(v, &tmp);
    detached.binders.retain(|b| b.var != tmp);
    let rep2 = Affine::var(w.clone()).scale(&a).add(&Affine::constant(rep.constant.clone()));
    let substituted = substitute_term_free(&detached, &tmp, &rep2)?;

    // Jacobian: d(old) = |a| d(new).
    let jac = a.abs();
    Ok(Expr {
        terms: substituted
            .terms
            .into_iter()
            .map(|mut t2| {
                t2.binders.push(Binder { var: w.clone(), basis: basis.clone() });
                t2.coeff = t2.coeff.mul_rat(&jac);
                t2
            })
            .collect(),
    })
}

// ---------------------------------------------------------------------------
// shaped wrappers

/// A composite entity: every term's word is a single trailing tag. The flag
/// records that the coefficient function was declared unit-norm; symbolic
/// rewriting never checks it, the numeric backend does.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KetState {
    pub expr: Expr,
    pub normalized: bool,
}

/// An adjoint composite entity: a single leading extractor per term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BraState {
    pub expr: Expr,
    pub normalized: bool,
}

/// A dressed kernel: tag, scalar kernel, extractor under integrals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorExpr {
    pub expr: Expr,
}

impl KetState {
    pub fn try_new(expr: Expr, normalized: bool) -> Result<KetState, ExprError> {
        if expr.is_ket_shaped() {
            Ok(KetState { expr, normalized })
        } else {
            Err(ExprError::Shape("ket"))
        }
    }

    pub fn named(name: &str, basis: &Basis) -> KetState {
        KetState { expr: Expr::ket(name, basis, true), normalized: true }
    }

    pub fn adjoint(&self) -> BraState {
        BraState { expr: self.expr.adjoint(), normalized: self.normalized }
    }
}

impl BraState {
    pub fn try_new(expr: Expr, normalized: bool) -> Result<BraState, ExprError> {
        if expr.is_bra_shaped() {
            Ok(BraState { expr, normalized })
        } else {
            Err(ExprError::Shape("bra"))
        }
    }

    pub fn adjoint(&self) -> KetState {
        KetState { expr: self.expr.adjoint(), normalized: self.normalized }
    }
}

impl OperatorExpr {
    pub fn try_new(expr: Expr) -> Result<OperatorExpr, ExprError> {
        if expr.is_operator_shaped() {
            Ok(OperatorExpr { expr })
        } else {
            Err(ExprError::Shape("operator"))
        }
    }

    pub fn adjoint(&self) -> OperatorExpr {
        OperatorExpr { expr: self.expr.adjoint() }
    }
}
