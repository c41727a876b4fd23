//! Staged rewrite system and fixpoint normalizer.
//!
//! Rules are grouped into ordered stages; the normalizer repeatedly applies
//! the first applicable rule (stage-major, then term order), re-canonicalizes
//! after every application, and stops at a fixpoint or when the step budget
//! is exhausted. Stage order:
//!
//! 1. contraction (extractor-tag pairs, unitary kernel composition)
//! 2. sifting (deltas against bound variables)
//! 3. basis alignment (unbiased tags/extractors rewritten into their
//!    registered canonical partner by resolving the identity)
//! 4. phase integration (Fourier kernels against a bound variable, with or
//!    without a first moment)
//! 5. delta-prime calculus (moment shifts onto delta supports, delta-prime
//!    sifting with the product rule)
//! 6. boundary annihilation (bracket terms against Schwartz partners)
//!
//! Collection (merging like terms, dropping zeros, alpha-renaming) runs after
//! every step as part of canonicalization. Progress is well-founded: each
//! rule strictly reduces the measure (unaligned word atoms, word length,
//! integrable phase binders, delta count, shiftable moment degree, binder
//! count); the step budget guards the claim at runtime.

use crate::basis::{BasisError, BasisTable, Pairing};
use crate::canon::{canonical_expr, expr_hash};
use crate::coeff::Coeff;
use crate::expr::{Binder, Expr, ExprError, ScalarAtom, Term, Var, WordAtom};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizeMode {
    /// Phase moments integrate directly to delta-prime kernels.
    Distributional,
    /// Phase moments integrate by parts, emitting boundary bracket terms
    /// that are annihilated against Schwartz partners.
    PaperFaithful,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Contraction,
    Sifting,
    BasisAlignment,
    PhaseIntegration,
    DeltaPrimeCalculus,
    Boundary,
    Collection,
}

pub const ALL_STAGES: [Stage; 6] = [
    Stage::Contraction,
    Stage::Sifting,
    Stage::BasisAlignment,
    Stage::PhaseIntegration,
    Stage::DeltaPrimeCalculus,
    Stage::Boundary,
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub rule: String,
    pub stage: Stage,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NormalizeReport {
    pub steps: Vec<StepRecord>,
    pub steps_taken: usize,
    pub fixpoint: bool,
    pub boundary_terms_emitted: usize,
    pub boundary_terms_annihilated: usize,
    pub boundary_terms_remaining: usize,
    /// delta(0)-style atoms surviving in the result (divergent symbolically).
    pub divergent_deltas: usize,
    /// Binders whose variable occurs in no atom (bare divergent measures).
    pub unused_measures: usize,
}

#[derive(Debug, Error)]
pub enum RewriteError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("step budget of {budget} exceeded; normalization diverged")]
    StepBudgetExceeded { budget: usize, report: Box<NormalizeReport> },
    #[error("phase integration over `{var}` supports first moments only, found power {pow}")]
    UnsupportedPhaseMoment { var: String, pow: i64 },
    #[error("delta-prime sifting over `{var}` hit a non-differentiable kernel atom")]
    DeltaPrimeNonDifferentiable { var: String },
    #[error("expression is not {0}-shaped")]
    Shape(&'static str),
}

pub const DEFAULT_STEP_BUDGET: usize = 100_000;

struct RuleOutcome {
    rule: &'static str,
    stage: Stage,
    replacement: Vec<Term>,
    boundary_emitted: usize,
    boundary_annihilated: usize,
}

/// Normalize to the staged fixpoint.
pub fn normalize(
    e: &Expr,
    table: &BasisTable,
    mode: NormalizeMode,
    budget: usize,
) -> Result<(Expr, NormalizeReport), RewriteError> {
    normalize_stages(e, table, mode, budget, &ALL_STAGES)
}

/// Normalize using only a subset of stages (the per-operation entry points
/// and the boundary probes use this).
pub fn normalize_stages(
    e: &Expr,
    table: &BasisTable,
    mode: NormalizeMode,
    budget: usize,
    stages: &[Stage],
) -> Result<(Expr, NormalizeReport), RewriteError> {
    let mut report = NormalizeReport::default();
    let mut cur = canonical_expr(e);
    loop {
        if report.steps_taken >= budget {
            finalize_flags(&cur, &mut report);
            report.fixpoint = false;
            return Err(RewriteError::StepBudgetExceeded { budget, report: Box::new(report) });
        }
        match apply_first(&cur, table, mode, stages)? {
            None => break,
            Some((idx, outcome)) => {
                let before = expr_hash(&cur);
                let mut terms = cur.terms.clone();
                terms.remove(idx);
                for (k, t) in outcome.replacement.into_iter().enumerate() {
                    terms.insert(idx + k, t);
                }
                cur = canonical_expr(&Expr { terms });
                report.steps_taken += 1;
                report.boundary_terms_emitted += outcome.boundary_emitted;
                report.boundary_terms_annihilated += outcome.boundary_annihilated;
                report.steps.push(StepRecord {
                    rule: outcome.rule.to_string(),
                    stage: outcome.stage,
                    before: format!("{before:016x}"),
                    after: format!("{:016x}", expr_hash(&cur)),
                });
            }
        }
    }
    report.fixpoint = true;
    finalize_flags(&cur, &mut report);
    Ok((cur, report))
}

fn finalize_flags(e: &Expr, report: &mut NormalizeReport) {
    let mut divergent = 0usize;
    let mut unused = 0usize;
    let mut boundary = 0usize;
    for t in &e.terms {
        for s in &t.scalars {
            match s {
                ScalarAtom::Delta { arg } | ScalarAtom::DeltaPrime { arg } if arg.is_zero() => {
                    divergent += 1
                }
                ScalarAtom::Boundary { .. } => boundary += 1,
                _ => {}
            }
        }
        unused += t.unused_binders().len();
    }
    report.divergent_deltas = divergent;
    report.unused_measures = unused;
    report.boundary_terms_remaining = boundary;
}

fn apply_first(
    e: &Expr,
    table: &BasisTable,
    mode: NormalizeMode,
    stages: &[Stage],
) -> Result<Option<(usize, RuleOutcome)>, RewriteError> {
    for stage in stages {
        for (idx, t) in e.terms.iter().enumerate() {
            let outcome = match stage {
                Stage::Contraction => match try_contract(t, table)? {
                    Some(o) => Some(o),
                    None => try_unitary_compose(t, table),
                },
                Stage::Sifting => try_sift(t, table),
                Stage::BasisAlignment => try_align(t, table)?,
                Stage::PhaseIntegration => try_phase_integrate(t, table, mode)?,
                Stage::DeltaPrimeCalculus => match try_moment_shift(t) {
                    Some(o) => Some(o),
                    None => try_delta_prime_sift(t, table)?,
                },
                Stage::Boundary => try_boundary_annihilate(t),
                Stage::Collection => None,
            };
            if let Some(o) = outcome {
                return Ok(Some((idx, o)));
            }
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// contraction

fn try_contract(t: &Term, table: &BasisTable) -> Result<Option<RuleOutcome>, RewriteError> {
    for i in 0..t.word.len().saturating_sub(1) {
        let (ext, tag) = match (&t.word[i], &t.word[i + 1]) {
            (WordAtom::Extractor { basis: eb, var: ev }, WordAtom::Tag { basis: tb, var: tv }) => {
                ((eb.clone(), ev.clone()), (tb.clone(), tv.clone()))
            }
            _ => continue,
        };
        let pairing = table.pairing(&ext.0, &tag.0)?;
        let mut out = t.clone();
        out.word.drain(i..=i + 1);
        match pairing {
            Pairing::Delta { scale } => {
                let arg = crate::affine::Affine::var(ext.1.clone())
                    .sub(&crate::affine::Affine::var(tag.1.clone()));
                out.scalars.push(ScalarAtom::Delta { arg });
                out.coeff = out.coeff.mul(&scale);
            }
            Pairing::Phase { sign } => {
                out.scalars.push(ScalarAtom::phase(sign, ext.1.clone(), tag.1.clone()));
            }
            Pairing::Unitary { name, adjoint } => {
                out.scalars.push(ScalarAtom::Kernel {
                    name,
                    u: crate::affine::Affine::var(ext.1.clone()),
                    v: crate::affine::Affine::var(tag.1.clone()),
                    adjoint,
                });
            }
        }
        return Ok(Some(RuleOutcome {
            rule: "contract",
            stage: Stage::Contraction,
            replacement: vec![out],
            boundary_emitted: 0,
            boundary_annihilated: 0,
        }));
    }
    Ok(None)
}

/// Composition of a unitary kernel with its adjoint over a shared bound
/// variable occurring nowhere else: U(a,m) U^dag(m,c) -> delta(a-c); the
/// mirrored orientation is the same unitarity fact read backwards.
fn try_unitary_compose(t: &Term, table: &BasisTable) -> Option<RuleOutcome> {
    let kernels: Vec<usize> = t
        .scalars
        .iter()
        .enumerate()
        .filter(|(_, s)| matches!(s, ScalarAtom::Kernel { .. }))
        .map(|(i, _)| i)
        .collect();
    for &i in &kernels {
        for &j in &kernels {
            if i == j {
                continue;
            }
            let (
                ScalarAtom::Kernel { name: na, u: ua, v: va, adjoint: aa },
                ScalarAtom::Kernel { name: nb, u: ub, v: vb, adjoint: ab },
            ) = (&t.scalars[i], &t.scalars[j])
            else {
                continue;
            };
            if na != nb || aa == ab {
                continue;
            }
            // shared middle variable: second slot of one kernel equals the
            // first slot of the other, as a plain bound variable
            let (Some(m), Some(m2)) = (va.as_plain_var(), ub.as_plain_var()) else {
                continue;
            };
            if m != m2 || !t.is_bound(m) {
                continue;
            }
            // the middle variable must occur only inside these two kernels
            let occ = t.occurrences(m);
            if occ.word != 0 || occ.kernel.len() != 2 || occ.total_scalar() != 2 {
                continue;
            }
            let basis = t.binders.iter().find(|b| &b.var == m).map(|b| b.basis.clone()).unwrap();
            let arg = ua.sub(vb);
            let m = m.clone();
            let mut out = t.clone();
            let mut drop = [i, j];
            drop.sort_unstable();
            out.scalars.remove(drop[1]);
            out.scalars.remove(drop[0]);
            out.binders.retain(|b| b.var != m);
            out.scalars.push(ScalarAtom::Delta { arg });
            out.coeff = out.coeff.mul(&table.measure(&basis));
            return Some(RuleOutcome {
                rule: "unitary-compose",
                stage: Stage::Contraction,
                replacement: vec![out],
                boundary_emitted: 0,
                boundary_annihilated: 0,
            });
        }
    }
    None
}

// ---------------------------------------------------------------------------
// sifting

fn try_sift(t: &Term, table: &BasisTable) -> Option<RuleOutcome> {
    for (si, s) in t.scalars.iter().enumerate() {
        let ScalarAtom::Delta { arg } = s else { continue };
        if arg.is_zero() || arg.is_constant() {
            continue;
        }
        // eliminate the largest bound variable in the argument
        let mut cands: Vec<&Var> = arg.vars().filter(|v| t.is_bound(v)).collect();
        cands.sort();
        for v in cands.into_iter().rev() {
            let a = arg.coef_of(v).unwrap().clone();
            let rep = arg.solve_for(v).unwrap();
            let basis = t.binders.iter().find(|b| &b.var == v).map(|b| b.basis.clone()).unwrap();
            let mut stripped = t.clone();
            stripped.scalars.remove(si);
            stripped.binders.retain(|b| &b.var != v);
            let substituted = match Expr::from_term(stripped).substitute_captured(v, &rep) {
                Ok(e) => e,
                Err(_) => continue, // e.g. non-plain replacement hitting a word index
            };
            let weight = table.measure(&basis).mul_rat(&a.abs().recip());
            let replacement = substituted
                .terms
                .into_iter()
                .map(|t2| {
                    let c = t2.coeff.mul(&weight);
                    t2.with_coeff(c)
                })
                .collect();
            return Some(RuleOutcome {
                rule: "sift",
                stage: Stage::Sifting,
                replacement,
                boundary_emitted: 0,
                boundary_annihilated: 0,
            });
        }
    }
    None
}

// ---------------------------------------------------------------------------
// basis alignment

fn try_align(t: &Term, table: &BasisTable) -> Result<Option<RuleOutcome>, RewriteError> {
    for (wi, w) in t.word.iter().enumerate() {
        let Some(target) = table.alignment(w.basis()) else { continue };
        // A bound index carrying a second or higher moment stays in its own
        // basis: its aligned form would be a phase integral against a higher
        // moment, which has no kernel in the atom set. The diagonal
        // dual-basis operator is the normal form.
        if t.is_bound(w.var())
            && t.scalars.iter().any(
                |s| matches!(s, ScalarAtom::Mono { var, pow } if var == w.var() && *pow >= 2),
            )
        {
            continue;
        }
        let taken: BTreeSet<Var> = t.all_vars();
        let fresh = crate::expr::fresh_var(&Var(format!("{}0", target.0)), &taken);
        let mut out = t.clone();
        match w {
            WordAtom::Tag { basis, var } => {
                // |b,v> = int |c,u> <c,u|b,v> dmu_c(u)
                let sign = table.require_unbiased(&target, basis)?;
                out.word[wi] = WordAtom::Tag { basis: target.clone(), var: fresh.clone() };
                out.scalars.push(ScalarAtom::phase(sign, fresh.clone(), var.clone()));
            }
            WordAtom::Extractor { basis, var } => {
                // <b,v| = int <b,v|c,u> <c,u| dmu_c(u)
                let sign = table.require_unbiased(basis, &target)?;
                out.word[wi] = WordAtom::Extractor { basis: target.clone(), var: fresh.clone() };
                out.scalars.push(ScalarAtom::phase(sign, var.clone(), fresh.clone()));
            }
        }
        out.binders.push(Binder { var: fresh, basis: target });
        return Ok(Some(RuleOutcome {
            rule: "align-basis",
            stage: Stage::BasisAlignment,
            replacement: vec![out],
            boundary_emitted: 0,
            boundary_annihilated: 0,
        }));
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// phase integration

fn try_phase_integrate(
    t: &Term,
    table: &BasisTable,
    mode: NormalizeMode,
) -> Result<Option<RuleOutcome>, RewriteError> {
    'binders: for b in &t.binders {
        let p = &b.var;
        let occ = t.occurrences(p);
        if occ.word != 0
            || !occ.delta.is_empty()
            || !occ.delta_prime.is_empty()
            || !occ.coeff_fn.is_empty()
            || !occ.kernel.is_empty()
            || !occ.boundary.is_empty()
            || occ.phase.is_empty()
        {
            continue;
        }
        // Collect the total exponent i*p*L from the phase atoms.
        let mut exponent = crate::affine::Affine::zero();
        for &pi in &occ.phase {
            match &t.scalars[pi] {
                ScalarAtom::Phase { coef, u, v } => {
                    if u == v {
                        continue 'binders; // quadratic phase: out of scope
                    }
                    let partner = if u == p { v } else { u };
                    exponent.add_term(partner.clone(), coef.clone());
                }
                ScalarAtom::LinPhase { coef, .. } => {
                    exponent.constant += coef;
                }
                _ => unreachable!(),
            }
        }
        // At most one first moment of the integration variable may ride along.
        let mono_pow = match occ.mono.as_slice() {
            [] => 0i64,
            [mi] => match &t.scalars[*mi] {
                ScalarAtom::Mono { pow, .. } => *pow,
                _ => unreachable!(),
            },
            _ => continue,
        };
        if mono_pow < 0 {
            continue;
        }
        if mono_pow > 1 {
            return Err(RewriteError::UnsupportedPhaseMoment { var: p.0.clone(), pow: mono_pow });
        }

        let weight = Coeff::two_pi().mul(&table.measure(&b.basis));
        let p = p.clone();
        let measure = table.measure(&b.basis);
        let mut base = t.clone();
        let mut removed: Vec<usize> = occ.phase.clone();
        removed.extend(occ.mono.iter().copied());
        removed.sort_unstable();
        for idx in removed.iter().rev() {
            base.scalars.remove(*idx);
        }
        base.binders.retain(|bb| bb.var != p);

        if mono_pow == 0 {
            let mut out = base;
            out.scalars.push(ScalarAtom::Delta { arg: exponent });
            out.coeff = out.coeff.mul(&weight);
            return Ok(Some(RuleOutcome {
                rule: "phase-integrate",
                stage: Stage::PhaseIntegration,
                replacement: vec![out],
                boundary_emitted: 0,
                boundary_annihilated: 0,
            }));
        }

        // int p exp(i p L) dmu(p) = -i (2 pi w) delta'(L) on the operator
        // domain; the paper-faithful mode additionally emits the limit
        // bracket produced by integration by parts before concluding that.
        let mut main = base.clone();
        main.scalars.push(ScalarAtom::DeltaPrime { arg: exponent });
        main.coeff = main.coeff.mul(&weight).mul(&Coeff::i().neg());
        match mode {
            NormalizeMode::Distributional => {
                return Ok(Some(RuleOutcome {
                    rule: "phase-moment",
                    stage: Stage::PhaseIntegration,
                    replacement: vec![main],
                    boundary_emitted: 0,
                    boundary_annihilated: 0,
                }))
            }
            NormalizeMode::PaperFaithful => {
                let mut payload_scalars: Vec<ScalarAtom> = Vec::new();
                for &pi in occ.phase.iter().chain(occ.mono.iter()) {
                    payload_scalars.push(t.scalars[pi].clone());
                }
                let payload = Expr::from_term(Term {
                    word: vec![],
                    scalars: payload_scalars,
                    binders: vec![],
                    coeff: Coeff::one(),
                });
                let mut boundary = base;
                boundary.scalars.push(ScalarAtom::Boundary {
                    limit_var: p.clone(),
                    payload: Box::new(payload),
                });
                boundary.coeff = boundary.coeff.mul(&measure);
                return Ok(Some(RuleOutcome {
                    rule: "phase-moment-ibp",
                    stage: Stage::PhaseIntegration,
                    replacement: vec![main, boundary],
                    boundary_emitted: 1,
                    boundary_annihilated: 0,
                }));
            }
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// delta-prime calculus

/// Moment shift: a monomial riding on a delta or delta-prime argument is
/// rewritten onto the support of the delta. The orientation is fixed so the
/// canonical kernel keeps the leading variable next to a plain delta and the
/// trailing variable next to a delta-prime:
///
/// - delta: w^n delta(A) -> solve(A,w) w^(n-1) delta(A), for w not leading;
/// - delta-prime: w delta'(A) = solve(A,w) delta'(A) - (1/a) delta(A), for w
///   the leading variable (from A delta'(A) = -delta(A)).
fn try_moment_shift(t: &Term) -> Option<RuleOutcome> {
    for (di, d) in t.scalars.iter().enumerate() {
        let (arg, is_prime) = match d {
            ScalarAtom::Delta { arg } => (arg, false),
            ScalarAtom::DeltaPrime { arg } => (arg, true),
            _ => continue,
        };
        // Two-variable arguments only: wider arguments would let the shift
        // move weight back and forth between non-leading variables.
        if arg.is_zero() || arg.is_constant() || arg.terms.len() > 2 {
            continue;
        }
        let min = arg.leading_var()?.clone();
        for (mi, m) in t.scalars.iter().enumerate() {
            let ScalarAtom::Mono { var: w, pow } = m else { continue };
            if *pow < 1 || !arg.contains(w) {
                continue;
            }
            if is_prime != (*w == min) {
                continue;
            }
            let a = arg.coef_of(w).unwrap().clone();
            let sol = arg.solve_for(w).unwrap();

            // common part: the term with one power of w removed
            let mut stripped = t.clone();
            if *pow == 1 {
                stripped.scalars.remove(mi);
            } else if let ScalarAtom::Mono { pow: p0, .. } = &mut stripped.scalars[mi] {
                *p0 -= 1;
            }
            // delta index may have shifted after removal
            let di2 = if *pow == 1 && mi < di { di - 1 } else { di };

            let mut replacement: Vec<Term> = Vec::new();
            for (v2, c2) in &sol.terms {
                let mut t2 = stripped.clone();
                t2.scalars.push(ScalarAtom::Mono { var: v2.clone(), pow: 1 });
                t2.coeff = t2.coeff.mul_rat(c2);
                replacement.push(t2);
            }
            if !sol.constant.is_zero() {
                let mut t2 = stripped.clone();
                t2.coeff = t2.coeff.mul_rat(&sol.constant);
                replacement.push(t2);
            }
            if is_prime {
                // - (1/a) delta(A) branch
                let mut t2 = stripped.clone();
                t2.scalars[di2] = ScalarAtom::Delta { arg: arg.clone() };
                t2.coeff = t2.coeff.mul_rat(&(-a.recip()));
                replacement.push(t2);
            }
            return Some(RuleOutcome {
                rule: if is_prime { "moment-shift-prime" } else { "moment-shift" },
                stage: Stage::DeltaPrimeCalculus,
                replacement,
                boundary_emitted: 0,
                boundary_annihilated: 0,
            });
        }
    }
    None
}

/// Sift a delta-prime against a bound variable whose other occurrences are
/// all differentiable scalars: the product rule fires and the result is
/// evaluated on the delta support.
fn try_delta_prime_sift(
    t: &Term,
    table: &BasisTable,
) -> Result<Option<RuleOutcome>, RewriteError> {
    for (si, s) in t.scalars.iter().enumerate() {
        let ScalarAtom::DeltaPrime { arg } = s else { continue };
        if arg.is_zero() || arg.is_constant() {
            continue;
        }
        let mut cands: Vec<&Var> = arg.vars().filter(|v| t.is_bound(v)).collect();
        cands.sort();
        'vars: for v in cands.into_iter().rev() {
            if t.word.iter().any(|w| w.var() == v) {
                continue 'vars;
            }
            // Examine every other occurrence of v.
            let mut partner_indices: Vec<usize> = Vec::new();
            for (oi, o) in t.scalars.iter().enumerate() {
                if oi == si {
                    continue;
                }
                let mut vars = BTreeSet::new();
                o.vars(&mut vars);
                if !vars.contains(v) {
                    continue;
                }
                match o {
                    ScalarAtom::Mono { .. }
                    | ScalarAtom::CoeffFn { .. }
                    | ScalarAtom::Phase { .. }
                    | ScalarAtom::LinPhase { .. } => partner_indices.push(oi),
                    ScalarAtom::Kernel { .. } | ScalarAtom::Kernel2 { .. } => {
                        return Err(RewriteError::DeltaPrimeNonDifferentiable {
                            var: v.0.clone(),
                        })
                    }
                    // another singular atom in the same variable: a legal
                    // stuck normal form, leave the term alone
                    _ => continue 'vars,
                }
            }
            // quadratic phases in v do not differentiate into our atom set
            for &pi in &partner_indices {
                if let ScalarAtom::Phase { u, v: pv, .. } = &t.scalars[pi] {
                    if u == pv {
                        continue 'vars;
                    }
                }
            }

            let a = arg.coef_of(v).unwrap().clone();
            let sol = arg.solve_for(v).unwrap();
            let basis = t.binders.iter().find(|b| &b.var == v).map(|b| b.basis.clone()).unwrap();

            // Base term: delta-prime and binder removed, unit coefficient.
            let mut base = t.clone();
            base.scalars.remove(si);
            base.binders.retain(|b| &b.var != v);
            base.coeff = Coeff::one();

            // Product rule: derivative of each partner atom in turn.
            let mut derived: Vec<Term> = Vec::new();
            for &pi in &partner_indices {
                let mut piece = base.clone();
                let pj = if pi > si { pi - 1 } else { pi };
                let (datoms, dcoeff) = differentiate_atom(&piece.scalars[pj], v);
                if dcoeff.is_zero() {
                    continue;
                }
                piece.scalars.remove(pj);
                piece.scalars.extend(datoms);
                piece.coeff = dcoeff;
                derived.push(piece);
            }
            if derived.is_empty() {
                // int delta'(s) ds = 0
                return Ok(Some(RuleOutcome {
                    rule: "delta-prime-sift",
                    stage: Stage::DeltaPrimeCalculus,
                    replacement: vec![],
                    boundary_emitted: 0,
                    boundary_annihilated: 0,
                }));
            }

            // Evaluate at the delta support, weight by the measure and the
            // -1/(a|a|) orientation factor, restore the host coefficient.
            let factor =
                table.measure(&basis).mul_rat(&(-(&a * a.abs()).recip())).mul(&t.coeff);
            let mut replacement = Vec::new();
            for piece in derived {
                let substituted = match Expr::from_term(piece).substitute_captured(v, &sol) {
                    Ok(e) => e,
                    Err(_) => continue 'vars,
                };
                for t2 in substituted.terms {
                    let c = t2.coeff.mul(&factor);
                    replacement.push(t2.with_coeff(c));
                }
            }
            return Ok(Some(RuleOutcome {
                rule: "delta-prime-sift",
                stage: Stage::DeltaPrimeCalculus,
                replacement,
                boundary_emitted: 0,
                boundary_annihilated: 0,
            }));
        }
    }
    Ok(None)
}

/// d/dv of a differentiable scalar atom: replacement atoms and the
/// multiplicative coefficient.
fn differentiate_atom(s: &ScalarAtom, v: &Var) -> (Vec<ScalarAtom>, Coeff) {
    match s {
        ScalarAtom::Mono { var, pow } if var == v => {
            let c = Coeff::from_int(*pow);
            if *pow == 1 {
                (vec![], c)
            } else {
                (vec![ScalarAtom::Mono { var: var.clone(), pow: pow - 1 }], c)
            }
        }
        ScalarAtom::CoeffFn { name, arg, conj, deriv, schwartz } => {
            let slope = arg.coef_of(v).cloned().unwrap_or_default();
            (
                vec![ScalarAtom::CoeffFn {
                    name: name.clone(),
                    arg: arg.clone(),
                    conj: *conj,
                    deriv: deriv + 1,
                    schwartz: *schwartz,
                }],
                Coeff::one().mul_rat(&slope),
            )
        }
        ScalarAtom::Phase { coef, u, v: pv } => {
            let partner = if u == v { pv } else { u };
            (
                vec![s.clone(), ScalarAtom::Mono { var: partner.clone(), pow: 1 }],
                Coeff::i().mul_rat(coef),
            )
        }
        ScalarAtom::LinPhase { coef, .. } => (vec![s.clone()], Coeff::i().mul_rat(coef)),
        _ => (vec![s.clone()], Coeff::zero()),
    }
}

// ---------------------------------------------------------------------------
// boundary annihilation

/// A term whose boundary bracket pairs its limit variable (through a payload
/// phase) with a bound variable feeding a Schwartz-flagged coefficient
/// function vanishes: the bracket is the limit of `t` times the Fourier
/// transform of a Schwartz function, which decays.
fn try_boundary_annihilate(t: &Term) -> Option<RuleOutcome> {
    for s in &t.scalars {
        let ScalarAtom::Boundary { limit_var, payload } = s else { continue };
        let mut linked: BTreeSet<Var> = BTreeSet::new();
        for pt in &payload.terms {
            for ps in &pt.scalars {
                if let ScalarAtom::Phase { u, v, .. } = ps {
                    if u == limit_var && v != limit_var {
                        linked.insert(v.clone());
                    } else if v == limit_var && u != limit_var {
                        linked.insert(u.clone());
                    }
                }
            }
        }
        for v in linked {
            if !t.is_bound(&v) {
                continue;
            }
            let schwartz_partner = t.scalars.iter().any(|o| {
                matches!(o, ScalarAtom::CoeffFn { arg, schwartz: true, .. } if arg.contains(&v))
            });
            if schwartz_partner {
                return Some(RuleOutcome {
                    rule: "boundary-annihilate",
                    stage: Stage::Boundary,
                    replacement: vec![],
                    boundary_emitted: 0,
                    boundary_annihilated: 1,
                });
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// single-operation entry points and the trace

pub fn contract(e: &Expr, table: &BasisTable) -> Result<Expr, RewriteError> {
    Ok(normalize_stages(
        e,
        table,
        NormalizeMode::Distributional,
        DEFAULT_STEP_BUDGET,
        &[Stage::Contraction],
    )?
    .0)
}

pub fn sift(e: &Expr, table: &BasisTable) -> Result<Expr, RewriteError> {
    Ok(normalize_stages(
        e,
        table,
        NormalizeMode::Distributional,
        DEFAULT_STEP_BUDGET,
        &[Stage::Sifting],
    )?
    .0)
}

pub fn phase_integrate(e: &Expr, table: &BasisTable) -> Result<Expr, RewriteError> {
    Ok(normalize_stages(
        e,
        table,
        NormalizeMode::Distributional,
        DEFAULT_STEP_BUDGET,
        &[Stage::PhaseIntegration],
    )?
    .0)
}

pub fn delta_prime_calculus(e: &Expr, table: &BasisTable) -> Result<Expr, RewriteError> {
    Ok(normalize_stages(
        e,
        table,
        NormalizeMode::Distributional,
        DEFAULT_STEP_BUDGET,
        &[Stage::DeltaPrimeCalculus],
    )?
    .0)
}

pub fn boundary_annihilate(
    e: &Expr,
    table: &BasisTable,
) -> Result<(Expr, NormalizeReport), RewriteError> {
    normalize_stages(
        e,
        table,
        NormalizeMode::Distributional,
        DEFAULT_STEP_BUDGET,
        &[Stage::Boundary],
    )
}

/// Operator trace: the leftmost tag flips to the right end of the word, so
/// every tag contracts with an extractor; the result is the kernel trace.
/// Divergent traces come back flagged in the report, not as errors.
pub fn trace(
    op: &Expr,
    table: &BasisTable,
    mode: NormalizeMode,
    budget: usize,
) -> Result<(Expr, NormalizeReport), RewriteError> {
    let (normalized, mut report) = normalize(op, table, mode, budget)?;
    if !normalized.is_operator_shaped() {
        return Err(RewriteError::Shape("operator"));
    }
    let flipped = Expr {
        terms: normalized
            .terms
            .iter()
            .map(|t| {
                let mut t2 = t.clone();
                let head = t2.word.remove(0);
                t2.word.push(head);
                t2
            })
            .collect(),
    };
    let (out, r2) = normalize(&flipped, table, mode, budget.saturating_sub(report.steps_taken))?;
    report.steps.extend(r2.steps);
    report.steps_taken += r2.steps_taken;
    report.fixpoint = r2.fixpoint;
    report.boundary_terms_emitted += r2.boundary_terms_emitted;
    report.boundary_terms_annihilated += r2.boundary_terms_annihilated;
    report.boundary_terms_remaining = r2.boundary_terms_remaining;
    report.divergent_deltas = r2.divergent_deltas;
    report.unused_measures = r2.unused_measures;
    Ok((out, report))
}
