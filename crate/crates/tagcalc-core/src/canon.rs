//! Canonical forms and structural equality.
//!
//! A term is canonical when its delta arguments have unit leading
//! coefficients (scales folded into the coefficient), mergeable scalar atoms
//! are merged, binders carry canonical names `v0, v1, ...` assigned by first
//! occurrence in the word (binders not anchored by the word are ordered by
//! trying the small set of permutations and keeping the least result), and
//! scalars are sorted. Structural equality compares canonical forms.

use crate::expr::{Expr, ScalarAtom, Term, Var};
use num_traits::{Signed, Zero};
use std::collections::BTreeSet;

/// Canonicalize a whole expression: canonical terms, like terms merged,
/// zero terms dropped, terms sorted.
pub fn canonical_expr(e: &Expr) -> Expr {
    let mut terms: Vec<Term> = e.terms.iter().filter_map(canonical_term).collect();
    // Merge terms that agree on everything but the coefficient. Coefficients
    // merge only when their pi/sqrt2 powers match; otherwise both stay.
    let mut buckets: Vec<Term> = Vec::new();
    'outer: for t in terms.drain(..) {
        for b in buckets.iter_mut() {
            if b.word == t.word && b.scalars == t.scalars && b.binders == t.binders {
                if let Some(sum) = b.coeff.add(&t.coeff) {
                    b.coeff = sum;
                    continue 'outer;
                }
            }
        }
        buckets.push(t);
    }
    buckets.retain(|t| !t.coeff.is_zero());
    buckets.sort();
    Expr { terms: buckets }
}

/// True iff the two expressions have identical canonical forms.
pub fn structural_eq(a: &Expr, b: &Expr) -> bool {
    canonical_expr(a) == canonical_expr(b)
}

/// Alpha-normalize only: rename binders to the canonical sequence without
/// touching anything else structurally.
pub fn alpha_normalize(e: &Expr) -> Expr {
    canonical_expr(e)
}

/// Canonicalize a single term; `None` means the term is zero.
pub fn canonical_term(t: &Term) -> Option<Term> {
    let t = polish(t)?;
    let bound: Vec<Var> = t.binders.iter().map(|b| b.var.clone()).collect();
    if bound.is_empty() {
        let mut t = t;
        t.scalars.sort();
        t.binders.sort();
        return Some(t);
    }

    // Anchored binders take their order from the word.
    let mut anchored: Vec<Var> = Vec::new();
    for w in &t.word {
        let v = w.var();
        if bound.contains(v) && !anchored.contains(v) {
            anchored.push(v.clone());
        }
    }
    let mut rest: Vec<Var> = bound.iter().filter(|v| !anchored.contains(v)).cloned().collect();
    rest.sort();

    let free = t.free_vars();
    let candidates: Vec<Vec<Var>> = if rest.len() <= 5 {
        permutations(&rest)
            .into_iter()
            .map(|perm| {
                let mut order = anchored.clone();
                order.extend(perm);
                order
            })
            .collect()
    } else {
        let mut order = anchored.clone();
        order.extend(rest.clone());
        vec![order]
    };

    candidates
        .into_iter()
        .filter_map(|order| rename_to_canonical(&t, &order, &free))
        .min()
}

fn rename_to_canonical(t: &Term, order: &[Var], free: &BTreeSet<Var>) -> Option<Term> {
    let mut cur = t.clone();
    // Two-phase rename so permuted names never collide mid-flight.
    let temps: Vec<Var> = (0..order.len()).map(|i| Var(format!("~c{i}"))).collect();
    for (v, tmp) in order.iter().zip(&temps) {
        cur = cur.rename_var(v, tmp);
    }
    // Canonical names are the binder's basis stem plus a per-stem counter
    // (q0, q1, p0, ...), so printed text can recover the basis from a label.
    let mut counters: std::collections::BTreeMap<String, usize> = Default::default();
    for (orig, tmp) in order.iter().zip(&temps) {
        let stem = t
            .binders
            .iter()
            .find(|b| &b.var == orig)
            .map(|b| b.basis.0.clone())
            .unwrap_or_else(|| "v".to_string());
        let name = loop {
            let idx = counters.entry(stem.clone()).or_insert(0);
            let cand = Var(format!("{stem}{idx}"));
            *idx += 1;
            if !free.contains(&cand) {
                break cand;
            }
        };
        cur = cur.rename_var(tmp, &name);
    }
    // Renaming can flip which variable leads a delta argument; re-polish to
    // restore unit leading coefficients before comparing candidates.
    let mut cur = polish(&cur)?;
    cur.scalars.sort();
    cur.binders.sort();
    Some(cur)
}

fn permutations(vars: &[Var]) -> Vec<Vec<Var>> {
    if vars.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for (i, v) in vars.iter().enumerate() {
        let mut rest = vars.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, v.clone());
            out.push(tail);
        }
    }
    out
}

/// Atom-level normalization and merging. Returns `None` when the term is
/// identically zero (delta of a nonzero constant, zero coefficient).
pub fn polish(t: &Term) -> Option<Term> {
    let mut coeff = t.coeff.clone();
    if coeff.is_zero() {
        return None;
    }
    let mut atoms: Vec<ScalarAtom> = Vec::with_capacity(t.scalars.len());
    for s in &t.scalars {
        match s {
            ScalarAtom::Delta { arg } => {
                if arg.is_zero() {
                    // Divergent delta(0); kept and flagged by the caller.
                    atoms.push(s.clone());
                } else if arg.is_constant() {
                    return None; // delta at a nonzero point
                } else {
                    let lead = arg.coef_of(arg.leading_var().unwrap()).unwrap().clone();
                    let norm = arg.scale(&lead.recip());
                    coeff = coeff.mul_rat(&lead.abs().recip());
                    atoms.push(ScalarAtom::Delta { arg: norm });
                }
            }
            ScalarAtom::DeltaPrime { arg } => {
                if arg.is_zero() {
                    atoms.push(s.clone());
                } else if arg.is_constant() {
                    return None;
                } else {
                    let lead = arg.coef_of(arg.leading_var().unwrap()).unwrap().clone();
                    let norm = arg.scale(&lead.recip());
                    // delta'(a s) = delta'(s) / (a|a|)
                    coeff = coeff.mul_rat(&(&lead * lead.abs()).recip());
                    atoms.push(ScalarAtom::DeltaPrime { arg: norm });
                }
            }
            ScalarAtom::Phase { coef, u, v } => {
                if !coef.is_zero() {
                    let (u, v) = if u <= v { (u.clone(), v.clone()) } else { (v.clone(), u.clone()) };
                    atoms.push(ScalarAtom::Phase { coef: coef.clone(), u, v });
                }
            }
            ScalarAtom::LinPhase { coef, .. } => {
                if !coef.is_zero() {
                    atoms.push(s.clone());
                }
            }
            ScalarAtom::PhaseConst { coef } => {
                if !coef.is_zero() {
                    atoms.push(s.clone());
                }
            }
            ScalarAtom::Mono { pow, .. } => {
                if *pow != 0 {
                    atoms.push(s.clone());
                }
            }
            ScalarAtom::Kernel2 { name, u, v, conj, hermitian } => {
                // A kernel declared self-adjoint rewrites conj(k)(u,v) -> k(v,u).
                if *conj && *hermitian {
                    atoms.push(ScalarAtom::Kernel2 {
                        name: name.clone(),
                        u: v.clone(),
                        v: u.clone(),
                        conj: false,
                        hermitian: true,
                    });
                } else {
                    atoms.push(s.clone());
                }
            }
            ScalarAtom::Boundary { limit_var, payload } => {
                let canon = canonical_expr(payload);
                if canon.is_zero() {
                    return None;
                }
                atoms.push(ScalarAtom::Boundary {
                    limit_var: limit_var.clone(),
                    payload: Box::new(canon),
                });
            }
            _ => atoms.push(s.clone()),
        }
    }

    // Merge monomials, bilinear phases, linear phases and constant phases.
    let mut merged: Vec<ScalarAtom> = Vec::with_capacity(atoms.len());
    for s in atoms {
        match s {
            ScalarAtom::Mono { var, pow } => {
                if let Some(ScalarAtom::Mono { pow: p0, .. }) = merged
                    .iter_mut()
                    .find(|m| matches!(m, ScalarAtom::Mono { var: v0, .. } if *v0 == var))
                {
                    *p0 += pow;
                } else {
                    merged.push(ScalarAtom::Mono { var, pow });
                }
            }
            ScalarAtom::Phase { coef, u, v } => {
                if let Some(ScalarAtom::Phase { coef: c0, .. }) = merged.iter_mut().find(|m| {
                    matches!(m, ScalarAtom::Phase { u: u0, v: v0, .. } if *u0 == u && *v0 == v)
                }) {
                    *c0 += coef;
                } else {
                    merged.push(ScalarAtom::Phase { coef, u, v });
                }
            }
            ScalarAtom::LinPhase { coef, var } => {
                if let Some(ScalarAtom::LinPhase { coef: c0, .. }) = merged
                    .iter_mut()
                    .find(|m| matches!(m, ScalarAtom::LinPhase { var: v0, .. } if *v0 == var))
                {
                    *c0 += coef;
                } else {
                    merged.push(ScalarAtom::LinPhase { coef, var });
                }
            }
            ScalarAtom::PhaseConst { coef } => {
                if let Some(ScalarAtom::PhaseConst { coef: c0 }) =
                    merged.iter_mut().find(|m| matches!(m, ScalarAtom::PhaseConst { .. }))
                {
                    *c0 += coef;
                } else {
                    merged.push(ScalarAtom::PhaseConst { coef });
                }
            }
            other => merged.push(other),
        }
    }
    merged.retain(|s| match s {
        ScalarAtom::Mono { pow, .. } => *pow != 0,
        ScalarAtom::Phase { coef, .. }
        | ScalarAtom::LinPhase { coef, .. }
        | ScalarAtom::PhaseConst { coef } => !coef.is_zero(),
        _ => true,
    });

    if coeff.is_zero() {
        return None;
    }
    Some(Term { word: t.word.clone(), scalars: merged, binders: t.binders.clone(), coeff })
}

/// Stable 64-bit FNV-1a hash of a canonical rendering, for step logs.
pub fn expr_hash(e: &Expr) -> u64 {
    let canon = canonical_expr(e);
    let repr = format!("{canon:?}");
    let mut h: u64 = 0xcbf29ce484222325;
    for b in repr.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

