//! Structural operations: alpha-renaming, adjoint, substitution, equality,
//! zero handling, plus property tests for the involution and renaming
//! invariance on generated well-formed expressions.

use proptest::prelude::*;
use tagcalc_core::affine::Affine;
use tagcalc_core::coeff::{rat, ratio};
use tagcalc_core::dsl::{parse, print_expr};
use tagcalc_core::expr::ExprError;
use tagcalc_core::rewrite::{normalize, NormalizeMode, DEFAULT_STEP_BUDGET};
use tagcalc_core::{
    alpha_normalize, canonical_expr, structural_eq, Basis, BasisTable, Binder, Coeff, Expr,
    ScalarAtom, Term, Var,
};

fn table() -> BasisTable {
    BasisTable::standard()
}

// -- alpha normalization ------------------------------------------------------

#[test]
fn binder_names_are_canonical() {
    let t = table();
    let a = parse("int |mu> f(mu) dmu", &t).unwrap();
    let b = parse("int |mu'> f(mu') dmu'", &t).unwrap();
    assert!(structural_eq(&a, &b));
    // the canonical name is the basis stem plus a counter
    let canon = alpha_normalize(&a);
    assert_eq!(canon.terms[0].binders[0].var.0, "mu0");
}

#[test]
fn shadowed_binders_get_distinct_names() {
    // nested products introduce colliding binder names; the product renames
    let t = table();
    let inner = parse("int psi(nu) delta(nu - w) dnu", &t).unwrap();
    let outer = parse("int phi(nu) delta(nu - w') dnu", &t).unwrap();
    let prod = canonical_expr(&inner.mul(&outer));
    let binders = &prod.terms[0].binders;
    assert_eq!(binders.len(), 2);
    assert_ne!(binders[0].var, binders[1].var);
}

#[test]
fn expressions_without_binders_are_untouched() {
    let t = table();
    let e = parse("q^2 delta(q - q')", &t).unwrap();
    assert_eq!(alpha_normalize(&e), canonical_expr(&e));
    assert!(structural_eq(&e, &alpha_normalize(&e)));
}

// -- adjoint -------------------------------------------------------------------

#[test]
fn adjoint_of_ket_is_bra_with_conjugated_coefficients() {
    let t = table();
    let ket = parse("int |nu> psi(nu) dnu", &t).unwrap();
    let bra = parse("int conj(psi)(nu) <nu| dnu", &t).unwrap();
    assert!(structural_eq(&ket.adjoint(), &bra));
}

#[test]
fn adjoint_of_operator_transposes_kernel() {
    let mut t = table();
    t.register_kernel2("k2", false);
    let op = parse("int |nu> k2(nu, nu') <nu'| dnu dnu'", &t).unwrap();
    let adj = op.adjoint();
    // A^dag = int |nu'> conj(k2)(nu, nu') <nu| with slots read transposed
    let expected = parse("int |nu'> conj(k2)(nu, nu') <nu| dnu dnu'", &t).unwrap();
    assert!(structural_eq(&adj, &expected), "got {}", print_expr(&adj));
    assert!(adj.is_operator_shaped());
}

#[test]
fn adjoint_swaps_shapes() {
    let t = table();
    let ket = parse("ket(psi)", &t).unwrap();
    assert!(ket.is_ket_shaped());
    assert!(ket.adjoint().is_bra_shaped());
    let op = parse("int |q> q <q| dq", &t).unwrap();
    assert!(op.adjoint().is_operator_shaped());
}

// -- substitution ----------------------------------------------------------------

#[test]
fn identity_substitution_is_identity() {
    let t = table();
    let e = parse("int exp(i*q*p) psi(q) q^2 dq", &t).unwrap();
    let out = e.substitute(&Var::new("p"), &Affine::var(Var::new("p"))).unwrap();
    assert!(structural_eq(&e, &out));
}

#[test]
fn midpoint_substitution_collapses_delta() {
    let t = table();
    let e = parse("delta(q1 - q2)", &t).unwrap();
    let q = Var::new("q");
    let x = Var::new("x");
    let out = e
        .substitute(&Var::new("q1"), &Affine::var(q.clone()).with_coef(x.clone(), ratio(1, 2)))
        .unwrap()
        .substitute(&Var::new("q2"), &Affine::var(q).with_coef(x, ratio(-1, 2)))
        .unwrap();
    let expected = parse("delta(x)", &t).unwrap();
    assert!(structural_eq(&out, &expected));
}

#[test]
fn monomials_expand_binomially() {
    let t = table();
    let e = parse("u^2", &t).unwrap();
    let rep = Affine::var(Var::new("a")).with_coef(Var::new("b"), rat(1));
    let out = canonical_expr(&e.substitute(&Var::new("u"), &rep).unwrap());
    let expected = parse("a^2 + 2 a b + b^2", &t).unwrap();
    assert!(structural_eq(&out, &expected), "got {}", print_expr(&out));
}

#[test]
fn bound_variable_scaling_applies_jacobian() {
    // int psi(u) delta(u - v) du under u -> 2u equals the original
    let t = table();
    let e = parse("int psi(u) delta(u - v) du", &t).unwrap();
    let scaled = e.substitute(&Var::new("u"), &Affine::var(Var::new("u")).scale(&rat(2))).unwrap();
    // both normalize to psi(v)
    let (n1, _) = normalize(&e, &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET).unwrap();
    let (n2, _) =
        normalize(&scaled, &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET).unwrap();
    assert!(structural_eq(&n1, &n2), "lhs {} rhs {}", print_expr(&n1), print_expr(&n2));
    // and the Jacobian factor is visible before normalization
    assert_eq!(scaled.terms[0].coeff, Coeff::from_int(2));
}

#[test]
fn bound_replacement_must_be_single_variable() {
    let t = table();
    let e = parse("int psi(u) du", &t).unwrap();
    let bad = Affine::var(Var::new("a")).with_coef(Var::new("b"), rat(1));
    let err = e.substitute(&Var::new("u"), &bad).unwrap_err();
    assert!(matches!(err, ExprError::BoundReplacementShape(_)));
}

#[test]
fn nonlinear_replacement_is_unrepresentable() {
    // The replacement type is affine by construction; attempting to build a
    // nonlinear one from an expression fails.
    let t = table();
    let sq = parse("u^2", &t).unwrap();
    assert!(affine_of_expr(&sq).is_none());
    let ok = parse("2 u + 3", &t).unwrap();
    assert!(affine_of_expr(&ok).is_some());
}

/// Local helper mirroring how a caller would lower an expression into an
/// affine replacement, rejecting anything nonlinear.
fn affine_of_expr(e: &Expr) -> Option<Affine> {
    let mut out = Affine::zero();
    for t in &canonical_expr(e).terms {
        if !t.word.is_empty() || !t.binders.is_empty() {
            return None;
        }
        if !t.coeff.is_real() || t.coeff.pi_pow != 0 || t.coeff.rt2_pow != 0 {
            return None;
        }
        match t.scalars.as_slice() {
            [] => out.constant += t.coeff.re.clone(),
            [ScalarAtom::Mono { var, pow: 1 }] => out.add_term(var.clone(), t.coeff.re.clone()),
            _ => return None,
        }
    }
    Some(out)
}

// -- structural equality -----------------------------------------------------------

#[test]
fn structural_eq_basics() {
    let t = table();
    let a = parse("i*I", &t).unwrap();
    let b = parse("i*I", &t).unwrap();
    assert!(structural_eq(&a, &b));
    let c = parse("-i*I", &t).unwrap();
    assert!(!structural_eq(&a, &c));
}

#[test]
fn zero_is_neutral_and_absorbing() {
    let t = table();
    let e = parse("int |q> q <q| dq", &t).unwrap();
    let zero = Expr::zero();
    assert!(structural_eq(&e.add(&zero), &e));
    assert!(e.mul(&zero).is_zero());
    assert!(zero.mul(&e).is_zero());
    assert!(structural_eq(&e.sub(&e), &zero));
}

// -- generated expressions ------------------------------------------------------------

fn arb_var() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["q", "q'", "nu", "nu'", "w"]).prop_map(str::to_string)
}

fn arb_scalar() -> impl Strategy<Value = ScalarAtom> {
    prop_oneof![
        (arb_var(), arb_var()).prop_map(|(u, v)| {
            ScalarAtom::Delta { arg: Affine::var(Var(u)).sub(&Affine::var(Var(v))) }
        }),
        (arb_var(), arb_var()).prop_map(|(u, v)| {
            ScalarAtom::DeltaPrime { arg: Affine::var(Var(u)).sub(&Affine::var(Var(v))) }
        }),
        (arb_var(), arb_var(), -2i64..3).prop_map(|(u, v, k)| {
            ScalarAtom::Phase { coef: rat(if k == 0 { 1 } else { k }), u: Var(u), v: Var(v) }
        }),
        (arb_var(), 1i64..4).prop_map(|(v, p)| ScalarAtom::Mono { var: Var(v), pow: p }),
        (arb_var(), any::<bool>(), 0u32..2).prop_map(|(v, conj, deriv)| ScalarAtom::CoeffFn {
            name: "f".into(),
            arg: Affine::var(Var(v)),
            conj,
            deriv,
            schwartz: true,
        }),
    ]
}

fn arb_term() -> impl Strategy<Value = Term> {
    (
        prop::collection::vec(arb_scalar(), 0..4),
        prop::sample::select(vec![0u8, 1, 2]),
        -3i64..4,
        prop::collection::vec(arb_var(), 0..2),
    )
        .prop_map(|(scalars, shape, num, binder_names)| {
            let word = match shape {
                0 => vec![],
                1 => vec![tagcalc_core::WordAtom::Tag {
                    basis: Basis::new("nu"),
                    var: Var::new("nu"),
                }],
                _ => vec![
                    tagcalc_core::WordAtom::Tag { basis: Basis::new("nu"), var: Var::new("nu") },
                    tagcalc_core::WordAtom::Extractor {
                        basis: Basis::new("nu"),
                        var: Var::new("nu'"),
                    },
                ],
            };
            let mut binders: Vec<Binder> = binder_names
                .into_iter()
                .map(|n| Binder { var: Var(n), basis: Basis::new("nu") })
                .collect();
            binders.dedup_by(|a, b| a.var == b.var);
            Term {
                word,
                scalars,
                binders,
                coeff: Coeff::from_int(if num == 0 { 1 } else { num }),
            }
        })
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    prop::collection::vec(arb_term(), 0..4).prop_map(|terms| Expr { terms })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn adjoint_is_an_involution(e in arb_expr()) {
        prop_assert!(structural_eq(&e.adjoint().adjoint(), &e));
    }

    #[test]
    fn renaming_bound_variables_is_invisible(e in arb_expr()) {
        // consistently rename every binder with a fresh decoration
        let renamed = Expr {
            terms: e
                .terms
                .iter()
                .map(|t| {
                    let mut cur = t.clone();
                    for b in t.binders.clone() {
                        let fresh = Var(format!("{}extra", b.var.0));
                        if !cur.all_vars().contains(&fresh) {
                            cur = cur.rename_var(&b.var, &fresh);
                        }
                    }
                    cur
                })
                .collect(),
        };
        prop_assert!(structural_eq(&e, &renamed));
    }

    #[test]
    fn printing_never_panics_and_parses_back(e in arb_expr()) {
        let t = table();
        let text = print_expr(&e);
        let parsed = parse(&text, &t);
        prop_assert!(parsed.is_ok(), "failed to reparse `{text}`: {:?}", parsed.err());
        prop_assert!(structural_eq(&parsed.unwrap(), &e), "round trip changed `{text}`");
    }
}

// -- shaped wrappers ------------------------------------------------------------

#[test]
fn shaped_wrappers_validate_and_track_adjoints() {
    use tagcalc_core::expr::{BraState, KetState, OperatorExpr};
    let t = table();
    let ket = KetState::named("psi", &tagcalc_core::Basis::new("nu"));
    assert!(ket.normalized);
    let bra = ket.adjoint();
    assert!(bra.normalized);
    assert!(structural_eq(&bra.adjoint().expr, &ket.expr));

    let op_expr = parse("int |q> q <q| dq", &t).unwrap();
    let op = OperatorExpr::try_new(op_expr.clone()).unwrap();
    assert!(structural_eq(&op.adjoint().expr, &op_expr.adjoint()));

    // shape violations are rejected
    assert!(KetState::try_new(op_expr.clone(), false).is_err());
    assert!(BraState::try_new(op_expr.clone(), false).is_err());
    assert!(OperatorExpr::try_new(parse("ket(psi)", &t).unwrap()).is_err());
}
