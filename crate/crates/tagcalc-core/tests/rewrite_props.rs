//! Engine-level laws: identity absorption, measure-consistent identity
//! insertion, associativity of sandwiches, adjoint compatibility, mode
//! equivalence, termination on the corpus.

use tagcalc_core::derive::{make_ladders, make_quadratures};
use tagcalc_core::dsl::{parse, print_expr};
use tagcalc_core::rewrite::{normalize, NormalizeMode, DEFAULT_STEP_BUDGET};
use tagcalc_core::{structural_eq, Basis, BasisTable, Expr};

fn table() -> BasisTable {
    BasisTable::standard()
}

fn norm(e: &Expr, t: &BasisTable) -> Expr {
    normalize(e, t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET).unwrap().0
}

#[test]
fn identity_laws_for_states_and_operators() {
    let t = table();
    let id_q = Expr::identity(&Basis::q());
    let id_p = parse("int |p><p| dp", &t).unwrap();
    let ket = parse("ket(psi)", &t).unwrap();
    let bra = parse("bra(phi)", &t).unwrap();
    let op = parse("int |q> q <q| dq", &t).unwrap();

    for x in [&ket, &op] {
        for id in [&id_q, &id_p] {
            assert!(
                structural_eq(&norm(&id.mul(x), &t), &norm(x, &t)),
                "identity law failed for {}",
                print_expr(x)
            );
        }
    }
    for id in [&id_q, &id_p] {
        assert!(structural_eq(&norm(&bra.mul(id), &t), &norm(&bra, &t)));
        assert!(structural_eq(&norm(&op.mul(id), &t), &norm(&op, &t)));
    }
}

#[test]
fn identity_insertion_leaves_sandwiches_unchanged() {
    // inserting a resolved identity in either basis into <phi|A|psi>
    let t = table();
    let bra = parse("bra(phi)", &t).unwrap();
    let ket = parse("ket(psi)", &t).unwrap();
    let op = parse("int |q> q^2 <q| dq", &t).unwrap();
    let id_q = Expr::identity(&Basis::q());
    let id_p = parse("int |p><p| dp", &t).unwrap();

    let plain = norm(&bra.mul(&op).mul(&ket), &t);
    for id in [&id_q, &id_p] {
        let left = norm(&bra.mul(id).mul(&op).mul(&ket), &t);
        let right = norm(&bra.mul(&op).mul(id).mul(&ket), &t);
        assert!(structural_eq(&left, &plain), "left insertion changed the sandwich");
        assert!(structural_eq(&right, &plain), "right insertion changed the sandwich");
    }
}

#[test]
fn sandwich_evaluation_is_associative() {
    let t = table();
    let bra = parse("bra(g_fn)", &t).unwrap();
    let ket = parse("ket(f_fn)", &t).unwrap();
    let op = parse("int |q> q <q| dq", &t).unwrap();

    // normalize((<G|A)|F>) vs normalize(<G|(A|F>))
    let left_first = norm(&norm(&bra.mul(&op), &t).mul(&ket), &t);
    let right_first = norm(&bra.mul(&norm(&op.mul(&ket), &t)), &t);
    assert!(structural_eq(&left_first, &right_first));
}

#[test]
fn adjoint_commutes_with_normalization() {
    let t = table();
    for src in [
        "<q|p>",
        "int |q> q <q| dq int |p> p <p| dp",
        "int |q><q| dq ket(psi)",
        "bra(phi) int |q> q <q| dq ket(psi)",
        "int exp(i*q*p) p exp(-i*q'*p) dp",
    ] {
        let e = parse(src, &t).unwrap();
        let a = norm(&e.adjoint(), &t);
        let b = norm(&e, &t).adjoint();
        assert!(
            structural_eq(&a, &norm(&b, &t)),
            "adjoint compatibility failed for {src}: {} vs {}",
            print_expr(&a),
            print_expr(&b)
        );
    }
}

#[test]
fn left_right_action_symmetry() {
    // normalize(<psi|A)^dag == normalize(A^dag |psi>)
    let t = table();
    let ops = [
        parse("int |q> q <q| dq", &t).unwrap(),
        parse("int |p> p <p| dp", &t).unwrap(),
        make_ladders(&t).unwrap().0,
    ];
    let bra = parse("bra(psi)", &t).unwrap();
    let ket = parse("ket(psi)", &t).unwrap();
    for op in &ops {
        let left = norm(&bra.mul(op), &t).adjoint();
        let right = norm(&op.adjoint().mul(&ket), &t);
        assert!(structural_eq(&norm(&left, &t), &right));
    }
}

#[test]
fn modes_agree_on_the_derivation_corpus() {
    let t = table();
    let (q_op, _p_op) = make_quadratures(&t).unwrap();
    let (lower, raise) = make_ladders(&t).unwrap();
    let corpus: Vec<Expr> = vec![
        parse("<q|p>", &t).unwrap(),
        parse("bra(phi) ket(psi)", &t).unwrap(),
        parse("int |q><q| dq ket(psi)", &t).unwrap(),
        q_op.mul(&q_op),
        lower.add(&raise),
        parse("bra(phi) int |q> q <q| dq ket(psi)", &t).unwrap(),
        parse("int |p> p <p| dp ket(psi)", &t).unwrap(),
    ];
    for e in &corpus {
        let (dist, _) =
            normalize(e, &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET).unwrap();
        let (pf, _) = normalize(e, &t, NormalizeMode::PaperFaithful, DEFAULT_STEP_BUDGET).unwrap();
        assert!(
            structural_eq(&dist, &pf),
            "modes disagree on {}: {} vs {}",
            print_expr(e),
            print_expr(&dist),
            print_expr(&pf)
        );
    }
}

#[test]
fn p_moment_states_normalize_identically_in_both_modes() {
    // p-hat |psi>: the faithful route emits a bracket, then annihilates it
    // against the Schwartz state, landing on the distributional result.
    let t = table();
    let e = parse("int |p> p <p| dp ket(psi)", &t).unwrap();
    let (dist, _) = normalize(&e, &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET).unwrap();
    let (pf, report) =
        normalize(&e, &t, NormalizeMode::PaperFaithful, DEFAULT_STEP_BUDGET).unwrap();
    assert!(structural_eq(&dist, &pf));
    assert_eq!(report.boundary_terms_emitted, 1);
    assert_eq!(report.boundary_terms_annihilated, 1);
    assert_eq!(report.boundary_terms_remaining, 0);
}

#[test]
fn normalization_terminates_quickly_on_the_corpus() {
    let t = table();
    let (q_op, p_op) = make_quadratures(&t).unwrap();
    let heavy = q_op.mul(&p_op).sub(&p_op.mul(&q_op));
    let (_, report) =
        normalize(&heavy, &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET).unwrap();
    assert!(report.fixpoint);
    assert!(report.steps_taken < 200, "took {} steps", report.steps_taken);
}
