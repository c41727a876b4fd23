//! Derivation pipelines: commutators, ladders, Weyl transforms, symplectic
//! checks, rebasing, moments, densities.

use tagcalc_core::coeff::{rat, ratio};
use tagcalc_core::derive::{
    self, alpha_symbol, commutator, make_ladders, make_quadratures, rebase, run_derivation,
    symplectic_check, weyl_quantize, weyl_symbol, DeriveError, DeriveOptions,
};
use tagcalc_core::dsl::{parse, print_expr};
use tagcalc_core::rewrite::{normalize, NormalizeMode, DEFAULT_STEP_BUDGET};
use tagcalc_core::{structural_eq, Basis, BasisTable, Coeff, Expr};

fn table() -> BasisTable {
    BasisTable::standard()
}

fn opts() -> DeriveOptions {
    DeriveOptions::default()
}

fn i_identity() -> Expr {
    Expr::identity(&Basis::q()).scale(&Coeff::i())
}

#[test]
fn quadratures_require_registration() {
    assert!(make_quadratures(&table()).is_ok());
    let empty = BasisTable::empty();
    assert!(matches!(make_quadratures(&empty), Err(DeriveError::Basis(_))));
}

#[test]
fn quadratures_are_self_adjoint() {
    let t = table();
    let (q_op, p_op) = make_quadratures(&t).unwrap();
    for op in [&q_op, &p_op] {
        let (a, _) =
            normalize(&op.adjoint(), &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET)
                .unwrap();
        let (b, _) =
            normalize(op, &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET).unwrap();
        assert!(structural_eq(&a, &b));
    }
}

#[test]
fn qp_commutator_is_i_identity_both_modes() {
    let t = table();
    let (q_op, p_op) = make_quadratures(&t).unwrap();
    for mode in [NormalizeMode::Distributional, NormalizeMode::PaperFaithful] {
        let (result, _) = commutator(&q_op, &p_op, &t, mode, DEFAULT_STEP_BUDGET).unwrap();
        assert!(
            structural_eq(&result, &i_identity()),
            "mode {mode:?}: got {}",
            print_expr(&result)
        );
    }
}

#[test]
fn reversed_commutator_is_minus_i_identity() {
    let t = table();
    let (q_op, p_op) = make_quadratures(&t).unwrap();
    let (result, _) =
        commutator(&p_op, &q_op, &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET).unwrap();
    assert!(structural_eq(&result, &i_identity().neg()));
}

#[test]
fn self_commutators_vanish() {
    let t = table();
    let (q_op, p_op) = make_quadratures(&t).unwrap();
    for op in [&q_op, &p_op] {
        let (result, _) =
            commutator(op, op, &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET).unwrap();
        assert!(result.is_zero());
    }
}

#[test]
fn paper_faithful_commutator_emits_and_annihilates_boundaries() {
    let t = table();
    let (q_op, p_op) = make_quadratures(&t).unwrap();
    let (result, report) =
        commutator(&q_op, &p_op, &t, NormalizeMode::PaperFaithful, DEFAULT_STEP_BUDGET).unwrap();
    assert!(structural_eq(&result, &i_identity()));
    assert!(report.boundary_terms_emitted >= 1, "no boundary bracket was emitted");
    assert_eq!(report.boundary_terms_remaining, 0, "boundary terms survived");
    assert_eq!(report.boundary_terms_annihilated, report.boundary_terms_emitted);
}

#[test]
fn ladder_commutators() {
    let t = table();
    let (lower, raise) = make_ladders(&t).unwrap();
    let (ad, _) =
        commutator(&lower, &raise, &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET)
            .unwrap();
    assert!(structural_eq(&ad, &Expr::identity(&Basis::q())), "got {}", print_expr(&ad));
    let (aa, _) =
        commutator(&lower, &lower, &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET)
            .unwrap();
    assert!(aa.is_zero());
    let (dd, _) =
        commutator(&raise, &raise, &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET)
            .unwrap();
    assert!(dd.is_zero());
}

#[test]
fn ladders_are_mutually_adjoint_and_combine_to_quadratures() {
    let t = table();
    let (q_op, p_op) = make_quadratures(&t).unwrap();
    let (lower, raise) = make_ladders(&t).unwrap();

    assert!(structural_eq(&lower.adjoint(), &raise));
    assert!(structural_eq(&raise.adjoint(), &lower));

    // a + a^dag = sqrt2 q
    let sum = lower.add(&raise);
    assert!(structural_eq(&sum, &q_op.scale(&Coeff::sqrt2())));
    // a - a^dag = i sqrt2 p
    let diff = lower.sub(&raise);
    assert!(structural_eq(&diff, &p_op.scale(&Coeff::i().mul(&Coeff::sqrt2()))));
}

// -- Weyl transform ---------------------------------------------------------

#[test]
fn weyl_symbol_of_ladders() {
    let t = table();
    let (lower, raise) = make_ladders(&t).unwrap();
    let sym = weyl_symbol(&lower, &t, DEFAULT_STEP_BUDGET).unwrap();
    assert!(structural_eq(&sym, &alpha_symbol(false)), "got {}", print_expr(&sym));
    let sym2 = weyl_symbol(&raise, &t, DEFAULT_STEP_BUDGET).unwrap();
    assert!(structural_eq(&sym2, &alpha_symbol(true)), "got {}", print_expr(&sym2));
}

#[test]
fn weyl_symbol_of_identity_is_one() {
    let t = table();
    let sym = weyl_symbol(&Expr::identity(&Basis::q()), &t, DEFAULT_STEP_BUDGET).unwrap();
    assert!(structural_eq(&sym, &Expr::constant(Coeff::one())), "got {}", print_expr(&sym));
}

#[test]
fn weyl_quantize_inverts_symbol() {
    let t = table();
    let (lower, _) = make_ladders(&t).unwrap();
    let a_normal =
        normalize(&lower, &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET).unwrap().0;

    let quantized = weyl_quantize(&alpha_symbol(false), &t, DEFAULT_STEP_BUDGET).unwrap();
    assert!(structural_eq(&quantized, &a_normal), "got {}", print_expr(&quantized));

    // q -> q-hat, 1 -> identity
    let q_sym = parse("q", &t).unwrap();
    let q_hat = weyl_quantize(&q_sym, &t, DEFAULT_STEP_BUDGET).unwrap();
    let (expect_q, _) = make_quadratures(&t).unwrap();
    assert!(structural_eq(&q_hat, &expect_q));

    let one = parse("1", &t).unwrap();
    let id = weyl_quantize(&one, &t, DEFAULT_STEP_BUDGET).unwrap();
    assert!(structural_eq(&id, &Expr::identity(&Basis::q())));
}

#[test]
fn weyl_round_trip_on_supported_polynomials() {
    let t = table();
    for src in ["q", "p", "1", "q^2", "q p", "2 q + 3 p", "(q + i*p)/sqrt2"] {
        let sym = parse(src, &t).unwrap();
        let quantized = weyl_quantize(&sym, &t, DEFAULT_STEP_BUDGET).unwrap();
        let back = weyl_symbol(&quantized, &t, DEFAULT_STEP_BUDGET).unwrap();
        assert!(
            structural_eq(&back, &sym),
            "round trip failed for {src}: got {}",
            print_expr(&back)
        );
    }
}

#[test]
fn weyl_quantize_rejects_unsupported_degrees() {
    let t = table();
    let p2 = parse("p^2", &t).unwrap();
    assert!(matches!(
        weyl_quantize(&p2, &t, DEFAULT_STEP_BUDGET),
        Err(DeriveError::UnsupportedDegree(_))
    ));
    let cubic = parse("q^3", &t).unwrap();
    assert!(matches!(
        weyl_quantize(&cubic, &t, DEFAULT_STEP_BUDGET),
        Err(DeriveError::UnsupportedDegree(_))
    ));
}

// -- symplectic ---------------------------------------------------------------

#[test]
fn symplectic_identity_params() {
    let t = table();
    let (result, expected, is_symp, _) = symplectic_check(
        &(rat(1), rat(0), rat(0), rat(1)),
        &t,
        NormalizeMode::Distributional,
        DEFAULT_STEP_BUDGET,
    )
    .unwrap();
    assert!(is_symp);
    assert!(structural_eq(&result, &expected));
    assert!(structural_eq(&result, &i_identity()));
}

#[test]
fn symplectic_squeezing_params() {
    let t = table();
    let (result, _, is_symp, _) = symplectic_check(
        &(rat(2), rat(0), rat(0), ratio(1, 2)),
        &t,
        NormalizeMode::Distributional,
        DEFAULT_STEP_BUDGET,
    )
    .unwrap();
    assert!(is_symp);
    assert!(structural_eq(&result, &i_identity()));
}

#[test]
fn complex_parameters_are_supported() {
    // (a, b, c, d) = (1, i, i, 0): ad - bc = -(i*i) = 1, a genuinely
    // complex symplectic transform
    let t = table();
    let params = (Coeff::one(), Coeff::i(), Coeff::i(), Coeff::zero());
    let (result, expected, is_symp, _) = derive::symplectic_check_complex(
        &params,
        &t,
        NormalizeMode::Distributional,
        DEFAULT_STEP_BUDGET,
    )
    .unwrap();
    assert!(is_symp);
    assert!(structural_eq(&result, &expected));
    assert!(structural_eq(&result, &i_identity()));

    // mixed sqrt2 powers: ad and bc cannot merge; the expected form is the
    // two-term combination and the transform is not symplectic
    let params = (Coeff::sqrt2(), Coeff::one(), Coeff::one(), Coeff::one());
    let (result, expected, is_symp, _) = derive::symplectic_check_complex(
        &params,
        &t,
        NormalizeMode::Distributional,
        DEFAULT_STEP_BUDGET,
    )
    .unwrap();
    assert!(!is_symp);
    assert!(structural_eq(&result, &expected), "got {}", print_expr(&result));
}

#[test]
fn non_symplectic_params_scale_the_commutator() {
    let t = table();
    let (result, expected, is_symp, _) = symplectic_check(
        &(rat(1), rat(0), rat(0), rat(2)),
        &t,
        NormalizeMode::Distributional,
        DEFAULT_STEP_BUDGET,
    )
    .unwrap();
    assert!(!is_symp);
    assert!(structural_eq(&result, &expected));
    assert!(structural_eq(&result, &i_identity().scale(&Coeff::from_int(2))));
}

// -- rebasing -------------------------------------------------------------------

#[test]
fn rebase_preserves_closed_sandwiches() {
    let mut t = table();
    t.register_unitary("V", Basis::new("nu"), Basis::new("eta")).unwrap();
    let nu = Basis::new("nu");
    let sandwich = Expr::bra("phi", &nu, true).mul(&Expr::ket("psi", &nu, true));
    let (direct, _) =
        normalize(&sandwich, &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET).unwrap();
    let rebased = rebase(&sandwich, "V", &t).unwrap();
    let (via, _) =
        normalize(&rebased, &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET).unwrap();
    assert!(structural_eq(&direct, &via), "got {}", print_expr(&via));
}

#[test]
fn rebase_identity_is_identity() {
    let mut t = table();
    t.register_unitary("V", Basis::new("nu"), Basis::new("eta")).unwrap();
    let rebased = rebase(&Expr::identity(&Basis::new("nu")), "V", &t).unwrap();
    let (result, _) =
        normalize(&rebased, &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET).unwrap();
    assert!(structural_eq(&result, &Expr::identity(&Basis::new("eta"))));
}

#[test]
fn rebased_moment_stays_symbolic() {
    let mut t = table();
    t.register_unitary("V", Basis::new("nu"), Basis::new("eta")).unwrap();
    let m1 = derive::moment_operator(&Basis::new("nu"), 1);
    let rebased = rebase(&m1, "V", &t).unwrap();
    let (result, _) =
        normalize(&rebased, &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET).unwrap();
    // the kernels survive (blocked by the moment between them) ...
    let has_kernels = result.terms.iter().any(|term| {
        term.scalars.iter().any(|s| matches!(s, tagcalc_core::ScalarAtom::Kernel { .. }))
    });
    assert!(has_kernels, "got {}", print_expr(&result));
    // ... and the result is not the diagonal moment of the new basis
    assert!(!structural_eq(&result, &derive::moment_operator(&Basis::new("eta"), 1)));
}

#[test]
fn rebase_unregistered_kernel_errors() {
    let t = table();
    let err = rebase(&Expr::identity(&Basis::new("nu")), "W", &t).unwrap_err();
    assert!(matches!(err, DeriveError::Basis(_)));
}

// -- moments and densities -----------------------------------------------------

#[test]
fn moment_operators_compose_additively() {
    let t = table();
    let nu = Basis::new("nu");
    let m = |n| derive::moment_operator(&nu, n);
    for (a, b) in [(1u32, 1u32), (1, 2), (2, 3), (0, 4)] {
        let (prod, _) =
            normalize(&m(a).mul(&m(b)), &t, NormalizeMode::Distributional, DEFAULT_STEP_BUDGET)
                .unwrap();
        assert!(structural_eq(&prod, &m(a + b)), "M{a} M{b} != M{}", a + b);
    }
}

#[test]
fn moment_value_is_weighted_norm_integral() {
    let t = table();
    let nu = Basis::new("nu");
    let ket = Expr::ket("psi", &nu, true);
    let value = derive::moment_value(&ket, &nu, 2, &t, &opts()).unwrap();
    let expected = parse("int nu^2 psi(nu) conj(psi)(nu) dnu", &t).unwrap();
    assert!(structural_eq(&value, &expected), "got {}", print_expr(&value));
}

#[test]
fn density_from_kernel_requires_self_adjointness() {
    let mut t = table();
    t.register_kernel2("rho_h", true);
    t.register_kernel2("rho_n", false);
    assert!(derive::density_from_kernel("rho_h", &Basis::new("nu"), &t).is_ok());
    assert!(matches!(
        derive::density_from_kernel("rho_n", &Basis::new("nu"), &t),
        Err(DeriveError::NonSelfAdjoint(_))
    ));
}

#[test]
fn pure_purity_is_the_squared_trace_form() {
    // tr(rho^2) for a pure density is structurally the product of two
    // independent norm integrals, i.e. the square of the trace form.
    let t = table();
    let nu = Basis::new("nu");
    let ket = Expr::ket("psi", &nu, true);
    let rho = derive::density_pure(&ket).unwrap();
    let purity = derive::purity(&rho, &t, &opts()).unwrap();
    let tr = derive::trace_norm(&rho, &t, &opts()).unwrap();
    assert!(
        structural_eq(&purity, &tr.mul(&tr)),
        "purity {} is not trace^2 {}",
        print_expr(&purity),
        print_expr(&tr.mul(&tr))
    );
}

#[test]
fn kernel_density_trace_normalization_form() {
    let mut t = table();
    t.register_kernel2("rho_h", true);
    let rho = derive::density_from_kernel("rho_h", &Basis::new("nu"), &t).unwrap();
    let tr = derive::trace_norm(&rho, &t, &opts()).unwrap();
    let expected = parse("int rho_h(nu0, nu0) dnu0", &t).unwrap();
    assert!(structural_eq(&tr, &expected), "got {}", print_expr(&tr));
}

// -- named pipelines -------------------------------------------------------------

#[test]
fn all_named_derivations_pass() {
    let t = table();
    let o = opts();
    for name in derive::DERIVATION_NAMES {
        let results = run_derivation(name, &t, &o).unwrap();
        assert!(!results.is_empty());
        for d in &results {
            assert!(
                d.pass,
                "derivation {} failed: result {} expected{} {}",
                d.name,
                print_expr(&d.result),
                if d.expect_equal { "" } else { " (inequality)" },
                print_expr(&d.expected),
            );
        }
    }
}

#[test]
fn unknown_derivation_lists_names() {
    let err = run_derivation("bogus", &table(), &opts()).unwrap_err();
    match err {
        DeriveError::UnknownDerivation(name, list) => {
            assert_eq!(name, "bogus");
            assert!(list.contains("qp-commutator"));
        }
        other => panic!("unexpected error {other}"),
    }
}
