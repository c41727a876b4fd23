//! Serialization stability: the JSON field layout of expressions and
//! normalize reports is a contract for the CLI and its golden files.

use tagcalc_core::dsl::parse;
use tagcalc_core::rewrite::{normalize, NormalizeMode, DEFAULT_STEP_BUDGET};
use tagcalc_core::{canonical_expr, BasisTable, Expr};

#[test]
fn expr_json_layout_is_frozen() {
    let t = BasisTable::standard();
    let e = canonical_expr(&parse("int |q> 2*pi*psi(q) <q'| dq", &t).unwrap());
    let json = serde_json::to_value(&e).unwrap();
    let expected = serde_json::json!({
        "terms": [{
            "word": [
                {"kind": "tag", "basis": "q", "var": "q0"},
                {"kind": "extractor", "basis": "q", "var": "q'"}
            ],
            "scalars": [
                {"kind": "coeff_fn", "name": "psi",
                 "arg": {"terms": [["q0", "1"]], "constant": "0"},
                 "conj": false, "deriv": 0, "schwartz": true}
            ],
            "binders": [{"var": "q0", "basis": "q"}],
            "coeff": {"re": "2", "im": "0", "pi": 1, "sqrt2": 0}
        }]
    });
    assert_eq!(json, expected);
}

#[test]
fn expr_json_round_trips() {
    let t = BasisTable::standard();
    for src in [
        "int |q> q <q| dq",
        "-i*deltap(q - q') + delta(q - q')",
        "boundary[p](exp(i*q*p) p)",
        "exp(-i*1/2*x*p) x^-2",
    ] {
        let e = canonical_expr(&parse(src, &t).unwrap());
        let json = serde_json::to_string(&e).unwrap();
        let back: Expr = serde_json::from_str(&json).unwrap();
        assert_eq!(e, back, "json round trip changed `{src}`");
    }
}

#[test]
fn report_json_carries_steps_and_flags() {
    let t = BasisTable::standard();
    let e = parse("int |p> p <p| dp ket(psi)", &t).unwrap();
    let (_, report) = normalize(&e, &t, NormalizeMode::PaperFaithful, DEFAULT_STEP_BUDGET).unwrap();
    let json = serde_json::to_value(&report).unwrap();
    assert!(json["steps"].is_array());
    assert!(json["steps"][0]["rule"].is_string());
    assert!(json["steps"][0]["stage"].is_string());
    assert!(json["steps"][0]["before"].is_string());
    assert_eq!(json["fixpoint"], serde_json::json!(true));
    assert_eq!(json["boundary_terms_emitted"], serde_json::json!(1));
    assert_eq!(json["boundary_terms_annihilated"], serde_json::json!(1));
    assert_eq!(json["boundary_terms_remaining"], serde_json::json!(0));
}
