//! Canonical text rendering.
//!
//! Printing always goes through the canonical form, so the output is a pure
//! function of the normal form and `parse(print(e))` structurally equals the
//! alpha-normalized input.

use crate::affine::Affine;
use crate::canon::canonical_expr;
use crate::coeff::{Coeff, Rat};
use crate::expr::{Basis, Expr, ScalarAtom, Term, WordAtom};
use num_traits::{One, Signed, Zero};

pub fn print_expr(e: &Expr) -> String {
    let canon = canonical_expr(e);
    if canon.terms.is_empty() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, t) in canon.terms.iter().enumerate() {
        let (neg, body) = print_term(t);
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else if neg {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        out.push_str(&body);
    }
    out
}

/// Renders one canonical term; the bool is an extracted leading minus sign.
fn print_term(t: &Term) -> (bool, String) {
    let (neg, coeff_str) = coeff_string(&t.coeff);

    // Identity literal: the canonical-basis resolved identity prints as `I`.
    if is_identity_shape(t) {
        let body = if coeff_str.is_empty() { "I".to_string() } else { format!("{coeff_str}*I") };
        return (neg, body);
    }

    let mut scalar_parts: Vec<String> = Vec::new();
    if !coeff_str.is_empty() {
        scalar_parts.push(coeff_str);
    }
    for s in &t.scalars {
        scalar_parts.push(scalar_string(s));
    }
    let scalar_block = scalar_parts.join("*");

    let mut pieces: Vec<String> = Vec::new();
    if !t.word.is_empty() && t.word[0].is_tag() {
        pieces.push(word_string(&t.word[0]));
        if !scalar_block.is_empty() {
            pieces.push(scalar_block);
        }
        for w in &t.word[1..] {
            pieces.push(word_string(w));
        }
    } else {
        if !scalar_block.is_empty() {
            pieces.push(scalar_block);
        }
        for w in &t.word {
            pieces.push(word_string(w));
        }
    }
    if pieces.is_empty() {
        pieces.push("1".to_string());
    }

    let body = if t.binders.is_empty() {
        pieces.join(" ")
    } else {
        let measures: Vec<String> = t.binders.iter().map(|b| format!("d{}", b.var.0)).collect();
        format!("int {} {}", pieces.join(" "), measures.join(" "))
    };
    (neg, body)
}

fn is_identity_shape(t: &Term) -> bool {
    t.scalars.is_empty()
        && t.binders.len() == 1
        && t.word.len() == 2
        && matches!(
            (&t.word[0], &t.word[1]),
            (WordAtom::Tag { basis: b1, var: v1 }, WordAtom::Extractor { basis: b2, var: v2 })
                if b1 == b2 && v1 == v2 && *b1 == Basis::q() && *v1 == t.binders[0].var
        )
}

fn word_string(w: &WordAtom) -> String {
    match w {
        WordAtom::Tag { var, .. } => format!("|{}>", var.0),
        WordAtom::Extractor { var, .. } => format!("<{}|", var.0),
    }
}

/// Coefficient magnitude string with the sign extracted; empty means 1.
pub fn coeff_string(c: &Coeff) -> (bool, String) {
    let neg = if c.re.is_zero() { c.im.is_negative() } else { c.re.is_negative() };
    let (re, im) = if neg { (-c.re.clone(), -c.im.clone()) } else { (c.re.clone(), c.im.clone()) };

    let mut parts: Vec<String> = Vec::new();
    let complex_part = if im.is_zero() {
        if re.is_one() && (c.pi_pow != 0 || c.rt2_pow != 0) {
            None
        } else {
            Some(rat_string(&re))
        }
    } else if re.is_zero() {
        if im.is_one() {
            Some("i".to_string())
        } else {
            Some(format!("{}*i", rat_string(&im)))
        }
    } else {
        let op = if im.is_negative() { " - " } else { " + " };
        let im_abs = im.abs();
        let im_str =
            if im_abs.is_one() { "i".to_string() } else { format!("{}*i", rat_string(&im_abs)) };
        Some(format!("({}{}{})", rat_string(&re), op, im_str))
    };
    if let Some(s) = complex_part {
        parts.push(s);
    }
    match c.pi_pow {
        0 => {}
        1 => parts.push("pi".to_string()),
        k => parts.push(format!("pi^{k}")),
    }
    if c.rt2_pow == 1 {
        parts.push("sqrt2".to_string());
    }
    let s = parts.join("*");
    if s == "1" {
        (neg, String::new())
    } else {
        (neg, s)
    }
}

fn rat_string(r: &Rat) -> String {
    r.to_string()
}

pub fn affine_string(a: &Affine) -> String {
    if a.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    let mut first = true;
    for (v, c) in &a.terms {
        if first {
            if c.is_negative() {
                out.push('-');
            }
        } else if c.is_negative() {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        let mag = c.abs();
        if !mag.is_one() {
            out.push_str(&format!("{}*", rat_string(&mag)));
        }
        out.push_str(&v.0);
        first = false;
    }
    if !a.constant.is_zero() {
        if first {
            out.push_str(&rat_string(&a.constant));
        } else if a.constant.is_negative() {
            out.push_str(&format!(" - {}", rat_string(&a.constant.abs())));
        } else {
            out.push_str(&format!(" + {}", rat_string(&a.constant)));
        }
    }
    out
}

fn phase_prefix(coef: &Rat) -> String {
    let sign = if coef.is_negative() { "-" } else { "" };
    let mag = coef.abs();
    if mag.is_one() {
        format!("{sign}i")
    } else {
        format!("{sign}i*{}", rat_string(&mag))
    }
}

fn scalar_string(s: &ScalarAtom) -> String {
    match s {
        ScalarAtom::Delta { arg } => format!("delta({})", affine_string(arg)),
        ScalarAtom::DeltaPrime { arg } => format!("deltap({})", affine_string(arg)),
        ScalarAtom::Phase { coef, u, v } => {
            format!("exp({}*{}*{})", phase_prefix(coef), u.0, v.0)
        }
        ScalarAtom::LinPhase { coef, var } => format!("exp({}*{})", phase_prefix(coef), var.0),
        ScalarAtom::PhaseConst { coef } => {
            let sign = if coef.is_negative() { "-" } else { "" };
            format!("exp({sign}i*{})", rat_string(&coef.abs()))
        }
        ScalarAtom::Mono { var, pow } => {
            if *pow == 1 {
                var.0.clone()
            } else {
                format!("{}^{}", var.0, pow)
            }
        }
        ScalarAtom::CoeffFn { name, arg, conj, deriv, schwartz } => {
            let mut base = String::new();
            if !*schwartz {
                base.push('~');
            }
            base.push_str(name);
            for _ in 0..*deriv {
                base.push('\'');
            }
            if *conj {
                format!("conj({})({})", base, affine_string(arg))
            } else {
                format!("{}({})", base, affine_string(arg))
            }
        }
        ScalarAtom::Kernel { name, u, v, adjoint } => {
            if *adjoint {
                format!("dag({})({}, {})", name, affine_string(u), affine_string(v))
            } else {
                format!("{}({}, {})", name, affine_string(u), affine_string(v))
            }
        }
        ScalarAtom::Kernel2 { name, u, v, conj, .. } => {
            if *conj {
                format!("conj({})({}, {})", name, affine_string(u), affine_string(v))
            } else {
                format!("{}({}, {})", name, affine_string(u), affine_string(v))
            }
        }
        ScalarAtom::Boundary { limit_var, payload } => {
            format!("boundary[{}]({})", limit_var.0, print_expr(payload))
        }
    }
}
