//! Canned derivation pipelines reconstructing the calculus' main results
//! from the axioms: quadratures, ladder operators, commutators, Weyl
//! symbols and quantization, symplectic checks, rebasing, moments, and
//! density operators. Each pipeline returns the result together with the
//! expected form and a replayable step log.

use crate::affine::Affine;
use crate::basis::{BasisError, BasisTable};
use crate::canon::{canonical_expr, structural_eq};
use crate::coeff::{rat, ratio, Coeff, Rat};
use crate::expr::{Basis, Binder, Expr, ScalarAtom, Term, Var, WordAtom};
use crate::rewrite::{
    normalize, normalize_stages, NormalizeMode, NormalizeReport, RewriteError, Stage,
    DEFAULT_STEP_BUDGET,
};
use num_traits::One;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DeriveError {
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("operator kernel is outside the supported class: {0}")]
    UnsupportedKernel(String),
    #[error("symbol degree is unsupported: {0}")]
    UnsupportedDegree(String),
    #[error("density kernel `{0}` is not declared self-adjoint")]
    NonSelfAdjoint(String),
    #[error("unknown derivation `{0}`; known: {1}")]
    UnknownDerivation(String, String),
    #[error("expression is not {0}-shaped")]
    Shape(&'static str),
}

/// One derivation outcome: the engine's result against the expected form.
#[derive(Debug, Clone, Serialize)]
pub struct Derivation {
    pub name: String,
    pub result: Expr,
    pub expected: Expr,
    /// When false, the derivation asserts result and expected differ
    /// (used for the moment non-invariance check).
    pub expect_equal: bool,
    pub pass: bool,
    pub log: NormalizeReport,
    pub notes: Vec<String>,
}

impl Derivation {
    fn new(
        name: &str,
        result: Expr,
        expected: Expr,
        log: NormalizeReport,
    ) -> Derivation {
        let pass = structural_eq(&result, &expected);
        Derivation {
            name: name.to_string(),
            result,
            expected,
            expect_equal: true,
            pass,
            log,
            notes: vec![],
        }
    }

    fn new_unequal(
        name: &str,
        result: Expr,
        expected: Expr,
        log: NormalizeReport,
        note: &str,
    ) -> Derivation {
        let pass = !structural_eq(&result, &expected);
        Derivation {
            name: name.to_string(),
            result,
            expected,
            expect_equal: false,
            pass,
            log,
            notes: vec![note.to_string()],
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeriveOptions {
    pub mode: NormalizeMode,
    pub budget: usize,
    /// Parameters for the symplectic derivation.
    pub symplectic: (Rat, Rat, Rat, Rat),
}

impl Default for DeriveOptions {
    fn default() -> Self {
        DeriveOptions {
            mode: NormalizeMode::Distributional,
            budget: DEFAULT_STEP_BUDGET,
            symplectic: (rat(2), rat(0), rat(0), ratio(1, 2)),
        }
    }
}

pub const DERIVATION_NAMES: [&str; 7] = [
    "qp-commutator",
    "ladder-commutator",
    "weyl-annihilation",
    "symplectic",
    "unitary-invariance",
    "moments",
    "density-trace",
];

// ---------------------------------------------------------------------------
// constructors

/// The standard quadrature pair: diagonal first-moment operators of the two
/// mutually unbiased bases. Errors if the bases are not registered.
pub fn make_quadratures(table: &BasisTable) -> Result<(Expr, Expr), DeriveError> {
    table.require_unbiased(&Basis::q(), &Basis::p())?;
    Ok((Expr::diagonal_operator(&Basis::q(), 1), Expr::diagonal_operator(&Basis::p(), 1)))
}

/// Ladder operators from the quadratures: (q + i p)/sqrt2 and its adjoint.
pub fn make_ladders(table: &BasisTable) -> Result<(Expr, Expr), DeriveError> {
    let (q_op, p_op) = make_quadratures(table)?;
    let inv_rt2 = Coeff::inv_sqrt2();
    let lower = q_op.add(&p_op.scale(&Coeff::i())).scale(&inv_rt2);
    let raise = q_op.add(&p_op.scale(&Coeff::i().neg())).scale(&inv_rt2);
    Ok((lower, raise))
}

pub fn moment_operator(basis: &Basis, n: u32) -> Expr {
    Expr::diagonal_operator(basis, n)
}

/// Pure density operator |psi><psi|.
pub fn density_pure(ket: &Expr) -> Result<Expr, DeriveError> {
    if !ket.is_ket_shaped() {
        return Err(DeriveError::Shape("ket"));
    }
    Ok(ket.mul(&ket.adjoint()))
}

/// Density operator from a registered two-slot kernel, which must be
/// declared self-adjoint.
pub fn density_from_kernel(
    name: &str,
    basis: &Basis,
    table: &BasisTable,
) -> Result<Expr, DeriveError> {
    let info = table
        .kernel2(name)
        .ok_or_else(|| DeriveError::UnsupportedKernel(format!("kernel `{name}` not registered")))?;
    if !info.hermitian {
        return Err(DeriveError::NonSelfAdjoint(name.to_string()));
    }
    let u = Var(format!("{}0", basis.0));
    let v = Var(format!("{}1", basis.0));
    Ok(Expr::from_term(Term {
        word: vec![
            WordAtom::Tag { basis: basis.clone(), var: u.clone() },
            WordAtom::Extractor { basis: basis.clone(), var: v.clone() },
        ],
        scalars: vec![ScalarAtom::Kernel2 {
            name: name.to_string(),
            u: Affine::var(u.clone()),
            v: Affine::var(v.clone()),
            conj: false,
            hermitian: true,
        }],
        binders: vec![
            Binder { var: u, basis: basis.clone() },
            Binder { var: v, basis: basis.clone() },
        ],
        coeff: Coeff::one(),
    }))
}

// ---------------------------------------------------------------------------
// commutator with boundary-domain handling

/// normalize(A*B - B*A). In paper-faithful mode, operator-level boundary
/// brackets that annihilate against generic Schwartz states from both sides
/// are removed (the domain restriction), and the log records it.
pub fn commutator(
    a: &Expr,
    b: &Expr,
    table: &BasisTable,
    mode: NormalizeMode,
    budget: usize,
) -> Result<(Expr, NormalizeReport), DeriveError> {
    if !a.is_operator_shaped() || !b.is_operator_shaped() {
        return Err(DeriveError::Shape("operator"));
    }
    let e = a.mul(b).sub(&b.mul(a));
    let (normalized, mut report) = normalize(&e, table, mode, budget)?;
    if report.boundary_terms_remaining == 0 {
        return Ok((normalized, report));
    }
    // Domain restriction: probe surviving boundary terms with a generic
    // Schwartz state from the right and from the left; terms that vanish
    // both ways are zero on the whole domain and are dropped.
    let mut kept = Vec::new();
    for t in &normalized.terms {
        let has_boundary = t.scalars.iter().any(|s| matches!(s, ScalarAtom::Boundary { .. }));
        if has_boundary && boundary_vanishes_on_domain(t, table)? {
            report.boundary_terms_annihilated += 1;
            report.boundary_terms_remaining -= 1;
            continue;
        }
        kept.push(t.clone());
    }
    Ok((canonical_expr(&Expr { terms: kept }), report))
}

fn boundary_vanishes_on_domain(t: &Term, table: &BasisTable) -> Result<bool, DeriveError> {
    let (Some(WordAtom::Tag { basis: left, .. }), Some(WordAtom::Extractor { basis: right, .. })) =
        (t.word.first(), t.word.last())
    else {
        return Ok(false);
    };
    let probe_stages = [Stage::Contraction, Stage::Sifting, Stage::Boundary];
    let op = Expr::from_term(t.clone());
    let ket = Expr::ket("schwartz_probe", right, true);
    let (right_result, _) = normalize_stages(
        &op.mul(&ket),
        table,
        NormalizeMode::Distributional,
        DEFAULT_STEP_BUDGET,
        &probe_stages,
    )?;
    if !right_result.is_zero() {
        return Ok(false);
    }
    let bra = Expr::bra("schwartz_probe", left, true);
    let (left_result, _) = normalize_stages(
        &bra.mul(&op),
        table,
        NormalizeMode::Distributional,
        DEFAULT_STEP_BUDGET,
        &probe_stages,
    )?;
    Ok(left_result.is_zero())
}

// ---------------------------------------------------------------------------
// Weyl transform

/// Weyl symbol of an operator whose canonical-basis kernel is polynomial
/// times delta or delta-prime: midpoint substitution followed by the offset
/// Fourier integral, returning a polynomial in the free variables `q`, `p`.
pub fn weyl_symbol(
    op: &Expr,
    table: &BasisTable,
    budget: usize,
) -> Result<Expr, DeriveError> {
    let (normalized, _) = normalize(op, table, NormalizeMode::Distributional, budget)?;
    if !normalized.is_operator_shaped() {
        return Err(DeriveError::Shape("operator"));
    }
    if !normalized.free_vars().is_empty() {
        return Err(DeriveError::UnsupportedKernel(
            "operator must be closed (no free variables)".into(),
        ));
    }
    let mid = Var::new("q");
    let offset = Var::new("x");
    let sym_p = Var::new("p");

    let mut pieces = Expr::zero();
    for t in &normalized.terms {
        // Diagonal terms share one binder between tag and extractor; split
        // them so the implicit delta becomes part of the kernel.
        let mut t = t.clone();
        if t.word.len() == 2 && t.word[0].var() == t.word[1].var() {
            let shared = t.word[0].var().clone();
            let fresh = crate::expr::fresh_var(&shared, &t.all_vars());
            if let WordAtom::Extractor { var, .. } = &mut t.word[1] {
                *var = fresh.clone();
            }
            let basis = t.word[1].basis().clone();
            t.scalars.push(ScalarAtom::Delta {
                arg: Affine::var(shared).sub(&Affine::var(fresh.clone())),
            });
            t.binders.push(Binder { var: fresh, basis });
        }
        let t = &t;
        let (WordAtom::Tag { basis: tb, var: u }, WordAtom::Extractor { basis: eb, var: v }) =
            (&t.word[0], &t.word[1])
        else {
            return Err(DeriveError::Shape("operator"));
        };
        if *tb != Basis::q() || *eb != Basis::q() {
            return Err(DeriveError::UnsupportedKernel(format!(
                "kernel must normalize into basis `q`, found `{}`/`{}`",
                tb.0, eb.0
            )));
        }
        let (u, v) = (u.clone(), v.clone());
        for s in &t.scalars {
            match s {
                ScalarAtom::Delta { .. } | ScalarAtom::DeltaPrime { .. } | ScalarAtom::Mono { .. } => {}
                other => {
                    return Err(DeriveError::UnsupportedKernel(format!(
                        "kernel atom {other:?} is outside the polynomial-times-delta class"
                    )))
                }
            }
        }
        // kernel scalars with the word and binders stripped
        let kernel = Term {
            word: vec![],
            scalars: t.scalars.clone(),
            binders: vec![],
            coeff: t.coeff.clone(),
        };
        // midpoint change: u -> q + x/2, v -> q - x/2
        let to_u = Affine::var(mid.clone()).with_coef(offset.clone(), ratio(1, 2));
        let to_v = Affine::var(mid.clone()).with_coef(offset.clone(), ratio(-1, 2));
        let mut e = Expr::from_term(kernel);
        e = e.substitute(&u, &to_u).map_err(RewriteError::from)?;
        e = e.substitute(&v, &to_v).map_err(RewriteError::from)?;
        // times exp(-i x p), integrated over x (the binder attaches after
        // the product so the kernel's offset variable is the one captured)
        let phase = Term {
            word: vec![],
            scalars: vec![ScalarAtom::Phase {
                coef: -Rat::one(),
                u: offset.clone(),
                v: sym_p.clone(),
            }],
            binders: vec![],
            coeff: Coeff::one(),
        };
        let mut prod = e.mul(&Expr::from_term(phase));
        for t2 in &mut prod.terms {
            t2.binders.push(Binder { var: offset.clone(), basis: Basis::q() });
        }
        pieces = pieces.add(&prod);
    }
    let (symbol, _) = normalize(&pieces, table, NormalizeMode::Distributional, budget)?;
    // verify the result is a polynomial in q, p of total degree <= 2
    for t in &symbol.terms {
        if !t.word.is_empty() || !t.binders.is_empty() {
            return Err(DeriveError::UnsupportedKernel("symbol did not reduce".into()));
        }
        let mut degree = 0i64;
        for s in &t.scalars {
            match s {
                ScalarAtom::Mono { var, pow } if (*var == mid || *var == sym_p) && *pow > 0 => {
                    degree += *pow;
                }
                other => {
                    return Err(DeriveError::UnsupportedKernel(format!(
                        "non-polynomial symbol atom {other:?}"
                    )))
                }
            }
        }
        if degree > 2 {
            return Err(DeriveError::UnsupportedDegree(format!("total degree {degree} > 2")));
        }
    }
    Ok(symbol)
}

/// Weyl quantization of a polynomial symbol in `q`, `p` (p-degree at most 1,
/// total degree at most 2): the inverse of `weyl_symbol` on its class.
pub fn weyl_quantize(
    symbol: &Expr,
    table: &BasisTable,
    budget: usize,
) -> Result<Expr, DeriveError> {
    let symbol = canonical_expr(symbol);
    let q = Var::new("q");
    let p = Var::new("p");
    let u = Var::new("q0");
    let v = Var::new("q1");
    let mut out = Expr::zero();
    for t in &symbol.terms {
        if !t.word.is_empty() || !t.binders.is_empty() {
            return Err(DeriveError::Shape("scalar polynomial"));
        }
        let mut deg_q = 0i64;
        let mut deg_p = 0i64;
        for s in &t.scalars {
            match s {
                ScalarAtom::Mono { var, pow } if *var == q && *pow > 0 => deg_q += pow,
                ScalarAtom::Mono { var, pow } if *var == p && *pow > 0 => deg_p += pow,
                other => {
                    return Err(DeriveError::UnsupportedDegree(format!(
                        "symbol atom {other:?} is not a monomial in q, p"
                    )))
                }
            }
        }
        if deg_p > 1 {
            return Err(DeriveError::UnsupportedDegree(format!(
                "p-degree {deg_p} > 1: such kernels need higher delta derivatives"
            )));
        }
        if deg_q + deg_p > 2 {
            return Err(DeriveError::UnsupportedDegree(format!(
                "total degree {} > 2",
                deg_q + deg_p
            )));
        }
        // kernel: ((q0+q1)/2)^deg_q times delta or -i delta'
        let singular = if deg_p == 0 {
            (ScalarAtom::Delta { arg: Affine::var(u.clone()).sub(&Affine::var(v.clone())) }, Coeff::one())
        } else {
            (
                ScalarAtom::DeltaPrime { arg: Affine::var(u.clone()).sub(&Affine::var(v.clone())) },
                Coeff::i().neg(),
            )
        };
        let mut base = Term {
            word: vec![
                WordAtom::Tag { basis: Basis::q(), var: u.clone() },
                WordAtom::Extractor { basis: Basis::q(), var: v.clone() },
            ],
            scalars: vec![singular.0],
            binders: vec![
                Binder { var: u.clone(), basis: Basis::q() },
                Binder { var: v.clone(), basis: Basis::q() },
            ],
            coeff: t.coeff.mul(&singular.1),
        };
        let mut piece = if deg_q > 0 {
            let tmp = Var::new("~m");
            base.scalars.push(ScalarAtom::Mono { var: tmp.clone(), pow: deg_q });
            let mid = Affine::var(u.clone())
                .scale(&ratio(1, 2))
                .add(&Affine::var(v.clone()).scale(&ratio(1, 2)));
            Expr::from_term(base)
                .substitute_captured(&tmp, &mid)
                .map_err(RewriteError::from)?
        } else {
            Expr::from_term(base)
        };
        piece = canonical_expr(&piece);
        out = out.add(&piece);
    }
    let (normalized, _) = normalize(&out, table, NormalizeMode::Distributional, budget)?;
    Ok(normalized)
}

// ---------------------------------------------------------------------------
// symplectic transforms

/// normalize([a q + b p, c q + d p]) for exact complex-rational parameters,
/// against the expected i (ad - bc) identity.
pub fn symplectic_check_complex(
    params: &(Coeff, Coeff, Coeff, Coeff),
    table: &BasisTable,
    mode: NormalizeMode,
    budget: usize,
) -> Result<(Expr, Expr, bool, NormalizeReport), DeriveError> {
    let (a, b, c, d) = params;
    let (q_op, p_op) = make_quadratures(table)?;
    let new_q = q_op.scale(a).add(&p_op.scale(b));
    let new_p = q_op.scale(c).add(&p_op.scale(d));
    let (result, report) = commutator(&new_q, &new_p, table, mode, budget)?;
    // ad and bc merge into one determinant when their pi/sqrt2 powers
    // match; otherwise the expected form is the two-term sum.
    let ad = a.mul(d);
    let bc = b.mul(c);
    let id = Expr::identity(&Basis::q());
    let (expected, symplectic) = match ad.add(&bc.neg()) {
        Some(det) => (id.scale(&Coeff::i().mul(&det)), det.is_one()),
        None => (
            id.scale(&Coeff::i().mul(&ad)).add(&id.scale(&Coeff::i().mul(&bc).neg())),
            false,
        ),
    };
    Ok((result, expected, symplectic, report))
}

/// Rational-parameter convenience for `symplectic_check_complex`.
pub fn symplectic_check(
    params: &(Rat, Rat, Rat, Rat),
    table: &BasisTable,
    mode: NormalizeMode,
    budget: usize,
) -> Result<(Expr, Expr, bool, NormalizeReport), DeriveError> {
    let (a, b, c, d) = params;
    symplectic_check_complex(
        &(
            Coeff::from_rat(a.clone()),
            Coeff::from_rat(b.clone()),
            Coeff::from_rat(c.clone()),
            Coeff::from_rat(d.clone()),
        ),
        table,
        mode,
        budget,
    )
}

// ---------------------------------------------------------------------------
// rebasing through a registered unitary kernel

/// Rewrite tags and extractors of the kernel's source basis into the target
/// basis with compensating kernel insertions. The result is not normalized.
pub fn rebase(x: &Expr, kernel: &str, table: &BasisTable) -> Result<Expr, DeriveError> {
    let info = table.unitary(kernel)?;
    let from = info.from.clone();
    let to = info.to.clone();
    let mut terms = Vec::new();
    for t in &x.terms {
        let mut cur = t.clone();
        while let Some(wi) = cur.word.iter().position(|w| *w.basis() == from) {
            let taken = cur.all_vars();
            let fresh = crate::expr::fresh_var(&Var(format!("{}0", to.0)), &taken);
            match cur.word[wi].clone() {
                WordAtom::Tag { var, .. } => {
                    // tau(v) = int tau'(eta) U^dag(eta, v) d eta
                    cur.word[wi] = WordAtom::Tag { basis: to.clone(), var: fresh.clone() };
                    cur.scalars.push(ScalarAtom::Kernel {
                        name: kernel.to_string(),
                        u: Affine::var(fresh.clone()),
                        v: Affine::var(var),
                        adjoint: true,
                    });
                }
                WordAtom::Extractor { var, .. } => {
                    // chi(v) = int U(v, eta) chi'(eta) d eta
                    cur.word[wi] = WordAtom::Extractor { basis: to.clone(), var: fresh.clone() };
                    cur.scalars.push(ScalarAtom::Kernel {
                        name: kernel.to_string(),
                        u: Affine::var(var),
                        v: Affine::var(fresh.clone()),
                        adjoint: false,
                    });
                }
            }
            cur.binders.push(Binder { var: fresh, basis: to.clone() });
        }
        terms.push(cur);
    }
    Ok(Expr { terms })
}

// ---------------------------------------------------------------------------
// named derivation pipelines

pub fn run_derivation(
    name: &str,
    table: &BasisTable,
    opts: &DeriveOptions,
) -> Result<Vec<Derivation>, DeriveError> {
    match name {
        "qp-commutator" => qp_commutator(table, opts),
        "ladder-commutator" => ladder_commutator(table, opts),
        "weyl-annihilation" => weyl_annihilation(table, opts),
        "symplectic" => symplectic(table, opts),
        "unitary-invariance" => unitary_invariance(opts),
        "moments" => moments(table, opts),
        "density-trace" => density_trace(table, opts),
        other => Err(DeriveError::UnknownDerivation(
            other.to_string(),
            DERIVATION_NAMES.join(", "),
        )),
    }
}

fn qp_commutator(table: &BasisTable, opts: &DeriveOptions) -> Result<Vec<Derivation>, DeriveError> {
    let (q_op, p_op) = make_quadratures(table)?;
    let expected = Expr::identity(&Basis::q()).scale(&Coeff::i());

    let (dist, dist_log) =
        commutator(&q_op, &p_op, table, NormalizeMode::Distributional, opts.budget)?;
    let (faithful, faithful_log) =
        commutator(&q_op, &p_op, table, NormalizeMode::PaperFaithful, opts.budget)?;

    let modes_agree = structural_eq(&dist, &faithful);
    let boundary_note = format!(
        "modes agree: {modes_agree}; boundary terms emitted/annihilated in faithful mode: {}/{}",
        faithful_log.boundary_terms_emitted, faithful_log.boundary_terms_annihilated
    );
    let (result, log) = match opts.mode {
        NormalizeMode::Distributional => (dist, dist_log),
        NormalizeMode::PaperFaithful => (faithful, faithful_log),
    };
    let mut d = Derivation::new("qp-commutator", result, expected, log);
    d.pass = d.pass && modes_agree;
    d.notes.push(boundary_note);
    Ok(vec![d])
}

fn ladder_commutator(
    table: &BasisTable,
    opts: &DeriveOptions,
) -> Result<Vec<Derivation>, DeriveError> {
    let (lower, raise) = make_ladders(table)?;
    let identity = Expr::identity(&Basis::q());

    let (r1, l1) = commutator(&lower, &raise, table, opts.mode, opts.budget)?;
    let (r2, l2) = commutator(&lower, &lower, table, opts.mode, opts.budget)?;
    let (r3, l3) = commutator(&raise, &raise, table, opts.mode, opts.budget)?;
    Ok(vec![
        Derivation::new("ladder-commutator:lower-raise", r1, identity, l1),
        Derivation::new("ladder-commutator:lower-lower", r2, Expr::zero(), l2),
        Derivation::new("ladder-commutator:raise-raise", r3, Expr::zero(), l3),
    ])
}

/// The expected annihilation-operator symbol (q + s i p)/sqrt2.
pub fn alpha_symbol(conjugate: bool) -> Expr {
    let q_term = Term {
        word: vec![],
        scalars: vec![ScalarAtom::Mono { var: Var::new("q"), pow: 1 }],
        binders: vec![],
        coeff: Coeff::inv_sqrt2(),
    };
    let sign = if conjugate { Coeff::i().neg() } else { Coeff::i() };
    let p_term = Term {
        word: vec![],
        scalars: vec![ScalarAtom::Mono { var: Var::new("p"), pow: 1 }],
        binders: vec![],
        coeff: sign.mul(&Coeff::inv_sqrt2()),
    };
    Expr { terms: vec![q_term, p_term] }
}

fn weyl_annihilation(
    table: &BasisTable,
    opts: &DeriveOptions,
) -> Result<Vec<Derivation>, DeriveError> {
    let (lower, raise) = make_ladders(table)?;
    let sym_a = weyl_symbol(&lower, table, opts.budget)?;
    let sym_adag = weyl_symbol(&raise, table, opts.budget)?;
    let d1 = Derivation::new(
        "weyl-annihilation:lower-symbol",
        sym_a.clone(),
        alpha_symbol(false),
        NormalizeReport::default(),
    );
    let d2 = Derivation::new(
        "weyl-annihilation:raise-symbol",
        sym_adag,
        alpha_symbol(true),
        NormalizeReport::default(),
    );
    // round trip: quantizing the symbol recovers the operator
    let quantized = weyl_quantize(&sym_a, table, opts.budget)?;
    let (lower_normal, log) = normalize(&lower, table, NormalizeMode::Distributional, opts.budget)?;
    let d3 = Derivation::new("weyl-annihilation:quantize-roundtrip", quantized, lower_normal, log);
    Ok(vec![d1, d2, d3])
}

fn symplectic(table: &BasisTable, opts: &DeriveOptions) -> Result<Vec<Derivation>, DeriveError> {
    let (result, expected, symplectic, log) =
        symplectic_check(&opts.symplectic, table, opts.mode, opts.budget)?;
    let mut d = Derivation::new("symplectic", result, expected, log);
    let (a, b, c, d4) = &opts.symplectic;
    d.notes.push(format!(
        "params a={a} b={b} c={c} d={d4}; ad-bc={}; symplectic: {symplectic}",
        a * d4 - b * c
    ));
    Ok(vec![d])
}

fn unitary_invariance(opts: &DeriveOptions) -> Result<Vec<Derivation>, DeriveError> {
    let mut table = BasisTable::standard();
    table.register_unitary("V", Basis::new("nu"), Basis::new("eta"))?;
    let nu = Basis::new("nu");

    // inner product is unchanged by rebasing both sides
    let ket = Expr::ket("psi_f", &nu, true);
    let bra = Expr::bra("phi_g", &nu, true);
    let sandwich = bra.mul(&ket);
    let (direct, _) = normalize(&sandwich, &table, opts.mode, opts.budget)?;
    let rebased = rebase(&sandwich, "V", &table)?;
    let (via_v, log) = normalize(&rebased, &table, opts.mode, opts.budget)?;
    let d1 = Derivation::new("unitary-invariance:inner-product", via_v, direct, log);

    // the identity rebases to the identity of the new basis
    let rebased_id = rebase(&Expr::identity(&nu), "V", &table)?;
    let (id_result, log2) = normalize(&rebased_id, &table, opts.mode, opts.budget)?;
    let d2 = Derivation::new(
        "unitary-invariance:identity",
        id_result,
        Expr::identity(&Basis::new("eta")),
        log2,
    );

    // a rebased first moment is *not* the first moment of the new basis
    let rebased_m1 = rebase(&moment_operator(&nu, 1), "V", &table)?;
    let (m1_result, log3) = normalize(&rebased_m1, &table, opts.mode, opts.budget)?;
    let d3 = Derivation::new_unequal(
        "unitary-invariance:moment-not-diagonal",
        m1_result,
        moment_operator(&Basis::new("eta"), 1),
        log3,
        "the rebased first moment stays a dressed kernel, not a diagonal moment",
    );
    Ok(vec![d1, d2, d3])
}

fn moments(table: &BasisTable, opts: &DeriveOptions) -> Result<Vec<Derivation>, DeriveError> {
    let nu = Basis::new("nu");
    let m = |n| moment_operator(&nu, n);

    let (prod, log) = normalize(&m(1).mul(&m(1)), table, opts.mode, opts.budget)?;
    let d1 = Derivation::new("moments:m1-m1-is-m2", prod, m(2), log);

    let (m0, log2) = normalize(&m(0), table, opts.mode, opts.budget)?;
    let d2 = Derivation::new("moments:m0-is-identity", m0, Expr::identity(&nu), log2);

    let ket = Expr::ket("psi_m", &nu, true);
    let sandwich = ket.adjoint().mul(&m(1)).mul(&ket);
    let (value, log3) = normalize(&sandwich, table, opts.mode, opts.budget)?;
    let v = Var::new("nu0");
    let expected = Expr::from_term(Term {
        word: vec![],
        scalars: vec![
            ScalarAtom::coeff_fn("psi_m", v.clone()),
            ScalarAtom::CoeffFn {
                name: "psi_m".into(),
                arg: Affine::var(v.clone()),
                conj: true,
                deriv: 0,
                schwartz: true,
            },
            ScalarAtom::Mono { var: v.clone(), pow: 1 },
        ],
        binders: vec![Binder { var: v, basis: nu.clone() }],
        coeff: Coeff::one(),
    });
    let d3 = Derivation::new("moments:first-moment-value", value, expected, log3);
    Ok(vec![d1, d2, d3])
}

fn density_trace(table: &BasisTable, opts: &DeriveOptions) -> Result<Vec<Derivation>, DeriveError> {
    let nu = Basis::new("nu");
    let ket = Expr::ket("psi_d", &nu, true);
    let rho = density_pure(&ket)?;

    // tr(|psi><psi|) = int |psi(nu)|^2 dnu
    let (tr, log) = crate::rewrite::trace(&rho, table, opts.mode, opts.budget)?;
    let v = Var::new("nu0");
    let density_at = |var: &Var| -> Vec<ScalarAtom> {
        vec![
            ScalarAtom::coeff_fn("psi_d", var.clone()),
            ScalarAtom::CoeffFn {
                name: "psi_d".into(),
                arg: Affine::var(var.clone()),
                conj: true,
                deriv: 0,
                schwartz: true,
            },
        ]
    };
    let expected_tr = Expr::from_term(Term {
        word: vec![],
        scalars: density_at(&v),
        binders: vec![Binder { var: v.clone(), basis: nu.clone() }],
        coeff: Coeff::one(),
    });
    let d1 = Derivation::new("density-trace:pure-trace", tr, expected_tr, log);

    // purity tr(rho^2) for a pure state factorizes into the square form
    let (purity, log2) = crate::rewrite::trace(&rho.mul(&rho), table, opts.mode, opts.budget)?;
    let w = Var::new("nu1");
    let mut scalars = density_at(&v);
    scalars.extend(density_at(&w));
    let expected_purity = Expr::from_term(Term {
        word: vec![],
        scalars,
        binders: vec![
            Binder { var: v.clone(), basis: nu.clone() },
            Binder { var: w, basis: nu.clone() },
        ],
        coeff: Coeff::one(),
    });
    let d2 = Derivation::new("density-trace:pure-purity", purity, expected_purity, log2);

    // projector sandwich factorizes into two independent overlaps
    let p_ket = Expr::ket("proj_p", &nu, true);
    let projector = density_pure(&p_ket)?;
    let g_bra = Expr::bra("g_fn", &nu, true);
    let f_ket = Expr::ket("f_fn", &nu, true);
    let (sandwich, log3) =
        normalize(&g_bra.mul(&projector).mul(&f_ket), table, opts.mode, opts.budget)?;
    let u2 = Var::new("nu0");
    let w2 = Var::new("nu1");
    let expected_sandwich = Expr::from_term(Term {
        word: vec![],
        scalars: vec![
            ScalarAtom::CoeffFn {
                name: "g_fn".into(),
                arg: Affine::var(u2.clone()),
                conj: true,
                deriv: 0,
                schwartz: true,
            },
            ScalarAtom::coeff_fn("proj_p", u2.clone()),
            ScalarAtom::CoeffFn {
                name: "proj_p".into(),
                arg: Affine::var(w2.clone()),
                conj: true,
                deriv: 0,
                schwartz: true,
            },
            ScalarAtom::coeff_fn("f_fn", w2.clone()),
        ],
        binders: vec![
            Binder { var: u2, basis: nu.clone() },
            Binder { var: w2, basis: nu.clone() },
        ],
        coeff: Coeff::one(),
    });
    let d3 = Derivation::new("density-trace:projector-sandwich", sandwich, expected_sandwich, log3);
    Ok(vec![d1, d2, d3])
}

// ---------------------------------------------------------------------------
// assorted helpers used by tests and the CLI

/// Moment value <psi| M1^n |psi> normalized to its integral form.
pub fn moment_value(
    ket: &Expr,
    basis: &Basis,
    n: u32,
    table: &BasisTable,
    opts: &DeriveOptions,
) -> Result<Expr, DeriveError> {
    if !ket.is_ket_shaped() {
        return Err(DeriveError::Shape("ket"));
    }
    let mut acc = ket.adjoint();
    for _ in 0..n {
        acc = acc.mul(&moment_operator(basis, 1));
    }
    let (out, _) = normalize(&acc.mul(ket), table, opts.mode, opts.budget)?;
    Ok(out)
}

/// Purity and trace forms for a density operator.
pub fn purity(rho: &Expr, table: &BasisTable, opts: &DeriveOptions) -> Result<Expr, DeriveError> {
    let (out, _) = crate::rewrite::trace(&rho.mul(rho), table, opts.mode, opts.budget)?;
    Ok(out)
}

pub fn trace_norm(
    rho: &Expr,
    table: &BasisTable,
    opts: &DeriveOptions,
) -> Result<Expr, DeriveError> {
    let (out, _) = crate::rewrite::trace(rho, table, opts.mode, opts.budget)?;
    Ok(out)
}
