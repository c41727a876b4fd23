//! Recursive-descent parser for the ASCII Dirac-notation syntax.
//!
//! The grammar is documented in `docs/grammar.ebnf`. Basis labels are
//! recovered from the alphabetic stem of an index variable (`q'`, `q1` are in
//! basis `q`), and integral measures are written `dq`, `dp` with the measure
//! weight implied by the basis. A trailing `/2pi` on a measure is accepted
//! only when it matches the registered basis weight.

use crate::affine::Affine;
use crate::basis::BasisTable;
use crate::coeff::{Coeff, Rat};
use crate::dsl::lex::{lex, stem, LexError, Lexed, Span, Tok};
use crate::expr::{Basis, Binder, Expr, ScalarAtom, Term, Var, WordAtom};
use num_traits::{One, Zero};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub struct ParseError {
    pub message: String,
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at {}:{}: {}", self.line, self.col, self.message)
    }
}

impl From<LexError> for ParseError {
    fn from(e: LexError) -> Self {
        ParseError { message: e.message, line: e.span.line, col: e.span.col }
    }
}

pub fn parse(src: &str, table: &BasisTable) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, table };
    let e = p.parse_sum(false)?;
    if !p.at_end() {
        return Err(p.err_here("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    toks: Vec<Lexed>,
    pos: usize,
    table: &'a BasisTable,
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|l| &l.tok)
    }

    fn peek_at(&self, off: usize) -> Option<&Tok> {
        self.toks.get(self.pos + off).map(|l| &l.tok)
    }

    fn here(&self) -> Span {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|l| l.span)
            .unwrap_or(Span { line: 1, col: 1 })
    }

    fn err_here(&self, msg: impl Into<String>) -> ParseError {
        let span = self.here();
        ParseError { message: msg.into(), line: span.line, col: span.col }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|l| l.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.err_here(format!(
                "expected {what}, found {}",
                self.peek().map(|t| format!("`{t}`")).unwrap_or_else(|| "end of input".into())
            )))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err_here(format!("expected {what}"))),
        }
    }

    // sum := ['-'] product (('+'|'-') product)*
    fn parse_sum(&mut self, in_integral: bool) -> Result<Expr, ParseError> {
        let neg = self.eat(&Tok::Minus);
        let mut acc = self.parse_product(in_integral)?;
        if neg {
            acc = acc.neg();
        }
        loop {
            if self.eat(&Tok::Plus) {
                let rhs = self.parse_product(in_integral)?;
                acc = acc.add(&rhs);
            } else if self.eat(&Tok::Minus) {
                let rhs = self.parse_product(in_integral)?;
                acc = acc.sub(&rhs);
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn at_measure(&self) -> bool {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                s.len() >= 2
                    && s.starts_with('d')
                    && self.peek_at(1) != Some(&Tok::LParen)
                    && s.chars().nth(1).map(|c| c.is_ascii_alphabetic()).unwrap_or(false)
            }
            _ => false,
        }
    }

    fn starts_factor(&self) -> bool {
        matches!(
            self.peek(),
            Some(
                Tok::Pipe
                    | Tok::Lt
                    | Tok::LParen
                    | Tok::Number(_)
                    | Tok::Ident(_)
                    | Tok::Tilde
            )
        )
    }

    // product := factor (['*' | '/'] factor)*
    fn parse_product(&mut self, in_integral: bool) -> Result<Expr, ParseError> {
        let mut acc = self.parse_powered_factor()?;
        loop {
            if self.eat(&Tok::Star) {
                let rhs = self.parse_powered_factor()?;
                acc = acc.mul(&rhs);
                continue;
            }
            if self.peek() == Some(&Tok::Slash) {
                self.pos += 1;
                let rhs = self.parse_powered_factor()?;
                let c = constant_of(&rhs)
                    .and_then(|c| c.inv())
                    .ok_or_else(|| self.err_here("can only divide by invertible scalar constants"))?;
                acc = acc.scale(&c);
                continue;
            }
            if in_integral && self.at_measure() {
                break;
            }
            if self.starts_factor() {
                let rhs = self.parse_powered_factor()?;
                acc = acc.mul(&rhs);
                continue;
            }
            break;
        }
        Ok(acc)
    }

    fn parse_powered_factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.parse_factor()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let neg = self.eat(&Tok::Minus);
        let n: i64 = match self.next() {
            Some(Tok::Number(s)) => {
                s.parse::<i64>().map_err(|_| self.err_here("exponent out of range"))?
            }
            _ => return Err(self.err_here("expected integer exponent after `^`")),
        };
        let n = if neg { -n } else { n };
        apply_power(&base, n).ok_or_else(|| {
            self.err_here("`^` applies to variables and scalar constants only")
        })
    }

    fn parse_factor(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Pipe) => self.parse_ket(),
            Some(Tok::Lt) => self.parse_bra(),
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.parse_sum(false)?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Number(_)) => {
                let r = self.parse_rational()?;
                Ok(Expr::constant(Coeff::from_rat(r)))
            }
            Some(Tok::Tilde) => {
                self.pos += 1;
                let name = self.expect_ident("function name after `~`")?;
                self.parse_named_fn(name, false, true)
            }
            Some(Tok::Ident(id)) => {
                self.pos += 1;
                self.parse_ident_factor(id)
            }
            other => Err(self.err_here(format!(
                "expected an expression, found {}",
                other.map(|t| format!("`{t}`")).unwrap_or_else(|| "end of input".into())
            ))),
        }
    }

    fn parse_ket(&mut self) -> Result<Expr, ParseError> {
        self.expect(&Tok::Pipe, "`|`")?;
        let label = self.expect_ident("index label inside ket")?;
        if matches!(self.peek(), Some(Tok::Ident(_))) {
            return Err(self.err_here(
                "kets hold a single index label; operators are never placed inside kets",
            ));
        }
        self.expect(&Tok::Gt, "`>` closing the ket")?;
        Ok(tag_expr(&label, true))
    }

    fn parse_bra(&mut self) -> Result<Expr, ParseError> {
        self.expect(&Tok::Lt, "`<`")?;
        let label = self.expect_ident("index label inside bra")?;
        if matches!(self.peek(), Some(Tok::Ident(_))) {
            return Err(self.err_here(
                "bras hold in a single index label; operators are never placed inside bras",
            ));
        }
        self.expect(&Tok::Pipe, "`|` closing the bra")?;
        // braket sugar: <a|b>
        if let (Some(Tok::Ident(b)), Some(Tok::Gt)) = (self.peek().cloned(), self.peek_at(1).cloned())
        {
            self.pos += 2;
            let bra = tag_expr(&label, false);
            let ket = tag_expr(&b, true);
            return Ok(bra.mul(&ket));
        }
        Ok(tag_expr(&label, false))
    }

    fn parse_ident_factor(&mut self, id: String) -> Result<Expr, ParseError> {
        match id.as_str() {
            "int" => self.parse_integral(),
            "I" => Ok(Expr::identity(&Basis::q())),
            "i" => Ok(Expr::constant(Coeff::i())),
            "pi" => Ok(Expr::constant(Coeff::new(Rat::one(), Rat::zero(), 1, 0))),
            "sqrt2" => Ok(Expr::constant(Coeff::sqrt2())),
            "delta" => {
                self.expect(&Tok::LParen, "`(` after delta")?;
                let arg = self.parse_affine()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(scalar_expr(ScalarAtom::Delta { arg }))
            }
            "deltap" => {
                self.expect(&Tok::LParen, "`(` after deltap")?;
                let arg = self.parse_affine()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(scalar_expr(ScalarAtom::DeltaPrime { arg }))
            }
            "exp" => self.parse_exp(),
            "boundary" => self.parse_boundary(),
            "dag" => self.parse_dag(),
            "conj" => self.parse_conj(),
            "ket" | "bra" => self.parse_state_sugar(id == "ket"),
            _ => {
                if self.peek() == Some(&Tok::LParen) {
                    self.parse_named_fn(id, false, false)
                } else {
                    Ok(mono_expr(&id))
                }
            }
        }
    }

    fn parse_integral(&mut self) -> Result<Expr, ParseError> {
        let body = self.parse_sum(true)?;
        let mut binders: Vec<Binder> = Vec::new();
        while self.at_measure() {
            let m = self.expect_ident("measure")?;
            let var_name = m[1..].to_string();
            let basis = Basis::new(stem(&var_name));
            // optional `/2pi`, which must match the registered basis weight
            if self.peek() == Some(&Tok::Slash) {
                if let (Some(Tok::Number(n)), Some(Tok::Ident(p))) =
                    (self.peek_at(1).cloned(), self.peek_at(2).cloned())
                {
                    if n == "2" && p == "pi" {
                        self.pos += 3;
                        if self.table.measure(&basis) != Coeff::inv_two_pi() {
                            return Err(self.err_here(format!(
                                "measure suffix /2pi does not match the registered weight of basis `{}`",
                                basis.0
                            )));
                        }
                    }
                }
            }
            binders.push(Binder { var: Var(var_name), basis });
        }
        if binders.is_empty() {
            return Err(self.err_here("expected at least one measure (e.g. `dq`) closing `int`"));
        }
        let mut terms = Vec::new();
        for t in &body.terms {
            let mut t = t.clone();
            for b in &binders {
                if t.is_bound(&b.var) {
                    return Err(self.err_here(format!(
                        "variable `{}` is already bound in this integral",
                        b.var.0
                    )));
                }
                t.binders.push(b.clone());
            }
            terms.push(t);
        }
        Ok(Expr { terms })
    }

    // exp( [-] i [* rational] [* var [* var]] )
    fn parse_exp(&mut self) -> Result<Expr, ParseError> {
        self.expect(&Tok::LParen, "`(` after exp")?;
        let neg = self.eat(&Tok::Minus);
        let i_tok = self.expect_ident("`i` starting a phase exponent")?;
        if i_tok != "i" {
            return Err(self.err_here("phase exponents have the form exp(i*...), exp(-i*...)"));
        }
        let mut factor: Option<Rat> = None;
        let mut vars: Vec<Var> = Vec::new();
        while self.eat(&Tok::Star) {
            match self.peek().cloned() {
                Some(Tok::Number(_)) => {
                    if factor.is_some() || !vars.is_empty() {
                        return Err(self.err_here("numeric factor must precede variables in exp()"));
                    }
                    factor = Some(self.parse_rational()?);
                }
                Some(Tok::Ident(v)) => {
                    self.pos += 1;
                    vars.push(Var(v));
                    if vars.len() > 2 {
                        return Err(self.err_here("phases are at most bilinear in index variables"));
                    }
                }
                _ => return Err(self.err_here("expected a number or variable in exp()")),
            }
        }
        self.expect(&Tok::RParen, "`)` closing exp")?;
        let mut k = factor.unwrap_or_else(Rat::one);
        if neg {
            k = -k;
        }
        let atom = match vars.len() {
            0 => ScalarAtom::PhaseConst { coef: k },
            1 => ScalarAtom::LinPhase { coef: k, var: vars[0].clone() },
            _ => {
                let (u, v) = if vars[0] <= vars[1] {
                    (vars[0].clone(), vars[1].clone())
                } else {
                    (vars[1].clone(), vars[0].clone())
                };
                ScalarAtom::Phase { coef: k, u, v }
            }
        };
        Ok(scalar_expr(atom))
    }

    fn parse_boundary(&mut self) -> Result<Expr, ParseError> {
        self.expect(&Tok::LBracket, "`[` after boundary")?;
        let v = self.expect_ident("limit variable")?;
        self.expect(&Tok::RBracket, "`]`")?;
        self.expect(&Tok::LParen, "`(`")?;
        let payload = self.parse_sum(false)?;
        self.expect(&Tok::RParen, "`)` closing boundary payload")?;
        Ok(scalar_expr(ScalarAtom::Boundary { limit_var: Var(v), payload: Box::new(payload) }))
    }

    fn parse_dag(&mut self) -> Result<Expr, ParseError> {
        // dag(U)(a, b) for a registered unitary kernel is a kernel atom;
        // dag(expr) is the adjoint of the inner expression.
        if let (Some(Tok::LParen), Some(Tok::Ident(name)), Some(Tok::RParen), Some(Tok::LParen)) = (
            self.peek().cloned(),
            self.peek_at(1).cloned(),
            self.peek_at(2).cloned(),
            self.peek_at(3).cloned(),
        ) {
            if self.table.is_unitary(&name) {
                self.pos += 4;
                let (u, v) = self.parse_two_affine_args()?;
                return Ok(scalar_expr(ScalarAtom::Kernel { name, u, v, adjoint: true }));
            }
        }
        self.expect(&Tok::LParen, "`(` after dag")?;
        let e = self.parse_sum(false)?;
        self.expect(&Tok::RParen, "`)` closing dag")?;
        Ok(e.adjoint())
    }

    fn parse_conj(&mut self) -> Result<Expr, ParseError> {
        self.expect(&Tok::LParen, "`(` after conj")?;
        let tilde = self.eat(&Tok::Tilde);
        let raw = self.expect_ident("function name inside conj")?;
        self.expect(&Tok::RParen, "`)`")?;
        self.expect(&Tok::LParen, "`(` opening arguments")?;
        if self.table.is_unitary(&raw) {
            let (a, b) = self.parse_two_affine_args()?;
            // conj U(a,b) = dag(U)(b,a)
            return Ok(scalar_expr(ScalarAtom::Kernel { name: raw, u: b, v: a, adjoint: true }));
        }
        self.parse_named_fn_open(raw, true, tilde)
    }

    fn parse_state_sugar(&mut self, ket: bool) -> Result<Expr, ParseError> {
        self.expect(&Tok::LParen, "`(` after ket/bra")?;
        let name = self.expect_ident("coefficient function name")?;
        let basis = if self.eat(&Tok::Comma) {
            Basis::new(self.expect_ident("basis label")?)
        } else {
            Basis::q()
        };
        self.expect(&Tok::RParen, "`)`")?;
        let e = Expr::ket(&name, &basis, true);
        Ok(if ket { e } else { e.adjoint() })
    }

    fn parse_named_fn(&mut self, raw: String, conj: bool, tilde: bool) -> Result<Expr, ParseError> {
        self.expect(&Tok::LParen, "`(` opening arguments")?;
        self.parse_named_fn_open(raw, conj, tilde)
    }

    /// Parse a named function whose `(` has been consumed. `tilde` marks a
    /// non-Schwartz coefficient function.
    fn parse_named_fn_open(
        &mut self,
        raw: String,
        conj: bool,
        tilde: bool,
    ) -> Result<Expr, ParseError> {
        let deriv = raw.chars().rev().take_while(|c| *c == '\'').count() as u32;
        let name = raw.trim_end_matches('\'').to_string();

        let first = self.parse_affine()?;
        if self.eat(&Tok::Comma) {
            let second = self.parse_affine()?;
            self.expect(&Tok::RParen, "`)` closing arguments")?;
            if deriv > 0 {
                return Err(self.err_here("derivatives of two-slot kernels are not supported"));
            }
            if self.table.is_unitary(&name) {
                return Ok(scalar_expr(ScalarAtom::Kernel {
                    name,
                    u: first,
                    v: second,
                    adjoint: false,
                }));
            }
            if let Some(info) = self.table.kernel2(&name) {
                return Ok(scalar_expr(ScalarAtom::Kernel2 {
                    name,
                    u: first,
                    v: second,
                    conj,
                    hermitian: info.hermitian,
                }));
            }
            return Err(self.err_here(format!("two-slot kernel `{name}` is not registered")));
        }
        self.expect(&Tok::RParen, "`)` closing arguments")?;
        Ok(scalar_expr(ScalarAtom::CoeffFn { name, arg: first, conj, deriv, schwartz: !tilde }))
    }

    fn parse_two_affine_args(&mut self) -> Result<(Affine, Affine), ParseError> {
        let a = self.parse_affine()?;
        self.expect(&Tok::Comma, "`,` between kernel arguments")?;
        let b = self.parse_affine()?;
        self.expect(&Tok::RParen, "`)` closing kernel arguments")?;
        Ok((a, b))
    }

    // affine := ['-'] term (('+'|'-') term)*, term := [rational '*'] ident | rational
    fn parse_affine(&mut self) -> Result<Affine, ParseError> {
        let mut out = Affine::zero();
        let mut sign = if self.eat(&Tok::Minus) { -Rat::one() } else { Rat::one() };
        loop {
            match self.peek().cloned() {
                Some(Tok::Number(_)) => {
                    let r = self.parse_rational()?;
                    if self.eat(&Tok::Star) {
                        let v = self.expect_ident("variable after coefficient")?;
                        out.add_term(Var(v), &sign * r);
                    } else {
                        out.constant += &sign * r;
                    }
                }
                Some(Tok::Ident(v)) => {
                    self.pos += 1;
                    out.add_term(Var(v), sign.clone());
                }
                _ => return Err(self.err_here("expected a variable or number in affine argument")),
            }
            if self.eat(&Tok::Plus) {
                sign = Rat::one();
            } else if self.eat(&Tok::Minus) {
                sign = -Rat::one();
            } else {
                break;
            }
        }
        Ok(out)
    }

    fn parse_rational(&mut self) -> Result<Rat, ParseError> {
        let num = match self.next() {
            Some(Tok::Number(s)) => s,
            _ => return Err(self.err_here("expected a number")),
        };
        let num: i64 = num.parse().map_err(|_| self.err_here("number out of range"))?;
        if self.peek() == Some(&Tok::Slash) {
            if let Some(Tok::Number(d)) = self.peek_at(1).cloned() {
                self.pos += 2;
                let den: i64 = d.parse().map_err(|_| self.err_here("number out of range"))?;
                if den == 0 {
                    return Err(self.err_here("zero denominator"));
                }
                return Ok(crate::coeff::ratio(num, den));
            }
        }
        Ok(crate::coeff::rat(num))
    }
}

fn tag_expr(label: &str, ket: bool) -> Expr {
    let basis = Basis::new(stem(label));
    let var = Var(label.to_string());
    let atom = if ket {
        WordAtom::Tag { basis, var }
    } else {
        WordAtom::Extractor { basis, var }
    };
    Expr::from_term(Term {
        word: vec![atom],
        scalars: vec![],
        binders: vec![],
        coeff: Coeff::one(),
    })
}

fn scalar_expr(atom: ScalarAtom) -> Expr {
    Expr::from_term(Term {
        word: vec![],
        scalars: vec![atom],
        binders: vec![],
        coeff: Coeff::one(),
    })
}

fn mono_expr(name: &str) -> Expr {
    scalar_expr(ScalarAtom::Mono { var: Var(name.to_string()), pow: 1 })
}

/// The coefficient of a pure-constant expression, if it is one.
fn constant_of(e: &Expr) -> Option<Coeff> {
    if e.terms.len() != 1 {
        return None;
    }
    let t = &e.terms[0];
    if t.word.is_empty() && t.scalars.is_empty() && t.binders.is_empty() {
        Some(t.coeff.clone())
    } else {
        None
    }
}

fn apply_power(e: &Expr, n: i64) -> Option<Expr> {
    if let Some(c) = constant_of(e) {
        let mut acc = Coeff::one();
        let base = if n < 0 { c.inv()? } else { c };
        for _ in 0..n.unsigned_abs() {
            acc = acc.mul(&base);
        }
        return Some(Expr::constant(acc));
    }
    // single monomial: adjust the power
    if e.terms.len() == 1 {
        let t = &e.terms[0];
        if t.word.is_empty() && t.binders.is_empty() && t.scalars.len() == 1 && t.coeff.is_one() {
            if let ScalarAtom::Mono { var, pow } = &t.scalars[0] {
                return Some(scalar_expr(ScalarAtom::Mono { var: var.clone(), pow: pow * n }));
            }
        }
    }
    None
}
