//! Affine combinations of index variables with exact rational coefficients.
//!
//! These are the only argument shapes the calculus ever needs: delta and
//! delta-prime arguments, coefficient-function arguments after change of
//! variables, and substitution replacements. Nonlinear arguments are
//! unrepresentable by construction.

use crate::coeff::Rat;
use crate::expr::Var;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Affine {
    /// Sorted var -> coefficient map; zero coefficients are never stored.
    pub terms: BTreeMap<Var, Rat>,
    pub constant: Rat,
}

impl Affine {
    pub fn zero() -> Self {
        Affine::default()
    }

    pub fn var(v: Var) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(v, Rat::from_integer(1.into()));
        Affine { terms, constant: Rat::zero() }
    }

    pub fn constant(c: Rat) -> Self {
        Affine { terms: BTreeMap::new(), constant: c }
    }

    pub fn with_coef(mut self, v: Var, c: Rat) -> Self {
        self.add_term(v, c);
        self
    }

    pub fn add_term(&mut self, v: Var, c: Rat) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(v).or_insert_with(Rat::zero);
        *entry += c;
        if entry.is_zero() {
            // re-borrow to remove; key lookup is cheap at these sizes
            let dead: Vec<Var> = self
                .terms
                .iter()
                .filter(|(_, c)| c.is_zero())
                .map(|(v, _)| v.clone())
                .collect();
            for v in dead {
                self.terms.remove(&v);
            }
        }
    }

    pub fn add(&self, other: &Affine) -> Affine {
        let mut out = self.clone();
        for (v, c) in &other.terms {
            out.add_term(v.clone(), c.clone());
        }
        out.constant += &other.constant;
        out
    }

    pub fn scale(&self, r: &Rat) -> Affine {
        if r.is_zero() {
            return Affine::zero();
        }
        Affine {
            terms: self.terms.iter().map(|(v, c)| (v.clone(), c * r)).collect(),
            constant: &self.constant * r,
        }
    }

    pub fn neg(&self) -> Affine {
        self.scale(&-Rat::from_integer(1.into()))
    }

    pub fn sub(&self, other: &Affine) -> Affine {
        self.add(&other.neg())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant.is_zero()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// The single variable, if this is exactly `1 * v`.
    pub fn as_plain_var(&self) -> Option<&Var> {
        if !self.constant.is_zero() || self.terms.len() != 1 {
            return None;
        }
        let (v, c) = self.terms.iter().next().unwrap();
        if c == &Rat::from_integer(1.into()) {
            Some(v)
        } else {
            None
        }
    }

    pub fn coef_of(&self, v: &Var) -> Option<&Rat> {
        self.terms.get(v)
    }

    pub fn contains(&self, v: &Var) -> bool {
        self.terms.contains_key(v)
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.terms.keys()
    }

    /// Smallest variable in the canonical order, if any.
    pub fn leading_var(&self) -> Option<&Var> {
        self.terms.keys().next()
    }

    /// Solve `self = 0` for `v`: returns the affine replacement `(-rest)/a`
    /// where `self = a*v + rest`.
    pub fn solve_for(&self, v: &Var) -> Option<Affine> {
        let a = self.terms.get(v)?.clone();
        let mut rest = self.clone();
        rest.terms.remove(v);
        Some(rest.scale(&(-a.recip())))
    }

    /// Substitute `v -> replacement` (affine), staying affine.
    pub fn substitute(&self, v: &Var, replacement: &Affine) -> Affine {
        match self.terms.get(v) {
            None => self.clone(),
            Some(c) => {
                let c = c.clone();
                let mut out = self.clone();
                out.terms.remove(v);
                out.add(&replacement.scale(&c))
            }
        }
    }

    pub fn rename(&self, from: &Var, to: &Var) -> Affine {
        self.substitute(from, &Affine::var(to.clone()))
    }
}

impl fmt::Debug for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.terms {
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let a = c.abs();
            if !a.is_integer() || a != Rat::from_integer(1.into()) {
                write!(f, "{}*", a)?;
            }
            write!(f, "{}", v.0)?;
            first = false;
        }
        if !self.constant.is_zero() || first {
            if first {
                write!(f, "{}", self.constant)?;
            } else if self.constant.is_negative() {
                write!(f, " - {}", self.constant.abs())?;
            } else {
                write!(f, " + {}", self.constant)?;
            }
        }
        Ok(())
    }
}

// Serialized as a flat list of (var, "num/den") pairs plus a constant string.
#[derive(Serialize, Deserialize)]
struct AffineWire {
    terms: Vec<(String, String)>,
    constant: String,
}

impl Serialize for Affine {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        AffineWire {
            terms: self.terms.iter().map(|(v, c)| (v.0.clone(), c.to_string())).collect(),
            constant: self.constant.to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Affine {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let w = AffineWire::deserialize(d)?;
        let mut out = Affine::zero();
        for (v, c) in w.terms {
            out.add_term(Var(v), c.parse().map_err(|e| D::Error::custom(format!("{e}")))?);
        }
        out.constant = w.constant.parse().map_err(|e| D::Error::custom(format!("{e}")))?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{rat, ratio};

    fn v(s: &str) -> Var {
        Var(s.to_string())
    }

    #[test]
    fn solve_and_substitute() {
        // 2q - q' + 3 = 0  =>  q = (q' - 3)/2
        let a = Affine::var(v("q"))
            .with_coef(v("q"), rat(1)) // 2q
            .with_coef(v("q'"), rat(-1))
            .add(&Affine::constant(rat(3)));
        let sol = a.solve_for(&v("q")).unwrap();
        assert_eq!(sol.coef_of(&v("q'")), Some(&ratio(1, 2)));
        assert_eq!(sol.constant, ratio(-3, 2));

        // Substituting the solution back kills the variable.
        let back = a.substitute(&v("q"), &sol);
        assert!(back.is_zero());
    }

    #[test]
    fn cancellation_removes_entries() {
        let a = Affine::var(v("x")).with_coef(v("x"), rat(-1));
        assert!(a.is_zero());
    }
}
