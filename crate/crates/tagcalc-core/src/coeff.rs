//! Exact scalar coefficients: complex rationals with tracked powers of pi and
//! sqrt(2).
//!
//! The 2*pi bookkeeping of the orthogonality/completeness conventions has to
//! be exact or identities like the kernel trace silently break, so the
//! symbolic layer never touches floating point. A coefficient is
//! `(re + im*i) * pi^pi_pow * sqrt2^rt2_pow` with `rt2_pow` normalized into
//! {0, 1} (pairs of sqrt(2) fold into the rational part).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

pub type Rat = BigRational;

/// Build a rational from an integer.
pub fn rat(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

/// Build a rational from a numerator/denominator pair.
pub fn ratio(num: i64, den: i64) -> Rat {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coeff {
    pub re: Rat,
    pub im: Rat,
    /// Integer power of pi.
    pub pi_pow: i32,
    /// Power of sqrt(2), normalized to 0 or 1.
    pub rt2_pow: i32,
}

impl Coeff {
    pub fn new(re: Rat, im: Rat, pi_pow: i32, rt2_pow: i32) -> Self {
        Coeff { re, im, pi_pow, rt2_pow }.normalized()
    }

    pub fn zero() -> Self {
        Coeff { re: Rat::zero(), im: Rat::zero(), pi_pow: 0, rt2_pow: 0 }
    }

    pub fn one() -> Self {
        Coeff { re: Rat::one(), im: Rat::zero(), pi_pow: 0, rt2_pow: 0 }
    }

    pub fn i() -> Self {
        Coeff { re: Rat::zero(), im: Rat::one(), pi_pow: 0, rt2_pow: 0 }
    }

    pub fn from_int(n: i64) -> Self {
        Coeff { re: rat(n), im: Rat::zero(), pi_pow: 0, rt2_pow: 0 }
    }

    pub fn from_rat(r: Rat) -> Self {
        Coeff { re: r, im: Rat::zero(), pi_pow: 0, rt2_pow: 0 }
    }

    /// 2*pi, the delta scale of an unbiased dual basis.
    pub fn two_pi() -> Self {
        Coeff { re: rat(2), im: Rat::zero(), pi_pow: 1, rt2_pow: 0 }
    }

    /// 1/(2*pi), the matching measure weight.
    pub fn inv_two_pi() -> Self {
        Coeff { re: ratio(1, 2), im: Rat::zero(), pi_pow: -1, rt2_pow: 0 }
    }

    /// 1/sqrt(2), tracked exactly as sqrt2/2.
    pub fn inv_sqrt2() -> Self {
        Coeff::new(Rat::one(), Rat::zero(), 0, -1)
    }

    pub fn sqrt2() -> Self {
        Coeff { re: Rat::one(), im: Rat::zero(), pi_pow: 0, rt2_pow: 1 }
    }

    fn normalized(mut self) -> Self {
        if self.re.is_zero() && self.im.is_zero() {
            return Coeff::zero();
        }
        // sqrt2^2 = 2 folds into the rational part; keep rt2_pow in {0,1}.
        let m = self.rt2_pow.rem_euclid(2);
        let half_excess = (self.rt2_pow - m) / 2;
        if half_excess != 0 {
            let factor = pow2_rat(half_excess);
            self.re *= &factor;
            self.im *= factor;
        }
        self.rt2_pow = m;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero() && self.pi_pow == 0 && self.rt2_pow == 0
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn mul(&self, other: &Coeff) -> Coeff {
        if self.is_zero() || other.is_zero() {
            return Coeff::zero();
        }
        let re = &self.re * &other.re - &self.im * &other.im;
        let im = &self.re * &other.im + &self.im * &other.re;
        Coeff { re, im, pi_pow: self.pi_pow + other.pi_pow, rt2_pow: self.rt2_pow + other.rt2_pow }
            .normalized()
    }

    pub fn mul_rat(&self, r: &Rat) -> Coeff {
        if r.is_zero() {
            return Coeff::zero();
        }
        Coeff {
            re: &self.re * r,
            im: &self.im * r,
            pi_pow: self.pi_pow,
            rt2_pow: self.rt2_pow,
        }
    }

    /// Addition merges only coefficients with matching pi/sqrt2 powers; terms
    /// whose powers differ stay separate in the enclosing formal sum.
    pub fn add(&self, other: &Coeff) -> Option<Coeff> {
        if self.is_zero() {
            return Some(other.clone());
        }
        if other.is_zero() {
            return Some(self.clone());
        }
        if self.pi_pow != other.pi_pow || self.rt2_pow != other.rt2_pow {
            return None;
        }
        let c = Coeff {
            re: &self.re + &other.re,
            im: &self.im + &other.im,
            pi_pow: self.pi_pow,
            rt2_pow: self.rt2_pow,
        };
        Some(if c.re.is_zero() && c.im.is_zero() { Coeff::zero() } else { c })
    }

    pub fn neg(&self) -> Coeff {
        Coeff { re: -self.re.clone(), im: -self.im.clone(), pi_pow: self.pi_pow, rt2_pow: self.rt2_pow }
    }

    pub fn conj(&self) -> Coeff {
        Coeff { re: self.re.clone(), im: -self.im.clone(), pi_pow: self.pi_pow, rt2_pow: self.rt2_pow }
    }

    /// Multiplicative inverse; only defined for pure real or pure imaginary
    /// values, which is all the rewrite engine ever divides by.
    pub fn inv(&self) -> Option<Coeff> {
        if self.is_zero() {
            return None;
        }
        if self.im.is_zero() {
            Some(Coeff::new(self.re.recip(), Rat::zero(), -self.pi_pow, -self.rt2_pow))
        } else if self.re.is_zero() {
            Some(Coeff::new(Rat::zero(), -self.im.recip(), -self.pi_pow, -self.rt2_pow))
        } else {
            None
        }
    }

    /// Approximate numeric value, used only by numeric evaluators and display
    /// helpers, never by the rewrite engine.
    pub fn to_f64(&self) -> (f64, f64) {
        let base = std::f64::consts::PI.powi(self.pi_pow)
            * std::f64::consts::SQRT_2.powi(self.rt2_pow);
        (rat_f64(&self.re) * base, rat_f64(&self.im) * base)
    }
}

fn pow2_rat(p: i32) -> Rat {
    let two = rat(2);
    let mut acc = Rat::one();
    for _ in 0..p.unsigned_abs() {
        acc *= &two;
    }
    if p < 0 {
        acc.recip()
    } else {
        acc
    }
}

pub fn rat_f64(r: &Rat) -> f64 {
    let num = r.numer().to_string().parse::<f64>().unwrap_or(f64::NAN);
    let den = r.denom().to_string().parse::<f64>().unwrap_or(f64::NAN);
    num / den
}

/// Serde adapter rendering rationals as "num/den" strings.
pub mod rat_serde {
    use super::Rat;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        s.parse::<Rat>().map_err(|e| D::Error::custom(e.to_string()))
    }
}

impl fmt::Debug for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coeff({} + {}i, pi^{}, rt2^{})", self.re, self.im, self.pi_pow, self.rt2_pow)
    }
}

// Rationals serialize as "num/den" strings so the JSON schema stays stable
// and readable regardless of magnitude.
#[derive(Serialize, Deserialize)]
struct CoeffWire {
    re: String,
    im: String,
    pi: i32,
    sqrt2: i32,
}

impl Serialize for Coeff {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CoeffWire {
            re: self.re.to_string(),
            im: self.im.to_string(),
            pi: self.pi_pow,
            sqrt2: self.rt2_pow,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Coeff {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = CoeffWire::deserialize(d)?;
        let re = w.re.parse::<BigRational>().map_err(|e| D::Error::custom(e.to_string()))?;
        let im = w.im.parse::<BigRational>().map_err(|e| D::Error::custom(e.to_string()))?;
        Ok(Coeff::new(re, im, w.pi, w.sqrt2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt2_powers_fold_into_rationals() {
        let c = Coeff::new(Rat::one(), Rat::zero(), 0, 3);
        assert_eq!(c.rt2_pow, 1);
        assert_eq!(c.re, rat(2));

        let inv = Coeff::inv_sqrt2();
        assert_eq!(inv.rt2_pow, 1);
        assert_eq!(inv.re, ratio(1, 2));

        // 1/sqrt2 * 1/sqrt2 = 1/2
        let half = inv.mul(&inv);
        assert_eq!(half, Coeff::new(ratio(1, 2), Rat::zero(), 0, 0));
    }

    #[test]
    fn two_over_sqrt2_is_sqrt2() {
        let c = Coeff::from_int(2).mul(&Coeff::inv_sqrt2());
        assert_eq!(c, Coeff::sqrt2());
    }

    #[test]
    fn measure_times_delta_scale_is_exactly_one() {
        assert!(Coeff::two_pi().mul(&Coeff::inv_two_pi()).is_one());
    }

    #[test]
    fn add_requires_matching_powers() {
        assert!(Coeff::one().add(&Coeff::two_pi()).is_none());
        let s = Coeff::i().add(&Coeff::i()).unwrap();
        assert_eq!(s, Coeff::new(Rat::zero(), rat(2), 0, 0));
        assert!(Coeff::i().add(&Coeff::i().neg()).unwrap().is_zero());
    }

    #[test]
    fn conj_and_inv() {
        let c = Coeff::new(Rat::zero(), rat(3), 1, 1);
        assert_eq!(c.conj().im, rat(-3));
        let inv = c.inv().unwrap();
        assert!(c.mul(&inv).is_one());
        assert!(Coeff::new(Rat::one(), Rat::one(), 0, 0).inv().is_none());
    }
}
