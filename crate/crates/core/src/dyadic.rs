//! Exact arithmetic on dyadic rationals, the only number type the solver ever
//! needs: every probability here is uniform over a power-of-two space and every
//! reward is a finite binary fraction, so sums, products and comparisons stay
//! closed and exact.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::error::Error;

/// A dyadic rational `num / 2^exp` in canonical form: either `exp == 0` or
/// `num` is odd. The numerator is arbitrary precision because exponents grow
/// multiplicatively under protocol composition.
///
/// ```
/// use rplab::dyadic::Dyadic;
/// let x: Dyadic = "5/2^3".parse().unwrap();
/// assert_eq!((&x + &x).to_string(), "5/2^2");
/// ```
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Dyadic {
    num: BigInt,
    exp: u32,
}

impl Dyadic {
    /// Builds `num / 2^exp` and reduces it to canonical form.
    pub fn new(num: impl Into<BigInt>, exp: u32) -> Self {
        let mut d = Dyadic {
            num: num.into(),
            exp,
        };
        d.normalize();
        d
    }

    pub fn from_int(n: i64) -> Self {
        Dyadic::new(n, 0)
    }

    pub fn zero() -> Self {
        Dyadic::default()
    }

    pub fn one() -> Self {
        Dyadic::from_int(1)
    }

    /// `1 / 2^e`.
    pub fn pow2_inv(e: u32) -> Self {
        Dyadic::new(1, e)
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.num.is_negative()
    }

    pub fn numerator(&self) -> &BigInt {
        &self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().unwrap_or(0);
        let shift = (self.exp as u64).min(tz) as u32;
        if shift > 0 {
            self.num >>= shift;
            self.exp -= shift;
        }
    }

    /// Multiplies by `2^shift` (negative shifts divide).
    pub fn mul_pow2(&self, shift: i64) -> Self {
        if self.num.is_zero() {
            return Dyadic::zero();
        }
        if shift >= 0 {
            Dyadic::new(&self.num << shift as u64, self.exp)
        } else {
            let e = self.exp as i64 - shift;
            assert!(e <= u32::MAX as i64, "dyadic exponent overflow");
            Dyadic::new(self.num.clone(), e as u32)
        }
    }

    /// Multiplies by a machine integer without going through `Dyadic::from_int`.
    pub fn scale_int(&self, k: u64) -> Self {
        Dyadic::new(&self.num * k, self.exp)
    }

    /// Exact division by a positive integer. Returns `None` when the odd part
    /// of `d` does not divide the numerator, i.e. the quotient is not dyadic.
    pub fn div_exact(&self, d: u64) -> Option<Self> {
        assert!(d > 0, "division by zero");
        let tz = d.trailing_zeros();
        let odd = d >> tz;
        let shifted_exp = self.exp as u64 + tz as u64;
        if shifted_exp > u32::MAX as u64 {
            return None;
        }
        if odd == 1 {
            return Some(Dyadic::new(self.num.clone(), shifted_exp as u32));
        }
        let odd = BigInt::from(odd);
        if (&self.num % &odd).is_zero() {
            Some(Dyadic::new(&self.num / &odd, shifted_exp as u32))
        } else {
            None
        }
    }

    /// `self * 2^p` as an integer, if `self` lies on the `2^-p` grid.
    pub fn numerator_at(&self, p: u32) -> Option<BigInt> {
        if self.exp <= p {
            Some(&self.num << (p - self.exp) as u64)
        } else {
            None
        }
    }

    pub fn abs(&self) -> Self {
        Dyadic {
            num: self.num.abs(),
            exp: self.exp,
        }
    }

    pub fn square(&self) -> Self {
        self * self
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Dyadic::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// True when `0 <= self <= 1`, the legal reward range.
    pub fn in_unit_interval(&self) -> bool {
        !self.is_negative() && *self <= Dyadic::one()
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let m = self.exp.max(other.exp);
        let a = &self.num << (m - self.exp) as u64;
        let b = &other.num << (m - other.exp) as u64;
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let m = self.exp.max(rhs.exp);
        let a = &self.num << (m - self.exp) as u64;
        let b = &rhs.num << (m - rhs.exp) as u64;
        Dyadic::new(a + b, m)
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        let m = self.exp.max(rhs.exp);
        let a = &self.num << (m - self.exp) as u64;
        let b = &rhs.num << (m - rhs.exp) as u64;
        Dyadic::new(a - b, m)
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        let e = self.exp as u64 + rhs.exp as u64;
        assert!(e <= u32::MAX as u64, "dyadic exponent overflow");
        Dyadic::new(&self.num * &rhs.num, e as u32)
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic {
            num: -&self.num,
            exp: self.exp,
        }
    }
}

macro_rules! forward_owned {
    ($trait:ident, $method:ident) => {
        impl $trait for Dyadic {
            type Output = Dyadic;
            fn $method(self, rhs: Dyadic) -> Dyadic {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Dyadic> for Dyadic {
            type Output = Dyadic;
            fn $method(self, rhs: &Dyadic) -> Dyadic {
                (&self).$method(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        -&self
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.num, self.exp)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Dyadic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::DyadicParse(s.to_string());
        let (num_part, exp_part) = match s.split_once('/') {
            Some((n, rest)) => {
                let e = rest.strip_prefix("2^").ok_or_else(bad)?;
                (n, Some(e))
            }
            None => (s, None),
        };
        let valid_int = |t: &str| {
            let t = t.strip_prefix('-').unwrap_or(t);
            !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit())
        };
        if !valid_int(num_part) {
            return Err(bad());
        }
        let num: BigInt = num_part.parse().map_err(|_| bad())?;
        let exp: u32 = match exp_part {
            Some(e) => {
                if e.is_empty() || !e.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(bad());
                }
                e.parse().map_err(|_| bad())?
            }
            None => 0,
        };
        Ok(Dyadic::new(num, exp))
    }
}

impl serde::Serialize for Dyadic {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Dyadic {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A polynomial with dyadic coefficients, stored low degree first with
/// trailing zero coefficients stripped.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct DyadicPolynomial {
    coeffs: Vec<Dyadic>,
}

impl DyadicPolynomial {
    pub fn new(mut coeffs: Vec<Dyadic>) -> Self {
        while coeffs.last().is_some_and(Dyadic::is_zero) {
            coeffs.pop();
        }
        DyadicPolynomial { coeffs }
    }

    pub fn zero() -> Self {
        DyadicPolynomial::default()
    }

    pub fn constant(c: Dyadic) -> Self {
        DyadicPolynomial::new(vec![c])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the polynomial; the zero polynomial has none.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[Dyadic] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> Dyadic {
        self.coeffs.get(i).cloned().unwrap_or_else(Dyadic::zero)
    }

    /// Horner evaluation, exact.
    pub fn eval(&self, x: &Dyadic) -> Dyadic {
        let mut acc = Dyadic::zero();
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * x) + c;
        }
        acc
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..len).map(|i| &self.coeff(i) + &rhs.coeff(i)).collect();
        DyadicPolynomial::new(coeffs)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..len).map(|i| &self.coeff(i) - &rhs.coeff(i)).collect();
        DyadicPolynomial::new(coeffs)
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return DyadicPolynomial::zero();
        }
        let mut coeffs = vec![Dyadic::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                coeffs[i + j] = &coeffs[i + j] + &(a * b);
            }
        }
        DyadicPolynomial::new(coeffs)
    }

    pub fn scale(&self, c: &Dyadic) -> Self {
        DyadicPolynomial::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// Multiplies by `x^k`.
    pub fn shift_up(&self, k: usize) -> Self {
        if self.is_zero() {
            return DyadicPolynomial::zero();
        }
        let mut coeffs = vec![Dyadic::zero(); k];
        coeffs.extend(self.coeffs.iter().cloned());
        DyadicPolynomial::new(coeffs)
    }
}
