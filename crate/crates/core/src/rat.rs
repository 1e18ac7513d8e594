//! Exact rational scalars.
//!
//! Every distance and predicate value in this crate is a [`Rat`]. The type is a
//! thin wrapper around a reduced `Ratio<i128>` whose arithmetic is checked:
//! an overflow panics instead of wrapping, so a result is either exact or the
//! computation stops loudly. Domain values (distances, predicate values) are
//! nonnegative; signed values only appear as intermediate differences.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, Zero};
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rat(Ratio<i128>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRatError {
    #[error("rational must have the form num/den, got {0:?}")]
    Shape(String),
    #[error("bad integer in rational {0:?}")]
    Integer(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
    #[error("negative rational {0:?}")]
    Negative(String),
}

impl Rat {
    pub const ZERO: Rat = Rat(Ratio::new_raw(0, 1));
    pub const ONE: Rat = Rat(Ratio::new_raw(1, 1));

    /// `numer/denom` in lowest terms. Panics on a zero denominator.
    pub fn new(numer: i128, denom: i128) -> Rat {
        assert!(denom != 0, "zero denominator");
        Rat(Ratio::new(numer, denom))
    }

    pub fn int(n: i128) -> Rat {
        Rat(Ratio::from_integer(n))
    }

    /// `2^-k`.
    pub fn pow2_neg(k: u32) -> Rat {
        assert!(k < 120, "2^-{k} does not fit the rational backend");
        Rat(Ratio::new_raw(1, 1i128 << k))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn abs(self) -> Rat {
        Rat(self.0.abs())
    }

    /// `max(self - other, 0)`.
    pub fn sat_sub(self, other: Rat) -> Rat {
        let d = self - other;
        if d.is_negative() {
            Rat::ZERO
        } else {
            d
        }
    }

    pub fn abs_diff(self, other: Rat) -> Rat {
        (self - other).abs()
    }

    pub fn half(self) -> Rat {
        self / Rat::int(2)
    }
}

impl Add for Rat {
    type Output = Rat;
    fn add(self, rhs: Rat) -> Rat {
        Rat(self.0.checked_add(&rhs.0).expect("rational overflow in add"))
    }
}

impl Sub for Rat {
    type Output = Rat;
    fn sub(self, rhs: Rat) -> Rat {
        Rat(self.0.checked_sub(&rhs.0).expect("rational overflow in sub"))
    }
}

impl Mul for Rat {
    type Output = Rat;
    fn mul(self, rhs: Rat) -> Rat {
        Rat(self.0.checked_mul(&rhs.0).expect("rational overflow in mul"))
    }
}

impl Div for Rat {
    type Output = Rat;
    fn div(self, rhs: Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(self.0.checked_div(&rhs.0).expect("rational overflow in div"))
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

impl AddAssign for Rat {
    fn add_assign(&mut self, rhs: Rat) {
        *self = *self + rhs;
    }
}

impl SubAssign for Rat {
    fn sub_assign(&mut self, rhs: Rat) {
        *self = *self - rhs;
    }
}

impl Sum for Rat {
    fn sum<I: Iterator<Item = Rat>>(iter: I) -> Rat {
        iter.fold(Rat::ZERO, |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rat> for Rat {
    fn sum<I: Iterator<Item = &'a Rat>>(iter: I) -> Rat {
        iter.fold(Rat::ZERO, |acc, x| acc + *x)
    }
}

impl From<i128> for Rat {
    fn from(n: i128) -> Rat {
        Rat::int(n)
    }
}

impl PartialEq<i128> for Rat {
    fn eq(&self, other: &i128) -> bool {
        *self == Rat::int(*other)
    }
}

impl PartialOrd<i128> for Rat {
    fn partial_cmp(&self, other: &i128) -> Option<Ordering> {
        Some(self.cmp(&Rat::int(*other)))
    }
}

/// Canonical text form: always `num/den`, lowest terms, positive denominator.
impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl Rat {
    /// Parses a signed `num/den`. File formats use [`FromStr`], which rejects
    /// negative values.
    pub fn parse_signed(s: &str) -> Result<Rat, ParseRatError> {
        let (n, d) = s
            .split_once('/')
            .ok_or_else(|| ParseRatError::Shape(s.to_string()))?;
        let digits = |t: &str| {
            let body = t.strip_prefix('-').unwrap_or(t);
            !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit())
        };
        if !digits(n) || !d.bytes().all(|b| b.is_ascii_digit()) || d.is_empty() {
            return Err(ParseRatError::Shape(s.to_string()));
        }
        let n: i128 = n.parse().map_err(|_| ParseRatError::Integer(s.to_string()))?;
        let d: i128 = d.parse().map_err(|_| ParseRatError::Integer(s.to_string()))?;
        if d == 0 {
            return Err(ParseRatError::ZeroDenominator(s.to_string()));
        }
        Ok(Rat::new(n, d))
    }
}

impl FromStr for Rat {
    type Err = ParseRatError;

    fn from_str(s: &str) -> Result<Rat, ParseRatError> {
        let r = Rat::parse_signed(s)?;
        if r.is_negative() {
            return Err(ParseRatError::Negative(s.to_string()));
        }
        Ok(r)
    }
}
