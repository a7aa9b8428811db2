//! Exact rationals and their `"p/q"` string form used in reports and config files.

use num_bigint::{BigInt, BigUint};
use num_rational::{BigRational, Ratio};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A probability or other small nonnegative rational, as used in model parameters.
pub type Prob = Ratio<u64>;

pub fn parse_prob(s: &str) -> Result<Prob, String> {
    let s = s.trim();
    let r: Prob = s.parse().map_err(|_| format!("`{s}` is not a rational of the form p/q"))?;
    Ok(r)
}

pub fn parse_big(s: &str) -> Result<BigRational, String> {
    let s = s.trim();
    s.parse().map_err(|_| format!("`{s}` is not a rational of the form p/q"))
}

pub fn prob_to_big(p: Prob) -> BigRational {
    BigRational::new(BigInt::from(*p.numer()), BigInt::from(*p.denom()))
}

pub fn big_to_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn prob_to_string(p: &Prob) -> String {
    format!("{}/{}", p.numer(), p.denom())
}

/// `count / total` as an exact rational; `0/1` when `total` is zero.
pub fn fraction(count: u64, total: u64) -> Prob {
    if total == 0 {
        Prob::zero()
    } else {
        Prob::new(count, total)
    }
}

/// `floor(r)` for a nonnegative rational.
pub fn floor_nonneg(r: &BigRational) -> BigUint {
    debug_assert!(!r.is_negative());
    r.floor().to_integer().magnitude().clone()
}

/// A [`Prob`] that serializes as its `"p/q"` string, for use inside collections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fraction(#[serde(with = "prob_str")] pub Prob);

impl Fraction {
    pub fn new(numer: u64, denom: u64) -> Self {
        Fraction(Prob::new(numer, denom))
    }

    pub fn to_big(self) -> BigRational {
        prob_to_big(self.0)
    }
}

/// `p/q`, or just `p` for integers.
impl std::fmt::Display for Fraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if *self.0.denom() == 1 {
            write!(f, "{}", self.0.numer())
        } else {
            f.write_str(&prob_to_string(&self.0))
        }
    }
}

impl std::str::FromStr for Fraction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_prob(s).map(Fraction)
    }
}

pub mod prob_str {
    use super::*;

    pub fn serialize<S: Serializer>(p: &Prob, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&prob_to_string(p))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Prob, D::Error> {
        let s = String::deserialize(d)?;
        parse_prob(&s).map_err(serde::de::Error::custom)
    }
}

pub mod big_str {
    use super::*;

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&big_to_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_big(&s).map_err(serde::de::Error::custom)
    }
}

pub mod biguint_str {
    use super::*;

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
