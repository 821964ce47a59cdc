//! Exact probabilities and the conversion to logarithms at the reporting boundary.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn ratio(num: u64, den: u64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: u64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn from_biguint(v: &BigUint) -> Rational {
    Rational::from_integer(BigInt::from_biguint(Sign::Plus, v.clone()))
}

/// Formats as `num/den`, or just `num` when the denominator is one.
pub fn fmt_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Accepts `p/q`, an integer, or a finite decimal such as `0.25` (parsed exactly).
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = whole.starts_with('-');
        let w = if whole.is_empty() || whole == "-" {
            BigInt::zero()
        } else {
            BigInt::from_str(whole).map_err(|_| bad())?
        };
        let f = BigInt::from_str(frac).map_err(|_| bad())?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let mag = w.abs() * &scale + f;
        let n = if neg { -mag } else { mag };
        return Ok(Rational::new(n, scale));
    }
    BigInt::from_str(s).map(Rational::from_integer).map_err(|_| bad())
}

fn ln_biguint(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a positive rational without overflowing on huge numerators.
pub fn ln_rational(r: &Rational) -> f64 {
    if !r.is_positive() {
        return if r.is_zero() { f64::NEG_INFINITY } else { f64::NAN };
    }
    let n = r.numer().magnitude();
    let d = r.denom().magnitude();
    ln_biguint(n) - ln_biguint(d)
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| ln_rational(r).exp())
}

/// Logarithm base used when reporting. Defaults to bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum LogBase {
    #[default]
    Two,
    E,
}

impl LogBase {
    pub fn log(self, r: &Rational) -> f64 {
        self.from_nats(ln_rational(r))
    }

    pub fn log_f64(self, x: f64) -> f64 {
        self.from_nats(x.ln())
    }

    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            LogBase::E => nats,
            LogBase::Two => nats / std::f64::consts::LN_2,
        }
    }

    pub fn to_nats(self, v: f64) -> f64 {
        match self {
            LogBase::E => v,
            LogBase::Two => v * std::f64::consts::LN_2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LogBase::Two => "2",
            LogBase::E => "e",
        }
    }
}

impl FromStr for LogBase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2" => Ok(LogBase::Two),
            "e" | "E" => Ok(LogBase::E),
            _ => Err(Error::Parse(format!("log base must be 2 or e, got {s:?}"))),
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A probability: an exact rational in [0, 1], always in lowest terms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prob(Rational);

impl Prob {
    pub fn new(r: Rational) -> Result<Self> {
        if r.is_negative() || r > Rational::one() {
            return Err(Error::InvalidArgument(format!(
                "{} is not a probability",
                fmt_rational(&r)
            )));
        }
        Ok(Prob(r))
    }

    pub fn zero() -> Self {
        Prob(Rational::zero())
    }

    pub fn one() -> Self {
        Prob(Rational::one())
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn into_inner(self) -> Rational {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.0)
    }
}

impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_rational(&self.0))
    }
}

impl FromStr for Prob {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Prob::new(parse_rational(s)?)
    }
}

impl Serialize for Prob {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Prob {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
