use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An integrability exponent in `[1, ∞]`, or any extended real used as a
/// metadata bound. Serializes `∞` as the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Exponent(pub f64);

impl Exponent {
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);

    /// Lebesgue exponent, rejecting values below 1 and NaN.
    pub fn lebesgue(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidExponent(format!("p = {p} must lie in [1, inf]")));
        }
        Ok(Exponent(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// `1/p`, with `1/∞ = 0`.
    pub fn reciprocal(self) -> f64 {
        if self.0.is_infinite() {
            0.0
        } else {
            1.0 / self.0
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() && self.0 > 0.0 {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Exponent::INFINITY),
            _ => t
                .parse::<f64>()
                .map(Exponent)
                .map_err(|_| Error::InvalidExponent(format!("cannot parse {s:?}"))),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str("inf")
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Exponent(x)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_inf_and_numbers() {
        assert!("inf".parse::<Exponent>().unwrap().is_infinite());
        assert_eq!("2.5".parse::<Exponent>().unwrap().value(), 2.5);
        assert!("two".parse::<Exponent>().is_err());
        assert_eq!(Exponent::INFINITY.reciprocal(), 0.0);
        assert_eq!(Exponent(4.0).reciprocal(), 0.25);
    }

    #[test]
    fn lebesgue_rejects_below_one() {
        assert!(Exponent::lebesgue(0.5).is_err());
        assert!(Exponent::lebesgue(f64::NAN).is_err());
        assert!(Exponent::lebesgue(f64::INFINITY).is_ok());
    }
}
