//! The family parameter `B`, accepted as an exact fraction ("1/13") or a float.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower (open) end of the qubit family range.
pub const B_MIN: f64 = 1.0 / 16.0;
/// Upper (closed) end: the SIC point.
pub const B_MAX: f64 = 1.0 / 12.0;
/// Values within this distance above `B_MIN` are rejected: the family
/// degenerates there (`r → 1`, `E₁ ∥ E₂`) and `√(1 − r²)` loses all precision.
pub const B_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Repr {
    Fraction(u64, u64),
    Float(f64),
}

/// A validated pairwise overlap `B ∈ (1/16, 1/12]`.
///
/// Fractions are range-checked in integer arithmetic before the single
/// conversion to `f64`, so `1/12` is accepted and `1/16` rejected exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    repr: Repr,
    value: f64,
}

impl Overlap {
    pub fn from_fraction(num: u64, den: u64) -> Result<Self> {
        let bad = || Error::BadOverlap(format!("{num}/{den}"));
        if den == 0 {
            return Err(bad());
        }
        let value = num as f64 / den as f64;
        // 1/16 < num/den <= 1/12
        let n = num as u128;
        let d = den as u128;
        if !(16 * n > d && 12 * n <= d) || value <= B_MIN + B_GUARD {
            return Err(Error::OutOfRange(value));
        }
        Ok(Overlap {
            repr: Repr::Fraction(num, den),
            value,
        })
    }

    pub fn from_f64(value: f64) -> Result<Self> {
        check_range(value)?;
        Ok(Overlap {
            repr: Repr::Float(value),
            value,
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// `"1/13"` for fractions, the shortest round-trip float otherwise.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Overlap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.repr {
            Repr::Fraction(n, d) => write!(f, "{n}/{d}"),
            Repr::Float(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Overlap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let num: u64 = n.trim().parse().map_err(|_| Error::BadOverlap(s.into()))?;
            let den: u64 = d.trim().parse().map_err(|_| Error::BadOverlap(s.into()))?;
            Overlap::from_fraction(num, den)
        } else {
            let v: f64 = t.parse().map_err(|_| Error::BadOverlap(s.into()))?;
            if !v.is_finite() {
                return Err(Error::BadOverlap(s.into()));
            }
            Overlap::from_f64(v)
        }
    }
}

impl Serialize for Overlap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Overlap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Num(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
            Raw::Num(v) => Overlap::from_f64(v).map_err(serde::de::Error::custom),
        }
    }
}

/// Range check for a bare float.
pub fn check_range(b: f64) -> Result<()> {
    if b.is_finite() && b > B_MIN + B_GUARD && b <= B_MAX {
        Ok(())
    } else {
        Err(Error::OutOfRange(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_exact_at_boundaries() {
        assert!("1/12".parse::<Overlap>().is_ok());
        assert!("2/24".parse::<Overlap>().is_ok());
        assert!(matches!("1/16".parse::<Overlap>(), Err(Error::OutOfRange(_))));
        assert!(matches!("1/10".parse::<Overlap>(), Err(Error::OutOfRange(_))));
        assert_eq!("1/13".parse::<Overlap>().unwrap().value(), 1.0 / 13.0);
        assert_eq!("1/13".parse::<Overlap>().unwrap().label(), "1/13");
    }

    #[test]
    fn floats() {
        assert!("0.07".parse::<Overlap>().is_ok());
        assert!(Overlap::from_f64(B_MIN + 1e-12).is_err());
        assert!(Overlap::from_f64(B_MIN + 1e-6).is_ok());
        assert!(Overlap::from_f64(B_MIN).is_err());
        assert!("nan".parse::<Overlap>().is_err());
        assert!("abc".parse::<Overlap>().is_err());
        assert!("1/0".parse::<Overlap>().is_err());
    }

    #[test]
    fn json_accepts_text_or_number() {
        let a: Overlap = serde_json::from_str("\"1/14\"").unwrap();
        let b: Overlap = serde_json::from_str("0.07").unwrap();
        assert_eq!(a.label(), "1/14");
        assert_eq!(b.value(), 0.07);
    }
}
