//! Inclusive `lo:hi:step` ranges as used on the command line and in configs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl RangeSpec {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let r = RangeSpec { lo, hi, step };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.step.is_finite()) {
            return Err(invalid("range bounds must be finite"));
        }
        if self.step <= 0.0 {
            return Err(invalid(format!("range step must be positive, got {}", self.step)));
        }
        if self.hi < self.lo {
            return Err(invalid(format!("range upper bound {} is below lower bound {}", self.hi, self.lo)));
        }
        Ok(())
    }

    /// `lo, lo + step, …` up to and including `hi` when it lies on the lattice.
    ///
    /// Values are rounded to 12 decimals so that e.g. `0.7:1.3:0.02` yields an
    /// exact `1.0` rather than `1.0000000000000002`.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| round12(self.lo + i as f64 * self.step)).collect()
    }
}

pub(crate) fn round12(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

impl FromStr for RangeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(invalid(format!("expected lo:hi:step, got {s:?}")));
        }
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("not a number in range {s:?}: {p:?}")))
        };
        RangeSpec::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }
}

impl fmt::Display for RangeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.step)
    }
}

impl Serialize for RangeSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RangeSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
