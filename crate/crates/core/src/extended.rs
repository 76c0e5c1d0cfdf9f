//! Extended reals for integrability exponents.

use core::fmt;

/// An integrability exponent in `(0, ∞]`.
///
/// `∞` is a dedicated variant rather than `f64::INFINITY`, so reciprocal
/// terms such as `n/q` and `2/r` vanish exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    /// Maps `+∞` to [`Extended::Infinite`], everything else to `Finite`.
    pub fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            Extended::Infinite
        } else {
            Extended::Finite(v)
        }
    }

    /// `1/v`, with `1/∞ = 0`.
    pub fn recip(self) -> f64 {
        match self {
            Extended::Finite(v) => 1.0 / v,
            Extended::Infinite => 0.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    /// Strict comparison `self > v`.
    pub fn exceeds(self, v: f64) -> bool {
        match self {
            Extended::Finite(x) => x > v,
            Extended::Infinite => true,
        }
    }

    /// Lossy view as `f64` (∞ becomes `f64::INFINITY`), for reporting only.
    pub fn to_f64(self) -> f64 {
        match self {
            Extended::Finite(v) => v,
            Extended::Infinite => f64::INFINITY,
        }
    }
}

impl From<f64> for Extended {
    fn from(v: f64) -> Self {
        Extended::from_f64(v)
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

#[cfg(feature = "serde")]
mod serde_impl {
    use super::Extended;
    use serde::de::{self, Visitor};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    impl Serialize for Extended {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            match self {
                Extended::Finite(v) => s.serialize_f64(*v),
                Extended::Infinite => s.serialize_str("inf"),
            }
        }
    }

    struct ExtendedVisitor;

    impl Visitor<'_> for ExtendedVisitor {
        type Value = Extended;

        fn expecting(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
            f.write_str("a positive number or \"inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Extended, E> {
            Ok(Extended::from_f64(v))
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Extended, E> {
            Ok(Extended::Finite(v as f64))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Extended, E> {
            Ok(Extended::Finite(v as f64))
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Extended, E> {
            match v {
                "inf" | "infinity" | "Infinity" | "∞" => Ok(Extended::Infinite),
                other => other
                    .parse::<f64>()
                    .map(Extended::from_f64)
                    .map_err(|_| E::invalid_value(de::Unexpected::Str(other), &self)),
            }
        }
    }

    impl<'de> Deserialize<'de> for Extended {
        fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
            d.deserialize_any(ExtendedVisitor)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_of_infinity_is_zero() {
        assert_eq!(Extended::Infinite.recip(), 0.0);
        assert_eq!(Extended::Finite(4.0).recip(), 0.25);
        assert_eq!(Extended::from_f64(f64::INFINITY), Extended::Infinite);
    }

    #[test]
    fn exceeds_handles_infinity() {
        assert!(Extended::Infinite.exceeds(1e300));
        assert!(!Extended::Finite(2.0).exceeds(2.0));
    }
}
