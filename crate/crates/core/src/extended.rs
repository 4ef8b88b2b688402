//! Serde adapter for extended reals.
//!
//! Several derived quantities use `+inf` as an "undefined here" sentinel and
//! Monte Carlo slopes may be `NaN`. JSON has no encoding for either, so
//! non-finite values are written as the strings `"inf"`, `"-inf"` and `"NaN"`.

use serde::de::{self, Visitor};
use serde::{Deserializer, Serializer};
use std::fmt;

pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
    if value.is_finite() {
        serializer.serialize_f64(*value)
    } else if value.is_nan() {
        serializer.serialize_str("NaN")
    } else if *value > 0.0 {
        serializer.serialize_str("inf")
    } else {
        serializer.serialize_str("-inf")
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
    struct ExtendedVisitor;

    impl<'de> Visitor<'de> for ExtendedVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"NaN\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
                "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
                "NaN" | "nan" => Ok(f64::NAN),
                other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
            }
        }
    }

    deserializer.deserialize_any(ExtendedVisitor)
}

#[cfg(test)]
mod tests {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "super")] f64);

    #[test]
    fn non_finite_values_survive_json() {
        for v in [f64::INFINITY, f64::NEG_INFINITY, 1.25, -3.0] {
            let text = serde_json::to_string(&Wrap(v)).unwrap();
            let back: Wrap = serde_json::from_str(&text).unwrap();
            assert_eq!(back.0, v);
        }
        let text = serde_json::to_string(&Wrap(f64::NAN)).unwrap();
        assert_eq!(text, "\"NaN\"");
        assert!(serde_json::from_str::<Wrap>(&text).unwrap().0.is_nan());
    }

    #[test]
    fn rejects_unknown_strings() {
        assert!(serde_json::from_str::<Wrap>("\"big\"").is_err());
    }
}
