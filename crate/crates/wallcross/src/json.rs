//! JSON helpers shared by all serialized artifacts.

use crate::linalg::{fmt_q, parse_q, Q};

pub const SCHEMA: &str = "wallcross/1";

/// Exact rationals as `"p/q"` strings; integers are also accepted on input.
pub mod q_serde {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            S(String),
            I(i64),
        }
        match Raw::deserialize(d)? {
            Raw::S(s) => parse_q(&s).ok_or_else(|| D::Error::custom(format!("bad fraction {s:?}"))),
            Raw::I(i) => Ok(crate::linalg::q(i)),
        }
    }
}

/// Vectors of exact rationals.
pub mod qvec_serde {
    use super::*;
    use serde::de::Error as _;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&fmt_q(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            S(String),
            I(i64),
        }
        Vec::<Raw>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Raw::S(s) => parse_q(&s).ok_or_else(|| D::Error::custom(format!("bad fraction {s:?}"))),
                Raw::I(i) => Ok(crate::linalg::q(i)),
            })
            .collect()
    }
}

/// Parses a comma-separated list of rationals such as `"1,2"` or `"1/2, 3"`.
pub fn parse_vector(s: &str) -> Option<Vec<Q>> {
    s.split(',').map(parse_q).collect()
}
