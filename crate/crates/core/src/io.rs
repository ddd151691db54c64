//! JSON input documents for single computations and a serializer that prints
//! every float with 17 significant digits.

use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::dist::{Dist, Weights};
use crate::error::{Error, Result};
use crate::pooling::PoolKind;

/// Wraps another formatter and prints `f64`/`f32` in `{:.16e}`.
pub struct Sig17<F>(pub F);

impl<F: Formatter> Formatter for Sig17<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn write_with<T: Serialize + ?Sized, F: Formatter>(value: &T, fmt: F) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(fmt));
    value.serialize(&mut ser).expect("serializing to memory");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// Compact JSON; non-finite floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    write_with(value, CompactFormatter)
}

pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    write_with(value, PrettyFormatter::new())
}

/// Input of `pool`: agents, weights and pool kind (log by default).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolRequest {
    pub agents: Vec<Dist>,
    pub beta: Weights,
    #[serde(default = "default_kind")]
    pub kind: PoolKind,
}

fn default_kind() -> PoolKind {
    PoolKind::Log
}

/// Input of `gap`: the welfare gap of `agent` at `pool`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapRequest {
    pub agent: Dist,
    pub pool: Dist,
}

/// Input of `factor`: a parent, weights, optional fixed children and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorRequest {
    pub parent: Dist,
    pub beta: Weights,
    #[serde(default)]
    pub fixed: Vec<Dist>,
    #[serde(default)]
    pub seed: u64,
}

fn parse<'a, T: Deserialize<'a>>(input: &'a str) -> Result<T> {
    Ok(serde_json::from_str(input)?)
}

pub fn parse_pool_request(input: &str) -> Result<PoolRequest> {
    let req: PoolRequest = parse(input)?;
    if req.agents.len() != req.beta.len() {
        return Err(Error::LengthMismatch {
            expected: req.agents.len(),
            found: req.beta.len(),
        });
    }
    Ok(req)
}

pub fn parse_gap_request(input: &str) -> Result<GapRequest> {
    parse(input)
}

pub fn parse_factor_request(input: &str) -> Result<FactorRequest> {
    parse(input)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(to_json(&0.1), "1.0000000000000001e-1");
        assert_eq!(
            to_json(&vec![1.0, -2.5]),
            "[1.0000000000000000e0,-2.5000000000000000e0]"
        );
        assert_eq!(to_json(&f64::NAN), "null");
        assert_eq!(to_json(&3u32), "3");
    }

    #[test]
    fn floats_round_trip() {
        for x in [
            0.1,
            1.0 / 3.0,
            5e-324,
            f64::MAX,
            -std::f64::consts::E,
            1e-300,
        ] {
            let back: f64 = serde_json::from_str(&to_json(&x)).unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn pretty_output_parses() {
        let d = Dist::from_slice(&[0.25, 0.75]).unwrap();
        let back: Dist = serde_json::from_str(&to_json_pretty(&d)).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn requests_parse_and_validate() {
        let r =
            parse_pool_request(r#"{"agents":[{"p":[0.5,0.5]},{"p":[0.2,0.8]}],"beta":[0.5,0.5]}"#)
                .unwrap();
        assert_eq!(r.kind, PoolKind::Log);
        assert!(matches!(
            parse_pool_request(r#"{"agents":[{"p":[0.5,0.5]}],"beta":[0.5,0.5]}"#),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(parse_gap_request("{"), Err(Error::Parse(_))));
        assert!(matches!(
            parse_gap_request(r#"{"agent":{"p":[0.5,0.6]},"pool":{"p":[0.5,0.5]}}"#),
            Err(Error::Parse(_))
        ));
        let f = parse_factor_request(r#"{"parent":{"p":[0.2,0.3,0.5]},"beta":[0.5,0.5]}"#).unwrap();
        assert!(f.fixed.is_empty() && f.seed == 0);
    }
}
