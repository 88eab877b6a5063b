//! Report formatting and output. Floats are always written with 17
//! significant digits so reports round-trip exactly and diff cleanly.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Formats a float with 17 significant digits; non-finite values are
/// spelled `inf`, `-inf`, `nan` (CSV only).
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Compact JSON formatter writing every float with 17 significant digits.
/// Non-finite floats become `null`, matching serde_json's own convention.
struct Sig17;

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value.serialize(&mut ser).expect("report values serialize");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// Writes `contents` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    {
        let mut f = fs::File::create(tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

/// Hex SHA-256 of the canonical JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let canon = serde_json::to_string(value).expect("config serializes");
    Sha256::digest(canon.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// A single audit or invariant suite: one line of the verify summary and the
/// body of an audit report.
#[derive(Clone, Debug, Serialize)]
pub struct Suite {
    pub audit: String,
    pub pairs: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub rows: Vec<Value>,
}

impl Suite {
    /// Builds a suite from `(violation, row)` pairs; passes when every
    /// violation is at most `tolerance`.
    pub fn new(audit: impl Into<String>, tolerance: f64, cases: Vec<(f64, Value)>) -> Self {
        let max_violation = cases.iter().map(|c| c.0).fold(0.0, f64::max);
        let nan = cases.iter().any(|c| c.0.is_nan());
        Suite {
            audit: audit.into(),
            pairs: cases.len(),
            max_violation: if nan { f64::NAN } else { max_violation },
            tolerance,
            pass: !nan && !cases.is_empty() && max_violation <= tolerance,
            rows: cases.into_iter().map(|c| c.1).collect(),
        }
    }

    /// A suite that could not be run at all.
    pub fn failed(audit: impl Into<String>, reason: String) -> Self {
        Suite {
            audit: audit.into(),
            pairs: 0,
            max_violation: f64::INFINITY,
            tolerance: 0.0,
            pass: false,
            rows: vec![Value::String(reason)],
        }
    }
}

/// Writes a table as CSV with a fixed header.
pub fn csv(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|x| fmt_f64(*x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, std::f64::consts::PI] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }

    #[test]
    fn json_floats_are_valid_json() {
        let v = serde_json::json!({"a": 0.1, "b": [1.0, f64::NAN], "c": 3});
        let s = to_json(&v);
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
        assert!(back["b"][1].is_null());
        assert_eq!(back["c"].as_i64(), Some(3));
    }

    #[test]
    fn suite_pass_logic() {
        let s = Suite::new("x", 1e-3, vec![(1e-4, Value::Null), (5e-4, Value::Null)]);
        assert!(s.pass);
        assert_eq!(s.max_violation, 5e-4);
        assert!(!Suite::new("x", 1e-3, vec![(f64::NAN, Value::Null)]).pass);
        assert!(!Suite::new("x", 1e-3, vec![]).pass);
    }
}
