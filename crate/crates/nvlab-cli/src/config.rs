//! Run configuration: a JSON document whose `params` are merged over each
//! subcommand's defaults, with command-line flags applied last.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::CliError;

/// Complex number written as "a", "bi", "a+bi" or "a-bi" on the command
/// line; JSON also accepts a number or a two-element array.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cplx(pub Complex64);

impl Cplx {
    pub fn new(re: f64, im: f64) -> Self {
        Cplx(Complex64::new(re, im))
    }
}

impl fmt::Display for Cplx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (re, im) = (self.0.re, self.0.im);
        if im == 0.0 {
            write!(f, "{re}")
        } else if re == 0.0 {
            write!(f, "{im}i")
        } else {
            write!(f, "{re}{im:+}i")
        }
    }
}

fn parse_real(s: &str, whole: &str) -> Result<f64, String> {
    let v: f64 = match s {
        "" | "+" => 1.0,
        "-" => -1.0,
        _ => s.parse().map_err(|_| format!("cannot parse '{whole}' as a complex number"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("complex number '{whole}' is not finite"))
    }
}

impl FromStr for Cplx {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err("empty complex number".into());
        }
        let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
            return Ok(Cplx::new(parse_real(&t, s)?, 0.0));
        };
        // split at the last sign that is not part of an exponent
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        match split {
            Some(k) => Ok(Cplx::new(parse_real(&body[..k], s)?, parse_real(&body[k..], s)?)),
            None => Ok(Cplx::new(0.0, parse_real(body, s)?)),
        }
    }
}

impl Serialize for Cplx {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Cplx {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Pair([f64; 2]),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(Cplx::new(x, 0.0)),
            Repr::Pair([a, b]) => Ok(Cplx::new(a, b)),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Contents of a `--config` file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Option<String>,
    #[serde(default)]
    pub params: Map<String, Value>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config schema in {}: {e}", path.display())))
    }
}

/// Defaults, then config params, then flags; unknown keys are rejected.
pub fn resolve<P: Default + Serialize + DeserializeOwned>(
    subcommand: &str,
    file_params: &Map<String, Value>,
    flags: &impl Serialize,
) -> Result<P, CliError> {
    let Value::Object(mut merged) = serde_json::to_value(P::default()).expect("parameters serialize") else {
        unreachable!("parameter structs serialize to objects")
    };
    for (k, v) in file_params {
        if !merged.contains_key(k) {
            let known: Vec<&String> = merged.keys().collect();
            return Err(CliError::Usage(format!(
                "invalid config schema: unknown parameter '{k}' for subcommand '{subcommand}' (known: {known:?})"
            )));
        }
        merged.insert(k.clone(), v.clone());
    }
    if let Value::Object(f) = serde_json::to_value(flags).expect("flags serialize") {
        for (k, v) in f {
            // unset flags are skipped, so null here is a non-finite number
            if v.is_null() || contains_null(&v) {
                return Err(CliError::Usage(format!("flag '{k}' must be finite")));
            }
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Usage(format!("invalid config schema for subcommand '{subcommand}': {e}")))
}

fn contains_null(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::Array(a) => a.iter().any(contains_null),
        Value::Object(o) => o.values().any(contains_null),
        _ => false,
    }
}
