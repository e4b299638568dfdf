use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::ncen_api::{FundBlock, Report};

/// Runtime values. Reports and fund blocks are opaque handles into the
/// read-only corpus; scripts can only pass them back to APIs or index a few
/// named fields.
#[derive(Debug, Clone)]
pub enum Value {
    Bool(bool),
    Number(f64),
    Str(String),
    List(Arc<Vec<Value>>),
    Report(Arc<Report>),
    Block(Arc<FundBlock>),
}

/// Accounted size of a handle, independent of the text it points at.
pub const HANDLE_BYTES: usize = 64;

impl Value {
    pub fn list(items: Vec<Value>) -> Self {
        Self::List(Arc::new(items))
    }

    pub fn strings<I: IntoIterator<Item = S>, S: Into<String>>(items: I) -> Self {
        Self::list(items.into_iter().map(|s| Value::Str(s.into())).collect())
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Self::Bool(_) => "bool",
            Self::Number(_) => "number",
            Self::Str(_) => "string",
            Self::List(_) => "list",
            Self::Report(_) => "report",
            Self::Block(_) => "fund block",
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Self::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Self::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn approx_size(&self) -> usize {
        match self {
            Self::Bool(_) => 1,
            Self::Number(_) => 8,
            Self::Str(s) => s.len() + 8,
            Self::List(items) => 8 + items.iter().map(Value::approx_size).sum::<usize>(),
            Self::Report(_) | Self::Block(_) => HANDLE_BYTES,
        }
    }

    /// True for the shapes a workflow may return: a string, a number, or a
    /// flat list of those.
    pub fn is_answer_shape(&self) -> bool {
        match self {
            Self::Str(_) | Self::Number(_) => true,
            Self::List(items) => items.iter().all(|v| matches!(v, Self::Str(_) | Self::Number(_))),
            _ => false,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::{json, Value as J};
        match self {
            Self::Bool(b) => J::Bool(*b),
            Self::Number(n) => serde_json::Number::from_f64(*n).map_or(J::Null, J::Number),
            Self::Str(s) => J::String(s.clone()),
            Self::List(items) => J::Array(items.iter().map(Value::to_json).collect()),
            Self::Report(r) => json!({ "report": r.accession_number() }),
            Self::Block(b) => json!({ "block": b.block_id() }),
        }
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, String> {
        use serde_json::Value as J;
        match v {
            J::Bool(b) => Ok(Self::Bool(*b)),
            J::Number(n) => n.as_f64().map(Self::Number).ok_or_else(|| format!("bad number {n}")),
            J::String(s) => Ok(Self::Str(s.clone())),
            J::Array(items) => items.iter().map(Value::from_json).collect::<Result<Vec<_>, _>>().map(Value::list),
            other => Err(format!("cannot restore a value from {other}")),
        }
    }

    /// Short SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let h = Sha256::digest(self.to_json().to_string().as_bytes());
        hex::encode(&h[..8])
    }

    /// Plain text shown to users and scored by the evaluator.
    pub fn render(&self) -> String {
        match self {
            Self::Bool(b) => b.to_string(),
            Self::Number(n) => format_number(*n),
            Self::Str(s) => s.clone(),
            Self::List(items) => items.iter().map(Value::render).collect::<Vec<_>>().join("; "),
            Self::Report(r) => format!("report {}", r.accession_number()),
            Self::Block(b) => b.fund_name.clone(),
        }
    }
}

pub fn format_number(n: f64) -> String {
    if n == 0.0 {
        "0".into()
    } else {
        format!("{n}")
    }
}

/// Half-away-from-zero rounding to `places` decimals.
pub fn round_half_away(x: f64, places: u32) -> f64 {
    let f = 10f64.powi(places as i32);
    let scaled = x * f;
    // Products like 1.005 * 100 land a hair below the half; nudge by one ulp
    // scale so the written decimal decides, not the binary expansion.
    let nudged = scaled + scaled.signum() * scaled.abs() * f64::EPSILON * 4.0;
    nudged.round() / f
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Bool(a), Self::Bool(b)) => a == b,
            (Self::Number(a), Self::Number(b)) => a == b,
            (Self::Str(a), Self::Str(b)) => a == b,
            (Self::List(a), Self::List(b)) => a == b,
            (Self::Report(a), Self::Report(b)) => a.accession_number() == b.accession_number(),
            (Self::Block(a), Self::Block(b)) => a.block_id() == b.block_id(),
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        Value::from_json(&v).map_err(serde::de::Error::custom)
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Self::Number(n)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Self::Str(s.to_string())
    }
}
