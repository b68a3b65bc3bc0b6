//! Deterministic JSON: keys sorted, floats with 17 significant digits.

use std::io;

use serde_json::ser::Formatter;
use serde_json::{Map, Value};

pub const SCHEMA: u64 = 1;

struct Fixed17;

impl Formatter for Fixed17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
}

/// Serializes with the fixed float format and a trailing newline.
pub fn to_string(v: &Value) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Fixed17);
    serde::Serialize::serialize(v, &mut ser).expect("serializing a Value cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON output is UTF-8")
}

/// Adds `"schema": 1` to an object.
pub fn versioned(v: Value) -> Value {
    match v {
        Value::Object(mut m) => {
            m.insert("schema".into(), SCHEMA.into());
            Value::Object(m)
        }
        other => {
            let mut m = Map::new();
            m.insert("schema".into(), SCHEMA.into());
            m.insert("value".into(), other);
            Value::Object(m)
        }
    }
}

pub fn point(p: &[f64]) -> Value {
    Value::Array(p.iter().map(|&x| x.into()).collect())
}
