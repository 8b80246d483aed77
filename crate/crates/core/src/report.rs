//! Flat key-value reports with a human text form and a JSON form.
//!
//! Keys are sorted, floats use a fixed 17-digit format in text and the
//! shortest round-trip form in JSON, and absent or non-finite values print
//! as `undefined`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde_json::{Map, Number};

use crate::dde::fmt17;

pub const UNDEFINED: &str = "undefined";

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    NumList(Vec<f64>),
    Undefined,
}

impl Value {
    fn text(&self) -> String {
        match self {
            Value::Num(v) => fmt17(*v),
            Value::Int(v) => v.to_string(),
            Value::Bool(v) => v.to_string(),
            Value::Text(s) => s.clone(),
            Value::NumList(v) => {
                let parts: Vec<String> = v.iter().map(|x| fmt17(*x)).collect();
                format!("[{}]", parts.join(", "))
            }
            Value::Undefined => UNDEFINED.into(),
        }
    }

    fn json(&self) -> serde_json::Value {
        let num = |v: f64| match Number::from_f64(v) {
            Some(n) => serde_json::Value::Number(n),
            None => serde_json::Value::String(UNDEFINED.into()),
        };
        match self {
            Value::Num(v) => num(*v),
            Value::Int(v) => serde_json::Value::from(*v),
            Value::Bool(v) => serde_json::Value::Bool(*v),
            Value::Text(s) => serde_json::Value::String(s.clone()),
            Value::NumList(v) => serde_json::Value::Array(v.iter().map(|x| num(*x)).collect()),
            Value::Undefined => serde_json::Value::String(UNDEFINED.into()),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<Option<f64>> for Value {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Value::Undefined, Value::Num)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.into())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<Vec<f64>> for Value {
    fn from(v: Vec<f64>) -> Self {
        Value::NumList(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: Value,
    note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: BTreeMap<String, Entry>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<Value>) -> &mut Self {
        self.entries.insert(
            key.into(),
            Entry {
                value: value.into(),
                note: None,
            },
        );
        self
    }

    /// Sets a value with a short annotation, typically its defining formula.
    pub fn note(&mut self, key: impl Into<String>, value: impl Into<Value>, note: impl Into<String>) -> &mut Self {
        self.entries.insert(
            key.into(),
            Entry {
                value: value.into(),
                note: Some(note.into()),
            },
        );
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key).map(|e| &e.value)
    }

    /// Copies every entry of `other` under `prefix.`.
    pub fn merge(&mut self, prefix: &str, other: &Report) -> &mut Self {
        for (k, e) in &other.entries {
            self.entries.insert(format!("{prefix}.{k}"), e.clone());
        }
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, e) in &self.entries {
            match &e.note {
                Some(n) => writeln!(s, "{k} = {}  # {n}", e.value.text()),
                None => writeln!(s, "{k} = {}", e.value.text()),
            }
            .unwrap();
        }
        s
    }

    pub fn to_json(&self) -> String {
        let mut values = Map::new();
        let mut notes = Map::new();
        for (k, e) in &self.entries {
            values.insert(k.clone(), e.value.json());
            if let Some(n) = &e.note {
                notes.insert(k.clone(), serde_json::Value::String(n.clone()));
            }
        }
        let mut root = Map::new();
        root.insert("notes".into(), serde_json::Value::Object(notes));
        root.insert("values".into(), serde_json::Value::Object(values));
        let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(root)).expect("json");
        s.push('\n');
        s
    }

    /// Writes `report.txt` and `report.structured` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), self.to_text())?;
        std::fs::write(dir.join("report.structured"), self.to_json())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undefined_never_prints_nan() {
        let mut r = Report::new();
        r.set("mu", None::<f64>).set("nan", f64::NAN).set("inf", f64::INFINITY);
        let text = r.to_text();
        assert!(!text.contains("NaN") && !text.contains("inf\n"));
        assert_eq!(text.matches(UNDEFINED).count(), 3);
        let json = r.to_json();
        assert!(!json.contains("NaN") && !json.contains("null"));
        assert_eq!(json.matches(UNDEFINED).count(), 3);
    }

    #[test]
    fn keys_are_sorted_and_notes_inline() {
        let mut r = Report::new();
        r.set("z", 1.0).note("a", 0.5, "kappa = sup ∫K1").set("m", true);
        let text = r.to_text();
        let keys: Vec<&str> = text.lines().map(|l| l.split(' ').next().unwrap()).collect();
        assert_eq!(keys, ["a", "m", "z"]);
        assert!(text.starts_with("a = 5.0000000000000000e-1  # kappa"));
    }

    #[test]
    fn json_parses_back() {
        let mut r = Report::new();
        r.set("x", 0.1).set("n", 3usize).set("list", vec![1.0, 2.5]).set("s", "GEAS");
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["values"]["x"].as_f64(), Some(0.1));
        assert_eq!(v["values"]["n"].as_i64(), Some(3));
        assert_eq!(v["values"]["s"], "GEAS");
        assert_eq!(v["values"]["list"][1].as_f64(), Some(2.5));
    }

    #[test]
    fn merge_prefixes() {
        let mut inner = Report::new();
        inner.set("k", 1.0);
        let mut r = Report::new();
        r.merge("sub", &inner);
        assert!(r.get("sub.k").is_some());
    }
}
