//! Flat key/value text format shared by model files and law descriptors.
//!
//! Either a flat JSON object (numbers, strings, or arrays of numbers) or
//! `key = value` lines. Lists are written `1,2,3` in line form.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub type KvMap = BTreeMap<String, String>;

pub fn parse_kv_text(text: &str) -> Result<KvMap> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        return parse_json(trimmed);
    }
    let mut map = KvMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| Error::Input(format!("line {}: expected key = value", lineno + 1)))?;
        insert_unique(&mut map, k.trim(), v.trim().trim_matches('"'))?;
    }
    Ok(map)
}

fn parse_json(text: &str) -> Result<KvMap> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Input(format!("bad JSON: {e}")))?;
    let obj = value.as_object().ok_or_else(|| Error::Input("expected a JSON object".into()))?;
    let mut map = KvMap::new();
    for (k, v) in obj {
        let s = match v {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::Bool(b) => b.to_string(),
            serde_json::Value::Array(items) => items
                .iter()
                .map(|x| match x {
                    serde_json::Value::Number(n) => Ok(n.to_string()),
                    _ => Err(Error::Input(format!("key '{k}': arrays must hold numbers"))),
                })
                .collect::<Result<Vec<_>>>()?
                .join(","),
            _ => return Err(Error::Input(format!("key '{k}': unsupported value {v}"))),
        };
        insert_unique(&mut map, k, &s)?;
    }
    Ok(map)
}

fn insert_unique(map: &mut KvMap, k: &str, v: &str) -> Result<()> {
    if map.insert(k.to_string(), v.to_string()).is_some() {
        return Err(Error::Input(format!("duplicate key '{k}'")));
    }
    Ok(())
}

/// Parse `key=value` override tokens into `map`, replacing existing keys.
pub fn apply_overrides<S: AsRef<str>>(map: &mut KvMap, tokens: &[S]) -> Result<()> {
    for tok in tokens {
        let tok = tok.as_ref();
        let (k, v) = tok.split_once('=').ok_or_else(|| Error::Input(format!("override '{tok}' is not key=value")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(())
}

pub fn get_f64(map: &KvMap, key: &str) -> Result<Option<f64>> {
    match map.get(key) {
        None => Ok(None),
        Some(s) => s.parse::<f64>().map(Some).map_err(|_| Error::Input(format!("key '{key}': '{s}' is not a number"))),
    }
}

pub fn require_f64(map: &KvMap, key: &str) -> Result<f64> {
    get_f64(map, key)?.ok_or_else(|| Error::Input(format!("missing key '{key}'")))
}

pub fn get_list(map: &KvMap, key: &str) -> Result<Option<Vec<f64>>> {
    match map.get(key) {
        None => Ok(None),
        Some(s) if s.trim().is_empty() => Ok(Some(Vec::new())),
        Some(s) => s
            .trim_matches(|c| c == '[' || c == ']')
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Input(format!("key '{key}': '{t}' is not a number"))))
            .collect::<Result<Vec<_>>>()
            .map(Some),
    }
}
