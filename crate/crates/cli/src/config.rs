//! Config files and command-line overrides.
//!
//! Files are JSON with nested sections (`{"gate": {"beta": 2}}`) or dotted
//! top-level keys (`{"gate.beta": 2}`); the two forms can be mixed.
//! `--set key=value` overrides apply last.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{Map, Value};

use safer_core::SaferConfig;

fn insert_dotted(root: &mut Map<String, Value>, key: &str, value: Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut node = root;
    while let Some(part) = parts.next() {
        if part.is_empty() {
            bail!("empty segment in config key {key:?}");
        }
        if parts.peek().is_none() {
            match (node.get_mut(part), value) {
                (Some(Value::Object(existing)), Value::Object(incoming)) => {
                    for (k, v) in incoming {
                        insert_dotted(existing, &k, v)?;
                    }
                }
                (_, value) => {
                    node.insert(part.to_string(), value);
                }
            }
            return Ok(());
        }
        let child = node
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
        let Value::Object(child) = child else {
            bail!("config key {key:?} descends into a non-object");
        };
        node = child;
    }
    Ok(())
}

/// Rewrites dotted keys at every level into nested objects.
pub fn expand_dotted(value: Value) -> Result<Value> {
    let Value::Object(map) = value else {
        bail!("config must be a JSON object");
    };
    let mut out = Map::new();
    for (k, v) in map {
        let v = if v.is_object() { expand_dotted(v)? } else { v };
        insert_dotted(&mut out, &k, v)?;
    }
    Ok(Value::Object(out))
}

/// Parses `key=value`; the value is JSON when it parses as JSON, otherwise a
/// string.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .with_context(|| format!("override {s:?} is not key=value"))?;
    let value = serde_json::from_str(v.trim()).unwrap_or_else(|_| Value::String(v.trim().to_string()));
    Ok((k.trim().to_string(), value))
}

/// Loads a config without structural validation.
pub fn load_unchecked(path: Option<&Path>, overrides: &[String]) -> Result<SaferConfig> {
    let mut root = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            expand_dotted(v)?
        }
        None => Value::Object(Map::new()),
    };
    let Value::Object(map) = &mut root else {
        unreachable!("expand_dotted returns an object")
    };
    for o in overrides {
        let (k, v) = parse_override(o)?;
        insert_dotted(map, &k, v)?;
    }
    let cfg: SaferConfig = serde_json::from_value(root.clone()).context("config does not match the schema")?;
    let known = serde_json::to_value(&cfg).expect("config serializes");
    let mut unknown = Vec::new();
    unknown_keys(&root, &known, "", &mut unknown);
    if !unknown.is_empty() {
        bail!("unknown config keys: {}", unknown.join(", "));
    }
    Ok(cfg)
}

fn unknown_keys(given: &Value, known: &Value, prefix: &str, out: &mut Vec<String>) {
    let (Value::Object(given), Value::Object(known)) = (given, known) else {
        return;
    };
    for (k, v) in given {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match known.get(k) {
            Some(kv) => unknown_keys(v, kv, &path, out),
            None => out.push(path),
        }
    }
}

/// Loads and structurally validates a config.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<SaferConfig> {
    let cfg = load_unchecked(path, overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn dotted_and_nested_keys_merge() {
        let v = expand_dotted(json!({
            "gate.beta": 3,
            "search": {"gamma": 0.1, "n_v": 20},
            "search.delta": 0.2,
            "cost": {"weights.c1": 1}
        }))
        .unwrap();
        assert_eq!(
            v,
            json!({"gate": {"beta": 3}, "search": {"gamma": 0.1, "n_v": 20, "delta": 0.2}, "cost": {"weights": {"c1": 1}}})
        );
    }

    #[test]
    fn overrides_apply_last_and_validation_is_separate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"gate.beta": 3, "limits": {"v_max": 0.4}}"#).unwrap();
        let cfg = load(Some(&path), &["gate.beta=4".into(), "reward.lambda1 = 20".into()]).unwrap();
        assert_eq!((cfg.gate.beta, cfg.limits.v_max, cfg.reward.lambda1), (4.0, 0.4, 20.0));
        assert!(load(None, &["gate.beta=1".into()]).is_err());
        assert_eq!(load_unchecked(None, &["gate.beta=1".into()]).unwrap().gate.beta, 1.0);
        let err = load(None, &["gate.nope=1".into(), "serch.gamma=0.1".into()]).unwrap_err();
        assert!(err.to_string().contains("gate.nope") && err.to_string().contains("serch"), "{err}");
        assert!(parse_override("gate.beta").is_err());
    }

    #[test]
    fn scalar_cannot_hold_children() {
        assert!(load_unchecked(None, &["gate.beta=2".into(), "gate.beta.x=1".into()]).is_err());
    }
}
