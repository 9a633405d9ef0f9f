#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

pub fn ballsbins(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ballsbins"))
        .args(args)
        .env_remove("BALLSBINS_WORKERS")
        .output()
        .expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout(&ballsbins(args))).expect("valid json")
}

pub fn schema(name: &str) -> Value {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "schemas", &format!("{name}.v1.schema.json")]
        .iter()
        .collect();
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Checks `value` against the subset of JSON Schema used by the shipped
/// schemas; returns the first violation.
pub fn check(value: &Value, schema: &Value) -> Result<(), String> {
    check_at(value, schema, "$")
}

fn type_matches(value: &Value, ty: &str) -> bool {
    match ty {
        "null" => value.is_null(),
        "boolean" => value.is_boolean(),
        "integer" => value.is_u64() || value.is_i64(),
        "number" => value.is_number(),
        "string" => value.is_string(),
        "array" => value.is_array(),
        "object" => value.is_object(),
        other => panic!("unsupported type {other}"),
    }
}

fn check_at(value: &Value, schema: &Value, path: &str) -> Result<(), String> {
    let fail = |what: String| Err(format!("{path}: {what} (value {value})"));
    if let Some(ty) = schema.get("type") {
        let ok = match ty {
            Value::String(t) => type_matches(value, t),
            Value::Array(ts) => ts.iter().any(|t| type_matches(value, t.as_str().unwrap())),
            _ => panic!("bad type keyword"),
        };
        if !ok {
            return fail(format!("expected type {ty}"));
        }
    }
    if let Some(c) = schema.get("const") {
        if value != c {
            return fail(format!("expected {c}"));
        }
    }
    if let Some(Value::Array(options)) = schema.get("enum") {
        if !options.contains(value) {
            return fail("not in enum".into());
        }
    }
    if let Some(x) = value.as_f64() {
        let bound = |k: &str| schema.get(k).and_then(Value::as_f64);
        if bound("minimum").is_some_and(|b| x < b)
            || bound("maximum").is_some_and(|b| x > b)
            || bound("exclusiveMinimum").is_some_and(|b| x <= b)
            || bound("exclusiveMaximum").is_some_and(|b| x >= b)
        {
            return fail("out of range".into());
        }
    }
    if let Value::Object(map) = value {
        if let Some(Value::Array(req)) = schema.get("required") {
            for k in req {
                if !map.contains_key(k.as_str().unwrap()) {
                    return fail(format!("missing {k}"));
                }
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        for (k, v) in map {
            match props.and_then(|p| p.get(k)) {
                Some(s) => check_at(v, s, &format!("{path}.{k}"))?,
                None => match schema.get("additionalProperties") {
                    Some(Value::Bool(false)) => return fail(format!("unexpected key {k}")),
                    Some(s @ Value::Object(_)) => check_at(v, s, &format!("{path}.{k}"))?,
                    _ => {}
                },
            }
        }
    }
    if let Value::Array(items) = value {
        if let Some(n) = schema.get("minItems").and_then(Value::as_u64) {
            if (items.len() as u64) < n {
                return fail(format!("fewer than {n} items"));
            }
        }
        if let Some(s) = schema.get("items") {
            for (i, v) in items.iter().enumerate() {
                check_at(v, s, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}

pub fn assert_schema(value: &Value, name: &str) {
    if let Err(e) = check(value, &schema(name)) {
        panic!("{name} schema violation: {e}");
    }
}
