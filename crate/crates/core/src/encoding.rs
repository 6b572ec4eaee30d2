//! Canonical textual encoding of types and values.
//!
//! Type expressions follow the grammar
//! `bool|i8|i16|i32|i64|char|f32|f64|string|array<T>|object{name:T,...}`.
//!
//! Value payloads are JSON: primitives as JSON scalars, chars as one-character
//! strings, arrays as JSON arrays, objects as JSON arrays of field values in
//! declared order (names live in the type expression), and the null marker as
//! JSON null. Non-finite floats are encoded as `"bits:<hex>"` strings so every
//! IEEE-754 payload round-trips exactly.

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::value::{Value, ValueType};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodingError {
    #[error("bad type expression at offset {offset}: {msg}")]
    BadTypeExpr { offset: usize, msg: String },
    #[error("bad value payload for type `{ty}`: {msg}")]
    BadPayload { ty: String, msg: String },
}

// ---------------------------------------------------------------------------
// Type expressions
// ---------------------------------------------------------------------------

/// Renders a type as its canonical expression.
pub fn type_expr(ty: &ValueType) -> String {
    match ty {
        ValueType::Boolean => "bool".into(),
        ValueType::Byte => "i8".into(),
        ValueType::Short => "i16".into(),
        ValueType::Integer => "i32".into(),
        ValueType::Long => "i64".into(),
        ValueType::Char => "char".into(),
        ValueType::Float => "f32".into(),
        ValueType::Double => "f64".into(),
        ValueType::String => "string".into(),
        ValueType::Array(elem) => format!("array<{}>", type_expr(elem)),
        ValueType::Object { class_name, fields } => {
            let body = fields
                .iter()
                .map(|(n, t)| format!("{n}:{}", type_expr(t)))
                .collect::<Vec<_>>()
                .join(",");
            format!("object {class_name}{{{body}}}")
        }
    }
}

/// Parses a canonical type expression.
pub fn parse_type_expr(s: &str) -> Result<ValueType, EncodingError> {
    let mut p = TypeParser { src: s, pos: 0 };
    let ty = p.parse()?;
    p.skip_ws();
    if p.pos != s.len() {
        return Err(p.err("trailing characters"));
    }
    ty.validate().map_err(|e| EncodingError::BadTypeExpr {
        offset: 0,
        msg: e.to_string(),
    })?;
    Ok(ty)
}

struct TypeParser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> TypeParser<'a> {
    fn err(&self, msg: impl Into<String>) -> EncodingError {
        EncodingError::BadTypeExpr { offset: self.pos, msg: msg.into() }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), EncodingError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{tok}`")))
        }
    }

    fn ident(&mut self) -> Result<String, EncodingError> {
        self.skip_ws();
        let end = self
            .rest()
            .find(|c: char| ":,{}<>".contains(c) || c.is_whitespace())
            .unwrap_or(self.rest().len());
        if end == 0 {
            return Err(self.err("expected identifier"));
        }
        let word = &self.rest()[..end];
        self.pos += end;
        Ok(word.to_string())
    }

    fn parse(&mut self) -> Result<ValueType, EncodingError> {
        self.skip_ws();
        for (tok, ty) in [
            ("bool", ValueType::Boolean),
            ("i8", ValueType::Byte),
            ("i16", ValueType::Short),
            ("i32", ValueType::Integer),
            ("i64", ValueType::Long),
            ("char", ValueType::Char),
            ("f32", ValueType::Float),
            ("f64", ValueType::Double),
            ("string", ValueType::String),
        ] {
            // Reserved words must not be followed by an identifier character.
            if self.rest().starts_with(tok) {
                let after = &self.rest()[tok.len()..];
                let boundary = after
                    .chars()
                    .next()
                    .is_none_or(|c| ":,{}<>".contains(c) || c.is_whitespace());
                if boundary {
                    self.pos += tok.len();
                    return Ok(ty);
                }
            }
        }
        if self.eat("array") {
            self.expect("<")?;
            let elem = self.parse()?;
            self.expect(">")?;
            return Ok(ValueType::Array(Box::new(elem)));
        }
        if self.eat("object") {
            self.skip_ws();
            let class_name = if self.rest().starts_with('{') {
                String::new()
            } else {
                self.ident()?
            };
            self.expect("{")?;
            let mut fields = Vec::new();
            self.skip_ws();
            if !self.rest().starts_with('}') {
                loop {
                    let name = self.ident()?;
                    self.expect(":")?;
                    let ty = self.parse()?;
                    fields.push((name, ty));
                    if !self.eat(",") {
                        break;
                    }
                }
            }
            self.expect("}")?;
            return Ok(ValueType::Object { class_name, fields });
        }
        Err(self.err("expected a type"))
    }
}

// ---------------------------------------------------------------------------
// Value payloads
// ---------------------------------------------------------------------------

fn f32_to_json(x: f32) -> Json {
    if x.is_finite() {
        json!(f64::from(x))
    } else {
        json!(format!("bits:{:08x}", x.to_bits()))
    }
}

fn f64_to_json(x: f64) -> Json {
    if x.is_finite() {
        json!(x)
    } else {
        json!(format!("bits:{:016x}", x.to_bits()))
    }
}

/// Encodes the payload of a value (without its type expression).
pub fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Boolean(b) => json!(b),
        Value::Byte(x) => json!(x),
        Value::Short(x) => json!(x),
        Value::Integer(x) => json!(x),
        Value::Long(x) => json!(x),
        Value::Char(c) => json!(c.to_string()),
        Value::Float(x) => f32_to_json(*x),
        Value::Double(x) => f64_to_json(*x),
        Value::Str(s) => json!(s),
        Value::Array { items, .. } => Json::Array(items.iter().map(value_to_json).collect()),
        Value::Object { fields, .. } => {
            Json::Array(fields.iter().map(|(_, v)| value_to_json(v)).collect())
        }
        Value::Null(_) => Json::Null,
    }
}

/// Encodes a value together with its type: `{"t": <type-expr>, "v": <payload>}`.
pub fn typed_value_to_json(v: &Value) -> Json {
    json!({ "t": type_expr(&v.value_type()), "v": value_to_json(v) })
}

fn payload_err(ty: &ValueType, msg: impl Into<String>) -> EncodingError {
    EncodingError::BadPayload { ty: type_expr(ty), msg: msg.into() }
}

fn int_from_json(ty: &ValueType, j: &Json, lo: i64, hi: i64) -> Result<i64, EncodingError> {
    let n = j
        .as_i64()
        .ok_or_else(|| payload_err(ty, "expected an integer"))?;
    if n < lo || n > hi {
        return Err(payload_err(ty, format!("{n} out of range [{lo}, {hi}]")));
    }
    Ok(n)
}

fn f64_from_json(ty: &ValueType, j: &Json) -> Result<f64, EncodingError> {
    match j {
        Json::Number(n) => n
            .as_f64()
            .ok_or_else(|| payload_err(ty, "number not representable")),
        Json::String(s) => {
            let hex = s
                .strip_prefix("bits:")
                .ok_or_else(|| payload_err(ty, "expected number or bits:<hex>"))?;
            let bits = u64::from_str_radix(hex, 16)
                .map_err(|e| payload_err(ty, format!("bad bit pattern: {e}")))?;
            Ok(f64::from_bits(bits))
        }
        _ => Err(payload_err(ty, "expected number or bits:<hex>")),
    }
}

fn f32_from_json(ty: &ValueType, j: &Json) -> Result<f32, EncodingError> {
    match j {
        Json::Number(n) => Ok(n
            .as_f64()
            .ok_or_else(|| payload_err(ty, "number not representable"))? as f32),
        Json::String(s) => {
            let hex = s
                .strip_prefix("bits:")
                .ok_or_else(|| payload_err(ty, "expected number or bits:<hex>"))?;
            let bits = u32::from_str_radix(hex, 16)
                .map_err(|e| payload_err(ty, format!("bad bit pattern: {e}")))?;
            Ok(f32::from_bits(bits))
        }
        _ => Err(payload_err(ty, "expected number or bits:<hex>")),
    }
}

/// Decodes a payload against its declared type.
pub fn value_from_json(ty: &ValueType, j: &Json) -> Result<Value, EncodingError> {
    if j.is_null() {
        if ty.is_nullable() {
            return Ok(Value::Null(Box::new(ty.clone())));
        }
        return Err(payload_err(ty, "null not permitted for this type"));
    }
    match ty {
        ValueType::Boolean => j
            .as_bool()
            .map(Value::Boolean)
            .ok_or_else(|| payload_err(ty, "expected a boolean")),
        ValueType::Byte => Ok(Value::Byte(
            int_from_json(ty, j, i8::MIN as i64, i8::MAX as i64)? as i8,
        )),
        ValueType::Short => Ok(Value::Short(
            int_from_json(ty, j, i16::MIN as i64, i16::MAX as i64)? as i16,
        )),
        ValueType::Integer => Ok(Value::Integer(
            int_from_json(ty, j, i32::MIN as i64, i32::MAX as i64)? as i32,
        )),
        ValueType::Long => Ok(Value::Long(int_from_json(ty, j, i64::MIN, i64::MAX)?)),
        ValueType::Char => {
            let s = j
                .as_str()
                .ok_or_else(|| payload_err(ty, "expected a one-character string"))?;
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(Value::Char(c)),
                _ => Err(payload_err(ty, "expected exactly one character")),
            }
        }
        ValueType::Float => Ok(Value::Float(f32_from_json(ty, j)?)),
        ValueType::Double => Ok(Value::Double(f64_from_json(ty, j)?)),
        ValueType::String => j
            .as_str()
            .map(|s| Value::Str(s.to_string()))
            .ok_or_else(|| payload_err(ty, "expected a string")),
        ValueType::Array(elem) => {
            let arr = j
                .as_array()
                .ok_or_else(|| payload_err(ty, "expected an array"))?;
            let items = arr
                .iter()
                .map(|item| value_from_json(elem, item))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Value::Array { elem: elem.clone(), items })
        }
        ValueType::Object { class_name, fields } => {
            let arr = j
                .as_array()
                .ok_or_else(|| payload_err(ty, "expected an array of field values"))?;
            if arr.len() != fields.len() {
                return Err(payload_err(
                    ty,
                    format!("expected {} field values, got {}", fields.len(), arr.len()),
                ));
            }
            let decoded = fields
                .iter()
                .zip(arr)
                .map(|((name, fty), fj)| Ok((name.clone(), value_from_json(fty, fj)?)))
                .collect::<Result<Vec<_>, EncodingError>>()?;
            Ok(Value::Object { class_name: class_name.clone(), fields: decoded })
        }
    }
}

/// Decodes a `{"t", "v"}` pair into a value.
pub fn typed_value_from_json(j: &Json) -> Result<Value, EncodingError> {
    let t = j
        .get("t")
        .and_then(Json::as_str)
        .ok_or_else(|| EncodingError::BadTypeExpr { offset: 0, msg: "missing `t`".into() })?;
    let ty = parse_type_expr(t)?;
    let v = j
        .get("v")
        .ok_or_else(|| payload_err(&ty, "missing `v`"))?;
    value_from_json(&ty, v)
}
