//! Per-type mutation operators.
//!
//! One operator is drawn uniformly from the type's list on every call.
//! Substitution operators (random value, empty, null, regenerate) apply to
//! null inputs as well; content operators (truncate, remove items, mutate one
//! element, ...) leave a null input unchanged, since there is no content to
//! edit.

use rand::Rng;

use crate::individual::{Individual, TestIdGen};
use crate::value::{Value, ValueType};

use super::{random_array_items, random_string_content, random_value};

/// Characters with a habit of breaking parsers: control bytes, quotes,
/// escapes, format and statement separators, and a BIDI override.
pub const SPECIAL_CHARS: [char; 11] = [
    '\0', '\n', '\r', '"', '\'', '\\', '%', ';', '{', '}', '\u{202E}',
];

/// Substituted strings this long stress length handling.
pub const VERY_LONG_STRING_LEN: usize = 4096;

/// Integer delta mutations move by up to this much, wrapping at the type's
/// bit width.
const MAX_INT_DELTA: u64 = 16;
/// Float delta mutations move by up to this much.
const MAX_FLOAT_DELTA: f64 = 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PrimitiveOp {
    Random,
    Zero,
    One,
    Max,
    Min,
    AddDelta,
    SubDelta,
    /// Char only.
    SpecialChar,
}

const PRIMITIVE_OPS: [PrimitiveOp; 7] = [
    PrimitiveOp::Random,
    PrimitiveOp::Zero,
    PrimitiveOp::One,
    PrimitiveOp::Max,
    PrimitiveOp::Min,
    PrimitiveOp::AddDelta,
    PrimitiveOp::SubDelta,
];

const CHAR_OPS: [PrimitiveOp; 8] = [
    PrimitiveOp::Random,
    PrimitiveOp::Zero,
    PrimitiveOp::One,
    PrimitiveOp::Max,
    PrimitiveOp::Min,
    PrimitiveOp::AddDelta,
    PrimitiveOp::SubDelta,
    PrimitiveOp::SpecialChar,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StringOp {
    Random,
    VeryLong,
    Truncate,
    AddSubstring,
    RemoveSubstring,
    ReplaceSpecial,
    Empty,
    Null,
}

const STRING_OPS: [StringOp; 8] = [
    StringOp::Random,
    StringOp::VeryLong,
    StringOp::Truncate,
    StringOp::AddSubstring,
    StringOp::RemoveSubstring,
    StringOp::ReplaceSpecial,
    StringOp::Empty,
    StringOp::Null,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ArrayOp {
    Random,
    RemoveItems,
    AddItems,
    MutateElement,
    Empty,
    Null,
}

const ARRAY_OPS: [ArrayOp; 6] = [
    ArrayOp::Random,
    ArrayOp::RemoveItems,
    ArrayOp::AddItems,
    ArrayOp::MutateElement,
    ArrayOp::Empty,
    ArrayOp::Null,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ObjectOp {
    Null,
    Regenerate,
    MutateField,
}

const OBJECT_OPS: [ObjectOp; 3] = [ObjectOp::Null, ObjectOp::Regenerate, ObjectOp::MutateField];

macro_rules! int_mutation {
    ($variant:ident, $ty:ty, $v:expr, $op:expr, $rng:expr) => {{
        let x: $ty = $v;
        let out = match $op {
            PrimitiveOp::Random => $rng.gen::<$ty>(),
            PrimitiveOp::Zero => 0,
            PrimitiveOp::One => 1,
            PrimitiveOp::Max => <$ty>::MAX,
            PrimitiveOp::Min => <$ty>::MIN,
            PrimitiveOp::AddDelta => {
                x.wrapping_add($rng.gen_range(1..=MAX_INT_DELTA) as $ty)
            }
            PrimitiveOp::SubDelta => {
                x.wrapping_sub($rng.gen_range(1..=MAX_INT_DELTA) as $ty)
            }
            PrimitiveOp::SpecialChar => unreachable!("special char is char-only"),
        };
        Value::$variant(out)
    }};
}

pub(crate) fn mutate_primitive_with<R: Rng>(v: &Value, op: PrimitiveOp, rng: &mut R) -> Value {
    match *v {
        Value::Boolean(b) => {
            // Booleans behave as integers modulo two.
            let out = match op {
                PrimitiveOp::Random => rng.gen::<bool>(),
                PrimitiveOp::Zero | PrimitiveOp::Min => false,
                PrimitiveOp::One | PrimitiveOp::Max => true,
                PrimitiveOp::AddDelta | PrimitiveOp::SubDelta => b ^ rng.gen::<bool>(),
                PrimitiveOp::SpecialChar => unreachable!("special char is char-only"),
            };
            Value::Boolean(out)
        }
        Value::Byte(x) => int_mutation!(Byte, i8, x, op, rng),
        Value::Short(x) => int_mutation!(Short, i16, x, op, rng),
        Value::Integer(x) => int_mutation!(Integer, i32, x, op, rng),
        Value::Long(x) => int_mutation!(Long, i64, x, op, rng),
        Value::Char(c) => {
            let out = match op {
                PrimitiveOp::Random => rng.gen::<char>(),
                PrimitiveOp::Zero | PrimitiveOp::Min => '\0',
                PrimitiveOp::One => '\u{1}',
                PrimitiveOp::Max => char::MAX,
                PrimitiveOp::AddDelta => {
                    let delta = rng.gen_range(1..=MAX_INT_DELTA) as u32;
                    super::index_to_char(super::char_to_index(c).wrapping_add(delta))
                }
                PrimitiveOp::SubDelta => {
                    let delta = rng.gen_range(1..=MAX_INT_DELTA) as u32;
                    let idx = super::char_to_index(c);
                    super::index_to_char(idx.wrapping_add(super::SCALAR_COUNT - delta % super::SCALAR_COUNT))
                }
                PrimitiveOp::SpecialChar => SPECIAL_CHARS[rng.gen_range(0..SPECIAL_CHARS.len())],
            };
            Value::Char(out)
        }
        Value::Float(x) => {
            let out = match op {
                PrimitiveOp::Random => super::random_f32(rng),
                PrimitiveOp::Zero => 0.0,
                PrimitiveOp::One => 1.0,
                PrimitiveOp::Max => f32::MAX,
                PrimitiveOp::Min => f32::MIN,
                PrimitiveOp::AddDelta => x + rng.gen_range(0.0..=MAX_FLOAT_DELTA) as f32,
                PrimitiveOp::SubDelta => x - rng.gen_range(0.0..=MAX_FLOAT_DELTA) as f32,
                PrimitiveOp::SpecialChar => unreachable!("special char is char-only"),
            };
            Value::Float(out)
        }
        Value::Double(x) => {
            let out = match op {
                PrimitiveOp::Random => super::random_f64(rng),
                PrimitiveOp::Zero => 0.0,
                PrimitiveOp::One => 1.0,
                PrimitiveOp::Max => f64::MAX,
                PrimitiveOp::Min => f64::MIN,
                PrimitiveOp::AddDelta => x + rng.gen_range(0.0..=MAX_FLOAT_DELTA),
                PrimitiveOp::SubDelta => x - rng.gen_range(0.0..=MAX_FLOAT_DELTA),
                PrimitiveOp::SpecialChar => unreachable!("special char is char-only"),
            };
            Value::Double(out)
        }
        _ => unreachable!("not a primitive: {v:?}"),
    }
}

pub(crate) fn mutate_string_with<R: Rng>(v: &Value, op: StringOp, rng: &mut R) -> Value {
    let content: Option<&str> = match v {
        Value::Str(s) => Some(s),
        Value::Null(_) => None,
        _ => unreachable!("not a string: {v:?}"),
    };
    match op {
        StringOp::Random => {
            let len = rng.gen_range(0..super::MAX_RANDOM_STRING_LEN);
            Value::Str(random_string_content(rng, len))
        }
        StringOp::VeryLong => Value::Str(random_string_content(rng, VERY_LONG_STRING_LEN)),
        StringOp::Empty => Value::Str(String::new()),
        StringOp::Null => Value::Null(Box::new(ValueType::String)),
        StringOp::Truncate => match content {
            Some(s) => {
                let chars: Vec<char> = s.chars().collect();
                let keep = rng.gen_range(0..=chars.len());
                Value::Str(chars[..keep].iter().collect())
            }
            None => v.clone(),
        },
        StringOp::AddSubstring => match content {
            Some(s) => {
                let mut chars: Vec<char> = s.chars().collect();
                let insert_len = rng.gen_range(1..=8);
                let sub: Vec<char> = random_string_content(rng, insert_len).chars().collect();
                let pos = rng.gen_range(0..=chars.len());
                chars.splice(pos..pos, sub);
                Value::Str(chars.into_iter().collect())
            }
            None => v.clone(),
        },
        StringOp::RemoveSubstring => match content {
            Some(s) if !s.is_empty() => {
                let mut chars: Vec<char> = s.chars().collect();
                let start = rng.gen_range(0..chars.len());
                let end = rng.gen_range(start + 1..=chars.len());
                chars.drain(start..end);
                Value::Str(chars.into_iter().collect())
            }
            _ => v.clone(),
        },
        StringOp::ReplaceSpecial => match content {
            Some(s) if !s.is_empty() => {
                let mut chars: Vec<char> = s.chars().collect();
                let pos = rng.gen_range(0..chars.len());
                chars[pos] = SPECIAL_CHARS[rng.gen_range(0..SPECIAL_CHARS.len())];
                Value::Str(chars.into_iter().collect())
            }
            _ => v.clone(),
        },
    }
}

pub(crate) fn mutate_array_with<R: Rng>(v: &Value, op: ArrayOp, rng: &mut R) -> Value {
    let (elem, items): (&ValueType, Option<&[Value]>) = match v {
        Value::Array { elem, items } => (elem, Some(items)),
        Value::Null(ty) => match &**ty {
            ValueType::Array(elem) => (elem, None),
            other => unreachable!("null array with non-array type {other:?}"),
        },
        _ => unreachable!("not an array: {v:?}"),
    };
    let boxed = Box::new(elem.clone());
    match op {
        ArrayOp::Random => Value::Array {
            elem: boxed.clone(),
            items: random_array_items(elem, rng),
        },
        ArrayOp::Empty => Value::Array { elem: boxed, items: Vec::new() },
        ArrayOp::Null => Value::Null(Box::new(ValueType::Array(boxed))),
        ArrayOp::RemoveItems => match items {
            Some(items) if !items.is_empty() => {
                let count = rng.gen_range(1..=items.len());
                let victims = rand::seq::index::sample(rng, items.len(), count);
                let keep: Vec<Value> = items
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !victims.iter().any(|v| v == *i))
                    .map(|(_, v)| v.clone())
                    .collect();
                Value::Array { elem: boxed, items: keep }
            }
            _ => v.clone(),
        },
        ArrayOp::AddItems => match items {
            Some(items) => {
                let mut out = items.to_vec();
                let count = rng.gen_range(1..=4);
                for _ in 0..count {
                    let pos = rng.gen_range(0..=out.len());
                    out.insert(pos, random_value(elem, rng));
                }
                Value::Array { elem: boxed, items: out }
            }
            None => v.clone(),
        },
        ArrayOp::MutateElement => match items {
            Some(items) if !items.is_empty() => {
                let mut out = items.to_vec();
                let pos = rng.gen_range(0..out.len());
                out[pos] = mutate_value(&out[pos], rng);
                Value::Array { elem: boxed, items: out }
            }
            _ => v.clone(),
        },
    }
}

pub(crate) fn mutate_object_with<R: Rng>(v: &Value, op: ObjectOp, rng: &mut R) -> Value {
    let ty = v.value_type();
    let (class_name, field_types) = match &ty {
        ValueType::Object { class_name, fields } => (class_name, fields),
        other => unreachable!("not an object: {other:?}"),
    };
    match op {
        ObjectOp::Null => Value::Null(Box::new(ty.clone())),
        ObjectOp::Regenerate => Value::Object {
            class_name: class_name.clone(),
            fields: field_types
                .iter()
                .map(|(n, t)| (n.clone(), random_value(t, rng)))
                .collect(),
        },
        ObjectOp::MutateField => match v {
            Value::Object { class_name, fields } if !fields.is_empty() => {
                let mut out = fields.clone();
                let pos = rng.gen_range(0..out.len());
                out[pos].1 = mutate_value(&out[pos].1, rng);
                Value::Object { class_name: class_name.clone(), fields: out }
            }
            _ => v.clone(),
        },
    }
}

/// Mutates a value with a uniformly drawn operator from its type's list.
/// The result always has the same declared type.
pub fn mutate_value<R: Rng>(v: &Value, rng: &mut R) -> Value {
    match v.value_type() {
        ValueType::Char => {
            let op = CHAR_OPS[rng.gen_range(0..CHAR_OPS.len())];
            mutate_primitive_with(v, op, rng)
        }
        ValueType::Boolean
        | ValueType::Byte
        | ValueType::Short
        | ValueType::Integer
        | ValueType::Long
        | ValueType::Float
        | ValueType::Double => {
            let op = PRIMITIVE_OPS[rng.gen_range(0..PRIMITIVE_OPS.len())];
            mutate_primitive_with(v, op, rng)
        }
        ValueType::String => {
            let op = STRING_OPS[rng.gen_range(0..STRING_OPS.len())];
            mutate_string_with(v, op, rng)
        }
        ValueType::Array(_) => {
            let op = ARRAY_OPS[rng.gen_range(0..ARRAY_OPS.len())];
            mutate_array_with(v, op, rng)
        }
        ValueType::Object { .. } => {
            let op = OBJECT_OPS[rng.gen_range(0..OBJECT_OPS.len())];
            mutate_object_with(v, op, rng)
        }
    }
}

/// Mutates exactly one uniformly chosen parameter and assigns a new test id.
/// An individual with no parameters comes back as a clone under a new id.
pub fn mutate_individual<R: Rng>(ind: &Individual, ids: &TestIdGen, rng: &mut R) -> Individual {
    let mut inputs = ind.inputs.clone();
    if !inputs.is_empty() {
        let pos = rng.gen_range(0..inputs.len());
        inputs[pos] = mutate_value(&inputs[pos], rng);
    }
    Individual { id: ids.next_id(), method: ind.method, inputs }
}
