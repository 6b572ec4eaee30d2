//! Typed values: the unit of fuzzed input.
//!
//! Every value carries enough type information to reconstruct its full
//! [`ValueType`], including the distinguished null marker, which keeps its
//! declared type so mutation operators still know what they are mutating.

use thiserror::Error;

/// Type tag for a method parameter or nested value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ValueType {
    Boolean,
    Byte,
    Char,
    Short,
    Integer,
    Long,
    Float,
    Double,
    String,
    Array(Box<ValueType>),
    Object {
        class_name: String,
        fields: Vec<(String, ValueType)>,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("duplicate field `{field}` in object `{class_name}`")]
    DuplicateField { class_name: String, field: String },
    #[error("invalid field name `{field}` in object `{class_name}`")]
    InvalidFieldName { class_name: String, field: String },
}

impl ValueType {
    /// Null markers are permitted only for reference-like types.
    pub fn is_nullable(&self) -> bool {
        matches!(
            self,
            ValueType::String | ValueType::Array(_) | ValueType::Object { .. }
        )
    }

    /// Checks object field-name uniqueness, recursively.
    pub fn validate(&self) -> Result<(), TypeError> {
        match self {
            ValueType::Array(elem) => elem.validate(),
            ValueType::Object { class_name, fields } => {
                let mut seen = std::collections::BTreeSet::new();
                for (name, ty) in fields {
                    if name.is_empty() || name.contains([':', ',', '{', '}', '<', '>']) {
                        return Err(TypeError::InvalidFieldName {
                            class_name: class_name.clone(),
                            field: name.clone(),
                        });
                    }
                    if !seen.insert(name.as_str()) {
                        return Err(TypeError::DuplicateField {
                            class_name: class_name.clone(),
                            field: name.clone(),
                        });
                    }
                    ty.validate()?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// A tagged, typed datum.
///
/// Equality is structural with floats compared by bit pattern, so NaN
/// payloads produced by bit-level crossover compare equal to themselves and
/// content-preservation properties hold.
#[derive(Debug, Clone)]
pub enum Value {
    Boolean(bool),
    Byte(i8),
    Short(i16),
    Integer(i32),
    Long(i64),
    Char(char),
    Float(f32),
    Double(f64),
    Str(String),
    Array {
        elem: Box<ValueType>,
        items: Vec<Value>,
    },
    Object {
        class_name: String,
        fields: Vec<(String, Value)>,
    },
    /// Null marker carrying the declared type (String, Array or Object only).
    Null(Box<ValueType>),
}

impl Value {
    /// Reconstructs the declared type of this value.
    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Boolean(_) => ValueType::Boolean,
            Value::Byte(_) => ValueType::Byte,
            Value::Short(_) => ValueType::Short,
            Value::Integer(_) => ValueType::Integer,
            Value::Long(_) => ValueType::Long,
            Value::Char(_) => ValueType::Char,
            Value::Float(_) => ValueType::Float,
            Value::Double(_) => ValueType::Double,
            Value::Str(_) => ValueType::String,
            Value::Array { elem, .. } => ValueType::Array(elem.clone()),
            Value::Object { class_name, fields } => ValueType::Object {
                class_name: class_name.clone(),
                fields: fields
                    .iter()
                    .map(|(n, v)| (n.clone(), v.value_type()))
                    .collect(),
            },
            Value::Null(ty) => (**ty).clone(),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null(_))
    }

    /// A value is well-formed if nulls only appear at nullable types and
    /// array elements match the declared element type, recursively.
    pub fn is_well_formed(&self) -> bool {
        match self {
            Value::Null(ty) => ty.is_nullable(),
            Value::Array { elem, items } => items
                .iter()
                .all(|v| v.is_well_formed() && v.value_type() == **elem),
            Value::Object { fields, .. } => fields.iter().all(|(_, v)| v.is_well_formed()),
            _ => true,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Boolean(a), Value::Boolean(b)) => a == b,
            (Value::Byte(a), Value::Byte(b)) => a == b,
            (Value::Short(a), Value::Short(b)) => a == b,
            (Value::Integer(a), Value::Integer(b)) => a == b,
            (Value::Long(a), Value::Long(b)) => a == b,
            (Value::Char(a), Value::Char(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Double(a), Value::Double(b)) => a.to_bits() == b.to_bits(),
            (Value::Str(a), Value::Str(b)) => a == b,
            (
                Value::Array { elem: ea, items: ia },
                Value::Array { elem: eb, items: ib },
            ) => ea == eb && ia == ib,
            (
                Value::Object { class_name: ca, fields: fa },
                Value::Object { class_name: cb, fields: fb },
            ) => ca == cb && fa == fb,
            (Value::Null(a), Value::Null(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_permitted_only_for_reference_types() {
        assert!(ValueType::String.is_nullable());
        assert!(ValueType::Array(Box::new(ValueType::Byte)).is_nullable());
        assert!(ValueType::Object { class_name: "X".into(), fields: vec![] }.is_nullable());
        assert!(!ValueType::Integer.is_nullable());
        assert!(!ValueType::Boolean.is_nullable());
    }

    #[test]
    fn value_type_roundtrip_through_null() {
        let ty = ValueType::Array(Box::new(ValueType::String));
        let v = Value::Null(Box::new(ty.clone()));
        assert_eq!(v.value_type(), ty);
        assert!(v.is_well_formed());
        assert!(!Value::Null(Box::new(ValueType::Integer)).is_well_formed());
    }

    #[test]
    fn object_field_names_must_be_unique() {
        let ty = ValueType::Object {
            class_name: "Dup".into(),
            fields: vec![
                ("a".into(), ValueType::Integer),
                ("a".into(), ValueType::String),
            ],
        };
        assert!(matches!(ty.validate(), Err(TypeError::DuplicateField { .. })));
    }

    #[test]
    fn nan_values_compare_equal_bitwise() {
        let a = Value::Double(f64::NAN);
        let b = Value::Double(f64::NAN);
        assert_eq!(a, b);
        let neg = Value::Double(-0.0);
        let pos = Value::Double(0.0);
        assert_ne!(neg, pos);
    }
}
