//! Service descriptors: the input surface of a fuzz target.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::{TypeError, ValueType};

/// Identifier of a service method, unique within a descriptor.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct MethodId(pub u32);

impl std::fmt::Display for MethodId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One callable method: a name plus an ordered parameter list.
///
/// Names need not be unique (overloads); ids must be.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSignature {
    pub id: MethodId,
    pub name: String,
    pub params: Vec<ValueType>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DescriptorError {
    #[error("service `{0}` declares no methods")]
    NoMethods(String),
    #[error("duplicate method id {0}")]
    DuplicateMethodId(MethodId),
    #[error("method `{method}`: {source}")]
    BadParamType {
        method: String,
        #[source]
        source: TypeError,
    },
}

/// The public interface of a service under test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceDescriptor {
    pub name: String,
    pub methods: Vec<MethodSignature>,
}

impl ServiceDescriptor {
    pub fn validate(&self) -> Result<(), DescriptorError> {
        if self.methods.is_empty() {
            return Err(DescriptorError::NoMethods(self.name.clone()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.methods {
            if !seen.insert(m.id) {
                return Err(DescriptorError::DuplicateMethodId(m.id));
            }
            for p in &m.params {
                p.validate().map_err(|source| DescriptorError::BadParamType {
                    method: m.name.clone(),
                    source,
                })?;
            }
        }
        Ok(())
    }

    pub fn method(&self, id: MethodId) -> Option<&MethodSignature> {
        self.methods.iter().find(|m| m.id == id)
    }
}
