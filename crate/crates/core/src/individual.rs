//! Individuals, populations, and the community that co-evolves them.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::service::{DescriptorError, MethodId, MethodSignature, ServiceDescriptor};
use crate::value::Value;

/// Populations never shrink below this floor.
pub const MIN_POPULATION_SIZE: usize = 2;

/// Unique identifier of one generated test within a campaign.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TestId(pub u64);

impl std::fmt::Display for TestId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Sequential id allocator, shared immutably by the generation operators.
#[derive(Debug, Default)]
pub struct TestIdGen {
    next: Cell<u64>,
}

impl TestIdGen {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_id(&self) -> TestId {
        let id = self.next.get();
        self.next.set(id + 1);
        TestId(id)
    }
}

/// One candidate test: a method plus a typed input vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Individual {
    pub id: TestId,
    pub method: MethodId,
    pub inputs: Vec<Value>,
}

impl Individual {
    /// Content equality, ignoring the test id.
    pub fn same_content(&self, other: &Individual) -> bool {
        self.method == other.method && self.inputs == other.inputs
    }
}

/// True iff arity matches and every input's type equals the declared param
/// type, with null markers allowed only where the type permits them.
pub fn validate_individual(ind: &Individual, sig: &MethodSignature) -> bool {
    ind.method == sig.id
        && ind.inputs.len() == sig.params.len()
        && ind
            .inputs
            .iter()
            .zip(&sig.params)
            .all(|(v, p)| v.is_well_formed() && v.value_type() == *p)
}

/// The set of individuals targeting one method at one generation.
#[derive(Debug, Clone)]
pub struct Population {
    pub method: MethodId,
    pub individuals: Vec<Individual>,
    pub offspring: Vec<Individual>,
    target_size: usize,
}

impl Population {
    /// `target_size` is clamped to the floor of two.
    pub fn new(method: MethodId, target_size: usize) -> Self {
        Population {
            method,
            individuals: Vec::new(),
            offspring: Vec::new(),
            target_size: target_size.max(MIN_POPULATION_SIZE),
        }
    }

    pub fn target_size(&self) -> usize {
        self.target_size
    }

    pub fn grow_target(&mut self) {
        self.target_size += 1;
    }

    /// Shrinks the target by up to `amount`, never below the floor.
    /// Returns how much was actually taken.
    pub fn shrink_target(&mut self, amount: usize) -> usize {
        let room = self.target_size.saturating_sub(MIN_POPULATION_SIZE);
        let taken = room.min(amount);
        self.target_size -= taken;
        taken
    }

    /// Offspring take the place of the previous generation.
    pub fn promote_offspring(&mut self) {
        self.individuals = std::mem::take(&mut self.offspring);
    }
}

/// One population per method of a service, evolved as a whole.
#[derive(Debug, Clone)]
pub struct Community {
    pub service: ServiceDescriptor,
    pub populations: Vec<Population>,
}

impl Community {
    pub fn new(service: ServiceDescriptor, initial_target_size: usize) -> Result<Self, DescriptorError> {
        service.validate()?;
        let populations = service
            .methods
            .iter()
            .map(|m| Population::new(m.id, initial_target_size))
            .collect();
        Ok(Community { service, populations })
    }

    pub fn total_target_size(&self) -> usize {
        self.populations.iter().map(|p| p.target_size()).sum()
    }

    pub fn total_individuals(&self) -> usize {
        self.populations.iter().map(|p| p.individuals.len()).sum()
    }
}
