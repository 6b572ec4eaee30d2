//! Coverage-guided evolutionary fuzzing for multi-method service interfaces.
//!
//! A service exposes many methods; each method gets its own population of
//! typed input vectors, and the populations form a community whose relative
//! sizes are re-steered every generation toward the methods that keep finding
//! new code. Campaigns are deterministic given a seed, persist replayable
//! records, and ship with a nonparametric statistics pipeline for comparing
//! engines and configurations.
//!
//! Module map:
//! - [`value`], [`service`], [`individual`], [`coverage`], [`config`]: domain types
//! - [`encoding`]: canonical type expressions and value payloads
//! - [`genome`]: random generation, mutation, cascade crossover
//! - [`evolution`]: fitness, selection, community target-size dynamics
//! - [`harness`]: synthetic instrumented targets and the wire protocol
//! - [`campaign`]: the generation loop, persistence, replay
//! - [`stats`]: Mann-Whitney, Vargha-Delaney, Kruskal-Wallis, config ranking
//! - [`experiments`]: repetition runners behind the compare/rank commands

pub mod campaign;
pub mod config;
pub mod coverage;
pub mod encoding;
pub mod evolution;
pub mod experiments;
pub mod genome;
pub mod harness;
pub mod individual;
pub mod service;
pub mod stats;
pub mod value;

pub use config::{CampaignConfig, FitnessKind, SelectionKind, StopCondition};
pub use coverage::{BlockId, BranchId, ExecutionResult, GlobalCoverageState, Outcome};
pub use individual::{Community, Individual, Population, TestId, TestIdGen};
pub use service::{MethodId, MethodSignature, ServiceDescriptor};
pub use value::{Value, ValueType};
