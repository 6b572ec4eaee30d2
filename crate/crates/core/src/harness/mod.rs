//! Executable fuzz targets: a deterministic synthetic-service interpreter
//! with block/branch instrumentation, benchmark generators, and a wire
//! protocol for external targets.

mod bench;
mod guard;
mod wire;

pub use bench::{generate_benchmark, BenchmarkFamily};
pub use guard::{Atom, CmpOp, GuardExpr, Literal, Proj, MAX_GUARD_ATOMS};
pub use wire::{serve, WireTarget, DEFAULT_WIRE_TIMEOUT};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{BlockId, BranchId, ExecutionResult, Outcome};
use crate::encoding;
use crate::service::{MethodId, MethodSignature, ServiceDescriptor};
use crate::value::Value;

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("I/O error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid target: {0}")]
    Validation(String),
    #[error("wire protocol error: {0}")]
    Wire(String),
}

/// Outcome override attached to a block. Reaching an effect block ends the
/// execution there, so the effect is always the last executed block's.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockEffect {
    RaiseHandled,
    Crash,
}

impl BlockEffect {
    fn as_str(self) -> &'static str {
        match self {
            BlockEffect::RaiseHandled => "raise-handled",
            BlockEffect::Crash => "crash",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "raise-handled" => Some(BlockEffect::RaiseHandled),
            "crash" => Some(BlockEffect::Crash),
            _ => None,
        }
    }
}

/// One basic block: a total guard plus its two outgoing edges. `None` edges
/// end execution at the synthetic terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDef {
    pub id: BlockId,
    pub guard: GuardExpr,
    pub on_true: Option<BlockId>,
    pub on_false: Option<BlockId>,
    pub effect: Option<BlockEffect>,
}

/// One method invocation against a target.
#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub method: MethodId,
    pub inputs: Vec<Value>,
}

/// Anything a campaign can execute tests against.
pub trait Target {
    fn descriptor(&self) -> &ServiceDescriptor;
    /// Runs one call. Harness-level failures are reported as `Crash`
    /// results, never as early campaign termination.
    fn execute_call(&mut self, call: &Call) -> ExecutionResult;
}

/// A deterministic, instrumented interpreter over a block graph. Blocks may
/// be shared between methods; each method's graph is a DAG from its entry.
#[derive(Debug, Clone)]
pub struct SyntheticService {
    descriptor: ServiceDescriptor,
    blocks: Vec<BlockDef>,
    index: BTreeMap<BlockId, usize>,
    entry: BTreeMap<MethodId, BlockId>,
}

impl SyntheticService {
    pub fn new(
        descriptor: ServiceDescriptor,
        blocks: Vec<BlockDef>,
        entry: BTreeMap<MethodId, BlockId>,
    ) -> Result<Self, TargetError> {
        let mut index = BTreeMap::new();
        for (i, b) in blocks.iter().enumerate() {
            if index.insert(b.id.clone(), i).is_some() {
                return Err(TargetError::Validation(format!(
                    "duplicate block id `{}`",
                    b.id
                )));
            }
        }
        let svc = SyntheticService { descriptor, blocks, index, entry };
        svc.validate()?;
        Ok(svc)
    }

    /// The descriptor, verbatim.
    pub fn list_methods(&self) -> &ServiceDescriptor {
        &self.descriptor
    }

    pub fn blocks(&self) -> &[BlockDef] {
        &self.blocks
    }

    pub fn entry(&self, method: MethodId) -> Option<&BlockId> {
        self.entry.get(&method)
    }

    fn validate(&self) -> Result<(), TargetError> {
        self.descriptor
            .validate()
            .map_err(|e| TargetError::Validation(e.to_string()))?;
        for b in &self.blocks {
            for edge in [&b.on_true, &b.on_false].into_iter().flatten() {
                if !self.index.contains_key(edge) {
                    return Err(TargetError::Validation(format!(
                        "block `{}` references unknown block `{edge}`",
                        b.id
                    )));
                }
            }
        }
        for m in &self.descriptor.methods {
            let entry = self.entry.get(&m.id).ok_or_else(|| {
                TargetError::Validation(format!("method `{}` (id {}) has no entry block", m.name, m.id))
            })?;
            if !self.index.contains_key(entry) {
                return Err(TargetError::Validation(format!(
                    "entry `{entry}` of method `{}` is not a known block",
                    m.name
                )));
            }
            self.check_method_graph(m, entry)?;
        }
        for id in self.entry.keys() {
            if self.descriptor.method(*id).is_none() {
                return Err(TargetError::Validation(format!(
                    "entry table references unknown method id {id}"
                )));
            }
        }
        Ok(())
    }

    /// DFS from the method entry: rejects cycles and type-checks every
    /// reachable guard against this method's parameters.
    fn check_method_graph(
        &self,
        method: &MethodSignature,
        entry: &BlockId,
    ) -> Result<(), TargetError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            OnPath,
            Done,
        }
        let mut marks: BTreeMap<&BlockId, Mark> = BTreeMap::new();
        let mut stack: Vec<(&BlockId, u8)> = vec![(entry, 0)];
        marks.insert(entry, Mark::OnPath);
        self.check_guard(method, entry)?;
        while let Some((block, phase)) = stack.pop() {
            let def = &self.blocks[self.index[block]];
            let next = match phase {
                0 => def.on_true.as_ref(),
                1 => def.on_false.as_ref(),
                _ => {
                    marks.insert(block, Mark::Done);
                    continue;
                }
            };
            stack.push((block, phase + 1));
            if let Some(next) = next {
                match marks.get(next) {
                    Some(Mark::OnPath) => {
                        return Err(TargetError::Validation(format!(
                            "cycle through block `{next}` reachable from method `{}`",
                            method.name
                        )));
                    }
                    Some(Mark::Done) => {}
                    None => {
                        self.check_guard(method, next)?;
                        marks.insert(next, Mark::OnPath);
                        stack.push((next, 0));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_guard(&self, method: &MethodSignature, block: &BlockId) -> Result<(), TargetError> {
        let def = &self.blocks[self.index[block]];
        def.guard.typecheck(&method.params).map_err(|e| {
            TargetError::Validation(format!(
                "block `{block}` (reachable from method `{}`): {e}",
                method.name
            ))
        })
    }

    /// Deterministic interpretation from the method's entry block. Every
    /// taken edge is recorded, including edges to the synthetic terminal.
    /// Panics on an invalid call: the fuzzer never produces one.
    pub fn execute(&self, call: &Call) -> ExecutionResult {
        let sig = self
            .descriptor
            .method(call.method)
            .unwrap_or_else(|| panic!("call references unknown method id {}", call.method));
        assert!(
            call.inputs.len() == sig.params.len()
                && call
                    .inputs
                    .iter()
                    .zip(&sig.params)
                    .all(|(v, p)| v.is_well_formed() && v.value_type() == *p),
            "call does not match the signature of `{}`",
            sig.name
        );

        let mut covered_blocks = BTreeSet::new();
        let mut branch_hits: BTreeMap<BranchId, u64> = BTreeMap::new();
        let mut outcome = Outcome::Normal;
        let mut log = String::new();
        let mut current = self.entry[&call.method].clone();
        loop {
            covered_blocks.insert(current.clone());
            let def = &self.blocks[self.index[&current]];
            if let Some(effect) = def.effect {
                outcome = match effect {
                    BlockEffect::RaiseHandled => Outcome::HandledException,
                    BlockEffect::Crash => Outcome::Crash,
                };
                log = format!("{} at block {}", effect.as_str(), current);
                break;
            }
            let taken = def.guard.eval(&call.inputs);
            let next = if taken { def.on_true.as_ref() } else { def.on_false.as_ref() };
            *branch_hits
                .entry(BranchId::edge(&current, next))
                .or_insert(0) += 1;
            match next {
                Some(b) => current = b.clone(),
                None => break,
            }
        }
        ExecutionResult { covered_blocks, branch_hits, outcome, log, duration_ms: 0 }
    }

    // -- persistence ---------------------------------------------------------

    pub fn from_json_str(src: &str) -> Result<Self, TargetError> {
        let dto: TargetDto =
            serde_json::from_str(src).map_err(|e| TargetError::Parse(e.to_string()))?;
        dto.try_into()
    }

    pub fn to_json_string(&self) -> String {
        let dto = TargetDto::from(self);
        serde_json::to_string_pretty(&dto).expect("target serialization cannot fail")
    }

    pub fn load(path: &Path) -> Result<Self, TargetError> {
        let src = std::fs::read_to_string(path).map_err(|source| TargetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&src)
    }

    pub fn save(&self, path: &Path) -> Result<(), TargetError> {
        std::fs::write(path, self.to_json_string()).map_err(|source| TargetError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

impl Target for SyntheticService {
    fn descriptor(&self) -> &ServiceDescriptor {
        &self.descriptor
    }

    fn execute_call(&mut self, call: &Call) -> ExecutionResult {
        self.execute(call)
    }
}

// ---------------------------------------------------------------------------
// Target definition file
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TargetDto {
    name: String,
    methods: Vec<MethodDto>,
    blocks: Vec<BlockDto>,
    entry: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct MethodDto {
    id: u32,
    name: String,
    params: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct BlockDto {
    id: String,
    guard: String,
    on_true: Option<String>,
    on_false: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    effect: Option<String>,
}

impl TryFrom<TargetDto> for SyntheticService {
    type Error = TargetError;

    fn try_from(dto: TargetDto) -> Result<Self, TargetError> {
        let methods = dto
            .methods
            .iter()
            .map(|m| {
                let params = m
                    .params
                    .iter()
                    .map(|p| {
                        encoding::parse_type_expr(p).map_err(|e| {
                            TargetError::Parse(format!("method `{}`: {e}", m.name))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(MethodSignature { id: MethodId(m.id), name: m.name.clone(), params })
            })
            .collect::<Result<Vec<_>, TargetError>>()?;
        let blocks = dto
            .blocks
            .iter()
            .map(|b| {
                let guard = GuardExpr::parse(&b.guard)
                    .map_err(|e| TargetError::Parse(format!("block `{}`: {e}", b.id)))?;
                let effect = match &b.effect {
                    None => None,
                    Some(s) => Some(BlockEffect::parse(s).ok_or_else(|| {
                        TargetError::Parse(format!("block `{}`: unknown effect `{s}`", b.id))
                    })?),
                };
                Ok(BlockDef {
                    id: BlockId(b.id.clone()),
                    guard,
                    on_true: b.on_true.clone().map(BlockId),
                    on_false: b.on_false.clone().map(BlockId),
                    effect,
                })
            })
            .collect::<Result<Vec<_>, TargetError>>()?;
        let entry = dto
            .entry
            .iter()
            .map(|(k, v)| {
                let id: u32 = k.parse().map_err(|_| {
                    TargetError::Parse(format!("entry key `{k}` is not a method id"))
                })?;
                Ok((MethodId(id), BlockId(v.clone())))
            })
            .collect::<Result<BTreeMap<_, _>, TargetError>>()?;
        SyntheticService::new(
            ServiceDescriptor { name: dto.name, methods },
            blocks,
            entry,
        )
    }
}

impl From<&SyntheticService> for TargetDto {
    fn from(svc: &SyntheticService) -> Self {
        TargetDto {
            name: svc.descriptor.name.clone(),
            methods: svc
                .descriptor
                .methods
                .iter()
                .map(|m| MethodDto {
                    id: m.id.0,
                    name: m.name.clone(),
                    params: m.params.iter().map(encoding::type_expr).collect(),
                })
                .collect(),
            blocks: svc
                .blocks
                .iter()
                .map(|b| BlockDto {
                    id: b.id.0.clone(),
                    guard: b.guard.to_string(),
                    on_true: b.on_true.as_ref().map(|b| b.0.clone()),
                    on_false: b.on_false.as_ref().map(|b| b.0.clone()),
                    effect: b.effect.map(|e| e.as_str().to_string()),
                })
                .collect(),
            entry: svc
                .entry
                .iter()
                .map(|(m, b)| (m.0.to_string(), b.0.clone()))
                .collect(),
        }
    }
}
