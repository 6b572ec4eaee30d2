//! Synthetic benchmark families.
//!
//! - `gate-chain(depth)`: one method over a byte array where block `i+1` is
//!   guarded by `input[i] == constant_i`. Gate constants are drawn from byte
//!   boundary values (0, 1, max, min) so the standard mutation operator set
//!   can open them; deeper coverage then hinges on retaining partial progress,
//!   which is what coverage feedback provides.
//! - `shared-core(methods, core-depth)`: all methods funnel into one shared
//!   core block; all but the last reach only a one-block stub, the last
//!   (named `deep`) runs a prologue and then a gate chain.
//! - `dead-branch(fraction)`: that fraction of the payload blocks sits behind
//!   an always-false guard, unreachable by any input.

use std::collections::BTreeMap;

use rand::Rng;

use crate::coverage::BlockId;
use crate::service::{MethodId, MethodSignature, ServiceDescriptor};
use crate::value::ValueType;

use super::guard::{Atom, CmpOp, GuardExpr, Literal, Proj};
use super::{BlockDef, SyntheticService, TargetError};

/// Parameters of one generated benchmark target.
#[derive(Debug, Clone, PartialEq)]
pub enum BenchmarkFamily {
    GateChain { depth: usize },
    SharedCore { methods: usize, core_depth: usize },
    DeadBranch { fraction: f64 },
}

/// Payload blocks of a dead-branch target, split between the live and the
/// dead chain.
pub const DEAD_BRANCH_PAYLOAD_BLOCKS: usize = 10;

/// Gate constants the mutation operators can plausibly produce.
const GATE_BYTES: [i8; 4] = [0, 1, i8::MAX, i8::MIN];

fn always_block(id: &str, next: Option<&str>) -> BlockDef {
    BlockDef {
        id: BlockId::from(id),
        guard: GuardExpr::Always,
        on_true: next.map(BlockId::from),
        on_false: None,
        effect: None,
    }
}

fn byte_gate(param: usize, index: usize, constant: i8) -> GuardExpr {
    GuardExpr::Or(vec![vec![Atom::Cmp {
        proj: Proj::Index(Box::new(Proj::Param(param)), index),
        op: CmpOp::Eq,
        lit: Literal::Int(constant as i64),
    }]])
}

fn gate_chain_blocks<R: Rng>(
    prefix: &str,
    depth: usize,
    fail_to: Option<&str>,
    tail: Option<&str>,
    rng: &mut R,
) -> Vec<BlockDef> {
    let mut blocks = Vec::with_capacity(depth + 1);
    for i in 0..depth {
        let constant = GATE_BYTES[rng.gen_range(0..GATE_BYTES.len())];
        let next = if i + 1 < depth {
            format!("{prefix}{}", i + 1)
        } else {
            match tail {
                Some(t) => t.to_string(),
                None => format!("{prefix}{depth}"),
            }
        };
        blocks.push(BlockDef {
            id: BlockId(format!("{prefix}{i}")),
            guard: byte_gate(0, i, constant),
            on_true: Some(BlockId(next)),
            on_false: fail_to.map(BlockId::from),
            effect: None,
        });
    }
    blocks
}

/// Builds one of the benchmark targets, deterministically for a given RNG
/// state. The result always passes target validation.
pub fn generate_benchmark<R: Rng>(
    family: &BenchmarkFamily,
    rng: &mut R,
) -> Result<SyntheticService, TargetError> {
    match family {
        BenchmarkFamily::GateChain { depth } => gate_chain(*depth, rng),
        BenchmarkFamily::SharedCore { methods, core_depth } => {
            shared_core(*methods, *core_depth, rng)
        }
        BenchmarkFamily::DeadBranch { fraction } => dead_branch(*fraction),
    }
}

fn gate_chain<R: Rng>(depth: usize, rng: &mut R) -> Result<SyntheticService, TargetError> {
    if depth == 0 {
        return Err(TargetError::Validation("gate-chain depth must be positive".into()));
    }
    let descriptor = ServiceDescriptor {
        name: format!("gate-chain-{depth}"),
        methods: vec![MethodSignature {
            id: MethodId(0),
            name: "process".into(),
            params: vec![ValueType::Array(Box::new(ValueType::Byte))],
        }],
    };
    // Blocks g0..g{depth-1} are the gates; g{depth} is the final block, so an
    // input whose first k bytes are correct covers exactly k+1 blocks.
    let mut blocks = gate_chain_blocks("g", depth, None, None, rng);
    blocks.push(always_block(&format!("g{depth}"), None));
    let entry = BTreeMap::from([(MethodId(0), BlockId::from("g0"))]);
    SyntheticService::new(descriptor, blocks, entry)
}

fn shared_core<R: Rng>(
    methods: usize,
    core_depth: usize,
    rng: &mut R,
) -> Result<SyntheticService, TargetError> {
    if methods < 2 || core_depth == 0 {
        return Err(TargetError::Validation(
            "shared-core needs at least 2 methods and a positive core depth".into(),
        ));
    }
    let mut signatures = Vec::with_capacity(methods);
    for i in 0..methods - 1 {
        signatures.push(MethodSignature {
            id: MethodId(i as u32),
            name: format!("stub_{i}"),
            params: vec![ValueType::Integer],
        });
    }
    let deep_id = MethodId((methods - 1) as u32);
    signatures.push(MethodSignature {
        id: deep_id,
        name: "deep".into(),
        params: vec![ValueType::Array(Box::new(ValueType::Byte))],
    });

    let mut blocks = vec![always_block("core", None)];
    let mut entry = BTreeMap::new();
    for i in 0..methods - 1 {
        let id = format!("stub_{i}");
        blocks.push(always_block(&id, Some("core")));
        entry.insert(MethodId(i as u32), BlockId(id));
    }
    // The deep method runs a prologue before its first gate, so it covers one
    // block more than the stubs from the very first generation and the
    // community steers budget toward it before any gate opens.
    blocks.push(always_block("deep_pre", Some("gate0")));
    blocks.extend(gate_chain_blocks("gate", core_depth, Some("core"), Some("deep_end"), rng));
    blocks.push(always_block("deep_end", Some("core")));
    entry.insert(deep_id, BlockId::from("deep_pre"));

    let descriptor = ServiceDescriptor {
        name: format!("shared-core-{methods}x{core_depth}"),
        methods: signatures,
    };
    SyntheticService::new(descriptor, blocks, entry)
}

fn dead_branch(fraction: f64) -> Result<SyntheticService, TargetError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(TargetError::Validation(format!(
            "dead-branch fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let dead = (fraction * DEAD_BRANCH_PAYLOAD_BLOCKS as f64).round() as usize;
    let live = DEAD_BRANCH_PAYLOAD_BLOCKS - dead;
    let descriptor = ServiceDescriptor {
        name: format!("dead-branch-{fraction}"),
        methods: vec![MethodSignature {
            id: MethodId(0),
            name: "run".into(),
            params: vec![ValueType::Integer],
        }],
    };
    let mut blocks = vec![BlockDef {
        id: BlockId::from("split"),
        guard: GuardExpr::Never,
        on_true: (dead > 0).then(|| BlockId::from("dead_0")),
        on_false: (live > 0).then(|| BlockId::from("live_0")),
        effect: None,
    }];
    for i in 0..dead {
        let next = (i + 1 < dead).then(|| format!("dead_{}", i + 1));
        blocks.push(always_block(&format!("dead_{i}"), next.as_deref()));
    }
    for i in 0..live {
        let next = (i + 1 < live).then(|| format!("live_{}", i + 1));
        blocks.push(always_block(&format!("live_{i}"), next.as_deref()));
    }
    let entry = BTreeMap::from([(MethodId(0), BlockId::from("split"))]);
    SyntheticService::new(descriptor, blocks, entry)
}
