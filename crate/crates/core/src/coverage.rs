//! Coverage records: what one test executed, and what the whole campaign
//! has executed so far.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};

/// Rendering of the synthetic terminal in branch identifiers.
pub const TERMINAL: &str = "⊥";

/// Identifier of one basic block of the target.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub String);

impl std::fmt::Display for BlockId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BlockId {
    fn from(s: &str) -> Self {
        BlockId(s.to_string())
    }
}

/// Identifier of one control-flow edge, rendered as `from→to` with `⊥` for
/// the synthetic terminal. Branch coverage is strictly finer than block
/// coverage because a block's outgoing edges are distinguished.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BranchId(pub String);

impl BranchId {
    pub fn edge(from: &BlockId, to: Option<&BlockId>) -> Self {
        match to {
            Some(b) => BranchId(format!("{}→{}", from.0, b.0)),
            None => BranchId(format!("{}→{}", from.0, TERMINAL)),
        }
    }
}

impl std::fmt::Display for BranchId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BranchId {
    fn from(s: &str) -> Self {
        BranchId(s.to_string())
    }
}

/// How a single test ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Normal,
    HandledException,
    Crash,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Normal => "ok",
            Outcome::HandledException => "exception",
            Outcome::Crash => "crash",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(Outcome::Normal),
            "exception" => Some(Outcome::HandledException),
            "crash" => Some(Outcome::Crash),
            _ => None,
        }
    }
}

/// Coverage, outcome and log of one executed test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionResult {
    pub covered_blocks: BTreeSet<BlockId>,
    /// Per-execution hit count for each taken edge (≥ 1 where present).
    pub branch_hits: BTreeMap<BranchId, u64>,
    pub outcome: Outcome,
    pub log: String,
    pub duration_ms: u64,
}

impl ExecutionResult {
    pub fn empty(outcome: Outcome, log: impl Into<String>) -> Self {
        ExecutionResult {
            covered_blocks: BTreeSet::new(),
            branch_hits: BTreeMap::new(),
            outcome,
            log: log.into(),
            duration_ms: 0,
        }
    }
}

/// Cumulative coverage across all past test executions of a campaign.
///
/// The per-key getters count their invocations so tests can check that
/// black-box campaigns never consult coverage state.
#[derive(Debug, Clone, Default)]
pub struct GlobalCoverageState {
    pub(crate) block_exec_count: BTreeMap<BlockId, u64>,
    pub(crate) branch_hit_count: BTreeMap<BranchId, u64>,
    pub(crate) tests_executed: u64,
    reads: Cell<u64>,
}

impl GlobalCoverageState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of past executions that covered `block`.
    pub fn block_exec_count(&self, block: &BlockId) -> u64 {
        self.reads.set(self.reads.get() + 1);
        self.block_exec_count.get(block).copied().unwrap_or(0)
    }

    /// Cumulative hit count of `branch` across all past executions.
    pub fn branch_hit_count(&self, branch: &BranchId) -> u64 {
        self.reads.set(self.reads.get() + 1);
        self.branch_hit_count.get(branch).copied().unwrap_or(0)
    }

    pub fn tests_executed(&self) -> u64 {
        self.tests_executed
    }

    pub fn distinct_blocks(&self) -> usize {
        self.block_exec_count.len()
    }

    pub fn distinct_branches(&self) -> usize {
        self.branch_hit_count.len()
    }

    /// How many times the per-key getters were consulted.
    pub fn reads_observed(&self) -> u64 {
        self.reads.get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_edge_rendering() {
        let b0 = BlockId::from("b0");
        let b1 = BlockId::from("b1");
        assert_eq!(BranchId::edge(&b0, Some(&b1)).0, "b0→b1");
        assert_eq!(BranchId::edge(&b0, None).0, "b0→⊥");
    }

    #[test]
    fn outcome_strings_roundtrip() {
        for o in [Outcome::Normal, Outcome::HandledException, Outcome::Crash] {
            assert_eq!(Outcome::parse(o.as_str()), Some(o));
        }
        assert_eq!(Outcome::parse("weird"), None);
    }

    #[test]
    fn getters_count_reads() {
        let state = GlobalCoverageState::new();
        assert_eq!(state.reads_observed(), 0);
        let _ = state.block_exec_count(&BlockId::from("b0"));
        let _ = state.branch_hit_count(&BranchId::from("b0→⊥"));
        assert_eq!(state.reads_observed(), 2);
    }
}
