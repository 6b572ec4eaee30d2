//! Campaign configuration and its defaults.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fitness function choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitnessKind {
    /// The fittest input is the one that executed the most blocks.
    ExecutedBlocks,
    /// Rewards blocks executed the least by the previous generations.
    LeastExecuted,
    /// Rewards branches with the lowest cumulative hit count, bucketed
    /// logarithmically.
    LeastBranchHitCount,
}

impl FitnessKind {
    pub const ALL: [FitnessKind; 3] = [
        FitnessKind::ExecutedBlocks,
        FitnessKind::LeastExecuted,
        FitnessKind::LeastBranchHitCount,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FitnessKind::ExecutedBlocks => "executed-blocks",
            FitnessKind::LeastExecuted => "least-executed",
            FitnessKind::LeastBranchHitCount => "least-branch-hit-count",
        }
    }
}

impl std::str::FromStr for FitnessKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown fitness kind `{s}`"))
    }
}

/// Selection algorithm choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionKind {
    /// Probability proportional to fitness (roulette wheel).
    FitnessProportionate,
    /// Probability proportional to the individual's rank, worst to best.
    Ranking,
    /// Best of `tour` individuals drawn without replacement.
    Tournament,
}

impl SelectionKind {
    pub const ALL: [SelectionKind; 3] = [
        SelectionKind::FitnessProportionate,
        SelectionKind::Ranking,
        SelectionKind::Tournament,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectionKind::FitnessProportionate => "fitness-proportionate",
            SelectionKind::Ranking => "ranking",
            SelectionKind::Tournament => "tournament",
        }
    }
}

impl std::str::FromStr for SelectionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown selection kind `{s}`"))
    }
}

/// When a campaign stops. Generation and time limits are checked at
/// generation boundaries; the failure limit stops at the exact crash record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCondition {
    Generations(u32),
    TimeLimitMs(u64),
    Failures(u32),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("population_initial_target_size must be at least 2, got {0}")]
    InitialSizeTooSmall(usize),
    #[error("{name} must lie in [0, 1], got {value}")]
    RateOutOfRange { name: &'static str, value: String },
    #[error("tour must be at least 1")]
    TourZero,
    #[error("max_community_size must be positive")]
    MaxCommunityZero,
    #[error("stop condition limit must be positive")]
    ZeroStopLimit,
}

/// All knobs of one fuzzing campaign. Defaults carry the engine's standard
/// tuning (initial size 10, 20 generations, community cap 200, crossover 80%,
/// mutation 5%, tour 5).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub population_initial_target_size: usize,
    pub stop_condition: StopCondition,
    pub max_community_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub tour: usize,
    pub fitness: FitnessKind,
    pub selection: SelectionKind,
    pub seed: u64,
    /// Mutation-only mode: no coverage feedback, no crossover, fixed sizes.
    pub blackbox: bool,
    /// When false, population target sizes stay fixed and equal.
    pub community: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            population_initial_target_size: 10,
            stop_condition: StopCondition::Generations(20),
            max_community_size: 200,
            crossover_rate: 0.8,
            mutation_rate: 0.05,
            tour: 5,
            fitness: FitnessKind::ExecutedBlocks,
            selection: SelectionKind::FitnessProportionate,
            seed: 0,
            blackbox: false,
            community: true,
        }
    }
}

impl CampaignConfig {
    /// Black-box mode forces crossover off and mutation on, and fixes
    /// population sizes. The returned config is what a campaign actually
    /// runs with and what gets persisted.
    pub fn normalized(&self) -> Self {
        let mut cfg = self.clone();
        if cfg.blackbox {
            cfg.crossover_rate = 0.0;
            cfg.mutation_rate = 1.0;
            cfg.community = false;
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.population_initial_target_size < 2 {
            return Err(ConfigError::InitialSizeTooSmall(
                self.population_initial_target_size,
            ));
        }
        for (name, value) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                return Err(ConfigError::RateOutOfRange { name, value: value.to_string() });
            }
        }
        if self.tour == 0 {
            return Err(ConfigError::TourZero);
        }
        if self.max_community_size == 0 {
            return Err(ConfigError::MaxCommunityZero);
        }
        match self.stop_condition {
            StopCondition::Generations(0) | StopCondition::Failures(0) => {
                Err(ConfigError::ZeroStopLimit)
            }
            StopCondition::TimeLimitMs(0) => Err(ConfigError::ZeroStopLimit),
            _ => Ok(()),
        }
    }
}
