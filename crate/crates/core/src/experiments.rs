//! Repetition runners: paired engine comparisons and configuration sweeps.
//!
//! Repetitions are pairwise-seeded (`base_seed + rep`) and fully isolated,
//! so they can run on worker threads without affecting determinism; results
//! are collected by repetition index. Black-box campaigns record no coverage
//! while running — their records are replayed afterwards against an
//! instrumented copy of the target, mirroring how an uninstrumented engine
//! gets measured.
//!
//! Engine comparisons grant both sides an equal number of tests. The
//! optional `slowdown` factor inflates the black-box budget to model an
//! instrumented engine paying a per-test profiling cost while the
//! uninstrumented one keeps executing.

use std::collections::VecDeque;
use std::sync::Mutex;

use thiserror::Error;

use crate::campaign::{
    replay_records, run_campaign, CampaignError, CampaignState, MemorySink, NullSink,
};
use crate::config::{CampaignConfig, FitnessKind, SelectionKind, StopCondition};
use crate::harness::SyntheticService;
use crate::service::MethodId;
use crate::stats::{compare_groups, coverage_gain, ComparisonRow, CoverageGain, SampleGroup};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Campaign(#[from] CampaignError),
    #[error("all repetitions failed; first error: {0}")]
    AllFailed(String),
}

/// Shared knobs of a repetition experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOpts {
    pub reps: usize,
    pub generations: u32,
    pub base_seed: u64,
    pub jobs: usize,
    /// Per-test cost factor charged to the instrumented engine; the
    /// black-box side gets `slowdown` times as many tests.
    pub slowdown: Option<f64>,
}

impl Default for ExperimentOpts {
    fn default() -> Self {
        ExperimentOpts { reps: 10, generations: 20, base_seed: 0, jobs: 1, slowdown: None }
    }
}

/// What one repetition measured.
#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub seed: u64,
    pub generations: u32,
    pub tests: u64,
    pub distinct_blocks: usize,
    pub distinct_branches: usize,
    /// Target sizes per generation, aligned with `methods`.
    pub size_history: Vec<Vec<usize>>,
    pub methods: Vec<MethodId>,
}

fn outcome_from_state(state: &CampaignState) -> RepOutcome {
    RepOutcome {
        seed: state.config.seed,
        generations: state.generation,
        tests: state.tests_executed,
        distinct_blocks: state.coverage.distinct_blocks(),
        distinct_branches: state.coverage.distinct_branches(),
        size_history: state.size_history.clone(),
        methods: state.community.populations.iter().map(|p| p.method).collect(),
    }
}

/// Runs one campaign and measures its distinct coverage. Black-box campaigns
/// are measured by replaying their records against a fresh instrumented copy
/// of the target.
pub fn run_measured(
    svc: &SyntheticService,
    config: &CampaignConfig,
) -> Result<RepOutcome, CampaignError> {
    let mut target = svc.clone();
    if config.blackbox {
        let mut sink = MemorySink::new();
        let state = run_campaign(&mut target, config, &mut sink)?;
        let mut replay_target = svc.clone();
        let report = replay_records(&sink.records, &mut replay_target)?;
        Ok(RepOutcome {
            seed: state.config.seed,
            generations: state.generation,
            tests: state.tests_executed,
            distinct_blocks: report.summary.distinct_blocks,
            distinct_branches: report.summary.distinct_branches,
            size_history: state.size_history.clone(),
            methods: state.community.populations.iter().map(|p| p.method).collect(),
        })
    } else {
        let state = run_campaign(&mut target, config, &mut NullSink)?;
        Ok(outcome_from_state(&state))
    }
}

fn run_parallel<T, R, F>(items: Vec<T>, jobs: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let n = items.len();
    let jobs = jobs.max(1).min(n.max(1));
    let queue: Mutex<VecDeque<(usize, T)>> = Mutex::new(items.into_iter().enumerate().collect());
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let item = queue.lock().expect("queue lock").pop_front();
                match item {
                    Some((i, t)) => {
                        let r = f(t);
                        results.lock().expect("results lock")[i] = Some(r);
                    }
                    None => break,
                }
            });
        }
    });
    results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every item was processed"))
        .collect()
}

/// Two engines compared over paired repetitions.
#[derive(Debug)]
pub struct CompareReport {
    pub row: ComparisonRow,
    pub group_a: SampleGroup,
    pub group_b: SampleGroup,
    pub gain: CoverageGain,
    pub outcomes_a: Vec<RepOutcome>,
    pub outcomes_b: Vec<RepOutcome>,
    /// Repetition-level failures (the repetitions that succeeded still count).
    pub errors: Vec<String>,
}

fn build_report(
    label_a: &str,
    label_b: &str,
    pairs: Vec<Result<(RepOutcome, RepOutcome), CampaignError>>,
) -> Result<CompareReport, ExperimentError> {
    let mut outcomes_a = Vec::new();
    let mut outcomes_b = Vec::new();
    let mut errors = Vec::new();
    for pair in pairs {
        match pair {
            Ok((a, b)) => {
                outcomes_a.push(a);
                outcomes_b.push(b);
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    if outcomes_a.is_empty() {
        return Err(ExperimentError::AllFailed(
            errors.first().cloned().unwrap_or_else(|| "no repetitions ran".into()),
        ));
    }
    let group_a = SampleGroup::new(
        label_a,
        outcomes_a.iter().map(|o| o.distinct_blocks as f64).collect(),
    );
    let group_b = SampleGroup::new(
        label_b,
        outcomes_b.iter().map(|o| o.distinct_blocks as f64).collect(),
    );
    Ok(CompareReport {
        row: compare_groups(&group_a, &group_b),
        gain: coverage_gain(&group_a, &group_b),
        group_a,
        group_b,
        outcomes_a,
        outcomes_b,
        errors,
    })
}

/// The evolutionary engine against its black-box baseline, paired seeds,
/// equal test budgets (scaled by `slowdown` when given). The black-box side
/// runs uninstrumented and is measured by replay.
pub fn compare_evo_bb(
    svc: &SyntheticService,
    base: &CampaignConfig,
    opts: &ExperimentOpts,
) -> Result<CompareReport, ExperimentError> {
    let per_gen =
        (svc.list_methods().methods.len() * base.population_initial_target_size) as f64;
    let seeds: Vec<u64> = (0..opts.reps).map(|i| opts.base_seed.wrapping_add(i as u64)).collect();
    let pairs = run_parallel(seeds, opts.jobs, |seed| {
        let evo_cfg = CampaignConfig {
            seed,
            blackbox: false,
            stop_condition: StopCondition::Generations(opts.generations),
            ..base.clone()
        };
        let evo = run_measured(svc, &evo_cfg)?;
        let budget = evo.tests as f64 * opts.slowdown.unwrap_or(1.0);
        let bb_generations = (budget / per_gen).ceil().max(1.0) as u32;
        let bb_cfg = CampaignConfig {
            seed,
            blackbox: true,
            stop_condition: StopCondition::Generations(bb_generations),
            ..base.clone()
        };
        let bb = run_measured(svc, &bb_cfg)?;
        Ok((evo, bb))
    });
    build_report("EVO", "BB", pairs)
}

/// Two arbitrary configurations under identical generation budgets and
/// paired seeds.
pub fn compare_configs(
    svc: &SyntheticService,
    label_a: &str,
    config_a: &CampaignConfig,
    label_b: &str,
    config_b: &CampaignConfig,
    opts: &ExperimentOpts,
) -> Result<CompareReport, ExperimentError> {
    let seeds: Vec<u64> = (0..opts.reps).map(|i| opts.base_seed.wrapping_add(i as u64)).collect();
    let pairs = run_parallel(seeds, opts.jobs, |seed| {
        let mk = |cfg: &CampaignConfig| CampaignConfig {
            seed,
            stop_condition: StopCondition::Generations(opts.generations),
            ..cfg.clone()
        };
        Ok((run_measured(svc, &mk(config_a))?, run_measured(svc, &mk(config_b))?))
    });
    build_report(label_a, label_b, pairs)
}

/// The 3x3 fitness-by-selection configuration matrix.
pub fn matrix_configs(base: &CampaignConfig) -> Vec<(String, CampaignConfig)> {
    let mut out = Vec::with_capacity(9);
    for fitness in FitnessKind::ALL {
        for selection in SelectionKind::ALL {
            out.push((
                format!("{}/{}", fitness.as_str(), selection.as_str()),
                CampaignConfig { fitness, selection, blackbox: false, ..base.clone() },
            ));
        }
    }
    out
}

/// Three configurations varying only the fitness function.
pub fn fitness_configs(base: &CampaignConfig) -> Vec<(String, CampaignConfig)> {
    FitnessKind::ALL
        .into_iter()
        .map(|fitness| {
            (
                fitness.as_str().to_string(),
                CampaignConfig { fitness, blackbox: false, ..base.clone() },
            )
        })
        .collect()
}

/// Three configurations varying only the selection algorithm.
pub fn selection_configs(base: &CampaignConfig) -> Vec<(String, CampaignConfig)> {
    SelectionKind::ALL
        .into_iter()
        .map(|selection| {
            (
                selection.as_str().to_string(),
                CampaignConfig { selection, blackbox: false, ..base.clone() },
            )
        })
        .collect()
}

/// Runs `opts.reps` repetitions of every configuration and collects one
/// sample group per configuration (distinct-block counts). Failed
/// repetitions are reported and skipped.
pub fn run_config_groups(
    svc: &SyntheticService,
    configs: &[(String, CampaignConfig)],
    opts: &ExperimentOpts,
) -> Result<(Vec<SampleGroup>, Vec<String>), ExperimentError> {
    let mut items = Vec::with_capacity(configs.len() * opts.reps);
    for (ci, _) in configs.iter().enumerate() {
        for rep in 0..opts.reps {
            items.push((ci, opts.base_seed.wrapping_add(rep as u64)));
        }
    }
    let results = run_parallel(items, opts.jobs, |(ci, seed)| {
        let cfg = CampaignConfig {
            seed,
            stop_condition: StopCondition::Generations(opts.generations),
            ..configs[ci].1.clone()
        };
        (ci, run_measured(svc, &cfg))
    });

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); configs.len()];
    let mut errors = Vec::new();
    for (ci, outcome) in results {
        match outcome {
            Ok(o) => values[ci].push(o.distinct_blocks as f64),
            Err(e) => errors.push(format!("{}: {e}", configs[ci].0)),
        }
    }
    if values.iter().any(|v| v.is_empty()) {
        return Err(ExperimentError::AllFailed(
            errors.first().cloned().unwrap_or_else(|| "a configuration has no samples".into()),
        ));
    }
    let groups = configs
        .iter()
        .zip(values)
        .map(|((label, _), v)| SampleGroup::new(label.clone(), v))
        .collect();
    Ok((groups, errors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::seeded_rng;
    use crate::harness::{generate_benchmark, BenchmarkFamily};

    fn trivial_target() -> SyntheticService {
        generate_benchmark(&BenchmarkFamily::DeadBranch { fraction: 0.5 }, &mut seeded_rng(1, 0))
            .unwrap()
    }

    #[test]
    fn equal_engines_on_a_saturated_target_tie() {
        let svc = trivial_target();
        let opts = ExperimentOpts { reps: 3, generations: 3, base_seed: 7, jobs: 2, slowdown: None };
        let report = compare_evo_bb(&svc, &CampaignConfig::default(), &opts).unwrap();
        assert_eq!(report.gain.ratio, Some(1.0));
        assert_eq!(report.row.a_effect, 0.5);
        assert_eq!(report.row.p_value, 1.0);
        assert!(report.errors.is_empty());
        // Equal test budgets per pair, up to generation rounding on the
        // black-box side (its generations hold a fixed number of tests).
        let per_gen = 10;
        for (a, b) in report.outcomes_a.iter().zip(&report.outcomes_b) {
            assert_eq!(a.seed, b.seed);
            assert!(b.tests >= a.tests, "bb must not be short-changed");
            assert!(b.tests - a.tests < per_gen, "bb overshoot is below one generation");
        }
    }

    #[test]
    fn slowdown_grants_the_blackbox_side_more_tests() {
        let svc = trivial_target();
        let opts = ExperimentOpts {
            reps: 2,
            generations: 2,
            base_seed: 3,
            jobs: 1,
            slowdown: Some(3.0),
        };
        let report = compare_evo_bb(&svc, &CampaignConfig::default(), &opts).unwrap();
        for (a, b) in report.outcomes_a.iter().zip(&report.outcomes_b) {
            assert!(b.tests >= a.tests * 3, "bb got {} tests for evo's {}", b.tests, a.tests);
        }
    }

    #[test]
    fn parallel_and_serial_runs_agree() {
        let svc = trivial_target();
        let base = CampaignConfig::default();
        let serial =
            ExperimentOpts { reps: 4, generations: 2, base_seed: 11, jobs: 1, slowdown: None };
        let parallel = ExperimentOpts { jobs: 4, ..serial.clone() };
        let a = compare_evo_bb(&svc, &base, &serial).unwrap();
        let b = compare_evo_bb(&svc, &base, &parallel).unwrap();
        assert_eq!(a.group_a.values, b.group_a.values);
        assert_eq!(a.group_b.values, b.group_b.values);
    }

    #[test]
    fn config_groups_cover_the_matrix() {
        let svc = trivial_target();
        let base = CampaignConfig::default();
        let configs = matrix_configs(&base);
        assert_eq!(configs.len(), 9);
        let opts =
            ExperimentOpts { reps: 2, generations: 2, base_seed: 5, jobs: 4, slowdown: None };
        let (groups, errors) = run_config_groups(&svc, &configs, &opts).unwrap();
        assert!(errors.is_empty());
        assert_eq!(groups.len(), 9);
        assert!(groups.iter().all(|g| g.values.len() == 2));
        assert_eq!(fitness_configs(&base).len(), 3);
        assert_eq!(selection_configs(&base).len(), 3);
    }
}
