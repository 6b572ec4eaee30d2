//! The campaign driver: the generation loop, stop conditions, black-box
//! mode, persistence, and replay.
//!
//! One campaign owns its community, coverage state and RNG; given the same
//! seed, config and target it produces a byte-identical record stream.
//! Crashes never end the loop early unless the stop condition is a failure
//! limit, in which case the campaign halts at the exact crash record.
//!
//! In black-box mode execution is uninstrumented: records carry no coverage
//! and no fitness, the coverage state is never consulted, sizes stay fixed,
//! and offspring are mutants of uniformly selected parents. Coverage of a
//! black-box campaign is recovered later by replaying its records against an
//! instrumented target.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{CampaignConfig, ConfigError, StopCondition};
use crate::coverage::{BlockId, BranchId, ExecutionResult, GlobalCoverageState, Outcome};
use crate::encoding;
use crate::evolution::{
    evaluate_fitness, next_generation, select, update_global_coverage, update_target_sizes,
    BreedingRates, FitnessValue,
};
use crate::genome::{crossover, mutate_individual, random_individual, seeded_rng};
use crate::harness::{Call, SyntheticService, Target, TargetError};
use crate::individual::{Community, Individual, TestId, TestIdGen};
use crate::service::{DescriptorError, MethodId};

const CONFIG_FILE: &str = "config.json";
const TARGET_FILE: &str = "target.json";
const SUMMARY_FILE: &str = "summary.json";
const LOG_EXCERPT_LEN: usize = 200;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error("I/O error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: bad record: {msg}")]
    Record { file: String, line: usize, msg: String },
    #[error("target does not match the campaign: {0}")]
    DescriptorMismatch(String),
}

fn io_err(path: &Path, source: std::io::Error) -> CampaignError {
    CampaignError::Io { path: path.display().to_string(), source }
}

/// One executed test: the full individual, its coverage, and (outside
/// black-box mode) its fitness.
#[derive(Debug, Clone, PartialEq)]
pub struct TestRecord {
    pub generation: u32,
    pub individual: Individual,
    pub result: ExecutionResult,
    pub fitness: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct BranchHitDto {
    e: String,
    n: u64,
}

#[derive(Serialize, Deserialize)]
struct TestRecordDto {
    gen: u32,
    id: u64,
    method: u32,
    inputs: Vec<serde_json::Value>,
    blocks: Vec<String>,
    branches: Vec<BranchHitDto>,
    outcome: String,
    log: String,
    duration_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fitness: Option<f64>,
}

impl TestRecord {
    pub fn to_json_line(&self) -> String {
        let dto = TestRecordDto {
            gen: self.generation,
            id: self.individual.id.0,
            method: self.individual.method.0,
            inputs: self
                .individual
                .inputs
                .iter()
                .map(encoding::typed_value_to_json)
                .collect(),
            blocks: self.result.covered_blocks.iter().map(|b| b.0.clone()).collect(),
            branches: self
                .result
                .branch_hits
                .iter()
                .map(|(e, n)| BranchHitDto { e: e.0.clone(), n: *n })
                .collect(),
            outcome: self.result.outcome.as_str().to_string(),
            log: self.result.log.clone(),
            duration_ms: self.result.duration_ms,
            fitness: self.fitness,
        };
        serde_json::to_string(&dto).expect("record serialization cannot fail")
    }

    pub fn from_json_line(line: &str) -> Result<TestRecord, String> {
        let dto: TestRecordDto = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let inputs = dto
            .inputs
            .iter()
            .map(encoding::typed_value_from_json)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let outcome = Outcome::parse(&dto.outcome)
            .ok_or_else(|| format!("unknown outcome `{}`", dto.outcome))?;
        let mut branch_hits = std::collections::BTreeMap::new();
        for b in dto.branches {
            if b.n == 0 {
                return Err(format!("branch `{}` recorded zero hits", b.e));
            }
            branch_hits.insert(BranchId(b.e), b.n);
        }
        Ok(TestRecord {
            generation: dto.gen,
            individual: Individual {
                id: TestId(dto.id),
                method: MethodId(dto.method),
                inputs,
            },
            result: ExecutionResult {
                covered_blocks: dto.blocks.into_iter().map(BlockId).collect(),
                branch_hits,
                outcome,
                log: dto.log,
                duration_ms: dto.duration_ms,
            },
            fitness: dto.fitness,
        })
    }
}

/// Where executed test records go.
pub trait RecordSink {
    fn record(&mut self, rec: &TestRecord) -> Result<(), CampaignError>;
    fn generation_complete(&mut self, _generation: u32) -> Result<(), CampaignError> {
        Ok(())
    }
}

/// Discards records; campaign state still carries the summary.
pub struct NullSink;

impl RecordSink for NullSink {
    fn record(&mut self, _rec: &TestRecord) -> Result<(), CampaignError> {
        Ok(())
    }
}

/// Keeps every record in memory, mainly for replay without persistence.
#[derive(Default)]
pub struct MemorySink {
    pub records: Vec<TestRecord>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }
}

impl RecordSink for MemorySink {
    fn record(&mut self, rec: &TestRecord) -> Result<(), CampaignError> {
        self.records.push(rec.clone());
        Ok(())
    }
}

/// Streams records into a campaign directory: `config.json`, a verbatim copy
/// of the target file, one `gen-NNNNN.jsonl` per generation, and a final
/// `summary.json`.
pub struct DirSink {
    dir: PathBuf,
    current: Option<(u32, BufWriter<File>)>,
}

impl DirSink {
    pub fn create(
        dir: &Path,
        config: &CampaignConfig,
        target_json: &str,
    ) -> Result<Self, CampaignError> {
        if dir.exists() && dir.read_dir().map_err(|e| io_err(dir, e))?.next().is_some() {
            return Err(CampaignError::Io {
                path: dir.display().to_string(),
                source: std::io::Error::new(
                    std::io::ErrorKind::AlreadyExists,
                    "campaign directory exists and is not empty",
                ),
            });
        }
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let cfg_path = dir.join(CONFIG_FILE);
        let cfg_json = serde_json::to_string_pretty(&config.normalized())
            .expect("config serialization cannot fail");
        std::fs::write(&cfg_path, cfg_json).map_err(|e| io_err(&cfg_path, e))?;
        let target_path = dir.join(TARGET_FILE);
        std::fs::write(&target_path, target_json).map_err(|e| io_err(&target_path, e))?;
        Ok(DirSink { dir: dir.to_path_buf(), current: None })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn gen_path(&self, generation: u32) -> PathBuf {
        self.dir.join(format!("gen-{generation:05}.jsonl"))
    }

    /// Writes the final summary. Call after the campaign returns.
    pub fn finalize(mut self, state: &CampaignState) -> Result<(), CampaignError> {
        self.flush_current()?;
        let path = self.dir.join(SUMMARY_FILE);
        let summary = serde_json::to_string_pretty(&state.summary())
            .expect("summary serialization cannot fail");
        std::fs::write(&path, summary).map_err(|e| io_err(&path, e))
    }

    fn flush_current(&mut self) -> Result<(), CampaignError> {
        if let Some((gen, mut file)) = self.current.take() {
            file.flush().map_err(|e| io_err(&self.gen_path(gen), e))?;
        }
        Ok(())
    }
}

impl RecordSink for DirSink {
    fn record(&mut self, rec: &TestRecord) -> Result<(), CampaignError> {
        let needs_rotation = match &self.current {
            Some((gen, _)) => *gen != rec.generation,
            None => true,
        };
        if needs_rotation {
            self.flush_current()?;
            let path = self.gen_path(rec.generation);
            let file = File::create(&path).map_err(|e| io_err(&path, e))?;
            self.current = Some((rec.generation, BufWriter::new(file)));
        }
        let (gen, file) = self.current.as_mut().expect("file was just opened");
        let gen = *gen;
        writeln!(file, "{}", rec.to_json_line()).map_err(|e| io_err(&self.gen_path(gen), e))
    }

    fn generation_complete(&mut self, _generation: u32) -> Result<(), CampaignError> {
        self.flush_current()
    }
}

/// Cumulative distinct coverage after one generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenCoverage {
    pub generation: u32,
    pub blocks: usize,
    pub branches: usize,
}

/// A crash observed during the campaign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureNote {
    pub id: TestId,
    pub generation: u32,
    pub log_excerpt: String,
}

/// Everything a finished campaign knows about itself.
#[derive(Debug)]
pub struct CampaignState {
    pub config: CampaignConfig,
    pub community: Community,
    pub coverage: GlobalCoverageState,
    pub generation: u32,
    pub tests_executed: u64,
    pub failures: Vec<FailureNote>,
    /// Cumulative coverage per generation; empty for black-box campaigns.
    pub curve: Vec<GenCoverage>,
    /// Target sizes per generation, aligned with `community.populations`.
    pub size_history: Vec<Vec<usize>>,
    pub elapsed_ms: u64,
}

/// Distinct coverage totals and the per-generation curve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub generations: u32,
    pub tests_executed: u64,
    pub failures: usize,
    pub distinct_blocks: usize,
    pub distinct_branches: usize,
    pub curve: Vec<GenCoverage>,
}

impl CampaignState {
    pub fn summary(&self) -> CoverageSummary {
        CoverageSummary {
            generations: self.generation,
            tests_executed: self.tests_executed,
            failures: self.failures.len(),
            distinct_blocks: self.coverage.distinct_blocks(),
            distinct_branches: self.coverage.distinct_branches(),
            curve: self.curve.clone(),
        }
    }
}

/// Distinct counts over the union of all tests, with the cumulative
/// per-generation curve.
pub fn coverage_summary(state: &CampaignState) -> CoverageSummary {
    state.summary()
}

fn excerpt(log: &str) -> String {
    log.chars().take(LOG_EXCERPT_LEN).collect()
}

/// Runs one campaign to completion against `target`.
pub fn run_campaign(
    target: &mut dyn Target,
    config: &CampaignConfig,
    sink: &mut dyn RecordSink,
) -> Result<CampaignState, CampaignError> {
    let config = config.normalized();
    config.validate()?;
    let mut community = Community::new(
        target.descriptor().clone(),
        config.population_initial_target_size,
    )?;
    let ids = TestIdGen::new();
    let mut rng = seeded_rng(config.seed, 0);
    let signatures = community.service.methods.clone();
    for (pop, sig) in community.populations.iter_mut().zip(&signatures) {
        debug_assert_eq!(pop.method, sig.id);
        for _ in 0..config.population_initial_target_size {
            pop.individuals.push(random_individual(sig, &ids, &mut rng));
        }
    }

    let started = Instant::now();
    let mut state = CampaignState {
        config: config.clone(),
        community,
        coverage: GlobalCoverageState::new(),
        generation: 0,
        tests_executed: 0,
        failures: Vec::new(),
        curve: Vec::new(),
        size_history: Vec::new(),
        elapsed_ms: 0,
    };
    let failure_limit = match config.stop_condition {
        StopCondition::Failures(n) => Some(n as usize),
        _ => None,
    };

    loop {
        // Execute, analyze and save every individual in the community.
        let mut results: Vec<Vec<ExecutionResult>> = Vec::new();
        let mut halted = false;
        'exec: for pop in &state.community.populations {
            let mut pop_results = Vec::with_capacity(pop.individuals.len());
            for ind in &pop.individuals {
                let call = Call { method: ind.method, inputs: ind.inputs.clone() };
                let mut res = target.execute_call(&call);
                if config.blackbox {
                    // Uninstrumented run: nothing to observe but the outcome.
                    res.covered_blocks.clear();
                    res.branch_hits.clear();
                }
                if res.outcome == Outcome::Crash {
                    state.failures.push(FailureNote {
                        id: ind.id,
                        generation: state.generation,
                        log_excerpt: excerpt(&res.log),
                    });
                }
                pop_results.push(res);
                if failure_limit.is_some_and(|limit| state.failures.len() >= limit) {
                    halted = true;
                    results.push(pop_results);
                    break 'exec;
                }
            }
            results.push(pop_results);
        }

        // Fitness compares every individual of this generation against the
        // coverage state as of the end of the previous one.
        let fitness: Option<Vec<Vec<FitnessValue>>> = (!config.blackbox).then(|| {
            results
                .iter()
                .map(|rs| {
                    rs.iter()
                        .map(|r| evaluate_fitness(r, &state.coverage, config.fitness))
                        .collect()
                })
                .collect()
        });
        if !config.blackbox {
            for rs in &results {
                for r in rs {
                    update_global_coverage(&mut state.coverage, r);
                }
            }
        }
        for (pi, rs) in results.iter().enumerate() {
            let pop = &state.community.populations[pi];
            for (i, res) in rs.iter().enumerate() {
                sink.record(&TestRecord {
                    generation: state.generation,
                    individual: pop.individuals[i].clone(),
                    result: res.clone(),
                    fitness: fitness.as_ref().map(|f| f[pi][i].get()),
                })?;
                state.tests_executed += 1;
            }
        }
        if !config.blackbox {
            state.curve.push(GenCoverage {
                generation: state.generation,
                blocks: state.coverage.distinct_blocks(),
                branches: state.coverage.distinct_branches(),
            });
        }
        state
            .size_history
            .push(state.community.populations.iter().map(|p| p.target_size()).collect());
        sink.generation_complete(state.generation)?;
        state.generation += 1;
        state.elapsed_ms = started.elapsed().as_millis() as u64;

        let stop = halted
            || match config.stop_condition {
                StopCondition::Generations(g) => state.generation >= g,
                StopCondition::TimeLimitMs(ms) => state.elapsed_ms >= ms,
                StopCondition::Failures(n) => state.failures.len() >= n as usize,
            };
        if stop {
            break;
        }

        if !config.blackbox && config.community {
            let means: Vec<f64> = fitness
                .as_ref()
                .expect("fitness is evaluated outside black-box mode")
                .iter()
                .map(|fs| fs.iter().map(|f| f.get()).sum::<f64>() / fs.len() as f64)
                .collect();
            update_target_sizes(&mut state.community, &means, config.max_community_size);
        }

        let rates = BreedingRates {
            crossover: config.crossover_rate,
            mutation: config.mutation_rate,
        };
        if config.blackbox {
            next_generation(
                &mut state.community,
                rates,
                &ids,
                &mut rng,
                &mut |_, pop, rng| rng.gen_range(0..pop.individuals.len()),
                &mut |a, b, ids, rng| crossover(a, b, ids, rng),
                &mut |ind, ids, rng| mutate_individual(ind, ids, rng),
            );
        } else {
            let fitness = fitness.expect("fitness is evaluated outside black-box mode");
            let (kind, tour) = (config.selection, config.tour);
            next_generation(
                &mut state.community,
                rates,
                &ids,
                &mut rng,
                &mut |pi, pop, rng| select(pop, &fitness[pi], kind, tour, rng),
                &mut |a, b, ids, rng| crossover(a, b, ids, rng),
                &mut |ind, ids, rng| mutate_individual(ind, ids, rng),
            );
        }
    }

    state.elapsed_ms = started.elapsed().as_millis() as u64;
    Ok(state)
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

/// A campaign directory read back into memory.
pub struct LoadedCampaign {
    pub config: CampaignConfig,
    pub target_json: String,
    pub records: Vec<TestRecord>,
}

pub fn load_campaign(dir: &Path) -> Result<LoadedCampaign, CampaignError> {
    let cfg_path = dir.join(CONFIG_FILE);
    let cfg_src = std::fs::read_to_string(&cfg_path).map_err(|e| io_err(&cfg_path, e))?;
    let config: CampaignConfig =
        serde_json::from_str(&cfg_src).map_err(|e| CampaignError::Record {
            file: cfg_path.display().to_string(),
            line: 0,
            msg: e.to_string(),
        })?;
    let target_path = dir.join(TARGET_FILE);
    let target_json =
        std::fs::read_to_string(&target_path).map_err(|e| io_err(&target_path, e))?;

    let mut gen_files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("gen-") && n.ends_with(".jsonl"))
        })
        .collect();
    gen_files.sort();

    let mut records = Vec::new();
    for path in gen_files {
        let file = File::open(&path).map_err(|e| io_err(&path, e))?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| io_err(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = TestRecord::from_json_line(&line).map_err(|msg| CampaignError::Record {
                file: path.display().to_string(),
                line: i + 1,
                msg,
            })?;
            records.push(rec);
        }
    }
    Ok(LoadedCampaign { config, target_json, records })
}

/// The coverage report of a replayed campaign.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub summary: CoverageSummary,
    /// Records whose stored coverage disagrees with the re-execution.
    /// Nonzero means the recorded campaign was not reproducible.
    pub coverage_mismatches: u64,
}

/// Re-executes persisted individuals in their original order with coverage
/// enabled. Records that stored coverage are verified against the rerun.
pub fn replay_records(
    records: &[TestRecord],
    target: &mut dyn Target,
) -> Result<ReplayReport, CampaignError> {
    let descriptor = target.descriptor().clone();
    let mut blocks: BTreeSet<BlockId> = BTreeSet::new();
    let mut branches: BTreeSet<BranchId> = BTreeSet::new();
    let mut curve: Vec<GenCoverage> = Vec::new();
    let mut failures = 0usize;
    let mut mismatches = 0u64;

    for rec in records {
        let sig = descriptor.method(rec.individual.method).ok_or_else(|| {
            CampaignError::DescriptorMismatch(format!(
                "record {} calls method id {}, which the target does not expose",
                rec.individual.id, rec.individual.method
            ))
        })?;
        if !crate::individual::validate_individual(&rec.individual, sig) {
            return Err(CampaignError::DescriptorMismatch(format!(
                "record {} does not match the signature of `{}`",
                rec.individual.id, sig.name
            )));
        }
        let res = target.execute_call(&Call {
            method: rec.individual.method,
            inputs: rec.individual.inputs.clone(),
        });
        if res.outcome == Outcome::Crash {
            failures += 1;
        }
        let had_coverage =
            !rec.result.covered_blocks.is_empty() || !rec.result.branch_hits.is_empty();
        if had_coverage
            && (rec.result.covered_blocks != res.covered_blocks
                || rec.result.branch_hits != res.branch_hits)
        {
            mismatches += 1;
        }
        blocks.extend(res.covered_blocks);
        branches.extend(res.branch_hits.into_keys());
        match curve.last_mut() {
            Some(last) if last.generation == rec.generation => {
                last.blocks = blocks.len();
                last.branches = branches.len();
            }
            _ => curve.push(GenCoverage {
                generation: rec.generation,
                blocks: blocks.len(),
                branches: branches.len(),
            }),
        }
    }

    Ok(ReplayReport {
        summary: CoverageSummary {
            generations: curve.last().map_or(0, |g| g.generation + 1),
            tests_executed: records.len() as u64,
            failures,
            distinct_blocks: blocks.len(),
            distinct_branches: branches.len(),
            curve,
        },
        coverage_mismatches: mismatches,
    })
}

/// Replays a persisted campaign directory. With no explicit target, the
/// directory's own copy of the target file is used; an explicit target must
/// expose the same service descriptor.
pub fn replay_campaign(
    dir: &Path,
    external: Option<&mut dyn Target>,
) -> Result<ReplayReport, CampaignError> {
    let loaded = load_campaign(dir)?;
    let mut own = SyntheticService::from_json_str(&loaded.target_json)?;
    match external {
        Some(target) => {
            if target.descriptor() != own.list_methods() {
                return Err(CampaignError::DescriptorMismatch(format!(
                    "service `{}` does not match the recorded `{}` signatures",
                    target.descriptor().name,
                    own.list_methods().name,
                )));
            }
            replay_records(&loaded.records, target)
        }
        None => replay_records(&loaded.records, &mut own),
    }
}
