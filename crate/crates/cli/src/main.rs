//! Command-line driver binding targets, campaigns and statistics into
//! reproducible experiments.
//!
//! Exit codes: 0 success, 1 input validation, 2 I/O, 3 internal failure.

mod reports;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use evofuzz_core::campaign::{replay_campaign, run_campaign, CampaignError, DirSink};
use evofuzz_core::config::{CampaignConfig, FitnessKind, SelectionKind, StopCondition};
use evofuzz_core::experiments::{
    compare_evo_bb, fitness_configs, matrix_configs, run_config_groups, selection_configs,
    ExperimentError, ExperimentOpts,
};
use evofuzz_core::genome::seeded_rng;
use evofuzz_core::harness::{
    generate_benchmark, serve, BenchmarkFamily, SyntheticService, TargetError, WireTarget,
};
use evofuzz_core::stats::{kruskal_wallis, rank_configurations};

#[derive(Parser)]
#[command(
    name = "evofuzz",
    version,
    about = "Coverage-guided evolutionary fuzzing for multi-method service interfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one fuzzing campaign and persist it to a campaign directory
    Fuzz(FuzzArgs),
    /// Compare the evolutionary engine against the black-box baseline
    Compare(CompareArgs),
    /// Rank fitness/selection configurations by pairwise comparisons
    Rank(RankArgs),
    /// Re-execute a persisted campaign and emit its coverage curve
    Replay(ReplayArgs),
    /// Generate a synthetic benchmark target file
    #[command(name = "gen-target")]
    GenTarget(GenTargetArgs),
    /// Serve a synthetic target over the wire protocol on stdin/stdout
    Serve(ServeArgs),
}

fn parse_fitness(s: &str) -> Result<FitnessKind, String> {
    s.parse()
}

fn parse_selection(s: &str) -> Result<SelectionKind, String> {
    s.parse()
}

/// The genetic-algorithm parameters, shared by every campaign-running
/// subcommand. Defaults are the engine's standard tuning.
#[derive(Args, Clone)]
struct EngineArgs {
    #[arg(long, default_value_t = 10)]
    population_initial_target_size: usize,
    #[arg(long, default_value_t = 200)]
    max_community_size: usize,
    #[arg(long, default_value_t = 0.8)]
    crossover_rate: f64,
    #[arg(long, default_value_t = 0.05)]
    mutation_rate: f64,
    /// Tournament size for tournament selection
    #[arg(long, default_value_t = 5)]
    tour: usize,
    /// Fitness function: executed-blocks, least-executed, least-branch-hit-count
    #[arg(long, default_value = "executed-blocks", value_parser = parse_fitness)]
    fitness: FitnessKind,
    /// Selection algorithm: fitness-proportionate, ranking, tournament
    #[arg(long, default_value = "fitness-proportionate", value_parser = parse_selection)]
    selection: SelectionKind,
    /// Keep population target sizes fixed and equal (disable the community
    /// budget steering)
    #[arg(long)]
    no_community: bool,
}

impl EngineArgs {
    fn config(&self, seed: u64, stop: StopCondition) -> CampaignConfig {
        CampaignConfig {
            population_initial_target_size: self.population_initial_target_size,
            stop_condition: stop,
            max_community_size: self.max_community_size,
            crossover_rate: self.crossover_rate,
            mutation_rate: self.mutation_rate,
            tour: self.tour,
            fitness: self.fitness,
            selection: self.selection,
            seed,
            blackbox: false,
            community: !self.no_community,
        }
    }
}

#[derive(Args)]
struct FuzzArgs {
    /// Target definition file
    #[arg(long)]
    target: PathBuf,
    /// Campaign output directory (default: `<target stem>.campaign.s<seed>`)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop after this many generations
    #[arg(long, default_value_t = 20)]
    generations: u32,
    /// Stop after this many seconds instead of a generation limit
    #[arg(long, conflicts_with = "failure_limit")]
    time_limit_secs: Option<u64>,
    /// Stop at the nth crash instead of a generation limit
    #[arg(long)]
    failure_limit: Option<u32>,
    /// Mutation-only black-box mode: no coverage feedback, no crossover
    #[arg(long)]
    blackbox: bool,
    #[command(flatten)]
    engine: EngineArgs,
    /// Execute tests against this external harness command (whitespace-split)
    /// instead of the built-in interpreter
    #[arg(long)]
    wire_cmd: Option<String>,
    #[arg(long, default_value_t = 5000)]
    wire_timeout_ms: u64,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    target: PathBuf,
    /// Report directory (default: `compare-report`)
    #[arg(long, default_value = "compare-report")]
    out: PathBuf,
    /// Paired repetitions per engine
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Generations per evolutionary campaign; the black-box side gets the
    /// same number of tests
    #[arg(long, default_value_t = 20)]
    generations: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Charge the instrumented engine this per-test profiling cost: the
    /// black-box side receives `slowdown` times as many tests
    #[arg(long)]
    slowdown: Option<f64>,
    /// Worker threads for repetitions (default: available parallelism)
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    target: PathBuf,
    /// Report directory (default: `rank-report`)
    #[arg(long, default_value = "rank-report")]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 20)]
    generations: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Significance level for pairwise wins
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    jobs: Option<usize>,
    /// Only vary the fitness function (3 groups, Kruskal-Wallis)
    #[arg(long, conflicts_with = "selection_only")]
    fitness_only: bool,
    /// Only vary the selection algorithm (3 groups, Kruskal-Wallis)
    #[arg(long)]
    selection_only: bool,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct ReplayArgs {
    /// Campaign directory to replay
    #[arg(long)]
    campaign: PathBuf,
    /// Replay against this target file instead of the campaign's own copy
    /// (signatures must match)
    #[arg(long)]
    target: Option<PathBuf>,
    /// Where to write the coverage report (default: `<campaign>/replay.json`)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenTargetArgs {
    #[command(subcommand)]
    family: FamilyCommand,
}

#[derive(Subcommand)]
enum FamilyCommand {
    /// One byte-array method behind a chain of byte-equality gates
    GateChain {
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "gate-chain.json")]
        out: PathBuf,
    },
    /// Many stub methods and one deep method sharing a core block
    SharedCore {
        #[arg(long, default_value_t = 11)]
        methods: usize,
        #[arg(long, default_value_t = 8)]
        core_depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "shared-core.json")]
        out: PathBuf,
    },
    /// A fraction of blocks behind an always-false guard
    DeadBranch {
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "dead-branch.json")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    target: PathBuf,
}

/// Errors mapped onto the documented exit codes.
enum CliError {
    Input(String),
    Io(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Io(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Io(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<TargetError> for CliError {
    fn from(e: TargetError) -> Self {
        match e {
            TargetError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<CampaignError> for CliError {
    fn from(e: CampaignError) -> Self {
        match e {
            CampaignError::Io { .. } => CliError::Io(e.to_string()),
            CampaignError::Target(inner) => inner.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Campaign(inner) => inner.into(),
            ExperimentError::AllFailed(_) => CliError::Internal(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not errors; bad flags are input validation.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fuzz(args) => cmd_fuzz(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Rank(args) => cmd_rank(args),
        Command::Replay(args) => cmd_replay(args),
        Command::GenTarget(args) => cmd_gen_target(args),
        Command::Serve(args) => cmd_serve(args),
    }
}

fn load_target(path: &Path) -> Result<SyntheticService, CliError> {
    Ok(SyntheticService::load(path)?)
}

fn default_jobs(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("cannot create `{}`: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write `{}`: {e}", path.display())))
}

fn cmd_fuzz(args: FuzzArgs) -> Result<(), CliError> {
    let svc = load_target(&args.target)?;
    let target_json = svc.to_json_string();

    let stop = if let Some(secs) = args.time_limit_secs {
        StopCondition::TimeLimitMs(secs.saturating_mul(1000))
    } else if let Some(limit) = args.failure_limit {
        StopCondition::Failures(limit)
    } else {
        StopCondition::Generations(args.generations)
    };
    let config = CampaignConfig {
        blackbox: args.blackbox,
        ..args.engine.config(args.seed, stop)
    };

    let out = args.out.unwrap_or_else(|| {
        let stem = args
            .target
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "target".into());
        PathBuf::from(format!("{stem}.campaign.s{}", args.seed))
    });

    let mut sink = DirSink::create(&out, &config, &target_json)?;
    let state = match args.wire_cmd {
        Some(cmd) => {
            let command: Vec<String> = cmd.split_whitespace().map(String::from).collect();
            let mut target = WireTarget::new(
                svc.list_methods().clone(),
                command,
                Duration::from_millis(args.wire_timeout_ms),
            )?;
            run_campaign(&mut target, &config, &mut sink)?
        }
        None => {
            let mut target = svc;
            run_campaign(&mut target, &config, &mut sink)?
        }
    };
    sink.finalize(&state)?;

    println!("campaign directory: {}", out.display());
    println!(
        "generations: {}  tests: {}  failures: {}",
        state.generation,
        state.tests_executed,
        state.failures.len()
    );
    if config.blackbox {
        println!("coverage: not recorded in black-box mode; run `evofuzz replay` to collect it");
    } else {
        println!(
            "distinct blocks: {}  distinct branches: {}",
            state.coverage.distinct_blocks(),
            state.coverage.distinct_branches()
        );
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    if args.reps < 2 {
        return Err(CliError::Input("--reps must be at least 2".into()));
    }
    let svc = load_target(&args.target)?;
    let base = args.engine.config(args.seed, StopCondition::Generations(args.generations));
    let opts = ExperimentOpts {
        reps: args.reps,
        generations: args.generations,
        base_seed: args.seed,
        jobs: default_jobs(args.jobs),
        slowdown: args.slowdown,
    };
    let report = compare_evo_bb(&svc, &base, &opts)?;

    let budget_note = match args.slowdown {
        Some(s) => format!("black-box budget scaled by slowdown {s}"),
        None => "equal test budget".to_string(),
    };
    let text = reports::render_compare(&report, &budget_note);
    print!("{text}");
    write_file(&args.out.join("report.txt"), &text)?;
    let json = serde_json::json!({
        "comparison": report.row,
        "gain": report.gain,
        "groups": [report.group_a, report.group_b],
        "slowdown": args.slowdown,
        "errors": report.errors,
    });
    write_file(
        &args.out.join("report.json"),
        &serde_json::to_string_pretty(&json).expect("report serialization cannot fail"),
    )?;
    println!("\nreports written to {}", args.out.display());
    Ok(())
}

fn cmd_rank(args: RankArgs) -> Result<(), CliError> {
    if args.reps < 2 {
        return Err(CliError::Input("--reps must be at least 2".into()));
    }
    if !(0.0..=1.0).contains(&args.alpha) {
        return Err(CliError::Input("--alpha must lie in [0, 1]".into()));
    }
    let svc = load_target(&args.target)?;
    let base = args.engine.config(args.seed, StopCondition::Generations(args.generations));
    let opts = ExperimentOpts {
        reps: args.reps,
        generations: args.generations,
        base_seed: args.seed,
        jobs: default_jobs(args.jobs),
        slowdown: None,
    };

    let (configs, factor) = if args.fitness_only {
        (fitness_configs(&base), Some("fitness function"))
    } else if args.selection_only {
        (selection_configs(&base), Some("selection algorithm"))
    } else {
        (matrix_configs(&base), None)
    };
    let (groups, errors) = run_config_groups(&svc, &configs, &opts)?;
    let kw = kruskal_wallis(&groups);

    let (text, json) = match factor {
        Some(name) => {
            let text = reports::render_factor(&groups, &kw, name);
            let json = serde_json::json!({
                "factor": name,
                "groups": groups,
                "kruskal_wallis": kw,
                "errors": errors,
            });
            (text, json)
        }
        None => {
            let ranked = rank_configurations(&groups, args.alpha);
            let text = reports::render_ranking(&ranked, &kw, args.alpha, args.reps);
            let json = serde_json::json!({
                "ranking": ranked,
                "kruskal_wallis": kw,
                "alpha": args.alpha,
                "groups": groups,
                "errors": errors,
            });
            (text, json)
        }
    };
    print!("{text}");
    write_file(&args.out.join("report.txt"), &text)?;
    write_file(
        &args.out.join("report.json"),
        &serde_json::to_string_pretty(&json).expect("report serialization cannot fail"),
    )?;
    println!("\nreports written to {}", args.out.display());
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<(), CliError> {
    let report = match &args.target {
        Some(path) => {
            let mut target = load_target(path)?;
            replay_campaign(&args.campaign, Some(&mut target))?
        }
        None => replay_campaign(&args.campaign, None)?,
    };
    let out = args.out.unwrap_or_else(|| args.campaign.join("replay.json"));
    write_file(
        &out,
        &serde_json::to_string_pretty(&report).expect("report serialization cannot fail"),
    )?;
    println!(
        "replayed {} tests: {} distinct blocks, {} distinct branches, {} mismatches",
        report.summary.tests_executed,
        report.summary.distinct_blocks,
        report.summary.distinct_branches,
        report.coverage_mismatches
    );
    println!("coverage curve written to {}", out.display());
    if report.coverage_mismatches > 0 {
        return Err(CliError::Internal(format!(
            "{} record(s) disagree with the re-execution",
            report.coverage_mismatches
        )));
    }
    Ok(())
}

fn cmd_gen_target(args: GenTargetArgs) -> Result<(), CliError> {
    let (family, seed, out) = match args.family {
        FamilyCommand::GateChain { depth, seed, out } => {
            (BenchmarkFamily::GateChain { depth }, seed, out)
        }
        FamilyCommand::SharedCore { methods, core_depth, seed, out } => {
            (BenchmarkFamily::SharedCore { methods, core_depth }, seed, out)
        }
        FamilyCommand::DeadBranch { fraction, seed, out } => {
            (BenchmarkFamily::DeadBranch { fraction }, seed, out)
        }
    };
    let svc = generate_benchmark(&family, &mut seeded_rng(seed, 0))?;
    write_file(&out, &svc.to_json_string())?;
    println!(
        "wrote `{}`: {} methods, {} blocks",
        out.display(),
        svc.list_methods().methods.len(),
        svc.blocks().len()
    );
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<(), CliError> {
    let svc = load_target(&args.target)?;
    let stdin = std::io::stdin().lock();
    let stdout = std::io::stdout().lock();
    serve(&svc, stdin, stdout).map_err(|e| CliError::Io(format!("wire serve failed: {e}")))
}
