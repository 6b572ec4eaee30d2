//! End-to-end library flow: generate a benchmark, run campaigns under every
//! fitness/selection combination, persist, replay, and compare.

use evofuzz_core::campaign::{replay_campaign, run_campaign, DirSink, MemorySink};
use evofuzz_core::config::{CampaignConfig, FitnessKind, SelectionKind, StopCondition};
use evofuzz_core::experiments::{compare_evo_bb, ExperimentOpts};
use evofuzz_core::genome::seeded_rng;
use evofuzz_core::harness::{generate_benchmark, BenchmarkFamily};

#[test]
fn every_fitness_selection_combination_runs_clean() {
    let svc = generate_benchmark(
        &BenchmarkFamily::SharedCore { methods: 4, core_depth: 3 },
        &mut seeded_rng(31, 0),
    )
    .unwrap();
    for fitness in FitnessKind::ALL {
        for selection in SelectionKind::ALL {
            let cfg = CampaignConfig {
                fitness,
                selection,
                seed: 9,
                mutation_rate: 0.3,
                stop_condition: StopCondition::Generations(6),
                ..CampaignConfig::default()
            };
            let mut target = svc.clone();
            let mut sink = MemorySink::new();
            let state = run_campaign(&mut target, &cfg, &mut sink).unwrap();
            assert_eq!(state.generation, 6);
            assert!(state.coverage.distinct_blocks() >= 4, "every method entry is covered");
            assert!(sink.records.iter().all(|r| r.fitness.is_some()));
            // Branch coverage is strictly finer than block coverage here:
            // every covered block also has at least one outgoing edge taken.
            assert!(state.coverage.distinct_branches() >= state.coverage.distinct_blocks());
        }
    }
}

#[test]
fn persisted_campaign_replays_and_compares() {
    let tmp = tempfile::tempdir().unwrap();
    let svc = generate_benchmark(
        &BenchmarkFamily::GateChain { depth: 4 },
        &mut seeded_rng(32, 0),
    )
    .unwrap();

    let cfg = CampaignConfig {
        seed: 21,
        mutation_rate: 0.3,
        stop_condition: StopCondition::Generations(10),
        ..CampaignConfig::default()
    };
    let dir = tmp.path().join("campaign");
    let mut sink = DirSink::create(&dir, &cfg, &svc.to_json_string()).unwrap();
    let mut target = svc.clone();
    let state = run_campaign(&mut target, &cfg, &mut sink).unwrap();
    sink.finalize(&state).unwrap();

    let replayed = replay_campaign(&dir, None).unwrap();
    assert_eq!(replayed.coverage_mismatches, 0);
    assert_eq!(replayed.summary.tests_executed, state.tests_executed);
    assert_eq!(replayed.summary.distinct_blocks, state.coverage.distinct_blocks());

    let report = compare_evo_bb(
        &svc,
        &CampaignConfig { mutation_rate: 0.3, ..CampaignConfig::default() },
        &ExperimentOpts { reps: 3, generations: 10, base_seed: 50, jobs: 2, slowdown: None },
    )
    .unwrap();
    assert_eq!(report.group_a.values.len(), 3);
    assert!(report.row.p_value > 0.0 && report.row.p_value <= 1.0);
}
