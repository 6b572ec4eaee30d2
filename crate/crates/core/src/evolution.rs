//! Fitness evaluation, parent selection, and community target-size dynamics.

use rand::Rng;

use crate::config::{FitnessKind, SelectionKind};
use crate::coverage::{ExecutionResult, GlobalCoverageState};
use crate::individual::{Community, Individual, Population, TestIdGen};

/// A finite, nonnegative fitness. Zero means no contribution observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessValue(f64);

impl FitnessValue {
    pub fn new(v: f64) -> Self {
        assert!(v.is_finite() && v >= 0.0, "fitness must be finite and nonnegative: {v}");
        FitnessValue(v)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Eq for FitnessValue {}

impl PartialOrd for FitnessValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FitnessValue {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Logarithmic hit-count bucket: `bucket(n) = floor(log2 n)` for `n ≥ 1`,
/// so counts 1, 2–3, 4–7, 8–15, ... share a bucket.
pub fn branch_bucket(n: u64) -> u32 {
    assert!(n >= 1, "bucket is defined for hit counts ≥ 1");
    n.ilog2()
}

/// Scores one execution against the coverage state as of the end of the
/// previous generation.
///
/// - `ExecutedBlocks`: number of covered blocks.
/// - `LeastExecuted`: Σ over covered blocks of `1 / (1 + previous executions)`.
/// - `LeastBranchHitCount`: Σ over covered branches of `2^-bucket(count)`,
///   with the previous count taken as at least one once the branch is known.
pub fn evaluate_fitness(
    res: &ExecutionResult,
    prev: &GlobalCoverageState,
    kind: FitnessKind,
) -> FitnessValue {
    let v = match kind {
        FitnessKind::ExecutedBlocks => res.covered_blocks.len() as f64,
        FitnessKind::LeastExecuted => res
            .covered_blocks
            .iter()
            .map(|b| 1.0 / (1.0 + prev.block_exec_count(b) as f64))
            .sum(),
        FitnessKind::LeastBranchHitCount => res
            .branch_hits
            .keys()
            .map(|e| {
                let n = prev.branch_hit_count(e).max(1);
                2f64.powi(-(branch_bucket(n) as i32))
            })
            .sum(),
    };
    FitnessValue::new(v)
}

/// Folds one execution into the cumulative campaign coverage.
pub fn update_global_coverage(state: &mut GlobalCoverageState, res: &ExecutionResult) {
    for b in &res.covered_blocks {
        *state.block_exec_count.entry(b.clone()).or_insert(0) += 1;
    }
    for (e, hits) in &res.branch_hits {
        *state.branch_hit_count.entry(e.clone()).or_insert(0) += hits;
    }
    state.tests_executed += 1;
}

/// Picks one parent index from an evaluated population.
///
/// - Fitness-proportionate: `P(i) = f_i / Σf`, uniform when all fitness is 0.
/// - Ranking: sort ascending, rank `r` (1 = worst) drawn with `P ∝ r`; ties
///   broken by individual id.
/// - Tournament: `min(tour, size)` distinct entrants drawn uniformly without
///   replacement; fittest wins, ties to the lowest id.
pub fn select<R: Rng>(
    pop: &Population,
    fitness: &[FitnessValue],
    kind: SelectionKind,
    tour: usize,
    rng: &mut R,
) -> usize {
    let n = pop.individuals.len();
    assert!(n > 0, "select on an empty population");
    assert_eq!(fitness.len(), n, "fitness must be aligned with individuals");
    match kind {
        SelectionKind::FitnessProportionate => {
            let total: f64 = fitness.iter().map(|f| f.get()).sum();
            if total <= 0.0 {
                return rng.gen_range(0..n);
            }
            let x = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            for (i, f) in fitness.iter().enumerate() {
                acc += f.get();
                if x < acc {
                    return i;
                }
            }
            n - 1
        }
        SelectionKind::Ranking => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                fitness[a]
                    .cmp(&fitness[b])
                    .then(pop.individuals[a].id.cmp(&pop.individuals[b].id))
            });
            let total = (n * (n + 1) / 2) as u64;
            let mut x = rng.gen_range(0..total);
            for (pos, &i) in order.iter().enumerate() {
                let weight = (pos + 1) as u64;
                if x < weight {
                    return i;
                }
                x -= weight;
            }
            *order.last().expect("population is nonempty")
        }
        SelectionKind::Tournament => {
            let k = tour.min(n);
            let entrants = rand::seq::index::sample(rng, n, k);
            let mut best = None;
            for i in entrants {
                best = Some(match best {
                    None => i,
                    Some(b) => match fitness[i].cmp(&fitness[b]) {
                        std::cmp::Ordering::Greater => i,
                        std::cmp::Ordering::Less => b,
                        std::cmp::Ordering::Equal => {
                            if pop.individuals[i].id < pop.individuals[b].id {
                                i
                            } else {
                                b
                            }
                        }
                    },
                });
            }
            best.expect("tournament draws at least one entrant")
        }
    }
}

/// Re-steers the community budget after a generation has been evaluated.
///
/// The population with the highest mean fitness grows by one; the weakest
/// population above the floor of two (never the best one) shrinks by one, or
/// the step is skipped when none exists. If the total then exceeds
/// `max_community_size`, half the surplus (rounded up) is taken from the
/// weakest populations first. Ties on mean fitness break toward the lower
/// method id.
pub fn update_target_sizes(
    community: &mut Community,
    means: &[f64],
    max_community_size: usize,
) {
    let n = community.populations.len();
    assert_eq!(means.len(), n, "means must be aligned with populations");
    let method = |i: usize| community.populations[i].method;

    let best = (0..n)
        .max_by(|&a, &b| {
            means[a]
                .total_cmp(&means[b])
                .then(method(b).cmp(&method(a)))
        })
        .expect("community has at least one population");

    let mut ascending: Vec<usize> = (0..n).collect();
    ascending.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(method(a).cmp(&method(b))));

    community.populations[best].grow_target();
    for &i in &ascending {
        if i != best && community.populations[i].shrink_target(1) == 1 {
            break;
        }
    }

    let total = community.total_target_size();
    if total > max_community_size {
        let surplus = total - max_community_size;
        let mut budget = surplus.div_ceil(2);
        for &i in &ascending {
            if budget == 0 {
                break;
            }
            budget -= community.populations[i].shrink_target(budget);
        }
    }
}

/// Per-offspring probabilities for the breeding loop.
#[derive(Debug, Clone, Copy)]
pub struct BreedingRates {
    pub crossover: f64,
    pub mutation: f64,
}

/// Breeds every population up to its target size and promotes the offspring.
///
/// Each offspring starts from one selected parent; with probability
/// `crossover` it is replaced by a crossover with a second selected parent,
/// and with probability `mutation` the candidate is mutated. When neither
/// fires, the offspring is a content clone of the parent under a fresh id.
pub fn next_generation<R: Rng>(
    community: &mut Community,
    rates: BreedingRates,
    ids: &TestIdGen,
    rng: &mut R,
    parent_picker: &mut dyn FnMut(usize, &Population, &mut R) -> usize,
    cross: &mut dyn FnMut(&Individual, &Individual, &TestIdGen, &mut R) -> Individual,
    mutate: &mut dyn FnMut(&Individual, &TestIdGen, &mut R) -> Individual,
) {
    for pi in 0..community.populations.len() {
        let target = community.populations[pi].target_size();
        let mut offspring = Vec::with_capacity(target);
        while offspring.len() < target {
            let pop = &community.populations[pi];
            let parent_idx = parent_picker(pi, pop, rng);
            let mut candidate: Option<Individual> = None;
            if rng.gen::<f64>() < rates.crossover {
                let second_idx = parent_picker(pi, pop, rng);
                candidate = Some(cross(
                    &pop.individuals[parent_idx],
                    &pop.individuals[second_idx],
                    ids,
                    rng,
                ));
            }
            if rng.gen::<f64>() < rates.mutation {
                let base = candidate.take();
                let base_ref = base.as_ref().unwrap_or(&pop.individuals[parent_idx]);
                candidate = Some(mutate(base_ref, ids, rng));
            }
            let child = candidate.unwrap_or_else(|| {
                let parent = &community.populations[pi].individuals[parent_idx];
                Individual {
                    id: ids.next_id(),
                    method: parent.method,
                    inputs: parent.inputs.clone(),
                }
            });
            offspring.push(child);
        }
        let pop = &mut community.populations[pi];
        pop.offspring = offspring;
        pop.promote_offspring();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{FitnessKind, SelectionKind};
    use crate::coverage::{BlockId, BranchId, Outcome};
    use crate::genome::seeded_rng;
    use crate::individual::TestId;
    use crate::service::{MethodId, MethodSignature, ServiceDescriptor};
    use crate::value::Value;
    use std::collections::{BTreeMap, BTreeSet};

    fn result_with(blocks: &[&str], branches: &[(&str, u64)]) -> ExecutionResult {
        ExecutionResult {
            covered_blocks: blocks.iter().map(|b| BlockId::from(*b)).collect::<BTreeSet<_>>(),
            branch_hits: branches
                .iter()
                .map(|(e, n)| (BranchId::from(*e), *n))
                .collect::<BTreeMap<_, _>>(),
            outcome: Outcome::Normal,
            log: String::new(),
            duration_ms: 0,
        }
    }

    #[test]
    fn bucket_matches_floor_log2() {
        assert_eq!(branch_bucket(1), 0);
        assert_eq!(branch_bucket(2), 1);
        assert_eq!(branch_bucket(3), 1);
        assert_eq!(branch_bucket(4), 2);
        assert_eq!(branch_bucket(7), 2);
        for n in 1u64..=4096 {
            assert_eq!(branch_bucket(n), (n as f64).log2().floor() as u32);
        }
    }

    #[test]
    fn executed_blocks_counts_cardinality() {
        let res = result_with(&["b0", "b1", "b2"], &[]);
        let prev = GlobalCoverageState::new();
        assert_eq!(
            evaluate_fitness(&res, &prev, FitnessKind::ExecutedBlocks).get(),
            3.0
        );
    }

    #[test]
    fn least_executed_weights_unseen_blocks_highest() {
        let mut prev = GlobalCoverageState::new();
        for _ in 0..10 {
            update_global_coverage(&mut prev, &result_with(&["b1"], &[]));
        }
        let res = result_with(&["b1", "b2"], &[]);
        let f = evaluate_fitness(&res, &prev, FitnessKind::LeastExecuted).get();
        assert!((f - (1.0 / 11.0 + 1.0)).abs() < 1e-12, "got {f}");
    }

    #[test]
    fn least_branch_hit_count_uses_buckets() {
        let mut prev = GlobalCoverageState::new();
        update_global_coverage(&mut prev, &result_with(&["a"], &[("a→b", 5)]));
        let res = result_with(&["a", "b"], &[("a→b", 1)]);
        let f = evaluate_fitness(&res, &prev, FitnessKind::LeastBranchHitCount).get();
        assert_eq!(f, 0.25, "bucket(5) = 2 so the weight is 2^-2");
    }

    #[test]
    fn empty_coverage_scores_zero_for_all_kinds() {
        let res = result_with(&[], &[]);
        let prev = GlobalCoverageState::new();
        for kind in FitnessKind::ALL {
            assert_eq!(evaluate_fitness(&res, &prev, kind).get(), 0.0);
        }
    }

    #[test]
    fn fitness_is_monotone_in_coverage() {
        let mut prev = GlobalCoverageState::new();
        update_global_coverage(&mut prev, &result_with(&["b0", "b1"], &[("b0→b1", 2)]));
        let smaller = result_with(&["b0"], &[("b0→⊥", 1)]);
        let larger = result_with(&["b0", "b1", "b2"], &[("b0→⊥", 1), ("b0→b1", 1)]);
        for kind in FitnessKind::ALL {
            let f_small = evaluate_fitness(&smaller, &prev, kind).get();
            let f_large = evaluate_fitness(&larger, &prev, kind).get();
            assert!(f_large >= f_small, "{kind:?}: {f_large} < {f_small}");
        }
    }

    #[test]
    fn coverage_updates_are_additive() {
        let mut state = GlobalCoverageState::new();
        let res = result_with(&["b0"], &[("e0", 3)]);
        update_global_coverage(&mut state, &res);
        update_global_coverage(&mut state, &res);
        assert_eq!(state.block_exec_count(&BlockId::from("b0")), 2);
        assert_eq!(state.branch_hit_count(&BranchId::from("e0")), 6);
        assert_eq!(state.tests_executed(), 2);
    }

    fn pop_with_fitness(fs: &[f64]) -> (Population, Vec<FitnessValue>) {
        let mut pop = Population::new(MethodId(0), fs.len().max(2));
        for (i, _) in fs.iter().enumerate() {
            pop.individuals.push(Individual {
                id: TestId(i as u64),
                method: MethodId(0),
                inputs: vec![Value::Integer(i as i32)],
            });
        }
        let fitness = fs.iter().map(|&f| FitnessValue::new(f)).collect();
        (pop, fitness)
    }

    #[test]
    fn proportionate_frequencies_follow_fitness() {
        let (pop, fitness) = pop_with_fitness(&[1.0, 3.0]);
        let mut rng = seeded_rng(21, 0);
        let mut counts = [0u32; 2];
        for _ in 0..20_000 {
            counts[select(&pop, &fitness, SelectionKind::FitnessProportionate, 5, &mut rng)] += 1;
        }
        let p0 = counts[0] as f64 / 20_000.0;
        assert!((p0 - 0.25).abs() < 0.02, "P(0) was {p0}");
    }

    #[test]
    fn zero_total_fitness_selects_uniformly() {
        let (pop, fitness) = pop_with_fitness(&[0.0, 0.0]);
        let mut rng = seeded_rng(22, 0);
        let mut counts = [0u32; 2];
        for _ in 0..20_000 {
            counts[select(&pop, &fitness, SelectionKind::FitnessProportionate, 5, &mut rng)] += 1;
        }
        let p0 = counts[0] as f64 / 20_000.0;
        assert!((p0 - 0.5).abs() < 0.02, "P(0) was {p0}");
    }

    #[test]
    fn exhaustive_tournament_returns_the_fittest() {
        let (pop, fitness) = pop_with_fitness(&[0.5, 2.0, 1.0]);
        let mut rng = seeded_rng(23, 0);
        for _ in 0..50 {
            assert_eq!(select(&pop, &fitness, SelectionKind::Tournament, 10, &mut rng), 1);
        }
    }

    #[test]
    fn ranking_prefers_higher_fitness() {
        let (pop, fitness) = pop_with_fitness(&[1.0, 2.0, 3.0]);
        let mut rng = seeded_rng(24, 0);
        let mut counts = [0u32; 3];
        for _ in 0..30_000 {
            counts[select(&pop, &fitness, SelectionKind::Ranking, 5, &mut rng)] += 1;
        }
        // P = r/6 for ranks 1..3.
        for (i, want) in [(0, 1.0 / 6.0), (1, 2.0 / 6.0), (2, 3.0 / 6.0)] {
            let got = counts[i] as f64 / 30_000.0;
            assert!((got - want).abs() < 0.02, "P({i}) was {got}, want {want}");
        }
    }

    fn community_with_sizes(sizes: &[usize]) -> Community {
        let methods = (0..sizes.len())
            .map(|i| MethodSignature { id: MethodId(i as u32), name: format!("m{i}"), params: vec![] })
            .collect();
        let service = ServiceDescriptor { name: "svc".into(), methods };
        let mut community = Community::new(service, 2).unwrap();
        for (pop, &size) in community.populations.iter_mut().zip(sizes) {
            *pop = Population::new(pop.method, size);
        }
        community
    }

    #[test]
    fn reward_and_punish_shift_one_each() {
        let mut c = community_with_sizes(&[10, 10, 10]);
        update_target_sizes(&mut c, &[10.0, 5.0, 1.0], 200);
        let sizes: Vec<usize> = c.populations.iter().map(|p| p.target_size()).collect();
        assert_eq!(sizes, vec![11, 10, 9]);
    }

    #[test]
    fn reduction_skipped_when_only_the_best_is_above_floor() {
        let mut c = community_with_sizes(&[10, 2]);
        update_target_sizes(&mut c, &[5.0, 1.0], 200);
        let sizes: Vec<usize> = c.populations.iter().map(|p| p.target_size()).collect();
        assert_eq!(sizes, vec![11, 2]);
    }

    #[test]
    fn surplus_takes_half_from_the_weakest_first() {
        let mut c = community_with_sizes(&[70, 70, 70]);
        // After +1/-1 the total is 210; surplus over 200 is 10, so 5 come off
        // the weakest populations in ascending order.
        update_target_sizes(&mut c, &[3.0, 2.0, 1.0], 200);
        let sizes: Vec<usize> = c.populations.iter().map(|p| p.target_size()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 205);
        assert_eq!(sizes, vec![71, 70, 64]);
    }

    #[test]
    fn floor_of_two_survives_randomized_updates() {
        let mut rng = seeded_rng(31, 0);
        let mut c = community_with_sizes(&[5, 5, 5, 5]);
        for _ in 0..1000 {
            let means: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..10.0)).collect();
            update_target_sizes(&mut c, &means, 30);
            assert!(c.populations.iter().all(|p| p.target_size() >= 2));
        }
    }

    fn clone_pick(_: usize, pop: &Population, rng: &mut rand_chacha::ChaCha8Rng) -> usize {
        rng.gen_range(0..pop.individuals.len())
    }

    #[test]
    fn zero_rates_resample_parent_contents() {
        let mut c = community_with_sizes(&[4]);
        let parents: Vec<Individual> = (0..4)
            .map(|i| Individual {
                id: TestId(i),
                method: MethodId(0),
                inputs: vec![],
            })
            .collect();
        c.populations[0].individuals = parents.clone();
        let ids = TestIdGen::new();
        let mut rng = seeded_rng(32, 0);
        next_generation(
            &mut c,
            BreedingRates { crossover: 0.0, mutation: 0.0 },
            &ids,
            &mut rng,
            &mut clone_pick,
            &mut |_, _, _, _| panic!("crossover must not fire at rate 0"),
            &mut |_, _, _| panic!("mutation must not fire at rate 0"),
        );
        assert_eq!(c.populations[0].individuals.len(), 4);
        for child in &c.populations[0].individuals {
            assert!(parents.iter().any(|p| child.same_content(p)));
        }
        assert!(c.populations[0].offspring.is_empty());
    }

    #[test]
    fn breeding_stops_at_target_size() {
        let mut c = community_with_sizes(&[2]);
        c.populations[0].individuals = (0..5)
            .map(|i| Individual { id: TestId(i), method: MethodId(0), inputs: vec![] })
            .collect();
        let ids = TestIdGen::new();
        let mut rng = seeded_rng(33, 0);
        next_generation(
            &mut c,
            BreedingRates { crossover: 0.0, mutation: 0.0 },
            &ids,
            &mut rng,
            &mut clone_pick,
            &mut |_, _, _, _| unreachable!(),
            &mut |_, _, _| unreachable!(),
        );
        assert_eq!(c.populations[0].individuals.len(), 2);
    }
}
