//! Nonparametric comparison machinery: Mann-Whitney with the two-sample
//! normal approximation, the Vargha-Delaney Â effect size, Kruskal-Wallis
//! with the chi-square approximation, pairwise configuration ranking, and
//! the coverage gain ratio.
//!
//! All tests are rank-based with midranks for ties; p-values are therefore
//! invariant under any strictly monotone transform applied to both samples.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// One group of repeated measurements (distinct-block counts per repetition).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleGroup {
    pub label: String,
    pub values: Vec<f64>,
}

impl SampleGroup {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        let group = SampleGroup { label: label.into(), values };
        assert!(!group.values.is_empty(), "sample group `{}` is empty", group.label);
        group
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sample standard deviation (n − 1 denominator); zero for one sample.
    pub fn std_dev(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean();
        (self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    pub fn median(&self) -> f64 {
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        }
    }
}

/// Statistic plus p-value; Â is present for pairwise tests only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub effect_size: Option<f64>,
}

/// Midranks of the pooled sample, in input order. Ties share the average of
/// the rank positions they occupy.
fn midranks(pooled: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        // Positions i..j (0-based) hold ranks i+1..j, averaging to (i+j+1)/2.
        let rank = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    ranks
}

/// Σ (t³ − t) over tie groups of the pooled sample.
fn tie_sum(pooled: &[f64]) -> f64 {
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        total += t * t * t - t;
        i = j;
    }
    total
}

fn rank_sum_of_first(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    midranks(&pooled)[..a.len()].iter().sum()
}

/// The U statistic of the first group, from rank sums with midranks.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len() as f64;
    rank_sum_of_first(a, b) - m * (m + 1.0) / 2.0
}

/// Two-sided Mann-Whitney test via the two-sample normal approximation with
/// tie-corrected variance and a continuity correction of 0.5.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> TestReport {
    mann_whitney_opts(a, b, true)
}

/// As [`mann_whitney`], with the continuity correction made explicit so
/// reference values stated without it can be checked.
pub fn mann_whitney_opts(a: &[f64], b: &[f64], continuity_correction: bool) -> TestReport {
    assert!(!a.is_empty() && !b.is_empty(), "both groups must be nonempty");
    let (m, n) = (a.len() as f64, b.len() as f64);
    let total = m + n;
    let u = mann_whitney_u(a, b);
    let effect = Some(vargha_delaney(a, b));

    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let variance =
        m * n / 12.0 * ((total + 1.0) - tie_sum(&pooled) / (total * (total - 1.0)));
    if variance <= 0.0 {
        // Every value identical in both groups.
        return TestReport { statistic: u, p_value: 1.0, effect_size: effect };
    }

    let mut deviation = u - m * n / 2.0;
    if continuity_correction {
        deviation = deviation.signum() * (deviation.abs() - 0.5).max(0.0);
    }
    let z = deviation / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p = (2.0 * normal.cdf(-z.abs())).min(1.0);
    TestReport { statistic: u, p_value: p, effect_size: effect }
}

/// Vargha-Delaney Â: the probability that a random sample from `a` exceeds a
/// random sample from `b`, ties counted half. 0.5 means no effect.
pub fn vargha_delaney(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "both groups must be nonempty");
    let (m, n) = (a.len() as f64, b.len() as f64);
    (rank_sum_of_first(a, b) / m - (m + 1.0) / 2.0) / n
}

/// Kruskal-Wallis test across two or more groups, with tie correction and
/// the chi-square approximation on `k − 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[SampleGroup]) -> TestReport {
    assert!(groups.len() >= 2, "kruskal_wallis needs at least two groups");
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.values.iter().copied()).collect();
    let n = pooled.len() as f64;
    let ranks = midranks(&pooled);

    let mut s = 0.0;
    let mut offset = 0;
    for g in groups {
        let size = g.values.len();
        let mean_rank = ranks[offset..offset + size].iter().sum::<f64>() / size as f64;
        s += size as f64 * (mean_rank - (n + 1.0) / 2.0).powi(2);
        offset += size;
    }
    let mut h = 12.0 * s / (n * (n + 1.0));
    let correction = 1.0 - tie_sum(&pooled) / (n * n * n - n);
    if correction <= 0.0 {
        // Every pooled value identical.
        return TestReport { statistic: 0.0, p_value: 1.0, effect_size: None };
    }
    h /= correction;

    let df = (groups.len() - 1) as f64;
    let chi = ChiSquared::new(df).expect("positive degrees of freedom");
    TestReport { statistic: h, p_value: chi.sf(h), effect_size: None }
}

/// One configuration's standing after all pairwise comparisons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedConfig {
    /// Competition rank: ties share the best rank, the next rank skips.
    pub rank: usize,
    pub label: String,
    /// Pairwise wins minus losses at the given significance level.
    pub score: i64,
    pub mean: f64,
    pub std_dev: f64,
}

/// Scores every configuration by pairwise Mann-Whitney comparisons: each
/// statistically significant win counts +1 and each loss −1. Output is
/// sorted by descending score; equal scores share a rank.
pub fn rank_configurations(groups: &[SampleGroup], alpha: f64) -> Vec<RankedConfig> {
    assert!(groups.len() >= 2, "ranking needs at least two configurations");
    let mut scores = vec![0i64; groups.len()];
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let report = mann_whitney(&groups[i].values, &groups[j].values);
            if report.p_value < alpha {
                let effect = report.effect_size.expect("pairwise test has an effect size");
                if effect > 0.5 {
                    scores[i] += 1;
                    scores[j] -= 1;
                } else if effect < 0.5 {
                    scores[i] -= 1;
                    scores[j] += 1;
                }
            }
        }
    }
    let mut ranked: Vec<RankedConfig> = groups
        .iter()
        .zip(&scores)
        .map(|(g, &score)| RankedConfig {
            rank: 0,
            label: g.label.clone(),
            score,
            mean: g.mean(),
            std_dev: g.std_dev(),
        })
        .collect();
    ranked.sort_by(|a, b| b.score.cmp(&a.score).then(a.label.cmp(&b.label)));
    for i in 0..ranked.len() {
        let better = ranked.iter().filter(|r| r.score > ranked[i].score).count();
        ranked[i].rank = better + 1;
    }
    ranked
}

/// Mean coverage ratio between two engines. An all-zero baseline has no
/// finite ratio and is reported as unbounded with both means attached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageGain {
    pub evo_mean: f64,
    pub bb_mean: f64,
    pub ratio: Option<f64>,
}

pub fn coverage_gain(evo: &SampleGroup, bb: &SampleGroup) -> CoverageGain {
    let evo_mean = evo.mean();
    let bb_mean = bb.mean();
    CoverageGain {
        evo_mean,
        bb_mean,
        ratio: (bb_mean > 0.0).then(|| evo_mean / bb_mean),
    }
}

impl std::fmt::Display for CoverageGain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.ratio {
            Some(r) => write!(f, "{r:.2}"),
            None => write!(f, "∞ (evo mean {}, bb mean 0)", self.evo_mean),
        }
    }
}

/// One row of the machine-readable comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub label_a: String,
    pub label_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub std_dev_a: f64,
    pub std_dev_b: f64,
    pub u_statistic: f64,
    pub p_value: f64,
    pub a_effect: f64,
    pub gain: Option<f64>,
}

/// Runs the full pairwise comparison between two groups and lays the results
/// out as one report row.
pub fn compare_groups(a: &SampleGroup, b: &SampleGroup) -> ComparisonRow {
    let report = mann_whitney(&a.values, &b.values);
    let gain = coverage_gain(a, b);
    ComparisonRow {
        label_a: a.label.clone(),
        label_b: b.label.clone(),
        n_a: a.values.len(),
        n_b: b.values.len(),
        mean_a: a.mean(),
        mean_b: b.mean(),
        std_dev_a: a.std_dev(),
        std_dev_b: b.std_dev(),
        u_statistic: report.statistic,
        p_value: report.p_value,
        a_effect: report.effect_size.expect("pairwise test has an effect size"),
        gain: gain.ratio,
    }
}
