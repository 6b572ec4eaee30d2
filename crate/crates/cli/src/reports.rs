//! Human-readable renderings of comparison and ranking reports. Each command
//! also writes the same data as JSON next to the text file.

use evofuzz_core::experiments::CompareReport;
use evofuzz_core::stats::{RankedConfig, SampleGroup, TestReport};

pub fn render_compare(report: &CompareReport, budget_note: &str) -> String {
    let mut out = String::new();
    let row = &report.row;
    out.push_str(&format!(
        "comparison: {} vs {} ({} repetitions, {budget_note})\n\n",
        row.label_a, row.label_b, row.n_a
    ));
    out.push_str(&format!(
        "{:<12} {:>4} {:>10} {:>10} {:>10}\n",
        "group", "n", "mean", "std.dev", "median"
    ));
    for (label, n, mean, sd, group) in [
        (&row.label_a, row.n_a, row.mean_a, row.std_dev_a, &report.group_a),
        (&row.label_b, row.n_b, row.mean_b, row.std_dev_b, &report.group_b),
    ] {
        out.push_str(&format!(
            "{label:<12} {n:>4} {mean:>10.3} {sd:>10.3} {:>10.1}\n",
            group.median()
        ));
    }
    out.push_str(&format!(
        "\nMann-Whitney U = {:.1}, two-sided p = {:.6}\n",
        row.u_statistic, row.p_value
    ));
    out.push_str(&format!(
        "A({}, {}) = {:.3}\n",
        row.label_a, row.label_b, row.a_effect
    ));
    out.push_str(&format!("coverage gain ({}/{} mean ratio): {}\n", row.label_a, row.label_b, report.gain));
    if !report.errors.is_empty() {
        out.push_str(&format!("\n{} repetition(s) failed:\n", report.errors.len()));
        for e in &report.errors {
            out.push_str(&format!("  - {e}\n"));
        }
    }
    out
}

pub fn render_ranking(
    ranked: &[RankedConfig],
    combined: &TestReport,
    alpha: f64,
    reps: usize,
) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "configuration ranking ({} configurations, {reps} repetitions, alpha {alpha})\n\n",
        ranked.len()
    ));
    out.push_str(&format!(
        "{:<5} {:<45} {:>6} {:>10} {:>10}\n",
        "rank", "configuration", "score", "mean", "std.dev"
    ));
    for r in ranked {
        out.push_str(&format!(
            "{:<5} {:<45} {:>6} {:>10.3} {:>10.3}\n",
            r.rank, r.label, r.score, r.mean, r.std_dev
        ));
    }
    out.push_str(&format!(
        "\nKruskal-Wallis over all configurations: H = {:.4}, p = {:.6}\n",
        combined.statistic, combined.p_value
    ));
    out
}

pub fn render_factor(groups: &[SampleGroup], kw: &TestReport, factor: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("factor analysis: {factor}\n\n"));
    out.push_str(&format!(
        "{:<30} {:>4} {:>10} {:>10}\n",
        "group", "n", "mean", "std.dev"
    ));
    for g in groups {
        out.push_str(&format!(
            "{:<30} {:>4} {:>10.3} {:>10.3}\n",
            g.label,
            g.values.len(),
            g.mean(),
            g.std_dev()
        ));
    }
    out.push_str(&format!(
        "\nKruskal-Wallis: H = {:.4}, p = {:.6}\n",
        kw.statistic, kw.p_value
    ));
    out
}
