// SPDX-License-Identifier: Apache-2.0

//! Markdown and CSV renderings of summaries, sweeps and records.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::summary::EvaluationSummary;
use super::sweep::SweepTable;
use crate::optimizer::{OptimizationRecord, OptimizationVerdict};

pub const HEADLINE_CSV_HEADER: &str =
    "attribute,n_total,n_success,sr_pct,mean_ri_pct,median_ri_pct,first_attempt_sr_pct,n_measured,sr_measured_pct";
pub const CATEGORY_CSV_HEADER: &str = "attribute,category,n,n_success,sr_pct";

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub markdown: String,
    pub headline_csv: String,
    pub category_csv: String,
}

#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    pub case_studies: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { case_studies: 3 }
    }
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into())
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

/// Categories by success rate, highest first; ties by name.
pub fn categories_by_sr(s: &EvaluationSummary) -> Vec<(&str, &super::summary::CategoryStats)> {
    let mut v: Vec<_> = s.per_category.iter().map(|(k, c)| (k.as_str(), c)).collect();
    v.sort_by(|a, b| b.1.success_rate.total_cmp(&a.1.success_rate).then_with(|| a.0.cmp(b.0)));
    v
}

pub fn report(
    summaries: &[EvaluationSummary],
    records: &[OptimizationRecord],
    sweeps: &[SweepTable],
    options: ReportOptions,
) -> Report {
    let mut md = String::from("# Optimization report\n\n");
    let mut headline = format!("{HEADLINE_CSV_HEADER}\n");
    let mut categories = format!("{CATEGORY_CSV_HEADER}\n");

    if let Some(fp) = summaries.iter().find_map(|s| s.label.config_fingerprint.as_deref()) {
        let _ = writeln!(md, "Config fingerprint: `{fp}`\n");
    }

    md.push_str("## Headline\n\n");
    md.push_str("| Attribute | Targets | Improved | SR (%) | Mean RI (%) | Median RI (%) | First-attempt SR (%) | SR over measured (%) |\n");
    md.push_str("|---|---|---|---|---|---|---|---|\n");
    for s in summaries {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {:.2} | {} | {} | {:.2} | {} |",
            s.attribute,
            s.n_total,
            s.n_success,
            s.success_rate,
            pct(s.mean_relative_improvement),
            pct(s.median_relative_improvement),
            s.first_attempt_success_rate,
            pct(s.success_rate_over_measured)
        );
        let _ = writeln!(
            headline,
            "{},{},{},{:.2},{},{},{:.2},{},{}",
            s.attribute,
            s.n_total,
            s.n_success,
            s.success_rate,
            csv_opt(s.mean_relative_improvement),
            csv_opt(s.median_relative_improvement),
            s.first_attempt_success_rate,
            s.n_measured,
            csv_opt(s.success_rate_over_measured)
        );
    }

    for s in summaries {
        let _ = writeln!(md, "\n## Success rate by category ({})\n", s.attribute);
        md.push_str("| Category | Targets | Improved | SR (%) |\n|---|---|---|---|\n");
        for (name, c) in categories_by_sr(s) {
            let _ = writeln!(md, "| {name} | {} | {} | {:.2} |", c.n, c.n_success, c.success_rate);
            let _ = writeln!(categories, "{},{name},{},{},{:.2}", s.attribute, c.n, c.n_success, c.success_rate);
        }
    }

    for t in sweeps {
        let _ = writeln!(md, "\n## K sweep ({})\n", t.attribute);
        md.push_str("| K | Seeds | Mean SR (%) | Min SR (%) | Max SR (%) | Mean RI (%) |\n|---|---|---|---|---|---|\n");
        for k in t.by_k() {
            let _ = writeln!(
                md,
                "| {} | {} | {:.2} | {:.2} | {:.2} | {} |",
                k.k,
                k.seeds.len(),
                k.mean_sr_pct,
                k.min_sr_pct,
                k.max_sr_pct,
                pct(k.mean_ri_pct)
            );
        }
    }

    let mut failures: BTreeMap<OptimizationVerdict, usize> = BTreeMap::new();
    for r in records.iter().filter(|r| r.verdict != OptimizationVerdict::Improved) {
        *failures.entry(r.verdict).or_insert(0) += 1;
    }
    if !failures.is_empty() {
        md.push_str("\n## Failure modes\n\n| Verdict | Count |\n|---|---|\n");
        for (v, n) in &failures {
            let _ = writeln!(md, "| {v} | {n} |");
        }
    }

    let mut best: Vec<&OptimizationRecord> = records
        .iter()
        .filter(|r| r.verdict == OptimizationVerdict::Improved && r.extracted_module.is_some())
        .collect();
    best.sort_by(|a, b| {
        b.relative_delta
            .unwrap_or(0.0)
            .total_cmp(&a.relative_delta.unwrap_or(0.0))
            .then_with(|| a.target_id.cmp(&b.target_id))
    });
    if !best.is_empty() && options.case_studies > 0 {
        md.push_str("\n## Case studies\n");
        for r in best.into_iter().take(options.case_studies) {
            let after = r.after.as_ref().map(|m| m.metric(r.attribute)).unwrap_or(f64::NAN);
            let _ = writeln!(
                md,
                "\n### {} ({}, {})\n\n{} {} -> {} {} ({:.2}% better)\n",
                r.target_name,
                r.category,
                r.attribute,
                r.before.metric(r.attribute),
                r.attribute.unit(),
                after,
                r.attribute.unit(),
                100.0 * r.relative_delta.unwrap_or(0.0)
            );
            let _ = writeln!(md, "Before:\n\n```verilog\n{}\n```\n", r.target_source.trim_end());
            if let Some(m) = &r.extracted_module {
                let _ = writeln!(md, "After:\n\n```verilog\n{}\n```", m.source.trim_end());
            }
        }
    }

    Report {
        markdown: md,
        headline_csv: headline,
        category_csv: categories,
    }
}
