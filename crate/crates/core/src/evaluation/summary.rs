// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimizer::{OptimizationRecord, OptimizationVerdict};
use crate::synthesis::Attribute;

#[derive(Debug, Error, PartialEq)]
pub enum EvaluationError {
    #[error("no records to summarize")]
    Empty,
    #[error("records mix attributes ({0} and {1})")]
    MixedAttributes(Attribute, Attribute),
}

/// What produced a set of records. Stamped on summaries and reports.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLabel {
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub local_model: Option<String>,
    pub cloud_model: Option<String>,
    pub backend: Option<String>,
    pub config_fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub n: usize,
    pub n_success: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub attribute: Attribute,
    pub n_total: usize,
    pub n_success: usize,
    /// Percent of all attempted targets that improved.
    pub success_rate: f64,
    /// Percent; over successful records only. `None` without successes.
    pub mean_relative_improvement: Option<f64>,
    pub median_relative_improvement: Option<f64>,
    pub first_attempt_success_rate: f64,
    /// Records whose candidate synthesized and was compared.
    pub n_measured: usize,
    /// Percent of measured records that improved.
    pub success_rate_over_measured: Option<f64>,
    pub verdict_counts: BTreeMap<OptimizationVerdict, usize>,
    pub per_category: BTreeMap<String, CategoryStats>,
    pub label: RunLabel,
}

fn pct(num: usize, den: usize) -> f64 {
    100.0 * num as f64 / den as f64
}

fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0),
    }
}

/// Success is `Improved` only; every other verdict counts as a failure in
/// `n_total`.
pub fn summarize(records: &[OptimizationRecord], label: RunLabel) -> Result<EvaluationSummary, EvaluationError> {
    let first = records.first().ok_or(EvaluationError::Empty)?;
    let attribute = first.attribute;
    if let Some(r) = records.iter().find(|r| r.attribute != attribute) {
        return Err(EvaluationError::MixedAttributes(attribute, r.attribute));
    }
    let improved = |v: OptimizationVerdict| v == OptimizationVerdict::Improved;

    let mut gains: Vec<f64> = records
        .iter()
        .filter(|r| improved(r.verdict))
        .map(|r| 100.0 * r.relative_delta.unwrap_or(0.0))
        .collect();
    gains.sort_by(f64::total_cmp);
    let n_success = gains.len();
    let mean = (n_success > 0).then(|| gains.iter().sum::<f64>() / n_success as f64);

    let mut verdict_counts = BTreeMap::new();
    for r in records {
        *verdict_counts.entry(r.verdict).or_insert(0) += 1;
    }
    let mut per_category: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = per_category.entry(r.category.to_string()).or_default();
        e.0 += 1;
        e.1 += usize::from(improved(r.verdict));
    }
    let n_measured = records.iter().filter(|r| r.verdict.measured()).count();
    let first_ok = records.iter().filter(|r| improved(r.first_attempt_verdict)).count();

    Ok(EvaluationSummary {
        attribute,
        n_total: records.len(),
        n_success,
        success_rate: pct(n_success, records.len()),
        mean_relative_improvement: mean,
        median_relative_improvement: median(&gains),
        first_attempt_success_rate: pct(first_ok, records.len()),
        n_measured,
        success_rate_over_measured: (n_measured > 0).then(|| pct(n_success, n_measured)),
        verdict_counts,
        per_category: per_category
            .into_iter()
            .map(|(k, (n, s))| {
                (
                    k,
                    CategoryStats {
                        n,
                        n_success: s,
                        success_rate: pct(s, n),
                    },
                )
            })
            .collect(),
        label,
    })
}
