// SPDX-License-Identifier: Apache-2.0

//! K-sweep: one extract, optimize and summarize pass per (K, seed).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{Display, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::summary::{summarize, EvaluationError, EvaluationSummary, RunLabel};
use crate::corpus::ModuleId;
use crate::optimizer::OptimizationRecord;
use crate::synthesis::Attribute;

pub const SUMMARY_CSV_HEADER: &str = "attribute,K,seed,n_total,n_success,sr_pct,mean_ri_pct,median_ri_pct";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("need {requested} pairs for the largest K, only {available} available")]
    InsufficientPairs { available: usize, requested: usize },
    #[error("no K values or no seeds given")]
    EmptyGrid,
    #[error("cell K={k} seed={seed} failed: {detail}")]
    Cell { k: usize, seed: u64, detail: String },
    #[error("cell K={k} seed={seed} evaluated a different target set")]
    TargetSetMismatch { k: usize, seed: u64 },
    #[error("cell K={k} seed={seed}: {source}")]
    Summary {
        k: usize,
        seed: u64,
        #[source]
        source: EvaluationError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub k: usize,
    pub seed: u64,
    pub summary: EvaluationSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub attribute: Attribute,
    pub cells: Vec<SweepCell>,
}

/// Runs `run(k, seed)` for every grid cell, K-major. The runner returns the
/// records of one cell; every cell must cover the same targets.
pub fn sweep_k<F, E>(
    attribute: Attribute,
    ks: &[usize],
    seeds: &[u64],
    available_pairs: usize,
    label: &RunLabel,
    mut run: F,
) -> Result<SweepTable, SweepError>
where
    F: FnMut(usize, u64) -> Result<Vec<OptimizationRecord>, E>,
    E: Display,
{
    let max_k = ks.iter().copied().max().ok_or(SweepError::EmptyGrid)?;
    if seeds.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    if max_k > available_pairs {
        return Err(SweepError::InsufficientPairs {
            available: available_pairs,
            requested: max_k,
        });
    }
    let mut reference: Option<BTreeSet<ModuleId>> = None;
    let mut cells = Vec::new();
    for &k in ks {
        for &seed in seeds {
            let records = run(k, seed).map_err(|e| SweepError::Cell {
                k,
                seed,
                detail: e.to_string(),
            })?;
            let targets: BTreeSet<ModuleId> = records.iter().map(|r| r.target_id.clone()).collect();
            match &reference {
                None => reference = Some(targets),
                Some(r) if *r != targets => return Err(SweepError::TargetSetMismatch { k, seed }),
                Some(_) => {}
            }
            let mut cell_label = label.clone();
            cell_label.k = Some(k);
            cell_label.seed = Some(seed);
            let summary = summarize(&records, cell_label).map_err(|source| SweepError::Summary { k, seed, source })?;
            cells.push(SweepCell { k, seed, summary });
        }
    }
    Ok(SweepTable { attribute, cells })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSeries {
    pub k: usize,
    pub seeds: Vec<u64>,
    pub sr_pct: Vec<f64>,
    pub mean_sr_pct: f64,
    pub min_sr_pct: f64,
    pub max_sr_pct: f64,
    pub mean_ri_pct: Option<f64>,
    pub n_total: usize,
}

impl SweepTable {
    /// One row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{SUMMARY_CSV_HEADER}\n");
        for c in &self.cells {
            let s = &c.summary;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.2},{},{}",
                self.attribute,
                c.k,
                c.seed,
                s.n_total,
                s.n_success,
                s.success_rate,
                opt(s.mean_relative_improvement),
                opt(s.median_relative_improvement)
            );
        }
        out
    }

    /// Cells grouped by K, in first-seen order.
    pub fn by_k(&self) -> Vec<KSeries> {
        let mut order = Vec::new();
        let mut groups: BTreeMap<usize, Vec<&SweepCell>> = BTreeMap::new();
        for c in &self.cells {
            if !groups.contains_key(&c.k) {
                order.push(c.k);
            }
            groups.entry(c.k).or_default().push(c);
        }
        order
            .into_iter()
            .map(|k| {
                let cells = &groups[&k];
                let sr: Vec<f64> = cells.iter().map(|c| c.summary.success_rate).collect();
                let ri: Vec<f64> = cells.iter().filter_map(|c| c.summary.mean_relative_improvement).collect();
                KSeries {
                    k,
                    seeds: cells.iter().map(|c| c.seed).collect(),
                    mean_sr_pct: sr.iter().sum::<f64>() / sr.len() as f64,
                    min_sr_pct: sr.iter().copied().fold(f64::INFINITY, f64::min),
                    max_sr_pct: sr.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    mean_ri_pct: (!ri.is_empty()).then(|| ri.iter().sum::<f64>() / ri.len() as f64),
                    n_total: cells[0].summary.n_total,
                    sr_pct: sr,
                }
            })
            .collect()
    }

    /// Per-K mean and range over seeds.
    pub fn by_k_csv(&self) -> String {
        let mut out = String::from("attribute,K,n_seeds,mean_sr_pct,min_sr_pct,max_sr_pct,mean_ri_pct\n");
        for s in self.by_k() {
            let _ = writeln!(
                out,
                "{},{},{},{:.2},{:.2},{:.2},{}",
                self.attribute,
                s.k,
                s.seeds.len(),
                s.mean_sr_pct,
                s.min_sr_pct,
                s.max_sr_pct,
                opt(s.mean_ri_pct)
            );
        }
        out
    }

    /// Plot-ready series.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "attribute": self.attribute,
            "series": self.by_k(),
        })
    }
}
