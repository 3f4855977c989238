// SPDX-License-Identifier: Apache-2.0

//! Dataset JSONL: one contrastive sample per line.
//!
//! `implementation_a` is always the better (proprietary-side) design for
//! `attribute`, `implementation_b` the worse one.

use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    Classifier, Codebase, CodebaseKind, CorpusError, DesignCategory, IngestStatus, Ingested,
    ManifestEntry, ModuleId, VerilogModule,
};
use crate::pairing::ContrastivePair;
use crate::synthesis::{Attribute, PpaMetrics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSample {
    pub instruction: String,
    pub implementation_a: String,
    pub implementation_b: String,
    pub metrics_a: PpaMetrics,
    pub metrics_b: PpaMetrics,
    pub category: DesignCategory,
    pub attribute: Attribute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSkip {
    pub pair_id: String,
    pub reason: String,
}

/// Builds samples from validated pairs, sorted by `(category,
/// proprietary_id)`. Pairs whose modules are missing or whose invariants do
/// not hold are skipped and logged.
pub fn emit_dataset(
    pairs: &[ContrastivePair],
    lookup: &dyn Fn(&ModuleId) -> Option<VerilogModule>,
) -> (Vec<DatasetSample>, Vec<DatasetSkip>) {
    let mut keyed = Vec::new();
    let mut skipped = Vec::new();
    for pair in pairs {
        let (Some(p), Some(d)) = (lookup(&pair.proprietary_id), lookup(&pair.draft_id)) else {
            skipped.push(DatasetSkip {
                pair_id: pair.id(),
                reason: "module not found".into(),
            });
            continue;
        };
        let reason = if p.group() != d.group() {
            Some("category or bit width differs".to_string())
        } else if pair.metrics_p.metric(pair.attribute) == pair.metrics_d.metric(pair.attribute) {
            Some(format!("{} metric is equal on both sides", pair.attribute))
        } else {
            None
        };
        if let Some(reason) = reason {
            log::warn!("skipping pair {}: {reason}", pair.id());
            skipped.push(DatasetSkip {
                pair_id: pair.id(),
                reason,
            });
            continue;
        }
        let instruction = if p.instruction.is_empty() { &d.instruction } else { &p.instruction };
        let sample = DatasetSample {
            instruction: instruction.clone(),
            implementation_a: p.source.clone(),
            implementation_b: d.source.clone(),
            metrics_a: pair.metrics_p.clone(),
            metrics_b: pair.metrics_d.clone(),
            category: p.category.clone(),
            attribute: pair.attribute,
        };
        keyed.push((
            (p.category.to_string(), pair.proprietary_id.clone(), pair.draft_id.clone(), pair.attribute),
            sample,
        ));
    }
    if pairs.is_empty() {
        log::warn!("no pairs to emit; dataset is empty");
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    (keyed.into_iter().map(|(_, s)| s).collect(), skipped)
}

/// Reads a dataset file as a codebase. The proprietary codebase takes each
/// sample's `implementation_a`; draft and target codebases take
/// `implementation_b`. A line that is not valid JSON is fatal; a sample
/// whose implementation does not parse is a recorded skip.
pub fn ingest_dataset(
    path: &Path,
    kind: CodebaseKind,
    classifier: &Classifier,
) -> Result<Ingested, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut codebase = Codebase::new(kind, path);
    let mut manifest = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: DatasetSample = serde_json::from_str(&line).map_err(|e| CorpusError::Dataset {
            line: i + 1,
            detail: e.to_string(),
        })?;
        let source = match kind {
            CodebaseKind::Proprietary => &sample.implementation_a,
            CodebaseKind::Draft | CodebaseKind::Target => &sample.implementation_b,
        };
        let entry_path = format!("{}:{}", path.display(), i + 1);
        match VerilogModule::parse(source, &sample.instruction, kind, classifier) {
            Ok(m) => {
                let id = m.id.clone();
                let fresh = codebase.insert(m);
                manifest.push(ManifestEntry {
                    path: entry_path,
                    id: Some(id),
                    status: if fresh { IngestStatus::Ok } else { IngestStatus::Skipped },
                    reason: (!fresh).then(|| "duplicate module".to_string()),
                });
            }
            Err(e) => manifest.push(ManifestEntry {
                path: entry_path,
                id: None,
                status: IngestStatus::Skipped,
                reason: Some(e.to_string()),
            }),
        }
    }
    Ok(Ingested { codebase, manifest })
}
