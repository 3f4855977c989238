// SPDX-License-Identifier: Apache-2.0

//! One experiment cell: extract principles for (K, seed), then optimize
//! every prepared target with them.

use crate::corpus::{ModuleId, VerilogModule};
use crate::leakage_guard::LeakageGuard;
use crate::model_client::ModelClient;
use crate::optimizer::{OptimizationRecord, OptimizationRun, OptimizationVerdict, Optimizer, OptimizerError, OptimizerOptions};
use crate::pairing::ContrastivePair;
use crate::principles::{extract_principles, ExtractOptions, Extraction, PrinciplesError, PromptStyle};
use crate::synthesis::{Attribute, PpaMetrics, SynthesisBackend};

#[derive(Debug, thiserror::Error)]
pub enum CellError {
    #[error(transparent)]
    Principles(#[from] PrinciplesError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

pub struct Experiment<'a> {
    pub local: &'a ModelClient,
    pub cloud: &'a ModelClient,
    pub backend: &'a dyn SynthesisBackend,
    /// Audits principle sets; built without a public allowlist.
    pub principle_guard: &'a LeakageGuard,
    /// Audits rewrite prompts; knows the public target code.
    pub prompt_guard: &'a LeakageGuard,
    pub pairs: &'a [ContrastivePair],
    pub lookup: &'a dyn Fn(&ModuleId) -> Option<VerilogModule>,
    pub targets: &'a [(VerilogModule, PpaMetrics)],
    pub attribute: Attribute,
    pub style: PromptStyle,
    pub optimizer: OptimizerOptions,
}

#[derive(Debug, Clone)]
pub struct CellOutput {
    pub extraction: Extraction,
    /// True when the principle set failed its audit and no target was sent.
    pub quarantined: bool,
    pub runs: Vec<OptimizationRun>,
}

impl CellOutput {
    pub fn records(&self) -> Vec<OptimizationRecord> {
        self.runs.iter().map(|r| r.record.clone()).collect()
    }
}

fn blocked(target: &VerilogModule, before: &PpaMetrics, x: &Extraction, cloud: &ModelClient) -> OptimizationRun {
    OptimizationRun {
        record: OptimizationRecord {
            target_id: target.id.clone(),
            target_name: target.name.clone(),
            category: target.category.clone(),
            attribute: x.set.attribute,
            principle_set_id: x.set.id.clone(),
            cloud_model: cloud.identity(),
            prompt_hash: String::new(),
            response: String::new(),
            extracted_module: None,
            target_source: target.source.clone(),
            before: before.clone(),
            after: None,
            verdict: OptimizationVerdict::AuditBlocked,
            relative_delta: None,
            attempts: 0,
            first_attempt_verdict: OptimizationVerdict::AuditBlocked,
            audit_verdict_ids: vec![x.audit.verdict_id.clone()],
            diagnostics: vec![format!("principle set {} quarantined by audit {}", x.set.id, x.audit.verdict_id)],
        },
        generations: Vec::new(),
        audits: Vec::new(),
    }
}

impl Experiment<'_> {
    /// A quarantined principle set turns into AuditBlocked records for every
    /// target, so each cell still covers the full target set.
    pub fn run_cell(&self, k: usize, seed: u64) -> Result<CellOutput, CellError> {
        let options = ExtractOptions {
            k,
            seed,
            style: self.style,
            clock: self.optimizer.clock,
        };
        let extracted = extract_principles(self.local, self.pairs, self.lookup, self.attribute, self.principle_guard, &options);
        let (extraction, quarantined) = match extracted {
            Ok(x) => (x, false),
            Err(PrinciplesError::LeakageDetected { quarantined }) => {
                log::warn!("principle set {} quarantined; targets not sent", quarantined.set.id);
                (*quarantined, true)
            }
            Err(e) => return Err(e.into()),
        };
        let runs = if quarantined {
            self.targets
                .iter()
                .map(|(t, b)| blocked(t, b, &extraction, self.cloud))
                .collect()
        } else {
            let opt = Optimizer::new(self.cloud, self.backend, self.prompt_guard, self.optimizer.clone())?;
            opt.optimize_all(self.targets, &extraction.set)?
        };
        Ok(CellOutput {
            extraction,
            quarantined,
            runs,
        })
    }
}
