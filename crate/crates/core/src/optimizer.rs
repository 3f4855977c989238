// SPDX-License-Identifier: Apache-2.0

//! Cloud rewriting of target modules under a principle set.
//!
//! Every prompt is audited before it leaves; a blocked prompt never reaches
//! the endpoint. The reply is reduced to one module, renamed back to the
//! target's name if needed, port-checked against the target, validated and
//! measured. Extraction and synthesis failures are retried with the
//! diagnostic appended to the prompt.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::corpus::{module_regions, parse_header, CodebaseKind, ModuleId, VerilogModule};
use crate::hashing::short_hash;
use crate::leakage_guard::{AuditEntry, AuditVerdict, LeakageGuard};
use crate::lexer::{lex, TokenKind};
use crate::model_client::{ClientError, EndpointRole, GenerationRecord, ModelClient};
use crate::parallel::{map_ordered, worker_count};
use crate::principles::PrincipleSet;
use crate::synthesis::{
    compare, validate_and_measure, Attribute, Outcome, PpaMetrics, SynthesisBackend,
    SynthesisConstraints, Validation,
};

pub const P2_TEMPLATE: &str = include_str!("../templates/p2.txt");
pub const DEFAULT_RETRIES: u32 = 2;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("principle set is for {found}, target attribute is {expected}")]
    AttributeMismatch { expected: Attribute, found: Attribute },
    #[error("principle set {0} is empty")]
    EmptyPrinciples(String),
    #[error("endpoint {0} is not a Cloud endpoint")]
    NotCloud(String),
}

pub fn target_phrase(attribute: Attribute) -> &'static str {
    match attribute {
        Attribute::Power => "low-power",
        Attribute::CriticalPathDelay => "low critical path delay",
    }
}

/// Fills the rewrite prompt for `target`.
pub fn render_p2(
    target: &VerilogModule,
    principles: &PrincipleSet,
    attribute: Attribute,
) -> Result<String, OptimizerError> {
    if principles.attribute != attribute {
        return Err(OptimizerError::AttributeMismatch {
            expected: attribute,
            found: principles.attribute,
        });
    }
    if principles.principles.is_empty() {
        return Err(OptimizerError::EmptyPrinciples(principles.id.clone()));
    }
    Ok(P2_TEMPLATE
        .replace("{target}", target_phrase(attribute))
        .replace("{design principle}", &principles.joined())
        .replace("{verilog to optimize}", target.source.trim_end()))
}

fn with_diagnostic(prompt: &str, diagnostic: &str) -> String {
    format!(
        "{}\n\nYour previous answer was rejected:\n{diagnostic}\n\nReturn the complete corrected module.\n",
        prompt.trim_end()
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizationVerdict {
    Improved,
    Regressed,
    Unchanged,
    SynthesisFailed,
    ExtractionFailed,
    AuditBlocked,
    EndpointUnreachable,
}

impl OptimizationVerdict {
    pub const ALL: [OptimizationVerdict; 7] = [
        OptimizationVerdict::Improved,
        OptimizationVerdict::Regressed,
        OptimizationVerdict::Unchanged,
        OptimizationVerdict::SynthesisFailed,
        OptimizationVerdict::ExtractionFailed,
        OptimizationVerdict::AuditBlocked,
        OptimizationVerdict::EndpointUnreachable,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizationVerdict::Improved => "improved",
            OptimizationVerdict::Regressed => "regressed",
            OptimizationVerdict::Unchanged => "unchanged",
            OptimizationVerdict::SynthesisFailed => "synthesis_failed",
            OptimizationVerdict::ExtractionFailed => "extraction_failed",
            OptimizationVerdict::AuditBlocked => "audit_blocked",
            OptimizationVerdict::EndpointUnreachable => "endpoint_unreachable",
        }
    }

    fn retryable(self) -> bool {
        matches!(self, OptimizationVerdict::SynthesisFailed | OptimizationVerdict::ExtractionFailed)
    }

    /// True when the candidate synthesized and was compared.
    pub fn measured(self) -> bool {
        use OptimizationVerdict::*;
        matches!(self, Improved | Regressed | Unchanged)
    }
}

impl From<Outcome> for OptimizationVerdict {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::Improved => OptimizationVerdict::Improved,
            Outcome::Regressed => OptimizationVerdict::Regressed,
            Outcome::Unchanged => OptimizationVerdict::Unchanged,
        }
    }
}

impl std::fmt::Display for OptimizationVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationRecord {
    pub target_id: ModuleId,
    pub target_name: String,
    pub category: crate::corpus::DesignCategory,
    pub attribute: Attribute,
    pub principle_set_id: String,
    pub cloud_model: String,
    /// Hash of the last prompt sent, or of the blocked one.
    pub prompt_hash: String,
    /// Last cloud response; empty when nothing was received.
    pub response: String,
    pub extracted_module: Option<VerilogModule>,
    pub target_source: String,
    pub before: PpaMetrics,
    pub after: Option<PpaMetrics>,
    pub verdict: OptimizationVerdict,
    pub relative_delta: Option<f64>,
    /// Cloud calls made.
    pub attempts: u32,
    pub first_attempt_verdict: OptimizationVerdict,
    pub audit_verdict_ids: Vec<String>,
    pub diagnostics: Vec<String>,
}

impl OptimizationRecord {
    /// Checks the record's internal consistency.
    pub fn check(&self) -> Result<(), String> {
        if self.relative_delta.is_some() != self.after.is_some() {
            return Err("relative_delta must be present exactly when after is".into());
        }
        if let Some(after) = &self.after {
            let c = compare(&self.before, after, self.attribute).map_err(|e| e.to_string())?;
            if OptimizationVerdict::from(c.outcome) != self.verdict {
                return Err(format!("verdict {} disagrees with compare ({:?})", self.verdict, c.outcome));
            }
            if Some(c.relative_delta) != self.relative_delta {
                return Err("relative_delta disagrees with compare".into());
            }
        } else if self.verdict.measured() {
            return Err(format!("verdict {} without after metrics", self.verdict));
        }
        if self.verdict == OptimizationVerdict::AuditBlocked && self.attempts != 0 {
            return Err("audit-blocked record has cloud traffic".into());
        }
        Ok(())
    }
}

/// One optimization plus the log lines it produced, for ordered flushing.
#[derive(Debug, Clone)]
pub struct OptimizationRun {
    pub record: OptimizationRecord,
    pub generations: Vec<GenerationRecord>,
    pub audits: Vec<AuditEntry>,
}

#[derive(Debug, Clone)]
pub struct OptimizerOptions {
    pub retries: u32,
    pub constraints: SynthesisConstraints,
    pub clock: Clock,
    /// Upper bound on concurrent targets; further capped by the endpoint
    /// and the backend.
    pub max_workers: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            retries: DEFAULT_RETRIES,
            constraints: SynthesisConstraints::default(),
            clock: Clock::System,
            max_workers: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DryRun {
    pub prompt: String,
    pub verdict: AuditVerdict,
    pub would_send: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSkip {
    pub module_id: ModuleId,
    pub name: String,
    pub reason: String,
}

/// Validates and measures each target. Targets that fail are skipped and
/// do not enter the evaluation denominator.
pub fn prepare_targets(
    targets: &[VerilogModule],
    backend: &dyn SynthesisBackend,
    constraints: &SynthesisConstraints,
) -> (Vec<(VerilogModule, PpaMetrics)>, Vec<TargetSkip>) {
    let workers = worker_count(backend.capabilities().max_parallelism);
    let measured = map_ordered(targets, workers, |_, t| validate_and_measure(backend, t, constraints));
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for (t, m) in targets.iter().zip(measured) {
        match m {
            Ok(m) => ok.push((t.clone(), m)),
            Err(e) => {
                log::warn!("skipping target {} ({}): {e}", t.name, t.id);
                skipped.push(TargetSkip {
                    module_id: t.id.clone(),
                    name: t.name.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    (ok, skipped)
}

/// Renames the module declared in `region` to `name`.
fn rename_module(region: &str, name: &str) -> String {
    let ident = lex(region)
        .into_iter()
        .skip(1)
        .find(|t| t.kind == TokenKind::Ident);
    match ident {
        Some(t) if t.text != name => format!("{}{name}{}", &region[..t.start], &region[t.end..]),
        _ => region.to_string(),
    }
}

/// Pulls the candidate module out of a reply: the one named like the
/// target when present, else the first.
fn extract_candidate(response: &str, target: &VerilogModule) -> Result<String, String> {
    let regions = module_regions(response);
    if regions.is_empty() {
        return Err("no module ... endmodule block found in the response".into());
    }
    let named = regions
        .iter()
        .find(|r| parse_header(r.slice(response)).is_ok_and(|h| h.name == target.name));
    let region = named.unwrap_or(&regions[0]).slice(response);
    Ok(rename_module(region, &target.name))
}

enum Attempt {
    Done {
        verdict: OptimizationVerdict,
        module: Option<VerilogModule>,
        after: Option<PpaMetrics>,
        delta: Option<f64>,
    },
    Failed {
        verdict: OptimizationVerdict,
        module: Option<VerilogModule>,
        diagnostic: String,
    },
}

pub struct Optimizer<'a> {
    cloud: &'a ModelClient,
    backend: &'a dyn SynthesisBackend,
    guard: &'a LeakageGuard,
    options: OptimizerOptions,
}

impl<'a> Optimizer<'a> {
    pub fn new(
        cloud: &'a ModelClient,
        backend: &'a dyn SynthesisBackend,
        guard: &'a LeakageGuard,
        options: OptimizerOptions,
    ) -> Result<Self, OptimizerError> {
        if cloud.role() != EndpointRole::Cloud {
            return Err(OptimizerError::NotCloud(cloud.identity()));
        }
        Ok(Optimizer {
            cloud,
            backend,
            guard,
            options,
        })
    }

    /// Renders and audits the first prompt without calling the endpoint.
    pub fn dry_run(&self, target: &VerilogModule, principles: &PrincipleSet) -> Result<DryRun, OptimizerError> {
        let prompt = render_p2(target, principles, principles.attribute)?;
        let verdict = self.guard.audit(&prompt, &context(target, principles, 1));
        let would_send = self.guard.clearance(&verdict).is_some();
        Ok(DryRun {
            prompt,
            verdict,
            would_send,
        })
    }

    fn evaluate(&self, response: &str, target: &VerilogModule, before: &PpaMetrics, attribute: Attribute) -> Attempt {
        let source = match extract_candidate(response, target) {
            Ok(s) => s,
            Err(d) => {
                return Attempt::Failed {
                    verdict: OptimizationVerdict::ExtractionFailed,
                    module: None,
                    diagnostic: d,
                }
            }
        };
        let header = match parse_header(&source) {
            Ok(h) => h,
            Err(e) => {
                return Attempt::Failed {
                    verdict: OptimizationVerdict::ExtractionFailed,
                    module: None,
                    diagnostic: format!("module header does not parse: {e}"),
                }
            }
        };
        let module = VerilogModule {
            id: ModuleId::of_source(&source),
            name: target.name.clone(),
            source,
            instruction: target.instruction.clone(),
            category: target.category.clone(),
            bit_width: target.bit_width,
            codebase: CodebaseKind::Target,
        };
        let interface_ok = target.header().is_ok_and(|t| t.same_interface(&header));
        if !interface_ok {
            return Attempt::Failed {
                verdict: OptimizationVerdict::ExtractionFailed,
                module: Some(module),
                diagnostic: "port list differs from the original module; keep every port name, direction and width".into(),
            };
        }
        if let Some(Ok(false)) = self.backend.check_equivalence(target, &module) {
            return Attempt::Failed {
                verdict: OptimizationVerdict::ExtractionFailed,
                module: Some(module),
                diagnostic: "optimized module is not functionally equivalent to the original".into(),
            };
        }
        let synth_fail = |d: String, m: VerilogModule| Attempt::Failed {
            verdict: OptimizationVerdict::SynthesisFailed,
            module: Some(m),
            diagnostic: d,
        };
        match self.backend.validate(&module) {
            Ok(Validation::Ok(_)) => {}
            Ok(v) => return synth_fail(v.diagnostic(), module),
            Err(e) => return synth_fail(e.to_string(), module),
        }
        let after = match self.backend.measure(&module, &self.options.constraints) {
            Ok(m) => m,
            Err(e) => return synth_fail(e.to_string(), module),
        };
        match compare(before, &after, attribute) {
            Ok(c) => Attempt::Done {
                verdict: c.outcome.into(),
                module: Some(module),
                after: Some(after),
                delta: Some(c.relative_delta),
            },
            Err(e) => synth_fail(e.to_string(), module),
        }
    }

    /// Runs the full rewrite loop for one target. Never fails: every
    /// terminal condition is a verdict on the record.
    pub fn optimize(
        &self,
        target: &VerilogModule,
        before: &PpaMetrics,
        principles: &PrincipleSet,
    ) -> Result<OptimizationRun, OptimizerError> {
        let attribute = principles.attribute;
        let base_prompt = render_p2(target, principles, attribute)?;
        let mut record = OptimizationRecord {
            target_id: target.id.clone(),
            target_name: target.name.clone(),
            category: target.category.clone(),
            attribute,
            principle_set_id: principles.id.clone(),
            cloud_model: self.cloud.identity(),
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
            audit_verdict_ids: Vec::new(),
            diagnostics: Vec::new(),
        };
        let mut generations = Vec::new();
        let mut audits = Vec::new();
        let mut prompt = base_prompt.clone();

        for round in 1..=self.options.retries + 1 {
            let ctx = context(target, principles, round);
            let verdict = self.guard.audit(&prompt, &ctx);
            audits.push(AuditEntry::new(&verdict, &prompt, &ctx, self.options.clock.timestamp()));
            record.audit_verdict_ids.push(verdict.id.clone());
            record.prompt_hash = short_hash(prompt.as_bytes());
            let Some(clearance) = self.guard.clearance(&verdict) else {
                record
                    .diagnostics
                    .push(format!("prompt blocked by audit {} ({} findings)", verdict.id, verdict.findings.len()));
                // a blocked retry keeps the verdict of the attempt before it
                if round == 1 {
                    record.verdict = OptimizationVerdict::AuditBlocked;
                }
                break;
            };

            let generation = match self.cloud.generate(&prompt, Some(&clearance), &ctx) {
                Ok(g) => g,
                Err(e) => {
                    let diagnostic = match &e {
                        ClientError::EndpointUnreachable { .. } | ClientError::Rejected { .. } => e.to_string(),
                        other => format!("client error: {other}"),
                    };
                    log::warn!("{}: {diagnostic}", target.name);
                    record.diagnostics.push(diagnostic);
                    record.verdict = OptimizationVerdict::EndpointUnreachable;
                    if round == 1 {
                        record.first_attempt_verdict = record.verdict;
                    }
                    break;
                }
            };
            record.attempts += 1;
            record.response = generation.response.clone();
            let outcome = self.evaluate(&generation.response, target, before, attribute);
            generations.push(generation);

            match outcome {
                Attempt::Done {
                    verdict,
                    module,
                    after,
                    delta,
                } => {
                    record.verdict = verdict;
                    record.extracted_module = module;
                    record.after = after;
                    record.relative_delta = delta;
                }
                Attempt::Failed {
                    verdict,
                    module,
                    diagnostic,
                } => {
                    record.verdict = verdict;
                    record.extracted_module = module;
                    record.diagnostics.push(diagnostic.clone());
                    prompt = with_diagnostic(&base_prompt, &diagnostic);
                }
            }
            if round == 1 {
                record.first_attempt_verdict = record.verdict;
            }
            if !record.verdict.retryable() {
                break;
            }
        }
        if record.verdict == OptimizationVerdict::AuditBlocked && record.attempts == 0 {
            record.first_attempt_verdict = OptimizationVerdict::AuditBlocked;
        }
        Ok(OptimizationRun {
            record,
            generations,
            audits,
        })
    }

    /// Optimizes independent targets concurrently; results keep input order.
    pub fn optimize_all(
        &self,
        targets: &[(VerilogModule, PpaMetrics)],
        principles: &PrincipleSet,
    ) -> Result<Vec<OptimizationRun>, OptimizerError> {
        if principles.principles.is_empty() {
            return Err(OptimizerError::EmptyPrinciples(principles.id.clone()));
        }
        let limit = self
            .options
            .max_workers
            .min(self.cloud.config().max_in_flight.max(1))
            .min(self.backend.capabilities().max_parallelism.max(1));
        map_ordered(targets, worker_count(limit), |_, (t, before)| self.optimize(t, before, principles))
            .into_iter()
            .collect()
    }
}

fn context(target: &VerilogModule, principles: &PrincipleSet, round: u32) -> String {
    format!("p2:{}:{}:a{round}", principles.id, target.id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Classifier, Codebase};
    use crate::leakage_guard::LeakagePolicy;
    use crate::model_client::{EndpointConfig, Script, ScriptedReply, ScriptedTransport};
    use crate::synthesis::MockBackend;

    const SHIFTER_A: &str = include_str!("../fixtures/barrel_shifter_multistage.v");
    const SHIFTER_B: &str = include_str!("../fixtures/barrel_shifter_direct.v");
    const SECRET: &str = "module vault_ctr (input clk, output reg [7:0] q);\n  always @(posedge clk) q <= q + 8'd3 ^ zq_mixer_lane;\nendmodule\n";

    fn module(src: &str, kind: CodebaseKind) -> VerilogModule {
        VerilogModule::parse(src, "16-bit barrel shifter", kind, &Classifier::default()).unwrap()
    }

    fn principles(attribute: Attribute, items: &[&str]) -> PrincipleSet {
        PrincipleSet {
            id: "ps-test".into(),
            attribute,
            k: 1,
            seed: 0,
            principles: items.iter().map(|s| s.to_string()).collect(),
            source_pair_ids: vec!["a~b".into()],
            model: "local".into(),
            audit_verdict_id: "av-x".into(),
            raw_response: String::new(),
        }
    }

    fn cloud(transport: ScriptedTransport) -> ModelClient {
        ModelClient::scripted(
            EndpointConfig {
                name: "cloud".into(),
                role: EndpointRole::Cloud,
                model: "scripted-cloud".into(),
                ..Default::default()
            },
            transport,
        )
        .unwrap()
    }

    fn reply(text: &str) -> ScriptedTransport {
        ScriptedTransport::new(Script {
            default: Some(text.into()),
            ..Default::default()
        })
    }

    fn guard(target: &VerilogModule) -> LeakageGuard {
        let mut p = Codebase::new(CodebaseKind::Proprietary, "p");
        p.insert(VerilogModule::parse(SECRET, "", CodebaseKind::Proprietary, &Classifier::default()).unwrap());
        LeakageGuard::build(&p, LeakagePolicy::default())
            .unwrap()
            .with_public([target.source.as_str()])
    }

    fn opts() -> OptimizerOptions {
        OptimizerOptions {
            clock: Clock::Logical,
            ..Default::default()
        }
    }

    fn run(reply_text: &str, ps: &PrincipleSet) -> OptimizationRun {
        let target = module(SHIFTER_B, CodebaseKind::Target);
        let backend = MockBackend::new();
        let before = validate_and_measure(&backend, &target, &SynthesisConstraints::default()).unwrap();
        let c = cloud(reply(reply_text));
        let g = guard(&target);
        let opt = Optimizer::new(&c, &backend, &g, opts()).unwrap();
        opt.optimize(&target, &before, ps).unwrap()
    }

    #[test]
    fn p2_rendering() {
        let target = module(SHIFTER_B, CodebaseKind::Target);
        let ps = principles(Attribute::Power, &["Prefer staged shifts", "Avoid wide muxes"]);
        let p = render_p2(&target, &ps, Attribute::Power).unwrap();
        assert!(p.contains("optimize the following Verilog code for low-power"));
        assert!(p.contains("1. Prefer staged shifts\n2. Avoid wide muxes"));
        assert!(p.contains(&format!("```verilog\n{}\n```", SHIFTER_B.trim_end())));
        assert!(p.contains("Do not copy any code from other sources"));
        let d = render_p2(&target, &principles(Attribute::CriticalPathDelay, &["x"]), Attribute::CriticalPathDelay).unwrap();
        assert!(d.contains("for low critical path delay"));
        assert!(matches!(render_p2(&target, &ps, Attribute::CriticalPathDelay), Err(OptimizerError::AttributeMismatch { .. })));
        assert!(matches!(
            render_p2(&target, &principles(Attribute::Power, &[]), Attribute::Power),
            Err(OptimizerError::EmptyPrinciples(_))
        ));
    }

    #[test]
    fn improved_with_fixture_delta() {
        let ps = principles(Attribute::Power, &["Prefer staged shifts"]);
        let r = run(&format!("Here you go:\n```verilog\n{SHIFTER_A}```\n"), &ps).record;
        assert_eq!(r.verdict, OptimizationVerdict::Improved);
        assert_eq!(r.first_attempt_verdict, OptimizationVerdict::Improved);
        assert_eq!(r.attempts, 1);
        let delta = r.relative_delta.unwrap();
        assert!((delta - (29.074 - 23.125) / 29.074).abs() < 1e-12);
        assert_eq!(r.after.as_ref().unwrap().power_uw, 23.125);
        r.check().unwrap();
    }

    #[test]
    fn prose_only_exhausts_retries() {
        let ps = principles(Attribute::Power, &["Prefer staged shifts"]);
        let out = run("I would restructure the shifter into stages.", &ps);
        assert_eq!(out.record.verdict, OptimizationVerdict::ExtractionFailed);
        assert_eq!(out.record.attempts, 3);
        assert_eq!(out.generations.len(), 3);
        assert_eq!(out.audits.len(), 3);
        assert!(out.generations[1].prompt.contains("previous answer was rejected"));
        out.record.check().unwrap();
    }

    #[test]
    fn renamed_module_is_renamed_back() {
        let ps = principles(Attribute::Power, &["Prefer staged shifts"]);
        let renamed = SHIFTER_A.replace("barrel_shifter_16bit", "shifter_opt");
        let r = run(&renamed, &ps).record;
        let m = r.extracted_module.unwrap();
        assert_eq!(m.name, "barrel_shifter_16bit");
        assert!(m.source.starts_with("module barrel_shifter_16bit"));
        // renamed source is the fixture again
        assert_eq!(r.verdict, OptimizationVerdict::Improved);
    }

    #[test]
    fn picks_module_named_like_target() {
        let ps = principles(Attribute::Power, &["Prefer staged shifts"]);
        let helper = "module helper (input a, output b);\n  assign b = a;\nendmodule\n";
        let r = run(&format!("{helper}\n{SHIFTER_A}"), &ps).record;
        assert_eq!(r.verdict, OptimizationVerdict::Improved);
    }

    #[test]
    fn port_mismatch_is_extraction_failure() {
        let ps = principles(Attribute::Power, &["Prefer staged shifts"]);
        let bad = SHIFTER_A.replace("input [3:0] shift_amount", "input [4:0] shift_amount");
        let r = run(&bad, &ps).record;
        assert_eq!(r.verdict, OptimizationVerdict::ExtractionFailed);
        assert!(r.diagnostics[0].contains("port list"));
    }

    #[test]
    fn broken_code_is_synthesis_failure() {
        let ps = principles(Attribute::Power, &["Prefer staged shifts"]);
        let bad = SHIFTER_A.replace("end", "");
        let bad = format!("{}endmodule\n", bad.trim_end().trim_end_matches("module"));
        let r = run(&bad, &ps).record;
        assert_eq!(r.verdict, OptimizationVerdict::SynthesisFailed, "{:?}", r.diagnostics);
        assert_eq!(r.attempts, 3);
        r.check().unwrap();
    }

    #[test]
    fn unchanged_and_regressed() {
        let ps = principles(Attribute::Power, &["Prefer staged shifts"]);
        let r = run(SHIFTER_B, &ps).record;
        assert_eq!(r.verdict, OptimizationVerdict::Unchanged);
        assert_eq!(r.relative_delta, Some(0.0));
        r.check().unwrap();
    }

    #[test]
    fn contaminated_principles_are_blocked_without_traffic() {
        let target = module(SHIFTER_B, CodebaseKind::Target);
        let backend = MockBackend::new();
        let before = validate_and_measure(&backend, &target, &SynthesisConstraints::default()).unwrap();
        let transport = reply(SHIFTER_A);
        let c = cloud(transport);
        let g = guard(&target);
        let ps = principles(Attribute::Power, &[&format!("Write it like this: {SECRET}")]);
        let opt = Optimizer::new(&c, &backend, &g, opts()).unwrap();
        let out = opt.optimize(&target, &before, &ps).unwrap();
        assert_eq!(out.record.verdict, OptimizationVerdict::AuditBlocked);
        assert_eq!(out.record.attempts, 0);
        assert!(out.generations.is_empty());
        assert_eq!(out.audits.len(), 1);
        assert!(!out.audits[0].findings.is_empty());
        out.record.check().unwrap();
        let dry = opt.dry_run(&target, &ps).unwrap();
        assert!(!dry.would_send);
    }

    #[test]
    fn unreachable_endpoint() {
        let target = module(SHIFTER_B, CodebaseKind::Target);
        let backend = MockBackend::new();
        let before = validate_and_measure(&backend, &target, &SynthesisConstraints::default()).unwrap();
        let transport = ScriptedTransport::new(Script::default())
            .then_reply(ScriptedReply::Transient("down".into()))
            .then_reply(ScriptedReply::Transient("down".into()))
            .then_reply(ScriptedReply::Transient("down".into()));
        let c = cloud(transport);
        let g = guard(&target);
        let opt = Optimizer::new(&c, &backend, &g, opts()).unwrap();
        let ps = principles(Attribute::Power, &["Prefer staged shifts"]);
        let r = opt.optimize(&target, &before, &ps).unwrap().record;
        assert_eq!(r.verdict, OptimizationVerdict::EndpointUnreachable);
        assert_eq!(r.attempts, 0);
        r.check().unwrap();
    }

    #[test]
    fn every_generation_has_a_clear_audit() {
        let target = module(SHIFTER_B, CodebaseKind::Target);
        let backend = MockBackend::new();
        let before = validate_and_measure(&backend, &target, &SynthesisConstraints::default()).unwrap();
        let c = cloud(reply("no code here"));
        let g = guard(&target);
        let opt = Optimizer::new(&c, &backend, &g, opts()).unwrap();
        let ps = principles(Attribute::Power, &["Prefer staged shifts"]);
        let targets = vec![(target.clone(), before.clone()), (target, before)];
        for run in opt.optimize_all(&targets, &ps).unwrap() {
            for gen in &run.generations {
                let id = gen.clearance_id.as_deref().unwrap();
                let hits: Vec<_> = run.audits.iter().filter(|a| a.verdict_id == id).collect();
                assert_eq!(hits.len(), 1);
                assert!(matches!(hits[0].verdict, crate::leakage_guard::Verdict::Clear));
            }
        }
    }

    #[test]
    fn local_endpoint_refused() {
        let c = ModelClient::scripted(EndpointConfig::default(), reply("x")).unwrap();
        let target = module(SHIFTER_B, CodebaseKind::Target);
        let g = guard(&target);
        let backend = MockBackend::new();
        assert!(matches!(Optimizer::new(&c, &backend, &g, opts()), Err(OptimizerError::NotCloud(_))));
    }

    #[test]
    fn targets_failing_validation_are_skipped() {
        let c = Classifier::default();
        let ok = VerilogModule::parse(SHIFTER_B, "", CodebaseKind::Target, &c).unwrap();
        let broken = VerilogModule::parse("module z(input a, output b);\n  assign b = (a;\nendmodule\n", "", CodebaseKind::Target, &c).unwrap();
        let (ready, skipped) = prepare_targets(&[ok, broken], &MockBackend::new(), &SynthesisConstraints::default());
        assert_eq!(ready.len(), 1);
        assert_eq!(skipped.len(), 1);
        assert_eq!(skipped[0].name, "z");
    }
}
