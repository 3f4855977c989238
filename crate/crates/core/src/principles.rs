// SPDX-License-Identifier: Apache-2.0

//! Principle extraction on the local endpoint.
//!
//! K pairs are sampled, rendered into the extraction prompt (draft first,
//! labelled inefficient, then the proprietary version, labelled
//! efficient), sent to a Local endpoint, and the reply is split into list
//! items. The resulting set is audited against the proprietary corpus
//! before it can be used; a flagged set is returned quarantined.

use std::sync::LazyLock;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::corpus::{ModuleId, VerilogModule};
use crate::hashing::short_hash;
use crate::leakage_guard::{AuditEntry, GuardAction, LeakageGuard};
use crate::model_client::{ClientError, EndpointRole, GenerationRecord, ModelClient};
use crate::pairing::ContrastivePair;
use crate::synthesis::Attribute;

pub const P1_POWER: &str = include_str!("../templates/p1_power.txt");
pub const P1_DELAY: &str = include_str!("../templates/p1_cpd.txt");
pub const P1_DELAY_VERBATIM: &str = include_str!("../templates/p1_cpd_verbatim.txt");

pub const DEFAULT_K: usize = 4;
pub const SWEEP_KS: [usize; 6] = [1, 2, 4, 8, 16, 32];

/// Actionability lexicon: imperative or comparative words.
pub const DEFAULT_LEXICON: &[&str] = &["prefer", "avoid", "use", "reduce", "minimize", "instead", "rather"];

#[derive(Debug, Error)]
pub enum PrinciplesError {
    #[error("need {requested} pairs for {attribute}, only {available} available")]
    InsufficientPairs {
        attribute: Attribute,
        available: usize,
        requested: usize,
    },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("pairs mix attributes")]
    MixedAttributes,
    #[error("no pairs to render")]
    NoPairs,
    #[error("module {0} not found in the pair store")]
    MissingModule(ModuleId),
    #[error("endpoint {0} is not a Local endpoint")]
    NotLocal(String),
    #[error("local endpoint returned an empty response")]
    EmptyResponse,
    /// The set is kept for inspection only; it must not be used.
    #[error("principles contain proprietary content ({} findings)", .quarantined.audit.findings.len())]
    LeakageDetected { quarantined: Box<Extraction> },
    #[error(transparent)]
    Client(#[from] ClientError),
}

/// Which extraction wording to use for the delay attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    /// Delay prompt with timing wording throughout.
    #[default]
    Corrected,
    /// Delay prompt exactly as originally published, including its
    /// power-oriented body text.
    Verbatim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipleSet {
    pub id: String,
    pub attribute: Attribute,
    pub k: usize,
    pub seed: u64,
    pub principles: Vec<String>,
    pub source_pair_ids: Vec<String>,
    pub model: String,
    pub audit_verdict_id: String,
    pub raw_response: String,
}

impl PrincipleSet {
    pub fn check(&self) -> Result<(), String> {
        if self.principles.is_empty() {
            return Err("principle set is empty".into());
        }
        if self.source_pair_ids.len() != self.k {
            return Err(format!("{} source pairs recorded for k = {}", self.source_pair_ids.len(), self.k));
        }
        Ok(())
    }

    /// Numbered list as it appears in prompts and audits.
    pub fn joined(&self) -> String {
        join_principles(&self.principles)
    }
}

pub fn join_principles(items: &[String]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, p)| format!("{}. {p}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Seeded uniform sample without replacement from the pairs for
/// `attribute`. Returns them in sample order; when `k` equals the number
/// available, returns all of them in store order.
pub fn sample_pairs(
    pairs: &[ContrastivePair],
    attribute: Attribute,
    k: usize,
    seed: u64,
) -> Result<Vec<ContrastivePair>, PrinciplesError> {
    if k == 0 {
        return Err(PrinciplesError::ZeroK);
    }
    let pool: Vec<&ContrastivePair> = pairs.iter().filter(|p| p.attribute == attribute).collect();
    if k > pool.len() {
        return Err(PrinciplesError::InsufficientPairs {
            attribute,
            available: pool.len(),
            requested: k,
        });
    }
    if k == pool.len() {
        return Ok(pool.into_iter().cloned().collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample(&mut rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}

fn p1_template(attribute: Attribute, style: PromptStyle) -> &'static str {
    match (attribute, style) {
        (Attribute::Power, _) => P1_POWER,
        (Attribute::CriticalPathDelay, PromptStyle::Corrected) => P1_DELAY,
        (Attribute::CriticalPathDelay, PromptStyle::Verbatim) => P1_DELAY_VERBATIM,
    }
}

fn metric_label(attribute: Attribute) -> &'static str {
    match attribute {
        Attribute::Power => "Power",
        Attribute::CriticalPathDelay => "Critical path delay",
    }
}

fn example_block(
    index: usize,
    pair: &ContrastivePair,
    draft: &VerilogModule,
    proprietary: &VerilogModule,
) -> String {
    let label = metric_label(pair.attribute);
    let unit = pair.attribute.unit();
    let instruction = if proprietary.instruction.is_empty() {
        &draft.instruction
    } else {
        &proprietary.instruction
    };
    let instruction = if instruction.is_empty() { "(none)" } else { instruction.as_str() };
    format!(
        "Example {index}:\nInstruction: {instruction}\n\n\
         Inefficient implementation ({label}: {} {unit}):\n```verilog\n{}\n```\n\n\
         Efficient implementation ({label}: {} {unit}):\n```verilog\n{}\n```",
        pair.metrics_d.metric(pair.attribute),
        draft.source.trim_end(),
        pair.metrics_p.metric(pair.attribute),
        proprietary.source.trim_end(),
    )
}

/// Renders the extraction prompt for `pairs`, in the order given.
pub fn render_p1(
    pairs: &[ContrastivePair],
    lookup: &dyn Fn(&ModuleId) -> Option<VerilogModule>,
    style: PromptStyle,
) -> Result<String, PrinciplesError> {
    let first = pairs.first().ok_or(PrinciplesError::NoPairs)?;
    if pairs.iter().any(|p| p.attribute != first.attribute) {
        return Err(PrinciplesError::MixedAttributes);
    }
    let mut blocks = Vec::with_capacity(pairs.len());
    for (i, pair) in pairs.iter().enumerate() {
        let d = lookup(&pair.draft_id).ok_or_else(|| PrinciplesError::MissingModule(pair.draft_id.clone()))?;
        let p = lookup(&pair.proprietary_id)
            .ok_or_else(|| PrinciplesError::MissingModule(pair.proprietary_id.clone()))?;
        blocks.push(example_block(i + 1, pair, &d, &p));
    }
    Ok(p1_template(first.attribute, style).replace("{context_examples}", &blocks.join("\n\n")))
}

static MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:\d+[.)]|[-*•+])\s+(.*)$").expect("marker regex"));

fn clean(item: &str) -> String {
    item.replace("**", "").split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits a reply into list items. Each numbered or bulleted line starts a
/// new item and following unmarked lines continue it; text before the
/// first marker is dropped. Without any marker the whole reply is one item.
pub fn parse_principles(response: &str) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    let mut current: Option<String> = None;
    for line in response.lines() {
        if let Some(c) = MARKER.captures(line) {
            if let Some(done) = current.take() {
                items.push(done);
            }
            current = Some(c[1].to_string());
        } else if line.trim().is_empty() {
            if let Some(done) = current.take() {
                items.push(done);
            }
        } else if let Some(cur) = current.as_mut() {
            cur.push(' ');
            cur.push_str(line.trim());
        }
    }
    if let Some(done) = current {
        items.push(done);
    }
    let items: Vec<String> = items.iter().map(|s| clean(s)).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        let whole = clean(response);
        return if whole.is_empty() { vec![] } else { vec![whole] };
    }
    items
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LintWarning {
    pub index: usize,
    pub reason: String,
}

/// Flags principles with fewer than 4 words or no lexicon word. A word
/// matches when it starts with a lexicon entry ("uses", "reducing").
pub fn lint_actionability(principles: &[String], lexicon: &[&str]) -> Vec<LintWarning> {
    let mut out = Vec::new();
    for (i, p) in principles.iter().enumerate() {
        let words: Vec<String> = p
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        if words.len() < 4 {
            out.push(LintWarning {
                index: i,
                reason: format!("only {} words", words.len()),
            });
        }
        if !words.iter().any(|w| lexicon.iter().any(|k| w.starts_with(k))) {
            out.push(LintWarning {
                index: i,
                reason: "no imperative or comparative keyword".into(),
            });
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub k: usize,
    pub seed: u64,
    pub style: PromptStyle,
    pub clock: Clock,
}

/// Everything an extraction produced, for the caller to persist.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub set: PrincipleSet,
    pub generation: GenerationRecord,
    pub audit: AuditEntry,
    pub lint: Vec<LintWarning>,
}

/// Samples K pairs and runs one extraction round trip on `local`.
///
/// On a flagged audit under a Block policy the set is returned inside
/// [`PrinciplesError::LeakageDetected`] and must not be used.
pub fn extract_principles(
    local: &ModelClient,
    pairs: &[ContrastivePair],
    lookup: &dyn Fn(&ModuleId) -> Option<VerilogModule>,
    attribute: Attribute,
    guard: &LeakageGuard,
    options: &ExtractOptions,
) -> Result<Extraction, PrinciplesError> {
    if local.role() != EndpointRole::Local {
        return Err(PrinciplesError::NotLocal(local.identity()));
    }
    let chosen = sample_pairs(pairs, attribute, options.k, options.seed)?;
    let prompt = render_p1(&chosen, lookup, options.style)?;
    let context = format!("p1:{attribute}:k{}:s{}", options.k, options.seed);
    let generation = local.generate(&prompt, None, &context)?;
    let principles = parse_principles(&generation.response);
    if principles.is_empty() {
        return Err(PrinciplesError::EmptyResponse);
    }

    let joined = join_principles(&principles);
    let verdict = guard.audit(&joined, &context);
    let audit = AuditEntry::new(&verdict, &joined, &context, options.clock.timestamp());
    let source_pair_ids: Vec<String> = chosen.iter().map(ContrastivePair::id).collect();
    let id = format!(
        "ps-{}",
        short_hash(format!("{attribute}\u{1f}{}\u{1f}{}\u{1f}{joined}", options.seed, source_pair_ids.join(",")).as_bytes())
    );
    let set = PrincipleSet {
        id,
        attribute,
        k: options.k,
        seed: options.seed,
        principles,
        source_pair_ids,
        model: local.identity(),
        audit_verdict_id: verdict.id.clone(),
        raw_response: generation.response.clone(),
    };
    let lint = lint_actionability(&set.principles, DEFAULT_LEXICON);
    let extraction = Extraction {
        set,
        generation,
        audit,
        lint,
    };
    if !verdict.is_clear() {
        if guard.policy().action == GuardAction::Block {
            return Err(PrinciplesError::LeakageDetected {
                quarantined: Box::new(extraction),
            });
        }
        log::warn!("principle set {} flagged; kept under Warn policy", extraction.set.id);
    }
    for w in &extraction.lint {
        log::warn!("principle {} of {}: {}", w.index + 1, extraction.set.id, w.reason);
    }
    Ok(extraction)
}
