// SPDX-License-Identifier: Apache-2.0

//! Audit of cloud-bound payloads against the proprietary corpus.
//!
//! Two checks run on every payload, both over the shared tokenizer with
//! literal bucketing off:
//!
//! * **n-gram match**: any window of `ngram_size` consecutive tokens that
//!   also occurs in a proprietary module. Windows are fingerprinted with
//!   FNV-1a and every hash hit is confirmed against the stored tokens.
//! * **rare identifier**: identifiers that occur in exactly one proprietary
//!   module. A module is flagged when the fraction of its rare identifiers
//!   present in the payload exceeds `identifier_overlap_threshold`.
//!
//! Text that also occurs in registered public code (drafts, targets) is
//! not proprietary and is exempt from both checks.
//!
//! A [`Clearance`] can only be minted here, from a verdict that permits
//! sending. The model client refuses cloud calls without one.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Codebase, ModuleId};
use crate::hashing::{fnv1a_tokens, sha256_hex, short_hash};
use crate::lexer::{lex, TokenKind};

#[derive(Debug, Error, PartialEq)]
pub enum GuardError {
    #[error("proprietary codebase is empty")]
    EmptyCorpus,
    #[error("invalid leakage policy: {0}")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardAction {
    Block,
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LeakagePolicy {
    pub ngram_size: usize,
    pub min_hits_to_flag: usize,
    pub identifier_overlap_threshold: f64,
    /// Shorter identifiers are never treated as rare, so that prose words
    /// such as "a" or "of" cannot trip the identifier check.
    pub min_rare_identifier_len: usize,
    pub action: GuardAction,
}

impl Default for LeakagePolicy {
    fn default() -> Self {
        LeakagePolicy {
            ngram_size: 8,
            min_hits_to_flag: 1,
            identifier_overlap_threshold: 0.0,
            min_rare_identifier_len: 3,
            action: GuardAction::Block,
        }
    }
}

impl LeakagePolicy {
    pub fn validate(&self) -> Result<(), GuardError> {
        if self.ngram_size < 4 {
            return Err(GuardError::InvalidPolicy(format!(
                "ngram_size must be at least 4, got {}",
                self.ngram_size
            )));
        }
        if self.min_hits_to_flag == 0 {
            return Err(GuardError::InvalidPolicy("min_hits_to_flag must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.identifier_overlap_threshold) {
            return Err(GuardError::InvalidPolicy(format!(
                "identifier_overlap_threshold must be in [0, 1], got {}",
                self.identifier_overlap_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    NgramMatch,
    RareIdentifier,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub module_id: ModuleId,
    pub kind: FindingKind,
    /// Matched payload text.
    pub span: String,
    /// Payload token range `[token_start, token_end)`.
    pub token_start: usize,
    pub token_end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Clear,
    Flagged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditVerdict {
    pub id: String,
    pub payload_hash: String,
    pub verdict: Verdict,
    pub findings: Vec<Finding>,
}

impl AuditVerdict {
    pub fn is_clear(&self) -> bool {
        self.verdict == Verdict::Clear
    }
}

/// Proof that a payload passed the guard. Only this module can build one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clearance {
    verdict_id: String,
    payload_hash: String,
}

impl Clearance {
    pub fn verdict_id(&self) -> &str {
        &self.verdict_id
    }

    /// True when `payload` is exactly what was audited.
    pub fn covers(&self, payload: &str) -> bool {
        payload_hash(payload) == self.payload_hash
    }
}

/// One audit-log line. The payload is kept so the verdict can be replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub verdict_id: String,
    pub timestamp: String,
    pub context: String,
    pub payload_hash: String,
    pub verdict: Verdict,
    pub findings: Vec<Finding>,
    pub payload: String,
}

impl AuditEntry {
    pub fn new(verdict: &AuditVerdict, payload: &str, context: &str, timestamp: String) -> Self {
        AuditEntry {
            verdict_id: verdict.id.clone(),
            timestamp,
            context: context.to_string(),
            payload_hash: verdict.payload_hash.clone(),
            verdict: verdict.verdict,
            findings: verdict.findings.clone(),
            payload: payload.to_string(),
        }
    }
}

pub fn payload_hash(payload: &str) -> String {
    sha256_hex(payload.as_bytes())
}

/// Token windows of one fixed length, hashed for lookup.
#[derive(Debug, Default)]
struct NgramTable {
    docs: Vec<Vec<String>>,
    table: HashMap<u64, Vec<(u32, u32)>>,
    windows: usize,
}

impl NgramTable {
    fn add(&mut self, tokens: Vec<String>, n: usize) {
        let doc = self.docs.len() as u32;
        if tokens.len() >= n {
            for (off, w) in tokens.windows(n).enumerate() {
                self.table.entry(fnv1a_tokens(w)).or_default().push((doc, off as u32));
                self.windows += 1;
            }
        }
        self.docs.push(tokens);
    }

    /// Documents that contain `window` verbatim.
    fn docs_containing<'a>(&'a self, window: &'a [&str]) -> impl Iterator<Item = u32> + 'a {
        self.table
            .get(&fnv1a_tokens(window))
            .into_iter()
            .flatten()
            .filter(move |(d, off)| {
                let stored = &self.docs[*d as usize][*off as usize..*off as usize + window.len()];
                stored.iter().zip(window).all(|(a, b)| a == b)
            })
            .map(|(d, _)| *d)
    }
}

pub struct LeakageGuard {
    policy: LeakagePolicy,
    module_ids: Vec<ModuleId>,
    proprietary: NgramTable,
    public: NgramTable,
    public_idents: HashSet<String>,
    /// Rare identifier → owning module index.
    rare: HashMap<String, u32>,
    rare_per_module: Vec<usize>,
}

fn identifiers(source: &str) -> impl Iterator<Item = &str> {
    lex(source)
        .into_iter()
        .filter(|t| t.kind == TokenKind::Ident)
        .map(|t| t.text)
}

impl LeakageGuard {
    pub fn build(proprietary: &Codebase, policy: LeakagePolicy) -> Result<Self, GuardError> {
        policy.validate()?;
        if proprietary.is_empty() {
            return Err(GuardError::EmptyCorpus);
        }
        let mut table = NgramTable::default();
        let mut module_ids = Vec::new();
        let mut owners: HashMap<String, BTreeSet<u32>> = HashMap::new();
        for (i, m) in proprietary.iter().enumerate() {
            module_ids.push(m.id.clone());
            table.add(guard_tokens(&m.source), policy.ngram_size);
            for id in identifiers(&m.source) {
                owners.entry(id.to_string()).or_default().insert(i as u32);
            }
        }
        let mut guard = LeakageGuard {
            policy,
            module_ids,
            proprietary: table,
            public: NgramTable::default(),
            public_idents: HashSet::new(),
            rare: HashMap::new(),
            rare_per_module: Vec::new(),
        };
        guard.rare = owners
            .into_iter()
            .filter(|(id, o)| o.len() == 1 && id.chars().count() >= guard.policy.min_rare_identifier_len)
            .map(|(id, o)| (id, *o.iter().next().unwrap()))
            .collect();
        guard.recount_rare();
        Ok(guard)
    }

    /// Registers public code. Its n-grams and identifiers become exempt.
    pub fn with_public<'a>(mut self, sources: impl IntoIterator<Item = &'a str>) -> Self {
        for s in sources {
            self.public.add(guard_tokens(s), self.policy.ngram_size);
            self.public_idents.extend(identifiers(s).map(str::to_string));
        }
        let public = &self.public_idents;
        self.rare.retain(|id, _| !public.contains(id));
        self.recount_rare();
        self
    }

    fn recount_rare(&mut self) {
        self.rare_per_module = vec![0; self.module_ids.len()];
        for &m in self.rare.values() {
            self.rare_per_module[m as usize] += 1;
        }
    }

    pub fn policy(&self) -> &LeakagePolicy {
        &self.policy
    }

    /// Number of proprietary token windows (one per module position).
    pub fn fingerprint_count(&self) -> usize {
        self.proprietary.windows
    }

    pub fn rare_identifiers(&self) -> BTreeMap<&str, &ModuleId> {
        self.rare
            .iter()
            .map(|(id, &m)| (id.as_str(), &self.module_ids[m as usize]))
            .collect()
    }

    /// Audits `payload`. Never fails; blocking is the caller's decision.
    /// `context` names the call site and makes the verdict id unique.
    pub fn audit(&self, payload: &str, context: &str) -> AuditVerdict {
        let toks = lex(payload);
        let texts: Vec<&str> = toks.iter().map(|t| t.text).collect();
        let n = self.policy.ngram_size;
        let span_of = |a: usize, b: usize| payload[toks[a].start..toks[b - 1].end].to_string();

        // module index → matched window starts
        let mut hits: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        let mut total = 0usize;
        if texts.len() >= n {
            for (i, w) in texts.windows(n).enumerate() {
                if self.public.docs_containing(w).next().is_some() {
                    continue;
                }
                let mut docs: Vec<u32> = self.proprietary.docs_containing(w).collect();
                docs.dedup();
                if !docs.is_empty() {
                    total += 1;
                }
                for d in docs {
                    let v = hits.entry(d).or_default();
                    if v.last() != Some(&i) {
                        v.push(i);
                    }
                }
            }
        }

        let mut findings = Vec::new();
        if total >= self.policy.min_hits_to_flag {
            for (d, starts) in &hits {
                // Merge overlapping windows into maximal runs.
                let mut run: Option<(usize, usize)> = None;
                for &s in starts {
                    run = match run {
                        Some((a, b)) if s <= b => Some((a, s + n)),
                        Some((a, b)) => {
                            findings.push(self.finding(*d, FindingKind::NgramMatch, span_of(a, b), a, b));
                            Some((s, s + n))
                        }
                        None => Some((s, s + n)),
                    };
                }
                if let Some((a, b)) = run {
                    findings.push(self.finding(*d, FindingKind::NgramMatch, span_of(a, b), a, b));
                }
            }
        }

        let mut seen: BTreeMap<u32, Vec<(usize, &str)>> = BTreeMap::new();
        let mut distinct = HashSet::new();
        for (i, t) in toks.iter().enumerate() {
            if t.kind != TokenKind::Ident || !distinct.insert(t.text) {
                continue;
            }
            if let Some(&m) = self.rare.get(t.text) {
                seen.entry(m).or_default().push((i, t.text));
            }
        }
        for (m, ids) in seen {
            let fraction = ids.len() as f64 / self.rare_per_module[m as usize] as f64;
            if fraction > self.policy.identifier_overlap_threshold {
                for (i, text) in ids {
                    findings.push(self.finding(m, FindingKind::RareIdentifier, text.to_string(), i, i + 1));
                }
            }
        }

        findings.sort_by(|a, b| {
            (a.token_start, a.kind, &a.module_id, a.token_end).cmp(&(b.token_start, b.kind, &b.module_id, b.token_end))
        });
        let payload_hash = payload_hash(payload);
        AuditVerdict {
            id: format!("av-{}", short_hash(format!("{context}\u{1f}{payload_hash}").as_bytes())),
            verdict: if findings.is_empty() { Verdict::Clear } else { Verdict::Flagged },
            payload_hash,
            findings,
        }
    }

    fn finding(&self, module: u32, kind: FindingKind, span: String, a: usize, b: usize) -> Finding {
        Finding {
            module_id: self.module_ids[module as usize].clone(),
            kind,
            span,
            token_start: a,
            token_end: b,
        }
    }

    /// Mints a clearance when the policy allows sending the audited
    /// payload: always for Clear, and for Flagged only under `Warn`.
    pub fn clearance(&self, verdict: &AuditVerdict) -> Option<Clearance> {
        match (verdict.verdict, self.policy.action) {
            (Verdict::Clear, _) => {}
            (Verdict::Flagged, GuardAction::Warn) => {
                log::warn!(
                    "sending flagged payload {} under Warn policy ({} findings)",
                    verdict.id,
                    verdict.findings.len()
                );
            }
            (Verdict::Flagged, GuardAction::Block) => return None,
        }
        Some(Clearance {
            verdict_id: verdict.id.clone(),
            payload_hash: verdict.payload_hash.clone(),
        })
    }

    /// Re-audits a logged payload; true when the verdict is reproduced.
    pub fn replay(&self, entry: &AuditEntry) -> bool {
        let v = self.audit(&entry.payload, &entry.context);
        v.id == entry.verdict_id && v.verdict == entry.verdict && v.findings == entry.findings
    }
}

/// Payload tokens in guard mode: no literal bucketing.
pub fn guard_tokens(source: &str) -> Vec<String> {
    crate::lexer::tokenize(source, crate::lexer::TokenizerOptions::GUARD)
}
