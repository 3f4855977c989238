// SPDX-License-Identifier: Apache-2.0

//! Contrastive pair mining.
//!
//! Draft and proprietary modules are indexed together with TF-IDF. Within
//! each `(category, bit_width)` group, candidate links with similarity at
//! or above the threshold are matched greedily one-to-one in descending
//! similarity order. Every matched link then yields one pair per attribute
//! on which the proprietary side is strictly better.

mod tfidf;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use tfidf::TfidfIndex;

use crate::corpus::{Codebase, ModuleId, VerilogModule};
use crate::lexer::{tokenize, TokenizerOptions};
use crate::parallel;
use crate::synthesis::{
    validate_and_measure, Attribute, PpaMetrics, SynthesisBackend, SynthesisConstraints,
};

#[derive(Debug, Error)]
pub enum PairingError {
    #[error("need at least 2 modules to build an index, got {0}")]
    InsufficientCorpus(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastivePair {
    pub proprietary_id: ModuleId,
    pub draft_id: ModuleId,
    pub similarity: f64,
    pub attribute: Attribute,
    pub metrics_p: PpaMetrics,
    pub metrics_d: PpaMetrics,
    /// `(metric_d - metric_p) / metric_d`.
    pub margin: f64,
}

impl ContrastivePair {
    pub fn id(&self) -> String {
        format!("{}~{}", self.proprietary_id, self.draft_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MineOptions {
    pub threshold: f64,
    pub attributes: Vec<Attribute>,
    /// When the draft side wins an attribute, emit the pair with roles
    /// swapped instead of dropping it.
    pub orient_by_winner: bool,
    pub constraints: SynthesisConstraints,
    pub bucket_literals: bool,
}

impl Default for MineOptions {
    fn default() -> Self {
        MineOptions {
            threshold: 0.7,
            attributes: Attribute::ALL.to_vec(),
            orient_by_winner: false,
            constraints: SynthesisConstraints::default(),
            bucket_literals: true,
        }
    }
}

/// A one-to-one similarity match, before orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub proprietary_id: ModuleId,
    pub draft_id: ModuleId,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub module_id: ModuleId,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MineReport {
    pub pairs: Vec<ContrastivePair>,
    pub matches: Vec<Match>,
    pub excluded: Vec<Exclusion>,
}

/// Similarity rounded to 1e-9 for ordering, so near-ties that differ only
/// by summation noise fall through to the id tie-break.
fn order_key(sim: f64) -> i64 {
    (sim * 1e9).round() as i64
}

/// Measures every module (in parallel up to the backend's limit), then mines.
/// Modules whose validation or measurement fails are excluded and logged.
pub fn mine_pairs(
    proprietary: &Codebase,
    draft: &Codebase,
    backend: &dyn SynthesisBackend,
    options: &MineOptions,
) -> Result<MineReport, PairingError> {
    let all: Vec<&VerilogModule> = proprietary.iter().chain(draft.iter()).collect();
    let workers = parallel::worker_count(backend.capabilities().max_parallelism);
    let results = parallel::map_ordered(&all, workers, |_, m| {
        validate_and_measure(backend, m, &options.constraints)
    });

    let mut metrics = BTreeMap::new();
    let mut excluded = Vec::new();
    for (m, r) in all.iter().zip(results) {
        match r {
            Ok(p) => {
                metrics.insert(m.id.clone(), p);
            }
            Err(e) => {
                log::warn!("excluding {} ({}): {e}", m.id, m.name);
                excluded.push(Exclusion {
                    module_id: m.id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    let mut report = mine_pairs_with_metrics(proprietary, draft, &metrics, options)?;
    report.excluded = excluded;
    Ok(report)
}

/// Pure mining over precomputed metrics. Modules without metrics are not
/// matched but still contribute to the index.
pub fn mine_pairs_with_metrics(
    proprietary: &Codebase,
    draft: &Codebase,
    metrics: &BTreeMap<ModuleId, PpaMetrics>,
    options: &MineOptions,
) -> Result<MineReport, PairingError> {
    let props: Vec<&VerilogModule> = proprietary.iter().collect();
    let drafts: Vec<&VerilogModule> = draft.iter().collect();
    let tok = TokenizerOptions {
        bucket_literals: options.bucket_literals,
    };
    let docs: Vec<Vec<String>> = props
        .iter()
        .chain(drafts.iter())
        .map(|m| tokenize(&m.source, tok))
        .collect();
    let index = TfidfIndex::build(&docs)?;

    struct Candidate {
        key: i64,
        sim: f64,
        d: usize,
        p: usize,
    }
    let mut candidates = Vec::new();
    for (di, d) in drafts.iter().enumerate() {
        if !metrics.contains_key(&d.id) {
            continue;
        }
        for (pi, p) in props.iter().enumerate() {
            if p.group() != d.group() || !metrics.contains_key(&p.id) {
                continue;
            }
            let sim = index.similarity(pi, props.len() + di);
            if sim >= options.threshold {
                candidates.push(Candidate {
                    key: order_key(sim),
                    sim,
                    d: di,
                    p: pi,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.key
            .cmp(&a.key)
            .then_with(|| drafts[a.d].id.cmp(&drafts[b.d].id))
            .then_with(|| props[a.p].id.cmp(&props[b.p].id))
    });

    let mut used_d = BTreeSet::new();
    let mut used_p = BTreeSet::new();
    let mut report = MineReport::default();
    for c in candidates {
        if used_d.contains(&c.d) || used_p.contains(&c.p) {
            continue;
        }
        used_d.insert(c.d);
        used_p.insert(c.p);
        let (p, d) = (props[c.p], drafts[c.d]);
        report.matches.push(Match {
            proprietary_id: p.id.clone(),
            draft_id: d.id.clone(),
            similarity: c.sim,
        });
        let (mp, md) = (&metrics[&p.id], &metrics[&d.id]);
        for &attr in &options.attributes {
            let (vp, vd) = (mp.metric(attr), md.metric(attr));
            if vp < vd {
                report.pairs.push(orient(p, d, mp, md, c.sim, attr));
            } else if vd < vp && options.orient_by_winner {
                report.pairs.push(orient(d, p, md, mp, c.sim, attr));
            }
        }
    }
    Ok(report)
}

fn orient(
    better: &VerilogModule,
    worse: &VerilogModule,
    mb: &PpaMetrics,
    mw: &PpaMetrics,
    similarity: f64,
    attribute: Attribute,
) -> ContrastivePair {
    let (vb, vw) = (mb.metric(attribute), mw.metric(attribute));
    ContrastivePair {
        proprietary_id: better.id.clone(),
        draft_id: worse.id.clone(),
        similarity,
        attribute,
        metrics_p: mb.clone(),
        metrics_d: mw.clone(),
        margin: (vw - vb) / vw,
    }
}

/// Checks a pair against its invariants. `modules` must resolve both ids.
pub fn validate_pair(
    pair: &ContrastivePair,
    modules: &dyn Fn(&ModuleId) -> Option<VerilogModule>,
    threshold: f64,
) -> Result<(), String> {
    if !(0.0..=1.0).contains(&pair.similarity) {
        return Err(format!("similarity {} outside [0, 1]", pair.similarity));
    }
    if pair.similarity < threshold {
        return Err(format!("similarity {} below threshold {threshold}", pair.similarity));
    }
    let p = modules(&pair.proprietary_id).ok_or(format!("unknown module {}", pair.proprietary_id))?;
    let d = modules(&pair.draft_id).ok_or(format!("unknown module {}", pair.draft_id))?;
    if p.group() != d.group() {
        return Err(format!("group mismatch: {:?} vs {:?}", p.group(), d.group()));
    }
    let (vp, vd) = (pair.metrics_p.metric(pair.attribute), pair.metrics_d.metric(pair.attribute));
    if vp >= vd {
        return Err(format!("{}: proprietary {vp} not strictly below draft {vd}", pair.attribute));
    }
    if ((vd - vp) / vd - pair.margin).abs() > 1e-12 {
        return Err(format!("margin {} inconsistent with metrics", pair.margin));
    }
    Ok(())
}

/// Seeded sample of up to `n` pairs for manual review, in store order.
pub fn sample_for_inspection(pairs: &[ContrastivePair], n: usize, seed: u64) -> Vec<&ContrastivePair> {
    let n = n.min(pairs.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, pairs.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| &pairs[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Classifier, CodebaseKind};
    use crate::synthesis::MockBackend;
    use proptest::prelude::*;
    use std::collections::HashMap;

    const SHIFTER_A: &str = include_str!("../../fixtures/barrel_shifter_multistage.v");
    const SHIFTER_B: &str = include_str!("../../fixtures/barrel_shifter_direct.v");

    fn codebase(kind: CodebaseKind, sources: &[&str]) -> Codebase {
        let mut cb = Codebase::new(kind, "mem");
        for s in sources {
            cb.insert(VerilogModule::parse(s, "", kind, &Classifier::default()).unwrap());
        }
        cb
    }

    fn metrics(power: f64, delay: f64) -> PpaMetrics {
        PpaMetrics::new(1.0, power, delay, "t", SynthesisConstraints::default()).unwrap()
    }

    #[test]
    fn barrel_shifter_power_pair() {
        let p = codebase(CodebaseKind::Proprietary, &[SHIFTER_A]);
        let d = codebase(CodebaseKind::Draft, &[SHIFTER_B]);
        let opts = MineOptions {
            threshold: 0.0,
            ..Default::default()
        };
        let r = mine_pairs(&p, &d, &MockBackend::new(), &opts).unwrap();
        assert_eq!(r.matches.len(), 1);
        let power = r.pairs.iter().find(|x| x.attribute == Attribute::Power).unwrap();
        assert!((power.margin * 100.0 - 20.46).abs() < 0.005, "{}", power.margin);
        // 350 ps < 390 ps, so a delay pair too.
        assert_eq!(r.pairs.len(), 2);
    }

    fn one_to_one() -> (Codebase, Codebase, BTreeMap<ModuleId, PpaMetrics>) {
        let p = codebase(
            CodebaseKind::Proprietary,
            &["module add8(input [7:0] a, b, output [7:0] s); assign s = a + b; endmodule"],
        );
        let d = codebase(
            CodebaseKind::Draft,
            &["module add8(input [7:0] a, b, output [7:0] s); assign s = (a ^ b) + ((a & b) << 1); endmodule"],
        );
        let mut m = BTreeMap::new();
        for x in p.iter() {
            m.insert(x.id.clone(), metrics(5.0, 100.0));
        }
        for x in d.iter() {
            m.insert(x.id.clone(), metrics(5.0, 200.0));
        }
        (p, d, m)
    }

    #[test]
    fn equal_power_yields_no_power_pair() {
        let (p, d, m) = one_to_one();
        let r = mine_pairs_with_metrics(&p, &d, &m, &MineOptions { threshold: 0.0, ..Default::default() }).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.pairs[0].attribute, Attribute::CriticalPathDelay);
    }

    #[test]
    fn threshold_boundary() {
        let (p, d, m) = one_to_one();
        let sim = mine_pairs_with_metrics(&p, &d, &m, &MineOptions { threshold: 0.0, ..Default::default() })
            .unwrap()
            .matches[0]
            .similarity;
        let at = mine_pairs_with_metrics(&p, &d, &m, &MineOptions { threshold: sim, ..Default::default() }).unwrap();
        assert_eq!(at.matches.len(), 1);
        let above = MineOptions {
            threshold: sim + 1e-6,
            ..Default::default()
        };
        assert!(mine_pairs_with_metrics(&p, &d, &m, &above).unwrap().matches.is_empty());
    }

    #[test]
    fn groups_are_respected() {
        let p = codebase(
            CodebaseKind::Proprietary,
            &["module add8(input [7:0] a, b, output [7:0] s); assign s = a + b; endmodule"],
        );
        let d = codebase(
            CodebaseKind::Draft,
            &["module add16(input [15:0] a, b, output [15:0] s); assign s = a + b; endmodule"],
        );
        let mut m = BTreeMap::new();
        for x in p.iter().chain(d.iter()) {
            m.insert(x.id.clone(), metrics(1.0 + x.name.len() as f64, 100.0));
        }
        let r = mine_pairs_with_metrics(&p, &d, &m, &MineOptions { threshold: 0.0, ..Default::default() }).unwrap();
        assert!(r.matches.is_empty());
    }

    #[test]
    fn orient_by_winner_swaps_roles() {
        let (p, d, mut m) = one_to_one();
        let did = d.iter().next().unwrap().id.clone();
        m.insert(did.clone(), metrics(2.0, 200.0));
        let opts = MineOptions {
            threshold: 0.0,
            orient_by_winner: true,
            ..Default::default()
        };
        let r = mine_pairs_with_metrics(&p, &d, &m, &opts).unwrap();
        let power = r.pairs.iter().find(|x| x.attribute == Attribute::Power).unwrap();
        assert_eq!(power.proprietary_id, did);
    }

    #[test]
    fn backend_failures_are_excluded() {
        let p = codebase(CodebaseKind::Proprietary, &[SHIFTER_A, "module bad(input a); initial $display(a); endmodule"]);
        let d = codebase(CodebaseKind::Draft, &[SHIFTER_B]);
        let r = mine_pairs(&p, &d, &MockBackend::new(), &MineOptions { threshold: 0.0, ..Default::default() }).unwrap();
        assert_eq!(r.excluded.len(), 1);
        assert_eq!(r.matches.len(), 1);
    }

    #[test]
    fn inspection_sample_is_seeded() {
        let (p, d, m) = one_to_one();
        let pairs = mine_pairs_with_metrics(&p, &d, &m, &MineOptions { threshold: 0.0, ..Default::default() })
            .unwrap()
            .pairs;
        assert_eq!(sample_for_inspection(&pairs, 5, 3).len(), 1);
        assert_eq!(sample_for_inspection(&pairs, 5, 3), sample_for_inspection(&pairs, 5, 3));
    }

    // Brute-force reference: dense TF-IDF, repeated global-max selection.
    fn oracle(
        p: &Codebase,
        d: &Codebase,
        m: &BTreeMap<ModuleId, PpaMetrics>,
        tau: f64,
    ) -> Vec<(ModuleId, ModuleId, Attribute)> {
        let props: Vec<&VerilogModule> = p.iter().collect();
        let drafts: Vec<&VerilogModule> = d.iter().collect();
        let docs: Vec<Vec<String>> = props
            .iter()
            .chain(&drafts)
            .map(|x| tokenize(&x.source, TokenizerOptions::SIMILARITY))
            .collect();
        let n = docs.len() as f64;
        let mut df: HashMap<&str, f64> = HashMap::new();
        for doc in &docs {
            let mut seen: Vec<&str> = doc.iter().map(String::as_str).collect();
            seen.sort();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_default() += 1.0;
            }
        }
        let vec_of = |doc: &Vec<String>| {
            let mut v: HashMap<String, f64> = HashMap::new();
            for t in doc {
                *v.entry(t.clone()).or_default() += (n / (1.0 + df[t.as_str()])).ln() + 1.0;
            }
            let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
            v.values_mut().for_each(|x| *x /= norm);
            v
        };
        let vecs: Vec<_> = docs.iter().map(vec_of).collect();
        let cos = |a: usize, b: usize| -> f64 {
            vecs[a].iter().map(|(t, x)| x * vecs[b].get(t).unwrap_or(&0.0)).sum()
        };

        let mut live: Vec<(f64, usize, usize)> = Vec::new();
        for (di, dm) in drafts.iter().enumerate() {
            for (pi, pm) in props.iter().enumerate() {
                let s = cos(pi, props.len() + di);
                if pm.group() == dm.group() && m.contains_key(&pm.id) && m.contains_key(&dm.id) && s >= tau {
                    live.push((s, di, pi));
                }
            }
        }
        let mut out = Vec::new();
        while !live.is_empty() {
            let best = *live
                .iter()
                .min_by_key(|c| (-(c.0 * 1e9).round() as i64, &drafts[c.1].id, &props[c.2].id))
                .unwrap();
            live.retain(|c| c.1 != best.1 && c.2 != best.2);
            let (pm, dm) = (props[best.2], drafts[best.1]);
            for attr in Attribute::ALL {
                if m[&pm.id].metric(attr) < m[&dm.id].metric(attr) {
                    out.push((pm.id.clone(), dm.id.clone(), attr));
                }
            }
        }
        out.sort();
        out
    }

    fn synthetic(seed: u64, n: usize) -> (Codebase, Codebase, BTreeMap<ModuleId, PpaMetrics>) {
        use rand::{Rng, RngCore};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ops = ["+", "-", "&", "|", "^"];
        let vars = ["a", "b", "c"];
        let mut p = Codebase::new(CodebaseKind::Proprietary, "p");
        let mut d = Codebase::new(CodebaseKind::Draft, "d");
        let mut m = BTreeMap::new();
        for i in 0..n {
            let name = ["adder", "counter"][rng.random_range(0..2)];
            let w = [4, 8][rng.random_range(0..2)];
            let mut expr = vars[rng.random_range(0..3)].to_string();
            for _ in 0..rng.random_range(0..5) {
                expr = format!("{expr} {} {}", ops[rng.random_range(0..5)], vars[rng.random_range(0..3)]);
            }
            let src = format!(
                "module {name}_{i}(input [{}:0] a, b, c, output [{}:0] y); assign y = {expr}; endmodule",
                w - 1,
                w - 1
            );
            let kind = if rng.next_u32() % 2 == 0 { CodebaseKind::Proprietary } else { CodebaseKind::Draft };
            let module = VerilogModule::parse(&src, "", kind, &Classifier::default()).unwrap();
            m.insert(
                module.id.clone(),
                metrics(f64::from(rng.random_range(1..4u32)), f64::from(rng.random_range(1..4u32)) * 100.0),
            );
            if kind == CodebaseKind::Proprietary {
                p.insert(module);
            } else {
                d.insert(module);
            }
        }
        if p.is_empty() || d.is_empty() {
            return synthetic(seed + 1_000_000, n);
        }
        (p, d, m)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn matches_brute_force_oracle(seed in 0u64..10_000, n in 2usize..30) {
            let (p, d, m) = synthetic(seed, n);
            let r = mine_pairs_with_metrics(&p, &d, &m, &MineOptions::default()).unwrap();
            let mut got: Vec<_> = r.pairs.iter().map(|x| (x.proprietary_id.clone(), x.draft_id.clone(), x.attribute)).collect();
            got.sort();
            prop_assert_eq!(got, oracle(&p, &d, &m, 0.7));
        }

        #[test]
        fn threshold_monotone(seed in 0u64..10_000, t1 in 0.3f64..0.9, dt in 0.0f64..0.3) {
            let (p, d, m) = synthetic(seed, 20);
            let lo = mine_pairs_with_metrics(&p, &d, &m, &MineOptions { threshold: t1, ..Default::default() }).unwrap();
            let hi = mine_pairs_with_metrics(&p, &d, &m, &MineOptions { threshold: t1 + dt, ..Default::default() }).unwrap();
            for pair in &hi.pairs {
                prop_assert!(lo.pairs.contains(pair));
            }
        }

        #[test]
        fn every_pair_validates(seed in 0u64..10_000) {
            let (p, d, m) = synthetic(seed, 25);
            let r = mine_pairs_with_metrics(&p, &d, &m, &MineOptions::default()).unwrap();
            let lookup = |id: &ModuleId| p.get(id).or_else(|| d.get(id)).cloned();
            for pair in &r.pairs {
                prop_assert_eq!(validate_pair(pair, &lookup, 0.7), Ok(()));
            }
        }
    }
}
