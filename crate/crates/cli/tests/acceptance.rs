// SPDX-License-Identifier: Apache-2.0

//! Acceptance gate. Prints one PASS/FAIL line per criterion, then fails if
//! any criterion failed. Run with `--nocapture` to see the lines on success.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use rtlsafe_core::clock::Clock;
use rtlsafe_core::corpus::{Classifier, Codebase, CodebaseKind, ModuleId, VerilogModule};
use rtlsafe_core::evaluation::{summarize, sweep_k, Experiment, RunLabel};
use rtlsafe_core::leakage_guard::{guard_tokens, payload_hash, AuditEntry, LeakageGuard, LeakagePolicy, Verdict};
use rtlsafe_core::lexer::{tokenize, TokenizerOptions};
use rtlsafe_core::model_client::{EndpointConfig, EndpointRole, GenerationRecord, ModelClient, ScriptedTransport};
use rtlsafe_core::optimizer::{render_p2, OptimizationRecord, OptimizationVerdict, Optimizer, OptimizerOptions};
use rtlsafe_core::pairing::{mine_pairs, ContrastivePair, MineOptions};
use rtlsafe_core::principles::{render_p1, PrincipleSet, PromptStyle};
use rtlsafe_core::synthesis::{compare, Attribute, MockBackend, PpaMetrics, SynthesisBackend, SynthesisConstraints};

use common::{fixtures, read_tree, rtlsafe, run_pipeline};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(started: Instant, budget: Duration) -> Result<(), String> {
    let took = started.elapsed();
    ensure(took < budget, || format!("took {took:?}, budget {budget:?}"))
}

fn module(src: &str, instruction: &str, kind: CodebaseKind) -> VerilogModule {
    VerilogModule::parse(src, instruction, kind, &Classifier::default()).expect("module parses")
}

fn metrics(area: f64, power: f64, delay: f64) -> PpaMetrics {
    PpaMetrics::new(area, power, delay, "table", SynthesisConstraints::default()).unwrap()
}

// ---------------------------------------------------------------- 1

fn record(name: &str, attribute: Attribute, before: f64, after: f64) -> OptimizationRecord {
    let m = |v: f64| match attribute {
        Attribute::Power => metrics(1.0, v, 100.0),
        Attribute::CriticalPathDelay => metrics(1.0, 1.0, v),
    };
    let (b, a) = (m(before), m(after));
    let c = compare(&b, &a, attribute).unwrap();
    let src = format!("module {name}(input a, output y); assign y = a; endmodule");
    let t = module(&src, "", CodebaseKind::Target);
    OptimizationRecord {
        target_id: t.id.clone(),
        target_name: name.into(),
        category: t.category.clone(),
        attribute,
        principle_set_id: "ps-table".into(),
        cloud_model: "table".into(),
        prompt_hash: String::new(),
        response: String::new(),
        extracted_module: None,
        target_source: src,
        before: b,
        after: Some(a),
        verdict: c.outcome.into(),
        relative_delta: Some(c.relative_delta),
        attempts: 1,
        first_attempt_verdict: c.outcome.into(),
        audit_verdict_ids: Vec::new(),
        diagnostics: Vec::new(),
    }
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    // (case, attribute, before, after, improvement %). Delay in ps.
    let rows = [
        ("adder_4bit_carry", Attribute::CriticalPathDelay, 320.0, 310.0, 3.12),
        ("barrel_shifter", Attribute::CriticalPathDelay, 290.0, 270.0, 6.90),
        ("calculator", Attribute::CriticalPathDelay, 2760.0, 2130.0, 22.83),
        ("division_module", Attribute::Power, 22.53, 21.15, 6.13),
        ("schmitt_trigger", Attribute::Power, 1.66, 0.89, 46.39),
        ("display_transmitter", Attribute::Power, 70.49, 12.85, 81.77),
    ];
    let mut by_attr: BTreeMap<Attribute, Vec<OptimizationRecord>> = BTreeMap::new();
    for (name, attr, before, after, want) in rows {
        let r = record(name, attr, before, after);
        ensure(r.verdict == OptimizationVerdict::Improved, || format!("{name} not improved"))?;
        let got = 100.0 * r.relative_delta.unwrap();
        ensure((got - want).abs() < 0.01, || format!("{name}: {got:.4}% vs {want}%"))?;
        let single = summarize(std::slice::from_ref(&r), RunLabel::default()).map_err(|e| e.to_string())?;
        let s_got = single.mean_relative_improvement.unwrap();
        ensure((s_got - want).abs() < 0.01 && single.success_rate == 100.0, || {
            format!("{name}: summary {s_got:.4}% SR {}", single.success_rate)
        })?;
        by_attr.entry(attr).or_default().push(r);
    }
    let delay = summarize(&by_attr[&Attribute::CriticalPathDelay], RunLabel::default()).map_err(|e| e.to_string())?;
    let mean = delay.mean_relative_improvement.unwrap();
    let want = (3.12 + 6.90 + 22.83) / 3.0;
    ensure((mean - want).abs() < 0.01, || format!("delay mean {mean:.4}% vs {want:.4}%"))?;
    within(started, Duration::from_secs(1))?;
    Ok(format!("6/6 improvements within 0.01 pp, delay mean {mean:.2}%"))
}

// ---------------------------------------------------------------- 2

fn synthetic_corpus(rng: &mut ChaCha8Rng, n: usize) -> (Codebase, Codebase) {
    let names = ["adder", "counter", "mux", "comparator"];
    let ops = ["+", "-", "&", "|", "^"];
    let vars = ["a", "b", "c"];
    let mut p = Codebase::new(CodebaseKind::Proprietary, "p");
    let mut d = Codebase::new(CodebaseKind::Draft, "d");
    for i in 0..n {
        let name = names[rng.random_range(0..names.len())];
        let w = [4u32, 8][rng.random_range(0..2)];
        let mut expr = vars[rng.random_range(0..3)].to_string();
        for _ in 0..rng.random_range(0..6) {
            expr = format!("{expr} {} {}", ops[rng.random_range(0..5)], vars[rng.random_range(0..3)]);
        }
        let body = if rng.random_bool(0.3) {
            format!("always @(*) begin y = {expr}; end")
        } else {
            format!("assign y = ({expr});")
        };
        let out = if body.starts_with("always") { "output reg" } else { "output" };
        let src = format!("module {name}_{i}(input [{hi}:0] a, b, c, {out} [{hi}:0] y); {body} endmodule", hi = w - 1);
        let (cb, kind) = if rng.random_bool(0.5) {
            (&mut p, CodebaseKind::Proprietary)
        } else {
            (&mut d, CodebaseKind::Draft)
        };
        cb.insert(module(&src, "", kind));
    }
    (p, d)
}

// Dense TF-IDF recomputed from scratch; greedy selection by repeatedly
// taking the global maximum among still-free modules.
fn pairing_oracle(p: &Codebase, d: &Codebase, backend: &dyn SynthesisBackend, tau: f64) -> Vec<(ModuleId, ModuleId, Attribute)> {
    let props: Vec<&VerilogModule> = p.iter().collect();
    let drafts: Vec<&VerilogModule> = d.iter().collect();
    let docs: Vec<Vec<String>> = props
        .iter()
        .chain(&drafts)
        .map(|m| tokenize(&m.source, TokenizerOptions::SIMILARITY))
        .collect();
    let n = docs.len() as f64;
    let mut df: HashMap<&str, f64> = HashMap::new();
    for doc in &docs {
        let mut uniq: Vec<&str> = doc.iter().map(String::as_str).collect();
        uniq.sort();
        uniq.dedup();
        for t in uniq {
            *df.entry(t).or_default() += 1.0;
        }
    }
    let vecs: Vec<HashMap<&str, f64>> = docs
        .iter()
        .map(|doc| {
            let mut v: HashMap<&str, f64> = HashMap::new();
            for t in doc {
                *v.entry(t.as_str()).or_default() += (n / (1.0 + df[t.as_str()])).ln() + 1.0;
            }
            let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
            v.values_mut().for_each(|x| *x /= norm);
            v
        })
        .collect();
    let cos = |a: usize, b: usize| -> f64 { vecs[a].iter().map(|(t, x)| x * vecs[b].get(t).unwrap_or(&0.0)).sum() };
    let c = SynthesisConstraints::default();
    let m: BTreeMap<&ModuleId, PpaMetrics> = props
        .iter()
        .chain(&drafts)
        .map(|x| (&x.id, backend.measure(x, &c).unwrap()))
        .collect();

    let mut live = Vec::new();
    for (di, dm) in drafts.iter().enumerate() {
        for (pi, pm) in props.iter().enumerate() {
            let s = cos(pi, props.len() + di);
            if pm.category == dm.category && pm.bit_width == dm.bit_width && s >= tau {
                live.push((s, di, pi));
            }
        }
    }
    let mut out = Vec::new();
    while let Some(&best) = live
        .iter()
        .min_by_key(|c| (-(c.0 * 1e9).round() as i64, &drafts[c.1].id, &props[c.2].id))
    {
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

fn criterion_2() -> Outcome {
    let started = Instant::now();
    let backend = MockBackend::heuristic_only();
    let mut total_pairs = 0;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let n = rng.random_range(2..=50);
        let (p, d) = synthetic_corpus(&mut rng, n);
        if p.is_empty() || d.is_empty() {
            continue;
        }
        let r = mine_pairs(&p, &d, &backend, &MineOptions::default()).map_err(|e| e.to_string())?;
        let mut got: Vec<_> = r.pairs.iter().map(|x| (x.proprietary_id.clone(), x.draft_id.clone(), x.attribute)).collect();
        got.sort();
        let want = pairing_oracle(&p, &d, &backend, 0.7);
        ensure(got == want, || format!("trial {trial}: {} pairs vs oracle {}", got.len(), want.len()))?;
        total_pairs += got.len();
    }
    ensure(total_pairs > 100, || format!("only {total_pairs} pairs over all trials; fixture too sparse"))?;
    within(started, Duration::from_secs(30))?;
    Ok(format!("100/100 trials identical to brute force ({total_pairs} oriented pairs)"))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let started = Instant::now();
    let dir = fixtures().join("proprietary");
    let ing = rtlsafe_core::corpus::ingest(&dir, CodebaseKind::Proprietary, &Classifier::default()).map_err(|e| e.to_string())?;
    let policy = LeakagePolicy::default();
    let n = policy.ngram_size;
    let guard = LeakageGuard::build(&ing.codebase, policy).map_err(|e| e.to_string())?;
    let rare: Vec<String> = guard.rare_identifiers().keys().map(|s| s.to_string()).collect();
    let docs: Vec<Vec<String>> = ing.codebase.iter().map(|m| guard_tokens(&m.source)).collect();
    let oracle = |payload: &[String]| {
        payload.len() >= n && payload.windows(n).any(|w| docs.iter().any(|d| d.len() >= n && d.windows(n).any(|v| v == w)))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut long_runs, mut long_flagged, mut short_clean, mut short_false) = (0, 0, 0, 0);
    for i in 0..1000 {
        let doc = &docs[rng.random_range(0..docs.len())];
        let len = rng.random_range(n - 3..=n + 3).min(doc.len());
        let start = rng.random_range(0..=doc.len() - len);
        let run = &doc[start..start + len];
        let filler = |rng: &mut ChaCha8Rng| -> Vec<String> {
            (0..rng.random_range(0..12)).map(|j| format!("zq{i}x{j}")).collect()
        };
        let mut words = filler(&mut rng);
        words.extend(run.iter().cloned());
        words.extend(filler(&mut rng));
        let payload = words.join(" ");
        let toks = guard_tokens(&payload);
        let has_rare = toks.iter().any(|t| rare.contains(t));
        let flagged = !guard.audit(&payload, "acceptance").is_clear();
        ensure(flagged == (oracle(&toks) || has_rare), || format!("payload {i} disagrees with oracle: {payload}"))?;
        if len >= n {
            long_runs += 1;
            long_flagged += usize::from(flagged);
        } else if !has_rare {
            short_clean += 1;
            short_false += usize::from(flagged);
        }
    }
    ensure(long_flagged == long_runs, || format!("{long_flagged}/{long_runs} long runs flagged"))?;
    ensure(short_false == 0, || format!("{short_false}/{short_clean} short runs flagged"))?;
    ensure(long_runs > 100 && short_clean > 100, || format!("unbalanced sample: {long_runs} long, {short_clean} short"))?;
    within(started, Duration::from_secs(60))?;
    Ok(format!("{long_flagged}/{long_runs} runs >= {n} flagged, 0/{short_clean} shorter runs flagged"))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    // Different absolute output roots and working directories.
    run_pipeline(&a.path().join("out"), a.path())?;
    run_pipeline(&b.path().join("nested/out"), b.path())?;
    let ta = read_tree(&a.path().join("out"));
    let tb = read_tree(&b.path().join("nested/out"));
    ensure(!ta.is_empty(), || "empty output tree".into())?;
    let names: Vec<&String> = ta.keys().collect();
    ensure(ta.keys().eq(tb.keys()), || format!("file sets differ: {names:?} vs {:?}", tb.keys().collect::<Vec<_>>()))?;
    for (k, v) in &ta {
        ensure(tb[k] == *v, || format!("{k} differs between runs"))?;
    }
    // A host-independent digest of the tree, frozen when the contract was set.
    let digest = common::tree_digest(&ta);
    let golden = std::fs::read_to_string(common::golden().join("e2e_tree.sha256")).unwrap_or_default();
    ensure(golden.trim() == digest, || format!("tree digest {digest} does not match the frozen value {:?}", golden.trim()))?;
    Ok(format!("{} files byte-identical across runs, digest {}", ta.len(), &digest[..16]))
}

// ---------------------------------------------------------------- 5

/// Planted successes out of ten targets for each K.
const PLANTED: [(usize, usize); 6] = [(1, 2), (2, 5), (4, 8), (8, 6), (16, 4), (32, 3)];

fn target_src(i: usize, body: &str) -> String {
    format!("module tgt{i}(input [7:0] a, b, output [7:0] y); {body} endmodule")
}

fn criterion_5() -> Outcome {
    let started = Instant::now();
    let backend = MockBackend::new();
    let c = SynthesisConstraints::default();

    let mut lookup_table: BTreeMap<ModuleId, VerilogModule> = BTreeMap::new();
    let mut pairs = Vec::new();
    for i in 0..40 {
        let p = module(
            &format!("module pwr_core_{i}(input [7:0] a, b, output [7:0] y); assign y = a ^ b; endmodule"),
            "xor word",
            CodebaseKind::Proprietary,
        );
        let d = module(
            &format!("module pwr_draft_{i}(input [7:0] a, b, output [7:0] y); assign y = (a | b) & ~(a & b); endmodule"),
            "xor word",
            CodebaseKind::Draft,
        );
        let (mp, md) = (backend.measure(&p, &c).unwrap(), backend.measure(&d, &c).unwrap());
        pairs.push(ContrastivePair {
            proprietary_id: p.id.clone(),
            draft_id: d.id.clone(),
            similarity: 0.8,
            attribute: Attribute::Power,
            margin: (md.power_uw - mp.power_uw) / md.power_uw,
            metrics_p: mp,
            metrics_d: md,
        });
        lookup_table.insert(p.id.clone(), p);
        lookup_table.insert(d.id.clone(), d);
    }
    let mut proprietary = Codebase::new(CodebaseKind::Proprietary, "p");
    let mut target_cb = Codebase::new(CodebaseKind::Target, "t");
    for m in lookup_table.values().filter(|m| m.codebase == CodebaseKind::Proprietary) {
        proprietary.insert(m.clone());
    }
    let mut targets = Vec::new();
    for i in 0..10 {
        let t = module(&target_src(i, "assign y = (a & b) | (a ^ b);"), "", CodebaseKind::Target);
        let m = backend.measure(&t, &c).unwrap();
        target_cb.insert(t.clone());
        targets.push((t, m));
    }

    // Principle quality depends only on how many examples the prompt held.
    let examples = Regex::new(r"(?m)^Example \d+:$").unwrap();
    let local = ModelClient::scripted(
        EndpointConfig { name: "local".into(), role: EndpointRole::Local, model: "planted".into(), ..Default::default() },
        ScriptedTransport::from_fn(move |prompt| {
            let k = examples.find_iter(prompt).count();
            Some(format!("1. Apply tier{k} restructuring to every datapath.\n2. Keep the interface unchanged.\n"))
        }),
    )
    .map_err(|e| e.to_string())?;
    let tier = Regex::new(r"tier(\d+)").unwrap();
    let name = Regex::new(r"module tgt(\d+)").unwrap();
    let cloud = ModelClient::scripted(
        EndpointConfig { name: "cloud".into(), role: EndpointRole::Cloud, model: "planted".into(), ..Default::default() },
        ScriptedTransport::from_fn(move |prompt| {
            let k: usize = tier.captures(prompt)?[1].parse().ok()?;
            let i: usize = name.captures(prompt)?[1].parse().ok()?;
            let wins = PLANTED.iter().find(|(pk, _)| *pk == k)?.1;
            let body = if i < wins { "assign y = a | b;" } else { "assign y = ((a & b) | (a ^ b)) + 8'd1;" };
            Some(format!("```verilog\n{}\n```\n", target_src(i, body)))
        }),
    )
    .map_err(|e| e.to_string())?;

    let strict = LeakageGuard::build(&proprietary, LeakagePolicy::default()).map_err(|e| e.to_string())?;
    let public = LeakageGuard::build(&proprietary, LeakagePolicy::default())
        .map_err(|e| e.to_string())?
        .with_public(target_cb.iter().map(|m| m.source.as_str()));
    let lookup = |id: &ModuleId| lookup_table.get(id).cloned();
    let exp = Experiment {
        local: &local,
        cloud: &cloud,
        backend: &backend,
        principle_guard: &strict,
        prompt_guard: &public,
        pairs: &pairs,
        lookup: &lookup,
        targets: &targets,
        attribute: Attribute::Power,
        style: PromptStyle::Corrected,
        optimizer: OptimizerOptions { clock: Clock::Logical, ..Default::default() },
    };
    let ks: Vec<usize> = PLANTED.iter().map(|(k, _)| *k).collect();
    let seeds = [0u64, 1, 2];
    let table = sweep_k(Attribute::Power, &ks, &seeds, pairs.len(), &RunLabel::default(), |k, seed| {
        exp.run_cell(k, seed).map(|c| c.records())
    })
    .map_err(|e| e.to_string())?;
    ensure(table.cells.len() == ks.len() * seeds.len(), || format!("{} cells", table.cells.len()))?;
    for cell in &table.cells {
        let want = PLANTED.iter().find(|(k, _)| *k == cell.k).unwrap().1 as f64 * 10.0;
        ensure(cell.summary.success_rate == want, || {
            format!("K={} seed={}: SR {} vs planted {want}", cell.k, cell.seed, cell.summary.success_rate)
        })?;
    }
    let series: Vec<(usize, f64)> = table.by_k().iter().map(|s| (s.k, s.mean_sr_pct)).collect();
    let planted: Vec<(usize, f64)> = PLANTED.iter().map(|(k, w)| (*k, *w as f64 * 10.0)).collect();
    ensure(series == planted, || format!("series {series:?} vs planted {planted:?}"))?;
    within(started, Duration::from_secs(120))?;
    let shape: Vec<String> = series.iter().map(|(k, sr)| format!("K{k}={sr:.0}%")).collect();
    Ok(format!("recovered {}", shape.join(" ")))
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let core_fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures");
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
    let ms = module(&read(&core_fixtures.join("barrel_shifter_multistage.v"))?, "A 16-bit barrel shifter", CodebaseKind::Proprietary);
    let di = module(&read(&core_fixtures.join("barrel_shifter_direct.v"))?, "A 16-bit barrel shifter", CodebaseKind::Draft);
    let backend = MockBackend::new();
    let c = SynthesisConstraints::default();
    let (mp, md) = (backend.measure(&ms, &c).unwrap(), backend.measure(&di, &c).unwrap());
    let lookup = |id: &ModuleId| [&ms, &di].into_iter().find(|m| &m.id == id).cloned();
    let golden = common::golden();
    let mut checked = Vec::new();
    for (attr, file) in [(Attribute::Power, "p1_power_verbatim.txt"), (Attribute::CriticalPathDelay, "p1_cpd_verbatim.txt")] {
        let pair = ContrastivePair {
            proprietary_id: ms.id.clone(),
            draft_id: di.id.clone(),
            similarity: 0.9,
            attribute: attr,
            margin: 0.0,
            metrics_p: mp.clone(),
            metrics_d: md.clone(),
        };
        let got = render_p1(&[pair], &lookup, PromptStyle::Verbatim).map_err(|e| e.to_string())?;
        let want = read(&golden.join(file))?;
        ensure(got == want, || format!("{file} differs:\n{}", common::first_difference(&want, &got)))?;
        ensure(got.contains("1. Pattern Recognition:") && got.contains("4. Optimization Strategies:"), || {
            format!("{file} lacks the focus list")
        })?;
        checked.push(file);
    }

    let target = module(&read(&fixtures().join("targets/ripple_adder.v"))?, "", CodebaseKind::Target);
    let set = PrincipleSet {
        id: "ps-golden".into(),
        attribute: Attribute::Power,
        k: 1,
        seed: 0,
        principles: vec![
            "Share one carry chain between sum and carry outputs.".into(),
            "Avoid recomputing propagate terms.".into(),
        ],
        source_pair_ids: vec!["golden".into()],
        model: "golden".into(),
        audit_verdict_id: "golden".into(),
        raw_response: String::new(),
    };
    let got = render_p2(&target, &set, Attribute::Power).map_err(|e| e.to_string())?;
    let want = read(&golden.join("p2_power.txt"))?;
    ensure(got == want, || format!("p2_power.txt differs:\n{}", common::first_difference(&want, &got)))?;
    ensure(got.contains("Do not copy any code from other sources"), || "P2 lacks the no-copy instruction".into())?;
    checked.push("p2_power.txt");

    // The flag reaches the extraction prompt through the CLI.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("out");
    let (prop, draft) = (fixtures().join("proprietary"), fixtures().join("draft"));
    let common = ["--out", out.to_str().unwrap(), "--seed", "7", "--proprietary", prop.to_str().unwrap(), "--draft", draft.to_str().unwrap()];
    let mine: Vec<&str> = ["mine-pairs"].into_iter().chain(common).collect();
    rtlsafe(&mine, dir.path()).ok_or("mine-pairs failed")?;
    let extract: Vec<&str> = ["--verbatim-paper-prompts", "extract-principles", "--attribute", "cpd", "--k", "1"]
        .into_iter()
        .chain(common)
        .collect();
    rtlsafe(&extract, dir.path()).ok_or("extract-principles failed")?;
    let gens: Vec<GenerationRecord> = rtlsafe_core::jsonl::read_all(&out.join("logs/generations.jsonl")).map_err(|e| e.to_string())?;
    let p = &gens.last().ok_or("no generation logged")?.prompt;
    ensure(
        p.contains("LEARNING CONTEXT - Power-Efficient vs Power-Inefficient Examples:") && p.contains("lower critical path delay"),
        || "verbatim flag did not select the published delay prompt".into(),
    )?;
    Ok(format!("{} golden prompts match; CLI flag selects verbatim prompts", checked.len()))
}

// ---------------------------------------------------------------- 7

fn audit_join(out: &Path) -> Result<usize, String> {
    let gens: Vec<GenerationRecord> = rtlsafe_core::jsonl::read_all(&out.join("logs/generations.jsonl")).map_err(|e| e.to_string())?;
    let audits: Vec<AuditEntry> = rtlsafe_core::jsonl::read_all(&out.join("logs/audits.jsonl")).map_err(|e| e.to_string())?;
    let mut n = 0;
    for g in gens.iter().filter(|g| g.role == EndpointRole::Cloud) {
        let id = g.clearance_id.as_deref().ok_or_else(|| format!("{} has no clearance", g.context))?;
        let hits: Vec<&AuditEntry> = audits.iter().filter(|a| a.verdict_id == id).collect();
        ensure(hits.len() == 1, || format!("{} joins {} audit entries", g.context, hits.len()))?;
        ensure(hits[0].verdict == Verdict::Clear, || format!("{} cleared by a flagged audit", g.context))?;
        ensure(hits[0].payload_hash == payload_hash(&g.prompt), || format!("{} prompt differs from the audited payload", g.context))?;
        n += 1;
    }
    Ok(n)
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("out");
    run_pipeline(&out, dir.path())?;
    let joined = audit_join(&out)?;
    ensure(joined > 0, || "pipeline made no cloud calls".into())?;
    let cfg = fixtures().join("run.toml");
    let cfg = cfg.to_str().unwrap();
    let o = out.to_str().unwrap();
    common::rtlsafe_status(&["-c", cfg, "--out", o, "audit"], dir.path())
        .filter(|c| *c == 0)
        .ok_or("rtlsafe audit reported problems")?;

    // Library path: proprietary text smuggled into the principle set.
    let ing = rtlsafe_core::corpus::ingest(&fixtures().join("proprietary"), CodebaseKind::Proprietary, &Classifier::default())
        .map_err(|e| e.to_string())?;
    let secret = ing.codebase.iter().next().unwrap().source.clone();
    let tgt = rtlsafe_core::corpus::ingest(&fixtures().join("targets"), CodebaseKind::Target, &Classifier::default()).map_err(|e| e.to_string())?;
    let guard = LeakageGuard::build(&ing.codebase, LeakagePolicy::default())
        .map_err(|e| e.to_string())?
        .with_public(tgt.codebase.iter().map(|m| m.source.as_str()));
    let transport = Arc::new(ScriptedTransport::from_fn(|_| Some("```verilog\nmodule x; endmodule\n```".into())));
    let cloud = ModelClient::new(
        EndpointConfig { name: "cloud".into(), role: EndpointRole::Cloud, ..Default::default() },
        Box::new(transport.clone()),
        Clock::Logical,
    )
    .map_err(|e| e.to_string())?;
    let backend = MockBackend::new();
    let opt = Optimizer::new(&cloud, &backend, &guard, OptimizerOptions { clock: Clock::Logical, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let set = PrincipleSet {
        id: "ps-injected".into(),
        attribute: Attribute::Power,
        k: 1,
        seed: 0,
        principles: vec!["Use this structure:".into(), secret.clone()],
        source_pair_ids: vec!["x".into()],
        model: "x".into(),
        audit_verdict_id: "x".into(),
        raw_response: String::new(),
    };
    let target = tgt.codebase.iter().next().unwrap();
    let before = backend.measure(target, &SynthesisConstraints::default()).unwrap();
    let run = opt.optimize(target, &before, &set).map_err(|e| e.to_string())?;
    ensure(run.record.verdict == OptimizationVerdict::AuditBlocked, || format!("verdict {}", run.record.verdict))?;
    ensure(transport.calls() == 0 && run.generations.is_empty(), || format!("{} cloud calls", transport.calls()))?;

    // CLI path: a tampered principle file.
    let bad = dir.path().join("tampered.json");
    let mut tampered: PrincipleSet = serde_json::from_str(&std::fs::read_to_string(out.join("principles/power-k2-s7.json")).unwrap()).unwrap();
    tampered.principles.push(secret);
    std::fs::write(&bad, serde_json::to_string(&tampered).unwrap()).unwrap();
    let out2 = dir.path().join("out2");
    let code = common::rtlsafe_status(
        &["-c", cfg, "--out", out2.to_str().unwrap(), "optimize", "--principles", bad.to_str().unwrap()],
        dir.path(),
    );
    ensure(code == Some(1), || format!("tampered optimize exited {code:?}"))?;
    let recs: Vec<OptimizationRecord> = rtlsafe_core::jsonl::read_all(&out2.join("optimizations/power.jsonl")).map_err(|e| e.to_string())?;
    ensure(!recs.is_empty() && recs.iter().all(|r| r.verdict == OptimizationVerdict::AuditBlocked), || "not every record blocked".into())?;
    let gens: Vec<GenerationRecord> = rtlsafe_core::jsonl::read_all(&out2.join("logs/generations.jsonl")).unwrap_or_default();
    ensure(gens.iter().all(|g| g.role != EndpointRole::Cloud), || "tampered run reached the cloud".into())?;
    Ok(format!("{joined} cloud calls joined to one clear audit each; injected text blocked with 0 cloud calls"))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures");
    let backend = MockBackend::new();
    let mut got = Vec::new();
    for (file, want) in [
        ("barrel_shifter_multistage.v", (34.902, 23.125, 350.0)),
        ("barrel_shifter_direct.v", (44.856, 29.074, 390.0)),
    ] {
        let src = std::fs::read_to_string(dir.join(file)).map_err(|e| e.to_string())?;
        let m = backend.measure(&module(&src, "", CodebaseKind::Target), &SynthesisConstraints::default()).map_err(|e| e.to_string())?;
        let have = (m.area_um2, m.power_uw, m.critical_path_delay_ps);
        ensure(have == want, || format!("{file}: {have:?} vs {want:?}"))?;
        got.push(format!("{} um2 / {} uW / {} ps", have.0, have.1, have.2));
    }
    Ok(got.join("; "))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("metric arithmetic", criterion_1),
        ("pairing oracle equivalence", criterion_2),
        ("leakage guard completeness", criterion_3),
        ("end-to-end determinism", criterion_4),
        ("K-sweep harness", criterion_5),
        ("prompt fidelity", criterion_6),
        ("IP-isolation audit join", criterion_7),
        ("mock backend fixtures", criterion_8),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let took = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {}: PASS {name} ({took:.2}s): {detail}", i + 1),
            Err(e) => {
                println!("criterion {}: FAIL {name} ({took:.2}s): {e}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
