// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;

use rtlsafe_core::corpus::{Codebase, ModuleId, VerilogModule};
use rtlsafe_core::evaluation::{
    emit_dataset, report, summarize, sweep_k, EvaluationSummary, Experiment, ReportOptions, RunLabel,
    SweepError, SweepTable, SUMMARY_CSV_HEADER,
};
use rtlsafe_core::hashing::sha256_hex;
use rtlsafe_core::jsonl;
use rtlsafe_core::leakage_guard::{AuditEntry, Verdict};
use rtlsafe_core::model_client::{EndpointRole, GenerationRecord};
use rtlsafe_core::optimizer::{prepare_targets, OptimizationRecord, OptimizationVerdict, Optimizer, OptimizerOptions};
use rtlsafe_core::pairing::{mine_pairs, sample_for_inspection, validate_pair, ContrastivePair, MineOptions};
use rtlsafe_core::principles::{extract_principles, ExtractOptions, PrincipleSet, PrinciplesError};
use rtlsafe_core::synthesis::{Attribute, PpaMetrics};

use crate::config::{EndpointSpec, RunConfig, TransportKind};
use crate::runtime::Ctx;
use crate::{usage, CmdResult, Command, Corpora, Failure};

const GENERATIONS_LOG: &str = "logs/generations.jsonl";
const AUDITS_LOG: &str = "logs/audits.jsonl";

fn corpora(cfg: &mut RunConfig, c: &Corpora) {
    if let Some(p) = &c.proprietary {
        cfg.paths.proprietary = Some(p.clone());
    }
    if let Some(d) = &c.draft {
        cfg.paths.draft = Some(d.clone());
    }
}

fn scripted(spec: &mut EndpointSpec) {
    spec.transport = Some(TransportKind::Scripted);
    spec.script = None;
}

/// Folds subcommand flags into the config before it is fingerprinted.
pub fn apply_overrides(cfg: &mut RunConfig, cmd: &Command) {
    match cmd {
        Command::Ingest(c) | Command::EmitDataset { corpora: c, .. } | Command::Inspect { corpora: c, .. } => {
            corpora(cfg, c)
        }
        Command::Classify { .. } | Command::Report { .. } => {}
        Command::MinePairs {
            corpora: c,
            threshold,
            orient_by_winner,
            backend,
        } => {
            corpora(cfg, c);
            if let Some(t) = threshold {
                cfg.pairing.threshold = *t;
            }
            cfg.pairing.orient_by_winner |= orient_by_winner;
            if let Some(b) = backend {
                cfg.synthesis.backend = *b;
            }
        }
        Command::ExtractPrinciples { corpora: c, attribute, k, .. } => {
            corpora(cfg, c);
            if let Some(a) = attribute {
                cfg.experiment.attribute = *a;
            }
            if let Some(k) = k {
                cfg.experiment.k = *k;
            }
        }
        Command::Audit { corpora: c, targets, .. } => {
            corpora(cfg, c);
            if let Some(t) = targets {
                cfg.paths.targets = Some(t.clone());
            }
        }
        Command::Optimize {
            proprietary,
            attribute,
            target,
            backend,
            cloud_endpoint,
            ..
        } => {
            if let Some(p) = proprietary {
                cfg.paths.proprietary = Some(p.clone());
            }
            if let Some(a) = attribute {
                cfg.experiment.attribute = *a;
            }
            if let Some(t) = target {
                cfg.paths.targets = Some(t.clone());
            }
            if let Some(b) = backend {
                cfg.synthesis.backend = *b;
            }
            match cloud_endpoint.as_deref() {
                Some("scripted") => scripted(&mut cfg.endpoints.cloud),
                Some(url) => {
                    cfg.endpoints.cloud.transport = Some(TransportKind::Http);
                    cfg.endpoints.cloud.endpoint.base_url = Some(url.to_string());
                }
                None => {}
            }
        }
        Command::Evaluate { attribute, .. } => {
            if let Some(a) = attribute {
                cfg.experiment.attribute = *a;
            }
        }
        Command::SweepK {
            corpora: c,
            targets,
            attribute,
            ks,
            seeds,
            scripted: s,
            ..
        } => {
            corpora(cfg, c);
            if let Some(t) = targets {
                cfg.paths.targets = Some(t.clone());
            }
            if let Some(a) = attribute {
                cfg.experiment.attribute = *a;
            }
            if let Some(ks) = ks {
                cfg.experiment.ks = ks.clone();
            }
            if let Some(s) = seeds {
                cfg.experiment.seeds = s.clone();
            }
            if *s {
                scripted(&mut cfg.endpoints.local);
                scripted(&mut cfg.endpoints.cloud);
            }
        }
    }
}

pub fn dispatch(ctx: &Ctx, cmd: Command) -> CmdResult {
    match cmd {
        Command::Ingest(_) => ingest(ctx),
        Command::Classify { path } => classify(ctx, &path),
        Command::MinePairs { .. } => mine(ctx).map(|_| ()),
        Command::EmitDataset { pairs, .. } => dataset(ctx, pairs),
        Command::ExtractPrinciples { pairs, .. } => extract(ctx, pairs),
        Command::Audit { logs, .. } => audit(ctx, logs),
        Command::Optimize {
            principles, dry_run, attribute, ..
        } => optimize(ctx, &principles, attribute, dry_run),
        Command::Evaluate { records, .. } => evaluate(ctx, records),
        Command::SweepK { pairs, .. } => sweep(ctx, pairs),
        Command::Report { case_studies } => render_report(ctx, case_studies),
        Command::Inspect { pairs, n, .. } => inspect(ctx, pairs, n),
    }
}

/// Missing inputs are usage errors.
fn input<T>(r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(usage)
}

fn lookup_in<'a>(codebases: [&'a Codebase; 2]) -> impl Fn(&ModuleId) -> Option<VerilogModule> + 'a {
    move |id| codebases.iter().find_map(|c| c.get(id)).cloned()
}

fn read_pairs(ctx: &Ctx, path: Option<PathBuf>) -> Result<Vec<ContrastivePair>, Failure> {
    let path = path.unwrap_or_else(|| ctx.path("pairs.jsonl"));
    jsonl::read_all(&path)
        .with_context(|| format!("reading pairs from {} (run mine-pairs first)", path.display()))
        .map_err(usage)
}

fn ingest(ctx: &Ctx) -> CmdResult {
    for (what, ing) in [("proprietary", input(ctx.proprietary())?), ("draft", input(ctx.draft())?)] {
        ctx.write_jsonl(&format!("corpus/{what}/manifest.jsonl"), &ing.manifest)?;
        let modules: Vec<&VerilogModule> = ing.codebase.iter().collect();
        ctx.write_jsonl(&format!("corpus/{what}/modules.jsonl"), &modules)?;
        println!("{what}: {} modules, {} skipped", ing.codebase.len(), ing.skipped());
    }
    Ok(())
}

fn classify(ctx: &Ctx, path: &Path) -> CmdResult {
    let ing = rtlsafe_core::corpus::ingest(path, rtlsafe_core::CodebaseKind::Target, &ctx.cfg.classifier)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)?;
    for m in ing.codebase.iter() {
        let width = m.bit_width.map(|w| w.to_string()).unwrap_or_else(|| "-".into());
        println!("{}\t{}\t{width}\t{}", m.name, m.category, m.id);
    }
    for e in ing.manifest.iter().filter(|e| e.reason.is_some()) {
        eprintln!("skipped {}: {}", e.path, e.reason.as_deref().unwrap_or(""));
    }
    Ok(())
}

fn mine_options(cfg: &RunConfig) -> MineOptions {
    MineOptions {
        threshold: cfg.pairing.threshold,
        attributes: Attribute::ALL.to_vec(),
        orient_by_winner: cfg.pairing.orient_by_winner,
        constraints: cfg.synthesis.constraints.clone(),
        bucket_literals: cfg.pairing.bucket_literals,
    }
}

fn mine(ctx: &Ctx) -> Result<Vec<ContrastivePair>, Failure> {
    let p = input(ctx.proprietary())?;
    let d = input(ctx.draft())?;
    let backend = input(ctx.backend())?;
    let report = mine_pairs(&p.codebase, &d.codebase, backend.as_ref(), &mine_options(&ctx.cfg)).map_err(anyhow::Error::from)?;
    ctx.write_jsonl("pairs.jsonl", &report.pairs)?;
    ctx.write_jsonl("matches.jsonl", &report.matches)?;
    ctx.write_jsonl("exclusions.jsonl", &report.excluded)?;
    let by_attr = |a: Attribute| report.pairs.iter().filter(|p| p.attribute == a).count();
    println!(
        "{} matches, {} power pairs, {} delay pairs, {} modules excluded",
        report.matches.len(),
        by_attr(Attribute::Power),
        by_attr(Attribute::CriticalPathDelay),
        report.excluded.len()
    );
    if report.pairs.is_empty() {
        log::warn!("no pairs at threshold {}", ctx.cfg.pairing.threshold);
    }
    Ok(report.pairs)
}

fn dataset(ctx: &Ctx, pairs: Option<PathBuf>) -> CmdResult {
    let pairs = read_pairs(ctx, pairs)?;
    let p = input(ctx.proprietary())?;
    let d = input(ctx.draft())?;
    let cbs = [&p.codebase, &d.codebase];
    let (samples, skipped) = emit_dataset(&pairs, &lookup_in(cbs));
    ctx.write_jsonl("dataset.jsonl", &samples)?;
    ctx.write_jsonl("dataset_skips.jsonl", &skipped)?;
    println!("{} samples, {} skipped", samples.len(), skipped.len());
    Ok(())
}

fn principles_name(attribute: Attribute, k: usize, seed: u64) -> String {
    format!("{attribute}-k{k}-s{seed}.json")
}

fn extract(ctx: &Ctx, pairs: Option<PathBuf>) -> CmdResult {
    let pairs = read_pairs(ctx, pairs)?;
    let p = input(ctx.proprietary())?;
    let d = input(ctx.draft())?;
    let cbs = [&p.codebase, &d.codebase];
    let guard = input(ctx.principle_guard(&p.codebase))?;
    let local = input(ctx.local())?;
    let attribute = ctx.cfg.experiment.attribute;
    let k = ctx.cfg.experiment.k;
    let seed = ctx.cfg.seeds()[0];
    let options = ExtractOptions {
        k,
        seed,
        style: ctx.cfg.experiment.prompt_style,
        clock: ctx.clock,
    };
    let lookup = lookup_in(cbs);
    let result = extract_principles(&local, &pairs, &lookup, attribute, &guard, &options);
    match result {
        Ok(x) => {
            ctx.append_jsonl(GENERATIONS_LOG, &[&x.generation])?;
            ctx.append_jsonl(AUDITS_LOG, &[&x.audit])?;
            let file = ctx.write_json(&format!("principles/{}", principles_name(attribute, k, seed)), &x.set)?;
            println!("{}: {} principles -> {}", x.set.id, x.set.principles.len(), file.display());
            for w in &x.lint {
                println!("  lint: principle {}: {}", w.index + 1, w.reason);
            }
            Ok(())
        }
        Err(PrinciplesError::LeakageDetected { quarantined }) => {
            ctx.append_jsonl(GENERATIONS_LOG, &[&quarantined.generation])?;
            ctx.append_jsonl(AUDITS_LOG, &[&quarantined.audit])?;
            ctx.write_json(&format!("quarantine/{}.json", quarantined.set.id), &quarantined.set)?;
            Err(anyhow!(
                "principle set {} contains proprietary content ({} findings); quarantined",
                quarantined.set.id,
                quarantined.audit.findings.len()
            )
            .into())
        }
        Err(e @ PrinciplesError::NotLocal(_)) => Err(usage(e)),
        Err(e) => Err(anyhow::Error::from(e).into()),
    }
}

#[derive(Serialize)]
struct AuditReport {
    audits: usize,
    reproduced: usize,
    cloud_generations: usize,
    joined: usize,
    problems: Vec<String>,
}

fn audit(ctx: &Ctx, logs: Option<PathBuf>) -> CmdResult {
    let dir = logs.unwrap_or_else(|| ctx.path("logs"));
    let audits: Vec<AuditEntry> = input(
        jsonl::read_all(&dir.join("audits.jsonl")).with_context(|| format!("reading {}/audits.jsonl", dir.display())),
    )?;
    let generations: Vec<GenerationRecord> = jsonl::read_all(&dir.join("generations.jsonl")).unwrap_or_default();
    let p = input(ctx.proprietary())?;
    let strict = input(ctx.principle_guard(&p.codebase))?;
    let needs_targets = audits.iter().any(|a| a.context.starts_with("p2:"));
    let public = if needs_targets {
        let t = input(ctx.targets())?;
        Some(input(ctx.prompt_guard(&p.codebase, &t.codebase))?)
    } else {
        None
    };

    let mut problems = Vec::new();
    let mut reproduced = 0;
    for a in &audits {
        let guard = match (&public, a.context.starts_with("p2:")) {
            (Some(g), true) => g,
            _ => &strict,
        };
        if guard.replay(a) {
            reproduced += 1;
        } else {
            problems.push(format!("audit {} ({}) does not replay", a.verdict_id, a.context));
        }
    }
    let mut by_id: BTreeMap<&str, Vec<&AuditEntry>> = BTreeMap::new();
    for a in &audits {
        by_id.entry(a.verdict_id.as_str()).or_default().push(a);
    }
    let cloud: Vec<&GenerationRecord> = generations.iter().filter(|g| g.role == EndpointRole::Cloud).collect();
    let mut joined = 0;
    for g in &cloud {
        let Some(id) = g.clearance_id.as_deref() else {
            problems.push(format!("cloud call {} has no clearance", g.context));
            continue;
        };
        let hits = by_id.get(id).map(Vec::as_slice).unwrap_or(&[]);
        let hash = sha256_hex(g.prompt.as_bytes());
        let mut distinct: Vec<(&String, Verdict)> = hits.iter().map(|a| (&a.payload_hash, a.verdict)).collect();
        distinct.dedup();
        match distinct.as_slice() {
            [(h, Verdict::Clear)] if **h == hash => joined += 1,
            [] => problems.push(format!("cloud call {} cites unknown audit {id}", g.context)),
            [(_, Verdict::Flagged)] => problems.push(format!("cloud call {} was sent on flagged audit {id}", g.context)),
            [_] => problems.push(format!("cloud call {} prompt does not match audit {id}", g.context)),
            _ => problems.push(format!("audit id {id} is ambiguous")),
        }
    }
    let r = AuditReport {
        audits: audits.len(),
        reproduced,
        cloud_generations: cloud.len(),
        joined,
        problems,
    };
    ctx.write_json("audit_report.json", &r)?;
    println!(
        "{}/{} audits reproduced, {}/{} cloud calls joined to a clear audit",
        r.reproduced, r.audits, r.joined, r.cloud_generations
    );
    for p in &r.problems {
        println!("  {p}");
    }
    if r.problems.is_empty() {
        Ok(())
    } else {
        Err(anyhow!("{} audit problems", r.problems.len()).into())
    }
}

fn optimizer_options(ctx: &Ctx) -> OptimizerOptions {
    OptimizerOptions {
        retries: ctx.cfg.experiment.retries,
        constraints: ctx.cfg.synthesis.constraints.clone(),
        clock: ctx.clock,
        max_workers: ctx.cfg.experiment.workers,
    }
}

fn persist_runs(ctx: &Ctx, rel: &str, runs: &[rtlsafe_core::optimizer::OptimizationRun]) -> anyhow::Result<Vec<OptimizationRecord>> {
    for r in runs {
        ctx.append_jsonl(AUDITS_LOG, &r.audits)?;
        ctx.append_jsonl(GENERATIONS_LOG, &r.generations)?;
    }
    let records: Vec<OptimizationRecord> = runs.iter().map(|r| r.record.clone()).collect();
    ctx.write_jsonl(rel, &records)?;
    Ok(records)
}

fn optimize(ctx: &Ctx, principles: &Path, attribute: Option<Attribute>, dry_run: bool) -> CmdResult {
    let text = input(std::fs::read_to_string(principles).with_context(|| format!("reading {}", principles.display())))?;
    let set: PrincipleSet = input(serde_json::from_str(&text).with_context(|| format!("parsing {}", principles.display())))?;
    input(set.check().map_err(|e| anyhow!("principle set {}: {e}", set.id)))?;
    if let Some(a) = attribute {
        if a != set.attribute {
            return Err(usage(anyhow!("--attribute {a} but principle set {} is for {}", set.id, set.attribute)));
        }
    }
    let p = input(ctx.proprietary())?;
    let t = input(ctx.targets())?;
    let backend = input(ctx.backend())?;
    let guard = input(ctx.prompt_guard(&p.codebase, &t.codebase))?;
    let cloud = input(ctx.cloud())?;
    let opt = input(Optimizer::new(&cloud, backend.as_ref(), &guard, optimizer_options(ctx)).map_err(anyhow::Error::from))?;
    let modules: Vec<VerilogModule> = t.codebase.iter().cloned().collect();

    if dry_run {
        for m in &modules {
            let d = opt.dry_run(m, &set).map_err(anyhow::Error::from)?;
            println!("=== {} ({}) audit {} {:?}, {} findings, would send: {}", m.name, m.id, d.verdict.id, d.verdict.verdict, d.verdict.findings.len(), d.would_send);
            println!("{}", d.prompt);
        }
        return Ok(());
    }

    let (ready, skipped) = prepare_targets(&modules, backend.as_ref(), &ctx.cfg.synthesis.constraints);
    ctx.write_jsonl("targets_skipped.jsonl", &skipped)?;
    let runs = opt.optimize_all(&ready, &set).map_err(anyhow::Error::from)?;
    let records = persist_runs(ctx, &format!("optimizations/{}.jsonl", set.attribute), &runs)?;
    let count = |v: OptimizationVerdict| records.iter().filter(|r| r.verdict == v).count();
    println!(
        "{} targets ({} skipped): {} improved, {} regressed, {} unchanged, {} failed",
        records.len(),
        skipped.len(),
        count(OptimizationVerdict::Improved),
        count(OptimizationVerdict::Regressed),
        count(OptimizationVerdict::Unchanged),
        records.iter().filter(|r| !r.verdict.measured()).count()
    );
    let unsent = count(OptimizationVerdict::EndpointUnreachable) + count(OptimizationVerdict::AuditBlocked);
    if unsent > 0 {
        return Err(anyhow!("{unsent} targets were blocked or could not reach the cloud endpoint").into());
    }
    Ok(())
}

fn label(ctx: &Ctx, records: &[OptimizationRecord]) -> RunLabel {
    RunLabel {
        k: None,
        seed: None,
        local_model: Some(ctx.cfg.endpoints.local.endpoint.model.clone()),
        cloud_model: records.first().map(|r| r.cloud_model.clone()),
        backend: records.first().map(|r| r.before.backend_id.clone()),
        config_fingerprint: Some(ctx.fingerprint.clone()),
    }
}

fn summary_csv_row(s: &EvaluationSummary) -> String {
    let o = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
    format!(
        "{},{},{},{},{},{:.2},{},{}\n",
        s.attribute,
        s.label.k.map(|k| k.to_string()).unwrap_or_default(),
        s.label.seed.map(|k| k.to_string()).unwrap_or_default(),
        s.n_total,
        s.n_success,
        s.success_rate,
        o(s.mean_relative_improvement),
        o(s.median_relative_improvement)
    )
}

/// K and seed of the principle set a batch of records used, when known.
fn principle_provenance(ctx: &Ctx, records: &[OptimizationRecord]) -> (Option<usize>, Option<u64>) {
    let Some(id) = records.first().map(|r| &r.principle_set_id) else {
        return (None, None);
    };
    let dir = ctx.path("principles");
    let Ok(entries) = std::fs::read_dir(&dir) else {
        return (None, None);
    };
    let mut files: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    files.sort();
    for f in files {
        let set: Option<PrincipleSet> = std::fs::read_to_string(&f).ok().and_then(|s| serde_json::from_str(&s).ok());
        if let Some(set) = set.filter(|s| &s.id == id) {
            return (Some(set.k), Some(set.seed));
        }
    }
    (None, None)
}

fn evaluate(ctx: &Ctx, records: Option<PathBuf>) -> CmdResult {
    let attribute = ctx.cfg.experiment.attribute;
    let path = records.unwrap_or_else(|| ctx.path(&format!("optimizations/{attribute}.jsonl")));
    let records: Vec<OptimizationRecord> =
        input(jsonl::read_all(&path).with_context(|| format!("reading records from {}", path.display())))?;
    let mut label = label(ctx, &records);
    (label.k, label.seed) = principle_provenance(ctx, &records);
    let s = summarize(&records, label).map_err(anyhow::Error::from)?;
    ctx.write_json(&format!("summary/{}.json", s.attribute), &s)?;
    ctx.write_text(&format!("summary/{}.csv", s.attribute), &format!("{SUMMARY_CSV_HEADER}\n{}", summary_csv_row(&s)))?;
    let o = |v: Option<f64>| v.map(|x| format!("{x:.2}%")).unwrap_or_else(|| "-".into());
    println!(
        "{}: SR {:.2}% ({}/{}), mean RI {}, median RI {}, first-attempt SR {:.2}%",
        s.attribute,
        s.success_rate,
        s.n_success,
        s.n_total,
        o(s.mean_relative_improvement),
        o(s.median_relative_improvement),
        s.first_attempt_success_rate
    );
    Ok(())
}

fn sweep(ctx: &Ctx, pairs: Option<PathBuf>) -> CmdResult {
    let attribute = ctx.cfg.experiment.attribute;
    let pairs = match pairs {
        Some(p) => read_pairs(ctx, Some(p))?,
        None if ctx.path("pairs.jsonl").exists() => read_pairs(ctx, None)?,
        None => mine(ctx)?,
    };
    let p = input(ctx.proprietary())?;
    let d = input(ctx.draft())?;
    let t = input(ctx.targets())?;
    let cbs = [&p.codebase, &d.codebase];
    let lookup = lookup_in(cbs);
    let backend = input(ctx.backend())?;
    let strict = input(ctx.principle_guard(&p.codebase))?;
    let public = input(ctx.prompt_guard(&p.codebase, &t.codebase))?;
    let local = input(ctx.local())?;
    let cloud = input(ctx.cloud())?;
    let modules: Vec<VerilogModule> = t.codebase.iter().cloned().collect();
    let (ready, skipped) = prepare_targets(&modules, backend.as_ref(), &ctx.cfg.synthesis.constraints);
    let base = format!("sweep/{attribute}");
    ctx.write_jsonl(&format!("{base}/targets_skipped.jsonl"), &skipped)?;

    let exp = Experiment {
        local: &local,
        cloud: &cloud,
        backend: backend.as_ref(),
        principle_guard: &strict,
        prompt_guard: &public,
        pairs: &pairs,
        lookup: &lookup,
        targets: &ready,
        attribute,
        style: ctx.cfg.experiment.prompt_style,
        optimizer: optimizer_options(ctx),
    };
    let available = pairs.iter().filter(|p| p.attribute == attribute).count();
    let run_label = RunLabel {
        local_model: Some(local.identity()),
        cloud_model: Some(cloud.identity()),
        backend: Some(backend.id().to_string()),
        config_fingerprint: Some(ctx.fingerprint.clone()),
        ..Default::default()
    };
    let table = sweep_k(attribute, &ctx.cfg.experiment.ks, &ctx.cfg.seeds(), available, &run_label, |k, seed| {
        let cell = exp.run_cell(k, seed)?;
        ctx.append_jsonl(GENERATIONS_LOG, &[&cell.extraction.generation])?;
        ctx.append_jsonl(AUDITS_LOG, &[&cell.extraction.audit])?;
        let dir = if cell.quarantined { "quarantine" } else { "principles" };
        ctx.write_json(&format!("{base}/{dir}/{}", principles_name(attribute, k, seed)), &cell.extraction.set)?;
        persist_runs(ctx, &format!("{base}/records/k{k}-s{seed}.jsonl"), &cell.runs)
    });
    let table = match table {
        Ok(t) => t,
        Err(e @ SweepError::EmptyGrid) => return Err(usage(e)),
        Err(e) => return Err(anyhow::Error::from(e).into()),
    };
    ctx.write_text(&format!("{base}/summary.csv"), &table.to_csv())?;
    ctx.write_text(&format!("{base}/by_k.csv"), &table.by_k_csv())?;
    ctx.write_json(&format!("{base}/series.json"), &table.to_json())?;
    ctx.write_json(&format!("{base}/table.json"), &table)?;
    print!("{}", table.to_csv());
    Ok(())
}

fn sorted_files(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map(|rd| rd.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|e| e == ext)).collect())
        .unwrap_or_default();
    v.sort();
    v
}

fn render_report(ctx: &Ctx, case_studies: usize) -> CmdResult {
    let mut summaries: Vec<EvaluationSummary> = Vec::new();
    for f in sorted_files(&ctx.path("summary"), "json") {
        let text = std::fs::read_to_string(&f).with_context(|| format!("reading {}", f.display()))?;
        summaries.push(serde_json::from_str(&text).with_context(|| format!("parsing {}", f.display()))?);
    }
    let mut records: Vec<OptimizationRecord> = Vec::new();
    for f in sorted_files(&ctx.path("optimizations"), "jsonl") {
        records.extend(jsonl::read_all::<OptimizationRecord>(&f).with_context(|| format!("reading {}", f.display()))?);
    }
    let mut sweeps: Vec<SweepTable> = Vec::new();
    let mut sweep_dirs: Vec<PathBuf> = std::fs::read_dir(ctx.path("sweep"))
        .map(|rd| rd.filter_map(|e| e.ok().map(|e| e.path())).collect())
        .unwrap_or_default();
    sweep_dirs.sort();
    for d in sweep_dirs {
        let f = d.join("table.json");
        if let Ok(text) = std::fs::read_to_string(&f) {
            sweeps.push(serde_json::from_str(&text).with_context(|| format!("parsing {}", f.display()))?);
        }
    }
    if summaries.is_empty() && records.is_empty() && sweeps.is_empty() {
        log::warn!("nothing to report under {}", ctx.out.display());
    }
    let r = report(&summaries, &records, &sweeps, ReportOptions { case_studies });
    ctx.write_text("report/report.md", &r.markdown)?;
    ctx.write_text("report/headline.csv", &r.headline_csv)?;
    ctx.write_text("report/categories.csv", &r.category_csv)?;
    println!("{}", ctx.path("report/report.md").display());
    Ok(())
}

#[derive(Serialize)]
struct Inspection<'a> {
    pair_id: String,
    attribute: Attribute,
    similarity: f64,
    margin: f64,
    metrics_p: &'a PpaMetrics,
    metrics_d: &'a PpaMetrics,
    check: Option<String>,
}

fn inspect(ctx: &Ctx, pairs: Option<PathBuf>, n: usize) -> CmdResult {
    let pairs = read_pairs(ctx, pairs)?;
    let have_corpora = ctx.cfg.paths.proprietary.is_some() && ctx.cfg.paths.draft.is_some();
    let (p, d) = if have_corpora {
        (Some(input(ctx.proprietary())?), Some(input(ctx.draft())?))
    } else {
        (None, None)
    };
    let picked = sample_for_inspection(&pairs, n, ctx.cfg.seed);
    let mut rows = Vec::new();
    for pair in picked {
        let check = match (&p, &d) {
            (Some(p), Some(d)) => {
                let cbs = [&p.codebase, &d.codebase];
                Some(match validate_pair(pair, &lookup_in(cbs), ctx.cfg.pairing.threshold) {
                    Ok(()) => "ok".to_string(),
                    Err(e) => e,
                })
            }
            _ => None,
        };
        println!(
            "{}\t{}\tsim={:.4}\tmargin={:.2}%\t{}",
            pair.id(),
            pair.attribute,
            pair.similarity,
            100.0 * pair.margin,
            check.as_deref().unwrap_or("unchecked")
        );
        rows.push(Inspection {
            pair_id: pair.id(),
            attribute: pair.attribute,
            similarity: pair.similarity,
            margin: pair.margin,
            metrics_p: &pair.metrics_p,
            metrics_d: &pair.metrics_d,
            check,
        });
    }
    ctx.write_jsonl("inspection.jsonl", &rows)?;
    Ok(())
}
