// SPDX-License-Identifier: Apache-2.0

//! Builds backends, endpoints and guards from a resolved config, and owns
//! the output tree.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use rtlsafe_core::clock::Clock;
use rtlsafe_core::corpus::{ingest, Codebase, CodebaseKind, Ingested};
use rtlsafe_core::jsonl::JsonlWriter;
use rtlsafe_core::leakage_guard::LeakageGuard;
use rtlsafe_core::model_client::{ModelClient, Script, ScriptedTransport};
use rtlsafe_core::synthesis::{ExternalBackend, MockBackend, SynthesisBackend};

use crate::config::{BackendKind, ClockMode, EndpointSpec, RunConfig, TransportKind};

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub fingerprint: String,
    pub clock: Clock,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Meta {
    tool_version: String,
    /// Artifact path (relative to the output root) to the fingerprint of
    /// the config that wrote it.
    artifacts: BTreeMap<String, String>,
}

impl Ctx {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let out = cfg.paths.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        if let Some(p) = &cfg.paths.proprietary {
            crate::config::check_separate(p, &out)?;
        }
        let clock = match cfg.experiment.clock {
            ClockMode::System => Clock::System,
            ClockMode::Logical => Clock::Logical,
            ClockMode::Auto if cfg.all_scripted() => Clock::Logical,
            ClockMode::Auto => Clock::System,
        };
        Ok(Ctx {
            fingerprint: cfg.fingerprint(),
            cfg,
            out,
            clock,
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn prepare(&self, rel: &str) -> Result<PathBuf> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(p)
    }

    /// Records `rel` in `<out>/meta.json` under the current fingerprint.
    fn stamp(&self, rel: &str) -> Result<()> {
        let meta_path = self.prepare("meta.json")?;
        let mut meta: Meta = fs::read_to_string(&meta_path)
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok())
            .unwrap_or_default();
        meta.tool_version = env!("CARGO_PKG_VERSION").to_string();
        meta.artifacts.insert(rel.to_string(), self.fingerprint.clone());
        fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")?;
        Ok(())
    }

    pub fn write_text(&self, rel: &str, text: &str) -> Result<PathBuf> {
        let p = self.prepare(rel)?;
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        self.stamp(rel)?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<PathBuf> {
        self.write_text(rel, &(serde_json::to_string_pretty(value)? + "\n"))
    }

    /// Truncates `rel`, then writes one line per record.
    pub fn write_jsonl<T: Serialize>(&self, rel: &str, records: &[T]) -> Result<PathBuf> {
        let p = self.prepare(rel)?;
        let w = JsonlWriter::create(&p).with_context(|| format!("writing {}", p.display()))?;
        for r in records {
            w.write(r)?;
        }
        self.stamp(rel)?;
        Ok(p)
    }

    /// Appends to a log; each line is written whole.
    pub fn append_jsonl<T: Serialize>(&self, rel: &str, records: &[T]) -> Result<()> {
        let p = self.prepare(rel)?;
        let w = JsonlWriter::append_to(&p).with_context(|| format!("opening {}", p.display()))?;
        for r in records {
            w.write(r)?;
        }
        self.stamp(rel)
    }

    fn corpus(&self, path: Option<&Path>, what: &str, kind: CodebaseKind) -> Result<Ingested> {
        let path = path.ok_or_else(|| anyhow!("no {what} path: set paths.{what} or pass --{what}"))?;
        let ing = ingest(path, kind, &self.cfg.classifier).with_context(|| format!("ingesting {what} codebase"))?;
        if ing.codebase.is_empty() {
            bail!("{what} codebase at {} has no usable modules", path.display());
        }
        Ok(ing)
    }

    pub fn proprietary(&self) -> Result<Ingested> {
        self.corpus(self.cfg.paths.proprietary.as_deref(), "proprietary", CodebaseKind::Proprietary)
    }

    pub fn draft(&self) -> Result<Ingested> {
        self.corpus(self.cfg.paths.draft.as_deref(), "draft", CodebaseKind::Draft)
    }

    pub fn targets(&self) -> Result<Ingested> {
        self.corpus(self.cfg.paths.targets.as_deref(), "targets", CodebaseKind::Target)
    }

    pub fn backend(&self) -> Result<Box<dyn SynthesisBackend>> {
        Ok(match self.cfg.synthesis.backend {
            BackendKind::Mock => Box::new(MockBackend::new()),
            BackendKind::External => {
                let ext = self.cfg.synthesis.external.clone().ok_or_else(|| anyhow!("missing [synthesis.external]"))?;
                Box::new(ExternalBackend::new(ext)?)
            }
        })
    }

    fn client(&self, spec: &EndpointSpec, builtin: fn() -> ScriptedTransport) -> Result<ModelClient> {
        let config = spec.endpoint.clone();
        let client = match spec.kind() {
            TransportKind::Http => ModelClient::http(config, self.clock)?,
            TransportKind::Scripted => {
                let transport = match &spec.script {
                    Some(p) => {
                        let text = fs::read_to_string(p).with_context(|| format!("reading script {}", p.display()))?;
                        let script: Script = serde_json::from_str(&text).with_context(|| format!("parsing script {}", p.display()))?;
                        ScriptedTransport::new(script)
                    }
                    None => builtin(),
                };
                ModelClient::new(config, Box::new(transport), self.clock)?
            }
        };
        Ok(client)
    }

    pub fn local(&self) -> Result<ModelClient> {
        self.client(&self.cfg.endpoints.local, builtin_local)
    }

    pub fn cloud(&self) -> Result<ModelClient> {
        self.client(&self.cfg.endpoints.cloud, builtin_cloud)
    }

    /// Guard for principle sets: every proprietary n-gram counts.
    pub fn principle_guard(&self, proprietary: &Codebase) -> Result<LeakageGuard> {
        Ok(LeakageGuard::build(proprietary, self.cfg.guard.clone())?)
    }

    /// Guard for rewrite prompts: code that is also in the public targets
    /// (shared headers, boilerplate) is exempt.
    pub fn prompt_guard(&self, proprietary: &Codebase, targets: &Codebase) -> Result<LeakageGuard> {
        Ok(self
            .principle_guard(proprietary)?
            .with_public(targets.iter().map(|m| m.source.as_str())))
    }
}

const BUILTIN_POWER: &str = "1. Prefer staged logic over one wide combinational block so fewer nodes toggle per cycle.\n\
2. Avoid redundant registers and state that do not change outputs.\n\
3. Use clock enables or gating for registers that are idle most cycles.\n";
const BUILTIN_DELAY: &str = "1. Prefer balanced trees over long chains of dependent operators.\n\
2. Avoid deeply nested conditional logic on the critical path.\n\
3. Use parallel prefix structures instead of ripple chains for wide arithmetic.\n";

/// Fixed principles without any contact to the prompt's code.
pub fn builtin_local() -> ScriptedTransport {
    ScriptedTransport::from_fn(|prompt| {
        Some(if prompt.contains("specializing in low-power") {
            BUILTIN_POWER.to_string()
        } else {
            BUILTIN_DELAY.to_string()
        })
    })
}

/// Returns the target module unchanged.
pub fn builtin_cloud() -> ScriptedTransport {
    ScriptedTransport::from_fn(|prompt| {
        let start = prompt.rfind("```verilog\n")? + "```verilog\n".len();
        let end = prompt[start..].find("```")? + start;
        Some(format!("```verilog\n{}```\n", &prompt[start..end]))
    })
}
