// SPDX-License-Identifier: Apache-2.0

//! Run configuration: one TOML file, overridden by flags, fingerprinted.

use std::path::{Component, Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use rtlsafe_core::corpus::Classifier;
use rtlsafe_core::hashing::short_hash;
use rtlsafe_core::leakage_guard::LeakagePolicy;
use rtlsafe_core::model_client::{EndpointConfig, EndpointRole};
use rtlsafe_core::principles::{PromptStyle, DEFAULT_K, SWEEP_KS};
use rtlsafe_core::synthesis::{Attribute, ExternalConfig, SynthesisConstraints};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed. Per-step seeds derive from it unless set explicitly.
    pub seed: u64,
    pub paths: Paths,
    pub pairing: Pairing,
    pub guard: LeakagePolicy,
    pub endpoints: Endpoints,
    pub synthesis: Synthesis,
    pub experiment: ExperimentConfig,
    pub classifier: Classifier,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub proprietary: Option<PathBuf>,
    pub draft: Option<PathBuf>,
    pub targets: Option<PathBuf>,
    /// Not part of the fingerprint.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pairing {
    pub threshold: f64,
    pub bucket_literals: bool,
    pub orient_by_winner: bool,
}

impl Default for Pairing {
    fn default() -> Self {
        Pairing {
            threshold: 0.7,
            bucket_literals: true,
            orient_by_winner: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    #[default]
    Http,
    Scripted,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointSpec {
    /// HTTP when `base_url` is set, scripted otherwise.
    pub transport: Option<TransportKind>,
    /// Script JSON for scripted endpoints; a built-in responder otherwise.
    pub script: Option<PathBuf>,
    #[serde(flatten)]
    pub endpoint: EndpointConfig,
}

impl EndpointSpec {
    pub fn kind(&self) -> TransportKind {
        match (self.transport, &self.endpoint.base_url) {
            (Some(t), _) => t,
            (None, Some(_)) => TransportKind::Http,
            (None, None) => TransportKind::Scripted,
        }
    }

    fn scripted(name: &str, role: EndpointRole) -> Self {
        EndpointSpec {
            transport: Some(TransportKind::Scripted),
            script: None,
            endpoint: EndpointConfig {
                name: name.into(),
                role,
                model: format!("scripted-{name}"),
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Endpoints {
    pub local: EndpointSpec,
    pub cloud: EndpointSpec,
}

impl Default for Endpoints {
    fn default() -> Self {
        Endpoints {
            local: EndpointSpec::scripted("local", EndpointRole::Local),
            cloud: EndpointSpec::scripted("cloud", EndpointRole::Cloud),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    External,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "external" => Ok(BackendKind::External),
            other => Err(format!("unknown backend `{other}` (expected mock or external)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Synthesis {
    pub backend: BackendKind,
    pub constraints: SynthesisConstraints,
    pub external: Option<ExternalConfig>,
}

impl Default for Synthesis {
    fn default() -> Self {
        Synthesis {
            backend: BackendKind::Mock,
            constraints: SynthesisConstraints::default(),
            external: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    /// Logical when both endpoints are scripted.
    #[default]
    Auto,
    System,
    Logical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub attribute: Attribute,
    pub k: usize,
    /// Extraction seeds; the root seed when empty.
    pub seeds: Vec<u64>,
    pub ks: Vec<usize>,
    pub retries: u32,
    pub prompt_style: PromptStyle,
    pub workers: usize,
    pub clock: ClockMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            attribute: Attribute::Power,
            k: DEFAULT_K,
            seeds: Vec::new(),
            ks: SWEEP_KS.to_vec(),
            retries: rtlsafe_core::optimizer::DEFAULT_RETRIES,
            prompt_style: PromptStyle::Corrected,
            workers: 4,
            clock: ClockMode::Auto,
        }
    }
}

/// Keys that would carry a credential. Credentials come from the
/// environment only; `api_key_env` names the variable.
const SECRET_KEYS: &[&str] = &["api_key", "apikey", "token", "secret", "password", "authorization"];

fn reject_secrets(value: &toml::Value, path: &str) -> Result<()> {
    if let toml::Value::Table(t) = value {
        for (k, v) in t {
            let lower = k.to_ascii_lowercase();
            if SECRET_KEYS.contains(&lower.as_str()) {
                bail!("`{path}{k}` looks like a credential; set `api_key_env` to the name of an environment variable instead");
            }
            reject_secrets(v, &format!("{path}{k}."))?;
        }
    }
    Ok(())
}

impl RunConfig {
    /// Relative paths in the file resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in config {}", path.display()))?;
        if let Some(base) = path.parent().filter(|b| !b.as_os_str().is_empty()) {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut Option<PathBuf>| {
            if let Some(v) = p.as_mut().filter(|v| v.is_relative()) {
                *v = base.join(&*v);
            }
        };
        join(&mut self.paths.proprietary);
        join(&mut self.paths.draft);
        join(&mut self.paths.targets);
        join(&mut self.paths.out);
        join(&mut self.endpoints.local.script);
        join(&mut self.endpoints.cloud.script);
    }

    pub fn parse(text: &str) -> Result<Self> {
        let value: toml::Value = toml::from_str(text)?;
        reject_secrets(&value, "")?;
        let mut cfg: RunConfig = value.try_into()?;
        for (spec, role, name) in [
            (&mut cfg.endpoints.local, EndpointRole::Local, "local"),
            (&mut cfg.endpoints.cloud, EndpointRole::Cloud, "cloud"),
        ] {
            spec.endpoint.role = role;
            if spec.endpoint.name == EndpointConfig::default().name {
                spec.endpoint.name = name.into();
            }
        }
        Ok(cfg)
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.experiment.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.experiment.seeds.clone()
        }
    }

    pub fn all_scripted(&self) -> bool {
        self.endpoints.local.kind() == TransportKind::Scripted && self.endpoints.cloud.kind() == TransportKind::Scripted
    }

    /// Hash of the resolved config. Filesystem locations are left out so
    /// the same inputs fingerprint the same on any host; script files count
    /// by content.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.paths = Paths::default();
        for spec in [&mut c.endpoints.local, &mut c.endpoints.cloud] {
            if let Some(p) = spec.script.take() {
                let h = std::fs::read(&p).map(|b| short_hash(&b)).unwrap_or_else(|_| "unreadable".into());
                spec.script = Some(PathBuf::from(format!("content:{h}")));
            }
        }
        let json = serde_json::to_string(&c).expect("config serializes");
        format!("cfg-{}", short_hash(json.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pairing.threshold) {
            bail!("pairing.threshold must be in [0, 1], got {}", self.pairing.threshold);
        }
        self.guard.validate().map_err(|e| anyhow::anyhow!("guard: {e}"))?;
        self.synthesis
            .constraints
            .validate()
            .map_err(|e| anyhow::anyhow!("synthesis.constraints: {e}"))?;
        if self.synthesis.backend == BackendKind::External && self.synthesis.external.is_none() {
            bail!("synthesis.backend = \"external\" needs a [synthesis.external] table");
        }
        if self.experiment.k == 0 || self.experiment.ks.contains(&0) {
            bail!("K must be at least 1");
        }
        if let (Some(p), Some(out)) = (&self.paths.proprietary, &self.paths.out) {
            check_separate(p, out)?;
        }
        Ok(())
    }
}

fn normalize(p: &Path) -> PathBuf {
    if let Ok(c) = std::fs::canonicalize(p) {
        return c;
    }
    let abs = if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir().unwrap_or_default().join(p)
    };
    let mut out = PathBuf::new();
    for c in abs.components() {
        match c {
            Component::ParentDir => {
                out.pop();
            }
            Component::CurDir => {}
            other => out.push(other),
        }
    }
    out
}

/// Outputs must not be written into, or contain, the proprietary tree.
pub fn check_separate(proprietary: &Path, out: &Path) -> Result<()> {
    let p = normalize(proprietary);
    let o = normalize(out);
    if o.starts_with(&p) || p.starts_with(&o) {
        bail!(
            "output directory {} overlaps the proprietary root {}",
            out.display(),
            proprietary.display()
        );
    }
    Ok(())
}
