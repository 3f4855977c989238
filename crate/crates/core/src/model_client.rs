// SPDX-License-Identifier: Apache-2.0

//! Text-generation endpoints.
//!
//! An endpoint has a *role* (Local or Cloud) and a *transport* (HTTP or
//! scripted). The role decides the trust rules: Local endpoints must live on
//! loopback or private addresses, and Cloud endpoints refuse any prompt that
//! lacks a matching [`Clearance`] from the leakage guard. Scripted transports
//! follow the same rules, so tests exercise the real audit path.
//!
//! HTTP endpoints speak the common chat-completions shape:
//! `POST {base_url}/chat/completions` with `model`, `messages`,
//! `temperature`, `max_tokens` and optional `seed`.

use std::collections::{BTreeMap, VecDeque};
use std::net::IpAddr;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::hashing::short_hash;
use crate::leakage_guard::Clearance;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("endpoint {endpoint} unreachable after {attempts} attempt(s): {detail}")]
    EndpointUnreachable {
        endpoint: String,
        attempts: u32,
        detail: String,
    },
    #[error("endpoint {endpoint} rejected the request: {detail}")]
    Rejected { endpoint: String, detail: String },
    #[error("cloud prompt has no matching audit clearance")]
    AuditNotCleared,
    #[error("invalid endpoint configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointRole {
    Local,
    Cloud,
}

impl EndpointRole {
    pub fn default_temperature(self) -> f64 {
        match self {
            EndpointRole::Local => 0.7,
            EndpointRole::Cloud => 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub name: String,
    pub role: EndpointRole,
    /// Unset for scripted endpoints.
    pub base_url: Option<String>,
    pub model: String,
    /// Defaults by role when unset.
    pub temperature: Option<f64>,
    pub max_tokens: u32,
    pub seed: Option<u64>,
    pub system_prompt: Option<String>,
    pub max_in_flight: usize,
    pub max_attempts: u32,
    pub backoff_ms: u64,
    pub timeout_s: u64,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub allow_remote_local: bool,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            name: "endpoint".into(),
            role: EndpointRole::Local,
            base_url: None,
            model: "unnamed".into(),
            temperature: None,
            max_tokens: 2048,
            seed: None,
            system_prompt: None,
            max_in_flight: 4,
            max_attempts: 3,
            backoff_ms: 500,
            timeout_s: 120,
            api_key_env: None,
            allow_remote_local: false,
        }
    }
}

impl EndpointConfig {
    pub fn temperature(&self) -> f64 {
        self.temperature.unwrap_or_else(|| self.role.default_temperature())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub system: Option<String>,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    /// Worth retrying: timeouts, connection failures, 429 and 5xx.
    #[error("transient: {0}")]
    Transient(String),
    #[error("fatal: {0}")]
    Fatal(String),
}

pub trait Transport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError>;

    fn is_scripted(&self) -> bool {
        false
    }
}

/// Lets a caller keep a handle on a transport it hands to a client.
impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        (**self).send(request)
    }

    fn is_scripted(&self) -> bool {
        (**self).is_scripted()
    }
}

pub struct HttpTransport {
    url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(config: &EndpointConfig) -> Result<Self, ClientError> {
        let base = config
            .base_url
            .as_deref()
            .ok_or_else(|| ClientError::Config(format!("endpoint {} has no base_url", config.name)))?;
        let api_key = match &config.api_key_env {
            None => None,
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ClientError::Config(format!("environment variable {var} is not set"))
            })?),
        };
        let agent = ureq::Agent::new_with_config(
            ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs(config.timeout_s)))
                .http_status_as_error(false)
                .build(),
        );
        Ok(HttpTransport {
            url: format!("{}/chat/completions", base.trim_end_matches('/')),
            api_key,
            agent,
        })
    }
}

impl Transport for HttpTransport {
    fn send(&self, r: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let mut messages = Vec::new();
        if let Some(s) = &r.system {
            messages.push(serde_json::json!({"role": "system", "content": s}));
        }
        messages.push(serde_json::json!({"role": "user", "content": r.user}));
        let mut body = serde_json::json!({
            "model": r.model,
            "messages": messages,
            "temperature": r.temperature,
            "max_tokens": r.max_tokens,
        });
        if let Some(seed) = r.seed {
            body["seed"] = seed.into();
        }
        let mut req = self.agent.post(&self.url);
        if let Some(k) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap_or_default();
        if status == 429 || status >= 500 {
            return Err(TransportError::Transient(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(TransportError::Fatal(format!("HTTP {status}: {text}")));
        }
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| TransportError::Fatal(format!("bad JSON: {e}")))?;
        let content = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| TransportError::Fatal("response has no choices[0].message.content".into()))?;
        Ok(ChatResponse {
            text: content.to_string(),
            prompt_tokens: v["usage"]["prompt_tokens"].as_u64(),
            completion_tokens: v["usage"]["completion_tokens"].as_u64(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedReply {
    Text(String),
    Transient(String),
    Fatal(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedMatch {
    /// `short_hash` of the full user prompt.
    PromptHash(String),
    Contains(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedRule {
    pub when: ScriptedMatch,
    pub reply: ScriptedReply,
}

/// Serializable form of a scripted endpoint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default)]
    pub rules: Vec<ScriptedRule>,
    #[serde(default)]
    pub default: Option<String>,
}

type ReplyFn = dyn Fn(&str) -> Option<String> + Send + Sync;

/// Deterministic canned replies. Resolution order: queued replies, the
/// responder function, rules in order, then the default.
#[derive(Default)]
pub struct ScriptedTransport {
    queue: Mutex<VecDeque<ScriptedReply>>,
    responder: Option<Arc<ReplyFn>>,
    script: Script,
    calls: Mutex<u64>,
}

impl ScriptedTransport {
    pub fn new(script: Script) -> Self {
        ScriptedTransport {
            script,
            ..Default::default()
        }
    }

    pub fn from_fn(f: impl Fn(&str) -> Option<String> + Send + Sync + 'static) -> Self {
        ScriptedTransport {
            responder: Some(Arc::new(f)),
            ..Default::default()
        }
    }

    pub fn then_reply(self, reply: ScriptedReply) -> Self {
        self.queue.lock().unwrap().push_back(reply);
        self
    }

    pub fn calls(&self) -> u64 {
        *self.calls.lock().unwrap()
    }

    fn resolve(&self, prompt: &str) -> ScriptedReply {
        if let Some(r) = self.queue.lock().unwrap().pop_front() {
            return r;
        }
        if let Some(text) = self.responder.as_ref().and_then(|f| f(prompt)) {
            return ScriptedReply::Text(text);
        }
        let hash = short_hash(prompt.as_bytes());
        for rule in &self.script.rules {
            let hit = match &rule.when {
                ScriptedMatch::PromptHash(h) => *h == hash,
                ScriptedMatch::Contains(s) => prompt.contains(s.as_str()),
            };
            if hit {
                return rule.reply.clone();
            }
        }
        match &self.script.default {
            Some(d) => ScriptedReply::Text(d.clone()),
            None => ScriptedReply::Fatal(format!("no scripted reply for prompt {hash}")),
        }
    }
}

impl Transport for ScriptedTransport {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        *self.calls.lock().unwrap() += 1;
        match self.resolve(&request.user) {
            ScriptedReply::Text(text) => Ok(ChatResponse {
                text,
                ..Default::default()
            }),
            ScriptedReply::Transient(e) => Err(TransportError::Transient(e)),
            ScriptedReply::Fatal(e) => Err(TransportError::Fatal(e)),
        }
    }

    fn is_scripted(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub endpoint: String,
    pub role: EndpointRole,
    pub model: String,
    pub context: String,
    pub prompt_hash: String,
    pub prompt: String,
    pub response: String,
    pub latency_ms: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// True when the endpoint did not report usage and counts are
    /// whitespace-token estimates.
    pub tokens_estimated: bool,
    pub timestamp: String,
    pub retries: u32,
    /// Audit verdict that cleared the prompt. Always set for Cloud.
    pub clearance_id: Option<String>,
}

/// Loopback and private-network hosts. Domain names other than
/// `localhost` count as remote, since resolving them proves nothing.
pub fn is_local_address(url: &str) -> bool {
    let Ok(u) = url::Url::parse(url) else {
        return false;
    };
    match u.host() {
        Some(url::Host::Domain(d)) => d.eq_ignore_ascii_case("localhost"),
        Some(url::Host::Ipv4(ip)) => is_local_ip(IpAddr::V4(ip)),
        Some(url::Host::Ipv6(ip)) => is_local_ip(IpAddr::V6(ip)),
        None => false,
    }
}

fn is_local_ip(ip: IpAddr) -> bool {
    match ip {
        IpAddr::V4(v) => v.is_loopback() || v.is_private() || v.is_link_local(),
        IpAddr::V6(v) => {
            let seg0 = v.segments()[0];
            v.is_loopback() || (seg0 & 0xfe00) == 0xfc00 || (seg0 & 0xffc0) == 0xfe80
        }
    }
}

struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut n = self.free.lock().unwrap();
        while *n == 0 {
            n = self.cv.wait(n).unwrap();
        }
        *n -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct ModelClient {
    config: EndpointConfig,
    transport: Box<dyn Transport>,
    slots: Slots,
    clock: Clock,
}

impl ModelClient {
    pub fn new(config: EndpointConfig, transport: Box<dyn Transport>, clock: Clock) -> Result<Self, ClientError> {
        if config.max_in_flight == 0 || config.max_attempts == 0 {
            return Err(ClientError::Config("max_in_flight and max_attempts must be at least 1".into()));
        }
        if config.role == EndpointRole::Local && !transport.is_scripted() && !config.allow_remote_local {
            let url = config.base_url.as_deref().unwrap_or("");
            if !is_local_address(url) {
                return Err(ClientError::Config(format!(
                    "local endpoint {} points at non-local address `{url}` (pass --allow-remote-local to override)",
                    config.name
                )));
            }
        }
        Ok(ModelClient {
            slots: Slots {
                free: Mutex::new(config.max_in_flight),
                cv: Condvar::new(),
            },
            config,
            transport,
            clock,
        })
    }

    /// HTTP client for `config`.
    pub fn http(config: EndpointConfig, clock: Clock) -> Result<Self, ClientError> {
        let t = HttpTransport::new(&config)?;
        Self::new(config, Box::new(t), clock)
    }

    pub fn scripted(config: EndpointConfig, transport: ScriptedTransport) -> Result<Self, ClientError> {
        Self::new(config, Box::new(transport), Clock::Logical)
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    pub fn role(&self) -> EndpointRole {
        self.config.role
    }

    /// Identity string recorded in artifacts.
    pub fn identity(&self) -> String {
        format!("{}:{}", self.config.name, self.config.model)
    }

    /// Sends `prompt`. Cloud endpoints require a clearance covering exactly
    /// this prompt; the check happens before any I/O.
    pub fn generate(
        &self,
        prompt: &str,
        clearance: Option<&Clearance>,
        context: &str,
    ) -> Result<GenerationRecord, ClientError> {
        if self.config.role == EndpointRole::Cloud {
            match clearance {
                Some(c) if c.covers(prompt) => {}
                _ => return Err(ClientError::AuditNotCleared),
            }
        }
        let request = ChatRequest {
            model: self.config.model.clone(),
            system: self.config.system_prompt.clone(),
            user: prompt.to_string(),
            temperature: self.config.temperature(),
            max_tokens: self.config.max_tokens,
            seed: self.config.seed,
        };

        let _slot = self.slots.acquire();
        let watch = self.clock.start();
        let mut last = String::new();
        for attempt in 0..self.config.max_attempts {
            if attempt > 0 && self.clock == Clock::System {
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms << (attempt - 1)));
            }
            match self.transport.send(&request) {
                Ok(resp) => {
                    let estimated = resp.prompt_tokens.is_none() || resp.completion_tokens.is_none();
                    let words = |s: &str| s.split_whitespace().count() as u64;
                    return Ok(GenerationRecord {
                        endpoint: self.config.name.clone(),
                        role: self.config.role,
                        model: self.config.model.clone(),
                        context: context.to_string(),
                        prompt_hash: short_hash(prompt.as_bytes()),
                        prompt: prompt.to_string(),
                        prompt_tokens: resp.prompt_tokens.unwrap_or_else(|| words(prompt)),
                        completion_tokens: resp.completion_tokens.unwrap_or_else(|| words(&resp.text)),
                        response: resp.text,
                        latency_ms: watch.elapsed_ms(),
                        tokens_estimated: estimated,
                        timestamp: self.clock.timestamp(),
                        retries: attempt,
                        clearance_id: clearance.map(|c| c.verdict_id().to_string()),
                    });
                }
                Err(TransportError::Transient(e)) => {
                    log::debug!("{} attempt {} failed: {e}", self.config.name, attempt + 1);
                    last = e;
                }
                Err(TransportError::Fatal(e)) => {
                    return Err(ClientError::Rejected {
                        endpoint: self.config.name.clone(),
                        detail: e,
                    })
                }
            }
        }
        Err(ClientError::EndpointUnreachable {
            endpoint: self.config.name.clone(),
            attempts: self.config.max_attempts,
            detail: last,
        })
    }
}

/// Script answering each prompt hash with its text.
pub fn script_by_hash(entries: BTreeMap<String, String>) -> Script {
    Script {
        rules: entries
            .into_iter()
            .map(|(h, text)| ScriptedRule {
                when: ScriptedMatch::PromptHash(h),
                reply: ScriptedReply::Text(text),
            })
            .collect(),
        default: None,
    }
}
