// SPDX-License-Identifier: Apache-2.0

//! Adapter for command-line synthesis flows.
//!
//! Each call gets a fresh run directory holding `design.v`,
//! `constraints.json` and an empty `reports/` directory. Command templates
//! are run with `sh -c` after placeholder substitution:
//!
//! | placeholder          | value                                   |
//! |----------------------|-----------------------------------------|
//! | `{source_file}`      | path to `design.v`                      |
//! | `{constraints_file}` | path to `constraints.json`              |
//! | `{report_dir}`       | path to `reports/`                      |
//! | `{top}`              | module name                             |
//! | `{period_ns}`        | clock period                            |
//! | `{frequency_mhz}`    | target frequency                        |
//! | `{technology}`       | technology label                        |
//! | `{tool_home}`        | value of the configured env var         |
//!
//! Path values are single-quoted. Metrics are read from `report_file` (or
//! stdout when unset) with regexes that carry `area`, `power` and `delay`
//! named groups, then converted from the declared units.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{
    Capabilities, PpaMetrics, SynthesisBackend, SynthesisConstraints, SynthesisError, Validation,
};
use crate::corpus::VerilogModule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportUnits {
    /// `um2`, `nm2` or `mm2`.
    pub area: String,
    /// `W`, `mW`, `uW` or `nW`.
    pub power: String,
    /// `s`, `us`, `ns` or `ps`.
    pub delay: String,
}

impl Default for ReportUnits {
    fn default() -> Self {
        ReportUnits {
            area: "um2".into(),
            power: "uW".into(),
            delay: "ps".into(),
        }
    }
}

impl ReportUnits {
    /// Multipliers into µm², µW and ps.
    pub fn factors(&self) -> Result<(f64, f64, f64), SynthesisError> {
        let area = match self.area.as_str() {
            "um2" | "um^2" | "µm²" => 1.0,
            "nm2" | "nm^2" => 1e-6,
            "mm2" | "mm^2" => 1e6,
            u => return Err(SynthesisError::Config(format!("unknown area unit `{u}`"))),
        };
        let power = match self.power.as_str() {
            "W" => 1e6,
            "mW" => 1e3,
            "uW" | "µW" => 1.0,
            "nW" => 1e-3,
            u => return Err(SynthesisError::Config(format!("unknown power unit `{u}`"))),
        };
        let delay = match self.delay.as_str() {
            "s" => 1e12,
            "us" | "µs" => 1e6,
            "ns" => 1e3,
            "ps" => 1.0,
            u => return Err(SynthesisError::Config(format!("unknown delay unit `{u}`"))),
        };
        Ok((area, power, delay))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExternalConfig {
    pub id: String,
    /// Exit status 0 means ok. When unset, validation always passes and
    /// failures surface from `measure_command`.
    pub validate_command: Option<String>,
    pub measure_command: String,
    /// Parent of the per-call run directories.
    pub work_dir: PathBuf,
    /// Report path relative to `{report_dir}`; stdout is parsed when unset.
    pub report_file: Option<String>,
    pub report_patterns: Vec<String>,
    pub units: ReportUnits,
    /// Validation output matching this is a syntax error; any other
    /// non-zero exit is reported as unsynthesizable.
    pub syntax_error_pattern: Option<String>,
    pub validate_timeout_s: u64,
    pub measure_timeout_s: u64,
    pub tool_home_env: Option<String>,
    pub max_parallelism: usize,
    pub keep_run_dirs: bool,
}

impl Default for ExternalConfig {
    fn default() -> Self {
        ExternalConfig {
            id: "external".into(),
            validate_command: None,
            measure_command: String::new(),
            work_dir: std::env::temp_dir(),
            report_file: None,
            report_patterns: Vec::new(),
            units: ReportUnits::default(),
            syntax_error_pattern: None,
            validate_timeout_s: 60,
            measure_timeout_s: 600,
            tool_home_env: None,
            max_parallelism: 1,
            keep_run_dirs: false,
        }
    }
}

#[derive(Debug)]
pub struct ExternalBackend {
    config: ExternalConfig,
    patterns: Vec<Regex>,
    syntax_error: Option<Regex>,
    factors: (f64, f64, f64),
}

static RUN_COUNTER: AtomicU64 = AtomicU64::new(0);

struct RunOutput {
    success: bool,
    status: String,
    stdout: String,
    stderr: String,
}

fn shell_quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

impl ExternalBackend {
    pub fn new(config: ExternalConfig) -> Result<Self, SynthesisError> {
        if config.measure_command.trim().is_empty() {
            return Err(SynthesisError::Config("measure_command is empty".into()));
        }
        let patterns = config
            .report_patterns
            .iter()
            .map(|p| Regex::new(p).map_err(|e| SynthesisError::Config(format!("pattern `{p}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        for group in ["area", "power", "delay"] {
            if !patterns.iter().any(|r| r.capture_names().any(|n| n == Some(group))) {
                return Err(SynthesisError::Config(format!(
                    "no report pattern has a `{group}` group"
                )));
            }
        }
        let syntax_error = config
            .syntax_error_pattern
            .as_deref()
            .map(Regex::new)
            .transpose()
            .map_err(|e| SynthesisError::Config(e.to_string()))?;
        let factors = config.units.factors()?;
        Ok(ExternalBackend {
            config,
            patterns,
            syntax_error,
            factors,
        })
    }

    pub fn config(&self) -> &ExternalConfig {
        &self.config
    }

    fn tool_home(&self) -> Result<String, SynthesisError> {
        match &self.config.tool_home_env {
            None => Ok(String::new()),
            Some(var) => std::env::var(var).map_err(|_| {
                SynthesisError::BackendUnavailable(format!("environment variable {var} is not set"))
            }),
        }
    }

    fn prepare(
        &self,
        module: &VerilogModule,
        constraints: &SynthesisConstraints,
    ) -> Result<PathBuf, SynthesisError> {
        let n = RUN_COUNTER.fetch_add(1, Ordering::Relaxed);
        let dir = self
            .config
            .work_dir
            .join(format!("rtlsafe-{}-{}-{n}", std::process::id(), module.id));
        let io = |e: std::io::Error| SynthesisError::BackendUnavailable(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir.join("reports")).map_err(io)?;
        std::fs::write(dir.join("design.v"), &module.source).map_err(io)?;
        let cjson = serde_json::to_string_pretty(constraints).expect("constraints serialize");
        std::fs::write(dir.join("constraints.json"), cjson).map_err(io)?;
        Ok(dir)
    }

    fn render(
        &self,
        template: &str,
        dir: &Path,
        module: &VerilogModule,
        constraints: &SynthesisConstraints,
    ) -> Result<String, SynthesisError> {
        Ok(template
            .replace("{source_file}", &shell_quote(&dir.join("design.v")))
            .replace("{constraints_file}", &shell_quote(&dir.join("constraints.json")))
            .replace("{report_dir}", &shell_quote(&dir.join("reports")))
            .replace("{top}", &module.name)
            .replace("{period_ns}", &constraints.clock_period_ns().to_string())
            .replace("{frequency_mhz}", &constraints.target_frequency_mhz.to_string())
            .replace("{technology}", &constraints.technology)
            .replace("{tool_home}", &self.tool_home()?))
    }

    fn run(&self, cmd: &str, dir: &Path, timeout: Duration) -> Result<RunOutput, SynthesisError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .current_dir(dir)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| SynthesisError::BackendUnavailable(format!("spawn failed: {e}")))?;

        let drain = |mut r: Box<dyn Read + Send>| {
            std::thread::spawn(move || {
                let mut buf = Vec::new();
                let _ = r.read_to_end(&mut buf);
                String::from_utf8_lossy(&buf).into_owned()
            })
        };
        let out = drain(Box::new(child.stdout.take().expect("piped stdout")));
        let err = drain(Box::new(child.stderr.take().expect("piped stderr")));

        let started = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(s)) => break s,
                Ok(None) if started.elapsed() >= timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(SynthesisError::BackendUnavailable(format!(
                        "timed out after {} s: {cmd}",
                        timeout.as_secs_f64()
                    )));
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(10)),
                Err(e) => return Err(SynthesisError::BackendUnavailable(e.to_string())),
            }
        };
        Ok(RunOutput {
            success: status.success(),
            status: status.to_string(),
            stdout: out.join().unwrap_or_default(),
            stderr: err.join().unwrap_or_default(),
        })
    }

    fn cleanup(&self, dir: &Path) {
        if !self.config.keep_run_dirs {
            let _ = std::fs::remove_dir_all(dir);
        }
    }

    fn parse_report(&self, text: &str) -> Result<(f64, f64, f64), SynthesisError> {
        let find = |group: &str| -> Result<f64, SynthesisError> {
            self.patterns
                .iter()
                .filter_map(|r| r.captures(text))
                .find_map(|c| c.name(group).map(|m| m.as_str().to_string()))
                .ok_or_else(|| SynthesisError::MeasurementFailed(format!("no `{group}` in report")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| SynthesisError::MeasurementFailed(format!("bad `{group}` value: {e}")))
        };
        let (fa, fp, fd) = self.factors;
        Ok((find("area")? * fa, find("power")? * fp, find("delay")? * fd))
    }
}

impl SynthesisBackend for ExternalBackend {
    fn id(&self) -> &str {
        &self.config.id
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            validates_syntax: self.config.validate_command.is_some(),
            reports_area: true,
            reports_power: true,
            reports_delay: true,
            check_equivalence: false,
            max_parallelism: self.config.max_parallelism.max(1),
        }
    }

    fn validate(&self, module: &VerilogModule) -> Result<Validation, SynthesisError> {
        let Some(template) = &self.config.validate_command else {
            return Ok(Validation::Ok(Vec::new()));
        };
        let constraints = SynthesisConstraints::default();
        let dir = self.prepare(module, &constraints)?;
        let result = self.render(template, &dir, module, &constraints).and_then(|cmd| {
            self.run(&cmd, &dir, Duration::from_secs(self.config.validate_timeout_s))
        });
        self.cleanup(&dir);
        let out = result?;
        let diagnostics = format!("{}{}", out.stdout, out.stderr).trim().to_string();
        if out.success {
            let notes = if diagnostics.is_empty() { vec![] } else { vec![diagnostics] };
            return Ok(Validation::Ok(notes));
        }
        let detail = if diagnostics.is_empty() { out.status } else { diagnostics };
        match &self.syntax_error {
            Some(r) if r.is_match(&detail) => Ok(Validation::SyntaxError(detail)),
            _ => Ok(Validation::Unsynthesizable(detail)),
        }
    }

    fn measure(
        &self,
        module: &VerilogModule,
        constraints: &SynthesisConstraints,
    ) -> Result<PpaMetrics, SynthesisError> {
        constraints.validate()?;
        let dir = self.prepare(module, constraints)?;
        let result = (|| {
            let cmd = self.render(&self.config.measure_command, &dir, module, constraints)?;
            let out = self.run(&cmd, &dir, Duration::from_secs(self.config.measure_timeout_s))?;
            if !out.success {
                return Err(SynthesisError::MeasurementFailed(format!(
                    "{}: {}",
                    out.status,
                    out.stderr.trim()
                )));
            }
            let text = match &self.config.report_file {
                Some(f) => std::fs::read_to_string(dir.join("reports").join(f)).map_err(|e| {
                    SynthesisError::MeasurementFailed(format!("report {f}: {e}"))
                })?,
                None => out.stdout,
            };
            self.parse_report(&text)
        })();
        self.cleanup(&dir);
        let (area, power, delay) = result?;
        PpaMetrics::new(area, power, delay, self.config.id.clone(), constraints.clone())
    }
}
