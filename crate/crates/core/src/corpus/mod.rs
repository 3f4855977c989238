// SPDX-License-Identifier: Apache-2.0

//! Verilog modules and the codebases that hold them.
//!
//! A codebase is one of three logically separated stores: proprietary code
//! (never leaves the premises), shareable drafts, and targets to optimize.
//! Ingest does no network I/O and parsing is token-level only.

mod classify;
mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{word_pieces, CategoryRule, Classifier, DesignCategory};
pub use parse::{
    extract_module_region, module_regions, parse_header, Direction, ModuleHeader, ModuleRegion,
    Port,
};

use crate::hashing::sha256_hex;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no `module ... endmodule` region found")]
    NotAModule,
    #[error("expected exactly one module, found {0}")]
    MultipleModules(usize),
    #[error("malformed module header: {0}")]
    MalformedHeader(String),
    #[error("source is empty")]
    EmptySource,
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid dataset line {line}: {detail}")]
    Dataset { line: usize, detail: String },
}

/// Content hash of a module's whitespace-stripped source.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModuleId(pub String);

impl ModuleId {
    pub fn of_source(source: &str) -> Self {
        let normalized: String = source.chars().filter(|c| !c.is_whitespace()).collect();
        ModuleId(format!("m{}", &sha256_hex(normalized.as_bytes())[..16]))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodebaseKind {
    Proprietary,
    Draft,
    Target,
}

impl fmt::Display for CodebaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodebaseKind::Proprietary => "proprietary",
            CodebaseKind::Draft => "draft",
            CodebaseKind::Target => "target",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerilogModule {
    pub id: ModuleId,
    pub name: String,
    pub source: String,
    #[serde(default)]
    pub instruction: String,
    pub category: DesignCategory,
    pub bit_width: Option<u32>,
    pub codebase: CodebaseKind,
}

impl VerilogModule {
    /// Parses and classifies a single-module source unit.
    pub fn parse(
        source: &str,
        instruction: &str,
        codebase: CodebaseKind,
        classifier: &Classifier,
    ) -> Result<Self, CorpusError> {
        if source.trim().is_empty() {
            return Err(CorpusError::EmptySource);
        }
        match module_regions(source).len() {
            0 => return Err(CorpusError::NotAModule),
            1 => {}
            n => return Err(CorpusError::MultipleModules(n)),
        }
        let header = parse_header(source)?;
        let (category, bit_width) = classifier.classify(&header, instruction);
        Ok(VerilogModule {
            id: ModuleId::of_source(source),
            name: header.name,
            source: source.to_string(),
            instruction: instruction.to_string(),
            category,
            bit_width,
            codebase,
        })
    }

    pub fn header(&self) -> Result<ModuleHeader, CorpusError> {
        parse_header(&self.source)
    }

    /// Pairing group: modules are only compared within the same group.
    pub fn group(&self) -> (&DesignCategory, Option<u32>) {
        (&self.category, self.bit_width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IngestStatus {
    Ok,
    Skipped,
}

/// One line of the ingest manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub id: Option<ModuleId>,
    pub status: IngestStatus,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebase {
    pub kind: CodebaseKind,
    pub root: PathBuf,
    pub modules: BTreeMap<ModuleId, VerilogModule>,
}

impl Codebase {
    pub fn new(kind: CodebaseKind, root: impl Into<PathBuf>) -> Self {
        Codebase {
            kind,
            root: root.into(),
            modules: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    pub fn get(&self, id: &ModuleId) -> Option<&VerilogModule> {
        self.modules.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &VerilogModule> {
        self.modules.values()
    }

    /// Inserts a module; returns false if the id is already present.
    pub fn insert(&mut self, module: VerilogModule) -> bool {
        if self.modules.contains_key(&module.id) {
            return false;
        }
        self.modules.insert(module.id.clone(), module);
        true
    }

    /// Writes every module as `<name>.<id>.v` (plus an instruction sidecar
    /// `<name>.<id>.txt` when present) under `dir`.
    pub fn emit(&self, dir: &Path) -> Result<(), CorpusError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CorpusError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        for m in self.modules.values() {
            let stem = format!("{}.{}", m.name, m.id);
            let file = dir.join(format!("{stem}.v"));
            fs::write(&file, &m.source).map_err(io(&file))?;
            if !m.instruction.is_empty() {
                let side = dir.join(format!("{stem}.txt"));
                fs::write(&side, &m.instruction).map_err(io(&side))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub codebase: Codebase,
    pub manifest: Vec<ManifestEntry>,
}

impl Ingested {
    pub fn skipped(&self) -> usize {
        self.manifest
            .iter()
            .filter(|e| e.status == IngestStatus::Skipped)
            .count()
    }

    pub fn write_manifest(&self, mut w: impl Write) -> std::io::Result<()> {
        for e in &self.manifest {
            writeln!(w, "{}", serde_json::to_string(e).expect("manifest entry serializes"))?;
        }
        Ok(())
    }
}

fn is_verilog(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("v") | Some("sv")
    )
}

/// Ingests a directory tree of `.v`/`.sv` files, or a dataset JSONL file.
///
/// An unreadable root is fatal. Files that do not yield a single parseable
/// module are recorded as skips in the manifest. An instruction for
/// `foo.v` is read from a sibling `foo.txt` when one exists.
pub fn ingest(
    root: &Path,
    kind: CodebaseKind,
    classifier: &Classifier,
) -> Result<Ingested, CorpusError> {
    let meta = fs::metadata(root).map_err(|source| CorpusError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    if meta.is_file() && root.extension().and_then(|e| e.to_str()) == Some("jsonl") {
        return crate::evaluation::ingest_dataset(root, kind, classifier);
    }

    let mut files: Vec<PathBuf> = Vec::new();
    if meta.is_file() {
        files.push(root.to_path_buf());
    } else {
        for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| CorpusError::Io {
                path: e.path().unwrap_or(root).to_path_buf(),
                source: e
                    .into_io_error()
                    .unwrap_or_else(|| std::io::Error::other("walk error")),
            })?;
            if entry.file_type().is_file() && is_verilog(entry.path()) {
                files.push(entry.into_path());
            }
        }
    }

    let mut codebase = Codebase::new(kind, root);
    let mut manifest = Vec::with_capacity(files.len());
    let mut first_path: BTreeMap<ModuleId, String> = BTreeMap::new();
    for path in files {
        let display = path
            .strip_prefix(root)
            .ok()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(&path)
            .display()
            .to_string();
        let skip = |reason: String| ManifestEntry {
            path: display.clone(),
            id: None,
            status: IngestStatus::Skipped,
            reason: Some(reason),
        };
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) => {
                manifest.push(skip(format!("unreadable: {e}")));
                continue;
            }
        };
        let Ok(source) = String::from_utf8(bytes) else {
            manifest.push(skip("not valid UTF-8".into()));
            continue;
        };
        let instruction = fs::read_to_string(path.with_extension("txt")).unwrap_or_default();
        match VerilogModule::parse(&source, instruction.trim(), kind, classifier) {
            Ok(m) => {
                if let Some(prev) = first_path.get(&m.id) {
                    manifest.push(ManifestEntry {
                        id: Some(m.id.clone()),
                        ..skip(format!("duplicate of {prev}"))
                    });
                    continue;
                }
                first_path.insert(m.id.clone(), display.clone());
                manifest.push(ManifestEntry {
                    path: display,
                    id: Some(m.id.clone()),
                    status: IngestStatus::Ok,
                    reason: None,
                });
                codebase.insert(m);
            }
            Err(e) => manifest.push(skip(e.to_string())),
        }
    }
    Ok(Ingested { codebase, manifest })
}
