// SPDX-License-Identifier: Apache-2.0

//! IP-preserving RTL optimization.
//!
//! A trusted local model distills abstract design principles from pairs of
//! proprietary and draft Verilog implementations. An untrusted cloud model
//! then rewrites target modules using only those principles. Every
//! cloud-bound payload is audited against the proprietary corpus first.

pub mod clock;
pub mod corpus;
pub mod evaluation;
pub mod hashing;
pub mod jsonl;
pub mod leakage_guard;
pub mod lexer;
pub mod model_client;
pub mod optimizer;
pub mod pairing;
pub mod parallel;
pub mod principles;
pub mod synthesis;

pub use corpus::{Codebase, CodebaseKind, DesignCategory, ModuleId, VerilogModule};
pub use synthesis::{Attribute, PpaMetrics, SynthesisBackend, SynthesisConstraints};
