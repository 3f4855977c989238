// SPDX-License-Identifier: Apache-2.0

//! Keyword heuristics mapping a module to a functional category.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::parse::ModuleHeader;

/// Functional category of a module.
///
/// `Other` carries a non-empty subtype (the module name when nothing
/// matched). `Custom` holds labels added through classifier configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DesignCategory {
    Multiplier,
    Fifo,
    Alu,
    Counter,
    ShiftRotate,
    Adder,
    Synchronization,
    Encoder,
    Custom(String),
    Other(String),
}

impl DesignCategory {
    pub const BUILTIN: [DesignCategory; 8] = [
        DesignCategory::Multiplier,
        DesignCategory::Fifo,
        DesignCategory::Alu,
        DesignCategory::Counter,
        DesignCategory::ShiftRotate,
        DesignCategory::Adder,
        DesignCategory::Synchronization,
        DesignCategory::Encoder,
    ];

    pub fn other(subtype: impl Into<String>) -> Self {
        let s = subtype.into();
        DesignCategory::Other(if s.is_empty() { "unnamed".into() } else { s })
    }
}

impl fmt::Display for DesignCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignCategory::Multiplier => f.write_str("multiplier"),
            DesignCategory::Fifo => f.write_str("fifo"),
            DesignCategory::Alu => f.write_str("alu"),
            DesignCategory::Counter => f.write_str("counter"),
            DesignCategory::ShiftRotate => f.write_str("shift_rotate"),
            DesignCategory::Adder => f.write_str("adder"),
            DesignCategory::Synchronization => f.write_str("synchronization"),
            DesignCategory::Encoder => f.write_str("encoder"),
            DesignCategory::Custom(s) => f.write_str(s),
            DesignCategory::Other(s) => write!(f, "other:{s}"),
        }
    }
}

impl FromStr for DesignCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err("empty category label".into());
        }
        if let Some(sub) = s.strip_prefix("other:") {
            if sub.is_empty() {
                return Err("`other` category requires a subtype".into());
            }
            return Ok(DesignCategory::Other(sub.to_string()));
        }
        Ok(match s {
            "multiplier" => DesignCategory::Multiplier,
            "fifo" => DesignCategory::Fifo,
            "alu" => DesignCategory::Alu,
            "counter" => DesignCategory::Counter,
            "shift_rotate" => DesignCategory::ShiftRotate,
            "adder" => DesignCategory::Adder,
            "synchronization" => DesignCategory::Synchronization,
            "encoder" => DesignCategory::Encoder,
            "other" => return Err("`other` category requires a subtype".into()),
            custom => DesignCategory::Custom(custom.to_string()),
        })
    }
}

impl Serialize for DesignCategory {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DesignCategory {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRule {
    pub category: DesignCategory,
    pub keywords: Vec<String>,
}

/// Ordered keyword rules. Earlier rules win ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub rules: Vec<CategoryRule>,
}

const NAME_WEIGHT: u32 = 4;
const PORT_WEIGHT: u32 = 1;
const INSTRUCTION_WEIGHT: u32 = 2;

impl Default for Classifier {
    fn default() -> Self {
        let rule = |category, kws: &[&str]| CategoryRule {
            category,
            keywords: kws.iter().map(|s| s.to_string()).collect(),
        };
        Classifier {
            rules: vec![
                rule(
                    DesignCategory::Multiplier,
                    &["multiplier", "mult", "mul", "booth", "wallace", "product", "dadda"],
                ),
                rule(DesignCategory::Fifo, &["fifo", "queue", "lifo"]),
                rule(
                    DesignCategory::Alu,
                    &["alu", "calculator", "calc", "arithmetic", "opcode"],
                ),
                rule(DesignCategory::Counter, &["counter", "count", "cnt", "timer", "prescaler"]),
                rule(
                    DesignCategory::ShiftRotate,
                    &["shift", "shifter", "rotate", "rotator", "barrel", "rotl", "rotr", "lfsr"],
                ),
                rule(
                    DesignCategory::Adder,
                    &["adder", "add", "carry", "cla", "rca", "csa", "sum", "subtractor"],
                ),
                rule(
                    DesignCategory::Synchronization,
                    &["sync", "synchronizer", "synchroniser", "cdc", "metastability", "handshake", "debounce"],
                ),
                rule(
                    DesignCategory::Encoder,
                    &["encoder", "decoder", "encode", "decode", "priority", "onehot", "gray", "bcd"],
                ),
            ],
        }
    }
}

/// Splits an identifier or phrase into lowercase word pieces at
/// non-alphanumerics, camelCase humps and letter/digit boundaries.
pub fn word_pieces(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split(|c: char| !c.is_ascii_alphanumeric()) {
        let mut cur = String::new();
        let mut prev: Option<char> = None;
        for c in chunk.chars() {
            let boundary = match prev {
                Some(p) => {
                    (p.is_ascii_lowercase() && c.is_ascii_uppercase())
                        || (p.is_ascii_alphabetic() != c.is_ascii_alphabetic())
                }
                None => false,
            };
            if boundary && !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            cur.push(c.to_ascii_lowercase());
            prev = Some(c);
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

/// A keyword hits a word piece on equality, or as a prefix when the keyword
/// has at least four characters (`shift` hits `shifter`, `add` does not hit
/// `address`).
fn hits(keyword: &str, piece: &str) -> bool {
    piece == keyword || (keyword.len() >= 4 && piece.starts_with(keyword))
}

impl Classifier {
    pub fn classify(
        &self,
        header: &ModuleHeader,
        instruction: &str,
    ) -> (DesignCategory, Option<u32>) {
        let name = word_pieces(&header.name);
        let ports: Vec<String> = header.ports.iter().flat_map(|p| word_pieces(&p.name)).collect();
        let instr = word_pieces(instruction);

        let count = |kws: &[String], pieces: &[String]| -> u32 {
            pieces
                .iter()
                .filter(|p| kws.iter().any(|k| hits(k, p)))
                .count() as u32
        };

        let mut best: Option<(u32, &DesignCategory)> = None;
        for rule in &self.rules {
            let score = NAME_WEIGHT * count(&rule.keywords, &name)
                + PORT_WEIGHT * count(&rule.keywords, &ports)
                + INSTRUCTION_WEIGHT * count(&rule.keywords, &instr);
            if score > 0 && best.is_none_or(|(b, _)| score > b) {
                best = Some((score, &rule.category));
            }
        }
        let category = best
            .map(|(_, c)| c.clone())
            .unwrap_or_else(|| DesignCategory::other(header.name.clone()));
        (category, header.widest_port())
    }
}
