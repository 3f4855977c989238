// SPDX-License-Identifier: Apache-2.0

//! Token-level structural checks used by the mock backend.

use super::Validation;
use crate::corpus::parse_header;
use crate::lexer::{lex, TokenKind};

/// Constructs no synthesis flow accepts.
const UNSYNTHESIZABLE_KEYWORDS: &[&str] = &["forever", "wait", "fork", "force", "release", "deassign"];

/// System calls that are elaborated at compile time and therefore fine.
const ELABORATION_SYSTEM_CALLS: &[&str] = &[
    "$clog2", "$signed", "$unsigned", "$bits", "$readmemh", "$readmemb", "$size", "$high", "$low",
];

fn closer_for(open: &str) -> Option<&'static str> {
    Some(match open {
        "module" | "macromodule" => "endmodule",
        "begin" => "end",
        "case" | "casex" | "casez" => "endcase",
        "function" => "endfunction",
        "task" => "endtask",
        "generate" => "endgenerate",
        "specify" => "endspecify",
        _ => return None,
    })
}

fn is_closer(word: &str) -> bool {
    matches!(
        word,
        "endmodule" | "end" | "endcase" | "endfunction" | "endtask" | "endgenerate" | "endspecify"
    )
}

/// Balanced blocks and brackets, a single module, a parseable header, and
/// no simulation-only constructs.
pub fn check_structure(source: &str) -> Validation {
    let toks = lex(source);
    let mut blocks: Vec<&str> = Vec::new();
    let mut brackets: Vec<&str> = Vec::new();
    let mut modules = 0usize;
    let mut notes = Vec::new();

    for (k, t) in toks.iter().enumerate() {
        match t.kind {
            TokenKind::Keyword => {
                let w = t.text;
                if w == "module" || w == "macromodule" {
                    modules += 1;
                    if !blocks.is_empty() {
                        return Validation::SyntaxError(format!(
                            "`{w}` nested inside `{}`",
                            blocks.last().unwrap()
                        ));
                    }
                }
                if UNSYNTHESIZABLE_KEYWORDS.contains(&w) {
                    return Validation::Unsynthesizable(format!("`{w}` is simulation-only"));
                }
                if w == "initial" {
                    notes.push("initial block ignored by synthesis".to_string());
                }
                if w == "real" || w == "realtime" {
                    return Validation::Unsynthesizable(format!("`{w}` type"));
                }
                if let Some(close) = closer_for(w) {
                    blocks.push(close);
                } else if is_closer(w) {
                    match blocks.pop() {
                        Some(expected) if expected == w => {}
                        Some(expected) => {
                            return Validation::SyntaxError(format!(
                                "found `{w}` where `{expected}` was expected"
                            ))
                        }
                        None => return Validation::SyntaxError(format!("unmatched `{w}`")),
                    }
                }
            }
            TokenKind::System => {
                if !ELABORATION_SYSTEM_CALLS.contains(&t.text) {
                    return Validation::Unsynthesizable(format!("system task `{}`", t.text));
                }
            }
            TokenKind::Op => match t.text {
                "(" | "[" | "{" => brackets.push(t.text),
                ")" | "]" | "}" => {
                    let want = match t.text {
                        ")" => "(",
                        "]" => "[",
                        _ => "{",
                    };
                    if brackets.pop() != Some(want) {
                        return Validation::SyntaxError(format!("unbalanced `{}`", t.text));
                    }
                }
                "#" if !matches!(toks.get(k + 1), Some(n) if n.is("(")) => {
                    // `#5` delay outside a parameter list.
                    if blocks.len() > 1 {
                        notes.push("delay control ignored by synthesis".to_string());
                    }
                }
                _ => {}
            },
            _ => {}
        }
    }

    if modules == 0 {
        return Validation::SyntaxError("no module declaration".into());
    }
    if modules > 1 {
        return Validation::SyntaxError(format!("{modules} module declarations"));
    }
    if let Some(open) = blocks.last() {
        return Validation::SyntaxError(format!("missing `{open}`"));
    }
    if let Some(b) = brackets.last() {
        return Validation::SyntaxError(format!("unclosed `{b}`"));
    }
    if let Err(e) = parse_header(source) {
        return Validation::SyntaxError(e.to_string());
    }
    Validation::Ok(notes)
}
