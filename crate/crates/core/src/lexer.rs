// SPDX-License-Identifier: Apache-2.0

//! Token-level Verilog scanner.
//!
//! This is deliberately not a grammar. It recognises comments, identifiers,
//! keywords, numeric and string literals, system tasks, compiler directives
//! and operators, which is enough for module boundary detection, port
//! extraction, similarity scoring and n-gram fingerprinting. Every consumer
//! in the crate goes through [`lex`], so the pairing index and the leakage
//! guard always agree on what a token is.

use std::collections::HashSet;
use std::sync::LazyLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Ident,
    Keyword,
    /// Sized literal (`8'hFF`); payload is the declared width.
    SizedNumber(u32),
    Number,
    Str,
    /// `$display`, `$clog2`, ...
    System,
    /// `` `define``, `` `timescale``, ...
    Directive,
    Op,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    /// Byte offsets into the scanned source.
    pub start: usize,
    pub end: usize,
}

impl Token<'_> {
    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }

    pub fn is_word(&self) -> bool {
        matches!(self.kind, TokenKind::Ident | TokenKind::Keyword)
    }
}

static KEYWORD_LIST: &[&str] = &[
    "always", "always_comb", "always_ff", "always_latch", "and", "assert", "assign", "assume",
    "automatic", "begin", "bit", "buf", "bufif0", "bufif1", "byte", "case", "casex", "casez",
    "cell", "chandle", "class", "cmos", "config", "const", "cover", "deassign", "default",
    "defparam", "design", "disable", "do", "edge", "else", "end", "endcase", "endclass",
    "endconfig", "endfunction", "endgenerate", "endinterface", "endmodule", "endpackage",
    "endprimitive", "endspecify", "endtable", "endtask", "enum", "event", "final", "for",
    "force", "forever", "fork", "function", "generate", "genvar", "highz0", "highz1", "if",
    "iff", "ifnone", "import", "incdir", "include", "initial", "inout", "input", "instance",
    "int", "integer", "interface", "join", "join_any", "join_none", "large", "liblist",
    "library", "localparam", "logic", "longint", "macromodule", "medium", "modport", "module",
    "nand", "negedge", "nmos", "nor", "noshowcancelled", "not", "notif0", "notif1", "or",
    "output", "package", "packed", "parameter", "pmos", "posedge", "primitive", "priority",
    "pull0", "pull1", "pulldown", "pullup", "pulsestyle_ondetect", "pulsestyle_onevent",
    "rcmos", "real", "realtime", "reg", "release", "repeat", "return", "rnmos", "rpmos",
    "rtran", "rtranif0", "rtranif1", "scalared", "shortint", "showcancelled", "signed",
    "small", "specify", "specparam", "static", "string", "strong0", "strong1", "struct",
    "supply0", "supply1", "table", "task", "time", "tran", "tranif0", "tranif1", "tri",
    "tri0", "tri1", "triand", "trior", "trireg", "typedef", "union", "unique", "unique0",
    "unsigned", "use", "uwire", "vectored", "void", "wait", "wand", "weak0", "weak1", "while",
    "wire", "wor", "xnor", "xor",
];

static KEYWORDS: LazyLock<HashSet<&'static str>> =
    LazyLock::new(|| KEYWORD_LIST.iter().copied().collect());

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(word)
}

// Longest first within each length class; scanned in this order.
const OPERATORS: &[&str] = &[
    "<<<=", ">>>=", "<<<", ">>>", "===", "!==", "==?", "!=?", "<<=", ">>=", "->>", "<<", ">>",
    "<=", ">=", "==", "!=", "&&", "||", "**", "~&", "~|", "~^", "^~", "->", "+:", "-:", "::",
    "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "=>", "*>",
];

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_ident_continue(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'$'
}

fn is_based_digit(c: u8) -> bool {
    c.is_ascii_hexdigit() || matches!(c, b'x' | b'X' | b'z' | b'Z' | b'?' | b'_')
}

/// Scans `source` into tokens, dropping whitespace and comments.
///
/// Never fails: unterminated comments run to end of input, unterminated
/// strings to end of line, and any other byte becomes a one-byte operator.
pub fn lex(source: &str) -> Vec<Token<'_>> {
    let bytes = source.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let n = bytes.len();

    while i < n {
        let c = bytes[i];

        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && i + 1 < n && bytes[i + 1] == b'/' {
            while i < n && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && i + 1 < n && bytes[i + 1] == b'*' {
            i += 2;
            while i < n && !(bytes[i] == b'*' && i + 1 < n && bytes[i + 1] == b'/') {
                i += 1;
            }
            i = (i + 2).min(n);
            continue;
        }

        let start = i;
        let kind;

        if is_ident_start(c) {
            while i < n && is_ident_continue(bytes[i]) {
                i += 1;
            }
            kind = if is_keyword(&source[start..i]) {
                TokenKind::Keyword
            } else {
                TokenKind::Ident
            };
        } else if c == b'\\' {
            // Escaped identifier runs to the next whitespace.
            i += 1;
            while i < n && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            kind = TokenKind::Ident;
        } else if c == b'$' && i + 1 < n && is_ident_start(bytes[i + 1]) {
            i += 1;
            while i < n && is_ident_continue(bytes[i]) {
                i += 1;
            }
            kind = TokenKind::System;
        } else if c == b'`' && i + 1 < n && is_ident_start(bytes[i + 1]) {
            i += 1;
            while i < n && is_ident_continue(bytes[i]) {
                i += 1;
            }
            kind = TokenKind::Directive;
        } else if c == b'"' {
            i += 1;
            while i < n && bytes[i] != b'"' && bytes[i] != b'\n' {
                if bytes[i] == b'\\' {
                    i += 1;
                }
                i += 1;
            }
            if i < n && bytes[i] == b'"' {
                i += 1;
            }
            i = i.min(n);
            kind = TokenKind::Str;
        } else if c.is_ascii_digit() {
            while i < n && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
                i += 1;
            }
            if let Some(end) = based_suffix(bytes, i) {
                let width = source[start..i].replace('_', "").parse::<u32>().unwrap_or(32);
                i = end;
                kind = TokenKind::SizedNumber(width);
            } else {
                // Real literal: fraction and/or exponent.
                if i + 1 < n && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < n && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
                        i += 1;
                    }
                }
                if i < n && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < n && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < n && bytes[j].is_ascii_digit() {
                        while j < n && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                kind = TokenKind::Number;
            }
        } else if c == b'\'' {
            if let Some(end) = based_suffix(bytes, i) {
                i = end;
                kind = TokenKind::Number;
            } else if i + 1 < n && matches!(bytes[i + 1], b'0' | b'1' | b'x' | b'X' | b'z' | b'Z')
                && !(i + 2 < n && is_ident_continue(bytes[i + 2]))
            {
                // Unbased unsized fill literal: '0, '1, 'x, 'z
                i += 2;
                kind = TokenKind::Number;
            } else {
                i += 1;
                kind = TokenKind::Op;
            }
        } else {
            let rest = &source[i..];
            let len = OPERATORS
                .iter()
                .find(|op| rest.starts_with(**op))
                .map(|op| op.len())
                .unwrap_or_else(|| rest.chars().next().map_or(1, char::len_utf8));
            i += len;
            kind = TokenKind::Op;
        }

        out.push(Token {
            kind,
            text: &source[start..i],
            start,
            end: i,
        });
    }
    out
}

/// If `bytes[at..]` begins a base specifier (`'h`, `'sb`, ...) followed by at
/// least one digit, returns the end offset of the literal.
fn based_suffix(bytes: &[u8], at: usize) -> Option<usize> {
    let n = bytes.len();
    if at >= n || bytes[at] != b'\'' {
        return None;
    }
    let mut j = at + 1;
    if j < n && (bytes[j] == b's' || bytes[j] == b'S') {
        j += 1;
    }
    if j >= n || !matches!(bytes[j], b'b' | b'B' | b'o' | b'O' | b'd' | b'D' | b'h' | b'H') {
        return None;
    }
    j += 1;
    while j < n && (bytes[j] == b' ' || bytes[j] == b'\t') {
        j += 1;
    }
    let digits_start = j;
    while j < n && is_based_digit(bytes[j]) {
        j += 1;
    }
    (j > digits_start).then_some(j)
}

/// How literals are rendered by [`tokenize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TokenizerOptions {
    /// Collapse numeric literals into width classes and strings into one
    /// placeholder. Used for similarity; must be off for leakage auditing.
    pub bucket_literals: bool,
}

impl TokenizerOptions {
    pub const SIMILARITY: Self = Self {
        bucket_literals: true,
    };
    pub const GUARD: Self = Self {
        bucket_literals: false,
    };
}

/// Text tokens for similarity scoring and fingerprinting.
pub fn tokenize(source: &str, options: TokenizerOptions) -> Vec<String> {
    lex(source)
        .into_iter()
        .map(|t| match (options.bucket_literals, t.kind) {
            (true, TokenKind::SizedNumber(w)) => format!("<num:{w}>"),
            (true, TokenKind::Number) => "<num>".to_string(),
            (true, TokenKind::Str) => "<str>".to_string(),
            _ => t.text.to_string(),
        })
        .collect()
}
