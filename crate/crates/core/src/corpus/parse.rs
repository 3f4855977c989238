// SPDX-License-Identifier: Apache-2.0

//! Module boundaries, headers and port declarations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::lexer::{lex, Token, TokenKind};

/// A `module ... endmodule` span, as byte offsets into the scanned text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModuleRegion {
    pub start: usize,
    pub end: usize,
}

impl ModuleRegion {
    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

fn is_module_kw(t: &Token<'_>) -> bool {
    t.kind == TokenKind::Keyword && (t.is("module") || t.is("macromodule"))
}

/// Every well-formed module region in `text`, in order.
///
/// A `module` with no matching `endmodule` before the next `module` is
/// dropped, so prose or broken fragments ahead of real code are skipped.
pub fn module_regions(text: &str) -> Vec<ModuleRegion> {
    let mut regions = Vec::new();
    let mut open: Option<usize> = None;
    for tok in lex(text) {
        if is_module_kw(&tok) {
            open = Some(tok.start);
        } else if tok.kind == TokenKind::Keyword && tok.is("endmodule") {
            if let Some(start) = open.take() {
                regions.push(ModuleRegion {
                    start,
                    end: tok.end,
                });
            }
        }
    }
    regions
}

/// First `module...endmodule` span of `text`, verbatim.
pub fn extract_module_region(text: &str) -> Result<&str, CorpusError> {
    module_regions(text)
        .first()
        .map(|r| r.slice(text))
        .ok_or(CorpusError::NotAModule)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
    Inout,
}

impl Direction {
    fn from_word(w: &str) -> Option<Self> {
        match w {
            "input" => Some(Self::Input),
            "output" => Some(Self::Output),
            "inout" => Some(Self::Inout),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub direction: Option<Direction>,
    /// Packed range as written, e.g. `WIDTH-1:0`; absent for scalars.
    pub range: Option<String>,
    /// Resolved width. Scalars are 1; unresolvable ranges are `None`.
    pub width: Option<u32>,
}

impl Port {
    pub fn is_ranged(&self) -> bool {
        self.range.is_some()
    }

    /// Key used for interface equality: resolved width when known, the
    /// written range text otherwise.
    pub fn shape_key(&self) -> String {
        match (self.width, &self.range) {
            (Some(w), _) => w.to_string(),
            (None, Some(r)) => r.clone(),
            (None, None) => "1".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleHeader {
    pub name: String,
    /// Parameter defaults that evaluated to integers.
    pub params: BTreeMap<String, i64>,
    pub ports: Vec<Port>,
}

impl ModuleHeader {
    /// Widest packed port range; `None` when no port carries a range.
    pub fn widest_port(&self) -> Option<u32> {
        self.ports
            .iter()
            .filter(|p| p.is_ranged())
            .filter_map(|p| p.width)
            .max()
    }

    pub fn same_interface(&self, other: &ModuleHeader) -> bool {
        self.ports.len() == other.ports.len()
            && self.ports.iter().zip(&other.ports).all(|(a, b)| {
                a.name == b.name && a.direction == b.direction && a.shape_key() == b.shape_key()
            })
    }
}

const DECL_MODIFIERS: &[&str] = &[
    "wire", "reg", "logic", "signed", "unsigned", "integer", "tri", "wand", "wor", "var", "bit",
    "uwire", "supply0", "supply1",
];

/// Parses the header and port declarations of the first module region.
pub fn parse_header(text: &str) -> Result<ModuleHeader, CorpusError> {
    let region = extract_module_region(text)?;
    let toks = lex(region);
    let mut i = 1; // past `module`
    while i < toks.len() && (toks[i].is("automatic") || toks[i].is("static")) {
        i += 1;
    }
    let name = match toks.get(i) {
        Some(t) if t.kind == TokenKind::Ident => t.text.trim_start_matches('\\').to_string(),
        _ => return Err(CorpusError::MalformedHeader("missing module name".into())),
    };
    i += 1;

    let mut params = BTreeMap::new();
    // package imports in the header
    while i < toks.len() && toks[i].is("import") {
        while i < toks.len() && !toks[i].is(";") {
            i += 1;
        }
        i += 1;
    }
    if i < toks.len() && toks[i].is("#") {
        i += 1;
        if i < toks.len() && toks[i].is("(") {
            let close = matching(&toks, i)
                .ok_or_else(|| CorpusError::MalformedHeader("unbalanced parameter list".into()))?;
            for seg in split_top_level(&toks[i + 1..close], ",") {
                collect_param(seg, &mut params);
            }
            i = close + 1;
        }
    }

    let mut ports: Vec<Port> = Vec::new();
    let mut ansi = false;
    if i < toks.len() && toks[i].is("(") {
        let close = matching(&toks, i)
            .ok_or_else(|| CorpusError::MalformedHeader("unbalanced port list".into()))?;
        let list = &toks[i + 1..close];
        ansi = list
            .iter()
            .any(|t| Direction::from_word(t.text).is_some());
        if ansi {
            parse_ansi_ports(list, &params, &mut ports);
        } else {
            for seg in split_top_level(list, ",") {
                if let Some(t) = seg.iter().rev().find(|t| t.kind == TokenKind::Ident) {
                    ports.push(Port {
                        name: t.text.to_string(),
                        direction: None,
                        range: None,
                        width: Some(1),
                    });
                }
            }
        }
        i = close + 1;
    }

    // Body: parameters and, for non-ANSI headers, direction declarations.
    let body = &toks[i.min(toks.len())..];
    let mut j = 0;
    let mut skip_depth = 0usize;
    while j < body.len() {
        let t = &body[j];
        match t.text {
            "function" | "task" if t.kind == TokenKind::Keyword => skip_depth += 1,
            "endfunction" | "endtask" if t.kind == TokenKind::Keyword => {
                skip_depth = skip_depth.saturating_sub(1)
            }
            _ => {}
        }
        if skip_depth == 0 && t.kind == TokenKind::Keyword {
            if t.is("parameter") || t.is("localparam") {
                let end = find_from(body, j, ";").unwrap_or(body.len());
                for seg in split_top_level(&body[j + 1..end], ",") {
                    collect_param(seg, &mut params);
                }
                j = end;
            } else if let Some(dir) = Direction::from_word(t.text) {
                let end = find_from(body, j, ";").unwrap_or(body.len());
                if !ansi {
                    apply_body_decl(dir, &body[j + 1..end], &params, &mut ports);
                }
                j = end;
            }
        }
        j += 1;
    }

    // Re-resolve widths now that body parameters are known.
    if ansi {
        for p in &mut ports {
            if p.width.is_none() {
                if let Some(r) = &p.range {
                    p.width = range_width(&lex(r), &params);
                }
            }
        }
    }

    Ok(ModuleHeader {
        name,
        params,
        ports,
    })
}

fn find_from(toks: &[Token<'_>], from: usize, text: &str) -> Option<usize> {
    toks[from..].iter().position(|t| t.is(text)).map(|k| k + from)
}

/// Index of the bracket closing the one at `open`.
fn matching(toks: &[Token<'_>], open: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (k, t) in toks.iter().enumerate().skip(open) {
        match t.text {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => {
                depth -= 1;
                if depth == 0 {
                    return Some(k);
                }
            }
            _ => {}
        }
    }
    None
}

fn split_top_level<'t, 'a>(toks: &'t [Token<'a>], sep: &str) -> Vec<&'t [Token<'a>]> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut last = 0;
    for (k, t) in toks.iter().enumerate() {
        match t.text {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            s if s == sep && depth == 0 => {
                out.push(&toks[last..k]);
                last = k + 1;
            }
            _ => {}
        }
    }
    if last < toks.len() {
        out.push(&toks[last..]);
    }
    out
}

fn collect_param(seg: &[Token<'_>], params: &mut BTreeMap<String, i64>) {
    let Some(eq) = seg.iter().position(|t| t.is("=")) else {
        return;
    };
    let Some(name) = seg[..eq].iter().rev().find(|t| t.kind == TokenKind::Ident) else {
        return;
    };
    if let Some(v) = eval_expr(&seg[eq + 1..], params) {
        params.insert(name.text.to_string(), v);
    }
}

/// Range tokens between `[` and `]` rendered without whitespace.
fn range_text(toks: &[Token<'_>]) -> String {
    toks.iter().map(|t| t.text).collect::<Vec<_>>().join("")
}

fn range_width(inner: &[Token<'_>], params: &BTreeMap<String, i64>) -> Option<u32> {
    let parts = split_top_level(inner, ":");
    if parts.len() != 2 {
        return None;
    }
    let msb = eval_expr(parts[0], params)?;
    let lsb = eval_expr(parts[1], params)?;
    u32::try_from((msb - lsb).unsigned_abs() + 1).ok()
}

/// Splits declaration tokens into (packed range, names).
fn decl_parts<'t, 'a>(
    seg: &'t [Token<'a>],
) -> (Option<&'t [Token<'a>]>, Vec<&'t Token<'a>>) {
    let mut k = 0;
    let mut range = None;
    let mut names = Vec::new();
    while k < seg.len() {
        let t = &seg[k];
        if t.is("[") {
            let close = matching(seg, k).unwrap_or(seg.len() - 1);
            // Only the first (packed) range before any name counts.
            if names.is_empty() && range.is_none() {
                range = Some(&seg[k + 1..close]);
            }
            k = close + 1;
            continue;
        }
        if t.is("=") {
            break;
        }
        if t.kind == TokenKind::Ident {
            names.push(t);
        }
        k += 1;
    }
    (range, names)
}

fn parse_ansi_ports(list: &[Token<'_>], params: &BTreeMap<String, i64>, ports: &mut Vec<Port>) {
    let mut dir = None;
    let mut range: Option<String> = None;
    let mut width: Option<u32> = Some(1);
    for seg in split_top_level(list, ",") {
        let mut body = seg;
        let mut declares = false;
        if let Some(first) = body.first() {
            if let Some(d) = Direction::from_word(first.text) {
                dir = Some(d);
                body = &body[1..];
                declares = true;
            }
        }
        while let Some(first) = body.first() {
            if DECL_MODIFIERS.contains(&first.text) {
                body = &body[1..];
                declares = true;
            } else {
                break;
            }
        }
        let (r, names) = decl_parts(body);
        if declares || r.is_some() {
            range = r.map(range_text);
            width = match r {
                Some(inner) => range_width(inner, params),
                None => Some(1),
            };
        }
        if let Some(name) = names.first() {
            ports.push(Port {
                name: name.text.to_string(),
                direction: dir,
                range: range.clone(),
                width,
            });
        }
    }
}

fn apply_body_decl(
    dir: Direction,
    seg: &[Token<'_>],
    params: &BTreeMap<String, i64>,
    ports: &mut [Port],
) {
    let mut body = seg;
    while let Some(first) = body.first() {
        if DECL_MODIFIERS.contains(&first.text) {
            body = &body[1..];
        } else {
            break;
        }
    }
    let (r, names) = decl_parts(body);
    for name in names {
        if let Some(p) = ports.iter_mut().find(|p| p.name == name.text) {
            p.direction = Some(dir);
            p.range = r.map(range_text);
            p.width = match r {
                Some(inner) => range_width(inner, params),
                None => Some(1),
            };
        }
    }
}

/// Integer constant expressions over literals and known parameters.
pub(crate) fn eval_expr(toks: &[Token<'_>], params: &BTreeMap<String, i64>) -> Option<i64> {
    let mut p = ExprParser {
        toks,
        pos: 0,
        params,
    };
    let v = p.shift()?;
    (p.pos == toks.len()).then_some(v)
}

struct ExprParser<'t, 'a, 'p> {
    toks: &'t [Token<'a>],
    pos: usize,
    params: &'p BTreeMap<String, i64>,
}

impl ExprParser<'_, '_, '_> {
    fn peek(&self) -> Option<&str> {
        self.toks.get(self.pos).map(|t| t.text)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.peek() == Some(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn shift(&mut self) -> Option<i64> {
        let mut v = self.additive()?;
        loop {
            if self.eat("<<") {
                v = v.checked_shl(u32::try_from(self.additive()?).ok()?)?;
            } else if self.eat(">>") {
                v = v.checked_shr(u32::try_from(self.additive()?).ok()?)?;
            } else {
                return Some(v);
            }
        }
    }

    fn additive(&mut self) -> Option<i64> {
        let mut v = self.term()?;
        loop {
            if self.eat("+") {
                v = v.checked_add(self.term()?)?;
            } else if self.eat("-") {
                v = v.checked_sub(self.term()?)?;
            } else {
                return Some(v);
            }
        }
    }

    fn term(&mut self) -> Option<i64> {
        let mut v = self.power()?;
        loop {
            if self.eat("*") {
                v = v.checked_mul(self.power()?)?;
            } else if self.eat("/") {
                v = v.checked_div(self.power()?)?;
            } else if self.eat("%") {
                v = v.checked_rem(self.power()?)?;
            } else {
                return Some(v);
            }
        }
    }

    fn power(&mut self) -> Option<i64> {
        let base = self.unary()?;
        if self.eat("**") {
            let exp = self.power()?;
            return base.checked_pow(u32::try_from(exp).ok()?);
        }
        Some(base)
    }

    fn unary(&mut self) -> Option<i64> {
        if self.eat("-") {
            return self.unary()?.checked_neg();
        }
        if self.eat("+") {
            return self.unary();
        }
        self.atom()
    }

    fn atom(&mut self) -> Option<i64> {
        let tok = *self.toks.get(self.pos)?;
        self.pos += 1;
        match tok.kind {
            TokenKind::Number | TokenKind::SizedNumber(_) => literal_value(tok.text),
            TokenKind::Ident => self.params.get(tok.text).copied(),
            TokenKind::System if tok.is("$clog2") => {
                if !self.eat("(") {
                    return None;
                }
                let v = self.shift()?;
                if !self.eat(")") {
                    return None;
                }
                Some(clog2(v))
            }
            TokenKind::Op if tok.is("(") => {
                let v = self.shift()?;
                self.eat(")").then_some(v)
            }
            _ => None,
        }
    }
}

fn clog2(v: i64) -> i64 {
    if v <= 1 {
        0
    } else {
        64 - i64::from((v - 1).leading_zeros())
    }
}

fn literal_value(text: &str) -> Option<i64> {
    let clean = text.replace(['_', ' ', '\t'], "");
    match clean.find('\'') {
        None => clean.parse().ok(),
        Some(q) => {
            let mut rest = &clean[q + 1..];
            if rest.starts_with(['s', 'S']) {
                rest = &rest[1..];
            }
            let (radix, digits) = match rest.chars().next()?.to_ascii_lowercase() {
                'b' => (2, &rest[1..]),
                'o' => (8, &rest[1..]),
                'd' => (10, &rest[1..]),
                'h' => (16, &rest[1..]),
                _ => return None,
            };
            i64::from_str_radix(digits, radix).ok()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LISTING_1: &str = include_str!("../../fixtures/barrel_shifter_multistage.v");

    #[test]
    fn region_single() {
        let src = "// hdr\nmodule a(input x); endmodule\n";
        assert_eq!(extract_module_region(src).unwrap(), "module a(input x); endmodule");
    }

    #[test]
    fn region_inside_prose_and_fence() {
        let src = "Here is the optimized module:\n```verilog\nmodule b(input x);\nendmodule\n```\nLet me know!";
        assert_eq!(
            extract_module_region(src).unwrap(),
            "module b(input x);\nendmodule"
        );
    }

    #[test]
    fn region_empty_text() {
        assert!(matches!(extract_module_region(""), Err(CorpusError::NotAModule)));
        assert!(matches!(
            extract_module_region("module never_closed(input a);"),
            Err(CorpusError::NotAModule)
        ));
    }

    #[test]
    fn region_ignores_commented_module_keyword() {
        let src = "// module fake\n/* endmodule */ module real_one; endmodule";
        assert_eq!(extract_module_region(src).unwrap(), "module real_one; endmodule");
    }

    #[test]
    fn multiple_regions_in_order() {
        let src = "module a; endmodule\nmodule b; endmodule";
        let r = module_regions(src);
        assert_eq!(r.len(), 2);
        assert_eq!(r[1].slice(src), "module b; endmodule");
    }

    #[test]
    fn listing_header() {
        let h = parse_header(LISTING_1).unwrap();
        assert_eq!(h.name, "barrel_shifter_16bit");
        let names: Vec<_> = h.ports.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["data", "shift_amount", "out"]);
        assert_eq!(h.ports[0].width, Some(16));
        assert_eq!(h.ports[1].width, Some(4));
        assert_eq!(h.ports[2].direction, Some(Direction::Output));
        assert_eq!(h.widest_port(), Some(16));
    }

    #[test]
    fn parameterised_ansi_header() {
        let src = "module fifo #(parameter WIDTH = 8, parameter DEPTH = 16) (
            input clk, rst,
            input [WIDTH-1:0] din,
            output reg [$clog2(DEPTH):0] count,
            output [WIDTH-1:0] dout
        ); endmodule";
        let h = parse_header(src).unwrap();
        assert_eq!(h.params["WIDTH"], 8);
        let widths: Vec<_> = h.ports.iter().map(|p| (p.name.as_str(), p.width)).collect();
        assert_eq!(
            widths,
            [
                ("clk", Some(1)),
                ("rst", Some(1)),
                ("din", Some(8)),
                ("count", Some(5)),
                ("dout", Some(8))
            ]
        );
        assert_eq!(h.ports[1].direction, Some(Direction::Input));
    }

    #[test]
    fn non_ansi_header() {
        let src = "module cnt(clk, q);
            parameter N = 4;
            input clk;
            output [N-1:0] q;
            reg [N-1:0] q;
            function [3:0] f; input [3:0] a; f = a; endfunction
        endmodule";
        let h = parse_header(src).unwrap();
        assert_eq!(h.ports.len(), 2);
        assert_eq!(h.ports[1].direction, Some(Direction::Output));
        assert_eq!(h.ports[1].width, Some(4));
        assert_eq!(h.widest_port(), Some(4));
    }

    #[test]
    fn unresolved_width_keeps_range_text() {
        let h = parse_header("module m(input [W-1:0] a); endmodule").unwrap();
        assert_eq!(h.ports[0].width, None);
        assert_eq!(h.ports[0].shape_key(), "W-1:0");
    }

    #[test]
    fn no_ranged_ports() {
        let h = parse_header("module foo(input a, output b); endmodule").unwrap();
        assert_eq!(h.widest_port(), None);
    }

    #[test]
    fn interface_equality() {
        let a = parse_header("module m(input [7:0] a, output y); endmodule").unwrap();
        let b = parse_header("module m(input wire [7:0] a, output reg y); endmodule").unwrap();
        let c = parse_header("module m(input [3:0] a, output y); endmodule").unwrap();
        assert!(a.same_interface(&b));
        assert!(!a.same_interface(&c));
    }

    #[test]
    fn literal_values() {
        assert_eq!(literal_value("8'hFF"), Some(255));
        assert_eq!(literal_value("4'b1010"), Some(10));
        assert_eq!(literal_value("1_000"), Some(1000));
        assert_eq!(clog2(16), 4);
        assert_eq!(clog2(17), 5);
    }
}
