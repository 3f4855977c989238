// SPDX-License-Identifier: Apache-2.0

//! Synthetic corpora for the benchmarks.

use rtlsafe_core::corpus::{Classifier, Codebase, CodebaseKind, VerilogModule};

const OPS: [&str; 5] = ["+", "-", "&", "|", "^"];
const NAMES: [&str; 4] = ["adder", "counter", "shifter", "encoder"];

/// `n` modules per side. Draft `i` is proprietary `i` with one operator
/// changed, so most modules have a close match.
pub fn corpus(n: usize) -> (Codebase, Codebase) {
    let classifier = Classifier::default();
    let mut p = Codebase::new(CodebaseKind::Proprietary, "bench/p");
    let mut d = Codebase::new(CodebaseKind::Draft, "bench/d");
    for i in 0..n {
        let name = NAMES[i % NAMES.len()];
        let terms: Vec<String> = (0..4 + i % 5)
            .map(|j| format!("(in_{} {} k{j}_{i})", j % 3, OPS[(i + j) % OPS.len()]))
            .collect();
        let body = terms.join(" ^ ");
        let src = |tag: &str, body: &str| {
            format!(
                "module {name}_{tag}{i}(input clk, input [7:0] in_0, in_1, in_2, output reg [7:0] q);\n\
                 localparam k0_{i} = 8'd{i};\n  always @(posedge clk) q <= {body};\nendmodule\n"
            )
        };
        let mutated = body.replacen(OPS[i % OPS.len()], OPS[(i + 1) % OPS.len()], 1);
        p.insert(VerilogModule::parse(&src("p", &body), "", CodebaseKind::Proprietary, &classifier).unwrap());
        d.insert(VerilogModule::parse(&src("d", &mutated), "", CodebaseKind::Draft, &classifier).unwrap());
    }
    (p, d)
}
