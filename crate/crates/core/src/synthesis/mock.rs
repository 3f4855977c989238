// SPDX-License-Identifier: Apache-2.0

//! Deterministic cost-model backend.
//!
//! Modules whose id is in the fixture table get the recorded metrics. All
//! other modules get a heuristic estimate computed from three token counts:
//!
//! * `O`: operator tokens (arithmetic, bitwise, logical, shift, relational,
//!   equality, `?`); `<=` is treated as assignment and the `*` in `@(*)` /
//!   `@*` is not counted,
//! * `A`: `always`/`always_ff`/`always_comb`/`always_latch` blocks,
//! * `N`: maximum parenthesis nesting depth over the whole module.
//!
//! ```text
//! area_um2 = 8.0   + 3.0 * O + 5.0 * A + 0.5 * N
//! power_uw = (1.5  + 0.9 * O + 2.5 * A) * f_MHz / 100
//! delay_ps = 120.0 + 25.0 * N + 6.0 * O
//! ```
//!
//! Fixture power values are recorded at 100 MHz and scale the same way.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::structure::check_structure;
use super::{
    Capabilities, PpaMetrics, SynthesisBackend, SynthesisConstraints, SynthesisError, Validation,
};
use crate::corpus::{ModuleId, VerilogModule};
use crate::lexer::{lex, TokenKind};

pub const MOCK_BACKEND_ID: &str = "mock-cost-model-v1";

const REFERENCE_MHZ: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureMetrics {
    pub area_um2: f64,
    pub power_uw: f64,
    pub critical_path_delay_ps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HeuristicFeatures {
    pub operators: u32,
    pub always_blocks: u32,
    pub max_paren_depth: u32,
}

const COUNTED_OPERATORS: &[&str] = &[
    "+", "-", "*", "/", "%", "**", "&", "|", "^", "~", "~&", "~|", "~^", "^~", "!", "&&", "||",
    "<<", ">>", "<<<", ">>>", "<", ">", ">=", "==", "!=", "===", "!==", "?",
];

pub fn heuristic_features(source: &str) -> HeuristicFeatures {
    let toks = lex(source);
    let mut f = HeuristicFeatures {
        operators: 0,
        always_blocks: 0,
        max_paren_depth: 0,
    };
    let mut depth = 0u32;
    for (k, t) in toks.iter().enumerate() {
        match t.kind {
            TokenKind::Keyword
                if matches!(t.text, "always" | "always_ff" | "always_comb" | "always_latch") =>
            {
                f.always_blocks += 1
            }
            TokenKind::Op => {
                if t.is("(") {
                    depth += 1;
                    f.max_paren_depth = f.max_paren_depth.max(depth);
                } else if t.is(")") {
                    depth = depth.saturating_sub(1);
                } else if COUNTED_OPERATORS.contains(&t.text) {
                    let sensitivity_star = t.is("*")
                        && k > 0
                        && (toks[k - 1].is("@")
                            || (toks[k - 1].is("(") && toks.get(k + 1).is_some_and(|n| n.is(")"))));
                    if !sensitivity_star {
                        f.operators += 1;
                    }
                }
            }
            _ => {}
        }
    }
    f
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    fixtures: BTreeMap<ModuleId, FixtureMetrics>,
}

impl Default for MockBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl MockBackend {
    /// Backend preloaded with the two 16-bit barrel shifter fixtures.
    pub fn new() -> Self {
        let mut b = MockBackend {
            fixtures: BTreeMap::new(),
        };
        b.add_fixture(
            ModuleId::of_source(include_str!("../../fixtures/barrel_shifter_multistage.v")),
            FixtureMetrics {
                area_um2: 34.902,
                power_uw: 23.125,
                critical_path_delay_ps: 350.0,
            },
        );
        b.add_fixture(
            ModuleId::of_source(include_str!("../../fixtures/barrel_shifter_direct.v")),
            FixtureMetrics {
                area_um2: 44.856,
                power_uw: 29.074,
                critical_path_delay_ps: 390.0,
            },
        );
        b
    }

    /// Backend with no fixtures: every module gets the heuristic.
    pub fn heuristic_only() -> Self {
        MockBackend {
            fixtures: BTreeMap::new(),
        }
    }

    pub fn add_fixture(&mut self, id: ModuleId, metrics: FixtureMetrics) {
        self.fixtures.insert(id, metrics);
    }

    pub fn fixture_count(&self) -> usize {
        self.fixtures.len()
    }

    pub fn estimate(features: HeuristicFeatures, constraints: &SynthesisConstraints) -> FixtureMetrics {
        let o = f64::from(features.operators);
        let a = f64::from(features.always_blocks);
        let n = f64::from(features.max_paren_depth);
        FixtureMetrics {
            area_um2: 8.0 + 3.0 * o + 5.0 * a + 0.5 * n,
            power_uw: (1.5 + 0.9 * o + 2.5 * a) * constraints.target_frequency_mhz / REFERENCE_MHZ,
            critical_path_delay_ps: 120.0 + 25.0 * n + 6.0 * o,
        }
    }
}

impl SynthesisBackend for MockBackend {
    fn id(&self) -> &str {
        MOCK_BACKEND_ID
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            validates_syntax: true,
            reports_area: true,
            reports_power: true,
            reports_delay: true,
            check_equivalence: false,
            max_parallelism: usize::MAX,
        }
    }

    fn validate(&self, module: &VerilogModule) -> Result<Validation, SynthesisError> {
        Ok(check_structure(&module.source))
    }

    fn measure(
        &self,
        module: &VerilogModule,
        constraints: &SynthesisConstraints,
    ) -> Result<PpaMetrics, SynthesisError> {
        constraints.validate()?;
        let m = match self.fixtures.get(&ModuleId::of_source(&module.source)) {
            Some(f) => FixtureMetrics {
                power_uw: f.power_uw * constraints.target_frequency_mhz / REFERENCE_MHZ,
                ..*f
            },
            None => Self::estimate(heuristic_features(&module.source), constraints),
        };
        PpaMetrics::new(
            m.area_um2,
            m.power_uw,
            m.critical_path_delay_ps,
            MOCK_BACKEND_ID,
            constraints.clone(),
        )
    }
}
