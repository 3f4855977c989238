// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SynthesisError;

/// Optimization objective. Both are lower-is-better raw metrics; the
/// higher-is-better score is `1 / metric`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Power,
    CriticalPathDelay,
}

impl Attribute {
    pub const ALL: [Attribute; 2] = [Attribute::Power, Attribute::CriticalPathDelay];

    pub fn as_str(&self) -> &'static str {
        match self {
            Attribute::Power => "power",
            Attribute::CriticalPathDelay => "critical_path_delay",
        }
    }

    pub fn unit(&self) -> &'static str {
        match self {
            Attribute::Power => "uW",
            Attribute::CriticalPathDelay => "ps",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Attribute {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "power" => Ok(Attribute::Power),
            "critical_path_delay" | "critical-path-delay" | "cpd" | "delay" | "timing" => {
                Ok(Attribute::CriticalPathDelay)
            }
            other => Err(format!("unknown attribute `{other}` (expected power or cpd)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConstraints {
    pub target_frequency_mhz: f64,
    pub technology: String,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

impl Default for SynthesisConstraints {
    fn default() -> Self {
        SynthesisConstraints {
            target_frequency_mhz: 100.0,
            technology: "28nm".to_string(),
            extra: BTreeMap::new(),
        }
    }
}

impl SynthesisConstraints {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if !(self.target_frequency_mhz.is_finite() && self.target_frequency_mhz > 0.0) {
            return Err(SynthesisError::InvalidConstraints(format!(
                "target frequency must be positive, got {}",
                self.target_frequency_mhz
            )));
        }
        Ok(())
    }

    pub fn clock_period_ns(&self) -> f64 {
        1000.0 / self.target_frequency_mhz
    }
}

/// Area/power/delay of one synthesized design, in µm², µW and ps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpaMetrics {
    pub area_um2: f64,
    pub power_uw: f64,
    pub critical_path_delay_ps: f64,
    /// GHz; always `1000 / critical_path_delay_ps`.
    pub fmax_ghz: f64,
    pub backend_id: String,
    pub constraints: SynthesisConstraints,
}

impl PpaMetrics {
    pub fn new(
        area_um2: f64,
        power_uw: f64,
        critical_path_delay_ps: f64,
        backend_id: impl Into<String>,
        constraints: SynthesisConstraints,
    ) -> Result<Self, SynthesisError> {
        let finite = area_um2.is_finite() && power_uw.is_finite() && critical_path_delay_ps.is_finite();
        if !finite || area_um2 < 0.0 || power_uw < 0.0 || critical_path_delay_ps <= 0.0 {
            return Err(SynthesisError::MeasurementFailed(format!(
                "invalid metrics: area={area_um2} power={power_uw} delay={critical_path_delay_ps}"
            )));
        }
        Ok(PpaMetrics {
            area_um2,
            power_uw,
            critical_path_delay_ps,
            fmax_ghz: 1000.0 / critical_path_delay_ps,
            backend_id: backend_id.into(),
            constraints,
        })
    }

    /// Raw (lower-is-better) value for `attribute`.
    pub fn metric(&self, attribute: Attribute) -> f64 {
        match attribute {
            Attribute::Power => self.power_uw,
            Attribute::CriticalPathDelay => self.critical_path_delay_ps,
        }
    }

    /// Higher-is-better score: `1 / metric`.
    pub fn score(&self, attribute: Attribute) -> f64 {
        1.0 / self.metric(attribute)
    }

    pub fn comparable_with(&self, other: &PpaMetrics) -> bool {
        self.backend_id == other.backend_id && self.constraints == other.constraints
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Improved,
    Regressed,
    Unchanged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub outcome: Outcome,
    /// `(before - after) / before`, as a fraction.
    pub relative_delta: f64,
}

pub fn compare(
    before: &PpaMetrics,
    after: &PpaMetrics,
    attribute: Attribute,
) -> Result<Comparison, SynthesisError> {
    if !before.comparable_with(after) {
        return Err(SynthesisError::IncomparableMetrics(format!(
            "{} vs {}",
            before.backend_id, after.backend_id
        )));
    }
    let b = before.metric(attribute);
    let a = after.metric(attribute);
    let outcome = if a < b {
        Outcome::Improved
    } else if a > b {
        Outcome::Regressed
    } else {
        Outcome::Unchanged
    };
    let relative_delta = if b == 0.0 { 0.0 } else { (b - a) / b };
    Ok(Comparison {
        outcome,
        relative_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(power: f64, delay: f64) -> PpaMetrics {
        PpaMetrics::new(10.0, power, delay, "t", SynthesisConstraints::default()).unwrap()
    }

    #[test]
    fn power_case_from_table() {
        let c = compare(&m(70.49, 100.0), &m(12.85, 100.0), Attribute::Power).unwrap();
        assert_eq!(c.outcome, Outcome::Improved);
        assert!((c.relative_delta * 100.0 - 81.77).abs() < 0.01);
    }

    #[test]
    fn delay_case_from_table() {
        let c = compare(&m(1.0, 2760.0), &m(1.0, 2130.0), Attribute::CriticalPathDelay).unwrap();
        assert_eq!(c.outcome, Outcome::Improved);
        assert!((c.relative_delta * 100.0 - 22.83).abs() < 0.01);
    }

    #[test]
    fn identical_is_unchanged() {
        let c = compare(&m(5.0, 300.0), &m(5.0, 300.0), Attribute::Power).unwrap();
        assert_eq!(c.outcome, Outcome::Unchanged);
        assert_eq!(c.relative_delta, 0.0);
    }

    #[test]
    fn mismatched_provenance() {
        let mut other = m(5.0, 300.0);
        other.backend_id = "other".into();
        assert!(matches!(
            compare(&m(5.0, 300.0), &other, Attribute::Power),
            Err(SynthesisError::IncomparableMetrics(_))
        ));
        let mut c2 = m(5.0, 300.0);
        c2.constraints.target_frequency_mhz = 200.0;
        assert!(compare(&m(5.0, 300.0), &c2, Attribute::Power).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(PpaMetrics::new(f64::NAN, 1.0, 1.0, "t", SynthesisConstraints::default()).is_err());
        assert!(PpaMetrics::new(1.0, 1.0, 0.0, "t", SynthesisConstraints::default()).is_err());
    }

    #[test]
    fn attribute_parsing() {
        assert_eq!("cpd".parse::<Attribute>().unwrap(), Attribute::CriticalPathDelay);
        assert_eq!("Power".parse::<Attribute>().unwrap(), Attribute::Power);
        assert!("area".parse::<Attribute>().is_err());
    }

    proptest! {
        #[test]
        fn compare_is_antisymmetric(b in 0.01f64..1e6, a in 0.01f64..1e6) {
            for attr in Attribute::ALL {
                let x = compare(&m(b, b), &m(a, a), attr).unwrap();
                let y = compare(&m(a, a), &m(b, b), attr).unwrap();
                let flipped = match x.outcome {
                    Outcome::Improved => Outcome::Regressed,
                    Outcome::Regressed => Outcome::Improved,
                    Outcome::Unchanged => Outcome::Unchanged,
                };
                prop_assert_eq!(y.outcome, flipped);
                // (b-a)/b and (a-b)/a have opposite signs
                prop_assert!(x.relative_delta * y.relative_delta <= 0.0);
            }
        }

        #[test]
        fn fmax_times_delay_is_1000(d in 1e-3f64..1e7) {
            let p = m(1.0, d);
            let prod = p.fmax_ghz * p.critical_path_delay_ps;
            prop_assert!(((prod - 1000.0) / 1000.0).abs() < 1e-9);
        }
    }
}
