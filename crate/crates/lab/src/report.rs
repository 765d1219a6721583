//! Run reports and their JSON form.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::Kind;

pub const REPORT_FILE: &str = "report.json";
pub const REPORT_VERSION: u32 = 1;

/// A float that survives JSON: non-finite values become the strings
/// `"inf"`, `"-inf"` and `"nan"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Num(pub f64);

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num(v)
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.0;
        if v.is_finite() && v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e6) {
            write!(f, "{v:.4e}")
        } else if v.is_finite() {
            write!(f, "{v:.6}")
        } else {
            write!(f, "{v}")
        }
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
            }
            fn visit_f64<E>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                match v {
                    "inf" => Ok(Num(f64::INFINITY)),
                    "-inf" => Ok(Num(f64::NEG_INFINITY)),
                    "nan" => Ok(Num(f64::NAN)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub name: String,
    pub status: Status,
    pub required: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl AnalysisResult {
    pub fn new(name: &str, required: bool) -> Self {
        AnalysisResult {
            name: name.to_string(),
            status: Status::Pass,
            required,
            metrics: BTreeMap::new(),
            note: None,
        }
    }

    pub fn metric(&mut self, key: &str, v: f64) -> &mut Self {
        self.metrics.insert(key.to_string(), Num(v));
        self
    }

    /// Records a failed condition; the first failure's message becomes the
    /// note.
    pub fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) -> &mut Self {
        if !ok {
            if self.status != Status::Fail {
                self.note = Some(msg());
            }
            self.status = Status::Fail;
        }
        self
    }

    pub fn skip(mut self, why: &str) -> Self {
        self.status = Status::Skipped;
        self.note = Some(why.to_string());
        self
    }

    pub fn fail(mut self, why: String) -> Self {
        self.status = Status::Fail;
        self.note = Some(why);
        self
    }

    pub fn is_blocking(&self) -> bool {
        self.required && self.status == Status::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub stop_reason: String,
    pub samples: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub length: Num,
    pub final_r: Num,
    pub final_value: Num,
    pub final_grad_norm: Num,
    pub max_speed_error: Num,
    pub max_dissipation_defect: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSummary {
    pub rho_hat: Num,
    pub c_hat: Num,
    pub l_hat: Num,
    pub l_candidates: Vec<Num>,
    pub c_bl: Num,
    pub bound_slack: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecantSummary {
    pub total_length: Num,
    pub chord_length: Num,
    pub cauchy_gap: Num,
    /// Per-decade lengths, final decade first.
    pub tail_lengths: Vec<Num>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EMonitorSummary {
    pub l: Num,
    pub a0_hat: Num,
    pub a0_fluctuation: Num,
    pub monotone_violations: usize,
    pub early_increases: usize,
    pub w_violations: usize,
    pub sign_mismatches: usize,
    pub decrease_violations: usize,
    pub tail_slope: Num,
    pub divergent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub kind: Kind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<ExponentSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secant: Option<SecantSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_monitor: Option<EMonitorSummary>,
    pub analyses: Vec<AnalysisResult>,
    /// Files written for this scenario, relative to the output directory.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<String>,
    pub wall_clock_ms: u64,
}

impl ScenarioReport {
    pub fn analysis(&self, name: &str) -> Option<&AnalysisResult> {
        self.analyses.iter().find(|a| a.name == name)
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && !self.analyses.iter().any(AnalysisResult::is_blocking)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub scenarios: usize,
    pub scenario_errors: usize,
    pub analyses: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    /// Failures of analyses not marked advisory.
    pub required_failures: usize,
    /// Scenarios whose required analyses all pass.
    pub passing_scenarios: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub seed: u64,
    pub scenarios: Vec<ScenarioReport>,
    pub summary: Summary,
    pub wall_clock_ms: u64,
}

impl RunReport {
    pub fn new(seed: u64, scenarios: Vec<ScenarioReport>, wall_clock_ms: u64) -> Self {
        let mut s = Summary {
            scenarios: scenarios.len(),
            ..Summary::default()
        };
        for sc in &scenarios {
            s.scenario_errors += sc.error.is_some() as usize;
            s.passing_scenarios += sc.passed() as usize;
            for a in &sc.analyses {
                s.analyses += 1;
                match a.status {
                    Status::Pass => s.passed += 1,
                    Status::Fail => s.failed += 1,
                    Status::Skipped => s.skipped += 1,
                }
                s.required_failures += a.is_blocking() as usize;
            }
        }
        RunReport {
            version: REPORT_VERSION,
            seed,
            scenarios,
            summary: s,
            wall_clock_ms,
        }
    }

    pub fn scenario(&self, name: &str) -> Option<&ScenarioReport> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    pub fn passed(&self) -> bool {
        self.summary.required_failures == 0 && self.summary.scenario_errors == 0
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<RunReport> {
        serde_json::from_str(text)
    }

    pub fn load(dir: &Path) -> anyhow::Result<RunReport> {
        let path = dir.join(REPORT_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        Ok(RunReport::from_json(&text)?)
    }

    /// Human-readable summary, one line per analysis.
    pub fn render(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for sc in &self.scenarios {
            let _ = writeln!(out, "{} [{}] seed {} ({} ms)", sc.name, sc.kind, sc.seed, sc.wall_clock_ms);
            if let Some(e) = &sc.error {
                let _ = writeln!(out, "  error: {e}");
            }
            for a in &sc.analyses {
                let tag = if a.required { "" } else { " (advisory)" };
                let _ = write!(out, "  {:<15} {:<7}{tag}", a.name, a.status.to_string());
                for (k, v) in &a.metrics {
                    let _ = write!(out, " {k}={v}");
                }
                if let Some(n) = &a.note {
                    let _ = write!(out, "  -- {n}");
                }
                out.push('\n');
            }
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "{} scenarios ({} passing, {} errors); {} analyses: {} pass, {} fail ({} required), {} skipped",
            s.scenarios, s.passing_scenarios, s.scenario_errors, s.analyses, s.passed, s.failed, s.required_failures, s.skipped
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_numbers_roundtrip() {
        let v = vec![Num(1.5), Num(f64::INFINITY), Num(f64::NEG_INFINITY), Num(-0.0)];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"[1.5,"inf","-inf",-0.0]"#);
        let back: Vec<Num> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        let nan: Num = serde_json::from_str(r#""nan""#).unwrap();
        assert!(nan.0.is_nan());
    }

    #[test]
    fn first_failure_sets_the_note() {
        let mut a = AnalysisResult::new("x", true);
        a.check(true, || "never".into());
        a.check(false, || "first".into());
        a.check(false, || "second".into());
        assert_eq!(a.status, Status::Fail);
        assert_eq!(a.note.as_deref(), Some("first"));
        assert!(a.is_blocking());
    }
}
