//! Run configuration: a JSON document with a `scenarios` array.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use secantlab_core::asymptotics::WepsParams;
use secantlab_core::flow::{FlowSpec, Method, Parameterization};
use secantlab_core::AnalyticField;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{field}: {msg}")]
    Schema { field: String, msg: String },
}

fn schema(field: impl Into<String>, msg: impl Into<String>) -> ConfigError {
    ConfigError::Schema {
        field: field.into(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Flow,
    GaugeToy,
    Lattice,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Flow => "flow",
            Kind::GaugeToy => "gauge_toy",
            Kind::Lattice => "lattice",
        })
    }
}

/// Analyzer names and the scenario kinds that accept them.
pub const ANALYZERS: &[(&str, Kind)] = &[
    ("secant", Kind::Flow),
    ("euler", Kind::Flow),
    ("lojasiewicz", Kind::Flow),
    ("exponent_bound", Kind::Flow),
    ("char_exponent", Kind::Flow),
    ("e_monitor", Kind::Flow),
    ("sigma_ratio", Kind::Flow),
    ("reduction", Kind::Flow),
    ("bochnak", Kind::Flow),
    ("length_bound", Kind::Flow),
    ("gauge_fix", Kind::GaugeToy),
    ("lattice_flow", Kind::Lattice),
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    /// `"dormand_prince"` or `"rosenbrock"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    /// `"arclength"` or `"time"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameterization: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WepsOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl WepsOverrides {
    pub fn apply(&self) -> WepsParams {
        let d = WepsParams::default();
        WepsParams {
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            delta: self.delta.unwrap_or(d.delta),
            omega: self.omega.unwrap_or(d.omega),
            alpha: self.alpha.unwrap_or(d.alpha),
        }
    }
}

/// Known analytic facts about a flow scenario, used as oracles.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    /// Degree of a homogeneous field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<f64>,
    /// Lojasiewicz exponent and constant of `‖ℰ′‖ ≥ c|ℰ|^ρ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loj_c: Option<f64>,
    /// Characteristic exponent along the flow from the given start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    /// Cone exponents competing for the trajectory; defaults to `[l]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exponents: Vec<f64>,
    /// Limit of `ℰ/r^l`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    /// `l̂ = (1 − ρ̂)⁻¹` is expected to hold with equality.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub bound_equality: bool,
    /// The remaining-length bound is attained (straight-line flows).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub length_exact: bool,
    /// Nondegenerate Hessian at the origin.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub quadratic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    /// Links start at `exp(v)` with `v` uniform in a ball of this radius.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Step of the short run measuring the dissipation identity.
    #[serde(default = "default_dissipation_dt")]
    pub dissipation_dt: f64,
    #[serde(default = "default_dissipation_steps")]
    pub dissipation_steps: usize,
    /// Step and length of the long run traced by the secant.
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Random gauge transformations for the invariance check.
    #[serde(default = "default_gauge_trials")]
    pub gauge_trials: usize,
}

fn default_dims() -> Vec<usize> {
    vec![2, 2, 2, 2]
}
fn default_radius() -> f64 {
    0.2
}
fn default_dissipation_dt() -> f64 {
    1e-3
}
fn default_dissipation_steps() -> usize {
    2000
}
fn default_dt() -> f64 {
    0.2
}
fn default_steps() -> usize {
    100_000
}
fn default_record_every() -> usize {
    50
}
fn default_gauge_trials() -> usize {
    1000
}

impl Default for LatticeSpec {
    fn default() -> Self {
        LatticeSpec {
            dims: default_dims(),
            radius: default_radius(),
            dissipation_dt: default_dissipation_dt(),
            dissipation_steps: default_dissipation_steps(),
            dt: default_dt(),
            steps: default_steps(),
            record_every: default_record_every(),
            gauge_trials: default_gauge_trials(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    /// Field expression in `x1..xn`; flow scenarios only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    /// Limit point of the toy flow; gauge fixing is relative to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_inf: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub flow: FlowOverrides,
    #[serde(default, skip_serializing_if = "is_default")]
    pub weps: WepsOverrides,
    #[serde(default, skip_serializing_if = "is_default")]
    pub meta: Meta,
    pub analyses: Vec<String>,
    /// Analyses whose failures are reported but do not fail the run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub advisory: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Seed of scenarios that do not declare their own.
    #[serde(default)]
    pub seed: u64,
    pub scenarios: Vec<Scenario>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config, ConfigError> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Config::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut seen = BTreeMap::new();
        for (i, sc) in self.scenarios.iter().enumerate() {
            let at = |f: &str| format!("scenarios[{i}].{f}");
            // Names become file names in the output directory.
            if sc.name.is_empty()
                || sc.name.starts_with('.')
                || !sc.name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
            {
                return Err(schema(at("name"), format!("`{}` is not a plain file name", sc.name)));
            }
            if let Some(j) = seen.insert(sc.name.clone(), i) {
                return Err(schema(at("name"), format!("`{}` already used by scenarios[{j}]", sc.name)));
            }
            for (k, a) in sc.analyses.iter().enumerate() {
                match ANALYZERS.iter().find(|(n, _)| n == a) {
                    None => {
                        return Err(schema(at(&format!("analyses[{k}]")), format!("unknown analyzer `{a}`")));
                    }
                    Some((_, kind)) if *kind != sc.kind => {
                        return Err(schema(
                            at(&format!("analyses[{k}]")),
                            format!("analyzer `{a}` does not apply to {} scenarios", sc.kind),
                        ));
                    }
                    _ => {}
                }
            }
            for (k, a) in sc.advisory.iter().enumerate() {
                if !sc.analyses.contains(a) {
                    return Err(schema(at(&format!("advisory[{k}]")), format!("`{a}` is not in analyses")));
                }
            }
            match sc.kind {
                Kind::Flow => {
                    sc.flow_spec().map_err(|e| match e {
                        ConfigError::Schema { field, msg } => schema(at(&field), msg),
                        other => other,
                    })?;
                    if sc.lattice.is_some() {
                        return Err(schema(at("lattice"), "only lattice scenarios take a lattice spec"));
                    }
                }
                Kind::GaugeToy => {
                    if sc.start.as_ref().is_some_and(|s| s.len() != 3) {
                        return Err(schema(at("start"), "the gauge toy lives in 3 dimensions"));
                    }
                    if sc.x_inf.as_ref().is_some_and(|s| s.len() != 3) {
                        return Err(schema(at("x_inf"), "the gauge toy lives in 3 dimensions"));
                    }
                    if sc.field.is_some() {
                        return Err(schema(at("field"), "the gauge toy has a fixed field"));
                    }
                }
                Kind::Lattice => {
                    let l = sc.lattice.clone().unwrap_or_default();
                    if l.dims.len() < 2 || l.dims.iter().any(|&d| d < 2) {
                        return Err(schema(at("lattice.dims"), "need at least two extents, each at least 2"));
                    }
                    if !(l.dt > 0.0 && l.dissipation_dt > 0.0) || l.record_every == 0 {
                        return Err(schema(at("lattice"), "dt, dissipation_dt and record_every must be positive"));
                    }
                    if sc.field.is_some() || sc.start.is_some() {
                        return Err(schema(at("field"), "lattice scenarios take no field or start"));
                    }
                }
            }
            sc.weps.apply().validate().map_err(|e| schema(at("weps"), e.to_string()))?;
        }
        Ok(())
    }
}

impl Scenario {
    pub fn effective_seed(&self, run_seed: u64) -> u64 {
        self.seed.unwrap_or(run_seed)
    }

    pub fn is_required(&self, analysis: &str) -> bool {
        !self.advisory.iter().any(|a| a == analysis)
    }

    /// The flow specification of a flow scenario, with overrides applied.
    pub fn flow_spec(&self) -> Result<FlowSpec, ConfigError> {
        let src = self.field.as_deref().ok_or_else(|| schema("field", "required"))?;
        let start = self.start.clone().ok_or_else(|| schema("start", "required"))?;
        let field = AnalyticField::parse(src, start.len()).map_err(|e| schema("field", e.to_string()))?;
        let mut spec = FlowSpec::new(field, start);
        self.flow.apply(&mut spec)?;
        spec.validate().map_err(|e| schema("flow", e.to_string()))?;
        Ok(spec)
    }
}

impl FlowOverrides {
    pub fn apply(&self, spec: &mut FlowSpec) -> Result<(), ConfigError> {
        if let Some(v) = self.grad_floor {
            spec.grad_floor = v;
        }
        if let Some(v) = self.r_floor {
            spec.r_floor = v;
        }
        if let Some(v) = self.max_steps {
            spec.max_steps = v;
        }
        if let Some(v) = self.rel_tol {
            spec.rel_tol = v;
        }
        if let Some(v) = self.abs_tol {
            spec.abs_tol = v;
        }
        if let Some(m) = &self.method {
            spec.method = match m.as_str() {
                "dormand_prince" => Method::DormandPrince,
                "rosenbrock" => Method::Rosenbrock,
                other => return Err(schema("flow.method", format!("unknown method `{other}`"))),
            };
        }
        if let Some(p) = &self.parameterization {
            spec.parameterization = match p.as_str() {
                "arclength" => Parameterization::Arclength,
                "time" => Parameterization::Time,
                other => {
                    return Err(schema(
                        "flow.parameterization",
                        format!("unknown parameterization `{other}`"),
                    ))
                }
            };
        }
        if let Some(v) = self.record_ratio {
            spec.record_ratio = v;
        }
        if let Some(v) = self.step_cap {
            spec.step_cap = v;
        }
        if self.s_max.is_some() {
            spec.s_max = self.s_max;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_analyzer_names_the_field() {
        let text = r#"{"scenarios":[{"name":"a","kind":"flow","field":"x1^2+x2^2","start":[0.6,0.8],"analyses":["secant","nope"]}]}"#;
        match Config::from_json(text) {
            Err(ConfigError::Schema { field, msg }) => {
                assert_eq!(field, "scenarios[0].analyses[1]");
                assert!(msg.contains("nope"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_scenario_list_is_valid() {
        assert!(Config::from_json(r#"{"scenarios":[]}"#).unwrap().scenarios.is_empty());
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let sc = r#"{"name":"a","kind":"lattice","analyses":[]}"#;
        let text = format!(r#"{{"scenarios":[{sc},{sc}]}}"#);
        assert!(matches!(Config::from_json(&text), Err(ConfigError::Schema { .. })));
    }

    #[test]
    fn bad_field_is_a_schema_error() {
        let text = r#"{"scenarios":[{"name":"a","kind":"flow","field":"x1^^2","start":[1.0],"analyses":[]}]}"#;
        match Config::from_json(text) {
            Err(ConfigError::Schema { field, .. }) => assert_eq!(field, "scenarios[0].field"),
            other => panic!("{other:?}"),
        }
    }
}
