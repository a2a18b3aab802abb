use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::TestFunction;
use crate::potential::PotentialKind;

/// What a run computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Tensors,
    CheckPotential,
    Sample,
    Simulate,
    Fields,
    BgTest,
    Sbe,
    Compare,
    Sweep,
}

impl Kind {
    pub const ALL: [Kind; 9] = [
        Kind::Tensors,
        Kind::CheckPotential,
        Kind::Sample,
        Kind::Simulate,
        Kind::Fields,
        Kind::BgTest,
        Kind::Sbe,
        Kind::Compare,
        Kind::Sweep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Tensors => "tensors",
            Kind::CheckPotential => "check-potential",
            Kind::Sample => "sample",
            Kind::Simulate => "simulate",
            Kind::Fields => "fields",
            Kind::BgTest => "bg-test",
            Kind::Sbe => "sbe",
            Kind::Compare => "compare",
            Kind::Sweep => "sweep",
        }
    }

    /// Kinds that run the lattice and therefore need at least one size.
    fn needs_sizes(self) -> bool {
        !matches!(self, Kind::Tensors | Kind::CheckPotential | Kind::Sbe)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsSection {
    /// Windows `l` of the quadratic fields `A`.
    #[serde(default)]
    pub windows: Vec<usize>,
    /// Microscopic spacing of the time quadrature.
    #[serde(default = "default_observe_dt")]
    pub observe_dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<f64>,
}

impl Default for FieldsSection {
    fn default() -> Self {
        Self {
            windows: Vec::new(),
            observe_dt: default_observe_dt(),
            frame: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BgSection {
    #[serde(default)]
    pub pair: [usize; 2],
    #[serde(default = "default_bg_tf")]
    pub test_function: String,
    /// Defaults to the powers of two up to `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<usize>>,
    /// Quadrature spacing in lattice steps, so that no partial steps are taken.
    #[serde(default = "default_observe_steps")]
    pub observe_steps: usize,
}

impl Default for BgSection {
    fn default() -> Self {
        Self {
            pair: [0, 0],
            test_function: default_bg_tf(),
            windows: None,
            observe_steps: default_observe_steps(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbeSection {
    #[serde(default = "default_modes")]
    pub modes: usize,
    /// Defaults to the stability bound for the coupling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Defaults to the top-level replica count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
}

impl Default for SbeSection {
    fn default() -> Self {
        Self {
            modes: default_modes(),
            dt: None,
            replicas: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    /// Macroscopic spacing of the common time grid.
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_lags")]
    pub lags: Vec<f64>,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            tau: default_tau(),
            lags: default_lags(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    #[serde(default = "default_count")]
    pub count: usize,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self { count: default_count() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepQuantity {
    Qv,
    Bg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_quantity")]
    pub quantity: SweepQuantity,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { quantity: default_quantity() }
    }
}

/// One experiment. Every field has a default, so an empty file is valid for
/// most kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default = "default_potential")]
    pub potential: PotentialKind,
    #[serde(default = "default_gamma_v")]
    pub gamma_v: f64,
    /// Defaults to the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    /// Defaults to `n^{-1/2}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Microscopic step; defaults to the sampled stability bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    /// Evenly spaced recording times on `[0, T]`, both ends included.
    #[serde(default = "default_records")]
    pub records: usize,
    #[serde(default = "default_tfs")]
    pub test_functions: Vec<String>,
    #[serde(default)]
    pub fields: FieldsSection,
    #[serde(default)]
    pub bg: BgSection,
    #[serde(default)]
    pub sbe: SbeSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub sample: SampleSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

fn default_observe_dt() -> f64 {
    0.25
}
fn default_bg_tf() -> String {
    "sin1".into()
}
fn default_observe_steps() -> usize {
    10
}
fn default_modes() -> usize {
    64
}
fn default_tau() -> f64 {
    0.01
}
fn default_lags() -> Vec<f64> {
    vec![0.0, 0.1, 0.5]
}
fn default_count() -> usize {
    10_000
}
fn default_quantity() -> SweepQuantity {
    SweepQuantity::Qv
}
fn default_out() -> PathBuf {
    PathBuf::from("results")
}
fn default_potential() -> PotentialKind {
    PotentialKind::Toda
}
fn default_gamma_v() -> f64 {
    1.0
}
fn default_sizes() -> Vec<usize> {
    vec![64]
}
fn default_t_end() -> f64 {
    1.0
}
fn default_replicas() -> u64 {
    8
}
fn default_records() -> usize {
    11
}
fn default_tfs() -> Vec<String> {
    vec!["sin1".into(), "cos1".into()]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_toml_str("").expect("defaults are valid")
    }
}

fn cfg_err(e: impl fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// `value` as a TOML literal, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.into())),
        Err(_) => toml::Value::String(value.into()),
    }
}

/// Sets `a.b.c = value`, creating tables on the way.
fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(cfg_err(format!("malformed key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| cfg_err(format!("`{p}` in `{key}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_table(text.parse::<toml::Table>().map_err(cfg_err)?)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let given: Option<Vec<String>> = table.get("potential").and_then(|p| p.as_table()).map(|t| t.keys().cloned().collect());
        let cfg: Self = toml::Value::Table(table).try_into().map_err(cfg_err)?;
        // serde does not reject extra keys on unit variants of a tagged enum
        // (`kind = "toda"` with `alpha = 1`), so compare against the canonical form
        if let Some(given) = given {
            let canonical = toml::Value::try_from(&cfg.potential).map_err(cfg_err)?;
            let known = canonical.as_table().map(|t| t.keys().cloned().collect::<Vec<_>>()).unwrap_or_default();
            if let Some(k) = given.iter().find(|k| !known.contains(k)) {
                return Err(cfg_err(format!("unknown key `{k}` for potential `{}`", cfg.potential.label())));
            }
        }
        Ok(cfg)
    }

    /// Reads `path` (if any), applies `key=value` overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| cfg_err(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>().map_err(cfg_err)?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| cfg_err(format!("override `{o}` is not key=value")))?;
            set_path(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        Self::from_table(table)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(cfg_err)
    }

    pub fn kind(&self) -> Result<Kind> {
        self.kind.ok_or_else(|| cfg_err("no experiment kind given"))
    }

    /// Fixes the kind from the command line; a different kind in the file is an error.
    pub fn with_kind(mut self, kind: Kind) -> Result<Self> {
        match self.kind {
            Some(k) if k != kind => Err(cfg_err(format!("config is for `{k}` but `{kind}` was requested"))),
            _ => {
                self.kind = Some(kind);
                Ok(self)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn lambda(&self) -> Vec<f64> {
        self.lambda.clone().unwrap_or_else(|| vec![0.0; self.dim()])
    }

    pub fn test_function_list(&self) -> Result<Vec<TestFunction>> {
        self.test_functions
            .iter()
            .map(|s| TestFunction::from_name(s).map_err(|e| cfg_err(format!("test function `{s}`: {e}"))))
            .collect()
    }

    /// Record times implied by `records` and `t_end`.
    pub fn record_times(&self) -> Vec<f64> {
        let k = self.records;
        if k <= 1 || self.t_end == 0.0 {
            return vec![self.t_end];
        }
        (0..k).map(|r| self.t_end * r as f64 / (k - 1) as f64).collect()
    }

    /// Checks everything that can be checked without building the potential.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        if self.seed > i64::MAX as u64 {
            return Err(cfg_err("`seed` must be at most 2^63 - 1 (TOML integers are signed)"));
        }
        if kind.needs_sizes() && self.sizes.is_empty() {
            return Err(cfg_err("`sizes` must list at least one lattice size"));
        }
        if let Some(&n) = self.sizes.iter().find(|&&n| n < 2) {
            return Err(cfg_err(format!("lattice size {n} is below 2")));
        }
        if self.lambda().len() != self.dim() {
            return Err(cfg_err(format!("`lambda` needs {} entries", self.dim())));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(cfg_err("`t_end` must be finite and non-negative"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(cfg_err("`dt` must be positive"));
            }
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(cfg_err("`beta` must be positive"));
            }
        }
        if !(self.gamma_v > 0.0 && self.gamma_v.is_finite()) {
            return Err(cfg_err("`gamma_v` must be positive"));
        }
        if self.replicas == 0 {
            return Err(cfg_err("`replicas` must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(cfg_err("`threads` must be at least 1"));
        }
        self.test_function_list()?;
        TestFunction::from_name(&self.bg.test_function).map_err(|e| cfg_err(format!("bg test function: {e}")))?;
        if self.bg.observe_steps == 0 {
            return Err(cfg_err("`bg.observe_steps` must be at least 1"));
        }
        if !(self.fields.observe_dt > 0.0) {
            return Err(cfg_err("`fields.observe_dt` must be positive"));
        }
        if !(self.compare.tau > 0.0) || self.compare.lags.iter().any(|l| !(*l >= 0.0)) {
            return Err(cfg_err("`compare.tau` must be positive and lags non-negative"));
        }
        if self.sample.count == 0 {
            return Err(cfg_err("`sample.count` must be at least 1"));
        }
        if kind == Kind::Sweep && self.sweep.quantity == SweepQuantity::Qv && self.t_end == 0.0 {
            return Err(cfg_err("a quadratic-variation sweep needs `t_end` > 0"));
        }
        Ok(())
    }
}
