//! The TOML run configuration.
//!
//! [`RunConfig`] mirrors the document one to one. [`RunConfig::resolve`]
//! validates it and builds the library objects, collecting every problem it
//! finds as a [`ConfigIssue`] that names the offending key.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use qbc_core::counting::{check_budget, geometric_checkpoints_from, validate_checkpoints, EventKind};
use qbc_core::harness::{ExperimentConfig, FitOptions};
use qbc_core::points::{Metric, PredicateOptions, DEFAULT_BUDGET, DEFAULT_REFINEMENT_CAP};
use qbc_core::rate::{RateFamily, RateFunction};
use qbc_core::{BranchSpec1D, MapSpec, Rational};

/// Exact rational as it appears in the document: a `"p/q"` string or an integer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Q(pub Rational);

impl Serialize for Q {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d).map_err(|_| serde::de::Error::custom("expected a \"p/q\" string or an integer"))? {
            Raw::Int(i) => Ok(Q(Rational::from_integer(i))),
            Raw::Str(s) => s
                .trim()
                .parse()
                .map(Q)
                .map_err(|_| serde::de::Error::custom(format!("`{s}` is not an exact rational \"p/q\""))),
        }
    }
}

impl From<Rational> for Q {
    fn from(r: Rational) -> Self {
        Q(r)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Count,
    Target,
    Measure,
    Intersect,
    Mixing,
    #[default]
    Experiment,
    Fit,
    Dichotomy,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Count => "count",
            Mode::Target => "target",
            Mode::Measure => "measure",
            Mode::Intersect => "intersect",
            Mode::Mixing => "mixing",
            Mode::Experiment => "experiment",
            Mode::Fit => "fit",
            Mode::Dichotomy => "dichotomy",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Event {
    #[default]
    Recurrence,
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Checkpoints {
    /// Only `"geometric"` is recognised.
    Schedule(String),
    List(Vec<u64>),
}

impl Default for Checkpoints {
    fn default() -> Self {
        Checkpoints::Schedule("geometric".into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Depths {
    One(u32),
    Many(Vec<u32>),
}

impl Default for Depths {
    fn default() -> Self {
        Depths::Many(Vec::new())
    }
}

impl Depths {
    pub fn to_vec(&self) -> Vec<u32> {
        match self {
            Depths::One(n) => vec![*n],
            Depths::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchConfig {
    pub left: Q,
    pub right: Q,
    pub slope: Q,
    pub offset: Q,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub branches: Vec<BranchConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub axis: Vec<AxisConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Q>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Q>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Q>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Q>>,
}

/// Either one family for every axis (top-level keys) or `[[rate.axis]]` tables.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Q>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Q>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Q>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Q>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub axis: Vec<FamilyConfig>,
}

impl RateConfig {
    /// The top-level family keys.
    pub fn uniform(&self) -> FamilyConfig {
        FamilyConfig {
            family: self.family.clone(),
            c: self.c.clone(),
            p: self.p.clone(),
            q: self.q.clone(),
            values: self.values.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub x0: Vec<Q>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    #[serde(default)]
    pub n: Depths,
    /// Earlier index for `intersect`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingConfig {
    #[serde(default)]
    pub n: Depths,
    /// One `[lo, hi]` per axis.
    pub e: Vec<[Q; 2]>,
    /// Disjoint rectangles, each one `[lo, hi]` per axis.
    pub f: Vec<Vec<[Q; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceConfig {
    pub a: u64,
    pub b: u64,
}

/// Pass/fail thresholds for `experiment` and `dichotomy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Largest allowed median `|R - Psi| / Psi` at the last checkpoint.
    pub rel_err: f64,
    /// Largest allowed upper end of the slope band.
    pub slope_band: f64,
    /// Largest allowed final count in `dichotomy`.
    pub dichotomy_max: u64,
    /// Smallest fraction of (point, checkpoint) pairs inside the envelope.
    pub envelope: f64,
    /// Bound on `sum 2^d psi(n)` accepted as convergent in `dichotomy`.
    pub psi_bound: f64,
    /// Largest allowed `statistic / sum phi` for the variance check.
    pub variance_ratio: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            rel_err: 0.05,
            slope_band: 0.75,
            dichotomy_max: 20,
            envelope: 0.95,
            psi_bound: 10.0,
            variance_ratio: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    pub svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, svg: true }
    }
}

fn default_inequality() -> String {
    "strict".into()
}
fn default_n_max() -> u64 {
    1000
}
fn default_one() -> u64 {
    1
}
fn default_samples() -> usize {
    100
}
fn default_oracle_cap() -> u32 {
    16
}
fn default_refinement_cap() -> u32 {
    DEFAULT_REFINEMENT_CAP
}
fn default_budget() -> usize {
    DEFAULT_BUDGET
}
fn default_true() -> bool {
    true
}

/// The whole document. Every field has a default except `map` and `rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub event: Event,
    #[serde(default = "default_n_max")]
    pub n_max: u64,
    #[serde(default)]
    pub checkpoints: Checkpoints,
    /// Lower end of the geometric schedule.
    #[serde(default = "default_one")]
    pub checkpoints_from: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_oracle_cap")]
    pub oracle_cap: u32,
    #[serde(default)]
    pub metric: Metric,
    /// Only `"strict"` is accepted; hits need a distance strictly below the radius.
    #[serde(default = "default_inequality")]
    pub inequality: String,
    #[serde(default = "default_refinement_cap")]
    pub refinement_cap: u32,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub keep_hits: bool,
    #[serde(default = "default_true")]
    pub fast_path: bool,
    #[serde(default)]
    pub map: MapConfig,
    #[serde(default)]
    pub rate: RateConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetConfig>,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing: Option<MixingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<VarianceConfig>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output: OutputConfig,
}

/// One validation problem, tied to a key path in the document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config:\n{}", .0.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<ConfigIssue>),
}

impl ConfigError {
    pub fn issues(&self) -> &[ConfigIssue] {
        match self {
            ConfigError::Invalid(v) => v,
            ConfigError::Parse(_) => &[],
        }
    }
}

/// A validated configuration with the library objects built.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub map: MapSpec,
    pub rate: RateFunction,
    pub checkpoints: Vec<u64>,
    pub target: Option<Vec<Rational>>,
}

impl Resolved {
    pub fn kind(&self) -> EventKind {
        match (self.config.mode, self.config.event) {
            (Mode::Target, _) | (_, Event::Target) => EventKind::Target,
            _ => EventKind::Recurrence,
        }
    }

    pub fn predicate(&self) -> PredicateOptions {
        PredicateOptions {
            refinement_cap: self.config.refinement_cap,
            metric: self.config.metric,
            fast_path: self.config.fast_path,
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        let mut e = ExperimentConfig::new(self.map.clone(), self.rate.clone(), self.checkpoints.clone());
        e.kind = self.kind();
        e.target = self.target.clone();
        e.samples = self.config.samples;
        e.master_seed = self.config.seed;
        e.predicate = self.predicate();
        e.keep_hits = self.config.keep_hits || self.config.variance.is_some();
        e.budget = self.config.budget;
        e
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            seed: self.config.seed,
            ..FitOptions::default()
        }
    }
}

/// Parses and validates a TOML document.
pub fn parse_config(doc: &str) -> Result<Resolved, ConfigError> {
    let config: RunConfig = toml::from_str(doc).map_err(|e| ConfigError::Parse(e.to_string()))?;
    config.resolve()
}

/// TOML text for `config`; `parse_config(&emit(c))` gives back `c`.
pub fn emit(config: &RunConfig) -> String {
    toml::to_string(config).expect("config is always representable")
}

fn issue(issues: &mut Vec<ConfigIssue>, key: impl Into<String>, message: impl Into<String>) {
    issues.push(ConfigIssue {
        key: key.into(),
        message: message.into(),
    });
}

fn build_family(key: &str, f: &FamilyConfig, issues: &mut Vec<ConfigIssue>) -> Option<RateFamily> {
    let Some(name) = f.family.as_deref() else {
        issue(issues, format!("{key}.family"), "missing; expected power, power-log, constant or table");
        return None;
    };
    let get = |field: &str, v: &Option<Q>, issues: &mut Vec<ConfigIssue>| -> Option<Rational> {
        match v {
            Some(Q(r)) => Some(r.clone()),
            None => {
                issue(issues, format!("{key}.{field}"), format!("missing for family `{name}`"));
                None
            }
        }
    };
    let nonneg = |field: &str, r: Option<Rational>, issues: &mut Vec<ConfigIssue>| {
        r.filter(|r| {
            let ok = !r.is_negative();
            if !ok {
                issue(issues, format!("{key}.{field}"), "ψ must be ≥ 0");
            }
            ok
        })
    };
    let fam = match name {
        "power" => {
            let c = nonneg("c", get("c", &f.c, issues), issues);
            let p = get("p", &f.p, issues);
            RateFamily::Power { c: c?, p: p? }
        }
        "power-log" => {
            let c = nonneg("c", get("c", &f.c, issues), issues);
            let p = get("p", &f.p, issues);
            let q = get("q", &f.q, issues);
            RateFamily::PowerLog { c: c?, p: p?, q: q? }
        }
        "constant" => RateFamily::Constant {
            c: nonneg("c", get("c", &f.c, issues), issues)?,
        },
        "table" => {
            let Some(values) = &f.values else {
                issue(issues, format!("{key}.values"), "missing for family `table`");
                return None;
            };
            if values.iter().any(|v| v.0.is_negative()) {
                issue(issues, format!("{key}.values"), "ψ must be ≥ 0");
                return None;
            }
            RateFamily::Table {
                values: values.iter().map(|v| v.0.clone()).collect(),
            }
        }
        other => {
            issue(
                issues,
                format!("{key}.family"),
                format!("unknown family `{other}`; expected power, power-log, constant or table"),
            );
            return None;
        }
    };
    match RateFunction::new(vec![fam.clone()]) {
        Ok(_) => Some(fam),
        Err(e) => {
            issue(issues, key.to_string(), e.to_string());
            None
        }
    }
}

impl RunConfig {
    /// Validates every field and builds the library objects.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let mut issues = Vec::new();
        if self.inequality != "strict" {
            issue(&mut issues, "inequality", "only \"strict\" is supported");
        }

        let map = match (&self.map.builtin, self.map.axis.is_empty()) {
            (Some(_), false) => {
                issue(&mut issues, "map", "give either `builtin` or `axis`, not both");
                None
            }
            (None, true) => {
                issue(&mut issues, "map", "missing; set `builtin` or list `[[map.axis]]` branches");
                None
            }
            (Some(name), true) => MapSpec::builtin(name)
                .map_err(|e| issue(&mut issues, "map.builtin", e.to_string()))
                .ok(),
            (None, false) => {
                let axes = self
                    .map
                    .axis
                    .iter()
                    .map(|a| {
                        a.branches
                            .iter()
                            .map(|b| BranchSpec1D::new(b.left.0.clone(), b.right.0.clone(), b.slope.0.clone(), b.offset.0.clone()))
                            .collect()
                    })
                    .collect();
                MapSpec::new(axes)
                    .map_err(|e| {
                        let key = match &e {
                            qbc_core::MapError::NotFullBranch { axis, branch, .. }
                            | qbc_core::MapError::NotExpanding { axis, branch, .. } => {
                                format!("map.axis[{axis}].branches[{branch}]")
                            }
                            qbc_core::MapError::NotPartition { axis, .. }
                            | qbc_core::MapError::NoBranches { axis }
                            | qbc_core::MapError::TooManyBranches { axis, .. }
                            | qbc_core::MapError::SamplingDenominator { axis } => format!("map.axis[{axis}]"),
                            _ => "map".into(),
                        };
                        let message = match &e {
                            qbc_core::MapError::NotFullBranch { .. } => format!("branch image ≠ [0,1]: {e}"),
                            _ => e.to_string(),
                        };
                        issue(&mut issues, key, message)
                    })
                    .ok()
            }
        };

        let rate = if self.rate.axis.is_empty() {
            if self.rate.uniform() == FamilyConfig::default() {
                issue(&mut issues, "rate", "missing; set `family` and its parameters or list `[[rate.axis]]`");
                None
            } else {
                build_family("rate", &self.rate.uniform(), &mut issues).and_then(|f| {
                    let d = map.as_ref().map_or(1, MapSpec::dimension);
                    RateFunction::uniform(f, d).ok()
                })
            }
        } else {
            if self.rate.uniform() != FamilyConfig::default() {
                issue(&mut issues, "rate", "give either top-level family keys or `[[rate.axis]]`, not both");
            }
            let fams: Vec<_> = self
                .rate
                .axis
                .iter()
                .enumerate()
                .map(|(i, f)| build_family(&format!("rate.axis[{i}]"), f, &mut issues))
                .collect();
            fams.into_iter().collect::<Option<Vec<_>>>().and_then(|f| RateFunction::new(f).ok())
        };
        if let (Some(m), Some(r)) = (&map, &rate) {
            if let Err(e) = r.check_dimension(m.dimension()) {
                issue(&mut issues, "rate.axis", e.to_string());
            }
        }

        if self.n_max == 0 {
            issue(&mut issues, "n_max", "must be at least 1");
        }
        let checkpoints = match &self.checkpoints {
            Checkpoints::Schedule(s) if s == "geometric" => {
                if self.checkpoints_from == 0 || self.checkpoints_from > self.n_max {
                    issue(&mut issues, "checkpoints_from", "must lie in [1, n_max]");
                }
                geometric_checkpoints_from(self.checkpoints_from.max(1), self.n_max.max(1))
            }
            Checkpoints::Schedule(s) => {
                issue(&mut issues, "checkpoints", format!("unknown schedule `{s}`; use \"geometric\" or a list"));
                Vec::new()
            }
            Checkpoints::List(v) => {
                if validate_checkpoints(v).is_err() {
                    issue(&mut issues, "checkpoints", "must be positive and strictly increasing");
                } else if v.last() != Some(&self.n_max) {
                    issue(&mut issues, "checkpoints", "last checkpoint must equal n_max");
                }
                v.clone()
            }
        };

        let needs_points = matches!(
            self.mode,
            Mode::Count | Mode::Target | Mode::Experiment | Mode::Fit | Mode::Dichotomy
        );
        let min_samples = if matches!(self.mode, Mode::Experiment | Mode::Fit | Mode::Dichotomy) { 2 } else { 1 };
        if needs_points && self.samples < min_samples {
            issue(
                &mut issues,
                "samples",
                format!("must be at least {min_samples}, got {}", self.samples),
            );
        }

        let wants_target = self.mode == Mode::Target || self.event == Event::Target;
        let target = match (&self.target, wants_target) {
            (Some(t), _) => {
                let x0: Vec<Rational> = t.x0.iter().map(|q| q.0.clone()).collect();
                match &map {
                    Some(m) => match m.check_point(&x0) {
                        Ok(()) => Some(x0),
                        Err(e) => {
                            issue(&mut issues, "target.x0", e.to_string());
                            None
                        }
                    },
                    None => Some(x0),
                }
            }
            (None, true) => {
                issue(&mut issues, "target.x0", "missing; target mode needs a center");
                None
            }
            (None, false) => None,
        };

        match self.mode {
            Mode::Measure if self.measure.n.to_vec().is_empty() => {
                issue(&mut issues, "measure.n", "missing; list the depths to measure")
            }
            Mode::Intersect => {
                let ns = self.measure.n.to_vec();
                match (self.measure.m, ns.as_slice()) {
                    (None, _) => issue(&mut issues, "measure.m", "missing; intersect needs m and n"),
                    (_, []) => issue(&mut issues, "measure.n", "missing; intersect needs m and n"),
                    (Some(m), ns) if ns.iter().any(|&n| n < m) => {
                        issue(&mut issues, "measure.m", "must not exceed n")
                    }
                    _ => {}
                }
            }
            Mode::Mixing => match &self.mixing {
                None => issue(&mut issues, "mixing", "missing; set n, e and f"),
                Some(mx) => {
                    if mx.n.to_vec().is_empty() {
                        issue(&mut issues, "mixing.n", "missing");
                    }
                    if let Some(m) = &map {
                        if mx.e.len() != m.dimension() {
                            issue(&mut issues, "mixing.e", format!("needs one interval per axis ({})", m.dimension()));
                        }
                        if mx.f.iter().any(|r| r.len() != m.dimension()) {
                            issue(&mut issues, "mixing.f", format!("each rectangle needs {} intervals", m.dimension()));
                        }
                    }
                }
            },
            _ => {}
        }
        if matches!(self.mode, Mode::Measure | Mode::Intersect) {
            if let Some(m) = &map {
                for n in self.measure.n.to_vec() {
                    if n == 0 {
                        issue(&mut issues, "measure.n", "depths start at 1");
                    } else if n > self.oracle_cap {
                        issue(&mut issues, "measure.n", format!("depth {n} exceeds oracle_cap {}", self.oracle_cap));
                    } else if let Err(e) = m.cylinders(n).map(|_| ()) {
                        issue(&mut issues, "measure.n", e.to_string());
                    }
                }
            }
        }

        if let Some(v) = &self.variance {
            if v.a == 0 || v.a >= v.b || v.b > self.n_max {
                issue(&mut issues, "variance", "need 1 <= a < b <= n_max");
            }
        }

        if needs_points && issues.is_empty() {
            let (m, r) = (map.as_ref().expect("no issues"), rate.as_ref().expect("no issues"));
            if let Err(e) = check_budget(m, r, self.n_max, self.refinement_cap, self.budget) {
                issue(&mut issues, "budget", e.to_string());
            }
        }

        if !issues.is_empty() {
            return Err(ConfigError::Invalid(issues));
        }
        Ok(Resolved {
            config: self.clone(),
            map: map.expect("validated"),
            rate: rate.expect("validated"),
            checkpoints,
            target,
        })
    }

    /// SHA-256 of the emitted document with output settings cleared.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        let digest = Sha256::digest(emit(&c).as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
