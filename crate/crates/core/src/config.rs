//! Experiment configuration: parsing, defaults and validation.
//!
//! A configuration is a single JSON document whose field names match
//! [`ExperimentConfig`]. Only `n_items` and `regimes` are required; every
//! other field has a documented default that is filled in by
//! [`parse_config`]. The resolved configuration serializes back to a
//! document that parses to the same value.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Default number of latent factors.
pub const DEFAULT_K_FACTORS: usize = 100;
/// Default standard deviation for factor materialization.
pub const DEFAULT_SIGMA_FACTOR: f64 = 0.1;
/// Default normalization range.
pub const DEFAULT_NORM_RANGE: (f64, f64) = (1.0, 5.0);
/// Default master seed.
pub const DEFAULT_SEED: u64 = 42;
/// Default per-feature item probability when `item_feature_probs` is omitted.
pub const DEFAULT_ITEM_FEATURE_PROB: f64 = 0.5;
/// Default candidate pool size (capped at `n_items`).
pub const DEFAULT_CANDIDATE_SIZE: usize = 100;
/// Default output list size (capped at `candidate_size`).
pub const DEFAULT_LIST_SIZE: usize = 10;

/// Parameters of a normal distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gaussian {
    pub mean: f64,
    pub stddev: f64,
}

impl Gaussian {
    pub const fn new(mean: f64, stddev: f64) -> Self {
        Self { mean, stddev }
    }
}

/// One block of users sharing a propensity distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    pub user_count: usize,
    /// One distribution per latent factor.
    pub user_factor_dists: Vec<Gaussian>,
}

/// How bias penalties are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasDrawScope {
    /// A fresh draw for every (user, item, feature) occurrence.
    #[default]
    Occurrence,
    /// One draw per (item, feature), shared by every user.
    Item,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_items: usize,
    pub k_factors: usize,
    /// The first `s_sensitive` factors are the protected features.
    pub s_sensitive: usize,
    pub sigma_factor: f64,
    /// Overrides `sigma_factor` for user factors when set.
    pub sigma_factor_user: Option<f64>,
    /// Overrides `sigma_factor` for item factors when set.
    pub sigma_factor_item: Option<f64>,
    pub item_feature_probs: Vec<f64>,
    pub regimes: Vec<RegimeSpec>,
    pub bias_specs: Vec<Gaussian>,
    pub bias_draw_scope: BiasDrawScope,
    pub candidate_size: usize,
    pub list_size: usize,
    pub norm_range: (f64, f64),
    pub seed: u64,
    pub emit_candidates: bool,
    pub emit_factors: bool,
}

impl ExperimentConfig {
    pub fn n_users(&self) -> usize {
        self.regimes.iter().map(|r| r.user_count).sum()
    }

    pub fn user_sigma(&self) -> f64 {
        self.sigma_factor_user.unwrap_or(self.sigma_factor)
    }

    pub fn item_sigma(&self) -> f64 {
        self.sigma_factor_item.unwrap_or(self.sigma_factor)
    }

    /// Number of entries kept per list.
    pub fn retained_per_list(&self) -> usize {
        if self.emit_candidates {
            self.candidate_size
        } else {
            self.list_size
        }
    }
}

/// The on-disk form: everything but `n_items` and `regimes` is optional.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDocument {
    n_items: usize,
    k_factors: Option<usize>,
    s_sensitive: Option<usize>,
    sigma_factor: Option<f64>,
    sigma_factor_user: Option<f64>,
    sigma_factor_item: Option<f64>,
    item_feature_probs: Option<Vec<f64>>,
    regimes: Vec<RegimeSpec>,
    bias_specs: Option<Vec<Gaussian>>,
    bias_draw_scope: Option<BiasDrawScope>,
    candidate_size: Option<usize>,
    list_size: Option<usize>,
    norm_range: Option<(f64, f64)>,
    seed: Option<u64>,
    emit_candidates: Option<bool>,
    emit_factors: Option<bool>,
}

impl ConfigDocument {
    fn resolve(self) -> ExperimentConfig {
        let k_factors = self.k_factors.unwrap_or(DEFAULT_K_FACTORS);
        let s_sensitive = self.s_sensitive.unwrap_or(0);
        let candidate_size = self
            .candidate_size
            .unwrap_or_else(|| DEFAULT_CANDIDATE_SIZE.min(self.n_items));
        let list_size = self
            .list_size
            .unwrap_or_else(|| DEFAULT_LIST_SIZE.min(candidate_size));
        ExperimentConfig {
            n_items: self.n_items,
            k_factors,
            s_sensitive,
            sigma_factor: self.sigma_factor.unwrap_or(DEFAULT_SIGMA_FACTOR),
            sigma_factor_user: self.sigma_factor_user,
            sigma_factor_item: self.sigma_factor_item,
            item_feature_probs: self
                .item_feature_probs
                .unwrap_or_else(|| vec![DEFAULT_ITEM_FEATURE_PROB; k_factors]),
            regimes: self.regimes,
            bias_specs: self
                .bias_specs
                .unwrap_or_else(|| vec![Gaussian::new(0.0, 0.0); s_sensitive]),
            bias_draw_scope: self.bias_draw_scope.unwrap_or_default(),
            candidate_size,
            list_size,
            norm_range: self.norm_range.unwrap_or(DEFAULT_NORM_RANGE),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            emit_candidates: self.emit_candidates.unwrap_or(false),
            emit_factors: self.emit_factors.unwrap_or(false),
        }
    }
}

/// A single violated invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

impl ConfigError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ConfigError::Invalid(v) => v,
            ConfigError::Parse { .. } => &[],
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Parses and validates a JSON configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let doc: ConfigDocument = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    validate_config(doc.resolve())
}

/// Renders a configuration as a pretty-printed JSON document.
pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serialization is infallible")
}

/// Checks every invariant and returns the config unchanged if all hold.
/// All violations are collected.
pub fn validate_config(cfg: ExperimentConfig) -> Result<ExperimentConfig, ConfigError> {
    let mut out = Vec::new();
    let mut fail = |field: String, rule: &str| {
        out.push(Violation {
            field,
            rule: rule.to_string(),
        })
    };

    if cfg.n_items == 0 {
        fail("n_items".into(), "n_items > 0");
    }
    if cfg.k_factors == 0 {
        fail("k_factors".into(), "k_factors > 0");
    }
    if cfg.s_sensitive > cfg.k_factors {
        fail("s_sensitive".into(), "s_sensitive ≤ k_factors");
    }
    for (name, sigma) in [
        ("sigma_factor", Some(cfg.sigma_factor)),
        ("sigma_factor_user", cfg.sigma_factor_user),
        ("sigma_factor_item", cfg.sigma_factor_item),
    ] {
        if let Some(s) = sigma {
            if !(s.is_finite() && s >= 0.0) {
                fail(name.into(), "stddev ≥ 0");
            }
        }
    }

    if cfg.item_feature_probs.len() != cfg.k_factors {
        fail(
            "item_feature_probs".into(),
            "length(item_feature_probs) = k_factors",
        );
    }
    for (j, p) in cfg.item_feature_probs.iter().enumerate() {
        if !(0.0..=1.0).contains(p) {
            fail(format!("item_feature_probs[{j}]"), "probability in [0,1]");
        }
    }

    if cfg.bias_specs.len() != cfg.s_sensitive {
        fail("bias_specs".into(), "length(bias_specs) = s_sensitive");
    }
    for (j, b) in cfg.bias_specs.iter().enumerate() {
        if !b.mean.is_finite() {
            fail(format!("bias_specs[{j}].mean"), "mean is finite");
        }
        if !(b.stddev.is_finite() && b.stddev >= 0.0) {
            fail(format!("bias_specs[{j}].stddev"), "stddev ≥ 0");
        }
    }

    if cfg.regimes.is_empty() {
        fail("regimes".into(), "at least one regime");
    }
    for (r, regime) in cfg.regimes.iter().enumerate() {
        if regime.user_count == 0 {
            fail(format!("regimes[{r}].user_count"), "user_count > 0");
        }
        if regime.user_factor_dists.len() != cfg.k_factors {
            fail(
                format!("regimes[{r}].user_factor_dists"),
                "length(user_factor_dists) = k_factors",
            );
        }
        for (j, d) in regime.user_factor_dists.iter().enumerate() {
            if !d.mean.is_finite() {
                fail(
                    format!("regimes[{r}].user_factor_dists[{j}].mean"),
                    "mean is finite",
                );
            }
            if !(d.stddev.is_finite() && d.stddev >= 0.0) {
                fail(
                    format!("regimes[{r}].user_factor_dists[{j}].stddev"),
                    "stddev ≥ 0",
                );
            }
        }
    }

    if cfg.candidate_size == 0 {
        fail("candidate_size".into(), "candidate_size > 0");
    }
    if cfg.list_size == 0 {
        fail("list_size".into(), "list_size > 0");
    }
    if cfg.list_size > cfg.candidate_size {
        fail("list_size".into(), "list_size ≤ candidate_size");
    }
    if cfg.candidate_size > cfg.n_items {
        fail("candidate_size".into(), "candidate_size ≤ n_items");
    }

    let (lo, hi) = cfg.norm_range;
    if !(lo.is_finite() && hi.is_finite()) {
        fail("norm_range".into(), "bounds are finite");
    } else if lo >= hi {
        fail("norm_range".into(), "lo < hi");
    }

    if out.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regime_json(count: usize, k: usize) -> String {
        let dists = vec![r#"{"mean":0.5,"stddev":0.1}"#; k].join(",");
        format!(r#"{{"user_count":{count},"user_factor_dists":[{dists}]}}"#)
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let text = format!(
            r#"{{"n_items":100,"k_factors":100,"regimes":[{}]}}"#,
            regime_json(5, 100)
        );
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.k_factors, 100);
        assert_eq!(cfg.sigma_factor, 0.1);
        assert_eq!(cfg.norm_range, (1.0, 5.0));
        assert!(!cfg.emit_candidates);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.item_feature_probs, vec![0.5; 100]);
        assert_eq!(cfg.candidate_size, 100);
        assert_eq!(cfg.list_size, 10);
        assert_eq!(cfg.s_sensitive, 0);
        assert!(cfg.bias_specs.is_empty());
        assert_eq!(cfg.bias_draw_scope, BiasDrawScope::Occurrence);
    }

    #[test]
    fn k_defaults_to_100() {
        let text = format!(r#"{{"n_items":200,"regimes":[{}]}}"#, regime_json(1, 100));
        assert_eq!(parse_config(&text).unwrap().k_factors, 100);
    }

    #[test]
    fn more_sensitive_than_factors_is_rejected() {
        let text = format!(
            r#"{{"n_items":10,"k_factors":2,"s_sensitive":3,"regimes":[{}]}}"#,
            regime_json(1, 2)
        );
        let err = parse_config(&text).unwrap_err();
        assert!(err
            .violations()
            .iter()
            .any(|v| v.rule == "s_sensitive ≤ k_factors"));
    }

    #[test]
    fn list_larger_than_candidates_is_rejected() {
        let text = format!(
            r#"{{"n_items":50,"k_factors":2,"candidate_size":10,"list_size":20,"regimes":[{}]}}"#,
            regime_json(1, 2)
        );
        let err = parse_config(&text).unwrap_err();
        assert!(err
            .violations()
            .iter()
            .any(|v| v.field == "list_size" && v.rule == "list_size ≤ candidate_size"));
    }

    #[test]
    fn syntax_error_names_line() {
        let err = parse_config("{\n  \"n_items\": 10,\n  oops\n}").unwrap_err();
        match err {
            ConfigError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_a_parse_error() {
        let text = format!(
            r#"{{"n_items":10,"k_factors":1,"bogus":1,"regimes":[{}]}}"#,
            regime_json(1, 1)
        );
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }));
        assert!(err.to_string().contains("bogus"));
    }

    fn valid() -> ExperimentConfig {
        ExperimentConfig {
            n_items: 20,
            k_factors: 2,
            s_sensitive: 1,
            sigma_factor: 0.1,
            sigma_factor_user: None,
            sigma_factor_item: None,
            item_feature_probs: vec![0.3, 0.5],
            regimes: vec![RegimeSpec {
                user_count: 3,
                user_factor_dists: vec![Gaussian::new(0.0, 1.0); 2],
            }],
            bias_specs: vec![Gaussian::new(0.1, 0.0)],
            bias_draw_scope: BiasDrawScope::Occurrence,
            candidate_size: 10,
            list_size: 5,
            norm_range: (1.0, 5.0),
            seed: 7,
            emit_candidates: false,
            emit_factors: false,
        }
    }

    #[test]
    fn valid_config_is_identity() {
        assert_eq!(validate_config(valid()).unwrap(), valid());
    }

    #[test]
    fn probability_out_of_range() {
        let mut cfg = valid();
        cfg.item_feature_probs[1] = 1.5;
        let err = validate_config(cfg).unwrap_err();
        assert_eq!(
            err.violations(),
            &[Violation {
                field: "item_feature_probs[1]".into(),
                rule: "probability in [0,1]".into()
            }]
        );
    }

    #[test]
    fn reversed_norm_range() {
        let mut cfg = valid();
        cfg.norm_range = (5.0, 1.0);
        let err = validate_config(cfg).unwrap_err();
        assert_eq!(err.violations()[0].rule, "lo < hi");
    }

    #[test]
    fn all_violations_are_collected() {
        let mut cfg = valid();
        cfg.norm_range = (5.0, 1.0);
        cfg.bias_specs[0].stddev = -1.0;
        cfg.regimes[0].user_factor_dists.pop();
        cfg.candidate_size = 100;
        let err = validate_config(cfg).unwrap_err();
        let fields: Vec<_> = err.violations().iter().map(|v| v.field.as_str()).collect();
        assert_eq!(
            fields,
            [
                "bias_specs[0].stddev",
                "regimes[0].user_factor_dists",
                "candidate_size",
                "norm_range"
            ]
        );
    }

    #[test]
    fn serialize_round_trips() {
        let mut cfg = valid();
        cfg.sigma_factor_user = Some(0.3);
        cfg.bias_draw_scope = BiasDrawScope::Item;
        let text = serialize_config(&cfg);
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
