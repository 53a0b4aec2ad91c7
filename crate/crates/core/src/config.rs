//! Engine configuration. Every field has a default so a partial JSON file
//! (or none at all) is valid.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 20_211_020;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    pub alpha: f64,
    pub n_permutations: usize,
    pub n_bootstrap: usize,
    /// Smallest |effect| a bootstrap resample must show to count as valid.
    pub min_effect: f64,
    pub bins: usize,
    pub min_group_size: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            alpha: 0.05,
            n_permutations: 999,
            n_bootstrap: 500,
            min_effect: 2.0,
            bins: 3,
            min_group_size: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub min_days: i64,
    /// Prior-only rules contribute this fraction of `mining.min_effect`.
    pub prior_magnitude_fraction: f64,
    /// Per-metric cap on |predicted delta| used for utility normalization.
    pub caps: BTreeMap<String, f64>,
    pub default_cap: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let caps = [
            ("sleep_quality", 20.0),
            ("sleep_latency", 30.0),
            ("duration", 60.0),
            ("bedtime", 60.0),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        ModelConfig {
            min_days: 28,
            prior_magnitude_fraction: 0.25,
            caps,
            default_cap: 20.0,
        }
    }
}

impl ModelConfig {
    pub fn cap_for(&self, metric: &str) -> f64 {
        self.caps.get(metric).copied().unwrap_or(self.default_cap)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TasteConfig {
    pub trim: f64,
    pub merge_cutoff: f64,
    pub clusters_max: usize,
    pub rating_threshold: u8,
    pub epsilon: f64,
    pub score_slack: f64,
}

impl Default for TasteConfig {
    fn default() -> Self {
        TasteConfig {
            trim: 0.0,
            merge_cutoff: 0.15,
            clusters_max: 5,
            rating_threshold: 4,
            epsilon: crate::taste::DEFAULT_EPSILON,
            score_slack: crate::taste::DEFAULT_SCORE_SLACK,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecommendConfig {
    pub w_pref: f64,
    pub w_health: f64,
    pub soft_penalty: f64,
}

impl Default for RecommendConfig {
    fn default() -> Self {
        RecommendConfig {
            w_pref: 0.5,
            w_health: 0.5,
            soft_penalty: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnrichmentConfig {
    /// Client labels in resolution order; unlisted clients keep their
    /// registration order after the listed ones.
    pub client_priority: Vec<String>,
    pub cache_ttl_days: i64,
}

impl Default for EnrichmentConfig {
    fn default() -> Self {
        EnrichmentConfig {
            client_priority: vec!["fixture".into(), "nutritionix".into()],
            cache_ttl_days: 30,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bearer_token: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub seed: u64,
    /// Fixed clock (UTC ms) for timestamps the engine stamps itself, such as
    /// `built_at` and `fetched_at`. Unset means wall clock.
    pub clock_ms: Option<i64>,
    pub mining: MiningConfig,
    pub model: ModelConfig,
    pub taste: TasteConfig,
    pub recommend: RecommendConfig,
    pub enrichment: EnrichmentConfig,
    pub service: ServiceConfig,
    pub paths: PathsConfig,
}

/// Data files the engine reads. Relative paths resolve against the working
/// directory, then `PFM_HOME`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub fixtures_dir: String,
    pub knowledge_rules: String,
    pub taste_calibration: String,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            fixtures_dir: "fixtures".into(),
            knowledge_rules: "config/knowledge_rules.json".into(),
            taste_calibration: "config/taste_calibration.json".into(),
        }
    }
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: DEFAULT_SEED,
            clock_ms: None,
            mining: MiningConfig::default(),
            model: ModelConfig::default(),
            taste: TasteConfig::default(),
            recommend: RecommendConfig::default(),
            enrichment: EnrichmentConfig::default(),
            service: ServiceConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("invalid config {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let cfg: Config = serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `PFM_SEED` overrides the configured seed when set to an integer.
    pub fn with_env_seed(mut self, lookup: impl Fn(&str) -> Option<String>) -> Self {
        if let Some(seed) = lookup("PFM_SEED").and_then(|s| s.trim().parse().ok()) {
            self.seed = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.mining;
        if !(m.alpha > 0.0 && m.alpha < 1.0) {
            return Err(ConfigError::Invalid("mining.alpha must be in (0, 1)".into()));
        }
        if m.n_permutations < 200 {
            return Err(ConfigError::Invalid("mining.n_permutations must be >= 200".into()));
        }
        if m.bins == 0 {
            return Err(ConfigError::Invalid("mining.bins must be >= 1".into()));
        }
        let r = &self.recommend;
        if r.w_pref < 0.0 || r.w_health < 0.0 || ((r.w_pref + r.w_health) - 1.0).abs() > 1e-9 {
            return Err(ConfigError::Invalid("recommend weights must be >= 0 and sum to 1".into()));
        }
        if !(0.0..=0.25).contains(&self.taste.trim) {
            return Err(ConfigError::Invalid("taste.trim must be in [0, 0.25]".into()));
        }
        if self.model.caps.values().chain([&self.model.default_cap]).any(|c| !(*c > 0.0)) {
            return Err(ConfigError::Invalid("model caps must be > 0".into()));
        }
        Ok(())
    }

    pub fn now(&self) -> crate::time::Timestamp {
        match self.clock_ms {
            Some(ms) => crate::time::Timestamp(ms),
            None => crate::time::Timestamp(chrono::Utc::now().timestamp_millis()),
        }
    }
}
