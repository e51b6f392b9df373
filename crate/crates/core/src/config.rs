//! Shared runtime configuration.
//!
//! Each source produces a [`ConfigLayer`]; [`Config::resolve`] merges them
//! with precedence flags > environment > file > defaults.

use std::path::PathBuf;

use serde::Deserialize;
use thiserror::Error;

use crate::clustering::DEFAULT_K;
use crate::retrieval::GraphThresholds;
use crate::similarity::{ScorerConfig, ScorerConfigError, ScorerKind};

pub const ENV_PREFIX: &str = "DEBBIE_";
pub const DEFAULT_DATA_DIR: &str = "data";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scorer: ScorerConfig,
    pub k: usize,
    pub thresholds: GraphThresholds,
    pub seed: u64,
    pub data_dir: PathBuf,
    pub bind: String,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            scorer: ScorerConfig::Lexical,
            k: DEFAULT_K,
            thresholds: GraphThresholds::default(),
            seed: DEFAULT_SEED,
            data_dir: PathBuf::from(DEFAULT_DATA_DIR),
            bind: DEFAULT_BIND.to_string(),
        }
    }
}

impl Config {
    pub fn index_dir(&self) -> PathBuf {
        self.data_dir.join("indexes")
    }

    pub fn transcript_dir(&self) -> PathBuf {
        self.data_dir.join("transcripts")
    }

    pub fn resolve(flags: ConfigLayer, env: ConfigLayer, file: ConfigLayer) -> Result<Config, ConfigError> {
        let merged = flags.or(env).or(file);
        let defaults = Config::default();
        let k = merged.k.unwrap_or(defaults.k);
        if k == 0 {
            return Err(ConfigError::Invalid("k must be at least 1".into()));
        }
        let thresholds = merged.thresholds.unwrap_or(defaults.thresholds);
        thresholds.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let scorer = ScorerConfig::from_parts(
            merged.scorer.unwrap_or(ScorerKind::Lexical),
            merged.scorer_endpoint,
            merged.scorer_table,
            merged.max_in_flight,
        )?;
        Ok(Config {
            scorer,
            k,
            thresholds,
            seed: merged.seed.unwrap_or(defaults.seed),
            data_dir: merged.data_dir.unwrap_or(defaults.data_dir),
            bind: merged.bind.unwrap_or(defaults.bind),
        })
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error("{source_name}: {message}")]
    BadValue { source_name: String, message: String },
    #[error(transparent)]
    Scorer(#[from] ScorerConfigError),
    #[error("config file {path}: {message}")]
    File { path: String, message: String },
}

/// Partial configuration from one source.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub scorer: Option<ScorerKind>,
    pub scorer_endpoint: Option<String>,
    pub scorer_table: Option<PathBuf>,
    pub max_in_flight: Option<usize>,
    pub k: Option<usize>,
    pub thresholds: Option<GraphThresholds>,
    pub seed: Option<u64>,
    pub data_dir: Option<PathBuf>,
    pub bind: Option<String>,
}

impl ConfigLayer {
    /// Fields set here win over `lower`.
    pub fn or(self, lower: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            scorer: self.scorer.or(lower.scorer),
            scorer_endpoint: self.scorer_endpoint.or(lower.scorer_endpoint),
            scorer_table: self.scorer_table.or(lower.scorer_table),
            max_in_flight: self.max_in_flight.or(lower.max_in_flight),
            k: self.k.or(lower.k),
            thresholds: self.thresholds.or(lower.thresholds),
            seed: self.seed.or(lower.seed),
            data_dir: self.data_dir.or(lower.data_dir),
            bind: self.bind.or(lower.bind),
        }
    }

    /// Reads `DEBBIE_*` variables. Unrelated variables are ignored.
    pub fn from_env<I, K, V>(vars: I) -> Result<ConfigLayer, ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut layer = ConfigLayer::default();
        for (key, value) in vars {
            let Some(name) = key.as_ref().strip_prefix(ENV_PREFIX) else { continue };
            let value = value.as_ref();
            let bad = |message: String| ConfigError::BadValue { source_name: key.as_ref().to_string(), message };
            match name {
                "SCORER" => layer.scorer = Some(value.parse().map_err(bad)?),
                "SCORER_ENDPOINT" => layer.scorer_endpoint = Some(value.to_string()),
                "SCORER_TABLE" => layer.scorer_table = Some(value.into()),
                "MAX_IN_FLIGHT" => layer.max_in_flight = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                "K" => layer.k = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                "THRESHOLDS" => layer.thresholds = Some(parse_thresholds(value).map_err(bad)?),
                "SEED" => layer.seed = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                "DATA_DIR" => layer.data_dir = Some(value.into()),
                "BIND" => layer.bind = Some(value.to_string()),
                _ => {}
            }
        }
        Ok(layer)
    }

    /// Parses a TOML config file body.
    ///
    /// ```toml
    /// k = 8
    /// scorer = "lexical"
    /// thresholds = { accept = 0.9, high = 0.8, low = 0.5 }
    /// ```
    pub fn from_toml(text: &str, path: &str) -> Result<ConfigLayer, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::File { path: path.to_string(), message: e.to_string() })
    }
}

/// Parses `accept,high,low`. Ordering is checked at resolve time.
pub fn parse_thresholds(s: &str) -> Result<GraphThresholds, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [accept, high, low] = parts.as_slice() else {
        return Err(format!("expected accept,high,low but got {s:?}"));
    };
    let num = |v: &str| v.parse::<f64>().map_err(|_| format!("{v:?} is not a number"));
    Ok(GraphThresholds { accept: num(accept)?, high: num(high)?, low: num(low)? })
}
