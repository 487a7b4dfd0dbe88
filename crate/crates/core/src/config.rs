//! Run configuration: a JSON document whose relative paths are resolved
//! against the directory holding it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregate::DEFAULT_DOMAIN_THRESHOLD;
use crate::battery::BatteryConfig;
use crate::modelio::{ChatClientConfig, DecodingParams};
use crate::seed::derive_seed;
use crate::stancemap::MapperConfig;
use crate::stats::SignificanceConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{what} not found: {path}")]
    MissingPath { what: &'static str, path: String },
}

/// Where responses come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ClientMode {
    /// A chat-completions endpoint; the API key is read from `api_key_env`.
    Live(ChatClientConfig),
    /// Stored responses only; a miss is an error.
    Replay,
    /// A synthetic respondent described by a profile file.
    Synthetic { profile: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    /// Template registry; the built-in six templates when absent.
    pub templates: Option<PathBuf>,
    /// Restrict the run to these template ids.
    pub template_ids: Option<Vec<String>>,
    pub client: ClientMode,
    pub decoding: DecodingParams,
    pub samples: u32,
    pub bootstrap_reps: u32,
    pub ci_level: f64,
    pub thresholds: (f64, f64),
    pub min_valid: u32,
    pub domain_threshold: u32,
    pub seed: u64,
    pub concurrency: usize,
    pub output_dir: PathBuf,
    /// Append-only response store shared across runs.
    pub store: PathBuf,
    pub significance_gated_kappa: bool,
    pub mapper: MapperConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: PathBuf::from("corpus.json"),
            templates: None,
            template_ids: None,
            client: ClientMode::Replay,
            decoding: DecodingParams::default(),
            samples: 30,
            bootstrap_reps: 1000,
            ci_level: 0.95,
            thresholds: (0.45, 0.55),
            min_valid: 15,
            domain_threshold: DEFAULT_DOMAIN_THRESHOLD,
            seed: 0,
            concurrency: 8,
            output_dir: PathBuf::from("runs"),
            store: PathBuf::from("responses.jsonl"),
            significance_gated_kappa: false,
            mapper: MapperConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Read a config file and resolve its relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        if let Some(t) = &mut self.templates {
            fix(t);
        }
        if let ClientMode::Synthetic { profile } = &mut self.client {
            fix(profile);
        }
        fix(&mut self.output_dir);
        fix(&mut self.store);
    }

    /// Check value ranges and that every input path exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        self.decoding.validate().map_err(ConfigError::Invalid)?;
        if self.samples == 0 {
            return invalid("samples must be positive".into());
        }
        if self.bootstrap_reps == 0 {
            return invalid("bootstrap_reps must be positive".into());
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return invalid(format!("ci_level must lie in (0, 1), got {}", self.ci_level));
        }
        let (lo, hi) = self.thresholds;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return invalid(format!("thresholds must satisfy 0 <= lower <= upper <= 1, got ({lo}, {hi})"));
        }
        if self.concurrency == 0 {
            return invalid("concurrency must be positive".into());
        }
        if let Some(ids) = &self.template_ids {
            if ids.is_empty() {
                return invalid("template_ids must not be empty".into());
            }
        }
        let exists = |what, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(ConfigError::MissingPath {
                    what,
                    path: p.display().to_string(),
                })
            }
        };
        exists("corpus", &self.corpus)?;
        if let Some(t) = &self.templates {
            exists("template registry", t)?;
        }
        match &self.client {
            ClientMode::Synthetic { profile } => exists("synthetic profile", profile)?,
            ClientMode::Live(c) if c.endpoint.is_empty() || c.model.is_empty() => {
                return invalid("live client needs an endpoint and a model".into())
            }
            _ => {}
        }
        Ok(())
    }

    /// Significance rule parameters; the bootstrap seed is derived from the master seed.
    pub fn significance(&self) -> SignificanceConfig {
        SignificanceConfig {
            thresholds: self.thresholds,
            min_valid: self.min_valid,
            reps: self.bootstrap_reps,
            level: self.ci_level,
            seed: derive_seed(self.seed, &["bootstrap"]),
        }
    }

    pub fn battery(&self) -> BatteryConfig {
        BatteryConfig {
            significance: self.significance(),
            mapper: self.mapper.clone(),
            samples: self.samples,
            significance_gated_kappa: self.significance_gated_kappa,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::from_json(r#"{"corpus": "c.json"}"#).unwrap();
        assert_eq!(c.samples, 30);
        assert_eq!(c.bootstrap_reps, 1000);
        assert_eq!(c.ci_level, 0.95);
        assert_eq!(c.thresholds, (0.45, 0.55));
        assert_eq!(c.min_valid, 15);
        assert_eq!(c.domain_threshold, 6);
        assert_eq!(c.concurrency, 8);
        assert_eq!(c.client, ClientMode::Replay);
    }

    #[test]
    fn client_modes_parse() {
        let c = RunConfig::from_json(
            r#"{"client": {"mode": "live", "endpoint": "http://x/v1/chat/completions", "model": "m", "api_key_env": "KEY"}}"#,
        )
        .unwrap();
        match c.client {
            ClientMode::Live(l) => assert_eq!(l.api_key_env.as_deref(), Some("KEY")),
            other => panic!("{other:?}"),
        }
        let c = RunConfig::from_json(r#"{"client": {"mode": "synthetic", "profile": "p.json"}}"#).unwrap();
        assert!(matches!(c.client, ClientMode::Synthetic { .. }));
        assert!(RunConfig::from_json(r#"{"sample": 3}"#).is_err());
    }

    #[test]
    fn relative_paths_follow_config_dir() {
        let mut c = RunConfig::from_json(r#"{"corpus": "c.json", "store": "/abs/s.jsonl"}"#).unwrap();
        c.resolve_paths(Path::new("/etc/bench"));
        assert_eq!(c.corpus, PathBuf::from("/etc/bench/c.json"));
        assert_eq!(c.store, PathBuf::from("/abs/s.jsonl"));
    }

    #[test]
    fn validation_rejects_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("c.json");
        std::fs::write(&corpus, "{}").unwrap();
        let ok = RunConfig {
            corpus: corpus.clone(),
            ..Default::default()
        };
        assert!(ok.validate().is_ok());
        assert!(RunConfig { ci_level: 1.0, ..ok.clone() }.validate().is_err());
        assert!(RunConfig { thresholds: (0.6, 0.4), ..ok.clone() }.validate().is_err());
        assert!(RunConfig { samples: 0, ..ok.clone() }.validate().is_err());
        assert!(matches!(
            RunConfig { corpus: dir.path().join("nope"), ..ok }.validate(),
            Err(ConfigError::MissingPath { .. })
        ));
    }
}
