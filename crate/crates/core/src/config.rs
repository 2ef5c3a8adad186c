//! JSON run configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dil::TrainConfig;
use crate::domain::Thresholds;
use crate::experiment::ExperimentConfig;
use crate::ilp::SearchConfig;
use crate::ingest::ExtractConfig;
use crate::knowledge::{default_tasks, TaskDefinition};
use crate::policy::PolicyConfig;
use crate::sim::{EpisodeConfig, Scenario, TrafficSource};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("referenced file {0} does not exist")]
    MissingFile(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub tasks_dir: PathBuf,
    pub out_dir: PathBuf,
    /// highD tracks file for `ingest`.
    pub tracks: Option<PathBuf>,
    /// Pairs file for `train-dil`; defaults to `<out_dir>/pairs.csv`.
    pub pairs: Option<PathBuf>,
    /// Trained parameters; `compare` trains afresh when absent.
    pub params: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            tasks_dir: "tasks".into(),
            out_dir: "out".into(),
            tracks: None,
            pairs: None,
            params: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Applied to the policy, the target vehicles and feature extraction alike.
    pub thresholds: Thresholds,
    pub policy: PolicyConfig,
    pub episode: EpisodeConfig,
    pub traffic: TrafficSource,
    pub tasks: Vec<TaskDefinition>,
    pub search: SearchConfig,
    pub extract: ExtractConfig,
    pub train: TrainConfig,
    pub experiment: ExperimentConfig,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            policy: PolicyConfig::default(),
            episode: EpisodeConfig::default(),
            traffic: TrafficSource::default(),
            tasks: default_tasks(),
            search: SearchConfig::default(),
            extract: ExtractConfig::default(),
            train: TrainConfig::default(),
            experiment: ExperimentConfig::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text).map_err(|source| ConfigError::Json {
            path: path.display().to_string(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.thresholds.validate().map_err(|e| invalid(&e))?;
        self.policy().validate().map_err(|e| invalid(&e))?;
        self.scenario().validate().map_err(|e| invalid(&e))?;
        self.search.validate().map_err(|e| invalid(&e))?;
        self.train.validate().map_err(|e| invalid(&e))?;
        for t in &self.tasks {
            t.bias().map_err(|e| invalid(&e))?;
            t.labeler_rule().map_err(|e| invalid(&e))?;
        }
        for p in [&self.paths.tracks, &self.paths.params]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(ConfigError::MissingFile(p.display().to_string()));
            }
        }
        Ok(())
    }

    pub fn policy(&self) -> PolicyConfig {
        PolicyConfig {
            thresholds: self.thresholds,
            ..self.policy.clone()
        }
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            episode: self.episode.clone(),
            control: self.policy(),
            traffic: self.traffic.clone(),
        }
    }

    pub fn extract(&self) -> ExtractConfig {
        ExtractConfig {
            thresholds: self.thresholds,
            ..self.extract
        }
    }

    pub fn task(&self, head: &str) -> Option<&TaskDefinition> {
        self.tasks.iter().find(|t| t.head == head)
    }

    pub fn pairs_path(&self) -> PathBuf {
        self.paths
            .pairs
            .clone()
            .unwrap_or_else(|| self.paths.out_dir.join("pairs.csv"))
    }
}
