//! Run configuration: every tunable threshold the pipeline uses, with the
//! defaults defined here as the single source of truth. Configs round-trip
//! losslessly through their JSON file form.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::PivotEstimator;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Malformed(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Which part-count provider backs coarse segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// Read the count from synthetic ground truth.
    #[default]
    Oracle,
    /// Use a fixed user-supplied count.
    Fixed,
    /// Query a chat-completion endpoint over HTTP.
    Http,
}

/// Which segmenter produces part masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmenterKind {
    /// Exact silhouettes from synthetic ground truth.
    #[default]
    Oracle,
    /// Query a segmentation endpoint over HTTP.
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeformSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub latent_dim: usize,
    pub hidden_dim: usize,
}

impl Default for DeformSettings {
    fn default() -> Self {
        let d = crate::deform::FitConfig::default();
        DeformSettings {
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            latent_dim: d.latent_dim,
            hidden_dim: d.hidden_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinerSettings {
    pub max_depth: u32,
    pub s_min: f64,
    pub ellipse_sigma: f64,
}

impl Default for RefinerSettings {
    fn default() -> Self {
        let d = crate::refine::RefineConfig::default();
        RefinerSettings {
            max_depth: d.max_depth,
            s_min: d.s_min,
            ellipse_sigma: d.ellipse_sigma,
        }
    }
}

/// Full pipeline configuration. All randomness flows from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Normalized-displacement threshold separating static from dynamic.
    pub tau_mot: f64,
    /// Winner-margin ratio for pixel assignment.
    pub tau_vis: f64,
    /// Rank-ratio threshold of the joint classifier.
    pub tau_rank: f64,
    /// Minimum Kabsch angle (degrees) for a revolute call.
    pub theta_min_deg: f64,
    /// Image pairs sampled for part-count estimation.
    pub count_queries: usize,
    /// Retries per provider query.
    pub provider_retries: usize,
    pub provider: ProviderKind,
    /// Count used by the fixed provider.
    pub fixed_count: u32,
    pub segmenter: SegmenterKind,
    pub deform: DeformSettings,
    pub refiner: RefinerSettings,
    pub pivot_estimator: PivotEstimator,
    /// State pair used by kinematics and evaluation; None means
    /// (first, last).
    pub state_pair: Option<(usize, usize)>,
    /// Thread cap for parallel sections; 0 uses all cores.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            tau_mot: crate::segment::DEFAULT_TAU_MOT,
            tau_vis: crate::refine::DEFAULT_TAU_VIS,
            tau_rank: crate::kinematics::DEFAULT_TAU_RANK,
            theta_min_deg: 1.0,
            count_queries: 5,
            provider_retries: 2,
            provider: ProviderKind::default(),
            fixed_count: 1,
            segmenter: SegmenterKind::default(),
            deform: DeformSettings::default(),
            refiner: RefinerSettings::default(),
            pivot_estimator: PivotEstimator::default(),
            state_pair: None,
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.tau_mot) {
            return Err(ConfigError::Invalid(format!(
                "tau_mot {} outside [0, 1]",
                self.tau_mot
            )));
        }
        if self.tau_vis < 1.0 || !self.tau_vis.is_finite() {
            return Err(ConfigError::Invalid(format!(
                "tau_vis {} must be >= 1",
                self.tau_vis
            )));
        }
        if !(0.0..1.0).contains(&self.tau_rank) {
            return Err(ConfigError::Invalid(format!(
                "tau_rank {} outside [0, 1)",
                self.tau_rank
            )));
        }
        if !(0.0..180.0).contains(&self.theta_min_deg) {
            return Err(ConfigError::Invalid(format!(
                "theta_min_deg {} outside [0, 180)",
                self.theta_min_deg
            )));
        }
        if self.count_queries == 0 {
            return Err(ConfigError::Invalid("count_queries must be >= 1".into()));
        }
        if self.deform.epochs == 0 || self.deform.latent_dim == 0 || self.deform.hidden_dim == 0 {
            return Err(ConfigError::Invalid(
                "deform epochs/latent_dim/hidden_dim must be positive".into(),
            ));
        }
        if !self.deform.learning_rate.is_finite() || self.deform.learning_rate <= 0.0 {
            return Err(ConfigError::Invalid("learning_rate must be positive".into()));
        }
        let refiner_ok = self.refiner.s_min.is_finite()
            && self.refiner.s_min > 0.0
            && self.refiner.ellipse_sigma.is_finite()
            && self.refiner.ellipse_sigma > 0.0;
        if !refiner_ok {
            return Err(ConfigError::Invalid(
                "refiner s_min and ellipse_sigma must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn theta_min_radians(&self) -> f64 {
        self.theta_min_deg.to_radians()
    }

    pub fn fit_config(&self) -> crate::deform::FitConfig {
        crate::deform::FitConfig {
            epochs: self.deform.epochs,
            learning_rate: self.deform.learning_rate,
            latent_dim: self.deform.latent_dim,
            hidden_dim: self.deform.hidden_dim,
            seed: self.seed,
            ..crate::deform::FitConfig::default()
        }
    }

    pub fn refine_config(&self) -> crate::refine::RefineConfig {
        crate::refine::RefineConfig {
            max_depth: self.refiner.max_depth,
            s_min: self.refiner.s_min,
            ellipse_sigma: self.refiner.ellipse_sigma,
            tau_vis: self.tau_vis,
        }
    }

    pub fn analyze_config(&self) -> crate::kinematics::AnalyzeConfig {
        crate::kinematics::AnalyzeConfig {
            tau_rank: self.tau_rank,
            theta_min: self.theta_min_radians(),
            pivot_estimator: self.pivot_estimator,
        }
    }

    /// Resolve the kinematics/evaluation state pair for a K-state bundle.
    pub fn resolve_state_pair(&self, num_states: usize) -> (usize, usize) {
        self.state_pair.unwrap_or((0, num_states.saturating_sub(1)))
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| ConfigError::Malformed(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| ConfigError::Malformed(e.to_string()))?;
        fs::write(path, text).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
