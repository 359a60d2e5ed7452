//! Gateway configuration, read from JSON or TOML by file extension.
//!
//! Scenario keys (`sim`, `target`, `teleop`, `scene`, `decode`,
//! `cv_period_ticks`, `seed`) sit at the top level next to `server`,
//! `model_path` and `log_dir`. Missing keys take their defaults.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use huegrip_core::gesturenet::{MlpModel, PrototypeClassifier};
use huegrip_core::teleop::{ScenarioConfig, SharedClassifier};

use crate::error::{GatewayError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub listen: String,
    /// Control ticks per second; the simulation rate when unset.
    pub tick_rate_hz: Option<f64>,
    /// Telemetry messages per second.
    pub stream_rate_hz: f64,
    /// Telemetry messages per second that carry a PNG frame.
    pub frame_rate_hz: f64,
    /// Operator inputs waiting for a tick before new ones are refused.
    pub input_queue: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8765".into(),
            tick_rate_hz: None,
            stream_rate_hz: 20.0,
            frame_rate_hz: 2.0,
            input_queue: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    #[serde(flatten)]
    pub scenario: ScenarioConfig,
    pub server: ServerConfig,
    /// Trained gesture model; glove samples fall back to the nearest
    /// gesture prototype when unset.
    pub model_path: Option<PathBuf>,
    pub log_dir: PathBuf,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            server: ServerConfig::default(),
            model_path: None,
            log_dir: PathBuf::from("sessions"),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(GatewayError::Config(format!("{name} must be > 0, got {v}")))
    }
}

impl GatewayConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| GatewayError::File {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Self = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?,
            Some("json") => serde_json::from_str(&text)
                .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?,
            _ => {
                return Err(GatewayError::Config(format!(
                    "{}: config files must end in .json or .toml",
                    path.display()
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn tick_rate_hz(&self) -> f64 {
        self.server.tick_rate_hz.unwrap_or(self.scenario.sim.rate_hz)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        s.sim.validate()?;
        s.teleop.validate()?;
        s.decode.validate()?;
        s.scene.validate()?;
        s.sim.target(s.target).validate(s.sim.rigid_threshold_n_per_m)?;
        if s.cv_period_ticks == 0 {
            return Err(GatewayError::Config("cv_period_ticks must be > 0".into()));
        }
        positive("server.tick_rate_hz", self.tick_rate_hz())?;
        positive("server.stream_rate_hz", self.server.stream_rate_hz)?;
        positive("server.frame_rate_hz", self.server.frame_rate_hz)?;
        if self.server.input_queue == 0 {
            return Err(GatewayError::Config("server.input_queue must be > 0".into()));
        }
        Ok(())
    }

    pub fn classifier(&self) -> Result<SharedClassifier> {
        match &self.model_path {
            Some(path) => {
                let model = MlpModel::load(path).map_err(|e| match e {
                    huegrip_core::Error::Io(source) => GatewayError::File {
                        path: path.clone(),
                        source,
                    },
                    other => other.into(),
                })?;
                log::info!("gesture model loaded from {}", path.display());
                Ok(Arc::new(model))
            }
            None => {
                log::info!("no model_path set; glove samples use the nearest gesture prototype");
                Ok(Arc::new(PrototypeClassifier))
            }
        }
    }
}
