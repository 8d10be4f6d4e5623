//! Training configuration: TOML loading, `key=value` overrides, validation
//! and the config hash embedded in every artifact.

use crate::env::DEFAULT_JAYWALK_MULTIPLIER;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Pedestrian and vehicle actors learn together.
    CoTrain,
    /// Only the vehicle learns; pedestrians always go.
    SingleAgent,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::CoTrain => "co-train",
            TrainMode::SingleAgent => "single-agent",
        }
    }
}

impl std::str::FromStr for TrainMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "co-train" => Ok(TrainMode::CoTrain),
            "single-agent" => Ok(TrainMode::SingleAgent),
            other => Err(Error::Config(format!(
                "unknown mode {other:?} (expected co-train or single-agent)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_envs: usize,
    pub rollout_len: usize,
    pub ppo_epochs: usize,
    pub minibatches: usize,
    pub updates: usize,
    pub lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub ent_coef_ped: f64,
    pub ent_coef_sdc: f64,
    pub max_grad_norm: f64,
    pub value_coef: f64,
    pub seed: u64,
    pub jaywalk_multiplier: f64,
    pub mode: TrainMode,
    pub checkpoint_every: usize,
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_envs: 512,
            rollout_len: 256,
            ppo_epochs: 4,
            minibatches: 8,
            updates: 5000,
            lr: 3e-4,
            gamma: 0.995,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            ent_coef_ped: 0.03,
            ent_coef_sdc: 0.01,
            max_grad_norm: 0.5,
            value_coef: 0.5,
            seed: 0,
            jaywalk_multiplier: DEFAULT_JAYWALK_MULTIPLIER,
            mode: TrainMode::CoTrain,
            checkpoint_every: 100,
            eval_episodes: 500,
        }
    }
}

impl TrainConfig {
    /// Reduced scale for CPU runs: 32 envs, 64-step rollouts, 300 updates,
    /// 100 evaluation episodes.
    pub fn desk() -> Self {
        Self {
            n_envs: 32,
            rollout_len: 64,
            updates: 300,
            eval_episodes: 100,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_over(text, Self::default())
    }

    /// Parses `text`, filling absent keys from `base`.
    pub fn from_toml_over(text: &str, base: Self) -> Result<Self> {
        let overrides: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut table = to_table(&base)?;
        for (k, v) in overrides {
            table.insert(k, v);
        }
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, base: Self) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_over(&text, base)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Applies `key=value` overrides. Values are parsed as TOML literals;
    /// anything that is not a valid literal is taken as a string.
    pub fn with_overrides(self, overrides: &[String]) -> Result<Self> {
        let mut table = to_table(&self)?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
            let key = key.trim();
            let raw = raw.trim();
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            if !table.contains_key(key) {
                return Err(Error::Config(format!("unknown key {key:?}")));
            }
            table.insert(key.to_string(), value);
        }
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive_counts = [
            ("n_envs", self.n_envs),
            ("rollout_len", self.rollout_len),
            ("ppo_epochs", self.ppo_epochs),
            ("minibatches", self.minibatches),
            ("updates", self.updates),
            ("checkpoint_every", self.checkpoint_every),
        ];
        for (name, v) in positive_counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let positive_reals = [
            ("lr", self.lr),
            ("clip_eps", self.clip_eps),
            ("max_grad_norm", self.max_grad_norm),
            ("value_coef", self.value_coef),
        ];
        for (name, v) in positive_reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!(
                "gamma must be in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Config(format!(
                "gae_lambda must be in [0, 1], got {}",
                self.gae_lambda
            )));
        }
        if self.clip_eps >= 1.0 {
            return Err(Error::Config(format!(
                "clip_eps must be below 1, got {}",
                self.clip_eps
            )));
        }
        for (name, v) in [
            ("ent_coef_ped", self.ent_coef_ped),
            ("ent_coef_sdc", self.ent_coef_sdc),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.jaywalk_multiplier) {
            return Err(Error::Config(format!(
                "jaywalk_multiplier must be in [0, 1], got {}",
                self.jaywalk_multiplier
            )));
        }
        if self.minibatches > self.n_envs * self.rollout_len {
            return Err(Error::Config(
                "more minibatches than samples per update".into(),
            ));
        }
        Ok(())
    }

    /// Total environment steps of a run.
    pub fn total_steps(&self) -> u64 {
        (self.n_envs * self.rollout_len) as u64 * self.updates as u64
    }

    /// Hex SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn to_table(cfg: &TrainConfig) -> Result<toml::Table> {
    toml::Table::try_from(cfg).map_err(|e| Error::Config(e.to_string()))
}
