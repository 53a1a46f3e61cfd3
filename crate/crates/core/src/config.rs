//! Pipeline configuration.
//!
//! Wall-clock solver budgets are mapped to deterministic evaluation units at
//! 1000 units per second-equivalent, preserving the strict/relaxed budget
//! ratio while keeping runs reproducible.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Ranking weight between risk score and semantic centrality.
    pub alpha: f64,
    /// Softmax temperature for path budget allocation.
    pub tau_p: f64,
    /// Strict-pass solver budget per candidate, in evaluation units.
    pub t_total: u64,
    /// Relaxed-pass solver budget, in evaluation units.
    pub t_relaxed: u64,
    /// Behavioral coverage acceptance threshold.
    pub tau_cov: f64,
    /// Maximum tolerated benign false-blocking rate for Tier-1 policies.
    pub tau_block: f64,
    /// Resynthesis iterations per tier.
    pub k_iters: u32,
    /// Path beam width retained after scoring.
    pub beam_b: usize,
    /// Risk threshold for flagging newly introduced entities.
    pub tau_risk: f64,
    /// Master seed; the whole pipeline is deterministic given the seed.
    pub seed: u64,
    /// Rejection-constraint feedback from validation to synthesis. Disabling
    /// this makes every resynthesis round start from scratch.
    pub feedback: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            alpha: 0.6,
            tau_p: 0.5,
            t_total: 300_000,
            t_relaxed: 150_000,
            tau_cov: 0.95,
            tau_block: 0.05,
            k_iters: 3,
            beam_b: 8,
            tau_risk: 0.7,
            seed: 42,
            feedback: true,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("alpha must lie in [0,1], got {0}")]
    Alpha(f64),
    #[error("tau_p must be positive, got {0}")]
    TauP(f64),
    #[error("solver budgets must be positive")]
    Budget,
    #[error("k_iters must be at least 1")]
    KIters,
    #[error("{name} must lie in [0,1], got {value}")]
    UnitInterval { name: &'static str, value: f64 },
    #[error("beam width must be at least 1")]
    Beam,
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ConfigError::Alpha(self.alpha));
        }
        if self.tau_p <= 0.0 {
            return Err(ConfigError::TauP(self.tau_p));
        }
        if self.t_total == 0 || self.t_relaxed == 0 {
            return Err(ConfigError::Budget);
        }
        if self.k_iters == 0 {
            return Err(ConfigError::KIters);
        }
        for (name, value) in [
            ("tau_cov", self.tau_cov),
            ("tau_block", self.tau_block),
            ("tau_risk", self.tau_risk),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::UnitInterval { name, value });
            }
        }
        if self.beam_b == 0 {
            return Err(ConfigError::Beam);
        }
        Ok(())
    }

    /// Apply a partial override document (JSON object of config fields).
    /// Unknown fields are rejected.
    pub fn apply_overrides(&self, overrides: &serde_json::Value) -> Result<Config, String> {
        let mut merged = serde_json::to_value(self).map_err(|e| e.to_string())?;
        let obj = overrides
            .as_object()
            .ok_or_else(|| "config overrides must be a JSON object".to_string())?;
        let known = merged.as_object().unwrap().clone();
        for (k, v) in obj {
            if !known.contains_key(k) {
                return Err(format!("unknown config field: {k}"));
            }
            merged[k] = v.clone();
        }
        let cfg: Config = serde_json::from_value(merged).map_err(|e| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(Config::default().validate().is_ok());
    }

    #[test]
    fn default_budgets_preserve_strict_relaxed_ratio() {
        let cfg = Config::default();
        assert_eq!(cfg.t_total, 300_000);
        assert_eq!(cfg.t_relaxed, 150_000);
        assert_eq!(cfg.t_total / cfg.t_relaxed, 2);
    }

    #[test]
    fn overrides_merge_and_reject_unknown() {
        let cfg = Config::default();
        let merged = cfg
            .apply_overrides(&serde_json::json!({"alpha": 0.3, "seed": 7}))
            .unwrap();
        assert_eq!(merged.alpha, 0.3);
        assert_eq!(merged.seed, 7);
        assert_eq!(merged.tau_p, 0.5);
        assert!(cfg.apply_overrides(&serde_json::json!({"bogus": 1})).is_err());
    }

    #[test]
    fn invalid_alpha_rejected() {
        let cfg = Config { alpha: 1.5, ..Config::default() };
        assert_eq!(cfg.validate(), Err(ConfigError::Alpha(1.5)));
    }
}
