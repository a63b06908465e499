//! Velocity-tracking reward and its weighted combination with the style
//! reward.
//!
//! `r^V = β₁ exp(−‖v* − v‖² / max(λ_l‖v*‖, ε)) + β₂ exp(−(ω* − ω)² / max(λ_h|ω*|, ε))`
//! and `r = μ₁ r^V + μ₂ r^S`. The floor `ε` keeps the zero-command case finite.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    /// `(μ₁, μ₂)`: velocity and style weights.
    pub mu: (f64, f64),
    /// `(β₁, β₂)`: linear and yaw-rate weights.
    pub beta: (f64, f64),
    /// `(λ_l, λ_h)`: tracking-precision scales.
    pub lambda_track: (f64, f64),
    pub denom_floor: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            mu: (0.5, 0.5),
            beta: (0.6, 0.4),
            lambda_track: (0.25, 0.25),
            denom_floor: 0.1,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let values = [
            self.mu.0,
            self.mu.1,
            self.beta.0,
            self.beta.1,
            self.lambda_track.0,
            self.lambda_track.1,
        ];
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(
                "reward weights must be finite and non-negative".into(),
            ));
        }
        if !(self.denom_floor > 0.0 && self.denom_floor.is_finite()) {
            return Err(Error::Config(format!(
                "denom_floor must be > 0, got {}",
                self.denom_floor
            )));
        }
        Ok(())
    }
}

/// Planar velocity tracking reward; maximal (`β₁ + β₂`) at perfect tracking.
pub fn reward_velocity(
    v_xy: Vector2<f64>,
    v_cmd: Vector2<f64>,
    w_z: f64,
    w_cmd: f64,
    cfg: &RewardConfig,
) -> f64 {
    let lin_den = (cfg.lambda_track.0 * v_cmd.norm()).max(cfg.denom_floor);
    let ang_den = (cfg.lambda_track.1 * w_cmd.abs()).max(cfg.denom_floor);
    cfg.beta.0 * (-(v_cmd - v_xy).norm_squared() / lin_den).exp()
        + cfg.beta.1 * (-(w_cmd - w_z).powi(2) / ang_den).exp()
}

pub fn reward_total(r_velocity: f64, r_style: f64, cfg: &RewardConfig) -> f64 {
    cfg.mu.0 * r_velocity + cfg.mu.1 * r_style
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(x, y)
    }

    #[test]
    fn perfect_tracking_is_maximal() {
        let cfg = RewardConfig::default();
        assert_eq!(
            reward_velocity(v(1.0, 0.5), v(1.0, 0.5), 0.3, 0.3, &cfg),
            1.0
        );
        assert_eq!(
            reward_velocity(v(0.0, 0.0), v(0.0, 0.0), 0.0, 0.0, &cfg),
            1.0
        );
    }

    #[test]
    fn looser_precision_gives_more_reward() {
        let mut last = 0.0;
        for k in 1..20 {
            let cfg = RewardConfig {
                lambda_track: (0.1 * k as f64, 0.25),
                ..Default::default()
            };
            let r = reward_velocity(v(1.5, 0.0), v(2.0, 0.0), 0.0, 0.0, &cfg);
            assert!(r > last);
            last = r;
        }
    }

    #[test]
    fn combination_weights() {
        let only_v = RewardConfig {
            mu: (1.0, 0.0),
            ..Default::default()
        };
        let only_s = RewardConfig {
            mu: (0.0, 1.0),
            ..Default::default()
        };
        assert_eq!(reward_total(0.7, 2.0, &only_v), 0.7);
        assert_eq!(reward_total(0.7, 2.0, &only_s), 2.0);
        assert_eq!(reward_total(1.0, 1.0, &RewardConfig::default()), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(RewardConfig::default().validate().is_ok());
        assert!(RewardConfig {
            denom_floor: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(RewardConfig {
            beta: (-1.0, 0.4),
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
