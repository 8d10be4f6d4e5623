//! Non-learning vehicle policies and the scripted always-go pedestrian.
//!
//! All vehicle baselines read only the vehicle observation, so they see the
//! same information as the learned actor.

use crate::env::{SDC_OBS_DIM, SDC_PED_RANGE, SDC_VISIBLE_PEDS};
use crate::physics::{PedDecision, VehicleAction, ACCEL_MAX, ACCEL_MIN, MAX_STEER};
use crate::{Error, Result};
use rand::Rng;

/// Steering gain on the heading error to the goal.
pub const STEER_GAIN: f64 = 1.5;
/// Braking trigger: a pedestrian closer than this...
pub const BRAKE_RANGE: f64 = 12.0;
/// ...within this half-angle of straight ahead.
pub const BRAKE_HALF_ANGLE: f64 = std::f64::consts::PI / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Random,
    ConstantSpeed,
    RuleBased,
    RuleBasedBraking,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::Random,
        BaselineKind::ConstantSpeed,
        BaselineKind::RuleBased,
        BaselineKind::RuleBasedBraking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Random => "random",
            BaselineKind::ConstantSpeed => "constant",
            BaselineKind::RuleBased => "rule",
            BaselineKind::RuleBasedBraking => "rule-brake",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown baseline {name:?} (expected random, constant, rule or rule-brake)"
                ))
            })
    }

    /// Vehicle action for observation `obs`. Only [`BaselineKind::Random`]
    /// draws from `rng`.
    pub fn act(self, obs: &[f64; SDC_OBS_DIM], rng: &mut impl Rng) -> VehicleAction {
        match self {
            BaselineKind::Random => random_policy(rng),
            BaselineKind::ConstantSpeed => constant_speed_policy(obs),
            BaselineKind::RuleBased => rule_based_policy(obs),
            BaselineKind::RuleBasedBraking => rule_based_braking_policy(obs),
        }
    }
}

pub fn random_policy(rng: &mut impl Rng) -> VehicleAction {
    VehicleAction::new(
        rng.random_range(ACCEL_MIN..=ACCEL_MAX),
        rng.random_range(-MAX_STEER..=MAX_STEER),
    )
}

pub fn constant_speed_policy(_obs: &[f64; SDC_OBS_DIM]) -> VehicleAction {
    VehicleAction::new(ACCEL_MAX, 0.0)
}

/// Bearing of the goal relative to the vehicle's heading, from the ego-frame
/// goal offset in the observation.
pub fn goal_heading_error(obs: &[f64; SDC_OBS_DIM]) -> f64 {
    obs[7].atan2(obs[6])
}

pub fn rule_based_policy(obs: &[f64; SDC_OBS_DIM]) -> VehicleAction {
    let steer = (STEER_GAIN * goal_heading_error(obs)).clamp(-MAX_STEER, MAX_STEER);
    VehicleAction::new(ACCEL_MAX, steer)
}

/// Whether any listed pedestrian is inside the forward braking cone.
pub fn pedestrian_ahead(obs: &[f64; SDC_OBS_DIM]) -> bool {
    (0..SDC_VISIBLE_PEDS).any(|k| {
        let x = obs[10 + 4 * k] * SDC_PED_RANGE;
        let y = obs[11 + 4 * k] * SDC_PED_RANGE;
        x > 0.0 && x.hypot(y) < BRAKE_RANGE && y.atan2(x).abs() <= BRAKE_HALF_ANGLE
    })
}

pub fn rule_based_braking_policy(obs: &[f64; SDC_OBS_DIM]) -> VehicleAction {
    let base = rule_based_policy(obs);
    if pedestrian_ahead(obs) {
        VehicleAction::new(ACCEL_MIN, base.steer)
    } else {
        base
    }
}

pub fn always_go_ped_policy() -> PedDecision {
    PedDecision::Go
}
