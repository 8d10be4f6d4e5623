use super::{CrossingMode, EpisodeState, StepEvents};
use crate::geometry::wrap_angle;
use crate::map::{MapGeometry, SurfaceType};

pub const PED_PROGRESS_COEF: f64 = 2.0;
pub const PED_WAYPOINT_BONUS: f64 = 5.0;
pub const PED_COLLISION_PENALTY: f64 = -25.0;
pub const PED_SMART_WAIT_BONUS: f64 = 0.3;
pub const SMART_WAIT_RADIUS: f64 = 10.0;
pub const FAST_VEHICLE_SPEED: f64 = 4.0;

pub const SDC_PROGRESS_COEF: f64 = 1.0;
pub const SDC_GOAL_BONUS: f64 = 50.0;
pub const SDC_COLLISION_PENALTY: f64 = -50.0;
pub const SDC_SPEEDING_PENALTY: f64 = -0.5;
pub const SPEEDING_RADIUS: f64 = 15.0;
pub const SDC_OFF_LANE_PENALTY: f64 = -0.2;
pub const OFF_LANE_THRESHOLD: f64 = 1.5;
pub const SDC_HEADING_COEF: f64 = -0.1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepRewards {
    pub peds: Vec<f64>,
    pub sdc: f64,
}

/// Reward of pedestrian `i` for the transition `prev -> next`.
///
/// Progress is the distance walked along the route this step, so it equals
/// the decrease in distance to the current waypoint and carries across
/// waypoint switches.
pub fn ped_reward(prev: &EpisodeState, next: &EpisodeState, i: usize, events: &StepEvents) -> f64 {
    let motion = &events.motions[i];
    let mut r =
        PED_PROGRESS_COEF * motion.walked + PED_WAYPOINT_BONUS * motion.waypoints_reached as f64;
    if events.collision.is_some_and(|c| c.pedestrian == i) {
        r += PED_COLLISION_PENALTY;
    }
    let ped = &next.peds[i];
    if ped.waiting
        && prev.vehicle.speed > FAST_VEHICLE_SPEED
        && prev.vehicle.position.distance(ped.position) < SMART_WAIT_RADIUS
    {
        r += PED_SMART_WAIT_BONUS;
    }
    r
}

/// Vehicle reward for the transition `prev -> next`. Reads pedestrian
/// positions and crossing modes only.
pub fn sdc_reward(
    map: &MapGeometry,
    prev: &EpisodeState,
    next: &EpisodeState,
    events: &StepEvents,
) -> f64 {
    let v = &next.vehicle;
    let before = prev.vehicle.position.distance(prev.vehicle.goal);
    let after = v.position.distance(v.goal);
    let mut r = SDC_PROGRESS_COEF * (before - after);
    if events.goal {
        r += SDC_GOAL_BONUS;
    }
    if events.collision.is_some() {
        r += SDC_COLLISION_PENALTY;
    }
    if v.speed > FAST_VEHICLE_SPEED {
        let exposed = next.peds.iter().any(|p| {
            v.position.distance(p.position) < SPEEDING_RADIUS
                && match map.surface_at(p.position) {
                    SurfaceType::Crosswalk => true,
                    SurfaceType::Road => p.crossing_mode == CrossingMode::Jaywalk,
                    _ => false,
                }
        });
        if exposed {
            r += SDC_SPEEDING_PENALTY;
        }
    }
    if map.lane_offset(v.position) > OFF_LANE_THRESHOLD {
        r += SDC_OFF_LANE_PENALTY;
    }
    let to_goal = v.goal - v.position;
    let bearing = to_goal.y.atan2(to_goal.x);
    r += SDC_HEADING_COEF * wrap_angle(bearing - v.heading).abs();
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Environment, NUM_PEDS};
    use crate::geometry::Vec2;
    use crate::physics::{PedMotion, VehicleState};

    fn scene() -> (Environment, EpisodeState) {
        let env = Environment::new().unwrap();
        let (mut s, _) = env.reset(1, 0.25).unwrap();
        s.vehicle = VehicleState {
            position: Vec2::new(20.0, 58.0),
            heading: 0.0,
            speed: 0.0,
            steering: 0.0,
            goal: Vec2::new(116.0, 58.0),
        };
        for (k, p) in s.peds.iter_mut().enumerate() {
            p.position = Vec2::new(100.0 + k as f64, 20.0);
            p.waiting = false;
            p.crossing_mode = CrossingMode::NotCrossing;
        }
        (env, s)
    }

    fn quiet() -> StepEvents {
        StepEvents {
            motions: vec![PedMotion::default(); NUM_PEDS],
            rolls: vec![None; NUM_PEDS],
            ..Default::default()
        }
    }

    #[test]
    fn idle_pedestrian_gets_nothing() {
        let (_, s) = scene();
        assert_eq!(ped_reward(&s, &s, 0, &quiet()), 0.0);
    }

    #[test]
    fn pedestrian_progress() {
        let (_, s) = scene();
        let mut ev = quiet();
        ev.motions[2].walked = 0.15;
        assert!((ped_reward(&s, &s, 2, &ev) - 0.30).abs() < 1e-12);
    }

    #[test]
    fn smart_wait() {
        let (_, mut s) = scene();
        s.vehicle.speed = 6.0;
        s.peds[4].position = s.vehicle.position + Vec2::new(0.0, 8.0);
        s.peds[4].waiting = true;
        assert!((ped_reward(&s, &s, 4, &quiet()) - 0.3).abs() < 1e-12);
        s.vehicle.speed = 3.0;
        assert_eq!(ped_reward(&s, &s, 4, &quiet()), 0.0);
    }

    #[test]
    fn stationary_vehicle_never_positive() {
        let (env, s) = scene();
        assert!(sdc_reward(&env.map, &s, &s, &quiet()) <= 0.0);
        let mut turned = s.clone();
        turned.vehicle.heading = 1.0;
        assert!(sdc_reward(&env.map, &turned, &turned, &quiet()) < 0.0);
    }

    #[test]
    fn aligned_progress() {
        let (env, prev) = scene();
        let mut next = prev.clone();
        next.vehicle.position.x += 0.8;
        next.vehicle.speed = 3.0;
        assert!((sdc_reward(&env.map, &prev, &next, &quiet()) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn speeding_near_crosswalk_user() {
        let (env, prev) = scene();
        let mut next = prev.clone();
        next.vehicle.position = Vec2::new(40.0, 58.0);
        next.vehicle.speed = 6.0;
        let base = sdc_reward(&env.map, &prev, &next, &quiet());
        next.peds[0].position = env.map.crosswalks[0].rect.center();
        let r = sdc_reward(&env.map, &prev, &next, &quiet());
        assert!((r - (base - 0.5)).abs() < 1e-12);
    }
}
