//! Vehicle and pedestrian kinematics at a fixed 0.1 s step, the hard on-road
//! constraint, and collision/goal detection.

use crate::env::{CrossingMode, PedestrianState};
use crate::geometry::Vec2;
use crate::map::{MapGeometry, NavGraph};
use serde::{Deserialize, Serialize};

pub const DT: f64 = 0.1;
pub const WHEELBASE: f64 = 2.5;
pub const MAX_SPEED: f64 = 8.33;
pub const MAX_STEER: f64 = 0.52;
/// Rate at which the wheel angle slews toward the commanded target (rad/s).
pub const MAX_STEER_RATE: f64 = 1.0;
pub const ACCEL_MIN: f64 = -4.0;
pub const ACCEL_MAX: f64 = 3.0;
/// Speed retained after an off-road position is snapped back.
pub const OFFROAD_SPEED_FACTOR: f64 = 0.30;
pub const COLLISION_RADIUS: f64 = 1.5;
pub const GOAL_RADIUS: f64 = 3.0;
/// A pedestrian within this distance of its waypoint counts as having reached it.
pub const WAYPOINT_RADIUS: f64 = 0.5;
pub const PED_MIN_SPEED: f64 = 1.0;
pub const PED_MAX_SPEED: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub steering: f64,
    pub goal: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleAction {
    /// Longitudinal acceleration (m/s^2).
    pub accel: f64,
    /// Target wheel angle (rad), reached at [`MAX_STEER_RATE`].
    pub steer: f64,
}

impl VehicleAction {
    pub fn new(accel: f64, steer: f64) -> Self {
        Self { accel, steer }
    }

    pub fn clamped(self) -> Self {
        Self {
            accel: self.accel.clamp(ACCEL_MIN, ACCEL_MAX),
            steer: self.steer.clamp(-MAX_STEER, MAX_STEER),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub pedestrian: usize,
    pub distance: f64,
    pub mode: CrossingMode,
}

/// Sub-steps per [`step_vehicle`] call.
pub const VEHICLE_SUBSTEPS: usize = 50;

/// Kinematic bicycle update over `dt`, integrated in [`VEHICLE_SUBSTEPS`]
/// equal sub-steps.
///
/// Within each sub-step the wheel angle slews toward the target, speed
/// integrates the clamped acceleration, and heading and position integrate
/// with the updated speed and wheel angle.
pub fn step_vehicle(state: &VehicleState, action: VehicleAction, dt: f64) -> VehicleState {
    let action = action.clamped();
    let h = dt / VEHICLE_SUBSTEPS as f64;
    let max_delta = MAX_STEER_RATE * h;
    let mut s = *state;
    for _ in 0..VEHICLE_SUBSTEPS {
        s.steering = (s.steering + (action.steer - s.steering).clamp(-max_delta, max_delta))
            .clamp(-MAX_STEER, MAX_STEER);
        s.speed = (s.speed + action.accel * h).clamp(0.0, MAX_SPEED);
        s.heading += s.speed / WHEELBASE * s.steering.tan() * h;
        s.position = s.position + Vec2::from_angle(s.heading) * (s.speed * h);
    }
    s
}

/// Snaps an off-road vehicle back into the margin band and cuts its speed.
pub fn enforce_road_constraint(map: &MapGeometry, state: &VehicleState) -> VehicleState {
    if map.on_road(state.position) {
        return *state;
    }
    VehicleState {
        position: map.project_to_road(state.position),
        speed: state.speed * OFFROAD_SPEED_FACTOR,
        ..*state
    }
}

/// What happened to one pedestrian during a step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PedMotion {
    /// Distance walked this step.
    pub walked: f64,
    /// Path waypoints reached this step.
    pub waypoints_reached: u32,
    pub jaywalk_completed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PedDecision {
    Go,
    Wait,
}

/// Advances one pedestrian along its route.
///
/// Walking consumes `walking_speed * dt` of travel, carrying any remainder
/// past a reached waypoint on toward the next one. A step that ends within
/// [`WAYPOINT_RADIUS`] of its target also counts as reaching it.
pub fn step_pedestrian(
    graph: &NavGraph,
    ped: &PedestrianState,
    decision: PedDecision,
    dt: f64,
) -> (PedestrianState, PedMotion) {
    let mut next = ped.clone();
    let mut motion = PedMotion::default();
    if decision == PedDecision::Wait {
        next.velocity = Vec2::ZERO;
        next.waiting = true;
        return (next, motion);
    }
    next.waiting = false;
    let start = next.position;
    let mut budget = next.walking_speed * dt;
    while let Some(target) = next.current_target(graph) {
        let gap = next.position.distance(target);
        if gap <= budget {
            next.position = target;
            budget -= gap;
            motion.walked += gap;
            reach_target(&mut next, &mut motion);
            continue;
        }
        let dir = (target - next.position) * (1.0 / gap);
        next.position = next.position + dir * budget;
        motion.walked += budget;
        if next.position.distance(target) < WAYPOINT_RADIUS {
            reach_target(&mut next, &mut motion);
        }
        break;
    }
    next.velocity = (next.position - start) * (1.0 / dt);
    (next, motion)
}

fn reach_target(ped: &mut PedestrianState, motion: &mut PedMotion) {
    if ped.jaywalk_target.take().is_some() {
        ped.end_crossing();
        motion.jaywalk_completed = true;
        return;
    }
    if ped.path.is_empty() {
        return;
    }
    let node = ped.path.remove(0);
    ped.last_node = node;
    motion.waypoints_reached += 1;
    if ped.crossing_exit == Some(node) {
        ped.end_crossing();
    }
}

/// Collision with the nearest pedestrian closer than [`COLLISION_RADIUS`].
/// Ties go to the lower pedestrian index.
pub fn check_collision(vehicle: &VehicleState, peds: &[PedestrianState]) -> Option<CollisionEvent> {
    let mut best: Option<CollisionEvent> = None;
    for (i, p) in peds.iter().enumerate() {
        let d = vehicle.position.distance(p.position);
        if d < COLLISION_RADIUS && best.is_none_or(|b| d < b.distance) {
            best = Some(CollisionEvent {
                pedestrian: i,
                distance: d,
                mode: p.crossing_mode,
            });
        }
    }
    best
}

pub fn check_goal(vehicle: &VehicleState) -> bool {
    vehicle.position.distance(vehicle.goal) < GOAL_RADIUS
}
