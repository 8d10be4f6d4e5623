//! Fixed observation layouts.
//!
//! Pedestrian observation (20):
//!
//! | slots  | content                                                    |
//! |--------|------------------------------------------------------------|
//! | 0..2   | own position, `(p - 60) / 60`                              |
//! | 2      | own walking speed / 2                                      |
//! | 3      | own jaywalking tendency                                    |
//! | 4..6   | unit direction to current target                           |
//! | 6      | distance to current target / 60                            |
//! | 7..10  | surface one-hot (road, sidewalk, crosswalk)                |
//! | 10..12 | vehicle position relative to self / 120                    |
//! | 12..14 | vehicle velocity / 8.33                                    |
//! | 14     | vehicle speed / 8.33                                       |
//! | 15     | distance to vehicle / 120                                  |
//! | 16..18 | nearest other pedestrian, relative position / 120          |
//! | 18     | distance to nearest other pedestrian / 120                 |
//! | 19     | fraction of episode time remaining                         |
//!
//! Vehicle observation (34): see [`SDC_OBS_LAYOUT`]. Own position is
//! `(p - 60) / 8`, heading as cos/sin, speed / 8.33, steering / 0.52, the unit
//! goal direction and goal distance / 120, nearest crosswalk distance / 60,
//! then the six nearest pedestrians' offsets (/ 20, clamped to ±1) and
//! velocities (/ 2). Relative quantities are expressed in the vehicle's own
//! frame (x forward, y left).
//!
//! Global state (58): positions are `(p - 60) / 20`. For each pedestrian in
//! index order, position (2),
//! current speed / 2 and tendency; then vehicle position (2), heading cos/sin,
//! speed / 8.33, steering / 0.52, goal offset in world frame / 120 (2), goal
//! distance / 120, and step / 500.

use super::{Environment, EpisodeState, EPISODE_STEPS, NUM_PEDS};
use crate::geometry::Vec2;
use crate::map::{SurfaceType, MAP_HALF_EXTENT, MAP_SIZE};
use crate::physics::{MAX_SPEED, MAX_STEER, PED_MAX_SPEED};

pub const PED_OBS_DIM: usize = 20;
pub const SDC_OBS_DIM: usize = 34;
pub const GLOBAL_STATE_DIM: usize = 58;
/// Pedestrians listed in the vehicle observation.
pub const SDC_VISIBLE_PEDS: usize = 6;
/// Scale for pedestrian offsets in the vehicle observation (clamped to ±1).
pub const SDC_PED_RANGE: f64 = 20.0;
/// Scale for the vehicle's own position in its observation: one road
/// half-width, so lane offsets are resolved at metre level.
pub const SDC_POSITION_SCALE: f64 = 8.0;
/// Scale for positions in the global state.
pub const GLOBAL_POSITION_SCALE: f64 = 20.0;

/// Named slot groups of the vehicle observation, in order, with their widths.
pub const SDC_OBS_LAYOUT: [(&str, usize); 19] = [
    ("position", 2),
    ("heading_cos_sin", 2),
    ("speed", 1),
    ("steering", 1),
    ("goal_direction_ego", 2),
    ("goal_distance", 1),
    ("nearest_crosswalk_distance", 1),
    ("ped0_offset_ego", 2),
    ("ped0_velocity_ego", 2),
    ("ped1_offset_ego", 2),
    ("ped1_velocity_ego", 2),
    ("ped2_offset_ego", 2),
    ("ped2_velocity_ego", 2),
    ("ped3_offset_ego", 2),
    ("ped3_velocity_ego", 2),
    ("ped4_offset_ego", 2),
    ("ped4_velocity_ego", 2),
    ("ped5_offset_ego", 2),
    ("ped5_velocity_ego", 2),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub peds: Vec<[f64; PED_OBS_DIM]>,
    pub sdc: [f64; SDC_OBS_DIM],
    pub global: [f64; GLOBAL_STATE_DIM],
}

impl Observations {
    pub fn build(env: &Environment, state: &EpisodeState) -> Self {
        Self {
            peds: (0..NUM_PEDS)
                .map(|i| ped_observation(env, state, i))
                .collect(),
            sdc: sdc_observation(env, state),
            global: global_state(state),
        }
    }
}

fn norm_pos(p: Vec2, scale: f64) -> [f64; 2] {
    [
        (p.x - MAP_HALF_EXTENT) / scale,
        (p.y - MAP_HALF_EXTENT) / scale,
    ]
}

pub fn ped_observation(env: &Environment, state: &EpisodeState, i: usize) -> [f64; PED_OBS_DIM] {
    let ped = &state.peds[i];
    let v = &state.vehicle;
    let mut o = [0.0; PED_OBS_DIM];
    o[..2].copy_from_slice(&norm_pos(ped.position, MAP_HALF_EXTENT));
    o[2] = ped.walking_speed / PED_MAX_SPEED;
    o[3] = ped.tendency;
    if let Some(target) = ped.current_target(&env.graph) {
        let d = ped.position.distance(target);
        if d > 0.0 {
            o[4] = (target.x - ped.position.x) / d;
            o[5] = (target.y - ped.position.y) / d;
        }
        o[6] = d / MAP_HALF_EXTENT;
    }
    match env.map.surface_at(ped.position) {
        SurfaceType::Road => o[7] = 1.0,
        SurfaceType::Sidewalk => o[8] = 1.0,
        SurfaceType::Crosswalk => o[9] = 1.0,
        SurfaceType::OffMap => {}
    }
    let rel = v.position - ped.position;
    o[10] = rel.x / MAP_SIZE;
    o[11] = rel.y / MAP_SIZE;
    let vel = Vec2::from_angle(v.heading) * v.speed;
    o[12] = vel.x / MAX_SPEED;
    o[13] = vel.y / MAX_SPEED;
    o[14] = v.speed / MAX_SPEED;
    o[15] = rel.norm() / MAP_SIZE;
    let mut nearest: Option<(f64, Vec2)> = None;
    for (j, other) in state.peds.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = ped.position.distance(other.position);
        if nearest.is_none_or(|(bd, _)| d < bd) {
            nearest = Some((d, other.position - ped.position));
        }
    }
    if let Some((d, r)) = nearest {
        o[16] = r.x / MAP_SIZE;
        o[17] = r.y / MAP_SIZE;
        o[18] = d / MAP_SIZE;
    }
    o[19] = state.time_remaining();
    o
}

pub fn sdc_observation(env: &Environment, state: &EpisodeState) -> [f64; SDC_OBS_DIM] {
    let v = &state.vehicle;
    let mut o = [0.0; SDC_OBS_DIM];
    o[..2].copy_from_slice(&norm_pos(v.position, SDC_POSITION_SCALE));
    o[2] = v.heading.cos();
    o[3] = v.heading.sin();
    o[4] = v.speed / MAX_SPEED;
    o[5] = v.steering / MAX_STEER;
    let goal = (v.goal - v.position).rotate_into(v.heading);
    let goal_dist = goal.norm();
    if goal_dist > 0.0 {
        o[6] = goal.x / goal_dist;
        o[7] = goal.y / goal_dist;
    }
    o[8] = goal_dist / MAP_SIZE;
    o[9] = env.map.nearest_crosswalk(v.position).1 / MAP_HALF_EXTENT;

    let mut order: Vec<(f64, usize)> = state
        .peds
        .iter()
        .enumerate()
        .map(|(i, p)| (v.position.distance(p.position), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (slot, &(_, i)) in order.iter().take(SDC_VISIBLE_PEDS).enumerate() {
        let p = &state.peds[i];
        let rel = (p.position - v.position).rotate_into(v.heading);
        let vel = p.velocity.rotate_into(v.heading);
        let base = 10 + 4 * slot;
        o[base] = (rel.x / SDC_PED_RANGE).clamp(-1.0, 1.0);
        o[base + 1] = (rel.y / SDC_PED_RANGE).clamp(-1.0, 1.0);
        o[base + 2] = vel.x / PED_MAX_SPEED;
        o[base + 3] = vel.y / PED_MAX_SPEED;
    }
    o
}

pub fn global_state(state: &EpisodeState) -> [f64; GLOBAL_STATE_DIM] {
    let mut o = [0.0; GLOBAL_STATE_DIM];
    for (i, p) in state.peds.iter().enumerate() {
        let base = 4 * i;
        o[base..base + 2].copy_from_slice(&norm_pos(p.position, GLOBAL_POSITION_SCALE));
        o[base + 2] = p.speed() / PED_MAX_SPEED;
        o[base + 3] = p.tendency;
    }
    let v = &state.vehicle;
    let b = 4 * NUM_PEDS;
    o[b..b + 2].copy_from_slice(&norm_pos(v.position, GLOBAL_POSITION_SCALE));
    o[b + 2] = v.heading.cos();
    o[b + 3] = v.heading.sin();
    o[b + 4] = v.speed / MAX_SPEED;
    o[b + 5] = v.steering / MAX_STEER;
    let goal = v.goal - v.position;
    o[b + 6] = goal.x / MAP_SIZE;
    o[b + 7] = goal.y / MAP_SIZE;
    o[b + 8] = goal.norm() / MAP_SIZE;
    o[b + 9] = state.step as f64 / EPISODE_STEPS as f64;
    o
}
