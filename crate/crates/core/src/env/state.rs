use crate::geometry::Vec2;
use crate::map::NavGraph;
use crate::physics::{CollisionEvent, VehicleAction, VehicleState};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const NUM_PEDS: usize = 12;
pub const EPISODE_STEPS: u32 = 500;
pub const DEFAULT_JAYWALK_MULTIPLIER: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrossingMode {
    NotCrossing,
    Crosswalk,
    Jaywalk,
}

impl CrossingMode {
    pub fn code(self) -> u8 {
        match self {
            CrossingMode::NotCrossing => 0,
            CrossingMode::Crosswalk => 1,
            CrossingMode::Jaywalk => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(CrossingMode::NotCrossing),
            1 => Some(CrossingMode::Crosswalk),
            2 => Some(CrossingMode::Jaywalk),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PedestrianState {
    pub position: Vec2,
    /// Displacement over the last step divided by dt.
    pub velocity: Vec2,
    /// Walking speed in m/s, drawn from [1, 2] at reset.
    pub walking_speed: f64,
    /// Latent jaywalking tendency in [0, 1]; fixed for the whole episode and
    /// never exposed to the vehicle.
    pub tendency: f64,
    /// Last navigation node reached.
    pub last_node: usize,
    /// Remaining nodes to visit, next first.
    pub path: Vec<usize>,
    pub crossing_mode: CrossingMode,
    /// Far-side landing that completes a crosswalk crossing.
    pub crossing_exit: Option<usize>,
    pub jaywalk_target: Option<Vec2>,
    /// Step at which the pedestrian first stood on the carriageway during the
    /// current crossing.
    pub road_entry_step: Option<u32>,
    pub waiting: bool,
}

impl PedestrianState {
    /// A pedestrian standing still at `position` with an empty route.
    pub fn parked(node: usize, position: Vec2, walking_speed: f64, tendency: f64) -> Self {
        Self {
            position,
            velocity: Vec2::ZERO,
            walking_speed,
            tendency,
            last_node: node,
            path: Vec::new(),
            crossing_mode: CrossingMode::NotCrossing,
            crossing_exit: None,
            jaywalk_target: None,
            road_entry_step: None,
            waiting: false,
        }
    }

    /// Position the pedestrian is currently walking toward.
    pub fn current_target(&self, graph: &NavGraph) -> Option<Vec2> {
        self.jaywalk_target
            .or_else(|| self.path.first().map(|&n| graph.nodes[n].pos))
    }

    pub fn end_crossing(&mut self) {
        self.crossing_mode = CrossingMode::NotCrossing;
        self.crossing_exit = None;
        self.jaywalk_target = None;
        self.road_entry_step = None;
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    /// Trait quartile 0..=3 (Q1..Q4).
    pub fn tendency_quartile(&self) -> u8 {
        tendency_quartile(self.tendency)
    }
}

pub fn tendency_quartile(tau: f64) -> u8 {
    ((tau * 4.0).floor() as i64).clamp(0, 3) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Terminal {
    Collision(CollisionEvent),
    Goal,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeState {
    pub seed: u64,
    pub step: u32,
    pub vehicle: VehicleState,
    /// Clamped action applied on the most recent step.
    pub last_action: VehicleAction,
    pub peds: Vec<PedestrianState>,
    pub rng: ChaCha8Rng,
    pub jaywalk_multiplier: f64,
    pub terminal: Option<Terminal>,
}

impl EpisodeState {
    pub fn is_terminal(&self) -> bool {
        self.terminal.is_some()
    }

    pub fn time_remaining(&self) -> f64 {
        (EPISODE_STEPS - self.step.min(EPISODE_STEPS)) as f64 / EPISODE_STEPS as f64
    }
}
