//! Episode dynamics: reset, trait sampling, the crossing-mode roll, the step
//! function, observations and rewards.

mod obs;
mod reward;
mod state;

pub use obs::{
    global_state, ped_observation, sdc_observation, Observations, GLOBAL_STATE_DIM, PED_OBS_DIM,
    SDC_OBS_DIM, SDC_OBS_LAYOUT, SDC_PED_RANGE, SDC_VISIBLE_PEDS,
};
pub use reward::{ped_reward, sdc_reward, StepRewards};
pub use state::{
    tendency_quartile, CrossingMode, EpisodeState, PedestrianState, Terminal,
    DEFAULT_JAYWALK_MULTIPLIER, EPISODE_STEPS, NUM_PEDS,
};

use crate::geometry::{wrap_angle, Vec2};
use crate::map::{build_map, build_nav_graph, Axis, MapGeometry, NavGraph, NodeKind, RouteTable};
use crate::physics::{
    self, check_collision, check_goal, enforce_road_constraint, step_vehicle, CollisionEvent,
    PedDecision, PedMotion, VehicleAction, VehicleState, DT, PED_MAX_SPEED, PED_MIN_SPEED,
};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum straight-line separation between vehicle spawn and goal.
pub const MIN_GOAL_SEPARATION: f64 = 60.0;
/// A pedestrian approaching a crosswalk landing decides how to cross once it
/// is this close to the landing.
pub const CROSSING_DECISION_DISTANCE: f64 = 10.0;
pub const SPAWN_LATERAL_JITTER: f64 = 0.5;
pub const SPAWN_HEADING_JITTER: f64 = 0.05;

/// A road end where the vehicle can enter (right-hand lane, facing inward)
/// and the matching goal point in the outbound lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadEnd {
    pub name: &'static str,
    pub spawn: Vec2,
    pub heading: f64,
    pub goal: Vec2,
}

pub const ROAD_ENDS: [RoadEnd; 5] = [
    RoadEnd {
        name: "main-west",
        spawn: Vec2::new(4.0, 58.0),
        heading: 0.0,
        goal: Vec2::new(4.0, 62.0),
    },
    RoadEnd {
        name: "main-east",
        spawn: Vec2::new(116.0, 62.0),
        heading: std::f64::consts::PI,
        goal: Vec2::new(116.0, 58.0),
    },
    RoadEnd {
        name: "cross-south",
        spawn: Vec2::new(62.0, 4.0),
        heading: std::f64::consts::FRAC_PI_2,
        goal: Vec2::new(58.0, 4.0),
    },
    RoadEnd {
        name: "cross-north",
        spawn: Vec2::new(58.0, 116.0),
        heading: -std::f64::consts::FRAC_PI_2,
        goal: Vec2::new(62.0, 116.0),
    },
    RoadEnd {
        name: "branch-north",
        spawn: Vec2::new(98.0, 116.0),
        heading: -std::f64::consts::FRAC_PI_2,
        goal: Vec2::new(102.0, 116.0),
    },
];

/// Events of one transition, consumed by the reward functions and loggers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepEvents {
    pub motions: Vec<PedMotion>,
    /// Crossing-mode rolls made this step, per pedestrian.
    pub rolls: Vec<Option<CrossingMode>>,
    pub collision: Option<CollisionEvent>,
    pub goal: bool,
    pub timeout: bool,
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub state: EpisodeState,
    pub observations: Observations,
    pub rewards: StepRewards,
    pub events: StepEvents,
    pub done: bool,
}

/// Static world shared by every episode: map, navigation graph, route table
/// and spawn tables. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Environment {
    pub map: MapGeometry,
    pub graph: NavGraph,
    pub routes: RouteTable,
    /// Waypoints pedestrians spawn on (sidewalk waypoints that are not
    /// crosswalk landings).
    pub spawn_nodes: Vec<usize>,
    /// Waypoints pedestrians walk to.
    pub goal_nodes: Vec<usize>,
    /// Valid `(spawn end, goal end)` index pairs into [`ROAD_ENDS`].
    pub vehicle_routes: Vec<(usize, usize)>,
}

impl Environment {
    pub fn new() -> Result<Self> {
        let map = build_map();
        map.validate()?;
        let graph = build_nav_graph(&map)?;
        let routes = RouteTable::new(&graph)?;
        let spawn_nodes = graph.interior_waypoints();
        let goal_nodes = graph
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Sidewalk)
            .map(|n| n.id)
            .collect();
        let mut vehicle_routes = Vec::new();
        for (i, s) in ROAD_ENDS.iter().enumerate() {
            for (j, g) in ROAD_ENDS.iter().enumerate() {
                if i != j && s.spawn.distance(g.goal) >= MIN_GOAL_SEPARATION {
                    vehicle_routes.push((i, j));
                }
            }
        }
        Ok(Self {
            map,
            graph,
            routes,
            spawn_nodes,
            goal_nodes,
            vehicle_routes,
        })
    }

    /// Starts an episode. Everything random about the initial condition is a
    /// function of `seed` alone.
    pub fn reset(
        &self,
        seed: u64,
        jaywalk_multiplier: f64,
    ) -> Result<(EpisodeState, Observations)> {
        if !(0.0..=1.0).contains(&jaywalk_multiplier) {
            return Err(Error::InvalidMultiplier(jaywalk_multiplier));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let (si, gi) = self.vehicle_routes[rng.random_range(0..self.vehicle_routes.len())];
        let start = ROAD_ENDS[si];
        let lateral = rng.random_range(-SPAWN_LATERAL_JITTER..=SPAWN_LATERAL_JITTER);
        let heading_jitter = rng.random_range(-SPAWN_HEADING_JITTER..=SPAWN_HEADING_JITTER);
        let left = Vec2::from_angle(start.heading + std::f64::consts::FRAC_PI_2);
        let vehicle = VehicleState {
            position: start.spawn + left * lateral,
            heading: wrap_angle(start.heading + heading_jitter),
            speed: 0.0,
            steering: 0.0,
            goal: ROAD_ENDS[gi].goal,
        };

        let mut peds = Vec::with_capacity(NUM_PEDS);
        for _ in 0..NUM_PEDS {
            let tendency: f64 = rng.random();
            let walking_speed =
                PED_MIN_SPEED + (PED_MAX_SPEED - PED_MIN_SPEED) * rng.random::<f64>();
            let node = self.spawn_nodes[rng.random_range(0..self.spawn_nodes.len())];
            let mut ped =
                PedestrianState::parked(node, self.graph.nodes[node].pos, walking_speed, tendency);
            self.assign_new_goal(&mut ped, &mut rng);
            peds.push(ped);
        }

        let state = EpisodeState {
            seed,
            step: 0,
            vehicle,
            last_action: VehicleAction::default(),
            peds,
            rng,
            jaywalk_multiplier,
            terminal: None,
        };
        let obs = Observations::build(self, &state);
        Ok((state, obs))
    }

    fn assign_new_goal(&self, ped: &mut PedestrianState, rng: &mut ChaCha8Rng) {
        let goal = loop {
            let g = self.goal_nodes[rng.random_range(0..self.goal_nodes.len())];
            if g != ped.last_node {
                break g;
            }
        };
        ped.path = self.routes.path(ped.last_node, goal)[1..].to_vec();
    }

    /// Index into `ped.path` of the crosswalk midpoint the pedestrian is about
    /// to use, if it is at its crossing decision point.
    fn pending_crossing(&self, ped: &PedestrianState) -> Option<usize> {
        if ped.crossing_mode != CrossingMode::NotCrossing || ped.jaywalk_target.is_some() {
            return None;
        }
        let is_mid = |k: usize| {
            ped.path
                .get(k)
                .is_some_and(|&n| self.graph.crosswalk_of(n).is_some())
        };
        if is_mid(0) {
            return Some(0);
        }
        if is_mid(1) {
            let landing = self.graph.nodes[ped.path[0]].pos;
            if ped.position.distance(landing) <= CROSSING_DECISION_DISTANCE {
                return Some(1);
            }
        }
        None
    }

    /// Applies a crossing roll outcome to a pedestrian whose path has a
    /// crosswalk midpoint at `mid_index`.
    fn begin_crossing(&self, ped: &mut PedestrianState, mid_index: usize, mode: CrossingMode) {
        let far = ped.path[mid_index + 1];
        ped.crossing_mode = mode;
        ped.road_entry_step = None;
        match mode {
            CrossingMode::Crosswalk => {
                ped.crossing_exit = Some(far);
            }
            CrossingMode::Jaywalk => {
                // Straight across to the nearest point of the far sidewalk,
                // then along it to the far landing.
                let chain = self.graph.nodes[far]
                    .chain
                    .expect("crosswalk landings are sidewalk waypoints");
                let ext = self.graph.chain_extents[chain];
                let target = match ext.axis {
                    Axis::Horizontal => Vec2::new(ped.position.x.clamp(ext.lo, ext.hi), ext.across),
                    Axis::Vertical => Vec2::new(ext.across, ped.position.y.clamp(ext.lo, ext.hi)),
                };
                ped.jaywalk_target = Some(target);
                ped.crossing_exit = None;
                ped.path.drain(..=mid_index);
            }
            CrossingMode::NotCrossing => unreachable!("a roll never yields NotCrossing"),
        }
    }

    /// One transition. Pedestrians move first (in index order), then the
    /// vehicle; terminal checks run collision, goal, timeout in that order.
    pub fn step(
        &self,
        state: &EpisodeState,
        decisions: &[PedDecision],
        action: VehicleAction,
    ) -> Result<Transition> {
        let mut next = state.clone();
        let events = self.step_in_place(&mut next, decisions, action)?;
        let rewards = StepRewards {
            peds: (0..NUM_PEDS)
                .map(|i| ped_reward(state, &next, i, &events))
                .collect(),
            sdc: sdc_reward(&self.map, state, &next, &events),
        };
        let observations = Observations::build(self, &next);
        let done = next.is_terminal();
        Ok(Transition {
            state: next,
            observations,
            rewards,
            events,
            done,
        })
    }

    /// Mutating form of [`Environment::step`] without observations or rewards.
    pub fn step_in_place(
        &self,
        state: &mut EpisodeState,
        decisions: &[PedDecision],
        action: VehicleAction,
    ) -> Result<StepEvents> {
        if state.is_terminal() {
            return Err(Error::EpisodeTerminated);
        }
        if decisions.len() != NUM_PEDS {
            return Err(Error::DimensionMismatch {
                expected: NUM_PEDS,
                got: decisions.len(),
            });
        }
        let next_step = state.step + 1;
        let mut events = StepEvents {
            motions: Vec::with_capacity(NUM_PEDS),
            rolls: vec![None; NUM_PEDS],
            ..Default::default()
        };

        for (i, &decision) in decisions.iter().enumerate() {
            let mut ped = std::mem::replace(
                &mut state.peds[i],
                PedestrianState::parked(0, Vec2::ZERO, 1.0, 0.0),
            );
            if decision == PedDecision::Go {
                if let Some(mid) = self.pending_crossing(&ped) {
                    let mode = jaywalk_roll(ped.tendency, state.jaywalk_multiplier, &mut state.rng);
                    self.begin_crossing(&mut ped, mid, mode);
                    events.rolls[i] = Some(mode);
                }
            }
            let (mut moved, motion) = physics::step_pedestrian(&self.graph, &ped, decision, DT);
            if moved.crossing_mode != CrossingMode::NotCrossing
                && moved.road_entry_step.is_none()
                && self.map.on_carriageway(moved.position)
            {
                moved.road_entry_step = Some(next_step);
            }
            if moved.path.is_empty() && moved.jaywalk_target.is_none() {
                self.assign_new_goal(&mut moved, &mut state.rng);
            }
            state.peds[i] = moved;
            events.motions.push(motion);
        }

        let applied = action.clamped();
        let vehicle = step_vehicle(&state.vehicle, applied, DT);
        state.vehicle = enforce_road_constraint(&self.map, &vehicle);
        state.last_action = applied;
        state.step = next_step;

        if let Some(hit) = check_collision(&state.vehicle, &state.peds) {
            events.collision = Some(hit);
            state.terminal = Some(Terminal::Collision(hit));
        } else if check_goal(&state.vehicle) {
            events.goal = true;
            state.terminal = Some(Terminal::Goal);
        } else if state.step >= EPISODE_STEPS {
            events.timeout = true;
            state.terminal = Some(Terminal::Timeout);
        }
        Ok(events)
    }
}

/// Crossing-mode roll for a pedestrian who chose to go at a crossing:
/// jaywalk with probability `tendency * multiplier`, otherwise use the
/// crosswalk. Consumes exactly one uniform draw.
pub fn jaywalk_roll(tendency: f64, multiplier: f64, rng: &mut impl Rng) -> CrossingMode {
    let u: f64 = rng.random();
    if u < tendency * multiplier {
        CrossingMode::Jaywalk
    } else {
        CrossingMode::Crosswalk
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> Environment {
        Environment::new().unwrap()
    }

    #[test]
    fn reset_is_deterministic() {
        let e = env();
        let (a, oa) = e.reset(17, 0.25).unwrap();
        let (b, ob) = e.reset(17, 0.25).unwrap();
        assert_eq!(a, b);
        assert_eq!(oa, ob);
        let (c, _) = e.reset(18, 0.25).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.jaywalk_multiplier, 0.25);
        assert_eq!(a.peds.len(), NUM_PEDS);
    }

    #[test]
    fn reset_rejects_bad_multiplier() {
        let e = env();
        assert!(matches!(e.reset(1, 1.5), Err(Error::InvalidMultiplier(_))));
        assert!(matches!(e.reset(1, -0.1), Err(Error::InvalidMultiplier(_))));
    }

    #[test]
    fn reset_respects_spawn_rules() {
        let e = env();
        for seed in 0..200 {
            let (s, _) = e.reset(seed, 0.25).unwrap();
            assert!(s.vehicle.position.distance(s.vehicle.goal) >= MIN_GOAL_SEPARATION - 1.0);
            assert!(e.map.on_road(s.vehicle.position));
            for p in &s.peds {
                assert!((0.0..1.0).contains(&p.tendency));
                assert!((1.0..=2.0).contains(&p.walking_speed));
                assert!(e.spawn_nodes.contains(&p.last_node));
                assert!(!p.path.is_empty());
            }
        }
    }

    #[test]
    fn roll_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(jaywalk_roll(0.0, 0.25, &mut rng), CrossingMode::Crosswalk);
            assert_eq!(jaywalk_roll(1.0, 1.0, &mut rng), CrossingMode::Jaywalk);
        }
    }

    #[test]
    fn roll_consumes_one_draw() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = a.clone();
        jaywalk_roll(0.4, 0.25, &mut a);
        let _: f64 = b.random();
        assert_eq!(a, b);
    }

    #[test]
    fn roll_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| jaywalk_roll(0.8, 0.25, &mut rng) == CrossingMode::Jaywalk)
            .count();
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.20).abs() < 0.005, "{rate}");
    }

    #[test]
    fn timeout_and_absorbing_terminal() {
        let e = env();
        let (mut s, _) = e.reset(5, 0.25).unwrap();
        let wait = vec![PedDecision::Wait; NUM_PEDS];
        for _ in 0..EPISODE_STEPS {
            let t = e.step(&s, &wait, VehicleAction::new(0.0, 0.0)).unwrap();
            s = t.state;
            if t.done {
                break;
            }
        }
        assert_eq!(s.step, EPISODE_STEPS);
        assert_eq!(s.terminal, Some(Terminal::Timeout));
        assert!(matches!(
            e.step(&s, &wait, VehicleAction::default()),
            Err(Error::EpisodeTerminated)
        ));
    }

    #[test]
    fn collision_beats_goal() {
        let e = env();
        let (mut s, _) = e.reset(5, 0.25).unwrap();
        s.vehicle.goal = s.vehicle.position;
        s.peds[3].position = s.vehicle.position + Vec2::new(0.5, 0.0);
        let home = s.peds[3].last_node;
        s.peds[3].path = vec![home];
        let wait = vec![PedDecision::Wait; NUM_PEDS];
        let t = e.step(&s, &wait, VehicleAction::default()).unwrap();
        assert!(t.done);
        assert!(matches!(t.state.terminal, Some(Terminal::Collision(c)) if c.pedestrian == 3));
        assert!(!t.events.goal);
        assert!(t.rewards.sdc <= -50.0 + 1e-9 + 1.0);
        assert!(t.rewards.peds[3] <= -25.0 + 1.0);
    }

    #[test]
    fn step_is_deterministic() {
        let e = env();
        let (s, _) = e.reset(21, 0.25).unwrap();
        let go = vec![PedDecision::Go; NUM_PEDS];
        let a = e.step(&s, &go, VehicleAction::new(1.0, 0.1)).unwrap();
        let b = e.step(&s, &go, VehicleAction::new(1.0, 0.1)).unwrap();
        assert_eq!(a.state, b.state);
        assert_eq!(a.observations, b.observations);
        assert_eq!(a.rewards, b.rewards);
    }

    #[test]
    fn crossings_roll_once_and_complete() {
        let e = env();
        let go = vec![PedDecision::Go; NUM_PEDS];
        let mut rolls = 0;
        let mut completed_jaywalks = 0;
        for seed in 0..20 {
            let (mut s, _) = e.reset(seed, 1.0).unwrap();
            while !s.is_terminal() {
                let before = s.clone();
                let ev = e
                    .step_in_place(&mut s, &go, VehicleAction::default())
                    .unwrap();
                for i in 0..NUM_PEDS {
                    if let Some(mode) = ev.rolls[i] {
                        rolls += 1;
                        assert_eq!(before.peds[i].crossing_mode, CrossingMode::NotCrossing);
                        if mode == CrossingMode::Jaywalk {
                            assert!(
                                s.peds[i].jaywalk_target.is_some()
                                    || ev.motions[i].jaywalk_completed
                            );
                        }
                    }
                    if ev.motions[i].jaywalk_completed {
                        completed_jaywalks += 1;
                    }
                    if s.peds[i].crossing_mode == CrossingMode::Jaywalk {
                        assert!(s.peds[i].jaywalk_target.is_some());
                    }
                }
            }
        }
        assert!(rolls > 100, "{rolls}");
        assert!(completed_jaywalks > 10, "{completed_jaywalks}");
    }

    #[test]
    fn tendency_is_constant_within_episode() {
        let e = env();
        let (mut s, _) = e.reset(2, 0.25).unwrap();
        let taus: Vec<f64> = s.peds.iter().map(|p| p.tendency).collect();
        let go = vec![PedDecision::Go; NUM_PEDS];
        for _ in 0..200 {
            if s.is_terminal() {
                break;
            }
            e.step_in_place(&mut s, &go, VehicleAction::default())
                .unwrap();
        }
        let after: Vec<f64> = s.peds.iter().map(|p| p.tendency).collect();
        assert_eq!(taus, after);
    }
}
