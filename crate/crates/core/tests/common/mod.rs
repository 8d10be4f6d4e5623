//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use intersim::env::{CrossingMode, NUM_PEDS};
use intersim::geometry::Vec2;
use intersim::metrics::log::{
    EpisodeLog, PedRecord, StepRecord, TERMINAL_COLLISION, TERMINAL_GOAL, TERMINAL_NONE,
    TERMINAL_TIMEOUT,
};
use intersim::physics::{
    VehicleAction, VehicleState, ACCEL_MAX, ACCEL_MIN, MAX_SPEED, MAX_STEER, MAX_STEER_RATE,
    WHEELBASE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Vehicle dynamics oracle
// ---------------------------------------------------------------------------

/// Integrates the continuous bicycle model with a fine step while holding
/// each action for `hold` seconds. Returns the position at the end of every
/// hold interval.
pub fn fine_trajectory(
    start: &VehicleState,
    actions: &[VehicleAction],
    hold: f64,
    h: f64,
) -> Vec<Vec2> {
    let sub = (hold / h).round() as usize;
    let (mut x, mut y, mut th, mut v, mut d) = (
        start.position.x,
        start.position.y,
        start.heading,
        start.speed,
        start.steering,
    );
    let mut out = Vec::with_capacity(actions.len());
    for a in actions {
        let target = a.steer.clamp(-MAX_STEER, MAX_STEER);
        let acc = a.accel.clamp(ACCEL_MIN, ACCEL_MAX);
        for _ in 0..sub {
            let dd = (target - d).clamp(-MAX_STEER_RATE * h, MAX_STEER_RATE * h);
            d = (d + dd).clamp(-MAX_STEER, MAX_STEER);
            v = (v + acc * h).clamp(0.0, MAX_SPEED);
            th += v / WHEELBASE * d.tan() * h;
            x += v * th.cos() * h;
            y += v * th.sin() * h;
        }
        out.push(Vec2::new(x, y));
    }
    out
}

/// Least-squares circle through `points` (algebraic fit): returns the
/// center and radius.
pub fn fit_circle(points: &[Vec2]) -> (Vec2, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let my = points.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut suu, mut svv, mut suv, mut suuu, mut svvv, mut suvv, mut svuu) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let (u, v) = (p.x - mx, p.y - my);
        suu += u * u;
        svv += v * v;
        suv += u * v;
        suuu += u * u * u;
        svvv += v * v * v;
        suvv += u * v * v;
        svuu += v * u * u;
    }
    let (r1, r2) = (0.5 * (suuu + suvv), 0.5 * (svvv + svuu));
    let det = suu * svv - suv * suv;
    let uc = (r1 * svv - r2 * suv) / det;
    let vc = (r2 * suu - r1 * suv) / det;
    let r = (uc * uc + vc * vc + (suu + svv) / n).sqrt();
    (Vec2::new(mx + uc, my + vc), r)
}

// ---------------------------------------------------------------------------
// Synthetic logs
// ---------------------------------------------------------------------------

pub fn far_ped() -> PedRecord {
    PedRecord {
        x: 500.0,
        y: 500.0,
        mode: CrossingMode::NotCrossing,
        quartile: 0,
        on_road: false,
    }
}

pub fn blank_row(step: u32) -> StepRecord {
    StepRecord {
        step,
        sdc_x: 0.0,
        sdc_y: 0.0,
        heading: 0.0,
        speed: 0.0,
        steering: 0.0,
        accel_cmd: 0.0,
        steer_cmd: 0.0,
        goal_dist: 50.0,
        terminal: TERMINAL_NONE,
        collision_ped: None,
        peds: [far_ped(); NUM_PEDS],
    }
}

/// A random but structurally valid episode log: pedestrians alternate
/// between idle stretches and crossings of random type, wander near the
/// vehicle, and the vehicle brakes at random.
pub fn synthetic_log(episode: usize, seed: u64) -> EpisodeLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = rng.random_range(20..160u32);
    let mut modes = [CrossingMode::NotCrossing; NUM_PEDS];
    let quartiles: [u8; NUM_PEDS] = std::array::from_fn(|_| rng.random_range(0..4));
    let mut steps = Vec::with_capacity(len as usize);
    for t in 1..=len {
        let mut r = blank_row(t);
        r.sdc_x = rng.random_range(-5.0..5.0);
        r.sdc_y = rng.random_range(-5.0..5.0);
        r.speed = rng.random_range(0.0..MAX_SPEED);
        r.accel_cmd = if rng.random_bool(0.3) {
            rng.random_range(ACCEL_MIN..-0.5)
        } else {
            rng.random_range(-0.5..ACCEL_MAX)
        };
        for j in 0..NUM_PEDS {
            if rng.random_bool(0.08) {
                modes[j] = match rng.random_range(0..3) {
                    0 => CrossingMode::NotCrossing,
                    1 => CrossingMode::Crosswalk,
                    _ => CrossingMode::Jaywalk,
                };
            }
            let d = rng.random_range(0.0..25.0);
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            r.peds[j] = PedRecord {
                x: r.sdc_x + d * a.cos(),
                y: r.sdc_y + d * a.sin(),
                mode: modes[j],
                quartile: quartiles[j],
                on_road: modes[j] != CrossingMode::NotCrossing && rng.random_bool(0.8),
            };
        }
        steps.push(r);
    }
    let last = steps.last_mut().unwrap();
    last.terminal = match rng.random_range(0..3) {
        0 => TERMINAL_COLLISION,
        1 => TERMINAL_GOAL,
        _ => TERMINAL_TIMEOUT,
    };
    if last.terminal == TERMINAL_COLLISION {
        last.collision_ped = Some(rng.random_range(0..NUM_PEDS));
    }
    EpisodeLog {
        episode,
        seed,
        steps,
    }
}

/// Two crossing pedestrians approaching a vehicle: a crosswalk user passed
/// at 5.43 m/s and a jaywalker passed at 8.08 m/s, both inside the 3-6 m
/// bin, so the jaywalk-minus-crosswalk speed difference is 2.65 m/s.
pub fn delta_v_example() -> EpisodeLog {
    let mut steps = Vec::new();
    for t in 1..=6u32 {
        let mut r = blank_row(t);
        let (speed, cw, jw) = if t <= 3 {
            (5.43, 4.0, 30.0)
        } else {
            (8.08, 30.0, 5.0)
        };
        r.speed = speed;
        r.peds[0] = PedRecord {
            x: cw,
            y: 0.0,
            mode: CrossingMode::Crosswalk,
            quartile: 1,
            on_road: true,
        };
        r.peds[1] = PedRecord {
            x: 0.0,
            y: jw,
            mode: CrossingMode::Jaywalk,
            quartile: 3,
            on_road: true,
        };
        steps.push(r);
    }
    steps.last_mut().unwrap().terminal = TERMINAL_TIMEOUT;
    EpisodeLog {
        episode: 0,
        seed: 0,
        steps,
    }
}

// ---------------------------------------------------------------------------
// Scalar metric duplicates
// ---------------------------------------------------------------------------

fn dist(r: &StepRecord, j: usize) -> f64 {
    (r.peds[j].x - r.sdc_x).hypot(r.peds[j].y - r.sdc_y)
}

fn kind(p: &PedRecord) -> Option<usize> {
    match (p.on_road, p.mode) {
        (true, CrossingMode::Crosswalk) => Some(0),
        (true, CrossingMode::Jaywalk) => Some(1),
        _ => None,
    }
}

/// Mean vehicle speed per encounter type for samples with distance in
/// `[lo, hi)` and below 12 m: `(crosswalk, jaywalk)`.
pub fn scalar_bin_means(logs: &[EpisodeLog], lo: f64, hi: f64) -> (f64, f64) {
    let mut sum = [0.0f64; 2];
    let mut n = [0usize; 2];
    for log in logs {
        for j in 0..NUM_PEDS {
            for r in &log.steps {
                let d = dist(r, j);
                if d >= 12.0 {
                    continue;
                }
                if let Some(k) = kind(&r.peds[j]) {
                    if d >= lo && d < hi {
                        sum[k] += r.speed;
                        n[k] += 1;
                    }
                }
            }
        }
    }
    let m = |k: usize| {
        if n[k] == 0 {
            f64::NAN
        } else {
            sum[k] / n[k] as f64
        }
    };
    (m(0), m(1))
}

/// Collision shares by mode of the struck pedestrian:
/// `(not crossing, crosswalk, jaywalk)`.
pub fn scalar_attribution(logs: &[EpisodeLog]) -> (f64, f64, f64) {
    let mut c = [0usize; 3];
    for log in logs {
        let last = log.steps.last().unwrap();
        if last.terminal == TERMINAL_COLLISION {
            if let Some(j) = last.collision_ped {
                let k = match last.peds[j].mode {
                    CrossingMode::NotCrossing => 0,
                    CrossingMode::Crosswalk => 1,
                    CrossingMode::Jaywalk => 2,
                };
                c[k] += 1;
            }
        }
    }
    let total = c[0] + c[1] + c[2];
    if total == 0 {
        return (0.0, 0.0, 0.0);
    }
    let t = total as f64;
    (c[0] as f64 / t, c[1] as f64 / t, c[2] as f64 / t)
}

/// Minimum distance of every maximal run of steps during which one
/// pedestrian stays within 12 m with an unchanged encounter type.
pub fn scalar_encounter_minima(logs: &[EpisodeLog]) -> [Vec<f64>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for log in logs {
        for j in 0..NUM_PEDS {
            let mut t = 0;
            let rows = &log.steps;
            while t < rows.len() {
                let here = |t: usize| kind(&rows[t].peds[j]).filter(|_| dist(&rows[t], j) < 12.0);
                match here(t) {
                    None => t += 1,
                    Some(k) => {
                        let mut m = f64::INFINITY;
                        while t < rows.len() && here(t) == Some(k) {
                            m = m.min(dist(&rows[t], j));
                            t += 1;
                        }
                        out[k].push(m);
                    }
                }
            }
        }
    }
    out
}

/// Nearest-rank-free 5th percentile by sorting and interpolating.
pub fn scalar_p5(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = 0.05 * (v.len() - 1) as f64;
    let i = pos as usize;
    if i + 1 >= v.len() {
        return v[i];
    }
    v[i] + (pos - i as f64) * (v[i + 1] - v[i])
}

/// Mean seconds from a jaywalker's first on-road step (when within 20 m) to
/// the first of two consecutive braking commands, with the count of events
/// that saw no such braking.
pub fn scalar_reaction(logs: &[EpisodeLog]) -> (f64, usize, usize) {
    let mut total = 0.0;
    let mut events = 0;
    let mut missed = 0;
    for log in logs {
        let rows = &log.steps;
        for j in 0..NUM_PEDS {
            let mut t = 0;
            while t < rows.len() {
                if rows[t].peds[j].mode != CrossingMode::Jaywalk {
                    t += 1;
                    continue;
                }
                let start = t;
                while t < rows.len() && rows[t].peds[j].mode == CrossingMode::Jaywalk {
                    t += 1;
                }
                let Some(entry) = (start..t).find(|&k| rows[k].peds[j].on_road) else {
                    continue;
                };
                if dist(&rows[entry], j) > 20.0 {
                    continue;
                }
                let brake = (entry..rows.len().saturating_sub(1))
                    .find(|&k| rows[k].accel_cmd < -0.5 && rows[k + 1].accel_cmd < -0.5);
                match brake {
                    Some(k) => {
                        total += (k - entry) as f64 * 0.1;
                        events += 1;
                    }
                    None => missed += 1,
                }
            }
        }
    }
    let mean = if events == 0 {
        f64::NAN
    } else {
        total / events as f64
    };
    (mean, events, missed)
}
