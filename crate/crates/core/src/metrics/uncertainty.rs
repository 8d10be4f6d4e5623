//! Speed differential, collision attribution, approach-distance percentile,
//! braking reaction time and quartile jaywalk rates.
//!
//! Each episode log is reduced to an [`EpisodeStats`] holding raw samples in
//! log order. Accumulators are merged by concatenation, so any grouping of
//! episodes merged in the same order yields bit-identical metrics.

use super::log::{EpisodeLog, PedRecord, TERMINAL_COLLISION, TERMINAL_GOAL, TERMINAL_TIMEOUT};
use crate::env::{CrossingMode, NUM_PEDS};
use crate::physics::DT;
use serde::Serialize;

/// Distance bins in metres, `[lo, hi)`.
pub const DISTANCE_BINS: [(f64, f64); 4] = [(0.0, 3.0), (3.0, 6.0), (6.0, 9.0), (9.0, 12.0)];
/// Only crossing pedestrians closer than this to the vehicle are sampled.
pub const ENCOUNTER_RANGE: f64 = 12.0;
/// Jaywalk events farther than this from the vehicle at road entry are not
/// timed.
pub const REACTION_RANGE: f64 = 20.0;
/// Commanded acceleration below this counts as braking...
pub const BRAKE_THRESHOLD: f64 = -0.5;
/// ...when sustained for this many consecutive steps.
pub const BRAKE_STEPS: usize = 2;
/// Below this many encounters a percentile is flagged low-confidence.
pub const P5_MIN_ENCOUNTERS: usize = 20;

pub const CW: usize = 0;
pub const JW: usize = 1;

/// Encounter type of a pedestrian at one step: crosswalk users and jaywalkers
/// count only while on the carriageway.
pub fn encounter_type(p: &PedRecord) -> Option<usize> {
    if !p.on_road {
        return None;
    }
    match p.mode {
        CrossingMode::Crosswalk => Some(CW),
        CrossingMode::Jaywalk => Some(JW),
        CrossingMode::NotCrossing => None,
    }
}

/// Raw samples from one or more episodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeStats {
    pub episodes: usize,
    pub goals: usize,
    pub collisions: usize,
    pub timeouts: usize,
    /// `(distance, sdc speed)` per encounter type, one per step and
    /// crossing pedestrian within range.
    pub speed_samples: [Vec<(f64, f64)>; 2],
    /// Minimum distance of each encounter, per type.
    pub encounter_minima: [Vec<f64>; 2],
    /// Steps from road entry to sustained braking for timed jaywalk events.
    pub reaction_steps: Vec<u32>,
    /// Timed jaywalk events with no braking before the episode ended.
    pub no_brake: usize,
    /// Collisions by the crossing-mode code of the pedestrian hit.
    pub collisions_by_mode: [usize; 3],
    /// Crossing starts per trait quartile and type.
    pub crossings: [[usize; 2]; 4],
}

impl EpisodeStats {
    pub fn from_log(log: &EpisodeLog) -> Self {
        let mut s = EpisodeStats {
            episodes: 1,
            ..Default::default()
        };
        let rows = &log.steps;
        match log.terminal() {
            TERMINAL_GOAL => s.goals = 1,
            TERMINAL_COLLISION => {
                s.collisions = 1;
                let last = rows.last().expect("a terminal episode has rows");
                if let Some(j) = last.collision_ped {
                    s.collisions_by_mode[last.peds[j].mode.code() as usize] += 1;
                }
            }
            TERMINAL_TIMEOUT => s.timeouts = 1,
            _ => {}
        }

        for j in 0..NUM_PEDS {
            let mut prev_mode = CrossingMode::NotCrossing;
            // Open encounter: (type, running minimum).
            let mut open: Option<(usize, f64)> = None;
            // Open jaywalk run: entry step index once on the road.
            let mut jw_run = false;
            let mut jw_entry: Option<usize> = None;
            for (t, r) in rows.iter().enumerate() {
                let p = &r.peds[j];
                if prev_mode == CrossingMode::NotCrossing && p.mode != CrossingMode::NotCrossing {
                    let ty = if p.mode == CrossingMode::Jaywalk {
                        JW
                    } else {
                        CW
                    };
                    s.crossings[p.quartile.min(3) as usize][ty] += 1;
                }

                let d = r.ped_distance(j);
                let here = encounter_type(p).filter(|_| d < ENCOUNTER_RANGE);
                if let Some(ty) = here {
                    s.speed_samples[ty].push((d, r.speed));
                }
                open = match (open, here) {
                    (Some((oty, m)), Some(ty)) if oty == ty => Some((ty, m.min(d))),
                    (prev, next) => {
                        if let Some((oty, m)) = prev {
                            s.encounter_minima[oty].push(m);
                        }
                        next.map(|ty| (ty, d))
                    }
                };

                if p.mode == CrossingMode::Jaywalk {
                    if !jw_run {
                        jw_run = true;
                        jw_entry = None;
                    }
                    if jw_entry.is_none() && p.on_road {
                        jw_entry = Some(t);
                        if d <= REACTION_RANGE {
                            match reaction_after(log, t) {
                                Some(k) => s.reaction_steps.push(k),
                                None => s.no_brake += 1,
                            }
                        }
                    }
                } else {
                    jw_run = false;
                }
                prev_mode = p.mode;
            }
            if let Some((oty, m)) = open {
                s.encounter_minima[oty].push(m);
            }
        }
        s
    }

    /// Appends `other`'s samples after this accumulator's.
    pub fn merge(&mut self, other: &EpisodeStats) {
        self.episodes += other.episodes;
        self.goals += other.goals;
        self.collisions += other.collisions;
        self.timeouts += other.timeouts;
        for k in 0..2 {
            self.speed_samples[k].extend_from_slice(&other.speed_samples[k]);
            self.encounter_minima[k].extend_from_slice(&other.encounter_minima[k]);
        }
        self.reaction_steps.extend_from_slice(&other.reaction_steps);
        self.no_brake += other.no_brake;
        for k in 0..3 {
            self.collisions_by_mode[k] += other.collisions_by_mode[k];
        }
        for q in 0..4 {
            for k in 0..2 {
                self.crossings[q][k] += other.crossings[q][k];
            }
        }
    }

    pub fn from_logs(logs: &[EpisodeLog]) -> Self {
        let mut acc = EpisodeStats::default();
        for l in logs {
            acc.merge(&EpisodeStats::from_log(l));
        }
        acc
    }
}

/// Steps from row `entry` to the first row that starts a run of
/// [`BRAKE_STEPS`] commands below [`BRAKE_THRESHOLD`].
fn reaction_after(log: &EpisodeLog, entry: usize) -> Option<u32> {
    let rows = &log.steps;
    (entry..rows.len())
        .find(|&t| {
            t + BRAKE_STEPS <= rows.len()
                && rows[t..t + BRAKE_STEPS]
                    .iter()
                    .all(|r| r.accel_cmd < BRAKE_THRESHOLD)
        })
        .map(|t| (t - entry) as u32)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs {
        sum += x;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Linear-interpolation percentile (`q` in `[0, 1]`) of unsorted data: the
/// value at fractional rank `(n - 1) q` of the sorted sample.
pub fn percentile(data: &[f64], q: f64) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedBin {
    pub lo: f64,
    pub hi: f64,
    pub n_crosswalk: usize,
    pub n_jaywalk: usize,
    pub mean_crosswalk: f64,
    pub mean_jaywalk: f64,
    /// Jaywalk mean minus crosswalk mean.
    pub delta_v: f64,
}

pub fn speed_differential_from(stats: &EpisodeStats, bins: &[(f64, f64)]) -> Vec<SpeedBin> {
    bins.iter()
        .map(|&(lo, hi)| {
            let pick = |ty: usize| {
                stats.speed_samples[ty]
                    .iter()
                    .filter(move |(d, _)| *d >= lo && *d < hi)
                    .map(|&(_, v)| v)
            };
            let mean_crosswalk = mean(pick(CW));
            let mean_jaywalk = mean(pick(JW));
            SpeedBin {
                lo,
                hi,
                n_crosswalk: pick(CW).count(),
                n_jaywalk: pick(JW).count(),
                mean_crosswalk,
                mean_jaywalk,
                delta_v: mean_jaywalk - mean_crosswalk,
            }
        })
        .collect()
}

pub fn speed_differential(logs: &[EpisodeLog], bins: &[(f64, f64)]) -> Vec<SpeedBin> {
    speed_differential_from(&EpisodeStats::from_logs(logs), bins)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attribution {
    pub collisions: usize,
    pub crosswalk: f64,
    pub jaywalk: f64,
    /// Pedestrians hit while not crossing (on a sidewalk or mid-route).
    pub not_crossing: f64,
    pub empty: bool,
    pub crossings: usize,
    /// Share of all crossing starts that were jaywalks.
    pub jaywalk_crossing_fraction: f64,
}

pub fn collision_attribution_from(stats: &EpisodeStats) -> Attribution {
    let by = stats.collisions_by_mode;
    let total: usize = by.iter().sum();
    let frac = |k: usize| {
        if total == 0 {
            0.0
        } else {
            by[k] as f64 / total as f64
        }
    };
    let jw: usize = stats.crossings.iter().map(|q| q[JW]).sum();
    let all: usize = stats.crossings.iter().map(|q| q[CW] + q[JW]).sum();
    Attribution {
        collisions: total,
        crosswalk: frac(1),
        jaywalk: frac(2),
        not_crossing: frac(0),
        empty: total == 0,
        crossings: all,
        jaywalk_crossing_fraction: if all == 0 {
            f64::NAN
        } else {
            jw as f64 / all as f64
        },
    }
}

pub fn collision_attribution(logs: &[EpisodeLog]) -> Attribution {
    collision_attribution_from(&EpisodeStats::from_logs(logs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproachP5 {
    pub crosswalk: f64,
    pub jaywalk: f64,
    pub n_crosswalk: usize,
    pub n_jaywalk: usize,
    pub low_confidence_crosswalk: bool,
    pub low_confidence_jaywalk: bool,
}

pub fn approach_distance_p5_from(stats: &EpisodeStats) -> ApproachP5 {
    let [cw, jw] = &stats.encounter_minima;
    ApproachP5 {
        crosswalk: percentile(cw, 0.05),
        jaywalk: percentile(jw, 0.05),
        n_crosswalk: cw.len(),
        n_jaywalk: jw.len(),
        low_confidence_crosswalk: cw.len() < P5_MIN_ENCOUNTERS,
        low_confidence_jaywalk: jw.len() < P5_MIN_ENCOUNTERS,
    }
}

pub fn approach_distance_p5(logs: &[EpisodeLog]) -> ApproachP5 {
    approach_distance_p5_from(&EpisodeStats::from_logs(logs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactionTime {
    pub mean_s: f64,
    pub events: usize,
    pub no_brake: usize,
}

pub fn braking_reaction_time_from(stats: &EpisodeStats) -> ReactionTime {
    ReactionTime {
        mean_s: mean(stats.reaction_steps.iter().map(|&k| k as f64 * DT)),
        events: stats.reaction_steps.len(),
        no_brake: stats.no_brake,
    }
}

pub fn braking_reaction_time(logs: &[EpisodeLog]) -> ReactionTime {
    braking_reaction_time_from(&EpisodeStats::from_logs(logs))
}

/// Jaywalk share of crossing starts per trait quartile (NaN where a quartile
/// made no crossings).
pub fn quartile_jaywalk_rates_from(stats: &EpisodeStats) -> [f64; 4] {
    stats.crossings.map(|[cw, jw]| {
        if cw + jw == 0 {
            f64::NAN
        } else {
            jw as f64 / (cw + jw) as f64
        }
    })
}

pub fn quartile_jaywalk_rates(logs: &[EpisodeLog]) -> [f64; 4] {
    quartile_jaywalk_rates_from(&EpisodeStats::from_logs(logs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::log::{StepRecord, TERMINAL_NONE};

    fn idle_ped() -> PedRecord {
        PedRecord {
            x: 200.0,
            y: 200.0,
            mode: CrossingMode::NotCrossing,
            quartile: 0,
            on_road: false,
        }
    }

    fn row(step: u32, speed: f64, accel: f64) -> StepRecord {
        StepRecord {
            step,
            sdc_x: 0.0,
            sdc_y: 0.0,
            heading: 0.0,
            speed,
            steering: 0.0,
            accel_cmd: accel,
            steer_cmd: 0.0,
            goal_dist: 50.0,
            terminal: TERMINAL_NONE,
            collision_ped: None,
            peds: [idle_ped(); NUM_PEDS],
        }
    }

    fn crossing(x: f64, mode: CrossingMode) -> PedRecord {
        PedRecord {
            x,
            y: 0.0,
            mode,
            quartile: 2,
            on_road: true,
        }
    }

    #[test]
    fn percentile_rule() {
        let d: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((percentile(&d, 0.05) - 5.95).abs() < 1e-12);
        assert_eq!(percentile(&[2.5; 7], 0.05), 2.5);
        assert!(percentile(&[], 0.05).is_nan());
    }

    #[test]
    fn single_crosswalk_sample() {
        let mut r = row(1, 4.2, 0.0);
        r.peds[0] = crossing(2.0, CrossingMode::Crosswalk);
        let log = EpisodeLog {
            episode: 0,
            seed: 0,
            steps: vec![r],
        };
        let bins = speed_differential(&[log], &DISTANCE_BINS);
        assert_eq!(bins[0].mean_crosswalk, 4.2);
        assert!(bins[0].mean_jaywalk.is_nan());
        assert_eq!(bins[0].n_crosswalk, 1);
        assert!(bins[1..].iter().all(|b| b.n_crosswalk + b.n_jaywalk == 0));
    }

    #[test]
    fn reaction_ten_steps_and_no_brake() {
        let mut steps: Vec<StepRecord> = (1..=30).map(|t| row(t, 5.0, 1.0)).collect();
        for r in steps.iter_mut().skip(4) {
            r.peds[1] = crossing(15.0, CrossingMode::Jaywalk);
        }
        steps[14].accel_cmd = -4.0;
        steps[15].accel_cmd = -4.0;
        let log = EpisodeLog {
            episode: 0,
            seed: 0,
            steps: steps.clone(),
        };
        let rt = braking_reaction_time(&[log]);
        assert_eq!(rt.events, 1);
        assert!((rt.mean_s - 1.0).abs() < 1e-12);

        steps[15].accel_cmd = 0.0;
        let rt = braking_reaction_time(&[EpisodeLog {
            episode: 0,
            seed: 0,
            steps,
        }]);
        assert_eq!((rt.events, rt.no_brake), (0, 1));
        assert!(rt.mean_s.is_nan());
    }

    #[test]
    fn attribution_counts() {
        let mk = |mode| {
            let mut r = row(1, 5.0, 0.0);
            r.peds[0] = crossing(1.0, mode);
            r.terminal = TERMINAL_COLLISION;
            r.collision_ped = Some(0);
            EpisodeLog {
                episode: 0,
                seed: 0,
                steps: vec![r],
            }
        };
        let logs = [
            mk(CrossingMode::Jaywalk),
            mk(CrossingMode::Crosswalk),
            mk(CrossingMode::Jaywalk),
        ];
        let a = collision_attribution(&logs);
        assert!((a.jaywalk - 2.0 / 3.0).abs() < 1e-15);
        assert!((a.crosswalk - 1.0 / 3.0).abs() < 1e-15);
        let none = collision_attribution(&[]);
        assert!(none.empty);
        assert_eq!((none.jaywalk, none.crosswalk), (0.0, 0.0));
    }

    #[test]
    fn encounters_split_on_gaps() {
        let mut steps: Vec<StepRecord> = (1..=6).map(|t| row(t, 3.0, 0.0)).collect();
        for (t, x) in [(0, 5.0), (1, 4.0), (3, 7.0), (4, 6.5)] {
            steps[t].peds[0] = crossing(x, CrossingMode::Crosswalk);
        }
        let s = EpisodeStats::from_logs(&[EpisodeLog {
            episode: 0,
            seed: 0,
            steps,
        }]);
        // Row 2 is a non-crossing row, so two crossings start.
        assert_eq!(s.encounter_minima[CW], vec![4.0, 6.5]);
        assert_eq!(s.crossings[2][CW], 2);
    }
}
