//! Per-step episode logs and their CSV form.
//!
//! One row per environment step, written after the transition. Floats are
//! printed in shortest round-trip form, so reading a CSV back yields the
//! exact values that were logged and every metric recomputes bit-identically.

use crate::env::{CrossingMode, EpisodeState, Terminal, NUM_PEDS};
use crate::map::MapGeometry;
use crate::{Error, Result};
use std::io::{Read, Write};

/// Version tag written in the first comment line of a log file.
pub const LOG_SCHEMA: &str = "intersim-log-v1";

pub const TERMINAL_NONE: u8 = 0;
pub const TERMINAL_COLLISION: u8 = 1;
pub const TERMINAL_GOAL: u8 = 2;
pub const TERMINAL_TIMEOUT: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PedRecord {
    pub x: f64,
    pub y: f64,
    pub mode: CrossingMode,
    /// Trait quartile 0..=3.
    pub quartile: u8,
    /// On the road or a crosswalk (not the sidewalk).
    pub on_road: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u32,
    pub sdc_x: f64,
    pub sdc_y: f64,
    pub heading: f64,
    pub speed: f64,
    pub steering: f64,
    /// Applied (clamped) command of this step.
    pub accel_cmd: f64,
    pub steer_cmd: f64,
    pub goal_dist: f64,
    pub terminal: u8,
    /// Index of the pedestrian hit on a collision step.
    pub collision_ped: Option<usize>,
    pub peds: [PedRecord; NUM_PEDS],
}

impl StepRecord {
    pub fn from_state(map: &MapGeometry, s: &EpisodeState) -> Self {
        let (terminal, collision_ped) = match &s.terminal {
            None => (TERMINAL_NONE, None),
            Some(Terminal::Collision(c)) => (TERMINAL_COLLISION, Some(c.pedestrian)),
            Some(Terminal::Goal) => (TERMINAL_GOAL, None),
            Some(Terminal::Timeout) => (TERMINAL_TIMEOUT, None),
        };
        let v = &s.vehicle;
        Self {
            step: s.step,
            sdc_x: v.position.x,
            sdc_y: v.position.y,
            heading: v.heading,
            speed: v.speed,
            steering: v.steering,
            accel_cmd: s.last_action.accel,
            steer_cmd: s.last_action.steer,
            goal_dist: v.position.distance(v.goal),
            terminal,
            collision_ped,
            peds: std::array::from_fn(|j| {
                let p = &s.peds[j];
                PedRecord {
                    x: p.position.x,
                    y: p.position.y,
                    mode: p.crossing_mode,
                    quartile: p.tendency_quartile(),
                    on_road: map.on_carriageway(p.position),
                }
            }),
        }
    }

    pub fn ped_distance(&self, j: usize) -> f64 {
        (self.peds[j].x - self.sdc_x).hypot(self.peds[j].y - self.sdc_y)
    }

    /// Distance to and crossing mode of the nearest pedestrian (lowest index
    /// on ties).
    pub fn nearest_ped(&self) -> (f64, CrossingMode) {
        let mut best = (f64::INFINITY, CrossingMode::NotCrossing);
        for j in 0..NUM_PEDS {
            let d = self.ped_distance(j);
            if d < best.0 {
                best = (d, self.peds[j].mode);
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
}

impl EpisodeLog {
    pub fn terminal(&self) -> u8 {
        self.steps.last().map_or(TERMINAL_NONE, |r| r.terminal)
    }
}

pub fn header() -> Vec<String> {
    let mut h: Vec<String> = [
        "episode",
        "seed",
        "step",
        "sdc_x",
        "sdc_y",
        "heading",
        "speed",
        "steering",
        "accel_cmd",
        "steer_cmd",
        "goal_dist",
        "terminal",
        "collision_ped",
        "nearest_ped_dist",
        "nearest_ped_mode",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for j in 0..NUM_PEDS {
        for f in ["x", "y", "mode", "q", "road"] {
            h.push(format!("p{j}_{f}"));
        }
    }
    h
}

const FIXED_COLUMNS: usize = 15;
const PED_COLUMNS: usize = 5;

/// Writes logs as CSV, preceded by a `#` line carrying the schema tag and
/// the run identity.
pub fn write_csv<W: Write>(mut out: W, logs: &[EpisodeLog], identity: &str) -> Result<()> {
    writeln!(out, "# {LOG_SCHEMA} {identity}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    let mut row: Vec<String> = Vec::with_capacity(FIXED_COLUMNS + PED_COLUMNS * NUM_PEDS);
    for log in logs {
        for r in &log.steps {
            row.clear();
            row.push(log.episode.to_string());
            row.push(log.seed.to_string());
            row.push(r.step.to_string());
            for v in [
                r.sdc_x,
                r.sdc_y,
                r.heading,
                r.speed,
                r.steering,
                r.accel_cmd,
                r.steer_cmd,
                r.goal_dist,
            ] {
                row.push(v.to_string());
            }
            row.push(r.terminal.to_string());
            row.push(r.collision_ped.map_or("-1".to_string(), |c| c.to_string()));
            let (nd, nm) = r.nearest_ped();
            row.push(nd.to_string());
            row.push(nm.code().to_string());
            for p in &r.peds {
                row.push(p.x.to_string());
                row.push(p.y.to_string());
                row.push(p.mode.code().to_string());
                row.push(p.quartile.to_string());
                row.push(u8::from(p.on_road).to_string());
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T> {
    let s = rec.get(i).unwrap_or("");
    s.parse()
        .map_err(|_| Error::Log(format!("line {line}: bad value {s:?} in column {i}")))
}

/// Reads logs written by [`write_csv`]. Consecutive rows with the same
/// episode index form one episode. The nearest-pedestrian columns are
/// derived data and are not read back.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<EpisodeLog>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(input);
    let expected = header();
    let got = rdr.headers()?.clone();
    if got.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Log("unexpected log header".into()));
    }
    let mut logs: Vec<EpisodeLog> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let episode: usize = field(&rec, 0, line)?;
        let seed: u64 = field(&rec, 1, line)?;
        let collision: i64 = field(&rec, 12, line)?;
        let peds = (0..NUM_PEDS)
            .map(|j| -> Result<PedRecord> {
                let b = FIXED_COLUMNS + PED_COLUMNS * j;
                let code: u8 = field(&rec, b + 2, line)?;
                let road: u8 = field(&rec, b + 4, line)?;
                Ok(PedRecord {
                    x: field(&rec, b, line)?,
                    y: field(&rec, b + 1, line)?,
                    mode: CrossingMode::from_code(code).ok_or_else(|| {
                        Error::Log(format!("line {line}: bad crossing mode {code}"))
                    })?,
                    quartile: field(&rec, b + 3, line)?,
                    on_road: road != 0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let r = StepRecord {
            step: field(&rec, 2, line)?,
            sdc_x: field(&rec, 3, line)?,
            sdc_y: field(&rec, 4, line)?,
            heading: field(&rec, 5, line)?,
            speed: field(&rec, 6, line)?,
            steering: field(&rec, 7, line)?,
            accel_cmd: field(&rec, 8, line)?,
            steer_cmd: field(&rec, 9, line)?,
            goal_dist: field(&rec, 10, line)?,
            terminal: field(&rec, 11, line)?,
            collision_ped: usize::try_from(collision).ok(),
            peds: peds.try_into().expect("twelve pedestrian records"),
        };
        match logs.last_mut() {
            Some(l) if l.episode == episode => l.steps.push(r),
            _ => logs.push(EpisodeLog {
                episode,
                seed,
                steps: vec![r],
            }),
        }
    }
    Ok(logs)
}
