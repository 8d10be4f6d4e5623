//! Fixed-seed evaluation and the multiplier ablation.

use super::log::{EpisodeLog, StepRecord};
use super::uncertainty::{
    approach_distance_p5_from, braking_reaction_time_from, collision_attribution_from,
    quartile_jaywalk_rates_from, speed_differential_from, ApproachP5, Attribution, EpisodeStats,
    ReactionTime, SpeedBin, DISTANCE_BINS,
};
use crate::baselines::BaselineKind;
use crate::env::{Environment, Observations, NUM_PEDS, PED_OBS_DIM};
use crate::nets::{decision_of, to_vehicle_action, Categorical, Policies};
use crate::physics::PedDecision;
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

pub const REPORT_SCHEMA: &str = "intersim-report-v1";
/// First seed of the default evaluation seed set.
pub const DEFAULT_SEED_BASE: u64 = 1_000_000;
/// RNG stream used by the random baseline inside an episode.
const BASELINE_STREAM: u64 = 7;

/// Vehicle controller under evaluation. Learned policies act on the
/// clamped distribution mean.
#[derive(Debug, Clone, Copy)]
pub enum SdcPolicy<'a> {
    Learned(&'a Policies),
    Baseline(BaselineKind),
}

/// Pedestrian controller under evaluation. Learned policies take the most
/// probable action.
#[derive(Debug, Clone, Copy)]
pub enum PedPolicy<'a> {
    Learned(&'a Policies),
    AlwaysGo,
}

impl SdcPolicy<'_> {
    pub fn name(&self) -> String {
        match self {
            SdcPolicy::Learned(_) => "marl".into(),
            SdcPolicy::Baseline(k) => k.name().into(),
        }
    }
}

impl PedPolicy<'_> {
    pub fn name(&self) -> String {
        match self {
            PedPolicy::Learned(_) => "marl".into(),
            PedPolicy::AlwaysGo => "always-go".into(),
        }
    }
}

pub fn default_seeds(n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| DEFAULT_SEED_BASE + i).collect()
}

/// Reads a newline-delimited seed file; blank lines and `#` comments are
/// skipped.
pub fn read_seeds(path: &Path) -> Result<Vec<u64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            l.parse().map_err(|_| {
                Error::Usage(format!("{}:{}: not a seed: {l:?}", path.display(), i + 1))
            })
        })
        .collect()
}

pub fn write_seeds(path: &Path, seeds: &[u64]) -> Result<()> {
    let mut out = String::with_capacity(seeds.len() * 8);
    for s in seeds {
        out.push_str(&s.to_string());
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn seed_set_hash(seeds: &[u64]) -> String {
    let mut h = Sha256::new();
    for s in seeds {
        h.update(s.to_string().as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub schema: &'static str,
    pub sdc_policy: String,
    pub ped_policy: String,
    pub multiplier: f64,
    pub episodes: usize,
    pub goal_rate: f64,
    pub collision_rate: f64,
    pub timeout_rate: f64,
    pub speed_bins: Vec<SpeedBin>,
    pub attribution: Attribution,
    pub approach_p5: ApproachP5,
    pub reaction: ReactionTime,
    pub quartile_jaywalk_rates: [f64; 4],
    /// Crossing starts per quartile (crosswalk + jaywalk).
    pub quartile_crossings: [usize; 4],
    pub seed_set_hash: String,
}

impl MetricsReport {
    pub fn from_stats(
        stats: &EpisodeStats,
        sdc: &str,
        peds: &str,
        multiplier: f64,
        seeds: &[u64],
    ) -> Self {
        let n = stats.episodes as f64;
        let rate = |k: usize| {
            if stats.episodes == 0 {
                f64::NAN
            } else {
                k as f64 / n
            }
        };
        Self {
            schema: REPORT_SCHEMA,
            sdc_policy: sdc.to_string(),
            ped_policy: peds.to_string(),
            multiplier,
            episodes: stats.episodes,
            goal_rate: rate(stats.goals),
            collision_rate: rate(stats.collisions),
            timeout_rate: rate(stats.timeouts),
            speed_bins: speed_differential_from(stats, &DISTANCE_BINS),
            attribution: collision_attribution_from(stats),
            approach_p5: approach_distance_p5_from(stats),
            reaction: braking_reaction_time_from(stats),
            quartile_jaywalk_rates: quartile_jaywalk_rates_from(stats),
            quartile_crossings: stats.crossings.map(|[cw, jw]| cw + jw),
            seed_set_hash: seed_set_hash(seeds),
        }
    }

    /// JSON with NaN fields written as `null`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Per-bin speed table: `lo,hi,n_crosswalk,n_jaywalk,mean_crosswalk,mean_jaywalk,delta_v`.
    pub fn write_speed_table<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "lo",
            "hi",
            "n_crosswalk",
            "n_jaywalk",
            "mean_crosswalk",
            "mean_jaywalk",
            "delta_v",
        ])?;
        for b in &self.speed_bins {
            w.write_record([
                b.lo.to_string(),
                b.hi.to_string(),
                b.n_crosswalk.to_string(),
                b.n_jaywalk.to_string(),
                b.mean_crosswalk.to_string(),
                b.mean_jaywalk.to_string(),
                b.delta_v.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub stats: EpisodeStats,
    /// Per-episode logs in seed order, when requested.
    pub logs: Vec<EpisodeLog>,
}

/// Runs one episode to termination and returns its log.
pub fn run_episode(
    env: &Environment,
    sdc: SdcPolicy<'_>,
    peds: PedPolicy<'_>,
    episode: usize,
    seed: u64,
    multiplier: f64,
) -> Result<EpisodeLog> {
    let (mut state, mut obs) = env.reset(seed, multiplier)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(BASELINE_STREAM);
    let mut steps = Vec::new();
    let mut ped_in = vec![0.0; NUM_PEDS * PED_OBS_DIM];
    while !state.is_terminal() {
        let decisions: Vec<PedDecision> = match peds {
            PedPolicy::AlwaysGo => vec![PedDecision::Go; NUM_PEDS],
            PedPolicy::Learned(p) => {
                for (dst, o) in ped_in.chunks_exact_mut(PED_OBS_DIM).zip(&obs.peds) {
                    dst.copy_from_slice(o);
                }
                let cache = p.ped.forward_batch(&ped_in, NUM_PEDS)?;
                cache
                    .output()
                    .chunks_exact(2)
                    .map(|l| decision_of(Categorical::from_logits(l).mode()))
                    .collect()
            }
        };
        let action = match sdc {
            SdcPolicy::Learned(p) => {
                let cache = p.sdc.forward_batch(&obs.sdc, 1)?;
                let out = cache.output();
                to_vehicle_action(&[out[0], out[1]])
            }
            SdcPolicy::Baseline(k) => k.act(&obs.sdc, &mut rng),
        };
        env.step_in_place(&mut state, &decisions, action)?;
        obs = Observations::build(env, &state);
        steps.push(StepRecord::from_state(&env.map, &state));
    }
    Ok(EpisodeLog {
        episode,
        seed,
        steps,
    })
}

/// Evaluates a policy pair on `seeds` (one episode each) in parallel. The
/// result does not depend on the number of worker threads.
pub fn evaluate(
    env: &Environment,
    sdc: SdcPolicy<'_>,
    peds: PedPolicy<'_>,
    seeds: &[u64],
    multiplier: f64,
    keep_logs: bool,
) -> Result<Evaluation> {
    let per: Vec<(EpisodeStats, Option<EpisodeLog>)> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let log = run_episode(env, sdc, peds, i, seed, multiplier)?;
            let stats = EpisodeStats::from_log(&log);
            Ok((stats, keep_logs.then_some(log)))
        })
        .collect::<Result<_>>()?;
    let mut stats = EpisodeStats::default();
    let mut logs = Vec::new();
    for (s, l) in per {
        stats.merge(&s);
        logs.extend(l);
    }
    let report = MetricsReport::from_stats(&stats, &sdc.name(), &peds.name(), multiplier, seeds);
    Ok(Evaluation {
        report,
        stats,
        logs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub multiplier: f64,
    pub goal_rate: f64,
    pub collision_rate: f64,
    pub timeout_rate: f64,
    pub jaywalk_crossing_fraction: f64,
    pub crossings: usize,
}

/// Evaluates the same policy pair and seed set under each multiplier.
pub fn ablation_sweep(
    env: &Environment,
    sdc: SdcPolicy<'_>,
    peds: PedPolicy<'_>,
    multipliers: &[f64],
    seeds: &[u64],
) -> Result<Vec<MetricsReport>> {
    multipliers
        .iter()
        .map(|&m| Ok(evaluate(env, sdc, peds, seeds, m, false)?.report))
        .collect()
}

pub fn ablation_rows(reports: &[MetricsReport]) -> Vec<AblationRow> {
    reports
        .iter()
        .map(|r| AblationRow {
            multiplier: r.multiplier,
            goal_rate: r.goal_rate,
            collision_rate: r.collision_rate,
            timeout_rate: r.timeout_rate,
            jaywalk_crossing_fraction: r.attribution.jaywalk_crossing_fraction,
            crossings: r.attribution.crossings,
        })
        .collect()
}

/// Ablation table as CSV with columns
/// `multiplier,goal_rate,collision_rate,timeout_rate,jaywalk_crossing_fraction,crossings`.
pub fn write_ablation_csv<W: Write>(out: W, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
