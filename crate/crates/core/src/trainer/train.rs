//! The training loop: collect, estimate advantages, run PPO epochs, and
//! persist checkpoints and per-update metrics.

use super::adam::{clip_grad_norm, Adam};
use super::gae::{blended_reward, compute_gae_batch, normalize};
use super::ppo::{critic_loss, ped_actor_loss, sdc_actor_loss, ActorStats, Minibatch, PpoCoefs};
use super::rollout::{EpisodeSummary, Outcome, PedControl, RolloutBatch, VecEnv};
use crate::config::{TrainConfig, TrainMode};
use crate::env::{Environment, GLOBAL_STATE_DIM, NUM_PEDS, PED_OBS_DIM, SDC_OBS_DIM};
use crate::map::MAP_VERSION;
use crate::nets::checkpoint::{self, CheckpointMeta, FORMAT_VERSION};
use crate::nets::{clamp_log_std, Policies};
use crate::Result;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Scalar summary of one update.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct UpdateMetrics {
    pub update: usize,
    pub ped_policy_loss: f64,
    pub sdc_policy_loss: f64,
    pub value_loss: f64,
    pub ped_entropy: f64,
    pub sdc_entropy: f64,
    pub ped_clip_frac: f64,
    pub sdc_clip_frac: f64,
    pub ped_approx_kl: f64,
    pub sdc_approx_kl: f64,
    pub episodes: usize,
    pub mean_sdc_return: f64,
    pub goals_per_1k: f64,
    pub collisions_per_1k: f64,
    pub steps_per_sec: f64,
}

/// Advantages and critic targets for one rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    /// `(steps * envs * 12)`, aligned with `RolloutBatch::ped_actions`.
    pub ped_adv: Vec<f64>,
    pub sdc_adv: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Critic targets come from the blended reward (the vehicle reward alone in
/// single-agent mode); each actor's advantages come from its own reward
/// stream against the shared critic's values. Advantages are normalized per
/// role.
pub fn compute_targets(b: &RolloutBatch, cfg: &TrainConfig) -> Targets {
    let n = b.len();
    let critic_rewards: Vec<f64> = match cfg.mode {
        TrainMode::CoTrain => (0..n)
            .map(|i| {
                blended_reward(
                    &b.ped_rewards[i * NUM_PEDS..(i + 1) * NUM_PEDS],
                    b.sdc_rewards[i],
                )
            })
            .collect(),
        TrainMode::SingleAgent => b.sdc_rewards.clone(),
    };
    let gae = |r: &[f64]| {
        compute_gae_batch(
            r,
            &b.values,
            &b.dones,
            &b.bootstrap,
            b.envs,
            cfg.gamma,
            cfg.gae_lambda,
        )
    };
    let (_, returns) = gae(&critic_rewards);
    let (mut sdc_adv, _) = gae(&b.sdc_rewards);
    normalize(&mut sdc_adv);
    let mut ped_adv = vec![0.0; n * NUM_PEDS];
    if cfg.mode == TrainMode::CoTrain {
        for j in 0..NUM_PEDS {
            let r: Vec<f64> = (0..n).map(|i| b.ped_rewards[i * NUM_PEDS + j]).collect();
            let (a, _) = gae(&r);
            for i in 0..n {
                ped_adv[i * NUM_PEDS + j] = a[i];
            }
        }
        normalize(&mut ped_adv);
    }
    Targets {
        ped_adv,
        sdc_adv,
        returns,
    }
}

/// Gathers the samples of environment-steps `idx` into a minibatch. All 12
/// pedestrians of a step go into the shared pedestrian pool.
pub fn gather(b: &RolloutBatch, t: &Targets, idx: &[usize], with_peds: bool) -> Minibatch {
    let mut mb = Minibatch::default();
    for &i in idx {
        if with_peds {
            mb.ped_obs.extend_from_slice(
                &b.ped_obs[i * NUM_PEDS * PED_OBS_DIM..(i + 1) * NUM_PEDS * PED_OBS_DIM],
            );
            mb.ped_actions
                .extend_from_slice(&b.ped_actions[i * NUM_PEDS..(i + 1) * NUM_PEDS]);
            mb.ped_old_logp
                .extend_from_slice(&b.ped_logp[i * NUM_PEDS..(i + 1) * NUM_PEDS]);
            mb.ped_adv
                .extend_from_slice(&t.ped_adv[i * NUM_PEDS..(i + 1) * NUM_PEDS]);
        }
        mb.sdc_obs
            .extend_from_slice(&b.sdc_obs[i * SDC_OBS_DIM..(i + 1) * SDC_OBS_DIM]);
        mb.sdc_u.push(b.sdc_u[i]);
        mb.sdc_old_logp.push(b.sdc_logp[i]);
        mb.sdc_adv.push(t.sdc_adv[i]);
        mb.global
            .extend_from_slice(&b.global[i * GLOBAL_STATE_DIM..(i + 1) * GLOBAL_STATE_DIM]);
        mb.returns.push(t.returns[i]);
    }
    mb
}

/// Optimizer state for the three networks.
#[derive(Debug, Clone)]
pub struct Optimizers {
    pub ped: Adam,
    /// Vehicle actor weights followed by the two log-std entries.
    pub sdc: Adam,
    pub critic: Adam,
}

impl Optimizers {
    pub fn new(p: &Policies) -> Self {
        Self {
            ped: Adam::new(p.ped.len()),
            sdc: Adam::new(p.sdc.len() + 2),
            critic: Adam::new(p.critic.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct EpochStats {
    ped: ActorStats,
    sdc: ActorStats,
    value: f64,
}

/// One gradient step per network on a minibatch.
pub fn ppo_step(
    p: &mut Policies,
    opt: &mut Optimizers,
    mb: &Minibatch,
    cfg: &TrainConfig,
) -> Result<(ActorStats, ActorStats, f64)> {
    let coefs = PpoCoefs {
        clip_eps: cfg.clip_eps,
        ent_coef_ped: cfg.ent_coef_ped,
        ent_coef_sdc: cfg.ent_coef_sdc,
        value_coef: cfg.value_coef,
    };
    let mut ped_stats = ActorStats::default();
    if cfg.mode == TrainMode::CoTrain {
        let mut g = vec![0.0; p.ped.len()];
        ped_stats = ped_actor_loss(&p.ped, mb, &coefs, &mut g)?;
        clip_grad_norm(&mut [&mut g[..]], cfg.max_grad_norm);
        opt.ped.step(&mut p.ped.params, &g, cfg.lr);
    }

    let mut g = vec![0.0; p.sdc.len() + 2];
    let mut gs = [0.0; 2];
    let (gw, _) = g.split_at_mut(p.sdc.len());
    let sdc_stats = sdc_actor_loss(&p.sdc, &p.sdc_log_std, mb, &coefs, gw, &mut gs)?;
    let n = p.sdc.len();
    g[n..].copy_from_slice(&gs);
    clip_grad_norm(&mut [&mut g[..]], cfg.max_grad_norm);
    let mut flat = std::mem::take(&mut p.sdc.params);
    flat.extend_from_slice(&p.sdc_log_std);
    opt.sdc.step(&mut flat, &g, cfg.lr);
    p.sdc_log_std = [clamp_log_std(flat[n]), clamp_log_std(flat[n + 1])];
    flat.truncate(n);
    p.sdc.params = flat;

    let mut g = vec![0.0; p.critic.len()];
    let value = critic_loss(&p.critic, mb, &coefs, &mut g)?;
    clip_grad_norm(&mut [&mut g[..]], cfg.max_grad_norm);
    opt.critic.step(&mut p.critic.params, &g, cfg.lr);
    Ok((ped_stats, sdc_stats, value))
}

/// What a training run produced.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policies: Policies,
    pub metrics: Vec<UpdateMetrics>,
    pub checkpoints: Vec<PathBuf>,
}

pub struct Trainer<'a> {
    pub cfg: TrainConfig,
    pub policies: Policies,
    pub opt: Optimizers,
    envs: VecEnv<'a>,
    shuffle_rng: ChaCha8Rng,
    update: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(env: &'a Environment, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let policies = Policies::init(cfg.seed);
        let opt = Optimizers::new(&policies);
        let envs = VecEnv::new(env, cfg.n_envs, cfg.seed, cfg.jaywalk_multiplier)?;
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        shuffle_rng.set_stream(u64::MAX);
        Ok(Self {
            cfg,
            policies,
            opt,
            envs,
            shuffle_rng,
            update: 0,
        })
    }

    pub fn updates_done(&self) -> usize {
        self.update
    }

    fn ped_control(&self) -> PedControl {
        match self.cfg.mode {
            TrainMode::CoTrain => PedControl::Learned,
            TrainMode::SingleAgent => PedControl::AlwaysGo,
        }
    }

    /// Runs one collect + optimize cycle.
    pub fn step(&mut self) -> Result<UpdateMetrics> {
        let start = Instant::now();
        let cfg = self.cfg.clone();
        let (batch, episodes) =
            self.envs
                .collect(&self.policies, cfg.rollout_len, self.ped_control(), false)?;
        let targets = compute_targets(&batch, &cfg);
        let n = batch.len();
        let mb_size = n.div_ceil(cfg.minibatches);
        let with_peds = cfg.mode == TrainMode::CoTrain;
        let mut sum = EpochStats::default();
        let mut count = 0.0;
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..cfg.ppo_epochs {
            order.shuffle(&mut self.shuffle_rng);
            for idx in order.chunks(mb_size) {
                let mb = gather(&batch, &targets, idx, with_peds);
                let (ps, ss, v) = ppo_step(&mut self.policies, &mut self.opt, &mb, &cfg)?;
                add(&mut sum.ped, &ps);
                add(&mut sum.sdc, &ss);
                sum.value += v;
                count += 1.0;
            }
        }
        self.update += 1;
        let steps = n as f64;
        Ok(metrics_row(
            self.update,
            &sum,
            count,
            &episodes,
            steps,
            start.elapsed().as_secs_f64(),
        ))
    }

    /// Metadata written next to each checkpoint.
    pub fn meta(&self) -> CheckpointMeta {
        CheckpointMeta {
            format_version: FORMAT_VERSION,
            map_version: MAP_VERSION.to_string(),
            update: self.update as u64,
            seed: self.cfg.seed,
            config_hash: self.cfg.hash(),
            mode: self.cfg.mode.as_str().to_string(),
        }
    }
}

fn add(acc: &mut ActorStats, s: &ActorStats) {
    acc.policy_loss += s.policy_loss;
    acc.entropy += s.entropy;
    acc.clip_frac += s.clip_frac;
    acc.approx_kl += s.approx_kl;
    acc.loss += s.loss;
}

fn metrics_row(
    update: usize,
    sum: &EpochStats,
    count: f64,
    episodes: &[EpisodeSummary],
    steps: f64,
    secs: f64,
) -> UpdateMetrics {
    let c = count.max(1.0);
    let goals = episodes
        .iter()
        .filter(|e| e.outcome == Outcome::Goal)
        .count() as f64;
    let collisions = episodes
        .iter()
        .filter(|e| e.outcome == Outcome::Collision)
        .count() as f64;
    let mean_ret = if episodes.is_empty() {
        f64::NAN
    } else {
        episodes.iter().map(|e| e.sdc_return).sum::<f64>() / episodes.len() as f64
    };
    UpdateMetrics {
        update,
        ped_policy_loss: sum.ped.policy_loss / c,
        sdc_policy_loss: sum.sdc.policy_loss / c,
        value_loss: sum.value / c,
        ped_entropy: sum.ped.entropy / c,
        sdc_entropy: sum.sdc.entropy / c,
        ped_clip_frac: sum.ped.clip_frac / c,
        sdc_clip_frac: sum.sdc.clip_frac / c,
        ped_approx_kl: sum.ped.approx_kl / c,
        sdc_approx_kl: sum.sdc.approx_kl / c,
        episodes: episodes.len(),
        mean_sdc_return: mean_ret,
        goals_per_1k: 1000.0 * goals / steps,
        collisions_per_1k: 1000.0 * collisions / steps,
        steps_per_sec: steps / secs.max(1e-9),
    }
}

pub fn checkpoint_name(update: usize) -> String {
    format!("checkpoint_{update:06}.ckpt")
}

pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const LAST_GOOD_CHECKPOINT: &str = "last_good.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Serialize)]
struct ConfigEcho<'a> {
    config_hash: String,
    map_version: &'a str,
    config: &'a TrainConfig,
}

/// Runs a full training job. With `out_dir`, writes the config echo, the
/// per-update metrics CSV and checkpoints every `checkpoint_every` updates
/// plus a final one. If an update produces a non-finite loss, the last good
/// parameters are saved and the error is returned.
pub fn train(
    env: &Environment,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
    mut progress: impl FnMut(&UpdateMetrics),
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(env, cfg.clone())?;
    let mut metrics = Vec::with_capacity(cfg.updates);
    let mut checkpoints = Vec::new();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let echo = ConfigEcho {
            config_hash: cfg.hash(),
            map_version: MAP_VERSION,
            config: cfg,
        };
        std::fs::write(
            dir.join(CONFIG_FILE),
            serde_json::to_string_pretty(&echo)? + "\n",
        )?;
    }
    let mut writer = out_dir
        .map(|dir| std::fs::File::create(dir.join(METRICS_FILE)).map(std::io::BufWriter::new))
        .transpose()?;
    if let Some(w) = writer.as_mut() {
        writeln!(w, "# config_hash={} seed={}", cfg.hash(), cfg.seed)?;
        writeln!(w, "{}", METRIC_COLUMNS.join(","))?;
    }
    while trainer.updates_done() < cfg.updates {
        let before = trainer.policies.clone();
        let row = match trainer.step() {
            Ok(row) => row,
            Err(e) => {
                if let Some(dir) = out_dir {
                    let path = dir.join(LAST_GOOD_CHECKPOINT);
                    checkpoint::save(&path, &before, &trainer.meta())?;
                }
                return Err(e);
            }
        };
        if let Some(w) = writer.as_mut() {
            writeln!(w, "{}", metric_values(&row))?;
            w.flush()?;
        }
        progress(&row);
        let u = trainer.updates_done();
        if let Some(dir) = out_dir {
            if u % cfg.checkpoint_every == 0 || u == cfg.updates {
                let name = if u == cfg.updates {
                    FINAL_CHECKPOINT.to_string()
                } else {
                    checkpoint_name(u)
                };
                let path = dir.join(name);
                checkpoint::save(&path, &trainer.policies, &trainer.meta())?;
                checkpoints.push(path);
            }
        }
        metrics.push(row);
    }
    Ok(TrainOutcome {
        policies: trainer.policies,
        metrics,
        checkpoints,
    })
}

pub const METRIC_COLUMNS: [&str; 15] = [
    "update",
    "ped_policy_loss",
    "sdc_policy_loss",
    "value_loss",
    "ped_entropy",
    "sdc_entropy",
    "ped_clip_frac",
    "sdc_clip_frac",
    "ped_approx_kl",
    "sdc_approx_kl",
    "episodes",
    "mean_sdc_return",
    "goals_per_1k",
    "collisions_per_1k",
    "steps_per_sec",
];

fn metric_values(m: &UpdateMetrics) -> String {
    [
        m.update.to_string(),
        m.ped_policy_loss.to_string(),
        m.sdc_policy_loss.to_string(),
        m.value_loss.to_string(),
        m.ped_entropy.to_string(),
        m.sdc_entropy.to_string(),
        m.ped_clip_frac.to_string(),
        m.sdc_clip_frac.to_string(),
        m.ped_approx_kl.to_string(),
        m.sdc_approx_kl.to_string(),
        m.episodes.to_string(),
        m.mean_sdc_return.to_string(),
        m.goals_per_1k.to_string(),
        m.collisions_per_1k.to_string(),
        format!("{:.1}", m.steps_per_sec),
    ]
    .join(",")
}
