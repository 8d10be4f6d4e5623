//! Vectorized environments with auto-reset and rollout collection.

use crate::env::{
    Environment, EpisodeState, Observations, Terminal, GLOBAL_STATE_DIM, NUM_PEDS, PED_OBS_DIM,
    SDC_OBS_DIM,
};
use crate::nets::{decision_of, to_vehicle_action, Categorical, Policies, GO};
use crate::physics::PedDecision;
use crate::Result;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// How pedestrian actions are produced during collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PedControl {
    Learned,
    AlwaysGo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Collision,
    Goal,
    Timeout,
}

impl Outcome {
    pub fn of(t: &Terminal) -> Self {
        match t {
            Terminal::Collision(_) => Outcome::Collision,
            Terminal::Goal => Outcome::Goal,
            Terminal::Timeout => Outcome::Timeout,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub length: u32,
    pub sdc_return: f64,
    pub outcome: Outcome,
}

/// Per-step data over `(steps, envs)`, row-major with the step index
/// outermost. Pedestrian arrays carry an extra innermost axis of 12 agents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBatch {
    pub steps: usize,
    pub envs: usize,
    pub ped_obs: Vec<f64>,
    pub ped_actions: Vec<usize>,
    pub ped_logp: Vec<f64>,
    pub ped_rewards: Vec<f64>,
    pub sdc_obs: Vec<f64>,
    /// Unclamped normalized actions, as sampled.
    pub sdc_u: Vec<[f64; 2]>,
    pub sdc_logp: Vec<f64>,
    pub sdc_rewards: Vec<f64>,
    pub global: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Critic value of each environment's state after the last step.
    pub bootstrap: Vec<f64>,
}

impl RolloutBatch {
    fn with_capacity(steps: usize, envs: usize) -> Self {
        let n = steps * envs;
        Self {
            steps,
            envs,
            ped_obs: Vec::with_capacity(n * NUM_PEDS * PED_OBS_DIM),
            ped_actions: Vec::with_capacity(n * NUM_PEDS),
            ped_logp: Vec::with_capacity(n * NUM_PEDS),
            ped_rewards: Vec::with_capacity(n * NUM_PEDS),
            sdc_obs: Vec::with_capacity(n * SDC_OBS_DIM),
            sdc_u: Vec::with_capacity(n),
            sdc_logp: Vec::with_capacity(n),
            sdc_rewards: Vec::with_capacity(n),
            global: Vec::with_capacity(n * GLOBAL_STATE_DIM),
            values: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            bootstrap: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps * self.envs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct Slot {
    state: EpisodeState,
    obs: Observations,
    action_rng: ChaCha8Rng,
    sdc_return: f64,
}

/// A fixed set of environments stepped in lockstep. Finished episodes are
/// replaced by fresh ones whose seeds come from the run's seed stream.
pub struct VecEnv<'a> {
    env: &'a Environment,
    slots: Vec<Slot>,
    seed_stream: ChaCha8Rng,
    multiplier: f64,
}

struct StepOut {
    ped_actions: [usize; NUM_PEDS],
    ped_logp: [f64; NUM_PEDS],
    ped_rewards: Vec<f64>,
    sdc_u: [f64; 2],
    sdc_logp: f64,
    sdc_reward: f64,
    finished: Option<EpisodeSummary>,
}

impl<'a> VecEnv<'a> {
    pub fn new(env: &'a Environment, n_envs: usize, seed: u64, multiplier: f64) -> Result<Self> {
        let mut seed_stream = ChaCha8Rng::seed_from_u64(seed);
        seed_stream.set_stream(1);
        let mut slots = Vec::with_capacity(n_envs);
        for i in 0..n_envs {
            let ep_seed = seed_stream.next_u64();
            let (state, obs) = env.reset(ep_seed, multiplier)?;
            let mut action_rng = ChaCha8Rng::seed_from_u64(seed);
            action_rng.set_stream(2 + i as u64);
            slots.push(Slot {
                state,
                obs,
                action_rng,
                sdc_return: 0.0,
            });
        }
        Ok(Self {
            env,
            slots,
            seed_stream,
            multiplier,
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    fn critic_values(&self, policies: &Policies) -> Result<Vec<f64>> {
        let mut g = Vec::with_capacity(self.len() * GLOBAL_STATE_DIM);
        for s in &self.slots {
            g.extend_from_slice(&s.obs.global);
        }
        Ok(policies.critic.forward_batch(&g, self.len())?.acts[3].clone())
    }

    /// Steps every environment `steps` times under the current policies.
    pub fn collect(
        &mut self,
        policies: &Policies,
        steps: usize,
        peds: PedControl,
        greedy: bool,
    ) -> Result<(RolloutBatch, Vec<EpisodeSummary>)> {
        let n = self.len();
        let mut batch = RolloutBatch::with_capacity(steps, n);
        let mut finished = Vec::new();
        let env = self.env;
        for _ in 0..steps {
            let mut ped_in = Vec::with_capacity(n * NUM_PEDS * PED_OBS_DIM);
            let mut sdc_in = Vec::with_capacity(n * SDC_OBS_DIM);
            for s in &self.slots {
                for o in &s.obs.peds {
                    ped_in.extend_from_slice(o);
                }
                sdc_in.extend_from_slice(&s.obs.sdc);
                batch.global.extend_from_slice(&s.obs.global);
            }
            let ped_logits = match peds {
                PedControl::Learned => {
                    policies.ped.forward_batch(&ped_in, n * NUM_PEDS)?.acts[3].clone()
                }
                PedControl::AlwaysGo => Vec::new(),
            };
            let sdc_mean = policies.sdc.forward_batch(&sdc_in, n)?.acts[3].clone();
            batch.values.extend(self.critic_values(policies)?);
            batch.ped_obs.extend_from_slice(&ped_in);
            batch.sdc_obs.extend_from_slice(&sdc_in);

            let outs: Vec<StepOut> = self
                .slots
                .par_iter_mut()
                .enumerate()
                .map(|(e, slot)| -> Result<StepOut> {
                    let mut ped_actions = [GO; NUM_PEDS];
                    let mut ped_logp = [0.0; NUM_PEDS];
                    if peds == PedControl::Learned {
                        for j in 0..NUM_PEDS {
                            let k = e * NUM_PEDS + j;
                            let dist = Categorical::from_logits(&ped_logits[2 * k..2 * k + 2]);
                            let a = if greedy {
                                dist.mode()
                            } else {
                                dist.sample(&mut slot.action_rng)
                            };
                            ped_actions[j] = a;
                            ped_logp[j] = dist.log_prob(a);
                        }
                    }
                    let dist = policies.sdc_dist(&sdc_mean[2 * e..2 * e + 2]);
                    let u = if greedy {
                        dist.mean
                    } else {
                        dist.sample(&mut slot.action_rng)
                    };
                    let sdc_logp = dist.log_prob(&u);
                    let decisions: Vec<PedDecision> =
                        ped_actions.iter().map(|&a| decision_of(a)).collect();
                    let t = env.step(&slot.state, &decisions, to_vehicle_action(&u))?;
                    slot.sdc_return += t.rewards.sdc;
                    let finished = t.state.terminal.as_ref().map(|term| EpisodeSummary {
                        seed: t.state.seed,
                        length: t.state.step,
                        sdc_return: slot.sdc_return,
                        outcome: Outcome::of(term),
                    });
                    slot.state = t.state;
                    slot.obs = t.observations;
                    Ok(StepOut {
                        ped_actions,
                        ped_logp,
                        ped_rewards: t.rewards.peds,
                        sdc_u: u,
                        sdc_logp,
                        sdc_reward: t.rewards.sdc,
                        finished,
                    })
                })
                .collect::<Result<Vec<_>>>()?;

            for (slot, out) in self.slots.iter_mut().zip(outs) {
                batch.ped_actions.extend_from_slice(&out.ped_actions);
                batch.ped_logp.extend_from_slice(&out.ped_logp);
                batch.ped_rewards.extend_from_slice(&out.ped_rewards);
                batch.sdc_u.push(out.sdc_u);
                batch.sdc_logp.push(out.sdc_logp);
                batch.sdc_rewards.push(out.sdc_reward);
                batch.dones.push(out.finished.is_some());
                if let Some(summary) = out.finished {
                    finished.push(summary);
                    let seed = self.seed_stream.next_u64();
                    let (state, obs) = env.reset(seed, self.multiplier)?;
                    slot.state = state;
                    slot.obs = obs;
                    slot.sdc_return = 0.0;
                }
            }
        }
        batch.bootstrap = self.critic_values(policies)?;
        Ok((batch, finished))
    }
}
