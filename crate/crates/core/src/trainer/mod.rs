//! Centralized-critic PPO: rollouts over parallel environments, GAE on
//! per-role and blended rewards, clipped updates with Adam.

mod adam;
mod gae;
mod ppo;
mod rollout;
mod train;

pub use adam::{clip_grad_norm, global_norm, Adam, BETA1, BETA2, EPS};
pub use gae::{blended_reward, compute_gae, compute_gae_batch, normalize};
pub use ppo::{
    critic_loss, ped_actor_loss, sdc_actor_loss, surrogate, ActorStats, Minibatch, PpoCoefs,
    CHUNK_ROWS,
};
pub use rollout::{EpisodeSummary, Outcome, PedControl, RolloutBatch, VecEnv};
pub use train::{
    checkpoint_name, compute_targets, gather, ppo_step, train, Optimizers, Targets, TrainOutcome,
    Trainer, UpdateMetrics, CONFIG_FILE, FINAL_CHECKPOINT, LAST_GOOD_CHECKPOINT, METRICS_FILE,
    METRIC_COLUMNS,
};
