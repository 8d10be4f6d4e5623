//! Evaluation harness and trajectory metrics.

mod eval;
pub mod log;
mod uncertainty;

pub use eval::{
    ablation_rows, ablation_sweep, default_seeds, evaluate, read_seeds, run_episode, seed_set_hash,
    write_ablation_csv, write_seeds, AblationRow, Evaluation, MetricsReport, PedPolicy, SdcPolicy,
    DEFAULT_SEED_BASE, REPORT_SCHEMA,
};
pub use log::{EpisodeLog, PedRecord, StepRecord};
pub use uncertainty::{
    approach_distance_p5, braking_reaction_time, collision_attribution, encounter_type, percentile,
    quartile_jaywalk_rates, speed_differential, ApproachP5, Attribution, EpisodeStats,
    ReactionTime, SpeedBin, BRAKE_STEPS, BRAKE_THRESHOLD, CW, DISTANCE_BINS, ENCOUNTER_RANGE, JW,
    P5_MIN_ENCOUNTERS, REACTION_RANGE,
};
