//! Command-line interface: `train`, `eval`, `baseline`, `ablate`,
//! `selfcheck`.

use crate::baselines::BaselineKind;
use crate::config::{TrainConfig, TrainMode};
use crate::env::{Environment, DEFAULT_JAYWALK_MULTIPLIER};
use crate::metrics::{
    ablation_rows, ablation_sweep, default_seeds, evaluate, log, read_seeds, write_ablation_csv,
    write_seeds, PedPolicy, SdcPolicy,
};
use crate::nets::{checkpoint, Policies};
use crate::{selfcheck, trainer, Error, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "intersim",
    version,
    about = "Intersection co-training simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the vehicle (and, in co-train mode, pedestrian) policies.
    Train(TrainArgs),
    /// Evaluate a vehicle/pedestrian policy pair on a fixed seed set.
    Eval(EvalArgs),
    /// Evaluate a scripted vehicle baseline against always-go pedestrians.
    Baseline(BaselineArgs),
    /// Sweep the jaywalk multiplier for a policy pair.
    Ablate(AblateArgs),
    /// Run the built-in oracle suites.
    Selfcheck,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<TrainMode>,
    /// Reduced-scale preset (32 envs, 64-step rollouts, 300 updates).
    #[arg(long)]
    pub desk: bool,
    /// TOML config; absent keys keep the defaults (or the desk preset).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "runs/train")]
    pub out: PathBuf,
    /// `key=value` override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args, Clone)]
pub struct SeedArgs {
    /// Number of episodes; defaults to the seed-file length, or 500 (100
    /// with --desk).
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Newline-delimited seed file.
    #[arg(long)]
    pub seeds: Option<PathBuf>,
    #[arg(long)]
    pub desk: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint path or baseline name (random, constant, rule, rule-brake).
    #[arg(long)]
    pub sdc: String,
    /// Checkpoint path or `always-go`.
    #[arg(long, default_value = "always-go")]
    pub peds: String,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[arg(long, default_value_t = DEFAULT_JAYWALK_MULTIPLIER)]
    pub multiplier: f64,
    #[arg(long, default_value = "runs/eval")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub name: String,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[arg(long, default_value_t = DEFAULT_JAYWALK_MULTIPLIER)]
    pub multiplier: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub sdc: String,
    #[arg(long, default_value = "always-go")]
    pub peds: String,
    /// Comma-separated jaywalk multipliers.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.26, 0.6, 1.0])]
    pub multipliers: Vec<f64>,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[arg(long, default_value = "runs/ablate")]
    pub out: PathBuf,
}

fn parse_mode(s: &str) -> std::result::Result<TrainMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Train(a) => train(a).map(|_| 0),
        Command::Eval(a) => eval(a).map(|_| 0),
        Command::Baseline(a) => baseline(a).map(|_| 0),
        Command::Ablate(a) => ablate(a).map(|_| 0),
        Command::Selfcheck => selfcheck_cmd(),
    }
}

/// Resolves the train configuration from the preset, config file, mode,
/// seed and `--set` overrides, in that order.
pub fn load_config(a: &TrainArgs) -> Result<TrainConfig> {
    let base = if a.desk {
        TrainConfig::desk()
    } else {
        TrainConfig::default()
    };
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p, base)?,
        None => base,
    };
    if let Some(m) = a.mode {
        cfg.mode = m;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let cfg = cfg.with_overrides(&a.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = load_config(&a)?;
    let env = Environment::new()?;
    eprintln!(
        "training {} for {} updates ({} envs x {} steps), config {}",
        cfg.mode.as_str(),
        cfg.updates,
        cfg.n_envs,
        cfg.rollout_len,
        &cfg.hash()[..12]
    );
    let every = (cfg.updates / 20).max(1);
    let out = trainer::train(&env, &cfg, Some(&a.out), |m| {
        if m.update % every == 0 {
            eprintln!(
                "update {:>5}  return {:>8.2}  goals/1k {:>5.2}  collisions/1k {:>5.2}  {:>6.0} steps/s",
                m.update, m.mean_sdc_return, m.goals_per_1k, m.collisions_per_1k, m.steps_per_sec
            );
        }
    })?;
    for c in &out.checkpoints {
        eprintln!("wrote {}", c.display());
    }
    Ok(())
}

/// The seed set for an evaluation command.
pub fn resolve_seeds(a: &SeedArgs) -> Result<Vec<u64>> {
    match (&a.seeds, a.episodes) {
        (Some(path), n) => {
            let seeds = read_seeds(path)?;
            if let Some(n) = n {
                if n != seeds.len() {
                    return Err(Error::Usage(format!(
                        "--episodes {n} but {} lists {} seeds",
                        path.display(),
                        seeds.len()
                    )));
                }
            }
            Ok(seeds)
        }
        (None, Some(n)) => Ok(default_seeds(n)),
        (None, None) => {
            let n = if a.desk {
                TrainConfig::desk().eval_episodes
            } else {
                TrainConfig::default().eval_episodes
            };
            Ok(default_seeds(n))
        }
    }
}

/// A loaded checkpoint and the identity recorded beside it.
struct Loaded {
    policies: Policies,
    config_hash: String,
    seed: u64,
}

fn load_checkpoint(path: &Path) -> Result<Loaded> {
    if !path.exists() {
        return Err(Error::Checkpoint(format!(
            "{}: no such checkpoint",
            path.display()
        )));
    }
    let policies = checkpoint::load(path)?;
    let (config_hash, seed) = match checkpoint::load_meta(path) {
        Ok(m) => (m.config_hash, m.seed),
        Err(_) => (String::new(), 0),
    };
    Ok(Loaded {
        policies,
        config_hash,
        seed,
    })
}

enum SdcSpec {
    Baseline(BaselineKind),
    Checkpoint(Loaded),
}

fn parse_sdc(s: &str) -> Result<SdcSpec> {
    match BaselineKind::parse(s) {
        Ok(k) => Ok(SdcSpec::Baseline(k)),
        Err(_) => Ok(SdcSpec::Checkpoint(load_checkpoint(Path::new(s))?)),
    }
}

fn parse_peds(s: &str) -> Result<Option<Loaded>> {
    if s == "always-go" {
        Ok(None)
    } else {
        load_checkpoint(Path::new(s)).map(Some)
    }
}

#[derive(Serialize)]
struct RunIdentity {
    config_hash: String,
    train_seed: u64,
}

fn identity(sdc: &SdcSpec, peds: &Option<Loaded>) -> RunIdentity {
    let from = match (sdc, peds) {
        (SdcSpec::Checkpoint(l), _) | (_, Some(l)) => Some(l),
        _ => None,
    };
    RunIdentity {
        config_hash: from.map_or_else(String::new, |l| l.config_hash.clone()),
        train_seed: from.map_or(0, |l| l.seed),
    }
}

#[derive(Serialize)]
struct ReportFile<'a, T: Serialize> {
    #[serde(flatten)]
    run: RunIdentity,
    #[serde(flatten)]
    report: &'a T,
}

#[derive(Serialize)]
struct AblationFile<'a, T: Serialize> {
    #[serde(flatten)]
    run: RunIdentity,
    reports: &'a [T],
}

fn with_policies<R>(
    sdc: &SdcSpec,
    peds: &Option<Loaded>,
    f: impl FnOnce(SdcPolicy<'_>, PedPolicy<'_>) -> Result<R>,
) -> Result<R> {
    let s = match sdc {
        SdcSpec::Baseline(k) => SdcPolicy::Baseline(*k),
        SdcSpec::Checkpoint(l) => SdcPolicy::Learned(&l.policies),
    };
    let p = match peds {
        None => PedPolicy::AlwaysGo,
        Some(l) => PedPolicy::Learned(&l.policies),
    };
    f(s, p)
}

fn run_eval(
    sdc: SdcSpec,
    peds: Option<Loaded>,
    seeds: &[u64],
    multiplier: f64,
    out: &Path,
) -> Result<()> {
    let env = Environment::new()?;
    let ev = with_policies(&sdc, &peds, |s, p| {
        evaluate(&env, s, p, seeds, multiplier, true)
    })?;
    let id = identity(&sdc, &peds);
    std::fs::create_dir_all(out)?;
    let tag = format!(
        "config_hash={} train_seed={}",
        id.config_hash, id.train_seed
    );
    log::write_csv(
        BufWriter::new(File::create(out.join("logs.csv"))?),
        &ev.logs,
        &tag,
    )?;
    ev.report
        .write_speed_table(BufWriter::new(File::create(out.join("speed_bins.csv"))?))?;
    write_seeds(&out.join("seeds.txt"), seeds)?;
    let file = ReportFile {
        run: id,
        report: &ev.report,
    };
    std::fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(&file)? + "\n",
    )?;
    let r = &ev.report;
    println!(
        "{} vs {} peds: {} episodes  goal {:.3}  collision {:.3}  timeout {:.3}",
        r.sdc_policy, r.ped_policy, r.episodes, r.goal_rate, r.collision_rate, r.timeout_rate
    );
    println!("wrote {}", out.join("report.json").display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let seeds = resolve_seeds(&a.seeds)?;
    let sdc = parse_sdc(&a.sdc)?;
    let peds = parse_peds(&a.peds)?;
    run_eval(sdc, peds, &seeds, a.multiplier, &a.out)
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let kind = BaselineKind::parse(&a.name)?;
    let seeds = resolve_seeds(&a.seeds)?;
    let out = a
        .out
        .unwrap_or_else(|| PathBuf::from(format!("runs/baseline-{}", kind.name())));
    run_eval(SdcSpec::Baseline(kind), None, &seeds, a.multiplier, &out)
}

fn ablate(a: AblateArgs) -> Result<()> {
    let seeds = resolve_seeds(&a.seeds)?;
    let sdc = parse_sdc(&a.sdc)?;
    let peds = parse_peds(&a.peds)?;
    let env = Environment::new()?;
    let reports = with_policies(&sdc, &peds, |s, p| {
        ablation_sweep(&env, s, p, &a.multipliers, &seeds)
    })?;
    std::fs::create_dir_all(&a.out)?;
    let rows = ablation_rows(&reports);
    write_ablation_csv(
        BufWriter::new(File::create(a.out.join("ablation.csv"))?),
        &rows,
    )?;
    write_seeds(&a.out.join("seeds.txt"), &seeds)?;
    let file = AblationFile {
        run: identity(&sdc, &peds),
        reports: &reports,
    };
    std::fs::write(
        a.out.join("ablation.json"),
        serde_json::to_string_pretty(&file)? + "\n",
    )?;
    for r in &rows {
        println!(
            "multiplier {:<5}  jaywalk share {:.3}  goal {:.3}  collision {:.3}",
            r.multiplier, r.jaywalk_crossing_fraction, r.goal_rate, r.collision_rate
        );
    }
    Ok(())
}

fn selfcheck_cmd() -> Result<i32> {
    let env = Environment::new()?;
    let results = selfcheck::run_all(&env)?;
    for r in &results {
        println!(
            "{} {:<26} {:>7.2}s  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.seconds,
            r.detail
        );
    }
    Ok(if results.iter().all(|r| r.passed) {
        0
    } else {
        1
    })
}
