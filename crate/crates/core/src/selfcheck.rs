//! Oracle suites behind the `selfcheck` command: shortest paths against
//! Bellman-Ford, GAE against direct summation, PPO gradients against finite
//! differences, and crossing-mode statistics against their analytic values.

use crate::baselines::BaselineKind;
use crate::env::Environment;
use crate::map::{bellman_ford_costs, dijkstra_path, path_cost};
use crate::metrics::{evaluate, PedPolicy, SdcPolicy};
use crate::nets::Mlp;
use crate::trainer::{
    compute_gae, critic_loss, ped_actor_loss, sdc_actor_loss, Minibatch, PpoCoefs,
};
use crate::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Result<CheckOutcome> {
    let t = Instant::now();
    let (passed, detail) = f()?;
    Ok(CheckOutcome {
        name,
        passed,
        detail,
        seconds: t.elapsed().as_secs_f64(),
    })
}

/// Number of node pairs whose Dijkstra path cost differs from the
/// Bellman-Ford distance, and the number of pairs checked.
pub fn dijkstra_mismatches(env: &Environment) -> Result<(usize, usize)> {
    let g = &env.graph;
    let n = g.nodes.len();
    let mut bad = 0;
    for s in 0..n {
        let oracle = bellman_ford_costs(g, s);
        for (d, &want) in oracle.iter().enumerate() {
            let path = dijkstra_path(g, s, d)?;
            if path_cost(g, &path) != Some(want) {
                bad += 1;
            }
        }
    }
    Ok((bad, n * n))
}

/// `A_t = sum_k (gamma lambda)^k delta_{t+k}`, truncated at the first done.
pub fn gae_by_summation(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let next_value = |t: usize| if t + 1 < n { values[t + 1] } else { bootstrap };
    (0..n)
        .map(|t| {
            let mut total = 0.0;
            let mut weight = 1.0;
            for k in t..n {
                let live = if dones[k] { 0.0 } else { 1.0 };
                let delta = rewards[k] + gamma * next_value(k) * live - values[k];
                total += weight * delta;
                if dones[k] {
                    break;
                }
                weight *= gamma * lambda;
            }
            total
        })
        .collect()
}

/// Largest absolute difference between recursive and summed GAE over
/// `trials` random sequences with random done patterns.
pub fn gae_max_error(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n = rng.random_range(1..=64);
        let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-20.0..20.0)).collect();
        let p_done = rng.random_range(0.0..0.3);
        let dones: Vec<bool> = (0..n).map(|_| rng.random_bool(p_done)).collect();
        let bootstrap = rng.random_range(-20.0..20.0);
        let gamma = rng.random_range(0.9..1.0);
        let lambda = rng.random_range(0.0..=1.0);
        let (adv, _) = compute_gae(&rewards, &values, &dones, bootstrap, gamma, lambda);
        let oracle = gae_by_summation(&rewards, &values, &dones, bootstrap, gamma, lambda);
        for (a, b) in adv.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// Tiny networks and a minibatch for the composite-loss gradient check.
#[derive(Debug, Clone)]
pub struct GradProblem {
    pub ped: Mlp,
    pub sdc: Mlp,
    pub log_std: [f64; 2],
    pub critic: Mlp,
    pub mb: Minibatch,
    pub coefs: PpoCoefs,
}

const TINY_IN: usize = 3;
const TINY_ROWS: usize = 6;
/// Ratios and pre-activations closer than this to a kink are resampled.
const KINK_MARGIN: f64 = 1e-3;

fn tiny_net(out: usize, rng: &mut ChaCha8Rng) -> Mlp {
    let mut net = Mlp::zeros([TINY_IN, 4, 4, out]);
    net.params
        .iter_mut()
        .for_each(|p| *p = rng.random_range(-1.0..1.0));
    net
}

fn smallest_preactivation(net: &Mlp, input: &[f64], rows: usize) -> f64 {
    let mut smallest = f64::INFINITY;
    for r in 0..rows {
        let mut x = input[r * net.arch[0]..(r + 1) * net.arch[0]].to_vec();
        for l in 0..2 {
            let (w, b) = (net.weights(l), net.bias(l));
            let (fan_in, fan_out) = (net.arch[l], net.arch[l + 1]);
            let z: Vec<f64> = (0..fan_out)
                .map(|o| b[o] + (0..fan_in).map(|i| w[o * fan_in + i] * x[i]).sum::<f64>())
                .collect();
            smallest = z.iter().fold(smallest, |m, v| m.min(v.abs()));
            x = z.into_iter().map(|v| v.max(0.0)).collect();
        }
    }
    smallest
}

impl GradProblem {
    /// Draws a random problem away from the clip boundaries and ReLU kinks.
    pub fn sample(rng: &mut ChaCha8Rng) -> Self {
        loop {
            let p = Self::draw(rng);
            if p.away_from_kinks() {
                return p;
            }
        }
    }

    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let ped = tiny_net(2, rng);
        let sdc = tiny_net(2, rng);
        let critic = tiny_net(1, rng);
        let log_std = [rng.random_range(-1.5..0.5), rng.random_range(-1.5..0.5)];
        let rand_vec = |rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(lo..hi)).collect()
        };
        let ped_obs = rand_vec(rng, TINY_ROWS * TINY_IN, -1.0, 1.0);
        let sdc_obs = rand_vec(rng, TINY_ROWS * TINY_IN, -1.0, 1.0);
        let global = rand_vec(rng, TINY_ROWS * TINY_IN, -1.0, 1.0);
        let ped_actions: Vec<usize> = (0..TINY_ROWS).map(|_| rng.random_range(0..2)).collect();
        let sdc_u: Vec<[f64; 2]> = (0..TINY_ROWS)
            .map(|_| [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)])
            .collect();
        let mut mb = Minibatch {
            ped_obs,
            ped_actions,
            ped_old_logp: Vec::new(),
            ped_adv: rand_vec(rng, TINY_ROWS, -2.0, 2.0),
            sdc_obs,
            sdc_u,
            sdc_old_logp: Vec::new(),
            sdc_adv: rand_vec(rng, TINY_ROWS, -2.0, 2.0),
            global,
            returns: rand_vec(rng, TINY_ROWS, -3.0, 3.0),
        };
        // Old log-probs are the current ones shifted by up to +-0.4, so some
        // ratios fall outside the clip range.
        let (ped_lp, sdc_lp) = current_log_probs(&ped, &sdc, &log_std, &mb);
        mb.ped_old_logp = ped_lp
            .iter()
            .map(|l| l + rng.random_range(-0.4..0.4))
            .collect();
        mb.sdc_old_logp = sdc_lp
            .iter()
            .map(|l| l + rng.random_range(-0.4..0.4))
            .collect();
        GradProblem {
            ped,
            sdc,
            log_std,
            critic,
            mb,
            coefs: PpoCoefs {
                clip_eps: 0.2,
                ent_coef_ped: 0.03,
                ent_coef_sdc: 0.01,
                value_coef: 0.5,
            },
        }
    }

    fn away_from_kinks(&self) -> bool {
        let (ped_lp, sdc_lp) = current_log_probs(&self.ped, &self.sdc, &self.log_std, &self.mb);
        let eps = self.coefs.clip_eps;
        let ratio_ok = |new: &[f64], old: &[f64]| {
            new.iter().zip(old).all(|(n, o)| {
                let r = (n - o).exp();
                (r - (1.0 - eps)).abs() > KINK_MARGIN && (r - (1.0 + eps)).abs() > KINK_MARGIN
            })
        };
        ratio_ok(&ped_lp, &self.mb.ped_old_logp)
            && ratio_ok(&sdc_lp, &self.mb.sdc_old_logp)
            && smallest_preactivation(&self.ped, &self.mb.ped_obs, TINY_ROWS) > KINK_MARGIN
            && smallest_preactivation(&self.sdc, &self.mb.sdc_obs, TINY_ROWS) > KINK_MARGIN
            && smallest_preactivation(&self.critic, &self.mb.global, TINY_ROWS) > KINK_MARGIN
    }

    /// Flat parameter vector: pedestrian actor, vehicle actor, log-std, critic.
    pub fn params(&self) -> Vec<f64> {
        let mut v = self.ped.params.clone();
        v.extend_from_slice(&self.sdc.params);
        v.extend_from_slice(&self.log_std);
        v.extend_from_slice(&self.critic.params);
        v
    }

    pub fn set_params(&mut self, v: &[f64]) {
        let (a, rest) = v.split_at(self.ped.len());
        let (b, rest) = rest.split_at(self.sdc.len());
        let (c, d) = rest.split_at(2);
        self.ped.params.copy_from_slice(a);
        self.sdc.params.copy_from_slice(b);
        self.log_std = [c[0], c[1]];
        self.critic.params.copy_from_slice(d);
    }

    /// Composite loss (sum of the three per-network losses) and its
    /// analytic gradient in [`GradProblem::params`] order.
    pub fn loss_and_grad(&self) -> Result<(f64, Vec<f64>)> {
        let mut gp = vec![0.0; self.ped.len()];
        let mut gs = vec![0.0; self.sdc.len()];
        let mut gl = [0.0; 2];
        let mut gc = vec![0.0; self.critic.len()];
        let p = ped_actor_loss(&self.ped, &self.mb, &self.coefs, &mut gp)?;
        let s = sdc_actor_loss(
            &self.sdc,
            &self.log_std,
            &self.mb,
            &self.coefs,
            &mut gs,
            &mut gl,
        )?;
        let c = critic_loss(&self.critic, &self.mb, &self.coefs, &mut gc)?;
        let mut g = gp;
        g.extend_from_slice(&gs);
        g.extend_from_slice(&gl);
        g.extend_from_slice(&gc);
        Ok((p.loss + s.loss + c, g))
    }

    /// Relative error `|g - g_fd| / (|g| + |g_fd|)` between the analytic and
    /// central-difference gradients.
    pub fn relative_error(&self, h: f64) -> Result<f64> {
        let (_, analytic) = self.loss_and_grad()?;
        let base = self.params();
        let mut probe = self.clone();
        let mut numeric = vec![0.0; base.len()];
        let mut x = base.clone();
        for i in 0..base.len() {
            x[i] = base[i] + h;
            probe.set_params(&x);
            let up = probe.loss_and_grad()?.0;
            x[i] = base[i] - h;
            probe.set_params(&x);
            let down = probe.loss_and_grad()?.0;
            x[i] = base[i];
            numeric[i] = (up - down) / (2.0 * h);
        }
        let diff = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt()
            + numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        Ok(if scale == 0.0 { 0.0 } else { diff / scale })
    }
}

fn current_log_probs(
    ped: &Mlp,
    sdc: &Mlp,
    log_std: &[f64; 2],
    mb: &Minibatch,
) -> (Vec<f64>, Vec<f64>) {
    use crate::nets::{Categorical, DiagGaussian};
    let pl = ped
        .forward_batch(&mb.ped_obs, TINY_ROWS)
        .expect("tiny input width");
    let sl = sdc
        .forward_batch(&mb.sdc_obs, TINY_ROWS)
        .expect("tiny input width");
    let ped_lp = (0..TINY_ROWS)
        .map(|r| {
            Categorical::from_logits(&pl.output()[2 * r..2 * r + 2]).log_prob(mb.ped_actions[r])
        })
        .collect();
    let sdc_lp = (0..TINY_ROWS)
        .map(|r| DiagGaussian::new(&sl.output()[2 * r..2 * r + 2], log_std).log_prob(&mb.sdc_u[r]))
        .collect();
    (ped_lp, sdc_lp)
}

/// Worst relative gradient error over `trials` random problems.
pub fn gradient_check(trials: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let p = GradProblem::sample(&mut rng);
        worst = worst.max(p.relative_error(1e-6)?);
    }
    Ok(worst)
}

/// Crossing-mode roll statistics under always-go pedestrians.
#[derive(Debug, Clone, PartialEq)]
pub struct RollStats {
    pub decisions: usize,
    pub per_quartile: [usize; 4],
    pub rates: [f64; 4],
    pub expected: [f64; 4],
}

/// Expected jaywalk rate per trait quartile: the multiplier times the mean
/// tendency of a uniform trait within the quartile.
pub fn expected_quartile_rates(multiplier: f64) -> [f64; 4] {
    std::array::from_fn(|q| multiplier * (q as f64 + 0.5) / 4.0)
}

/// Runs always-go episodes in batches until at least `min_decisions`
/// crossing decisions have been made.
pub fn roll_statistics(
    env: &Environment,
    multiplier: f64,
    min_decisions: usize,
    seed_base: u64,
) -> Result<RollStats> {
    const BATCH: u64 = 1000;
    let mut jw = [0usize; 4];
    let mut all = [0usize; 4];
    let mut next = seed_base;
    while all.iter().sum::<usize>() < min_decisions {
        let seeds: Vec<u64> = (next..next + BATCH).collect();
        next += BATCH;
        let ev = evaluate(
            env,
            SdcPolicy::Baseline(BaselineKind::RuleBasedBraking),
            PedPolicy::AlwaysGo,
            &seeds,
            multiplier,
            false,
        )?;
        for q in 0..4 {
            let [c, j] = ev.stats.crossings[q];
            jw[q] += j;
            all[q] += c + j;
        }
    }
    Ok(RollStats {
        decisions: all.iter().sum(),
        per_quartile: all,
        rates: std::array::from_fn(|q| jw[q] as f64 / all[q] as f64),
        expected: expected_quartile_rates(multiplier),
    })
}

/// Runs every suite with its acceptance tolerance.
pub fn run_all(env: &Environment) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        timed("dijkstra-vs-bellman-ford", || {
            let (bad, pairs) = dijkstra_mismatches(env)?;
            Ok((bad == 0, format!("{bad} of {pairs} node pairs differ")))
        })?,
        timed("gae-vs-summation", || {
            let err = gae_max_error(1000, 17);
            Ok((
                err <= 1e-6,
                format!("max abs error {err:.3e} over 1000 sequences"),
            ))
        })?,
        timed("ppo-gradient-check", || {
            let err = gradient_check(100, 23)?;
            Ok((
                err < 1e-4,
                format!("max relative error {err:.3e} over 100 trials"),
            ))
        })?,
        timed("jaywalk-roll-statistics", || {
            let s = roll_statistics(env, 0.25, 100_000, 5_000_000)?;
            let ok = s
                .rates
                .iter()
                .zip(&s.expected)
                .all(|(r, e)| (r - e).abs() <= 0.01);
            Ok((
                ok,
                format!(
                    "{} decisions, rates {:.4?} vs expected {:.4?}",
                    s.decisions, s.rates, s.expected
                ),
            ))
        })?,
    ])
}
