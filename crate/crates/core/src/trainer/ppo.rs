//! Clipped-surrogate PPO losses with exact gradients.
//!
//! Each network has its own loss:
//!
//! * pedestrian actor: `-mean(min(rA, clip(r)A)) - c_ped * mean(entropy)`
//! * vehicle actor: the same with `c_sdc`, over the actor weights and the
//!   log-std vector
//! * critic: `c_v * 0.5 * mean((V - R)^2)`
//!
//! Observation widths come from each network's input layer, so the losses
//! also apply to small test networks. Samples are processed in fixed-size
//! chunks that may run on different threads; partial gradients are summed in
//! chunk order, so results do not depend on the number of workers.

use crate::nets::{Categorical, DiagGaussian, Mlp, LOG_STD_MAX, LOG_STD_MIN};
use crate::{Error, Result};
use rayon::prelude::*;

/// Rows per parallel work item.
pub const CHUNK_ROWS: usize = 256;

/// One minibatch, gathered from a rollout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Minibatch {
    pub ped_obs: Vec<f64>,
    pub ped_actions: Vec<usize>,
    pub ped_old_logp: Vec<f64>,
    pub ped_adv: Vec<f64>,
    pub sdc_obs: Vec<f64>,
    pub sdc_u: Vec<[f64; 2]>,
    pub sdc_old_logp: Vec<f64>,
    pub sdc_adv: Vec<f64>,
    pub global: Vec<f64>,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ActorStats {
    pub policy_loss: f64,
    pub entropy: f64,
    /// Fraction of samples whose ratio left `[1 - eps, 1 + eps]`.
    pub clip_frac: f64,
    /// Mean of `(r - 1) - ln r`.
    pub approx_kl: f64,
    /// Total loss including the entropy term.
    pub loss: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct PpoCoefs {
    pub clip_eps: f64,
    pub ent_coef_ped: f64,
    pub ent_coef_sdc: f64,
    pub value_coef: f64,
}

/// Per-sample clipped surrogate: returns `(loss_i, dloss_i/dlogp, clipped)`.
pub fn surrogate(new_logp: f64, old_logp: f64, adv: f64, eps: f64) -> (f64, f64, bool) {
    let ratio = (new_logp - old_logp).exp();
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
    let grad = if unclipped <= clipped {
        -ratio * adv
    } else {
        0.0
    };
    let out_of_range = ratio < 1.0 - eps || ratio > 1.0 + eps;
    (-unclipped.min(clipped), grad, out_of_range)
}

#[derive(Default)]
struct Partial {
    grad: Vec<f64>,
    extra: [f64; 2],
    policy: f64,
    entropy: f64,
    clipped: usize,
    kl: f64,
}

fn reduce(parts: Vec<Partial>, n_params: usize) -> Partial {
    let mut total = Partial {
        grad: vec![0.0; n_params],
        ..Default::default()
    };
    for p in parts {
        for (a, b) in total.grad.iter_mut().zip(&p.grad) {
            *a += b;
        }
        total.extra[0] += p.extra[0];
        total.extra[1] += p.extra[1];
        total.policy += p.policy;
        total.entropy += p.entropy;
        total.clipped += p.clipped;
        total.kl += p.kl;
    }
    total
}

fn finish(total: &Partial, n: usize, ent_coef: f64) -> Result<ActorStats> {
    let nf = n as f64;
    let policy_loss = total.policy / nf;
    let entropy = total.entropy / nf;
    let stats = ActorStats {
        policy_loss,
        entropy,
        clip_frac: total.clipped as f64 / nf,
        approx_kl: total.kl / nf,
        loss: policy_loss - ent_coef * entropy,
    };
    if !stats.loss.is_finite() || total.grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: "actor loss",
            detail: format!("policy {policy_loss}, entropy {entropy}"),
        });
    }
    Ok(stats)
}

/// Pedestrian actor loss; adds its gradient into `grad`.
pub fn ped_actor_loss(
    net: &Mlp,
    mb: &Minibatch,
    coefs: &PpoCoefs,
    grad: &mut [f64],
) -> Result<ActorStats> {
    let n = mb.ped_actions.len();
    if n == 0 {
        return Ok(ActorStats::default());
    }
    let nf = n as f64;
    let dim = net.arch[0];
    let parts: Vec<Partial> = (0..n.div_ceil(CHUNK_ROWS))
        .into_par_iter()
        .map(|c| -> Result<Partial> {
            let lo = c * CHUNK_ROWS;
            let hi = (lo + CHUNK_ROWS).min(n);
            let rows = hi - lo;
            let cache = net.forward_batch(&mb.ped_obs[lo * dim..hi * dim], rows)?;
            let mut d_out = vec![0.0; rows * 2];
            let mut part = Partial {
                grad: vec![0.0; net.len()],
                ..Default::default()
            };
            for r in 0..rows {
                let i = lo + r;
                let dist = Categorical::from_logits(&cache.output()[2 * r..2 * r + 2]);
                let a = mb.ped_actions[i];
                let lp = dist.log_prob(a);
                let (loss, dlp, clipped) =
                    surrogate(lp, mb.ped_old_logp[i], mb.ped_adv[i], coefs.clip_eps);
                let ent = dist.entropy();
                part.policy += loss;
                part.entropy += ent;
                part.clipped += clipped as usize;
                let ratio = (lp - mb.ped_old_logp[i]).exp();
                part.kl += (ratio - 1.0) - (lp - mb.ped_old_logp[i]);
                let glp = dist.grad_log_prob(a);
                let gh = dist.grad_entropy();
                for k in 0..2 {
                    d_out[2 * r + k] = (dlp * glp[k] - coefs.ent_coef_ped * gh[k]) / nf;
                }
            }
            net.backward(&cache, &d_out, &mut part.grad);
            Ok(part)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = reduce(parts, net.len());
    let stats = finish(&total, n, coefs.ent_coef_ped)?;
    for (g, t) in grad.iter_mut().zip(&total.grad) {
        *g += t;
    }
    Ok(stats)
}

/// Vehicle actor loss; adds gradients into `grad` (network) and
/// `grad_log_std`.
pub fn sdc_actor_loss(
    net: &Mlp,
    log_std: &[f64; 2],
    mb: &Minibatch,
    coefs: &PpoCoefs,
    grad: &mut [f64],
    grad_log_std: &mut [f64; 2],
) -> Result<ActorStats> {
    let n = mb.sdc_u.len();
    if n == 0 {
        return Ok(ActorStats::default());
    }
    let nf = n as f64;
    let dim = net.arch[0];
    let parts: Vec<Partial> = (0..n.div_ceil(CHUNK_ROWS))
        .into_par_iter()
        .map(|c| -> Result<Partial> {
            let lo = c * CHUNK_ROWS;
            let hi = (lo + CHUNK_ROWS).min(n);
            let rows = hi - lo;
            let cache = net.forward_batch(&mb.sdc_obs[lo * dim..hi * dim], rows)?;
            let mut d_out = vec![0.0; rows * 2];
            let mut part = Partial {
                grad: vec![0.0; net.len()],
                ..Default::default()
            };
            for r in 0..rows {
                let i = lo + r;
                let dist = DiagGaussian::new(&cache.output()[2 * r..2 * r + 2], log_std);
                let u = &mb.sdc_u[i];
                let lp = dist.log_prob(u);
                let (loss, dlp, clipped) =
                    surrogate(lp, mb.sdc_old_logp[i], mb.sdc_adv[i], coefs.clip_eps);
                part.policy += loss;
                part.entropy += dist.entropy();
                part.clipped += clipped as usize;
                let ratio = (lp - mb.sdc_old_logp[i]).exp();
                part.kl += (ratio - 1.0) - (lp - mb.sdc_old_logp[i]);
                let (gm, gs) = dist.grad_log_prob(u);
                for k in 0..2 {
                    d_out[2 * r + k] = dlp * gm[k] / nf;
                    // The entropy is linear in log-std with slope 1.
                    part.extra[k] += (dlp * gs[k] - coefs.ent_coef_sdc) / nf;
                }
            }
            net.backward(&cache, &d_out, &mut part.grad);
            Ok(part)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = reduce(parts, net.len());
    let stats = finish(&total, n, coefs.ent_coef_sdc)?;
    for (g, t) in grad.iter_mut().zip(&total.grad) {
        *g += t;
    }
    for k in 0..2 {
        if log_std[k] > LOG_STD_MIN && log_std[k] < LOG_STD_MAX {
            grad_log_std[k] += total.extra[k];
        }
    }
    Ok(stats)
}

/// Critic regression loss; adds its gradient into `grad`.
pub fn critic_loss(net: &Mlp, mb: &Minibatch, coefs: &PpoCoefs, grad: &mut [f64]) -> Result<f64> {
    let n = mb.returns.len();
    if n == 0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let dim = net.arch[0];
    let parts: Vec<Partial> = (0..n.div_ceil(CHUNK_ROWS))
        .into_par_iter()
        .map(|c| -> Result<Partial> {
            let lo = c * CHUNK_ROWS;
            let hi = (lo + CHUNK_ROWS).min(n);
            let rows = hi - lo;
            let cache = net.forward_batch(&mb.global[lo * dim..hi * dim], rows)?;
            let mut part = Partial {
                grad: vec![0.0; net.len()],
                ..Default::default()
            };
            let mut d_out = vec![0.0; rows];
            for r in 0..rows {
                let err = cache.output()[r] - mb.returns[lo + r];
                part.policy += 0.5 * err * err;
                d_out[r] = coefs.value_coef * err / nf;
            }
            net.backward(&cache, &d_out, &mut part.grad);
            Ok(part)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = reduce(parts, net.len());
    let loss = coefs.value_coef * total.policy / nf;
    if !loss.is_finite() || total.grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: "value loss",
            detail: format!("{loss}"),
        });
    }
    for (g, t) in grad.iter_mut().zip(&total.grad) {
        *g += t;
    }
    Ok(loss)
}
