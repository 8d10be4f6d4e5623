/// Critic target mix: half the mean pedestrian reward, half the vehicle reward.
pub fn blended_reward(ped_rewards: &[f64], sdc_reward: f64) -> f64 {
    let mean = ped_rewards.iter().sum::<f64>() / ped_rewards.len() as f64;
    0.5 * mean + 0.5 * sdc_reward
}

/// Generalized advantage estimates for one trajectory segment.
///
/// `dones[t]` marks that the episode ended on step `t`, so `values[t + 1]`
/// (or `bootstrap` after the last step) belongs to a fresh episode and is
/// not bootstrapped through. Returns `(advantages, returns)` with
/// `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// GAE over a `(steps, envs)` row-major batch, one column per environment.
#[allow(clippy::too_many_arguments)]
pub fn compute_gae_batch(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: &[f64],
    envs: usize,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let steps = rewards.len() / envs;
    let mut adv = vec![0.0; rewards.len()];
    let mut ret = vec![0.0; rewards.len()];
    let mut r = vec![0.0; steps];
    let mut v = vec![0.0; steps];
    let mut d = vec![false; steps];
    for e in 0..envs {
        for t in 0..steps {
            r[t] = rewards[t * envs + e];
            v[t] = values[t * envs + e];
            d[t] = dones[t * envs + e];
        }
        let (a, g) = compute_gae(&r, &v, &d, bootstrap[e], gamma, lambda);
        for t in 0..steps {
            adv[t * envs + e] = a[t];
            ret[t * envs + e] = g[t];
        }
    }
    (adv, ret)
}

/// Shifts and scales `x` in place to zero mean and unit (population)
/// standard deviation.
pub fn normalize(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    for a in x.iter_mut() {
        *a = (*a - mean) / std;
    }
}
