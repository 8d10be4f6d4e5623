//! Action distributions: a two-way categorical for pedestrians and a diagonal
//! Gaussian for the vehicle.

use crate::physics::{PedDecision, VehicleAction, ACCEL_MAX, ACCEL_MIN, MAX_STEER};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Index of the "go" action in the pedestrian categorical; "wait" is 1.
pub const GO: usize = 0;
pub const WAIT: usize = 1;

pub fn decision_of(action: usize) -> PedDecision {
    if action == GO {
        PedDecision::Go
    } else {
        PedDecision::Wait
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Categorical {
    pub log_probs: [f64; 2],
}

impl Categorical {
    pub fn from_logits(logits: &[f64]) -> Self {
        let m = logits[0].max(logits[1]);
        let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
        Self {
            log_probs: [logits[0] - lse, logits[1] - lse],
        }
    }

    pub fn probs(&self) -> [f64; 2] {
        [self.log_probs[0].exp(), self.log_probs[1].exp()]
    }

    pub fn log_prob(&self, action: usize) -> f64 {
        self.log_probs[action]
    }

    pub fn entropy(&self) -> f64 {
        let p = self.probs();
        -(p[0] * self.log_probs[0] + p[1] * self.log_probs[1])
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        if u < self.probs()[0] {
            0
        } else {
            1
        }
    }

    /// Most likely action; ties go to "go".
    pub fn mode(&self) -> usize {
        if self.log_probs[0] >= self.log_probs[1] {
            0
        } else {
            1
        }
    }

    /// Gradient of `log_prob(action)` with respect to the logits.
    pub fn grad_log_prob(&self, action: usize) -> [f64; 2] {
        let p = self.probs();
        let mut g = [-p[0], -p[1]];
        g[action] += 1.0;
        g
    }

    /// Gradient of the entropy with respect to the logits.
    pub fn grad_entropy(&self) -> [f64; 2] {
        let p = self.probs();
        let h = self.entropy();
        [
            -p[0] * (self.log_probs[0] + h),
            -p[1] * (self.log_probs[1] + h),
        ]
    }
}

/// Diagonal Gaussian over the normalized action `u`. The environment action
/// is obtained by clamping `u` to `[-1, 1]` and scaling (see
/// [`to_vehicle_action`]); densities are evaluated on the unclamped sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagGaussian {
    pub mean: [f64; 2],
    pub log_std: [f64; 2],
}

pub fn clamp_log_std(x: f64) -> f64 {
    x.clamp(LOG_STD_MIN, LOG_STD_MAX)
}

impl DiagGaussian {
    pub fn new(mean: &[f64], log_std: &[f64]) -> Self {
        Self {
            mean: [mean[0], mean[1]],
            log_std: [clamp_log_std(log_std[0]), clamp_log_std(log_std[1])],
        }
    }

    pub fn log_prob(&self, x: &[f64; 2]) -> f64 {
        (0..2)
            .map(|i| {
                let z = (x[i] - self.mean[i]) / self.log_std[i].exp();
                -0.5 * z * z - self.log_std[i] - HALF_LN_2PI
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|l| l + 0.5 + HALF_LN_2PI).sum()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> [f64; 2] {
        let mut x = [0.0; 2];
        for (i, xi) in x.iter_mut().enumerate() {
            let n: f64 = StandardNormal.sample(rng);
            *xi = self.mean[i] + self.log_std[i].exp() * n;
        }
        x
    }

    /// Gradients of `log_prob(x)` with respect to the mean and (clamped)
    /// log-std.
    pub fn grad_log_prob(&self, x: &[f64; 2]) -> ([f64; 2], [f64; 2]) {
        let mut gm = [0.0; 2];
        let mut gs = [0.0; 2];
        for i in 0..2 {
            let sd = self.log_std[i].exp();
            let z = (x[i] - self.mean[i]) / sd;
            gm[i] = z / sd;
            gs[i] = z * z - 1.0;
        }
        (gm, gs)
    }
}

/// Maps a normalized action to physical units: acceleration in
/// `[ACCEL_MIN, ACCEL_MAX]` and a target wheel angle in `±MAX_STEER`.
pub fn to_vehicle_action(u: &[f64; 2]) -> VehicleAction {
    let a = u[0].clamp(-1.0, 1.0);
    let s = u[1].clamp(-1.0, 1.0);
    let mid = 0.5 * (ACCEL_MAX + ACCEL_MIN);
    let half = 0.5 * (ACCEL_MAX - ACCEL_MIN);
    VehicleAction::new(mid + half * a, MAX_STEER * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits() {
        let c = Categorical::from_logits(&[0.0, 0.0]);
        assert!((c.probs()[0] - 0.5).abs() < 1e-15);
        assert!((c.entropy() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn softmax_closed_form() {
        let c = Categorical::from_logits(&[10.0, 0.0]);
        let want = 1.0 / (1.0 + (-10.0f64).exp());
        assert!((c.probs()[0] - want).abs() < 1e-15);
        assert_eq!(c.mode(), GO);
    }

    #[test]
    fn categorical_sampling_frequency() {
        let c = Categorical::from_logits(&[0.3, -0.4]);
        let p = c.probs()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let go = (0..n).filter(|_| c.sample(&mut rng) == GO).count() as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((go - p).abs() < 3.0 * sigma);
    }

    #[test]
    fn standard_normal_density() {
        let g = DiagGaussian::new(&[0.0, 0.0], &[0.0, 0.0]);
        let want = -(2.0 * std::f64::consts::PI).ln();
        assert!((g.log_prob(&[0.0, 0.0]) - want).abs() < 1e-15);
        let e = 2.0 * 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((g.entropy() - e).abs() < 1e-14);
    }

    #[test]
    fn log_std_clamped() {
        let g = DiagGaussian::new(&[0.0, 0.0], &[-9.0, 7.0]);
        assert_eq!(g.log_std, [LOG_STD_MIN, LOG_STD_MAX]);
        assert!(g.log_prob(&[3.0, -3.0]).is_finite());
    }

    #[test]
    fn gaussian_sample_mean() {
        let g = DiagGaussian::new(&[0.4, -0.2], &[-0.5, 0.1]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut s = [0.0; 2];
        for _ in 0..n {
            let x = g.sample(&mut rng);
            s[0] += x[0];
            s[1] += x[1];
        }
        for i in 0..2 {
            let sd = g.log_std[i].exp();
            assert!((s[i] / n as f64 - g.mean[i]).abs() < 3.0 * sd / (n as f64).sqrt());
        }
    }

    #[test]
    fn grads_match_finite_difference() {
        let x = [0.3, -1.1];
        let g = DiagGaussian::new(&[0.1, 0.4], &[-0.3, 0.2]);
        let (gm, gs) = g.grad_log_prob(&x);
        let h = 1e-6;
        for i in 0..2 {
            let mut up = g;
            up.mean[i] += h;
            let mut dn = g;
            dn.mean[i] -= h;
            assert!(((up.log_prob(&x) - dn.log_prob(&x)) / (2.0 * h) - gm[i]).abs() < 1e-7);
            let mut up = g;
            up.log_std[i] += h;
            let mut dn = g;
            dn.log_std[i] -= h;
            assert!(((up.log_prob(&x) - dn.log_prob(&x)) / (2.0 * h) - gs[i]).abs() < 1e-7);
        }
        let c = Categorical::from_logits(&[0.7, -0.2]);
        let ge = c.grad_entropy();
        for i in 0..2 {
            let mut l = [0.7, -0.2];
            l[i] += h;
            let up = Categorical::from_logits(&l).entropy();
            l[i] -= 2.0 * h;
            let dn = Categorical::from_logits(&l).entropy();
            assert!(((up - dn) / (2.0 * h) - ge[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn action_mapping() {
        assert_eq!(
            to_vehicle_action(&[1.0, 1.0]),
            VehicleAction::new(3.0, 0.52)
        );
        assert_eq!(
            to_vehicle_action(&[-5.0, -2.0]),
            VehicleAction::new(-4.0, -0.52)
        );
        assert_eq!(
            to_vehicle_action(&[0.0, 0.0]),
            VehicleAction::new(-0.5, 0.0)
        );
    }
}
