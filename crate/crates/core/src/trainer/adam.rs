pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// Adam moment estimates for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One bias-corrected Adam step.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t as i32);
        let c2 = 1.0 - BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + EPS);
        }
    }
}

pub fn global_norm(grads: &[&[f64]]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Rescales the gradient group so its joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|x| *x *= scale);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![1.0, -2.0];
        let mut a = Adam::new(2);
        a.step(&mut p, &[0.0, 0.0], 3e-4);
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_is_signed_lr() {
        let mut p = vec![0.0; 3];
        let mut a = Adam::new(3);
        a.step(&mut p, &[0.5, -3.0, 1e-3], 3e-4);
        for (x, s) in p.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((x - s * 3e-4).abs() < 1e-8);
        }
    }

    #[test]
    fn clipping() {
        let mut g = vec![3.0, 4.0];
        let before = clip_grad_norm(&mut [&mut g[..]], 0.5);
        assert_eq!(before, 5.0);
        assert!((global_norm(&[&g]) - 0.5).abs() < 1e-15);
        let mut small = vec![0.1, 0.1];
        clip_grad_norm(&mut [&mut small[..]], 0.5);
        assert_eq!(small, vec![0.1, 0.1]);
    }
}
