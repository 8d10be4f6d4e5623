use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Layer widths `[input, hidden, hidden, output]`.
pub type Arch = [usize; 4];

pub const PED_ARCH: Arch = [20, 128, 128, 2];
pub const SDC_ARCH: Arch = [34, 256, 256, 2];
pub const CRITIC_ARCH: Arch = [58, 256, 256, 1];

pub const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
pub const POLICY_OUTPUT_GAIN: f64 = 0.01;
pub const VALUE_OUTPUT_GAIN: f64 = 1.0;

/// Three-layer perceptron with ReLU hidden activations and a linear output.
///
/// All parameters live in one flat vector. Layer `l` stores its weight matrix
/// row-major as `(out, in)` followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub arch: Arch,
    pub params: Vec<f64>,
}

/// Activations kept from a batched forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub batch: usize,
    /// `acts[0]` is the input, `acts[1]` and `acts[2]` the post-ReLU hidden
    /// layers, `acts[3]` the output.
    pub acts: [Vec<f64>; 4],
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.acts[3]
    }
}

pub fn param_count(arch: Arch) -> usize {
    (0..3).map(|l| arch[l] * arch[l + 1] + arch[l + 1]).sum()
}

/// `C (m x n) = A (m x k) * B^T` where `B` is `(n x k)` row-major, plus `beta * C`.
fn gemm_abt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    // SAFETY: slice lengths cover the strided extents passed to dgemm.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `C (m x n) += A^T * B` where `A` is `(k x m)` and `B` is `(k x n)`, both row-major.
fn gemm_atb_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `C (m x n) = A (m x k) * B (k x n)`, row-major.
fn gemm_ab(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `rows x cols` matrix with orthonormal rows or columns (whichever is
/// fewer), scaled by `gain`.
fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (r, c) = if rows >= cols {
        (rows, cols)
    } else {
        (cols, rows)
    };
    let g = DMatrix::<f64>::from_fn(r, c, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let rdiag = qr.r().diagonal();
    for j in 0..c {
        if rdiag[j] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let v = if rows >= cols { q[(i, j)] } else { q[(j, i)] };
            out[i * cols + j] = gain * v;
        }
    }
    out
}

impl Mlp {
    pub fn zeros(arch: Arch) -> Self {
        Self {
            arch,
            params: vec![0.0; param_count(arch)],
        }
    }

    /// Orthogonal weights (hidden layers scaled by sqrt 2, output layer by
    /// `output_gain`) and zero biases.
    pub fn init(arch: Arch, output_gain: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros(arch);
        for l in 0..3 {
            let gain = if l == 2 { output_gain } else { HIDDEN_GAIN };
            let w = orthogonal(arch[l + 1], arch[l], gain, &mut rng);
            let (ws, _) = net.layer_offsets(l);
            net.params[ws..ws + w.len()].copy_from_slice(&w);
        }
        net
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Start offsets of layer `l`'s weights and bias in `params`.
    pub fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for k in 0..l {
            off += self.arch[k] * self.arch[k + 1] + self.arch[k + 1];
        }
        (off, off + self.arch[l] * self.arch[l + 1])
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        let (w, b) = self.layer_offsets(l);
        &self.params[w..b]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let (_, b) = self.layer_offsets(l);
        &self.params[b..b + self.arch[l + 1]]
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(input, 1)?.acts[3].clone())
    }

    /// Batched forward pass over `batch` row-major inputs.
    pub fn forward_batch(&self, input: &[f64], batch: usize) -> Result<ForwardCache> {
        if input.len() != batch * self.arch[0] {
            return Err(Error::DimensionMismatch {
                expected: batch * self.arch[0],
                got: input.len(),
            });
        }
        let mut acts: [Vec<f64>; 4] = Default::default();
        acts[0] = input.to_vec();
        for l in 0..3 {
            let (n_in, n_out) = (self.arch[l], self.arch[l + 1]);
            let bias = self.bias(l);
            let mut z = Vec::with_capacity(batch * n_out);
            for _ in 0..batch {
                z.extend_from_slice(bias);
            }
            gemm_abt(batch, n_in, n_out, &acts[l], self.weights(l), 1.0, &mut z);
            if l < 2 {
                z.iter_mut().for_each(|x| *x = x.max(0.0));
            }
            acts[l + 1] = z;
        }
        Ok(ForwardCache { batch, acts })
    }

    /// Accumulates into `grad` the gradient of `sum_r dot(d_out[r], out[r])`
    /// with respect to the parameters, given the cache of the forward pass.
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64], grad: &mut [f64]) {
        let batch = cache.batch;
        let mut delta = d_out.to_vec();
        for l in (0..3).rev() {
            let (n_in, n_out) = (self.arch[l], self.arch[l + 1]);
            let (ws, bs) = self.layer_offsets(l);
            {
                let (gw, gb) = grad[ws..bs + n_out].split_at_mut(bs - ws);
                gemm_atb_acc(n_out, batch, n_in, &delta, &cache.acts[l], gw);
                for row in delta.chunks_exact(n_out) {
                    for (g, d) in gb.iter_mut().zip(row) {
                        *g += d;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![0.0; batch * n_in];
            gemm_ab(batch, n_out, n_in, &delta, self.weights(l), &mut prev);
            for (p, a) in prev.iter_mut().zip(&cache.acts[l]) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|x| x.is_finite())
    }
}
