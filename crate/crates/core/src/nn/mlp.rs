use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected network: tanh on hidden layers, identity on the output.
///
/// Parameters live in one flat vector. Layer `l` occupies a contiguous
/// block holding its weight matrix (`out x in`, row-major) followed by its
/// bias vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
}

/// Layer activations from a forward pass, kept for backpropagation.
/// `acts[0]` is the input and `acts[l + 1]` the output of layer `l`.
#[derive(Debug, Clone)]
pub struct Trace {
    pub acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

/// Dot product with four interleaved partial sums. The summation order is
/// fixed, so results are reproducible across runs and thread counts.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// All-zero network.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::invalid(format!("bad layer dims {dims:?}")));
        }
        Ok(Mlp {
            dims: dims.to_vec(),
            params: vec![0.0; param_count(dims)],
        })
    }

    /// Weights and biases drawn uniformly from `±1/sqrt(fan_in)`.
    pub fn init(dims: &[usize], seed: u64) -> Result<Self> {
        let mut mlp = Mlp::zeros(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut off = 0;
        for w in dims.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let n = w[0] * w[1] + w[1];
            for p in &mut mlp.params[off..off + n] {
                *p = rng.random_range(-bound..bound);
            }
            off += n;
        }
        Ok(mlp)
    }

    pub fn from_params(dims: &[usize], params: Vec<f64>) -> Result<Self> {
        let mlp = Mlp::zeros(dims)?;
        if params.len() != mlp.params.len() {
            return Err(Error::DimensionMismatch {
                expected: mlp.params.len(),
                actual: params.len(),
            });
        }
        Ok(Mlp { dims: mlp.dims, params })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn d_in(&self) -> usize {
        self.dims[0]
    }

    pub fn d_out(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d_in() {
            return Err(Error::DimensionMismatch {
                expected: self.d_in(),
                actual: x.len(),
            });
        }
        Ok(self.trace(x).acts.pop().unwrap())
    }

    /// Forward pass keeping every activation. `x` must have length `d_in`.
    pub fn trace(&self, x: &[f64]) -> Trace {
        debug_assert_eq!(x.len(), self.d_in());
        let last = self.n_layers() - 1;
        let mut acts = Vec::with_capacity(self.dims.len());
        acts.push(x.to_vec());
        let mut off = 0;
        for l in 0..self.n_layers() {
            let (d_in, d_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[off..off + d_in * d_out];
            let b = &self.params[off + d_in * d_out..off + d_in * d_out + d_out];
            let input = &acts[l];
            let mut out = Vec::with_capacity(d_out);
            for o in 0..d_out {
                let row = &w[o * d_in..(o + 1) * d_in];
                let z = b[o] + dot(row, input);
                out.push(if l == last { z } else { z.tanh() });
            }
            acts.push(out);
            off += d_in * d_out + d_out;
        }
        Trace { acts }
    }

    /// Backpropagate `grad_out` (dL/d output) through a recorded pass.
    /// Parameter gradients are added into `grad` (same layout as
    /// [`Mlp::params`]); returns dL/d input.
    pub fn backward(&self, trace: &Trace, grad_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(grad.len(), self.params.len());
        let last = self.n_layers() - 1;
        let mut delta = grad_out.to_vec();
        let mut end = self.params.len();
        for l in (0..self.n_layers()).rev() {
            let (d_in, d_out) = (self.dims[l], self.dims[l + 1]);
            let off = end - (d_in * d_out + d_out);
            if l != last {
                for (d, a) in delta.iter_mut().zip(&trace.acts[l + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            let input = &trace.acts[l];
            let w = &self.params[off..off + d_in * d_out];
            let (gw, gb) = grad[off..end].split_at_mut(d_in * d_out);
            let mut next = vec![0.0; d_in];
            for o in 0..d_out {
                let d = delta[o];
                gb[o] += d;
                let row = &w[o * d_in..(o + 1) * d_in];
                let grow = &mut gw[o * d_in..(o + 1) * d_in];
                for i in 0..d_in {
                    grow[i] += d * input[i];
                    next[i] += row[i] * d;
                }
            }
            delta = next;
            end = off;
        }
        delta
    }
}
