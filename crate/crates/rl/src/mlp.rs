//! Fully connected network with a flat parameter vector and hand-written
//! reverse-mode gradients.
//!
//! Layer `l` maps `sizes[l] -> sizes[l + 1]`. Its weights are stored
//! row-major as an `in x out` matrix followed by `out` biases, so a batch `X`
//! (`n x in`, row-major) is transformed as `X W + b`. Hidden layers apply the
//! activation; the output layer is linear.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use safer_core::config::Activation;

#[derive(Debug, Error, PartialEq)]
pub enum ShapeError {
    #[error("expected input width {expected}, got {got}")]
    Input { expected: usize, got: usize },
    #[error("expected {expected} output gradients, got {got}")]
    OutputGrad { expected: usize, got: usize },
    #[error("expected {expected} parameters, got {got}")]
    Params { expected: usize, got: usize },
    #[error("a network needs at least two layer sizes, all positive")]
    Sizes,
}

pub fn activate(act: Activation, z: f64) -> f64 {
    match act {
        Activation::Identity => z,
        Activation::Relu => z.max(0.0),
        Activation::Tanh => z.tanh(),
        Activation::Silu => z / (1.0 + (-z).exp()),
    }
}

/// Derivative of the activation with respect to its pre-activation input.
pub fn activate_grad(act: Activation, z: f64) -> f64 {
    match act {
        Activation::Identity => 1.0,
        Activation::Relu => {
            if z > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Tanh => {
            let t = z.tanh();
            1.0 - t * t
        }
        Activation::Silu => {
            let s = 1.0 / (1.0 + (-z).exp());
            s * (1.0 + z * (1.0 - s))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
}

/// Intermediate values kept by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub batch: usize,
    /// `inputs[l]` is the input to layer `l`; the last entry is the output.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().expect("non-empty")
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// `c = alpha * a * b + beta * c` for row-major or transposed operands
/// described by their strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the slices cover every index addressed by the strides, checked
    // above for the row-major and transposed layouts used in this module.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Mlp {
    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self, ShapeError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(ShapeError::Sizes);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            activation,
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Uniform `(-1/sqrt(in), 1/sqrt(in))` initialization of weights and biases.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self, ShapeError> {
        let mut net = Self::zeros(sizes, activation)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let len = w[0] * w[1] + w[1];
            for p in &mut net.params[offset..offset + len] {
                *p = rng.random_range(-bound..bound);
            }
            offset += len;
        }
        Ok(net)
    }

    pub fn from_params(
        sizes: &[usize],
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self, ShapeError> {
        let net = Self::zeros(sizes, activation)?;
        if params.len() != net.params.len() {
            return Err(ShapeError::Params {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        Ok(Self { params, ..net })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated sizes")
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// `(in, out)` of every layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        self.sizes.windows(2).map(|w| (w[0], w[1])).collect()
    }

    fn layer_offsets(&self, l: usize) -> (usize, usize, usize, usize) {
        let start: usize = param_count(&self.sizes[..=l]);
        let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
        (start, start + fan_in * fan_out, fan_in, fan_out)
    }

    /// Forward pass over `batch` rows of `input` (row-major).
    pub fn forward(&self, input: &[f64], batch: usize) -> Result<ForwardCache, ShapeError> {
        if input.len() != batch * self.input_dim() {
            return Err(ShapeError::Input {
                expected: self.input_dim(),
                got: input.len() / batch.max(1),
            });
        }
        let mut inputs = Vec::with_capacity(self.sizes.len());
        let mut pre = Vec::with_capacity(self.num_layers().saturating_sub(1));
        inputs.push(input.to_vec());
        for l in 0..self.num_layers() {
            let (w_off, b_off, fan_in, fan_out) = self.layer_offsets(l);
            let bias = &self.params[b_off..b_off + fan_out];
            let mut z: Vec<f64> = (0..batch).flat_map(|_| bias.iter().copied()).collect();
            gemm(
                batch,
                fan_in,
                fan_out,
                &inputs[l],
                (fan_in as isize, 1),
                &self.params[w_off..b_off],
                (fan_out as isize, 1),
                1.0,
                &mut z,
            );
            if l + 1 < self.num_layers() {
                let a = z.iter().map(|&v| activate(self.activation, v)).collect();
                pre.push(z);
                inputs.push(a);
            } else {
                inputs.push(z);
            }
        }
        Ok(ForwardCache {
            batch,
            inputs,
            pre,
        })
    }

    /// Convenience forward pass for a single input row.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>, ShapeError> {
        Ok(self.forward(input, 1)?.output().to_vec())
    }

    /// Reverse pass. `grad_out` is dL/d(output) (`batch x out`). Returns the
    /// parameter gradient and dL/d(input).
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_out: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), ShapeError> {
        let batch = cache.batch;
        if grad_out.len() != batch * self.output_dim() {
            return Err(ShapeError::OutputGrad {
                expected: batch * self.output_dim(),
                got: grad_out.len(),
            });
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = grad_out.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (w_off, b_off, fan_in, fan_out) = self.layer_offsets(l);
            if l + 1 < self.num_layers() {
                for (d, z) in delta.iter_mut().zip(&cache.pre[l]) {
                    *d *= activate_grad(self.activation, *z);
                }
            }
            // dW = X^T delta
            gemm(
                fan_in,
                batch,
                fan_out,
                &cache.inputs[l],
                (1, fan_in as isize),
                &delta,
                (fan_out as isize, 1),
                0.0,
                &mut grads[w_off..b_off],
            );
            let db = &mut grads[b_off..b_off + fan_out];
            for row in delta.chunks_exact(fan_out) {
                for (g, d) in db.iter_mut().zip(row) {
                    *g += d;
                }
            }
            // dX = delta W^T
            let mut dx = vec![0.0; batch * fan_in];
            gemm(
                batch,
                fan_out,
                fan_in,
                &delta,
                (fan_out as isize, 1),
                &self.params[w_off..b_off],
                (1, fan_out as isize),
                0.0,
                &mut dx,
            );
            delta = dx;
        }
        Ok((grads, delta))
    }
}
