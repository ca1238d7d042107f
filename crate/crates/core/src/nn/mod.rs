//! Small neural-network substrate with hand-written reverse-mode gradients.
//!
//! Batches are row-major in the sense that each row of a matrix is one
//! sample. Every layer records the intermediates of its last forward pass and
//! consumes them in `backward`.

mod activation;
mod batchnorm;
pub mod checkpoint;
mod dense;
mod dropout;
pub mod gradcheck;
mod loss;
mod lstm;
mod nadam;
mod network;

use nalgebra::DMatrix;

pub use activation::{leaky_relu, sigmoid, Activation, ActivationLayer, LEAKY_RELU_SLOPE};
pub use batchnorm::{batchnorm_forward, BatchNorm, BN_EPSILON, BN_MOMENTUM};
pub use dense::{dense_forward, Dense};
pub use dropout::{dropout_forward, Dropout};
pub use loss::{bce_grad, bce_loss, bce_with_logits, mse_grad, mse_loss, BCE_EPSILON};
pub use lstm::{lstm_step, Lstm};
pub use nadam::{nadam_step, NadamConfig, NadamState, Optimizer};
pub use network::{gather_flat, scatter_flat, InputGrad, Layer, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// A trainable tensor and the gradient written by the last backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: DMatrix<f64>,
    pub grad: DMatrix<f64>,
}

impl Param {
    pub fn new(value: DMatrix<f64>) -> Self {
        let grad = DMatrix::zeros(value.nrows(), value.ncols());
        Self { value, grad }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Uniform Glorot bound.
pub(crate) fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub(crate) fn add_row_bias(y: &mut DMatrix<f64>, bias: &DMatrix<f64>) {
    for mut row in y.row_iter_mut() {
        row += bias;
    }
}

pub(crate) fn column_sums(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(1, m.ncols(), |_, c| m.column(c).sum())
}
