use nalgebra::DMatrix;

use super::{column_sums, Mode, Param};
use crate::error::{Error, Result};

pub const BN_MOMENTUM: f64 = 0.99;
pub const BN_EPSILON: f64 = 1e-5;

/// Per-feature batch normalisation. Running statistics follow
/// `running = momentum · running + (1 − momentum) · batch`; the batch variance
/// is the biased estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: DMatrix<f64>,
    pub running_var: DMatrix<f64>,
    pub epsilon: f64,
    pub momentum: f64,
    cache: Option<Cache>,
}

#[derive(Debug, Clone, PartialEq)]
enum Cache {
    Train { xhat: DMatrix<f64>, inv_std: Vec<f64> },
    Infer { inv_std: Vec<f64> },
}

impl BatchNorm {
    pub fn new(features: usize) -> Self {
        Self::with_hyper(features, BN_EPSILON, BN_MOMENTUM)
    }

    pub fn with_hyper(features: usize, epsilon: f64, momentum: f64) -> Self {
        assert!(epsilon >= 0.0, "epsilon must be non-negative");
        Self {
            gamma: Param::new(DMatrix::from_element(1, features, 1.0)),
            beta: Param::new(DMatrix::zeros(1, features)),
            running_mean: DMatrix::zeros(1, features),
            running_var: DMatrix::from_element(1, features, 1.0),
            epsilon,
            momentum,
            cache: None,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.value.ncols()
    }

    pub fn forward(&mut self, x: &DMatrix<f64>, mode: Mode) -> Result<DMatrix<f64>> {
        let (n, f) = x.shape();
        if f != self.features() {
            return Err(Error::argument(format!(
                "batch norm expects {} features, got {f}",
                self.features()
            )));
        }
        match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(Error::argument("batch norm in train mode needs a batch of at least 2"));
                }
                let mut xhat = DMatrix::zeros(n, f);
                let mut inv_std = vec![0.0; f];
                for c in 0..f {
                    let col = x.column(c);
                    let mean = col.sum() / n as f64;
                    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                    let is = 1.0 / (var + self.epsilon).sqrt();
                    inv_std[c] = is;
                    for r in 0..n {
                        xhat[(r, c)] = (x[(r, c)] - mean) * is;
                    }
                    self.running_mean[(0, c)] =
                        self.momentum * self.running_mean[(0, c)] + (1.0 - self.momentum) * mean;
                    self.running_var[(0, c)] = self.momentum * self.running_var[(0, c)] + (1.0 - self.momentum) * var;
                }
                let y = self.affine(&xhat);
                self.cache = Some(Cache::Train { xhat, inv_std });
                Ok(y)
            }
            Mode::Infer => {
                let inv_std: Vec<f64> = self
                    .running_var
                    .iter()
                    .map(|v| 1.0 / (v + self.epsilon).sqrt())
                    .collect();
                let xhat = DMatrix::from_fn(n, f, |r, c| (x[(r, c)] - self.running_mean[(0, c)]) * inv_std[c]);
                let y = self.affine(&xhat);
                self.cache = Some(Cache::Infer { inv_std });
                Ok(y)
            }
        }
    }

    fn affine(&self, xhat: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(xhat.nrows(), xhat.ncols(), |r, c| {
            self.gamma.value[(0, c)] * xhat[(r, c)] + self.beta.value[(0, c)]
        })
    }

    pub fn backward(&mut self, dy: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("batch norm backward called before forward".into()))?;
        let (n, f) = dy.shape();
        if f != self.features() {
            return Err(Error::argument("batch norm backward: gradient shape mismatch"));
        }
        match cache {
            Cache::Train { xhat, inv_std } => {
                if xhat.shape() != dy.shape() {
                    return Err(Error::argument("batch norm backward: gradient shape mismatch"));
                }
                self.gamma.grad = column_sums(&dy.component_mul(xhat));
                self.beta.grad = column_sums(dy);
                let mut dx = DMatrix::zeros(n, f);
                let nf = n as f64;
                for c in 0..f {
                    let g = self.gamma.value[(0, c)];
                    let sum_dy = self.beta.grad[(0, c)];
                    let sum_dy_xhat = self.gamma.grad[(0, c)];
                    for r in 0..n {
                        dx[(r, c)] = g * inv_std[c] / nf * (nf * dy[(r, c)] - sum_dy - xhat[(r, c)] * sum_dy_xhat);
                    }
                }
                Ok(dx)
            }
            Cache::Infer { inv_std } => {
                // parameter gradients are not needed on the inference path
                self.gamma.grad.fill(0.0);
                self.beta.grad.fill(0.0);
                Ok(DMatrix::from_fn(n, f, |r, c| {
                    dy[(r, c)] * self.gamma.value[(0, c)] * inv_std[c]
                }))
            }
        }
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.gamma, &self.beta]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.gamma, &mut self.beta]
    }
}

/// Stateful forward pass; train mode updates the running statistics.
pub fn batchnorm_forward(layer: &mut BatchNorm, x: &DMatrix<f64>, mode: Mode) -> Result<DMatrix<f64>> {
    layer.forward(x, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sample_hand_normalisation() {
        let mut bn = BatchNorm::with_hyper(1, 0.0, BN_MOMENTUM);
        let y = batchnorm_forward(&mut bn, &DMatrix::from_column_slice(2, 1, &[1.0, 3.0]), Mode::Train).unwrap();
        assert_eq!(y.as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn normalised_batch_passes_through() {
        let mut bn = BatchNorm::new(1);
        let x = DMatrix::from_column_slice(4, 1, &[-1.0, 1.0, -1.0, 1.0]);
        let y = bn.forward(&x, Mode::Train).unwrap();
        for (a, b) in y.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let mut bn = BatchNorm::new(2);
        let x = DMatrix::from_row_slice(3, 2, &[5.0, 1.0, 5.0, 2.0, 5.0, 3.0]);
        let y = bn.forward(&x, Mode::Train).unwrap();
        assert!(y.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn train_mode_rejects_single_sample() {
        let mut bn = BatchNorm::new(2);
        assert!(matches!(
            bn.forward(&DMatrix::zeros(1, 2), Mode::Train),
            Err(Error::Argument(_))
        ));
        assert!(bn.forward(&DMatrix::zeros(1, 2), Mode::Infer).is_ok());
    }

    #[test]
    fn running_stats_track_batches() {
        let mut bn = BatchNorm::with_hyper(1, 1e-5, 0.5);
        bn.forward(&DMatrix::from_column_slice(2, 1, &[1.0, 3.0]), Mode::Train)
            .unwrap();
        assert_eq!(bn.running_mean[(0, 0)], 1.0);
        assert_eq!(bn.running_var[(0, 0)], 1.0);
    }
}
