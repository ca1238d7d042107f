use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const LEAKY_RELU_SLOPE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

pub fn leaky_relu(x: &DMatrix<f64>, slope: f64) -> DMatrix<f64> {
    x.map(|v| if v >= 0.0 { v } else { slope * v })
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Activation::LeakyRelu(slope) => leaky_relu(x, slope),
            Activation::Tanh => x.map(f64::tanh),
            Activation::Sigmoid => x.map(sigmoid),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationLayer {
    pub kind: Activation,
    // input for leaky relu, output for the saturating functions
    cache: Option<DMatrix<f64>>,
}

impl ActivationLayer {
    pub fn new(kind: Activation) -> Self {
        Self { kind, cache: None }
    }

    pub fn forward(&mut self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let y = self.kind.apply(x);
        self.cache = Some(match self.kind {
            Activation::LeakyRelu(_) => x.clone(),
            Activation::Tanh | Activation::Sigmoid => y.clone(),
        });
        y
    }

    pub fn backward(&mut self, dy: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let cached = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("activation backward called before forward".into()))?;
        if cached.shape() != dy.shape() {
            return Err(Error::argument("activation backward: gradient shape mismatch"));
        }
        Ok(match self.kind {
            Activation::LeakyRelu(slope) => dy.zip_map(cached, |g, x| if x >= 0.0 { g } else { slope * g }),
            Activation::Tanh => dy.zip_map(cached, |g, y| g * (1.0 - y * y)),
            Activation::Sigmoid => dy.zip_map(cached, |g, y| g * y * (1.0 - y)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_relu_values() {
        let x = DMatrix::from_row_slice(1, 3, &[2.0, -1.0, 0.0]);
        let y = leaky_relu(&x, LEAKY_RELU_SLOPE);
        assert_eq!(y[(0, 0)], 2.0);
        assert!((y[(0, 1)] + 0.3).abs() < 1e-15);
        assert_eq!(y[(0, 2)], 0.0);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }
}
