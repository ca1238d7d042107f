use nalgebra::DMatrix;
use rand::Rng as _;

use super::{add_row_bias, column_sums, glorot_limit, Param};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Fully connected layer, `y = x Wᵀ + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// out × in
    pub weight: Param,
    /// 1 × out
    pub bias: Param,
    input: Option<DMatrix<f64>>,
}

impl Dense {
    pub fn new(input: usize, output: usize, rng: &mut Rng) -> Self {
        let limit = glorot_limit(input, output);
        let w = DMatrix::from_fn(output, input, |_, _| rng.random_range(-limit..=limit));
        Self::from_parts(w, DMatrix::zeros(1, output))
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self::from_parts(DMatrix::zeros(output, input), DMatrix::zeros(1, output))
    }

    pub fn from_parts(weight: DMatrix<f64>, bias: DMatrix<f64>) -> Self {
        assert_eq!(bias.shape(), (1, weight.nrows()), "bias must be 1 x out");
        Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
            input: None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::argument(format!(
                "dense layer expects width {}, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        let mut y = x * self.weight.value.transpose();
        add_row_bias(&mut y, &self.bias.value);
        Ok(y)
    }

    pub fn forward(&mut self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let y = self.apply(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, dy: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = self
            .input
            .as_ref()
            .ok_or_else(|| Error::State("dense backward called before forward".into()))?;
        if dy.shape() != (x.nrows(), self.output_dim()) {
            return Err(Error::argument("dense backward: gradient shape mismatch"));
        }
        self.weight.grad = dy.transpose() * x;
        self.bias.grad = column_sums(dy);
        Ok(dy * &self.weight.value)
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

/// Stateless forward pass.
pub fn dense_forward(layer: &Dense, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    layer.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights() {
        let layer = Dense::from_parts(DMatrix::identity(3, 3), DMatrix::zeros(1, 3));
        let x = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 3.0, 0.5, 0.0, -1.0]);
        assert_eq!(dense_forward(&layer, &x).unwrap(), x);
    }

    #[test]
    fn hand_arithmetic() {
        let layer = Dense::from_parts(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
        );
        let y = dense_forward(&layer, &DMatrix::from_row_slice(1, 2, &[1.0, 1.0])).unwrap();
        assert_eq!(y.as_slice(), &[4.0, 8.0]);
    }

    #[test]
    fn width_mismatch() {
        let layer = Dense::zeros(3, 2);
        assert!(matches!(
            dense_forward(&layer, &DMatrix::zeros(1, 2)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn backward_without_forward_is_state_error() {
        let mut layer = Dense::zeros(3, 2);
        assert!(matches!(layer.backward(&DMatrix::zeros(1, 2)), Err(Error::State(_))));
    }
}
