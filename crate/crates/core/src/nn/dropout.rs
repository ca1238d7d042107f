use nalgebra::DMatrix;
use rand::Rng as _;

use super::Mode;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Inverted dropout: survivors are scaled by `1 / (1 − rate)` at train time so
/// inference is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Dropout {
    pub rate: f64,
    mask: Option<Option<DMatrix<f64>>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::argument(format!("dropout rate must be in [0, 1), got {rate}")));
        }
        Ok(Self { rate, mask: None })
    }

    pub fn forward(&mut self, x: &DMatrix<f64>, mode: Mode, rng: Option<&mut Rng>) -> Result<DMatrix<f64>> {
        if mode == Mode::Infer || self.rate == 0.0 {
            self.mask = Some(None);
            return Ok(x.clone());
        }
        let rng = rng.ok_or_else(|| Error::State("dropout in train mode needs an rng".into()))?;
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        let mask = DMatrix::from_fn(x.nrows(), x.ncols(), |_, _| {
            if rng.random::<f64>() < keep {
                scale
            } else {
                0.0
            }
        });
        let y = x.component_mul(&mask);
        self.mask = Some(Some(mask));
        Ok(y)
    }

    pub fn backward(&mut self, dy: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.mask {
            None => Err(Error::State("dropout backward called before forward".into())),
            Some(None) => Ok(dy.clone()),
            Some(Some(mask)) => {
                if mask.shape() != dy.shape() {
                    return Err(Error::argument("dropout backward: gradient shape mismatch"));
                }
                Ok(dy.component_mul(mask))
            }
        }
    }
}

pub fn dropout_forward(x: &DMatrix<f64>, rate: f64, mode: Mode, rng: &mut Rng) -> Result<DMatrix<f64>> {
    Dropout::new(rate)?.forward(x, mode, Some(rng))
}
