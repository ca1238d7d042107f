use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Per-component affine map of training scores onto [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingParams {
    pub min: DVector<f64>,
    pub max: DVector<f64>,
    pub constant: Vec<bool>,
}

impl ScalingParams {
    pub fn width(&self) -> usize {
        self.min.len()
    }

    pub fn constant_count(&self) -> usize {
        self.constant.iter().filter(|&&c| c).count()
    }

    fn check(&self, scores: &DMatrix<f64>) -> Result<()> {
        if scores.ncols() != self.width() {
            return Err(Error::argument(format!(
                "scores have {} columns, scaling fitted on {}",
                scores.ncols(),
                self.width()
            )));
        }
        Ok(())
    }
}

pub fn fit_scaling(scores: &DMatrix<f64>) -> Result<ScalingParams> {
    if scores.nrows() == 0 {
        return Err(Error::argument("cannot fit scaling on zero rows"));
    }
    let min = DVector::from_iterator(scores.ncols(), scores.column_iter().map(|c| c.min()));
    let max = DVector::from_iterator(scores.ncols(), scores.column_iter().map(|c| c.max()));
    let constant = min.iter().zip(max.iter()).map(|(lo, hi)| hi == lo).collect();
    Ok(ScalingParams { min, max, constant })
}

/// Training min maps to −1 and max to +1; constant columns map to 0.
/// Values outside the training range are not clamped.
pub fn scale(scores: &DMatrix<f64>, params: &ScalingParams) -> Result<DMatrix<f64>> {
    params.check(scores)?;
    Ok(DMatrix::from_fn(scores.nrows(), scores.ncols(), |r, c| {
        if params.constant[c] {
            0.0
        } else {
            2.0 * (scores[(r, c)] - params.min[c]) / (params.max[c] - params.min[c]) - 1.0
        }
    }))
}

pub fn unscale(scaled: &DMatrix<f64>, params: &ScalingParams) -> Result<DMatrix<f64>> {
    params.check(scaled)?;
    Ok(DMatrix::from_fn(scaled.nrows(), scaled.ncols(), |r, c| {
        let (lo, hi) = (params.min[c], params.max[c]);
        if params.constant[c] {
            0.5 * (lo + hi)
        } else {
            lo + 0.5 * (scaled[(r, c)] + 1.0) * (hi - lo)
        }
    }))
}
