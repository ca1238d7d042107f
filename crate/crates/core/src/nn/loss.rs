use nalgebra::DMatrix;

use super::activation::sigmoid;
use crate::error::{Error, Result};

/// Probabilities are clamped to `[ε, 1 − ε]` before taking logs.
pub const BCE_EPSILON: f64 = 1e-7;

fn same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::argument(format!(
            "{what}: shape mismatch {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

pub fn mse_loss(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    same_shape(a, b, "mse")?;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// Gradient of `mse_loss(a, b)` with respect to `a`.
pub fn mse_grad(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    same_shape(a, b, "mse")?;
    let scale = 2.0 / a.len() as f64;
    Ok((a - b) * scale)
}

fn bce_term(p: f64, target: f64) -> f64 {
    let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// Mean binary cross-entropy of probabilities against {0, 1} targets.
pub fn bce_loss(p: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<f64> {
    same_shape(p, target, "bce")?;
    Ok(p.iter().zip(target.iter()).map(|(&p, &t)| bce_term(p, t)).sum::<f64>() / p.len() as f64)
}

/// Gradient of `bce_loss` with respect to `p`; zero where the clamp is active.
pub fn bce_grad(p: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    same_shape(p, target, "bce")?;
    let n = p.len() as f64;
    Ok(p.zip_map(target, |p, t| {
        if !(BCE_EPSILON..=1.0 - BCE_EPSILON).contains(&p) {
            0.0
        } else {
            -(t / p - (1.0 - t) / (1.0 - p)) / n
        }
    }))
}

/// BCE of `sigmoid(logits)` against a constant label, with the gradient taken
/// with respect to the logits, `(σ(l) − label) / N`. The value uses the same
/// clamp as `bce_loss`; the gradient does not vanish when the sigmoid
/// saturates.
pub fn bce_with_logits(logits: &DMatrix<f64>, label: f64) -> (f64, DMatrix<f64>) {
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let grad = logits.map(|l| {
        let p = sigmoid(l);
        loss += bce_term(p, label);
        (p - label) / n
    });
    (loss / n, grad)
}
