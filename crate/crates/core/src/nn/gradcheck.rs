//! Central finite-difference verification of analytic gradients.

use nalgebra::DMatrix;
use rand::SeedableRng;

use super::{Mode, Network};
use crate::error::Result;
use crate::rng::Rng;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Denominator floor of the relative error. Central differences at
/// `DEFAULT_STEP` carry rounding noise near `1e-11` for O(1) losses, so
/// gradients below this are judged on absolute error instead.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

pub fn relative_error(fd: f64, analytic: f64) -> f64 {
    (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(REL_FLOOR)
}

/// Compares `analytic` against central differences of `loss` around
/// `params`. The step for parameter `i` is `step · max(1, |θ_i|)`.
pub fn check_flat<F>(params: &[f64], analytic: &[f64], mut loss: F, step: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient length");
    let mut theta = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        checked: params.len(),
    };
    for i in 0..params.len() {
        let h = step * params[i].abs().max(1.0);
        theta[i] = params[i] + h;
        let up = loss(&theta);
        theta[i] = params[i] - h;
        let down = loss(&theta);
        theta[i] = params[i];
        let fd = (up - down) / (2.0 * h);
        let err = relative_error(fd, analytic[i]);
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = i;
        }
    }
    report
}

#[derive(Debug, Clone, Copy)]
pub enum NetInput<'a> {
    Batch(&'a DMatrix<f64>),
    Sequence(&'a [DMatrix<f64>]),
}

fn run(net: &mut Network, input: NetInput<'_>, mode: Mode, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = Rng::seed_from_u64(seed);
    match input {
        NetInput::Batch(x) => net.forward(x, mode, Some(&mut rng)),
        NetInput::Sequence(xs) => net.forward_sequence(xs, mode, Some(&mut rng)),
    }
}

/// Checks every parameter of `net` for the scalar `loss` of its output.
/// `loss` returns the value and its gradient with respect to the output.
/// Dropout masks are reproduced by reseeding with `seed` on every pass.
pub fn gradient_check<L>(
    net: &Network,
    input: NetInput<'_>,
    loss: L,
    mode: Mode,
    seed: u64,
    step: f64,
) -> Result<GradCheckReport>
where
    L: Fn(&DMatrix<f64>) -> (f64, DMatrix<f64>),
{
    let mut work = net.clone();
    let out = run(&mut work, input, mode, seed)?;
    let (_, dy) = loss(&out);
    work.backward(&dy)?;
    let analytic = work.flat_grads();
    let params = work.flat_params();
    let mut failure = None;
    let report = check_flat(
        &params,
        &analytic,
        |theta| {
            work.set_flat_params(theta);
            match run(&mut work, input, mode, seed) {
                Ok(out) => loss(&out).0,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        step,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_matches() {
        let params = [1.5, -0.5];
        let analytic = [3.0, -1.0];
        let r = check_flat(&params, &analytic, |t| t[0] * t[0] + t[1] * t[1], DEFAULT_STEP);
        assert!(r.max_rel_error < 1e-8, "{r:?}");
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let r = check_flat(&[1.0], &[1.0], |t| t[0] * t[0], DEFAULT_STEP);
        assert!(r.max_rel_error > 0.4);
    }

    #[test]
    fn relative_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-7, 0.0) - 0.1).abs() < 1e-12);
    }
}
