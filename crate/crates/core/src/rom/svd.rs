//! Right singular vectors by Householder QR followed by one-sided Jacobi.
//!
//! nalgebra's bidiagonal SVD returns factors that do not recompose the input
//! (relative errors up to 1e-1) on a few percent of matrices with an exact
//! zero singular value, which every centred matrix with n ≤ m has. Jacobi
//! rotations stay accurate on rank-deficient input, and the basis they
//! accumulate is orthogonal by construction.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Columns of the returned m×k matrix are orthonormal, span the row space
/// of `a` (n×m), and make `a · V` column-orthogonal. k = min(n, m); the
/// columns are in no particular order.
pub(crate) fn right_singular_basis(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, m) = a.shape();
    if n >= m {
        // a = Q R, so a V = Q (R V) and V comes straight from R.
        let r = a.clone().qr().r();
        jacobi_columns(r)
    } else {
        // aᵀ = Q R, so a = Rᵀ Qᵀ and the basis is Q V for the rotations V of Rᵀ.
        let qr = a.transpose().qr();
        let v = jacobi_columns(qr.r().transpose())?;
        Ok(qr.q() * v)
    }
}

/// Rotates pairs of columns of the square matrix `w` until all are mutually
/// orthogonal to working precision, returning the accumulated rotation.
/// Columns shorter than `k ε ‖w‖` are rounding noise and are left alone;
/// rotating them against each other need not converge.
fn jacobi_columns(mut w: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = w.ncols();
    let mut v = DMatrix::<f64>::identity(k, k);
    let tol = f64::EPSILON * k as f64;
    let negligible = (tol * w.norm()).powi(2);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let (wp, wq) = (w.column(p), w.column(q));
                let alpha = wp.norm_squared();
                let beta = wq.norm_squared();
                let gamma = wp.dot(&wq);
                if alpha <= negligible || beta <= negligible || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            return Ok(v);
        }
    }
    Err(Error::Numeric(format!(
        "Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
    )))
}

fn rotate(x: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let rows = x.nrows();
    let data = x.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * rows);
    let cp = &mut head[p * rows..(p + 1) * rows];
    let cq = &mut tail[..rows];
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}
