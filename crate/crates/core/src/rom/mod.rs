//! PCA reduced-order model: `x = P Π + x̄`, truncated to the leading
//! components, plus per-component [-1, 1] scaling of the score series.

mod persist;
mod scaling;
mod svd;

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::snapshots::{first_non_finite, ComponentLayout, SnapshotMatrix};

pub use persist::{load_rom, save_rom, save_scores_csv};
pub use scaling::{fit_scaling, scale, unscale, ScalingParams};

/// Truncation levels of the reconstruction experiment grid.
pub const TAU_GRID: [usize; 4] = [4, 8, 16, 32];

/// Singular values at or below this fraction of the largest count as zero.
pub const RANK_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// Temporal mean, length m.
    pub mean: RowDVector<f64>,
    /// r×m, rows orthonormal.
    pub eofs: DMatrix<f64>,
    /// n×r principal-component time series of the training rows.
    pub scores: DMatrix<f64>,
    /// Non-increasing, length r.
    pub singular_values: DVector<f64>,
    pub dt: f64,
    pub layout: ComponentLayout,
}

impl PcaModel {
    /// Number of retained components.
    pub fn rank(&self) -> usize {
        self.eofs.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.eofs.ncols()
    }

    fn check_tau(&self, tau: usize) -> Result<()> {
        if tau > self.rank() {
            return Err(Error::argument(format!(
                "tau = {tau} exceeds retained rank {}",
                self.rank()
            )));
        }
        Ok(())
    }

    /// `scores Π_τ + x̄` for an arbitrary number of rows.
    pub fn reconstruct_matrix(&self, scores: &DMatrix<f64>, tau: usize) -> Result<DMatrix<f64>> {
        self.check_tau(tau)?;
        if scores.ncols() != tau {
            return Err(Error::argument(format!(
                "score matrix has {} columns, expected tau = {tau}",
                scores.ncols()
            )));
        }
        let mut out = if tau == 0 {
            DMatrix::zeros(scores.nrows(), self.state_dim())
        } else {
            scores * self.eofs.rows(0, tau)
        };
        for mut row in out.row_iter_mut() {
            row += &self.mean;
        }
        Ok(out)
    }

    /// `(x − x̄) Π_τᵀ` for an arbitrary number of rows.
    pub fn project_matrix(&self, x: &DMatrix<f64>, tau: usize) -> Result<DMatrix<f64>> {
        self.check_tau(tau)?;
        if x.ncols() != self.state_dim() {
            return Err(Error::argument(format!(
                "state has {} columns, model expects {}",
                x.ncols(),
                self.state_dim()
            )));
        }
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= &self.mean;
        }
        Ok(centered * self.eofs.rows(0, tau).transpose())
    }

    /// Number of singular values above `RANK_RTOL` times the largest.
    pub fn numerical_rank(&self) -> usize {
        let Some(&top) = self.singular_values.iter().next() else {
            return 0;
        };
        self.singular_values.iter().filter(|&&s| s > RANK_RTOL * top).count()
    }

    /// Sum of squared singular values beyond `tau`.
    pub fn discarded_energy(&self, tau: usize) -> f64 {
        self.singular_values.iter().skip(tau).map(|s| s * s).sum()
    }
}

/// Fits the model by SVD of the temporally centred snapshot matrix.
///
/// EOFs are the right singular vectors and scores the projections of the
/// centred rows onto them (`U Σ`), keeping `r = min(n − 1, m)`
/// components. Each EOF is signed so its largest-magnitude entry is positive.
pub fn fit_pca(x: &SnapshotMatrix) -> Result<PcaModel> {
    let data = x.data();
    if let Some((r, c)) = first_non_finite(data) {
        return Err(Error::Numeric(format!("non-finite input at row {r}, column {c}")));
    }
    let (n, m) = data.shape();
    let mean = data.row_mean();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }

    let basis = svd::right_singular_basis(&centered)?;
    let projected = &centered * &basis;
    let sv: Vec<f64> = projected.column_iter().map(|c| c.norm()).collect();

    let mut order: Vec<usize> = (0..sv.len()).collect();
    // stable sort keeps rotation order among exact ties
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let r = (n - 1).min(m);
    order.truncate(r);

    let mut eofs = DMatrix::zeros(r, m);
    let mut singular_values = DVector::zeros(r);
    for (k, &src) in order.iter().enumerate() {
        let col = basis.column(src);
        let pivot = col
            .iter()
            .fold(0.0f64, |best, &v| if v.abs() > best.abs() { v } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        eofs.row_mut(k).copy_from(&(col.transpose() * sign));
        singular_values[k] = sv[src];
    }
    let scores = &centered * eofs.transpose();

    Ok(PcaModel {
        mean,
        eofs,
        scores,
        singular_values,
        dt: x.dt(),
        layout: x.layout(),
    })
}

/// `x_τ = P_τ Π_τ + x̄`.
pub fn reconstruct(model: &PcaModel, scores: &DMatrix<f64>, tau: usize) -> Result<SnapshotMatrix> {
    let out = model.reconstruct_matrix(scores, tau)?;
    SnapshotMatrix::new(out, model.dt, model.layout)
}

/// `(x_new − x̄) Π_τᵀ`.
pub fn project(model: &PcaModel, x_new: &SnapshotMatrix, tau: usize) -> Result<DMatrix<f64>> {
    model.project_matrix(x_new.data(), tau)
}

/// Mean absolute error between two equally shaped matrices.
pub fn mae(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "mae shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}
