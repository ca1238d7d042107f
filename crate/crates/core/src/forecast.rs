//! Autoregressive roll-out in latent space, decoding to physical space and
//! ensemble error curves over many starting points.
//!
//! A start index `s` seeds the forecaster with the true latents
//! `z_{s−N} … z_{s−1}`; forecast step `h` (1-based) predicts `z_{s+h−1}`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::aae::AaeModel;
use crate::alstm::{to_sequence, ForecasterModel};
use crate::error::{Error, Result};
use crate::rom::PcaModel;
use crate::rom::{scale, unscale, ScalingParams};
use crate::snapshots::SnapshotMatrix;
use crate::table::write_csv;

/// Anything that maps a batch of latent windows to the following deltas.
pub trait DeltaModel {
    fn time_lag(&self) -> usize;
    fn latent_dim(&self) -> usize;
    /// `seq` is time-major: `N` matrices of `batch × latent`.
    fn predict_deltas(&mut self, seq: &[DMatrix<f64>]) -> Result<DMatrix<f64>>;
}

impl DeltaModel for ForecasterModel {
    fn time_lag(&self) -> usize {
        ForecasterModel::time_lag(self)
    }

    fn latent_dim(&self) -> usize {
        ForecasterModel::latent_dim(self)
    }

    fn predict_deltas(&mut self, seq: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        ForecasterModel::predict_deltas(self, seq)
    }
}

/// Returns the true delta that follows the latent closest to each window's
/// last element. Forecasting with it adds no error on top of encoding and
/// decoding.
#[derive(Debug, Clone)]
pub struct TrueDeltaOracle {
    latents: DMatrix<f64>,
    time_lag: usize,
}

impl TrueDeltaOracle {
    pub fn new(latents: DMatrix<f64>, time_lag: usize) -> Result<Self> {
        if latents.nrows() < 2 {
            return Err(Error::argument("oracle needs at least two latents"));
        }
        Ok(Self { latents, time_lag })
    }
}

impl DeltaModel for TrueDeltaOracle {
    fn time_lag(&self) -> usize {
        self.time_lag
    }

    fn latent_dim(&self) -> usize {
        self.latents.ncols()
    }

    fn predict_deltas(&mut self, seq: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        let last = seq.last().ok_or_else(|| Error::argument("empty window"))?;
        let z = &self.latents;
        let mut out = DMatrix::zeros(last.nrows(), z.ncols());
        for b in 0..last.nrows() {
            let query = last.row(b);
            let k = (0..z.nrows() - 1)
                .min_by(|&i, &j| {
                    let di = (z.row(i) - query).norm_squared();
                    let dj = (z.row(j) - query).norm_squared();
                    di.total_cmp(&dj)
                })
                .expect("at least one candidate");
            out.row_mut(b).copy_from(&(z.row(k + 1) - z.row(k)));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub start: usize,
    /// Forecast latents, one row per completed step.
    pub latents: DMatrix<f64>,
    /// Decoded states, when requested.
    pub physical: Option<DMatrix<f64>>,
    /// 1-based step whose prediction was non-finite; the trajectory stops
    /// before it.
    pub diverged_at: Option<usize>,
}

/// Rolls every seed window forward `horizon` steps in one batch; each
/// prediction is appended to its window and the oldest entry dropped.
pub fn rollout_batch<M: DeltaModel + ?Sized>(
    model: &mut M,
    seeds: &[DMatrix<f64>],
    horizon: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let (n, d) = (model.time_lag(), model.latent_dim());
    if horizon == 0 {
        return Err(Error::argument("horizon must be >= 1"));
    }
    if let Some(bad) = seeds.iter().find(|s| s.shape() != (n, d)) {
        return Err(Error::argument(format!(
            "seed window is {}x{}, model expects {n}x{d}",
            bad.nrows(),
            bad.ncols()
        )));
    }
    let refs: Vec<&DMatrix<f64>> = seeds.iter().collect();
    let mut seq = to_sequence(&refs);
    let mut out = vec![DMatrix::zeros(horizon, d); seeds.len()];
    for h in 0..horizon {
        let delta = model.predict_deltas(&seq)?;
        let next = delta + seq.last().expect("non-empty window");
        for (b, traj) in out.iter_mut().enumerate() {
            traj.row_mut(h).copy_from(&next.row(b));
        }
        seq.remove(0);
        seq.push(next);
    }
    Ok(out)
}

fn truncate_non_finite(traj: DMatrix<f64>) -> (DMatrix<f64>, Option<usize>) {
    match traj.row_iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        Some(bad) => (traj.rows(0, bad).into_owned(), Some(bad + 1)),
        None => (traj, None),
    }
}

/// Single roll-out from an `N × latent` seed window.
pub fn rollout<M: DeltaModel + ?Sized>(
    model: &mut M,
    seed_window: &DMatrix<f64>,
    horizon: usize,
    start: usize,
) -> Result<RolloutResult> {
    let traj = rollout_batch(model, std::slice::from_ref(seed_window), horizon)?.remove(0);
    let (latents, diverged_at) = truncate_non_finite(traj);
    Ok(RolloutResult {
        start,
        latents,
        physical: None,
        diverged_at,
    })
}

fn stage(stage: &'static str, message: String) -> Error {
    Error::Pipeline { stage, message }
}

/// Maps latents to physical states: decoder, unscale, multiply by the
/// retained EOFs, add the temporal mean.
pub struct PhysicalDecoder<'a> {
    pub aae: &'a mut AaeModel,
    pub rom: &'a PcaModel,
    pub scaling: &'a ScalingParams,
}

impl PhysicalDecoder<'_> {
    pub fn decode(&mut self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let latent = self.aae.config.latent_dim;
        if z.ncols() != latent {
            return Err(stage(
                "decoder",
                format!("latent width {} does not match decoder input {latent}", z.ncols()),
            ));
        }
        let scaled = self.aae.decode(z).map_err(|e| stage("decoder", e.to_string()))?;
        if scaled.ncols() != self.scaling.width() {
            return Err(stage(
                "unscale",
                format!(
                    "decoder emits {} components, scaling covers {}",
                    scaled.ncols(),
                    self.scaling.width()
                ),
            ));
        }
        let scores = unscale(&scaled, self.scaling).map_err(|e| stage("unscale", e.to_string()))?;
        if scores.ncols() > self.rom.rank() {
            return Err(stage(
                "projection",
                format!(
                    "{} components exceed the retained rank {}",
                    scores.ncols(),
                    self.rom.rank()
                ),
            ));
        }
        self.rom
            .reconstruct_matrix(&scores, scores.ncols())
            .map_err(|e| stage("projection", e.to_string()))
    }

    /// Posterior means of the snapshots: project, scale, encode with `ε = 0`.
    pub fn encode(&mut self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let width = self.scaling.width();
        let scores = self
            .rom
            .project_matrix(x, width)
            .map_err(|e| stage("projection", e.to_string()))?;
        let scaled = scale(&scores, self.scaling).map_err(|e| stage("scale", e.to_string()))?;
        let (mu, _) = self.aae.encode(&scaled).map_err(|e| stage("encoder", e.to_string()))?;
        Ok(mu)
    }
}

/// Free-function form of [`PhysicalDecoder::decode`].
pub fn decode_to_physical(
    aae: &mut AaeModel,
    rom: &PcaModel,
    scaling: &ScalingParams,
    z: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    PhysicalDecoder { aae, rom, scaling }.decode(z)
}

/// Mean absolute error of one row pair, optionally restricted to a column
/// range.
fn row_mae(a: &DMatrix<f64>, ra: usize, b: &DMatrix<f64>, rb: usize, cols: std::ops::Range<usize>) -> f64 {
    let len = cols.len() as f64;
    cols.map(|c| (a[(ra, c)] - b[(rb, c)]).abs()).sum::<f64>() / len
}

/// Per-step error statistics over an ensemble of starts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleErrorCurve {
    pub model: String,
    pub starts: Vec<usize>,
    /// `per_start[i][h]`: MAE over all state entries of start `i` at step
    /// `h + 1`; infinite after a divergence.
    pub per_start: Vec<Vec<f64>>,
    /// `per_start_components[i][c][h]`.
    pub per_start_components: Vec<Vec<Vec<f64>>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// `component_mean[c][h]`.
    pub component_mean: Vec<Vec<f64>>,
    pub component_std: Vec<Vec<f64>>,
    pub diverged_at: Vec<Option<usize>>,
}

/// Mean and population standard deviation of each column of `rows`.
pub fn aggregate(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let Some(first) = rows.first() else {
        return (Vec::new(), Vec::new());
    };
    let n = rows.len() as f64;
    let mut mean = vec![0.0; first.len()];
    let mut std = vec![0.0; first.len()];
    for h in 0..first.len() {
        let m = rows.iter().map(|r| r[h]).sum::<f64>() / n;
        let s = if m.is_finite() {
            (rows.iter().map(|r| (r[h] - m) * (r[h] - m)).sum::<f64>() / n).sqrt()
        } else {
            f64::INFINITY
        };
        mean[h] = m;
        std[h] = s;
    }
    (mean, std)
}

impl EnsembleErrorCurve {
    fn from_parts(
        model: String,
        starts: Vec<usize>,
        per_start: Vec<Vec<f64>>,
        per_start_components: Vec<Vec<Vec<f64>>>,
        diverged_at: Vec<Option<usize>>,
    ) -> Self {
        let (mean, std) = aggregate(&per_start);
        let components = per_start_components.first().map_or(0, |c| c.len());
        let (component_mean, component_std) = (0..components)
            .map(|c| {
                let rows: Vec<Vec<f64>> = per_start_components.iter().map(|s| s[c].clone()).collect();
                aggregate(&rows)
            })
            .unzip();
        Self {
            model,
            starts,
            per_start,
            per_start_components,
            mean,
            std,
            component_mean,
            component_std,
            diverged_at,
        }
    }

    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    /// Columns: step, mean, std, then mean and std per state component.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut header: Vec<String> = vec!["step".into(), "mean".into(), "std".into()];
        for c in 0..self.component_mean.len() {
            header.push(format!("c{c}_mean"));
            header.push(format!("c{c}_std"));
        }
        write_csv(
            path,
            &header,
            (0..self.horizon()).map(|h| {
                let mut row = vec![(h + 1) as f64, self.mean[h], self.std[h]];
                for c in 0..self.component_mean.len() {
                    row.push(self.component_mean[c][h]);
                    row.push(self.component_std[c][h]);
                }
                row
            }),
        )
    }
}

fn check_starts(starts: &[usize], time_lag: usize, horizon: usize, series_len: usize) -> Result<()> {
    if starts.is_empty() {
        return Err(Error::argument("no ensemble starts given"));
    }
    if horizon == 0 {
        return Err(Error::argument("horizon must be >= 1"));
    }
    let bad: Vec<usize> = starts
        .iter()
        .copied()
        .filter(|&s| s < time_lag || s + horizon > series_len)
        .collect();
    if bad.is_empty() {
        return Ok(());
    }
    let feasible = if series_len >= time_lag + horizon {
        format!("feasible starts are {}..={}", time_lag, series_len - horizon)
    } else {
        "no start is feasible".to_string()
    };
    Err(Error::argument(format!(
        "starts {bad:?} do not fit time lag {time_lag} and horizon {horizon} in a series of {series_len}; {feasible}"
    )))
}

fn error_curves(
    name: &str,
    starts: &[usize],
    decoded: &[(DMatrix<f64>, Option<usize>)],
    truth: &SnapshotMatrix,
    horizon: usize,
) -> EnsembleErrorCurve {
    let components = truth.layout().components as usize;
    let x = truth.data();
    let mut per_start = Vec::with_capacity(starts.len());
    let mut per_comp = Vec::with_capacity(starts.len());
    let mut diverged = Vec::with_capacity(starts.len());
    for (&s, (phys, div)) in starts.iter().zip(decoded) {
        let mut curve = vec![f64::INFINITY; horizon];
        let mut comp = vec![vec![f64::INFINITY; horizon]; components];
        for h in 0..phys.nrows() {
            curve[h] = row_mae(phys, h, x, s + h, 0..truth.m());
            for (c, cc) in comp.iter_mut().enumerate() {
                cc[h] = row_mae(phys, h, x, s + h, truth.component_range(c));
            }
        }
        per_start.push(curve);
        per_comp.push(comp);
        diverged.push(*div);
    }
    EnsembleErrorCurve::from_parts(name.to_string(), starts.to_vec(), per_start, per_comp, diverged)
}

/// Rolls each model out from every start with identical seed windows and
/// scores the decoded forecasts against `truth`.
pub fn ensemble_evaluate(
    models: &mut [(&str, &mut dyn DeltaModel)],
    latents: &DMatrix<f64>,
    truth: &SnapshotMatrix,
    decoder: &mut PhysicalDecoder<'_>,
    starts: &[usize],
    horizon: usize,
) -> Result<Vec<EnsembleErrorCurve>> {
    if latents.nrows() != truth.n() {
        return Err(Error::argument(format!(
            "{} latents for {} snapshots",
            latents.nrows(),
            truth.n()
        )));
    }
    let mut curves = Vec::with_capacity(models.len());
    for (name, model) in models.iter_mut() {
        let n = model.time_lag();
        check_starts(starts, n, horizon, truth.n())?;
        let seeds: Vec<DMatrix<f64>> = starts.iter().map(|&s| latents.rows(s - n, n).into_owned()).collect();
        let trajs = rollout_batch(&mut **model, &seeds, horizon)?;
        let mut decoded = Vec::with_capacity(trajs.len());
        for traj in trajs {
            let (lat, div) = truncate_non_finite(traj);
            let phys = if lat.nrows() > 0 {
                decoder.decode(&lat)?
            } else {
                DMatrix::zeros(0, truth.m())
            };
            decoded.push((phys, div));
        }
        curves.push(error_curves(name, starts, &decoded, truth, horizon));
    }
    Ok(curves)
}

/// Error of decoding the true latents themselves at the steps a forecast
/// from each start would cover: the floor any forecaster sits on.
pub fn reconstruction_curve(
    latents: &DMatrix<f64>,
    truth: &SnapshotMatrix,
    decoder: &mut PhysicalDecoder<'_>,
    starts: &[usize],
    horizon: usize,
    time_lag: usize,
) -> Result<EnsembleErrorCurve> {
    check_starts(starts, time_lag, horizon, truth.n())?;
    let mut decoded = Vec::with_capacity(starts.len());
    for &s in starts {
        decoded.push((decoder.decode(&latents.rows(s, horizon).into_owned())?, None));
    }
    Ok(error_curves("reconstruction", starts, &decoded, truth, horizon))
}

/// Pairwise comparison of two or more ensemble curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub models: Vec<String>,
    pub horizon: usize,
    /// Per-step threshold used for the divergence step.
    pub threshold: Vec<f64>,
    /// `differences[i][h] = mean_i[h] − mean_0[h]` for every model `i`.
    pub differences: Vec<Vec<f64>>,
    /// First 1-based step at which each model's mean exceeds the threshold.
    pub divergence_step: Vec<Option<usize>>,
    /// Name of the lowest-mean model per step, or `"tie"`.
    pub winner_per_step: Vec<String>,
    pub winner_at_horizon: String,
    pub mean_at_horizon: Vec<f64>,
}

pub const TIE: &str = "tie";

fn winner(curves: &[EnsembleErrorCurve], h: usize) -> String {
    let best = curves.iter().map(|c| c.mean[h]).fold(f64::INFINITY, f64::min);
    let at_best: Vec<&EnsembleErrorCurve> = curves.iter().filter(|c| c.mean[h] == best).collect();
    match at_best.as_slice() {
        [only] => only.model.clone(),
        _ => TIE.to_string(),
    }
}

/// First 1-based step with `mean > threshold`.
pub fn divergence_step(mean: &[f64], threshold: &[f64]) -> Option<usize> {
    mean.iter().zip(threshold).position(|(m, t)| m > t).map(|h| h + 1)
}

pub fn compare_report(curves: &[EnsembleErrorCurve], threshold: &[f64]) -> Result<ComparisonReport> {
    if curves.len() < 2 {
        return Err(Error::argument("comparison needs at least two curves"));
    }
    let horizon = curves[0].horizon();
    if let Some(bad) = curves.iter().find(|c| c.horizon() != horizon) {
        return Err(Error::argument(format!(
            "curve `{}` has horizon {}, expected {horizon}",
            bad.model,
            bad.horizon()
        )));
    }
    if threshold.len() != horizon {
        return Err(Error::argument(format!(
            "threshold has {} steps, curves have {horizon}",
            threshold.len()
        )));
    }
    let base = &curves[0].mean;
    Ok(ComparisonReport {
        models: curves.iter().map(|c| c.model.clone()).collect(),
        horizon,
        threshold: threshold.to_vec(),
        differences: curves
            .iter()
            .map(|c| c.mean.iter().zip(base).map(|(a, b)| a - b).collect())
            .collect(),
        divergence_step: curves.iter().map(|c| divergence_step(&c.mean, threshold)).collect(),
        winner_per_step: (0..horizon).map(|h| winner(curves, h)).collect(),
        winner_at_horizon: winner(curves, horizon - 1),
        mean_at_horizon: curves.iter().map(|c| c.mean[horizon - 1]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aae::AaeConfig;
    use crate::nn::{Dense, Layer, Network};
    use crate::rom::fit_pca;
    use crate::rom::fit_scaling;
    use crate::snapshots::ComponentLayout;

    /// Predicts a fixed delta for every window.
    struct ConstantDelta {
        delta: DMatrix<f64>,
        lag: usize,
    }

    impl DeltaModel for ConstantDelta {
        fn time_lag(&self) -> usize {
            self.lag
        }
        fn latent_dim(&self) -> usize {
            self.delta.ncols()
        }
        fn predict_deltas(&mut self, seq: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
            let b = seq[0].nrows();
            Ok(DMatrix::from_fn(b, self.delta.ncols(), |_, c| self.delta[(0, c)]))
        }
    }

    #[test]
    fn zero_delta_rollout_is_constant() {
        let mut m = ConstantDelta {
            delta: DMatrix::zeros(1, 2),
            lag: 3,
        };
        let seed = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 1.0, 2.0, -3.0]);
        let r = rollout(&mut m, &seed, 10, 3).unwrap();
        assert_eq!(r.latents.nrows(), 10);
        assert!(r.latents.row_iter().all(|row| row[0] == 2.0 && row[1] == -3.0));
        assert_eq!(r.diverged_at, None);
    }

    #[test]
    fn exact_delta_continues_line() {
        let mut m = ConstantDelta {
            delta: DMatrix::from_element(1, 1, 1.0),
            lag: 5,
        };
        let seed = DMatrix::from_fn(5, 1, |r, _| r as f64);
        let r = rollout(&mut m, &seed, 100, 5).unwrap();
        for h in 0..100 {
            assert_eq!(r.latents[(h, 0)], (5 + h) as f64);
        }
    }

    #[test]
    fn non_finite_prediction_truncates() {
        let mut m = ConstantDelta {
            delta: DMatrix::from_element(1, 1, f64::MAX),
            lag: 1,
        };
        let r = rollout(&mut m, &DMatrix::from_element(1, 1, 0.0), 5, 1).unwrap();
        assert_eq!(r.latents.nrows(), 1);
        assert_eq!(r.diverged_at, Some(2));
    }

    #[test]
    fn seed_shape_is_checked() {
        let mut m = ConstantDelta {
            delta: DMatrix::zeros(1, 2),
            lag: 3,
        };
        assert!(rollout(&mut m, &DMatrix::zeros(2, 2), 4, 3).is_err());
        assert!(rollout(&mut m, &DMatrix::zeros(3, 2), 0, 3).is_err());
    }

    #[test]
    fn aggregate_single_start_has_zero_std() {
        let (m, s) = aggregate(&[vec![1.0, 2.0, 3.0]]);
        assert_eq!(m, vec![1.0, 2.0, 3.0]);
        assert_eq!(s, vec![0.0; 3]);
        let (m, s) = aggregate(&[vec![1.0], vec![3.0]]);
        assert_eq!((m[0], s[0]), (2.0, 1.0));
    }

    fn curve(name: &str, mean: Vec<f64>) -> EnsembleErrorCurve {
        EnsembleErrorCurve::from_parts(name.into(), vec![0], vec![mean], vec![vec![]], vec![None])
    }

    #[test]
    fn identical_curves_tie() {
        let a = curve("a", vec![1.0, 2.0]);
        let b = curve("b", vec![1.0, 2.0]);
        let r = compare_report(&[a, b], &[10.0, 10.0]).unwrap();
        assert!(r.differences.iter().flatten().all(|&d| d == 0.0));
        assert_eq!(r.winner_at_horizon, TIE);
        assert!(r.winner_per_step.iter().all(|w| w == TIE));
        assert_eq!(r.divergence_step, vec![None, None]);
    }

    #[test]
    fn dominated_curve_loses_everywhere() {
        let a = curve("a", vec![1.0, 2.0, 3.0]);
        let b = curve("b", vec![1.5, 2.5, 3.5]);
        let r = compare_report(&[a, b], &[1.2, 1.2, 1.2]).unwrap();
        assert!(r.winner_per_step.iter().all(|w| w == "a"));
        assert_eq!(r.divergence_step, vec![Some(2), Some(1)]);
        assert!(compare_report(&[curve("a", vec![1.0])], &[1.0]).is_err());
        assert!(compare_report(&[curve("a", vec![1.0]), curve("b", vec![1.0, 2.0])], &[1.0]).is_err());
    }

    /// Width-2 trace: a zero-weight decoder emits scaled PCs 0, which
    /// unscale to each column's midrange, then go through Π and x̄.
    #[test]
    fn zero_decoder_traces_through_stages() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 3.0, 2.0, 5.0, 1.0]);
        let snap = SnapshotMatrix::new(x, 1.0, ComponentLayout::SCALAR).unwrap();
        let rom = fit_pca(&snap).unwrap();
        let scaling = fit_scaling(&rom.scores).unwrap();
        let mut cfg = AaeConfig::new(2, 1);
        cfg.encoder_widths = vec![1];
        cfg.decoder_widths = vec![];
        let mut aae = AaeModel::new(cfg).unwrap();
        aae.decoder = Network::new(vec![Layer::Dense(Dense::zeros(1, 2))]);
        let out = decode_to_physical(&mut aae, &rom, &scaling, &DMatrix::from_element(1, 1, 0.4)).unwrap();
        let mid = DMatrix::from_fn(1, 2, |_, c| 0.5 * (scaling.min[c] + scaling.max[c]));
        let expected = mid * &rom.eofs + &rom.mean;
        assert!((out - expected).amax() < 1e-14);
    }

    #[test]
    fn stage_mismatch_names_stage() {
        let x = DMatrix::from_fn(3, 3, |r, c| ((r * 3 + c) as f64).sin());
        let snap = SnapshotMatrix::new(x, 1.0, ComponentLayout::SCALAR).unwrap();
        let rom = fit_pca(&snap).unwrap();
        assert_eq!(rom.rank(), 2);
        let scaling = fit_scaling(&DMatrix::from_fn(2, 3, |r, c| (r + c) as f64)).unwrap();
        let mut aae = AaeModel::new(AaeConfig::new(3, 2)).unwrap();
        let err = decode_to_physical(&mut aae, &rom, &scaling, &DMatrix::zeros(1, 5)).unwrap_err();
        assert!(matches!(err, Error::Pipeline { stage: "decoder", .. }));
        let err = decode_to_physical(&mut aae, &rom, &scaling, &DMatrix::zeros(1, 2)).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Pipeline {
                    stage: "projection",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn infeasible_starts_list_range() {
        let err = check_starts(&[3, 98], 5, 10, 100).unwrap_err().to_string();
        assert!(err.contains("5..=90"), "{err}");
    }
}
