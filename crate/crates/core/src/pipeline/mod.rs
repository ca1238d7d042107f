//! Config-driven commands that run the pipeline stage by stage.
//!
//! Each command reads upstream artifacts from the output directory, writes
//! its own files into a subdirectory and records a manifest there. Layout:
//!
//! ```text
//! <out>/data/snapshots.romsnap
//! <out>/rom/rom.rompca, truncation.csv, scores.csv, summary.json
//! <out>/aae/aae.romnn, training_log.csv, latents.csv, summary.json
//! <out>/forecaster-{adversarial,classic}/forecaster.romnn, training_log.csv
//! <out>/evaluation/curve_*.csv, comparison.json
//! <out>/fig2/top_per_step.csv, top_summary.csv, bottom_*.csv, comparison.json
//! ```

pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

pub use config::{DataSource, RunConfig, StageSeeds};
use manifest::{write_json, write_manifest};

use crate::aae::{train_aae, AaeModel};
use crate::alstm::{make_windows, train_forecaster, ForecasterMode, ForecasterModel};
use crate::error::{Error, Result};
use crate::forecast::{
    compare_report, ensemble_evaluate, reconstruction_curve, ComparisonReport, DeltaModel, EnsembleErrorCurve,
    PhysicalDecoder,
};
use crate::rom::{fit_pca, fit_scaling, load_rom, mae, save_rom, save_scores_csv, scale, PcaModel, ScalingParams};
use crate::snapshots::{generate_synthetic_flow, load_snapshots, save_snapshots, save_snapshots_csv, SnapshotMatrix};
use crate::table::write_csv;

pub const DATA_DIR: &str = "data";
pub const ROM_DIR: &str = "rom";
pub const AAE_DIR: &str = "aae";
pub const EVAL_DIR: &str = "evaluation";
pub const FIG2_DIR: &str = "fig2";

const SNAPSHOTS: &str = "data/snapshots.romsnap";
const ROM_FILE: &str = "rom/rom.rompca";
const AAE_FILE: &str = "aae/aae.romnn";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GenData,
    FitRom,
    TrainAae,
    TrainForecaster(ForecasterMode),
    Evaluate,
    ReproduceFig2,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::FitRom => "fit-rom",
            Command::TrainAae => "train-aae",
            Command::TrainForecaster(ForecasterMode::Adversarial) => "train-forecaster --mode adversarial",
            Command::TrainForecaster(ForecasterMode::Classic) => "train-forecaster --mode classic",
            Command::Evaluate => "evaluate",
            Command::ReproduceFig2 => "reproduce-fig2",
        }
    }

    /// Every command in dependency order.
    pub fn all() -> [Command; 7] {
        [
            Command::GenData,
            Command::FitRom,
            Command::TrainAae,
            Command::TrainForecaster(ForecasterMode::Adversarial),
            Command::TrainForecaster(ForecasterMode::Classic),
            Command::Evaluate,
            Command::ReproduceFig2,
        ]
    }
}

/// Directory a command wrote and the files in it.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub dir: PathBuf,
    pub artifacts: Vec<String>,
}

pub fn forecaster_dir(mode: ForecasterMode) -> String {
    format!("forecaster-{}", mode.name())
}

fn forecaster_file(mode: ForecasterMode) -> String {
    format!("{}/forecaster.romnn", forecaster_dir(mode))
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<CommandOutput> {
    log::info!("running {}", cmd.name());
    match cmd {
        Command::GenData => gen_data(cfg),
        Command::FitRom => fit_rom_cmd(cfg),
        Command::TrainAae => train_aae_cmd(cfg),
        Command::TrainForecaster(mode) => train_forecaster_cmd(cfg, mode),
        Command::Evaluate => evaluate_cmd(cfg),
        Command::ReproduceFig2 => reproduce_fig2_cmd(cfg),
    }
}

/// Runs every command in order.
pub fn run_all(cfg: &RunConfig) -> Result<Vec<CommandOutput>> {
    Command::all().into_iter().map(|c| run(c, cfg)).collect()
}

fn stage_dir(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    let dir = cfg.output_dir.join(name);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn require(cfg: &RunConfig, rel: &str, command: &'static str) -> Result<PathBuf> {
    let path = cfg.output_dir.join(rel);
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact { path, command })
    }
}

fn header(first: &str, prefix: &str, count: usize) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain((0..count).map(|i| format!("{prefix}{i}")))
        .collect()
}

/// Number of leading snapshots used for fitting.
pub fn train_rows(cfg: &RunConfig, n: usize) -> Result<usize> {
    let k = ((n as f64) * cfg.rom.train_fraction).round() as usize;
    if k < 2 || k >= n {
        return Err(Error::argument(format!(
            "rom.train_fraction {} leaves {k} of {n} snapshots for fitting; need at least 2 and one held out",
            cfg.rom.train_fraction
        )));
    }
    Ok(k)
}

/// Everything downstream of the ROM fit.
pub struct Artifacts {
    pub data: SnapshotMatrix,
    pub n_train: usize,
    pub rom: PcaModel,
    pub scaling: ScalingParams,
}

impl Artifacts {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let data = load_snapshots(&require(cfg, SNAPSHOTS, "gen-data")?)?;
        let rom_path = require(cfg, ROM_FILE, "fit-rom")?;
        let (rom, scaling) = load_rom(&rom_path)?;
        let scaling = scaling.ok_or_else(|| Error::format(&rom_path, "no scaling section"))?;
        let n_train = train_rows(cfg, data.n())?;
        Ok(Self {
            data,
            n_train,
            rom,
            scaling,
        })
    }

    /// Principal components fed to the autoencoder, scaled to [-1, 1].
    pub fn scaled_scores(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let scores = self.rom.project_matrix(x, self.scaling.width())?;
        scale(&scores, &self.scaling)
    }

    pub fn train(&self) -> DMatrix<f64> {
        self.data.data().rows(0, self.n_train).into_owned()
    }

    pub fn test(&self) -> DMatrix<f64> {
        let n = self.data.n();
        self.data.data().rows(self.n_train, n - self.n_train).into_owned()
    }

    pub fn decoder<'a>(&'a self, aae: &'a mut AaeModel) -> PhysicalDecoder<'a> {
        PhysicalDecoder {
            aae,
            rom: &self.rom,
            scaling: &self.scaling,
        }
    }
}

fn load_aae(cfg: &RunConfig) -> Result<AaeModel> {
    AaeModel::load(&require(cfg, AAE_FILE, "train-aae")?)
}

fn load_forecaster(cfg: &RunConfig, mode: ForecasterMode) -> Result<ForecasterModel> {
    let cmd = Command::TrainForecaster(mode).name();
    ForecasterModel::load(&require(cfg, &forecaster_file(mode), cmd)?)
}

pub fn gen_data(cfg: &RunConfig) -> Result<CommandOutput> {
    let x = match cfg.data.source {
        DataSource::Synthetic => generate_synthetic_flow(&cfg.synthetic_config())?,
        DataSource::File => {
            let path = cfg
                .data
                .path
                .as_ref()
                .ok_or_else(|| Error::Config(vec!["data.path: required when data.source = \"file\"".into()]))?;
            load_snapshots(path)?
        }
    };
    let dir = stage_dir(cfg, DATA_DIR)?;
    save_snapshots(&x, &dir.join("snapshots.romsnap"))?;
    let mut artifacts = vec!["snapshots.romsnap".to_string()];
    if cfg.data.export_csv {
        save_snapshots_csv(&x, &dir.join("snapshots.csv"))?;
        artifacts.push("snapshots.csv".into());
    }
    write_manifest(&cfg.output_dir, &dir, Command::GenData.name(), cfg, &[], &artifacts)?;
    log::info!("wrote {} snapshots of width {}", x.n(), x.m());
    Ok(CommandOutput { dir, artifacts })
}

#[derive(Debug, Serialize)]
struct RomSummary {
    n_train: usize,
    n_test: usize,
    rank: usize,
    numerical_rank: usize,
    singular_values: Vec<f64>,
}

/// PCA truncation error for every `τ` in the grid that the rank allows:
/// `(τ, train MAE, held-out MAE, discarded energy fraction)`.
pub fn truncation_table(a: &Artifacts, taus: &[usize]) -> Result<Vec<[f64; 4]>> {
    let (train, test) = (a.train(), a.test());
    let total = a.rom.discarded_energy(0);
    let mut rows = Vec::new();
    for &tau in taus {
        if tau > a.rom.rank() {
            log::warn!("tau = {tau} exceeds the retained rank {}; skipped", a.rom.rank());
            continue;
        }
        let err = |x: &DMatrix<f64>| -> Result<f64> {
            let p = a.rom.project_matrix(x, tau)?;
            Ok(mae(&a.rom.reconstruct_matrix(&p, tau)?, x))
        };
        let frac = if total > 0.0 {
            a.rom.discarded_energy(tau) / total
        } else {
            0.0
        };
        rows.push([tau as f64, err(&train)?, err(&test)?, frac]);
    }
    Ok(rows)
}

fn fit_rom_cmd(cfg: &RunConfig) -> Result<CommandOutput> {
    let data = load_snapshots(&require(cfg, SNAPSHOTS, "gen-data")?)?;
    let n_train = train_rows(cfg, data.n())?;
    let rom = fit_pca(&data.rows(0..n_train)?)?;
    let k = rom.numerical_rank();
    if k == 0 {
        return Err(Error::Numeric("training snapshots have no variance".into()));
    }
    let scores = rom.scores.columns(0, k).into_owned();
    let scaling = fit_scaling(&scores)?;
    let dir = stage_dir(cfg, ROM_DIR)?;
    save_rom(&dir.join("rom.rompca"), &rom, Some(&scaling))?;
    save_scores_csv(&dir.join("scores.csv"), &scores, data.dt())?;

    let artifacts_ = Artifacts {
        data,
        n_train,
        rom,
        scaling,
    };
    let table = truncation_table(&artifacts_, &cfg.rom.tau_grid)?;
    let cols = ["tau", "train_mae", "test_mae", "discarded_energy_fraction"];
    write_csv(&dir.join("truncation.csv"), &cols.map(String::from), table.iter())?;
    write_json(
        &dir.join("summary.json"),
        &RomSummary {
            n_train,
            n_test: artifacts_.data.n() - n_train,
            rank: artifacts_.rom.rank(),
            numerical_rank: k,
            singular_values: artifacts_.rom.singular_values.iter().take(k).copied().collect(),
        },
    )?;
    let artifacts: Vec<String> = ["rom.rompca", "scores.csv", "summary.json", "truncation.csv"]
        .map(String::from)
        .to_vec();
    write_manifest(
        &cfg.output_dir,
        &dir,
        Command::FitRom.name(),
        cfg,
        &[SNAPSHOTS],
        &artifacts,
    )?;
    log::info!("rank {}, numerical rank {k}", artifacts_.rom.rank());
    Ok(CommandOutput { dir, artifacts })
}

#[derive(Debug, Clone, Serialize)]
pub struct AaeSummary {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub train_mae: f64,
    pub test_mae: f64,
    /// PCA truncated to `latent_dim` components, for comparison.
    pub pca_train_mae: f64,
    pub pca_test_mae: f64,
}

/// Trains an autoencoder with latent width `latent` on the scaled training
/// components.
pub fn fit_aae(
    cfg: &RunConfig,
    a: &Artifacts,
    latent: usize,
    seed: u64,
) -> Result<(AaeModel, crate::aae::AaeTrainingLog)> {
    let k = a.scaling.width();
    if latent >= k {
        return Err(Error::Config(vec![format!(
            "aae latent width {latent} must be smaller than the numerical rank {k} of the training snapshots"
        )]));
    }
    let scores = a.scaled_scores(&a.train())?;
    train_aae(cfg.aae_config(k, latent, seed), &scores)
}

/// Physical-space MAE of encoding (ε = 0) and decoding `x`.
pub fn aae_mae(a: &Artifacts, aae: &mut AaeModel, x: &DMatrix<f64>) -> Result<f64> {
    let mut dec = a.decoder(aae);
    let z = dec.encode(x)?;
    Ok(mae(&dec.decode(&z)?, x))
}

/// Per-row physical-space MAE of encoding and decoding every snapshot.
fn aae_row_errors(a: &Artifacts, aae: &mut AaeModel) -> Result<Vec<f64>> {
    let x = a.data.data();
    let mut dec = a.decoder(aae);
    let z = dec.encode(x)?;
    let back = dec.decode(&z)?;
    Ok(row_errors(&back, x))
}

fn row_errors(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    (0..a.nrows())
        .map(|r| mae(&a.rows(r, 1).into_owned(), &b.rows(r, 1).into_owned()))
        .collect()
}

fn pca_mae(a: &Artifacts, x: &DMatrix<f64>, tau: usize) -> Result<f64> {
    let p = a.rom.project_matrix(x, tau)?;
    Ok(mae(&a.rom.reconstruct_matrix(&p, tau)?, x))
}

fn train_aae_cmd(cfg: &RunConfig) -> Result<CommandOutput> {
    let a = Artifacts::load(cfg)?;
    let latent = cfg.aae.latent_dim;
    let (mut aae, log) = fit_aae(cfg, &a, latent, cfg.seeds().aae)?;
    let dir = stage_dir(cfg, AAE_DIR)?;
    aae.save(&dir.join("aae.romnn"))?;
    log.save_csv(&dir.join("training_log.csv"))?;
    let latents = a.decoder(&mut aae).encode(a.data.data())?;
    let dt = a.data.dt();
    write_csv(
        &dir.join("latents.csv"),
        &header("t", "z", latent),
        latents.row_iter().enumerate().map(|(r, row)| {
            std::iter::once(r as f64 * dt)
                .chain(row.iter().copied())
                .collect::<Vec<_>>()
        }),
    )?;
    let tau = latent.min(a.rom.rank());
    let summary = AaeSummary {
        input_dim: a.scaling.width(),
        latent_dim: latent,
        train_mae: aae_mae(&a, &mut aae, &a.train())?,
        test_mae: aae_mae(&a, &mut aae, &a.test())?,
        pca_train_mae: pca_mae(&a, &a.train(), tau)?,
        pca_test_mae: pca_mae(&a, &a.test(), tau)?,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    let artifacts: Vec<String> = ["aae.romnn", "latents.csv", "summary.json", "training_log.csv"]
        .map(String::from)
        .to_vec();
    write_manifest(
        &cfg.output_dir,
        &dir,
        Command::TrainAae.name(),
        cfg,
        &[SNAPSHOTS, ROM_FILE],
        &artifacts,
    )?;
    log::info!(
        "aae held-out MAE {:.5} (PCA tau={tau}: {:.5})",
        summary.test_mae,
        summary.pca_test_mae
    );
    Ok(CommandOutput { dir, artifacts })
}

/// Posterior-mean latents of every snapshot.
pub fn latent_series(a: &Artifacts, aae: &mut AaeModel) -> Result<DMatrix<f64>> {
    a.decoder(aae).encode(a.data.data())
}

fn train_forecaster_cmd(cfg: &RunConfig, mode: ForecasterMode) -> Result<CommandOutput> {
    let a = Artifacts::load(cfg)?;
    let mut aae = load_aae(cfg)?;
    let latents = latent_series(&a, &mut aae)?;
    let fc = cfg.forecaster_config(mode);
    let windows = make_windows(&latents, fc.time_lag)?;
    let (model, log) = train_forecaster(fc, &windows)?;
    let dir = stage_dir(cfg, &forecaster_dir(mode))?;
    model.save(&dir.join("forecaster.romnn"))?;
    log.save_csv(&dir.join("training_log.csv"))?;
    let artifacts: Vec<String> = vec!["forecaster.romnn".into(), "training_log.csv".into()];
    write_manifest(
        &cfg.output_dir,
        &dir,
        Command::TrainForecaster(mode).name(),
        cfg,
        &[SNAPSHOTS, ROM_FILE, AAE_FILE],
        &artifacts,
    )?;
    if let Some(last) = log.epochs.last() {
        log::info!("{} forecaster final val MSE {:.3e}", mode.name(), last.val_mse);
    }
    Ok(CommandOutput { dir, artifacts })
}

/// Ensemble curves for both forecasters plus the reconstruction floor.
pub struct Evaluation {
    pub adversarial: EnsembleErrorCurve,
    pub classic: EnsembleErrorCurve,
    pub reconstruction: EnsembleErrorCurve,
    pub report: ComparisonReport,
}

pub fn evaluate_models(
    cfg: &RunConfig,
    a: &Artifacts,
    aae: &mut AaeModel,
    adversarial: &mut ForecasterModel,
    classic: &mut ForecasterModel,
) -> Result<Evaluation> {
    let latents = latent_series(a, aae)?;
    let starts = cfg.evaluation.starts();
    let horizon = cfg.evaluation.horizon;
    let lag = adversarial.time_lag().max(classic.time_lag());
    let mut dec = a.decoder(aae);
    let reconstruction = reconstruction_curve(&latents, &a.data, &mut dec, &starts, horizon, lag)?;
    let mut models: Vec<(&str, &mut dyn DeltaModel)> = vec![
        (ForecasterMode::Adversarial.name(), adversarial),
        (ForecasterMode::Classic.name(), classic),
    ];
    let mut curves = ensemble_evaluate(&mut models, &latents, &a.data, &mut dec, &starts, horizon)?;
    let threshold: Vec<f64> = reconstruction
        .mean
        .iter()
        .map(|v| v * cfg.evaluation.divergence_factor)
        .collect();
    let report = compare_report(&curves, &threshold)?;
    let classic = curves.pop().expect("two curves");
    let adversarial = curves.pop().expect("two curves");
    Ok(Evaluation {
        adversarial,
        classic,
        reconstruction,
        report,
    })
}

#[derive(Debug, Serialize)]
struct ComparisonFile<'a> {
    config_hash: String,
    seeds: StageSeeds,
    start_first: usize,
    start_last: usize,
    divergence_factor: f64,
    #[serde(flatten)]
    report: &'a ComparisonReport,
}

fn write_evaluation(cfg: &RunConfig, dir: &Path, prefix: &str, ev: &Evaluation) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for curve in [&ev.adversarial, &ev.classic, &ev.reconstruction] {
        let name = format!("{prefix}_{}.csv", curve.model);
        curve.save_csv(&dir.join(&name))?;
        names.push(name);
    }
    let e = &cfg.evaluation;
    write_json(
        &dir.join("comparison.json"),
        &ComparisonFile {
            config_hash: manifest::config_hash(cfg),
            seeds: cfg.seeds(),
            start_first: e.start_first,
            start_last: e.start_last,
            divergence_factor: e.divergence_factor,
            report: &ev.report,
        },
    )?;
    names.push("comparison.json".into());
    Ok(names)
}

fn forecaster_inputs() -> Vec<String> {
    [ForecasterMode::Adversarial, ForecasterMode::Classic]
        .map(forecaster_file)
        .to_vec()
}

fn run_evaluation(cfg: &RunConfig) -> Result<(Artifacts, AaeModel, Evaluation)> {
    let a = Artifacts::load(cfg)?;
    let mut aae = load_aae(cfg)?;
    let mut adv = load_forecaster(cfg, ForecasterMode::Adversarial)?;
    let mut cls = load_forecaster(cfg, ForecasterMode::Classic)?;
    let ev = evaluate_models(cfg, &a, &mut aae, &mut adv, &mut cls)?;
    Ok((a, aae, ev))
}

fn evaluate_cmd(cfg: &RunConfig) -> Result<CommandOutput> {
    let (_, _, ev) = run_evaluation(cfg)?;
    let dir = stage_dir(cfg, EVAL_DIR)?;
    let artifacts = write_evaluation(cfg, &dir, "curve", &ev)?;
    let fc = forecaster_inputs();
    let mut inputs = vec![SNAPSHOTS, ROM_FILE, AAE_FILE];
    inputs.extend(fc.iter().map(String::as_str));
    write_manifest(
        &cfg.output_dir,
        &dir,
        Command::Evaluate.name(),
        cfg,
        &inputs,
        &artifacts,
    )?;
    log::info!(
        "mean MAE at step {}: adversarial {:.5}, classic {:.5}, reconstruction {:.5}",
        ev.report.horizon,
        ev.report.mean_at_horizon[0],
        ev.report.mean_at_horizon[1],
        ev.reconstruction.mean[ev.report.horizon - 1]
    );
    Ok(CommandOutput { dir, artifacts })
}

fn reproduce_fig2_cmd(cfg: &RunConfig) -> Result<CommandOutput> {
    let (a, mut aae, ev) = run_evaluation(cfg)?;
    let dir = stage_dir(cfg, FIG2_DIR)?;
    let x = a.data.data();
    let n = a.data.n();

    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    let mut summary = Vec::new();
    for &tau in &cfg.rom.tau_grid {
        let pca_rows = if tau <= a.rom.rank() {
            let p = a.rom.project_matrix(x, tau)?;
            row_errors(&a.rom.reconstruct_matrix(&p, tau)?, x)
        } else {
            vec![f64::NAN; n]
        };
        let aae_rows = if tau == cfg.aae.latent_dim {
            aae_row_errors(&a, &mut aae)?
        } else if tau < a.scaling.width() {
            let (mut extra, _) = fit_aae(cfg, &a, tau, cfg.aae_seed_for_latent(tau))?;
            aae_row_errors(&a, &mut extra)?
        } else {
            log::warn!(
                "no autoencoder at latent width {tau}: not below the numerical rank {}",
                a.scaling.width()
            );
            vec![f64::NAN; n]
        };
        let split = |rows: &[f64]| {
            let train = &rows[..a.n_train];
            let test = &rows[a.n_train..];
            (
                train.iter().sum::<f64>() / train.len() as f64,
                test.iter().sum::<f64>() / test.len() as f64,
            )
        };
        let (pca_train, pca_test) = split(&pca_rows);
        let (aae_train, aae_test) = split(&aae_rows);
        summary.push([tau as f64, pca_train, pca_test, aae_train, aae_test]);
        columns.push((format!("pca_tau{tau}"), pca_rows));
        columns.push((format!("aae_latent{tau}"), aae_rows));
    }

    let mut top_header = vec!["t".to_string(), "held_out".to_string()];
    top_header.extend(columns.iter().map(|(name, _)| name.clone()));
    let dt = a.data.dt();
    write_csv(
        &dir.join("top_per_step.csv"),
        &top_header,
        (0..n).map(|r| {
            let mut row = vec![r as f64 * dt, if r >= a.n_train { 1.0 } else { 0.0 }];
            row.extend(columns.iter().map(|(_, v)| v[r]));
            row
        }),
    )?;
    let summary_cols = ["tau", "pca_train_mae", "pca_test_mae", "aae_train_mae", "aae_test_mae"];
    write_csv(
        &dir.join("top_summary.csv"),
        &summary_cols.map(String::from),
        summary.iter(),
    )?;

    let mut artifacts = vec!["top_per_step.csv".to_string(), "top_summary.csv".to_string()];
    artifacts.extend(write_evaluation(cfg, &dir, "bottom", &ev)?);
    let fc = forecaster_inputs();
    let mut inputs = vec![SNAPSHOTS, ROM_FILE, AAE_FILE];
    inputs.extend(fc.iter().map(String::as_str));
    write_manifest(
        &cfg.output_dir,
        &dir,
        Command::ReproduceFig2.name(),
        cfg,
        &inputs,
        &artifacts,
    )?;
    Ok(CommandOutput { dir, artifacts })
}
