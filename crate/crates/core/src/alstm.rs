//! Latent-space forecasters.
//!
//! The generator reads `N` consecutive latent vectors and predicts the next
//! delta `Δz_k = z_{k+1} − z_k`. In adversarial mode a mirrored LSTM
//! discriminator scores candidate deltas (true ones label 1, generated ones
//! label 0); the generator minimises `BCE(D(Δz̃), 1) + λ·MSE(Δz̃, Δz)`. In
//! classic mode the same generator minimises the MSE alone.
//!
//! Sequences are time-major: a batch of windows is a `Vec` of `N` matrices,
//! one per time step, each `batch × latent`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::aae::{shuffled_batches, two_sided_bce};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::nn::{
    bce_with_logits, mse_grad, mse_loss, sigmoid, BatchNorm, Dense, Dropout, Layer, Lstm, Mode, NadamConfig, Network,
    Optimizer,
};
use crate::rng::{self, Rng};
use crate::table::write_csv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecasterMode {
    Adversarial,
    Classic,
}

impl ForecasterMode {
    pub fn name(self) -> &'static str {
        match self {
            ForecasterMode::Adversarial => "adversarial",
            ForecasterMode::Classic => "classic",
        }
    }
}

impl std::str::FromStr for ForecasterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adversarial" => Ok(Self::Adversarial),
            "classic" => Ok(Self::Classic),
            other => Err(Error::argument(format!(
                "unknown forecaster mode `{other}` (expected adversarial or classic)"
            ))),
        }
    }
}

/// What the discriminator sees besides the candidate delta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscriminatorInput {
    /// The window, each step paired with its following delta; the last
    /// step is paired with the candidate.
    Context,
    /// The candidate delta alone, as a length-one sequence.
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecasterConfig {
    pub latent_dim: usize,
    pub time_lag: usize,
    pub hidden: usize,
    pub mode: ForecasterMode,
    pub disc_input: DiscriminatorInput,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub rec_weight: f64,
    /// Leading fraction of windows used for training; the rest validates.
    pub train_fraction: f64,
    pub optimizer: NadamConfig,
}

impl ForecasterConfig {
    pub fn new(latent_dim: usize, mode: ForecasterMode) -> Self {
        Self {
            latent_dim,
            time_lag: 5,
            hidden: 64,
            mode,
            disc_input: DiscriminatorInput::Context,
            dropout: 0.5,
            batch_size: 32,
            epochs: 500,
            seed: 0,
            rec_weight: 1.0,
            train_fraction: 0.8,
            optimizer: NadamConfig::default(),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.latent_dim == 0 {
            v.push("latent_dim must be positive".into());
        }
        if self.time_lag == 0 {
            v.push("time_lag must be >= 1".into());
        }
        if self.hidden == 0 {
            v.push("hidden must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            v.push(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.batch_size < 2 {
            v.push(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        if self.epochs == 0 {
            v.push("epochs must be positive".into());
        }
        if !(self.rec_weight.is_finite() && self.rec_weight >= 0.0) {
            v.push(format!("rec_weight must be finite and >= 0, got {}", self.rec_weight));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            v.push(format!("train_fraction must be in (0, 1], got {}", self.train_fraction));
        }
        if self.optimizer.learning_rate.is_nan() || self.optimizer.learning_rate <= 0.0 {
            v.push("learning rate must be positive".into());
        }
        v
    }

    fn disc_width(&self) -> usize {
        match self.disc_input {
            DiscriminatorInput::Context => 2 * self.latent_dim,
            DiscriminatorInput::Delta => self.latent_dim,
        }
    }
}

/// Sliding windows over a latent series (rows are time steps).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub time_lag: usize,
    /// One `N × latent` matrix per window.
    pub inputs: Vec<DMatrix<f64>>,
    /// Row `i` is the delta following window `i`.
    pub targets: DMatrix<f64>,
    /// Series index of each window's last element.
    pub ends: Vec<usize>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn latent_dim(&self) -> usize {
        self.targets.ncols()
    }

    /// Time-major sequence and target rows for the given window indices.
    pub fn batch(&self, idx: &[usize]) -> (Vec<DMatrix<f64>>, DMatrix<f64>) {
        let windows: Vec<&DMatrix<f64>> = idx.iter().map(|&i| &self.inputs[i]).collect();
        let targets = DMatrix::from_fn(idx.len(), self.latent_dim(), |r, c| self.targets[(idx[r], c)]);
        (to_sequence(&windows), targets)
    }

    /// Leading `fraction` of windows and the remainder, time order kept.
    pub fn split(&self, fraction: f64) -> (WindowSet, WindowSet) {
        let cut = ((self.len() as f64) * fraction).round() as usize;
        let cut = cut.min(self.len());
        let part = |range: std::ops::Range<usize>| WindowSet {
            time_lag: self.time_lag,
            inputs: self.inputs[range.clone()].to_vec(),
            targets: self.targets.rows(range.start, range.len()).into_owned(),
            ends: self.ends[range].to_vec(),
        };
        (part(0..cut), part(cut..self.len()))
    }
}

/// Converts per-window `N × d` matrices into `N` matrices of `batch × d`.
pub fn to_sequence(windows: &[&DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let Some(first) = windows.first() else {
        return Vec::new();
    };
    (0..first.nrows())
        .map(|t| DMatrix::from_fn(windows.len(), first.ncols(), |b, c| windows[b][(t, c)]))
        .collect()
}

pub fn make_windows(series: &DMatrix<f64>, time_lag: usize) -> Result<WindowSet> {
    let t = series.nrows();
    if time_lag == 0 {
        return Err(Error::argument("time lag must be >= 1"));
    }
    if t <= time_lag {
        return Err(Error::argument(format!(
            "series of length {t} is too short for time lag {time_lag}"
        )));
    }
    let d = series.ncols();
    let ends: Vec<usize> = (time_lag - 1..t - 1).collect();
    let inputs = ends
        .iter()
        .map(|&k| series.rows(k + 1 - time_lag, time_lag).into_owned())
        .collect();
    let targets = DMatrix::from_fn(ends.len(), d, |r, c| series[(ends[r] + 1, c)] - series[(ends[r], c)]);
    Ok(WindowSet {
        time_lag,
        inputs,
        targets,
        ends,
    })
}

/// Discriminator input for a window sequence and candidate deltas.
pub fn discriminator_sequence(
    kind: DiscriminatorInput,
    seq: &[DMatrix<f64>],
    candidate: &DMatrix<f64>,
) -> Vec<DMatrix<f64>> {
    match kind {
        DiscriminatorInput::Delta => vec![candidate.clone()],
        DiscriminatorInput::Context => {
            let d = candidate.ncols();
            (0..seq.len())
                .map(|j| {
                    let mut step = DMatrix::zeros(candidate.nrows(), 2 * d);
                    step.columns_mut(0, d).copy_from(&seq[j]);
                    let delta = if j + 1 < seq.len() {
                        &seq[j + 1] - &seq[j]
                    } else {
                        candidate.clone()
                    };
                    step.columns_mut(d, d).copy_from(&delta);
                    step
                })
                .collect()
        }
    }
}

fn candidate_grad(kind: DiscriminatorInput, grads: &[DMatrix<f64>], d: usize) -> DMatrix<f64> {
    let last = grads.last().expect("non-empty sequence gradient");
    match kind {
        DiscriminatorInput::Delta => last.clone(),
        DiscriminatorInput::Context => last.columns(d, d).into_owned(),
    }
}

fn recurrent_net(input: usize, hidden: usize, output: usize, dropout: f64, rng: &mut Rng) -> Result<Network> {
    Ok(Network::new(vec![
        Layer::Lstm(Lstm::new(input, hidden, rng)),
        Layer::BatchNorm(BatchNorm::new(hidden)),
        Layer::Dropout(Dropout::new(dropout)?),
        Layer::Dense(Dense::new(hidden, output, rng)),
    ]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecasterModel {
    pub config: ForecasterConfig,
    pub generator: Network,
    /// Present only in adversarial mode.
    pub discriminator: Option<Network>,
}

impl ForecasterModel {
    /// Generator parameters depend only on `seed`, not on the mode, so
    /// classic and adversarial runs start from the same point.
    pub fn new(config: ForecasterConfig) -> Result<Self> {
        let violations = config.violations();
        if !violations.is_empty() {
            return Err(Error::Config(violations));
        }
        let d = config.latent_dim;
        let mut g_rng = rng::stream(config.seed, "forecaster-generator");
        let generator = recurrent_net(d, config.hidden, d, config.dropout, &mut g_rng)?;
        let discriminator = match config.mode {
            ForecasterMode::Classic => None,
            ForecasterMode::Adversarial => {
                let mut d_rng = rng::stream(config.seed, "forecaster-discriminator");
                Some(recurrent_net(
                    config.disc_width(),
                    config.hidden,
                    1,
                    config.dropout,
                    &mut d_rng,
                )?)
            }
        };
        Ok(Self {
            config,
            generator,
            discriminator,
        })
    }

    pub fn time_lag(&self) -> usize {
        self.config.time_lag
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    fn check_sequence(&self, seq: &[DMatrix<f64>]) -> Result<()> {
        if seq.len() != self.config.time_lag {
            return Err(Error::argument(format!(
                "window length {} does not match time lag {}",
                seq.len(),
                self.config.time_lag
            )));
        }
        if let Some(bad) = seq.iter().find(|m| m.ncols() != self.config.latent_dim) {
            return Err(Error::argument(format!(
                "window width {} does not match latent_dim {}",
                bad.ncols(),
                self.config.latent_dim
            )));
        }
        Ok(())
    }

    /// Deltas for a batch of windows (time-major), inference mode.
    pub fn predict_deltas(&mut self, seq: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        self.check_sequence(seq)?;
        self.generator.forward_sequence(seq, Mode::Infer, None)
    }

    /// Delta following one `N × latent` window.
    pub fn generate_delta(&mut self, window: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.predict_deltas(&to_sequence(&[window]))
    }

    /// `generate_delta(window) + window.last`.
    pub fn next_latent(&mut self, window: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let delta = self.generate_delta(window)?;
        Ok(delta + window.rows(window.nrows() - 1, 1))
    }

    /// Probability that each candidate delta is real, inference mode.
    pub fn discriminate_delta(&mut self, seq: &[DMatrix<f64>], candidate: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_sequence(seq)?;
        let kind = self.config.disc_input;
        let disc = self
            .discriminator
            .as_mut()
            .ok_or_else(|| Error::State("classic forecaster has no discriminator".into()))?;
        let input = discriminator_sequence(kind, seq, candidate);
        Ok(disc.forward_sequence(&input, Mode::Infer, None)?.map(sigmoid))
    }

    fn manifest(&self) -> String {
        serde_json::json!({
            "kind": "forecaster",
            "mode": self.config.mode,
            "time_lag": self.config.time_lag,
            "latent_dim": self.config.latent_dim,
            "config": self.config,
        })
        .to_string()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut networks = vec![("generator".to_string(), self.generator.clone())];
        if let Some(d) = &self.discriminator {
            networks.push(("discriminator".to_string(), d.clone()));
        }
        save_checkpoint(
            path,
            &Checkpoint {
                manifest: self.manifest(),
                networks,
                optimizers: Vec::new(),
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut ckpt = load_checkpoint(path)?;
        let manifest: serde_json::Value =
            serde_json::from_str(&ckpt.manifest).map_err(|e| Error::format(path, format!("manifest: {e}")))?;
        if manifest["kind"] != "forecaster" {
            return Err(Error::format(path, "not a forecaster checkpoint"));
        }
        let config: ForecasterConfig = serde_json::from_value(manifest["config"].clone())
            .map_err(|e| Error::format(path, format!("manifest config: {e}")))?;
        let generator = ckpt.take_network("generator", path)?;
        let discriminator = match config.mode {
            ForecasterMode::Classic => None,
            ForecasterMode::Adversarial => Some(ckpt.take_network("discriminator", path)?),
        };
        Ok(Self {
            config,
            generator,
            discriminator,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecasterBatchLosses {
    /// Zero in classic mode.
    pub gen_adv_loss: f64,
    pub gen_mse: f64,
    /// Zero in classic mode.
    pub disc_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForecasterEpochLog {
    pub epoch: usize,
    pub gen_adv_loss: f64,
    pub gen_mse: f64,
    pub disc_loss: f64,
    /// MSE on the held-out windows in inference mode; NaN when there are
    /// none.
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecasterTrainingLog {
    pub mode: ForecasterMode,
    pub epochs: Vec<ForecasterEpochLog>,
}

impl ForecasterTrainingLog {
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let cols: &[&str] = match self.mode {
            ForecasterMode::Adversarial => &["epoch", "gen_adv_loss", "gen_mse", "disc_loss", "val_mse"],
            ForecasterMode::Classic => &["epoch", "mse", "val_mse"],
        };
        let header: Vec<String> = cols.iter().map(|s| s.to_string()).collect();
        let mode = self.mode;
        write_csv(
            path,
            &header,
            self.epochs.iter().map(|e| match mode {
                ForecasterMode::Adversarial => {
                    vec![e.epoch as f64, e.gen_adv_loss, e.gen_mse, e.disc_loss, e.val_mse]
                }
                ForecasterMode::Classic => vec![e.epoch as f64, e.gen_mse, e.val_mse],
            }),
        )
    }
}

fn stack_sequences(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let mut out = DMatrix::zeros(x.nrows() + y.nrows(), x.ncols());
            out.rows_mut(0, x.nrows()).copy_from(x);
            out.rows_mut(x.nrows(), y.nrows()).copy_from(y);
            out
        })
        .collect()
}

/// Owns a model, its optimizers and the dropout streams.
pub struct ForecasterTrainer {
    pub model: ForecasterModel,
    gen_opt: Optimizer,
    disc_opt: Option<Optimizer>,
    gen_dropout: Rng,
    disc_dropout: Rng,
}

impl ForecasterTrainer {
    pub fn new(config: ForecasterConfig) -> Result<Self> {
        let model = ForecasterModel::new(config)?;
        let cfg = model.config.optimizer;
        let gen_opt = Optimizer::new(&[("generator", &model.generator)], cfg);
        let disc_opt = model
            .discriminator
            .as_ref()
            .map(|d| Optimizer::new(&[("discriminator", d)], cfg));
        let seed = model.config.seed;
        Ok(Self {
            model,
            gen_opt,
            disc_opt,
            gen_dropout: rng::stream(seed, "forecaster-generator-dropout"),
            disc_dropout: rng::stream(seed, "forecaster-discriminator-dropout"),
        })
    }

    /// Training-mode generator pass; caches intermediates for
    /// [`Self::generator_backward`].
    pub fn generator_forward(&mut self, seq: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        self.model.check_sequence(seq)?;
        self.model
            .generator
            .forward_sequence(seq, Mode::Train, Some(&mut self.gen_dropout))
    }

    /// One Nadam step on the discriminator only, on real and generated
    /// deltas for the same windows.
    pub fn disc_step(&mut self, seq: &[DMatrix<f64>], real: &DMatrix<f64>, fake: &DMatrix<f64>) -> Result<f64> {
        let kind = self.model.config.disc_input;
        let (Some(disc), Some(opt)) = (self.model.discriminator.as_mut(), self.disc_opt.as_mut()) else {
            return Err(Error::State("classic forecaster has no discriminator".into()));
        };
        let real_in = discriminator_sequence(kind, seq, real);
        let fake_in = discriminator_sequence(kind, seq, fake);
        let input = stack_sequences(&real_in, &fake_in);
        let logits = disc.forward_sequence(&input, Mode::Train, Some(&mut self.disc_dropout))?;
        let (loss, grad) = two_sided_bce(&logits, real.nrows());
        disc.backward(&grad)?;
        opt.step(&mut [disc])?;
        Ok(loss)
    }

    /// Generator loss and gradients for the deltas `fake` produced by the
    /// last [`Self::generator_forward`]. Returns `(adv, mse)`.
    pub fn generator_backward(
        &mut self,
        seq: &[DMatrix<f64>],
        targets: &DMatrix<f64>,
        fake: &DMatrix<f64>,
    ) -> Result<(f64, f64)> {
        let cfg = &self.model.config;
        let mse = mse_loss(fake, targets)?;
        let (adv, mut dfake) = match (cfg.mode, self.model.discriminator.as_mut()) {
            (ForecasterMode::Adversarial, Some(disc)) => {
                let input = discriminator_sequence(cfg.disc_input, seq, fake);
                let logits = disc.forward_sequence(&input, Mode::Infer, None)?;
                let (adv, dlogits) = bce_with_logits(&logits, 1.0);
                let grads = disc.backward(&dlogits)?.into_sequence()?;
                (adv, candidate_grad(cfg.disc_input, &grads, cfg.latent_dim))
            }
            _ => (0.0, DMatrix::zeros(fake.nrows(), fake.ncols())),
        };
        let weight = match cfg.mode {
            ForecasterMode::Adversarial => cfg.rec_weight,
            ForecasterMode::Classic => 1.0,
        };
        dfake += mse_grad(fake, targets)? * weight;
        self.model.generator.backward(&dfake)?;
        Ok((adv, mse))
    }

    fn apply_generator_update(&mut self) -> Result<()> {
        self.gen_opt.step(&mut [&mut self.model.generator])
    }

    /// One Nadam step on the generator only.
    pub fn gen_step(&mut self, seq: &[DMatrix<f64>], targets: &DMatrix<f64>) -> Result<(f64, f64)> {
        let fake = self.generator_forward(seq)?;
        let losses = self.generator_backward(seq, targets, &fake)?;
        self.apply_generator_update()?;
        Ok(losses)
    }

    pub fn train_batch(&mut self, seq: &[DMatrix<f64>], targets: &DMatrix<f64>) -> Result<ForecasterBatchLosses> {
        let fake = self.generator_forward(seq)?;
        let disc_loss = match self.model.config.mode {
            ForecasterMode::Adversarial => self.disc_step(seq, targets, &fake)?,
            ForecasterMode::Classic => 0.0,
        };
        let (gen_adv_loss, gen_mse) = self.generator_backward(seq, targets, &fake)?;
        self.apply_generator_update()?;
        Ok(ForecasterBatchLosses {
            gen_adv_loss,
            gen_mse,
            disc_loss,
        })
    }
}

/// MSE of inference-mode predictions over a window set.
pub fn evaluate_mse(model: &mut ForecasterModel, windows: &WindowSet) -> Result<f64> {
    if windows.is_empty() {
        return Ok(f64::NAN);
    }
    let idx: Vec<usize> = (0..windows.len()).collect();
    let (seq, targets) = windows.batch(&idx);
    mse_loss(&model.predict_deltas(&seq)?, &targets)
}

/// Trains on the leading `train_fraction` of `windows` and reports the
/// held-out MSE of the rest after every epoch.
pub fn train_forecaster(
    config: ForecasterConfig,
    windows: &WindowSet,
) -> Result<(ForecasterModel, ForecasterTrainingLog)> {
    if windows.is_empty() {
        return Err(Error::argument("no training windows"));
    }
    if windows.latent_dim() != config.latent_dim || windows.time_lag != config.time_lag {
        return Err(Error::argument(format!(
            "windows are {}-dimensional with lag {}, config expects {} with lag {}",
            windows.latent_dim(),
            windows.time_lag,
            config.latent_dim,
            config.time_lag
        )));
    }
    let (train, val) = windows.split(config.train_fraction);
    if train.len() < 2 {
        return Err(Error::argument(format!(
            "{} training windows; at least 2 are needed",
            train.len()
        )));
    }
    let mut shuffle = rng::stream(config.seed, "forecaster-shuffle");
    let (epochs, batch_size, mode) = (config.epochs, config.batch_size, config.mode);
    let mut trainer = ForecasterTrainer::new(config)?;
    let mut log = ForecasterTrainingLog {
        mode,
        epochs: Vec::with_capacity(epochs),
    };
    for epoch in 0..epochs {
        let batches = shuffled_batches(train.len(), batch_size, &mut shuffle);
        let mut sums = [0.0; 3];
        for (b, idx) in batches.iter().enumerate() {
            let (seq, targets) = train.batch(idx);
            let l = trainer.train_batch(&seq, &targets)?;
            if ![l.gen_adv_loss, l.gen_mse, l.disc_loss].iter().all(|v| v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite {} forecaster loss at epoch {epoch}, batch {b}",
                    mode.name()
                )));
            }
            sums[0] += l.gen_adv_loss;
            sums[1] += l.gen_mse;
            sums[2] += l.disc_loss;
        }
        let count = batches.len() as f64;
        let val_mse = evaluate_mse(&mut trainer.model, &val)?;
        log.epochs.push(ForecasterEpochLog {
            epoch,
            gen_adv_loss: sums[0] / count,
            gen_mse: sums[1] / count,
            disc_loss: sums[2] / count,
            val_mse,
        });
        log::debug!(
            "{} forecaster epoch {epoch}: mse {:.3e} val {:.3e}",
            mode.name(),
            sums[1] / count,
            val_mse
        );
    }
    Ok((trainer.model, log))
}
