//! PC-based adversarial autoencoder.
//!
//! The encoder trunk feeds two linear heads, `μ` and `log σ`; latents are
//! sampled as `z = μ + σ ⊙ ε`. The decoder mirrors the trunk and ends in
//! `tanh` so reconstructions live in the scaled-PC range. The discriminator
//! separates prior draws `ẑ ~ N(0, I)` (label 1) from encoder samples
//! (label 0).
//!
//! Each batch draws prior samples then `ε` from one seeded stream, runs the
//! encoder once, takes a discriminator step, then an autoencoder step against
//! the updated discriminator evaluated in inference mode.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::nn::{
    bce_with_logits, mse_grad, mse_loss, sigmoid, Activation, ActivationLayer, BatchNorm, Dense, Layer, Mode,
    NadamConfig, Network, Optimizer, LEAKY_RELU_SLOPE,
};
use crate::rng::{self, Rng};
use crate::table::write_csv;

/// Trunk widths after the input layer: 64, then halving down to the latent
/// width, e.g. `[64, 32, 16, 8]` for an 8-dimensional latent space.
pub fn encoder_ladder(latent_dim: usize) -> Vec<usize> {
    let mut widths = Vec::new();
    let mut w = 64;
    while w > latent_dim {
        widths.push(w);
        w /= 2;
    }
    widths.push(latent_dim);
    widths
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AaeConfig {
    /// Number of principal components fed in.
    pub input_dim: usize,
    pub latent_dim: usize,
    /// Trunk widths; the last one equals `latent_dim`.
    pub encoder_widths: Vec<usize>,
    /// Hidden widths of the decoder before the `input_dim` output layer.
    pub decoder_widths: Vec<usize>,
    /// Hidden widths of the discriminator before its single-logit output.
    #[serde(default)]
    pub discriminator_widths: Vec<usize>,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Weight of the reconstruction MSE against the adversarial BCE term.
    pub rec_weight: f64,
    pub optimizer: NadamConfig,
}

impl AaeConfig {
    pub fn new(input_dim: usize, latent_dim: usize) -> Self {
        let encoder_widths = encoder_ladder(latent_dim);
        let decoder_widths = encoder_widths[..encoder_widths.len() - 1]
            .iter()
            .rev()
            .copied()
            .collect();
        Self {
            input_dim,
            latent_dim,
            encoder_widths,
            decoder_widths,
            discriminator_widths: Vec::new(),
            batch_size: 32,
            epochs: 500,
            seed: 0,
            rec_weight: 1.0,
            optimizer: NadamConfig::default(),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.latent_dim == 0 {
            v.push("latent_dim must be positive".into());
        }
        if self.latent_dim >= self.input_dim {
            v.push(format!(
                "latent_dim ({}) must be smaller than input_dim ({})",
                self.latent_dim, self.input_dim
            ));
        }
        if self.encoder_widths.last() != Some(&self.latent_dim) {
            v.push(format!(
                "encoder widths {:?} must end at latent_dim {}",
                self.encoder_widths, self.latent_dim
            ));
        }
        if self
            .encoder_widths
            .iter()
            .chain(&self.decoder_widths)
            .chain(&self.discriminator_widths)
            .any(|&w| w == 0)
        {
            v.push("layer widths must be positive".into());
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
        if self.optimizer.learning_rate.is_nan() || self.optimizer.learning_rate <= 0.0 {
            v.push("learning rate must be positive".into());
        }
        v
    }
}

fn hidden_block(layers: &mut Vec<Layer>, input: usize, width: usize, rng: &mut Rng) {
    layers.push(Layer::Dense(Dense::new(input, width, rng)));
    layers.push(Layer::BatchNorm(BatchNorm::new(width)));
    layers.push(Layer::Activation(ActivationLayer::new(Activation::LeakyRelu(
        LEAKY_RELU_SLOPE,
    ))));
}

#[derive(Debug, Clone, PartialEq)]
pub struct AaeModel {
    pub config: AaeConfig,
    pub encoder: Network,
    pub mu_head: Network,
    pub log_sigma_head: Network,
    pub decoder: Network,
    pub discriminator: Network,
}

impl AaeModel {
    /// Fresh parameters drawn from the `aae-init` stream of `config.seed`.
    pub fn new(config: AaeConfig) -> Result<Self> {
        let violations = config.violations();
        if !violations.is_empty() {
            return Err(Error::Config(violations));
        }
        let mut rng = rng::stream(config.seed, "aae-init");
        let latent = config.latent_dim;

        let mut layers = Vec::new();
        let mut prev = config.input_dim;
        for &w in &config.encoder_widths {
            hidden_block(&mut layers, prev, w, &mut rng);
            prev = w;
        }
        let encoder = Network::new(layers);
        let mu_head = Network::new(vec![Layer::Dense(Dense::new(prev, latent, &mut rng))]);
        let log_sigma_head = Network::new(vec![Layer::Dense(Dense::new(prev, latent, &mut rng))]);

        let mut layers = Vec::new();
        let mut prev = latent;
        for &w in &config.decoder_widths {
            hidden_block(&mut layers, prev, w, &mut rng);
            prev = w;
        }
        layers.push(Layer::Dense(Dense::new(prev, config.input_dim, &mut rng)));
        layers.push(Layer::Activation(ActivationLayer::new(Activation::Tanh)));
        let decoder = Network::new(layers);

        let mut layers = Vec::new();
        let mut prev = latent;
        for &w in &config.discriminator_widths {
            layers.push(Layer::Dense(Dense::new(prev, w, &mut rng)));
            layers.push(Layer::Activation(ActivationLayer::new(Activation::LeakyRelu(
                LEAKY_RELU_SLOPE,
            ))));
            prev = w;
        }
        layers.push(Layer::Dense(Dense::new(prev, 1, &mut rng)));
        let discriminator = Network::new(layers);

        Ok(Self {
            config,
            encoder,
            mu_head,
            log_sigma_head,
            decoder,
            discriminator,
        })
    }

    fn check_width(&self, m: &DMatrix<f64>, expected: usize, what: &str) -> Result<()> {
        if m.ncols() != expected {
            return Err(Error::argument(format!(
                "{what} expects width {expected}, got {}",
                m.ncols()
            )));
        }
        Ok(())
    }

    fn encode_mode(&mut self, p: &DMatrix<f64>, mode: Mode) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check_width(p, self.config.input_dim, "encoder")?;
        let h = self.encoder.forward(p, mode, None)?;
        let mu = self.mu_head.forward(&h, mode, None)?;
        let log_sigma = self.log_sigma_head.forward(&h, mode, None)?;
        Ok((mu, log_sigma))
    }

    /// Posterior mean and log standard deviation, inference mode.
    pub fn encode(&mut self, p: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.encode_mode(p, Mode::Infer)
    }

    /// Scaled-PC reconstruction, inference mode.
    pub fn decode(&mut self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_width(z, self.config.latent_dim, "decoder")?;
        self.decoder.forward(z, Mode::Infer, None)
    }

    /// Probability that each row of `z` was drawn from the prior.
    pub fn discriminate_prior(&mut self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_width(z, self.config.latent_dim, "discriminator")?;
        Ok(self.discriminator.forward(z, Mode::Infer, None)?.map(sigmoid))
    }

    /// `decode(μ(p))`, i.e. reconstruction with `ε = 0`.
    pub fn reconstruct(&mut self, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (mu, _) = self.encode(p)?;
        self.decode(&mu)
    }

    fn manifest(&self) -> String {
        serde_json::json!({ "kind": "aae", "config": self.config }).to_string()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(
            path,
            &Checkpoint {
                manifest: self.manifest(),
                networks: vec![
                    ("encoder".into(), self.encoder.clone()),
                    ("mu_head".into(), self.mu_head.clone()),
                    ("log_sigma_head".into(), self.log_sigma_head.clone()),
                    ("decoder".into(), self.decoder.clone()),
                    ("discriminator".into(), self.discriminator.clone()),
                ],
                optimizers: Vec::new(),
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut ckpt = load_checkpoint(path)?;
        let manifest: serde_json::Value =
            serde_json::from_str(&ckpt.manifest).map_err(|e| Error::format(path, format!("manifest: {e}")))?;
        if manifest["kind"] != "aae" {
            return Err(Error::format(path, "not an AAE checkpoint"));
        }
        let config: AaeConfig = serde_json::from_value(manifest["config"].clone())
            .map_err(|e| Error::format(path, format!("manifest config: {e}")))?;
        Ok(Self {
            config,
            encoder: ckpt.take_network("encoder", path)?,
            mu_head: ckpt.take_network("mu_head", path)?,
            log_sigma_head: ckpt.take_network("log_sigma_head", path)?,
            decoder: ckpt.take_network("decoder", path)?,
            discriminator: ckpt.take_network("discriminator", path)?,
        })
    }
}

/// `z = μ + exp(log σ) ⊙ ε`.
pub fn sample_latent(mu: &DMatrix<f64>, log_sigma: &DMatrix<f64>, eps: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(mu.shape(), log_sigma.shape(), "mu / log sigma shape");
    assert_eq!(mu.shape(), eps.shape(), "mu / eps shape");
    DMatrix::from_fn(mu.nrows(), mu.ncols(), |r, c| {
        mu[(r, c)] + log_sigma[(r, c)].exp() * eps[(r, c)]
    })
}

/// `BCE(D(ẑ), 1) + BCE(D(z), 0)` from discriminator probabilities.
pub fn discriminator_loss(p_prior: &DMatrix<f64>, p_encoded: &DMatrix<f64>) -> Result<f64> {
    let ones = DMatrix::from_element(p_prior.nrows(), p_prior.ncols(), 1.0);
    let zeros = DMatrix::zeros(p_encoded.nrows(), p_encoded.ncols());
    Ok(crate::nn::bce_loss(p_prior, &ones)? + crate::nn::bce_loss(p_encoded, &zeros)?)
}

pub(crate) fn standard_normal(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Split a batch-of-two-halves gradient: real rows target 1, fake rows 0,
/// each half averaged separately.
pub(crate) fn two_sided_bce(logits: &DMatrix<f64>, real_rows: usize) -> (f64, DMatrix<f64>) {
    let fake_rows = logits.nrows() - real_rows;
    let (real_loss, real_grad) = bce_with_logits(&logits.rows(0, real_rows).into_owned(), 1.0);
    let (fake_loss, fake_grad) = bce_with_logits(&logits.rows(real_rows, fake_rows).into_owned(), 0.0);
    let mut grad = DMatrix::zeros(logits.nrows(), logits.ncols());
    grad.rows_mut(0, real_rows).copy_from(&real_grad);
    grad.rows_mut(real_rows, fake_rows).copy_from(&fake_grad);
    (real_loss + fake_loss, grad)
}

fn vstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

/// Encoder outputs of one training-mode forward pass.
#[derive(Debug, Clone)]
pub struct EncoderPass {
    pub mu: DMatrix<f64>,
    pub log_sigma: DMatrix<f64>,
    pub eps: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AaeBatchLosses {
    pub disc_loss: f64,
    pub adv_loss: f64,
    pub rec_mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AaeEpochLog {
    pub epoch: usize,
    pub disc_loss: f64,
    pub adv_loss: f64,
    pub rec_mse: f64,
    pub latent_mean_norm: f64,
    pub latent_var_mean: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AaeTrainingLog {
    pub epochs: Vec<AaeEpochLog>,
}

impl AaeTrainingLog {
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let header: Vec<String> = [
            "epoch",
            "disc_loss",
            "adv_loss",
            "rec_mse",
            "latent_mean_norm",
            "latent_var_mean",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        write_csv(
            path,
            &header,
            self.epochs.iter().map(|e| {
                [
                    e.epoch as f64,
                    e.disc_loss,
                    e.adv_loss,
                    e.rec_mse,
                    e.latent_mean_norm,
                    e.latent_var_mean,
                ]
            }),
        )
    }
}

/// Per-dimension mean and (population) variance of the rows of `z`.
pub fn latent_moments(z: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = z.nrows() as f64;
    let means: Vec<f64> = z.column_iter().map(|c| c.sum() / n).collect();
    let vars = z
        .column_iter()
        .zip(&means)
        .map(|(c, m)| c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n)
        .collect();
    (means, vars)
}

/// Owns a model, its two optimizers and the noise stream.
pub struct AaeTrainer {
    pub model: AaeModel,
    disc_opt: Optimizer,
    ae_opt: Optimizer,
    noise: Rng,
}

impl AaeTrainer {
    pub fn new(config: AaeConfig) -> Result<Self> {
        let model = AaeModel::new(config)?;
        let opt_cfg = model.config.optimizer;
        let disc_opt = Optimizer::new(&[("discriminator", &model.discriminator)], opt_cfg);
        let ae_opt = Optimizer::new(
            &[
                ("encoder", &model.encoder),
                ("mu_head", &model.mu_head),
                ("log_sigma_head", &model.log_sigma_head),
                ("decoder", &model.decoder),
            ],
            opt_cfg,
        );
        let noise = rng::stream(model.config.seed, "aae-noise");
        Ok(Self {
            model,
            disc_opt,
            ae_opt,
            noise,
        })
    }

    /// Training-mode encoder pass with the given `ε`.
    pub fn encoder_pass(&mut self, batch: &DMatrix<f64>, eps: DMatrix<f64>) -> Result<EncoderPass> {
        let (mu, log_sigma) = self.model.encode_mode(batch, Mode::Train)?;
        let z = sample_latent(&mu, &log_sigma, &eps);
        Ok(EncoderPass { mu, log_sigma, eps, z })
    }

    /// One Nadam step on the discriminator only.
    pub fn disc_step(&mut self, prior: &DMatrix<f64>, encoded: &DMatrix<f64>) -> Result<f64> {
        let input = vstack(prior, encoded);
        let logits = self.model.discriminator.forward(&input, Mode::Train, None)?;
        let (loss, grad) = two_sided_bce(&logits, prior.nrows());
        self.model.discriminator.backward(&grad)?;
        self.disc_opt.step(&mut [&mut self.model.discriminator])?;
        Ok(loss)
    }

    /// Adversarial + reconstruction loss of the autoencoder and its gradients,
    /// using the encoder intermediates cached by `pass`. Returns
    /// `(adv_loss, rec_mse)`.
    pub fn ae_backward(&mut self, batch: &DMatrix<f64>, pass: &EncoderPass) -> Result<(f64, f64)> {
        let m = &mut self.model;
        let logits = m.discriminator.forward(&pass.z, Mode::Infer, None)?;
        let (adv, dlogits) = bce_with_logits(&logits, 1.0);
        let dz_adv = m.discriminator.backward(&dlogits)?.into_batch()?;

        let recon = m.decoder.forward(&pass.z, Mode::Train, None)?;
        let rec = mse_loss(&recon, batch)?;
        let drecon = mse_grad(&recon, batch)? * m.config.rec_weight;
        let dz_rec = m.decoder.backward(&drecon)?.into_batch()?;

        let dz = dz_adv + dz_rec;
        let dlog_sigma = DMatrix::from_fn(dz.nrows(), dz.ncols(), |r, c| {
            dz[(r, c)] * pass.log_sigma[(r, c)].exp() * pass.eps[(r, c)]
        });
        let dh_mu = m.mu_head.backward(&dz)?.into_batch()?;
        let dh_sigma = m.log_sigma_head.backward(&dlog_sigma)?.into_batch()?;
        m.encoder.backward(&(dh_mu + dh_sigma))?;
        Ok((adv, rec))
    }

    /// One Nadam step on encoder and decoder only.
    pub fn ae_step(&mut self, batch: &DMatrix<f64>, eps: DMatrix<f64>) -> Result<(f64, f64)> {
        let pass = self.encoder_pass(batch, eps)?;
        let losses = self.ae_backward(batch, &pass)?;
        self.apply_ae_update()?;
        Ok(losses)
    }

    fn apply_ae_update(&mut self) -> Result<()> {
        let m = &mut self.model;
        self.ae_opt
            .step(&mut [&mut m.encoder, &mut m.mu_head, &mut m.log_sigma_head, &mut m.decoder])
    }

    /// Discriminator step followed by autoencoder step. Returns the losses
    /// and the encoder samples of this batch.
    pub fn train_batch(&mut self, batch: &DMatrix<f64>) -> Result<(AaeBatchLosses, DMatrix<f64>)> {
        let (rows, latent) = (batch.nrows(), self.model.config.latent_dim);
        let prior = standard_normal(rows, latent, &mut self.noise);
        let eps = standard_normal(rows, latent, &mut self.noise);
        let pass = self.encoder_pass(batch, eps)?;
        let disc_loss = self.disc_step(&prior, &pass.z)?;
        let (adv_loss, rec_mse) = self.ae_backward(batch, &pass)?;
        self.apply_ae_update()?;
        Ok((
            AaeBatchLosses {
                disc_loss,
                adv_loss,
                rec_mse,
            },
            pass.z,
        ))
    }
}

/// Splits `0..n` into shuffled batches; a trailing single row is dropped
/// because batch normalisation needs two samples.
pub(crate) fn shuffled_batches(n: usize, batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch_size)
        .filter(|c| c.len() >= 2)
        .map(|c| c.to_vec())
        .collect()
}

pub(crate) fn gather_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

/// Trains on scaled principal components, one row per time step.
pub fn train_aae(config: AaeConfig, scores: &DMatrix<f64>) -> Result<(AaeModel, AaeTrainingLog)> {
    if scores.ncols() != config.input_dim {
        return Err(Error::argument(format!(
            "scores have {} columns, config input_dim is {}",
            scores.ncols(),
            config.input_dim
        )));
    }
    if scores.nrows() < config.batch_size {
        return Err(Error::argument(format!(
            "{} rows is fewer than batch_size {}",
            scores.nrows(),
            config.batch_size
        )));
    }
    let mut shuffle = rng::stream(config.seed, "aae-shuffle");
    let epochs = config.epochs;
    let batch_size = config.batch_size;
    let mut trainer = AaeTrainer::new(config)?;
    let mut log = AaeTrainingLog::default();
    for epoch in 0..epochs {
        let batches = shuffled_batches(scores.nrows(), batch_size, &mut shuffle);
        let mut sums = [0.0; 3];
        let mut zs = Vec::with_capacity(batches.len());
        for (b, rows) in batches.iter().enumerate() {
            let batch = gather_rows(scores, rows);
            let (losses, z) = trainer.train_batch(&batch)?;
            if ![losses.disc_loss, losses.adv_loss, losses.rec_mse]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(Error::Numeric(format!(
                    "non-finite AAE loss at epoch {epoch}, batch {b}"
                )));
            }
            sums[0] += losses.disc_loss;
            sums[1] += losses.adv_loss;
            sums[2] += losses.rec_mse;
            zs.push(z);
        }
        let count = batches.len() as f64;
        let total: usize = zs.iter().map(|z| z.nrows()).sum();
        let mut all = DMatrix::zeros(total, trainer.model.config.latent_dim);
        let mut offset = 0;
        for z in &zs {
            all.rows_mut(offset, z.nrows()).copy_from(z);
            offset += z.nrows();
        }
        let (means, vars) = latent_moments(&all);
        log.epochs.push(AaeEpochLog {
            epoch,
            disc_loss: sums[0] / count,
            adv_loss: sums[1] / count,
            rec_mse: sums[2] / count,
            latent_mean_norm: means.iter().map(|m| m * m).sum::<f64>().sqrt(),
            latent_var_mean: vars.iter().sum::<f64>() / vars.len() as f64,
        });
        log::debug!(
            "aae epoch {epoch}: disc {:.4} adv {:.4} rec {:.5}",
            sums[0] / count,
            sums[1] / count,
            sums[2] / count
        );
    }
    Ok((trainer.model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{check_flat, DEFAULT_STEP};
    use crate::nn::{gather_flat, scatter_flat};
    use rand::SeedableRng;

    fn small_config() -> AaeConfig {
        let mut c = AaeConfig::new(12, 4);
        c.epochs = 2;
        c.batch_size = 8;
        c
    }

    #[test]
    fn ladder_matches_table_widths() {
        assert_eq!(encoder_ladder(32), vec![64, 32]);
        assert_eq!(encoder_ladder(16), vec![64, 32, 16]);
        assert_eq!(encoder_ladder(8), vec![64, 32, 16, 8]);
        assert_eq!(encoder_ladder(4), vec![64, 32, 16, 8, 4]);
        let c = AaeConfig::new(1000, 8);
        assert_eq!(c.decoder_widths, vec![16, 32, 64]);
    }

    #[test]
    fn latent_not_smaller_than_input_is_config_error() {
        assert!(matches!(AaeModel::new(AaeConfig::new(8, 8)), Err(Error::Config(_))));
    }

    #[test]
    fn zero_heads_give_zero_posterior() {
        let mut model = AaeModel::new(small_config()).unwrap();
        model.mu_head = model.mu_head.clone().zeroed();
        model.log_sigma_head = model.log_sigma_head.clone().zeroed();
        let p = DMatrix::from_fn(3, 12, |r, c| ((r + c) as f64).sin());
        let (mu, ls) = model.encode(&p).unwrap();
        assert!(mu.iter().chain(ls.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn encode_is_deterministic_and_checks_width() {
        let mut model = AaeModel::new(small_config()).unwrap();
        let p = DMatrix::from_fn(3, 12, |r, c| ((r * 3 + c) as f64).cos());
        assert_eq!(model.encode(&p).unwrap(), model.encode(&p).unwrap());
        assert!(model.encode(&DMatrix::zeros(1, 5)).is_err());
        assert!(model.decode(&DMatrix::zeros(1, 5)).is_err());
    }

    #[test]
    fn zero_decoder_outputs_midpoint() {
        let mut model = AaeModel::new(small_config()).unwrap();
        model.decoder = model.decoder.clone().zeroed();
        let out = model.decode(&DMatrix::from_element(2, 4, 0.7)).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decoder_output_bounded() {
        let mut model = AaeModel::new(small_config()).unwrap();
        let out = model.decode(&DMatrix::from_element(2, 4, 1e3)).unwrap();
        assert!(out.iter().all(|&v| v.abs() <= 1.0));
    }

    #[test]
    fn reparameterisation_identities() {
        let mu = DMatrix::from_row_slice(1, 2, &[0.5, -1.0]);
        let ls = DMatrix::from_row_slice(1, 2, &[0.2, -0.3]);
        assert_eq!(sample_latent(&mu, &ls, &DMatrix::zeros(1, 2)), mu);
        let eps = DMatrix::from_row_slice(1, 2, &[1.0, -2.0]);
        assert_eq!(sample_latent(&DMatrix::zeros(1, 2), &DMatrix::zeros(1, 2), &eps), eps);
    }

    #[test]
    fn untrained_zero_logit_discriminator_is_half() {
        let mut model = AaeModel::new(small_config()).unwrap();
        model.discriminator = model.discriminator.clone().zeroed();
        let p = model.discriminate_prior(&DMatrix::from_element(3, 4, 0.3)).unwrap();
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn discriminator_loss_floor_and_balance() {
        let half = DMatrix::from_element(4, 1, 0.5);
        let v = discriminator_loss(&half, &half).unwrap();
        assert!((v - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let perfect = discriminator_loss(&DMatrix::from_element(4, 1, 1.0), &DMatrix::zeros(4, 1)).unwrap();
        assert!(perfect < 1e-6);
    }

    /// Finite differences over every encoder/decoder parameter of the
    /// autoencoder loss, including the path through `z = μ + σ ⊙ ε`.
    #[test]
    fn autoencoder_gradient_through_sampling() {
        let mut cfg = AaeConfig::new(6, 2);
        cfg.encoder_widths = vec![5, 2];
        cfg.decoder_widths = vec![5];
        cfg.discriminator_widths = vec![3];
        let mut trainer = AaeTrainer::new(cfg).unwrap();
        let mut rng = Rng::seed_from_u64(17);
        let batch = standard_normal(5, 6, &mut rng).map(|v| 0.5 * v.tanh());
        let eps = standard_normal(5, 2, &mut rng);
        let pass = trainer.encoder_pass(&batch, eps.clone()).unwrap();
        trainer.ae_backward(&batch, &pass).unwrap();
        let m = &trainer.model;
        let nets = [&m.encoder, &m.mu_head, &m.log_sigma_head, &m.decoder];
        let params = gather_flat(&nets, false);
        let analytic = gather_flat(&nets, true);

        let mut work = trainer.model.clone();
        let report = check_flat(
            &params,
            &analytic,
            |theta| {
                scatter_flat(
                    &mut [
                        &mut work.encoder,
                        &mut work.mu_head,
                        &mut work.log_sigma_head,
                        &mut work.decoder,
                    ],
                    theta,
                );
                let (mu, ls) = work.encode_mode(&batch, Mode::Train).unwrap();
                let z = sample_latent(&mu, &ls, &eps);
                let logits = work.discriminator.forward(&z, Mode::Infer, None).unwrap();
                let adv = bce_with_logits(&logits, 1.0).0;
                let recon = work.decoder.forward(&z, Mode::Train, None).unwrap();
                adv + work.config.rec_weight * mse_loss(&recon, &batch).unwrap()
            },
            DEFAULT_STEP,
        );
        assert!(report.max_rel_error < 1e-3, "{report:?}");
    }

    #[test]
    fn train_small_logs_every_epoch() {
        let scores = DMatrix::from_fn(20, 12, |r, c| (r as f64 * 0.3 + c as f64).sin());
        let (_, log) = train_aae(small_config(), &scores).unwrap();
        assert_eq!(log.epochs.len(), 2);
        assert!(log.epochs.iter().all(|e| e.rec_mse.is_finite()));
    }

    #[test]
    fn checkpoint_round_trip() {
        let model = AaeModel::new(small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("aae.romnn");
        model.save(&path).unwrap();
        assert_eq!(AaeModel::load(&path).unwrap(), model);
    }
}
