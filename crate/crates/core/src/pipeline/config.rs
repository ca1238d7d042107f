//! Run configuration: one TOML file with a section per pipeline stage.
//!
//! Every field has a default, so an empty file is a valid desk-scale run.
//! Validation reports every violated constraint with the line of the
//! offending key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aae::AaeConfig;
use crate::alstm::{DiscriminatorInput, ForecasterConfig, ForecasterMode};
use crate::error::{Error, Result};
use crate::nn::NadamConfig;
use crate::rng::derive_seed;
use crate::rom::TAU_GRID;
use crate::snapshots::SyntheticFlowConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Global seed; every stochastic stage derives its own seed from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataSection,
    pub rom: RomSection,
    pub aae: AaeSection,
    pub forecaster: ForecasterSections,
    pub evaluation: EvaluationSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            data: DataSection::default(),
            rom: RomSection::default(),
            aae: AaeSection::default(),
            forecaster: ForecasterSections::default(),
            evaluation: EvaluationSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub source: DataSource,
    /// Snapshot file, used when `source = "file"`.
    pub path: Option<PathBuf>,
    /// Also write the snapshots as CSV.
    pub export_csv: bool,
    pub synthetic: SyntheticSection,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            path: None,
            export_csv: false,
            synthetic: SyntheticSection::default(),
        }
    }
}

/// Synthetic flow parameters; the generator seed comes from the global seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSection {
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub n_steps: usize,
    pub n_modes: usize,
    pub noise_amplitude: f64,
    pub dt: f64,
    pub period_steps: f64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let d = SyntheticFlowConfig::default();
        Self {
            grid_nx: d.grid_nx,
            grid_ny: d.grid_ny,
            n_steps: d.n_steps,
            n_modes: d.n_modes,
            noise_amplitude: d.noise_amplitude,
            dt: d.dt,
            period_steps: d.period_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RomSection {
    pub tau_grid: Vec<usize>,
    /// Leading fraction of snapshots used to fit PCA, scaling and the AAE.
    pub train_fraction: f64,
}

impl Default for RomSection {
    fn default() -> Self {
        Self {
            tau_grid: TAU_GRID.to_vec(),
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AaeSection {
    pub latent_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub rec_weight: f64,
    pub discriminator_widths: Vec<usize>,
    pub optimizer: NadamConfig,
}

impl Default for AaeSection {
    fn default() -> Self {
        let d = AaeConfig::new(usize::MAX, 8);
        Self {
            latent_dim: d.latent_dim,
            epochs: d.epochs,
            batch_size: d.batch_size,
            rec_weight: d.rec_weight,
            discriminator_widths: d.discriminator_widths,
            optimizer: d.optimizer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ForecasterSections {
    pub adversarial: ForecasterSection,
    pub classic: ForecasterSection,
}

impl ForecasterSections {
    pub fn get(&self, mode: ForecasterMode) -> &ForecasterSection {
        match mode {
            ForecasterMode::Adversarial => &self.adversarial,
            ForecasterMode::Classic => &self.classic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecasterSection {
    pub time_lag: usize,
    pub hidden: usize,
    pub disc_input: DiscriminatorInput,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub rec_weight: f64,
    pub train_fraction: f64,
    pub optimizer: NadamConfig,
}

impl Default for ForecasterSection {
    fn default() -> Self {
        let d = ForecasterConfig::new(1, ForecasterMode::Classic);
        Self {
            time_lag: d.time_lag,
            hidden: d.hidden,
            disc_input: d.disc_input,
            dropout: d.dropout,
            batch_size: d.batch_size,
            epochs: d.epochs,
            rec_weight: d.rec_weight,
            train_fraction: d.train_fraction,
            optimizer: d.optimizer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    /// First and last ensemble start index, inclusive.
    pub start_first: usize,
    pub start_last: usize,
    pub horizon: usize,
    /// Divergence threshold as a multiple of the reconstruction-only error.
    pub divergence_factor: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            start_first: 150,
            start_last: 200,
            horizon: 100,
            divergence_factor: 2.0,
        }
    }
}

impl EvaluationSection {
    pub fn starts(&self) -> Vec<usize> {
        (self.start_first..=self.start_last).collect()
    }
}

/// Seeds handed to each stage, all derived from the global seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageSeeds {
    pub global: u64,
    pub data: u64,
    pub aae: u64,
    /// Shared by both forecaster modes so their generators start identical.
    pub forecaster: u64,
}

impl RunConfig {
    pub fn seeds(&self) -> StageSeeds {
        StageSeeds {
            global: self.seed,
            data: derive_seed(self.seed, "data"),
            aae: derive_seed(self.seed, "aae"),
            forecaster: derive_seed(self.seed, "forecaster"),
        }
    }

    /// Seed for the extra autoencoder trained at latent width `tau`.
    pub fn aae_seed_for_latent(&self, tau: usize) -> u64 {
        if tau == self.aae.latent_dim {
            self.seeds().aae
        } else {
            derive_seed(self.seed, &format!("aae-latent-{tau}"))
        }
    }

    pub fn synthetic_config(&self) -> SyntheticFlowConfig {
        let s = &self.data.synthetic;
        SyntheticFlowConfig {
            grid_nx: s.grid_nx,
            grid_ny: s.grid_ny,
            n_steps: s.n_steps,
            n_modes: s.n_modes,
            seed: self.seeds().data,
            noise_amplitude: s.noise_amplitude,
            dt: s.dt,
            period_steps: s.period_steps,
        }
    }

    pub fn aae_config(&self, input_dim: usize, latent_dim: usize, seed: u64) -> AaeConfig {
        let mut c = AaeConfig::new(input_dim, latent_dim);
        c.epochs = self.aae.epochs;
        c.batch_size = self.aae.batch_size;
        c.rec_weight = self.aae.rec_weight;
        c.discriminator_widths = self.aae.discriminator_widths.clone();
        c.optimizer = self.aae.optimizer;
        c.seed = seed;
        c
    }

    pub fn forecaster_config(&self, mode: ForecasterMode) -> ForecasterConfig {
        let s = self.forecaster.get(mode);
        ForecasterConfig {
            latent_dim: self.aae.latent_dim,
            time_lag: s.time_lag,
            hidden: s.hidden,
            mode,
            disc_input: s.disc_input,
            dropout: s.dropout,
            batch_size: s.batch_size,
            epochs: s.epochs,
            seed: self.seeds().forecaster,
            rec_weight: s.rec_weight,
            train_fraction: s.train_fraction,
            optimizer: s.optimizer,
        }
    }

    /// Parses and validates `text`; `origin` only labels messages.
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of_offset(text, s.start));
            let msg = e.message().trim().to_string();
            Error::Config(vec![match line {
                Some(l) => format!("{}:{l}: {msg}", origin.display()),
                None => format!("{}: {msg}", origin.display()),
            }])
        })?;
        let violations = cfg.violations();
        if violations.is_empty() {
            return Ok(cfg);
        }
        Err(Error::Config(
            violations
                .into_iter()
                .map(|(key, msg)| match line_of_key(text, &key) {
                    Some(l) => format!("{}:{l}: {key}: {msg}", origin.display()),
                    None => format!("{}: {key} (default): {msg}", origin.display()),
                })
                .collect(),
        ))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    /// Every violated constraint as `(dotted key, message)`.
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut v = Vec::new();
        let mut check = |ok: bool, key: &str, msg: String| {
            if !ok {
                v.push((key.to_string(), msg));
            }
        };

        let d = &self.data;
        match d.source {
            DataSource::File => match &d.path {
                None => check(false, "data.path", "required when data.source = \"file\"".into()),
                Some(p) => check(p.is_file(), "data.path", format!("{} does not exist", p.display())),
            },
            DataSource::Synthetic => {
                let s = &d.synthetic;
                check(
                    s.grid_nx >= 1,
                    "data.synthetic.grid_nx",
                    format!("must be >= 1, got {}", s.grid_nx),
                );
                check(
                    s.grid_ny >= 1,
                    "data.synthetic.grid_ny",
                    format!("must be >= 1, got {}", s.grid_ny),
                );
                check(
                    s.n_steps >= 2,
                    "data.synthetic.n_steps",
                    format!("must be >= 2, got {}", s.n_steps),
                );
                check(
                    s.n_modes >= 1,
                    "data.synthetic.n_modes",
                    format!("must be >= 1, got {}", s.n_modes),
                );
                check(
                    s.noise_amplitude.is_finite() && s.noise_amplitude >= 0.0,
                    "data.synthetic.noise_amplitude",
                    format!("must be finite and >= 0, got {}", s.noise_amplitude),
                );
                check(
                    s.dt.is_finite() && s.dt > 0.0,
                    "data.synthetic.dt",
                    format!("must be positive, got {}", s.dt),
                );
                check(
                    s.period_steps.is_finite() && s.period_steps > 0.0,
                    "data.synthetic.period_steps",
                    format!("must be positive, got {}", s.period_steps),
                );
            }
        }

        let r = &self.rom;
        check(!r.tau_grid.is_empty(), "rom.tau_grid", "must not be empty".into());
        check(
            r.tau_grid.iter().all(|&t| t >= 1),
            "rom.tau_grid",
            format!("entries must be positive, got {:?}", r.tau_grid),
        );
        check(
            r.train_fraction > 0.0 && r.train_fraction < 1.0,
            "rom.train_fraction",
            format!("must be in (0, 1), got {}", r.train_fraction),
        );

        let a = &self.aae;
        check(
            a.latent_dim >= 1,
            "aae.latent_dim",
            format!("must be >= 1, got {}", a.latent_dim),
        );
        check(a.epochs >= 1, "aae.epochs", format!("must be >= 1, got {}", a.epochs));
        check(
            a.batch_size >= 2,
            "aae.batch_size",
            format!("must be >= 2, got {}", a.batch_size),
        );
        check(
            a.rec_weight.is_finite() && a.rec_weight >= 0.0,
            "aae.rec_weight",
            format!("must be finite and >= 0, got {}", a.rec_weight),
        );
        check(
            a.discriminator_widths.iter().all(|&w| w >= 1),
            "aae.discriminator_widths",
            "widths must be positive".into(),
        );
        check(
            a.optimizer.learning_rate > 0.0,
            "aae.optimizer.learning_rate",
            format!("must be positive, got {}", a.optimizer.learning_rate),
        );

        for mode in [ForecasterMode::Adversarial, ForecasterMode::Classic] {
            let f = self.forecaster.get(mode);
            let key = |k: &str| format!("forecaster.{}.{k}", mode.name());
            check(
                f.time_lag >= 1,
                &key("time_lag"),
                format!("must be >= 1, got {}", f.time_lag),
            );
            check(f.hidden >= 1, &key("hidden"), format!("must be >= 1, got {}", f.hidden));
            check(
                (0.0..1.0).contains(&f.dropout),
                &key("dropout"),
                format!("must be in [0, 1), got {}", f.dropout),
            );
            check(
                f.batch_size >= 2,
                &key("batch_size"),
                format!("must be >= 2, got {}", f.batch_size),
            );
            check(f.epochs >= 1, &key("epochs"), format!("must be >= 1, got {}", f.epochs));
            check(
                f.rec_weight.is_finite() && f.rec_weight >= 0.0,
                &key("rec_weight"),
                format!("must be finite and >= 0, got {}", f.rec_weight),
            );
            check(
                f.train_fraction > 0.0 && f.train_fraction <= 1.0,
                &key("train_fraction"),
                format!("must be in (0, 1], got {}", f.train_fraction),
            );
            check(
                f.optimizer.learning_rate > 0.0,
                &key("optimizer.learning_rate"),
                format!("must be positive, got {}", f.optimizer.learning_rate),
            );
            check(
                self.evaluation.start_first >= f.time_lag,
                "evaluation.start_first",
                format!(
                    "must be >= the {} forecaster time lag {}, got {}",
                    mode.name(),
                    f.time_lag,
                    self.evaluation.start_first
                ),
            );
        }

        let e = &self.evaluation;
        check(
            e.start_first <= e.start_last,
            "evaluation.start_last",
            format!("must be >= start_first ({}), got {}", e.start_first, e.start_last),
        );
        check(
            e.horizon >= 1,
            "evaluation.horizon",
            format!("must be >= 1, got {}", e.horizon),
        );
        check(
            e.divergence_factor.is_finite() && e.divergence_factor > 0.0,
            "evaluation.divergence_factor",
            format!("must be positive, got {}", e.divergence_factor),
        );
        if d.source == DataSource::Synthetic {
            let n = d.synthetic.n_steps;
            check(
                e.start_last + e.horizon <= n,
                "evaluation.start_last",
                format!(
                    "start {} plus horizon {} exceeds the {n} generated steps",
                    e.start_last, e.horizon
                ),
            );
        }
        v
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line on which the dotted `key` is assigned, following table
/// headers and dotted keys.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    let mut table = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            table = header.trim().trim_matches(['[', ']']).trim().to_string();
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else {
            continue;
        };
        let local: String = lhs
            .split('.')
            .map(|p| p.trim().trim_matches('"'))
            .collect::<Vec<_>>()
            .join(".");
        let full = if table.is_empty() {
            local
        } else {
            format!("{table}.{local}")
        };
        if full == key {
            return Some(i + 1);
        }
    }
    None
}
