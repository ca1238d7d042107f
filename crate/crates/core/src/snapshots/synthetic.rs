//! Analytic vortex-superposition flow used as the training corpus.
//!
//! Mode 0 is a standing vortex cell whose strength pulses in time. Every other
//! mode is a row of vortex cells translating along x at the j-th harmonic of
//! the base frequency, so it spans exactly two spatial patterns. Modes take
//! distinct wavenumber pairs from a seeded permutation of {1,2,3}², cycling
//! once there are more than nine. All amplitude envelopes share the base
//! period, which makes the noiseless field periodic: many principal
//! components, one underlying phase.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ComponentLayout, SnapshotMatrix};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticFlowConfig {
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub n_steps: usize,
    pub n_modes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise_amplitude: f64,
    /// Seconds per step.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Base period of the flow in steps.
    #[serde(default = "default_period")]
    pub period_steps: f64,
}

fn default_dt() -> f64 {
    1.0
}

fn default_period() -> f64 {
    100.0
}

impl Default for SyntheticFlowConfig {
    fn default() -> Self {
        Self {
            grid_nx: 16,
            grid_ny: 16,
            n_steps: 300,
            n_modes: 8,
            seed: 0,
            noise_amplitude: 0.0,
            dt: default_dt(),
            period_steps: default_period(),
        }
    }
}

impl SyntheticFlowConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.grid_nx == 0 || self.grid_ny == 0 {
            v.push(format!(
                "grid must be at least 1x1, got {}x{}",
                self.grid_nx, self.grid_ny
            ));
        }
        if self.n_steps < 2 {
            v.push(format!("n_steps must be >= 2, got {}", self.n_steps));
        }
        if self.n_modes == 0 {
            v.push("n_modes must be >= 1".into());
        }
        if !(self.noise_amplitude.is_finite() && self.noise_amplitude >= 0.0) {
            v.push(format!(
                "noise_amplitude must be finite and >= 0, got {}",
                self.noise_amplitude
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            v.push(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.period_steps.is_finite() && self.period_steps > 0.0) {
            v.push(format!("period_steps must be positive, got {}", self.period_steps));
        }
        v
    }

    pub fn m(&self) -> usize {
        self.grid_nx * self.grid_ny * 2
    }
}

struct Mode {
    kx: f64,
    ky: f64,
    strength: f64,
    harmonic: f64,
    phase: f64,
    envelope_phase: f64,
    envelope_depth: f64,
}

/// Velocity of one mode at normalized position (x, y) with travelling phase
/// `theta`. Mode 0 ignores `theta`.
fn mode_velocity(mode: &Mode, standing: bool, x: f64, y: f64, theta: f64) -> (f64, f64) {
    if standing {
        // stream function sin(pi kx x) sin(pi ky y)
        let norm = PI * mode.kx.max(mode.ky);
        let u = PI * mode.ky * (PI * mode.kx * x).sin() * (PI * mode.ky * y).cos();
        let v = -PI * mode.kx * (PI * mode.kx * x).cos() * (PI * mode.ky * y).sin();
        (u / norm, v / norm)
    } else {
        // stream function sin(pi ky y) cos(2 pi kx x - theta)
        let norm = PI * (2.0 * mode.kx).max(mode.ky);
        let arg = 2.0 * PI * mode.kx * x - theta;
        let u = PI * mode.ky * (PI * mode.ky * y).cos() * arg.cos();
        let v = 2.0 * PI * mode.kx * (PI * mode.ky * y).sin() * arg.sin();
        (u / norm, v / norm)
    }
}

pub fn generate_synthetic_flow(cfg: &SyntheticFlowConfig) -> Result<SnapshotMatrix> {
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    let mut rng = rng::stream(cfg.seed, "synthetic-flow");
    let mut wavenumbers: Vec<(f64, f64)> = (1..=3)
        .flat_map(|kx| (1..=3).map(move |ky| (kx as f64, ky as f64)))
        .collect();
    wavenumbers.shuffle(&mut rng);
    let modes: Vec<Mode> = (0..cfg.n_modes)
        .map(|j| Mode {
            kx: wavenumbers[j % wavenumbers.len()].0,
            ky: wavenumbers[j % wavenumbers.len()].1,
            strength: if j == 0 { 1.0 } else { 1.0 / (j as f64).sqrt() },
            harmonic: j as f64,
            phase: rng.random_range(0.0..2.0 * PI),
            envelope_phase: rng.random_range(0.0..2.0 * PI),
            envelope_depth: if j == 0 { 0.5 } else { 0.3 },
        })
        .collect();

    let (nx, ny) = (cfg.grid_nx, cfg.grid_ny);
    let cells = nx * ny;
    let omega = 2.0 * PI / cfg.period_steps;
    let mut data = DMatrix::zeros(cfg.n_steps, 2 * cells);
    for t in 0..cfg.n_steps {
        let phase = omega * t as f64;
        for (j, mode) in modes.iter().enumerate() {
            let amp = mode.strength * (1.0 + mode.envelope_depth * (phase + mode.envelope_phase).sin());
            let theta = mode.harmonic * phase + mode.phase;
            for iy in 0..ny {
                let y = (iy as f64 + 0.5) / ny as f64;
                for ix in 0..nx {
                    let x = (ix as f64 + 0.5) / nx as f64;
                    let (u, v) = mode_velocity(mode, j == 0, x, y, theta);
                    let cell = iy * nx + ix;
                    data[(t, cell)] += amp * u;
                    data[(t, cells + cell)] += amp * v;
                }
            }
        }
    }
    if cfg.noise_amplitude > 0.0 {
        let mut noise_rng = rng::stream(cfg.seed, "synthetic-noise");
        let normal = Normal::new(0.0, cfg.noise_amplitude).expect("validated amplitude");
        for v in data.iter_mut() {
            *v += normal.sample(&mut noise_rng);
        }
    }
    SnapshotMatrix::new(data, cfg.dt, ComponentLayout::VELOCITY_2D)
}
