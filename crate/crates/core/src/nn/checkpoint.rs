//! `ROMNN1` checkpoints: a JSON manifest section, one section per named
//! network listing layer kinds, shapes and f64 parameters, and optional
//! optimizer state sections.

use std::path::Path;

use super::{Activation, ActivationLayer, BatchNorm, Dense, Dropout, Layer, Lstm, NadamConfig, NadamState, Network};
use crate::binfmt::{self, Payload, Reader, Section};
use crate::error::{Error, Result};

const MAGIC: &[u8] = b"ROMNN1";

const KIND_DENSE: u32 = 1;
const KIND_ACTIVATION: u32 = 2;
const KIND_BATCHNORM: u32 = 3;
const KIND_DROPOUT: u32 = 4;
const KIND_LSTM: u32 = 5;

const ACT_LEAKY_RELU: u32 = 1;
const ACT_TANH: u32 = 2;
const ACT_SIGMOID: u32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// JSON text describing the model (kind, dimensions, config).
    pub manifest: String,
    pub networks: Vec<(String, Network)>,
    pub optimizers: Vec<(String, NadamState)>,
}

impl Checkpoint {
    pub fn network(&self, name: &str) -> Option<&Network> {
        self.networks.iter().find(|(n, _)| n == name).map(|(_, net)| net)
    }

    pub fn take_network(&mut self, name: &str, path: &Path) -> Result<Network> {
        let idx = self
            .networks
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::format(path, format!("checkpoint has no network `{name}`")))?;
        Ok(self.networks.remove(idx).1)
    }
}

fn encode_network(name: &str, net: &Network) -> Payload {
    let mut p = Payload::new();
    p.str(name).u32(net.layers.len() as u32);
    for layer in &net.layers {
        match layer {
            Layer::Dense(d) => {
                p.u32(KIND_DENSE).matrix(&d.weight.value).matrix(&d.bias.value);
            }
            Layer::Activation(a) => {
                p.u32(KIND_ACTIVATION);
                match a.kind {
                    Activation::LeakyRelu(slope) => p.u32(ACT_LEAKY_RELU).f64(slope),
                    Activation::Tanh => p.u32(ACT_TANH).f64(0.0),
                    Activation::Sigmoid => p.u32(ACT_SIGMOID).f64(0.0),
                };
            }
            Layer::BatchNorm(b) => {
                p.u32(KIND_BATCHNORM)
                    .matrix(&b.gamma.value)
                    .matrix(&b.beta.value)
                    .matrix(&b.running_mean)
                    .matrix(&b.running_var)
                    .f64(b.epsilon)
                    .f64(b.momentum);
            }
            Layer::Dropout(d) => {
                p.u32(KIND_DROPOUT).f64(d.rate);
            }
            Layer::Lstm(l) => {
                p.u32(KIND_LSTM)
                    .u64(l.input_dim() as u64)
                    .u64(l.hidden_size() as u64)
                    .matrix(&l.weight.value)
                    .matrix(&l.bias.value);
            }
        }
    }
    p
}

fn decode_network(rd: &mut Reader<'_>, path: &Path) -> Result<(String, Network)> {
    let name = rd.str()?;
    let count = rd.u32()?;
    let bad = |what: String| Error::format(path, format!("network `{name}`: {what}"));
    let mut layers = Vec::with_capacity(count as usize);
    for idx in 0..count {
        let kind = rd.u32()?;
        let layer = match kind {
            KIND_DENSE => {
                let w = rd.matrix()?;
                let b = rd.matrix()?;
                if b.shape() != (1, w.nrows()) {
                    return Err(bad(format!("layer {idx}: dense bias shape {:?}", b.shape())));
                }
                Layer::Dense(Dense::from_parts(w, b))
            }
            KIND_ACTIVATION => {
                let act = rd.u32()?;
                let slope = rd.f64()?;
                let kind = match act {
                    ACT_LEAKY_RELU => Activation::LeakyRelu(slope),
                    ACT_TANH => Activation::Tanh,
                    ACT_SIGMOID => Activation::Sigmoid,
                    other => return Err(bad(format!("layer {idx}: unknown activation {other}"))),
                };
                Layer::Activation(ActivationLayer::new(kind))
            }
            KIND_BATCHNORM => {
                let gamma = rd.matrix()?;
                let beta = rd.matrix()?;
                let rm = rd.matrix()?;
                let rv = rd.matrix()?;
                let eps = rd.f64()?;
                let momentum = rd.f64()?;
                let f = gamma.ncols();
                if [&beta, &rm, &rv].iter().any(|m| m.shape() != (1, f)) || gamma.nrows() != 1 {
                    return Err(bad(format!("layer {idx}: inconsistent batch norm shapes")));
                }
                if rv.iter().any(|&v| v < 0.0) || eps < 0.0 {
                    return Err(bad(format!("layer {idx}: negative variance or epsilon")));
                }
                let mut bn = BatchNorm::with_hyper(f, eps, momentum);
                bn.gamma.value = gamma;
                bn.beta.value = beta;
                bn.running_mean = rm;
                bn.running_var = rv;
                Layer::BatchNorm(bn)
            }
            KIND_DROPOUT => {
                let rate = rd.f64()?;
                Layer::Dropout(Dropout::new(rate).map_err(|e| bad(format!("layer {idx}: {e}")))?)
            }
            KIND_LSTM => {
                let input = rd.u64()? as usize;
                let hidden = rd.u64()? as usize;
                let w = rd.matrix()?;
                let b = rd.matrix()?;
                if hidden == 0 || w.shape() != (4 * hidden, input + hidden) || b.shape() != (1, 4 * hidden) {
                    return Err(bad(format!("layer {idx}: inconsistent lstm shapes")));
                }
                Layer::Lstm(Lstm::from_parts(input, hidden, w, b))
            }
            other => return Err(bad(format!("layer {idx}: unknown layer kind {other}"))),
        };
        layers.push(layer);
    }
    Ok((name, Network::new(layers)))
}

fn encode_optimizer(name: &str, s: &NadamState) -> Payload {
    let mut p = Payload::new();
    p.str(name)
        .u64(s.t)
        .f64(s.config.learning_rate)
        .f64(s.config.beta1)
        .f64(s.config.beta2)
        .f64(s.config.epsilon)
        .f64s(&s.m)
        .f64s(&s.v);
    p
}

fn decode_optimizer(rd: &mut Reader<'_>, path: &Path) -> Result<(String, NadamState)> {
    let name = rd.str()?;
    let t = rd.u64()?;
    let config = NadamConfig {
        learning_rate: rd.f64()?,
        beta1: rd.f64()?,
        beta2: rd.f64()?,
        epsilon: rd.f64()?,
    };
    let m = rd.f64s()?;
    let v = rd.f64s()?;
    if m.len() != v.len() {
        return Err(Error::format(
            path,
            format!("optimizer `{name}`: moment lengths differ"),
        ));
    }
    Ok((name, NadamState { m, v, t, config }))
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut sections = Vec::new();
    let mut manifest = Payload::new();
    manifest.str(&ckpt.manifest);
    sections.push(Section::new(b"MNFT", manifest));
    for (name, net) in &ckpt.networks {
        sections.push(Section::new(b"NETW", encode_network(name, net)));
    }
    for (name, state) in &ckpt.optimizers {
        sections.push(Section::new(b"OPTS", encode_optimizer(name, state)));
    }
    binfmt::write_sections(path, MAGIC, &sections)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let sections = binfmt::read_sections(path, MAGIC)?;
    let manifest_section = binfmt::find(&sections, b"MNFT", path)?;
    let manifest = Reader::new(&manifest_section.payload, path, "MNFT").str()?;
    let mut networks = Vec::new();
    let mut optimizers = Vec::new();
    for s in &sections {
        let mut rd = Reader::new(&s.payload, path, s.tag_str());
        match &s.tag {
            b"NETW" => networks.push(decode_network(&mut rd, path)?),
            b"OPTS" => optimizers.push(decode_optimizer(&mut rd, path)?),
            _ => continue,
        }
        if !rd.finished() {
            return Err(Error::format(
                path,
                format!("trailing bytes in {} section", s.tag_str()),
            ));
        }
    }
    Ok(Checkpoint {
        manifest,
        networks,
        optimizers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use rand::SeedableRng;

    #[test]
    fn round_trip_every_layer_kind() {
        let mut rng = Rng::seed_from_u64(1);
        let mut bn = BatchNorm::new(4);
        bn.running_mean.fill(0.25);
        let net = Network::new(vec![
            Layer::Lstm(Lstm::new(3, 4, &mut rng)),
            Layer::BatchNorm(bn),
            Layer::Dropout(Dropout::new(0.5).unwrap()),
            Layer::Activation(ActivationLayer::new(Activation::LeakyRelu(0.3))),
            Layer::Dense(Dense::new(4, 2, &mut rng)),
            Layer::Activation(ActivationLayer::new(Activation::Tanh)),
        ]);
        let mut state = NadamState::new(net.num_params(), NadamConfig::default());
        state.t = 7;
        state.m[0] = 0.5;
        let ckpt = Checkpoint {
            manifest: r#"{"kind":"test"}"#.into(),
            networks: vec![("g".into(), net)],
            optimizers: vec![("g".into(), state)],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.romnn");
        save_checkpoint(&path, &ckpt).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), ckpt);
    }

    #[test]
    fn wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.romnn");
        std::fs::write(&path, b"NOTROMNN").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
