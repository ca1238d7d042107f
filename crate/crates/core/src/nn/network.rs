use std::ops::Range;

use nalgebra::DMatrix;

use super::{ActivationLayer, BatchNorm, Dense, Dropout, Lstm, Mode, Param};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Activation(ActivationLayer),
    BatchNorm(BatchNorm),
    Dropout(Dropout),
    /// Only valid as the first layer; consumes a sequence.
    Lstm(Lstm),
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Activation(_) => "activation",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Dropout(_) => "dropout",
            Layer::Lstm(_) => "lstm",
        }
    }

    fn params(&self) -> Vec<(&'static str, &Param)> {
        match self {
            Layer::Dense(d) => vec![("weight", &d.weight), ("bias", &d.bias)],
            Layer::BatchNorm(b) => vec![("gamma", &b.gamma), ("beta", &b.beta)],
            Layer::Lstm(l) => vec![("weight", &l.weight), ("bias", &l.bias)],
            Layer::Activation(_) | Layer::Dropout(_) => Vec::new(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Dense(d) => d.params_mut().into(),
            Layer::BatchNorm(b) => b.params_mut().into(),
            Layer::Lstm(l) => l.params_mut().into(),
            Layer::Activation(_) | Layer::Dropout(_) => Vec::new(),
        }
    }

    fn forward(&mut self, x: &DMatrix<f64>, mode: Mode, rng: Option<&mut Rng>) -> Result<DMatrix<f64>> {
        match self {
            Layer::Dense(d) => d.forward(x),
            Layer::Activation(a) => Ok(a.forward(x)),
            Layer::BatchNorm(b) => b.forward(x, mode),
            Layer::Dropout(d) => d.forward(x, mode, rng),
            Layer::Lstm(_) => Err(Error::argument("lstm layer must come first and receive a sequence")),
        }
    }

    fn backward(&mut self, dy: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            Layer::Dense(d) => d.backward(dy),
            Layer::Activation(a) => a.backward(dy),
            Layer::BatchNorm(b) => b.backward(dy),
            Layer::Dropout(d) => d.backward(dy),
            Layer::Lstm(_) => unreachable!("lstm handled by Network::backward"),
        }
    }
}

/// Gradient with respect to the network input.
#[derive(Debug, Clone, PartialEq)]
pub enum InputGrad {
    Batch(DMatrix<f64>),
    Sequence(Vec<DMatrix<f64>>),
}

impl InputGrad {
    pub fn into_batch(self) -> Result<DMatrix<f64>> {
        match self {
            InputGrad::Batch(m) => Ok(m),
            InputGrad::Sequence(_) => Err(Error::State("expected a batch input gradient".into())),
        }
    }

    pub fn into_sequence(self) -> Result<Vec<DMatrix<f64>>> {
        match self {
            InputGrad::Sequence(s) => Ok(s),
            InputGrad::Batch(_) => Err(Error::State("expected a sequence input gradient".into())),
        }
    }
}

/// Layer stack; the ordered parameter blocks give the flat view used by the
/// optimizer and the gradient checker.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn is_recurrent(&self) -> bool {
        matches!(self.layers.first(), Some(Layer::Lstm(_)))
    }

    pub fn forward(&mut self, x: &DMatrix<f64>, mode: Mode, mut rng: Option<&mut Rng>) -> Result<DMatrix<f64>> {
        if self.is_recurrent() {
            return Err(Error::argument("recurrent network needs forward_sequence"));
        }
        let mut out = x.clone();
        for layer in &mut self.layers {
            out = layer.forward(&out, mode, rng.as_deref_mut())?;
        }
        Ok(out)
    }

    pub fn forward_sequence(
        &mut self,
        xs: &[DMatrix<f64>],
        mode: Mode,
        mut rng: Option<&mut Rng>,
    ) -> Result<DMatrix<f64>> {
        let (head, rest) = self
            .layers
            .split_first_mut()
            .ok_or_else(|| Error::argument("empty network"))?;
        let Layer::Lstm(lstm) = head else {
            return Err(Error::argument("forward_sequence needs an lstm first layer"));
        };
        let mut out = lstm.forward(xs)?;
        for layer in rest {
            out = layer.forward(&out, mode, rng.as_deref_mut())?;
        }
        Ok(out)
    }

    /// Writes every parameter gradient and returns the input gradient.
    pub fn backward(&mut self, dy: &DMatrix<f64>) -> Result<InputGrad> {
        let mut grad = dy.clone();
        for layer in self.layers.iter_mut().rev() {
            if let Layer::Lstm(lstm) = layer {
                return Ok(InputGrad::Sequence(lstm.backward(&grad)?));
            }
            grad = layer.backward(&grad)?;
        }
        Ok(InputGrad::Batch(grad))
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers
            .iter()
            .flat_map(|l| l.params().into_iter().map(|(_, p)| p))
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    /// `(name, flat range)` per parameter block, e.g. `layer0.dense.weight`.
    pub fn param_blocks(&self) -> Vec<(String, Range<usize>)> {
        let mut offset = 0;
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, p) in layer.params() {
                out.push((format!("layer{i}.{}.{name}", layer.kind()), offset..offset + p.len()));
                offset += p.len();
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for p in self.params() {
            out.extend_from_slice(p.value.as_slice());
        }
        out
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for p in self.params() {
            out.extend_from_slice(p.grad.as_slice());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter length");
        let mut offset = 0;
        for p in self.params_mut() {
            let n = p.len();
            p.value.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers.iter().find_map(|l| match l {
            Layer::Dense(d) => Some(d.input_dim()),
            Layer::Lstm(l) => Some(l.input_dim()),
            Layer::BatchNorm(b) => Some(b.features()),
            _ => None,
        })
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.layers.iter().rev().find_map(|l| match l {
            Layer::Dense(d) => Some(d.output_dim()),
            Layer::Lstm(l) => Some(l.hidden_size()),
            Layer::BatchNorm(b) => Some(b.features()),
            _ => None,
        })
    }

    /// Every parameter set to zero; batch-norm scales stay at one.
    pub fn zeroed(mut self) -> Self {
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => {
                    d.weight.value.fill(0.0);
                    d.bias.value.fill(0.0);
                }
                Layer::Lstm(l) => {
                    l.weight.value.fill(0.0);
                    l.bias.value.fill(0.0);
                }
                _ => {}
            }
        }
        self
    }
}

/// Parameters (or gradients, with `grads`) of several networks, concatenated
/// in order.
pub fn gather_flat(nets: &[&Network], grads: bool) -> Vec<f64> {
    let mut out = Vec::new();
    for n in nets {
        out.extend(if grads { n.flat_grads() } else { n.flat_params() });
    }
    out
}

/// Inverse of [`gather_flat`] for parameter values.
pub fn scatter_flat(nets: &mut [&mut Network], flat: &[f64]) {
    let mut offset = 0;
    for n in nets.iter_mut() {
        let len = n.num_params();
        n.set_flat_params(&flat[offset..offset + len]);
        offset += len;
    }
    assert_eq!(offset, flat.len(), "flat parameter length");
}
