//! LSTM layer over a sequence, emitting the final hidden state.
//!
//! Gate pre-activations are `[x_t, h_{t-1}] Wᵀ + b` with the rows of `W`
//! stacked as input, forget, candidate and output blocks of `hidden` rows each.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use super::{activation::sigmoid, add_row_bias, column_sums, glorot_limit, Param};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    /// 4·hidden × (input + hidden)
    pub weight: Param,
    /// 1 × 4·hidden
    pub bias: Param,
    input: usize,
    hidden: usize,
    cache: Option<Cache>,
}

#[derive(Debug, Clone, PartialEq)]
struct Cache {
    concat: Vec<DMatrix<f64>>,
    i: Vec<DMatrix<f64>>,
    f: Vec<DMatrix<f64>>,
    g: Vec<DMatrix<f64>>,
    o: Vec<DMatrix<f64>>,
    // c[0] is the initial state
    c: Vec<DMatrix<f64>>,
    tanh_c: Vec<DMatrix<f64>>,
}

struct Gates {
    i: DMatrix<f64>,
    f: DMatrix<f64>,
    g: DMatrix<f64>,
    o: DMatrix<f64>,
}

impl Lstm {
    /// Glorot-uniform gate weights; forget-gate bias 1, other biases 0.
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let limit = glorot_limit(input + hidden, hidden);
        let w = DMatrix::from_fn(4 * hidden, input + hidden, |_, _| rng.random_range(-limit..=limit));
        let mut b = DMatrix::zeros(1, 4 * hidden);
        for k in hidden..2 * hidden {
            b[(0, k)] = 1.0;
        }
        Self::from_parts(input, hidden, w, b)
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self::from_parts(
            input,
            hidden,
            DMatrix::zeros(4 * hidden, input + hidden),
            DMatrix::zeros(1, 4 * hidden),
        )
    }

    pub fn from_parts(input: usize, hidden: usize, weight: DMatrix<f64>, bias: DMatrix<f64>) -> Self {
        assert!(hidden > 0, "hidden size must be positive");
        assert_eq!(weight.shape(), (4 * hidden, input + hidden), "gate weight shape");
        assert_eq!(bias.shape(), (1, 4 * hidden), "gate bias shape");
        Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
            input,
            hidden,
            cache: None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    fn gates(&self, concat: &DMatrix<f64>) -> Gates {
        let h = self.hidden;
        let mut a = concat * self.weight.value.transpose();
        add_row_bias(&mut a, &self.bias.value);
        let block = |k: usize, f: fn(f64) -> f64| a.columns(k * h, h).map(f);
        Gates {
            i: block(0, sigmoid),
            f: block(1, sigmoid),
            g: block(2, f64::tanh),
            o: block(3, sigmoid),
        }
    }

    fn concat(&self, x: &DMatrix<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(x.nrows(), self.input + self.hidden);
        z.columns_mut(0, self.input).copy_from(x);
        z.columns_mut(self.input, self.hidden).copy_from(h);
        z
    }

    /// Runs the sequence from zero state and returns the last hidden state.
    pub fn forward(&mut self, xs: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        let first = xs
            .first()
            .ok_or_else(|| Error::argument("lstm needs a sequence of length >= 1"))?;
        let batch = first.nrows();
        for x in xs {
            if x.shape() != (batch, self.input) {
                return Err(Error::argument(format!(
                    "lstm step expects {batch}x{}, got {}x{}",
                    self.input,
                    x.nrows(),
                    x.ncols()
                )));
            }
        }
        let t_len = xs.len();
        let mut cache = Cache {
            concat: Vec::with_capacity(t_len),
            i: Vec::with_capacity(t_len),
            f: Vec::with_capacity(t_len),
            g: Vec::with_capacity(t_len),
            o: Vec::with_capacity(t_len),
            c: Vec::with_capacity(t_len + 1),
            tanh_c: Vec::with_capacity(t_len),
        };
        let mut h = DMatrix::zeros(batch, self.hidden);
        cache.c.push(DMatrix::zeros(batch, self.hidden));
        for x in xs {
            let z = self.concat(x, &h);
            let gates = self.gates(&z);
            let c_prev = cache.c.last().expect("initial state pushed");
            let c = gates.f.component_mul(c_prev) + gates.i.component_mul(&gates.g);
            let tc = c.map(f64::tanh);
            h = gates.o.component_mul(&tc);
            cache.concat.push(z);
            cache.i.push(gates.i);
            cache.f.push(gates.f);
            cache.g.push(gates.g);
            cache.o.push(gates.o);
            cache.c.push(c);
            cache.tanh_c.push(tc);
        }
        self.cache = Some(cache);
        Ok(h)
    }

    /// Backpropagation through time from the gradient of the last hidden
    /// state. Returns one input gradient per time step.
    pub fn backward(&mut self, dh_last: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("lstm backward called before forward".into()))?;
        let t_len = cache.concat.len();
        let batch = cache.concat[0].nrows();
        let h = self.hidden;
        if dh_last.shape() != (batch, h) {
            return Err(Error::argument("lstm backward: gradient shape mismatch"));
        }
        let mut dw = DMatrix::zeros(4 * h, self.input + h);
        let mut db = DMatrix::zeros(1, 4 * h);
        let mut dxs = vec![DMatrix::zeros(0, 0); t_len];
        let mut dh = dh_last.clone();
        let mut dc_next = DMatrix::<f64>::zeros(batch, h);
        for t in (0..t_len).rev() {
            let (i, f, g, o) = (&cache.i[t], &cache.f[t], &cache.g[t], &cache.o[t]);
            let tc = &cache.tanh_c[t];
            let c_prev = &cache.c[t];
            let mut da = DMatrix::zeros(batch, 4 * h);
            for r in 0..batch {
                for k in 0..h {
                    let dc = dc_next[(r, k)] + dh[(r, k)] * o[(r, k)] * (1.0 - tc[(r, k)] * tc[(r, k)]);
                    let d_o = dh[(r, k)] * tc[(r, k)];
                    let d_i = dc * g[(r, k)];
                    let d_g = dc * i[(r, k)];
                    let d_f = dc * c_prev[(r, k)];
                    dc_next[(r, k)] = dc * f[(r, k)];
                    da[(r, k)] = d_i * i[(r, k)] * (1.0 - i[(r, k)]);
                    da[(r, h + k)] = d_f * f[(r, k)] * (1.0 - f[(r, k)]);
                    da[(r, 2 * h + k)] = d_g * (1.0 - g[(r, k)] * g[(r, k)]);
                    da[(r, 3 * h + k)] = d_o * o[(r, k)] * (1.0 - o[(r, k)]);
                }
            }
            dw += da.transpose() * &cache.concat[t];
            db += column_sums(&da);
            let dz = &da * &self.weight.value;
            dxs[t] = dz.columns(0, self.input).into_owned();
            dh = dz.columns(self.input, h).into_owned();
        }
        self.weight.grad = dw;
        self.bias.grad = db;
        Ok(dxs)
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

/// One cell update for a single sample: returns `(h', c')`.
pub fn lstm_step(
    layer: &Lstm,
    x: &DVector<f64>,
    h: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if x.len() != layer.input || h.len() != layer.hidden || c.len() != layer.hidden {
        return Err(Error::argument(format!(
            "lstm_step expects input {} and state {}, got {}, {}, {}",
            layer.input,
            layer.hidden,
            x.len(),
            h.len(),
            c.len()
        )));
    }
    let xr = DMatrix::from_row_slice(1, x.len(), x.as_slice());
    let hr = DMatrix::from_row_slice(1, h.len(), h.as_slice());
    let gates = layer.gates(&layer.concat(&xr, &hr));
    let c_next = DVector::from_fn(layer.hidden, |k, _| {
        gates.f[(0, k)] * c[k] + gates.i[(0, k)] * gates.g[(0, k)]
    });
    let h_next = DVector::from_fn(layer.hidden, |k, _| gates.o[(0, k)] * c_next[k].tanh());
    Ok((h_next, c_next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_fixed_point() {
        let layer = Lstm::zeros(2, 3);
        let (h, c) = lstm_step(&layer, &DVector::zeros(2), &DVector::zeros(3), &DVector::zeros(3)).unwrap();
        assert!(h.iter().chain(c.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn half_open_gates() {
        let layer = Lstm::zeros(1, 1);
        let (h, c) = lstm_step(
            &layer,
            &DVector::zeros(1),
            &DVector::zeros(1),
            &DVector::from_element(1, 1.0),
        )
        .unwrap();
        assert!((c[0] - 0.5).abs() < 1e-15);
        let expected = 0.5 * 0.5f64.tanh();
        assert!((h[0] - expected).abs() < 1e-15);
        assert!((h[0] - 0.231).abs() < 1e-3);
    }

    #[test]
    fn shape_mismatch() {
        let layer = Lstm::zeros(2, 3);
        assert!(lstm_step(&layer, &DVector::zeros(3), &DVector::zeros(3), &DVector::zeros(3)).is_err());
        let mut layer = layer;
        assert!(layer.forward(&[DMatrix::zeros(1, 3)]).is_err());
        assert!(matches!(layer.backward(&DMatrix::zeros(1, 3)), Err(Error::State(_))));
    }

    #[test]
    fn sequence_matches_repeated_steps() {
        let mut rng = Rng::seed_from_u64(5);
        let mut layer = Lstm::new(2, 4, &mut rng);
        let xs: Vec<DMatrix<f64>> = (0..3)
            .map(|t| DMatrix::from_row_slice(1, 2, &[0.3 * t as f64, -0.2]))
            .collect();
        let h_seq = layer.forward(&xs).unwrap();
        let (mut h, mut c) = (DVector::zeros(4), DVector::zeros(4));
        for x in &xs {
            let xv = DVector::from_row_slice(x.as_slice());
            (h, c) = lstm_step(&layer, &xv, &h, &c).unwrap();
        }
        for k in 0..4 {
            assert!((h_seq[(0, k)] - h[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn forget_bias_initialised_to_one() {
        let layer = Lstm::new(3, 2, &mut Rng::seed_from_u64(0));
        assert_eq!(layer.bias.value.as_slice(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
