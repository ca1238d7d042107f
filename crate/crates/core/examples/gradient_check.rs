//! Finite-difference check of the hand-written backward passes.

use advrom::nn::gradcheck::{gradient_check, NetInput, DEFAULT_STEP};
use advrom::nn::{
    mse_grad, mse_loss, Activation, ActivationLayer, BatchNorm, Dense, Layer, Lstm, Mode, Network, LEAKY_RELU_SLOPE,
};
use advrom::rng::{self, Rng};
use nalgebra::DMatrix;
use rand::Rng as _;

fn random(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn main() -> advrom::Result<()> {
    let mut rng = rng::stream(7, "gradient-check-example");
    let target = random(6, 3, &mut rng);
    let loss = |y: &DMatrix<f64>| (mse_loss(y, &target).unwrap(), mse_grad(y, &target).unwrap());

    let mlp = Network::new(vec![
        Layer::Dense(Dense::new(4, 8, &mut rng)),
        Layer::BatchNorm(BatchNorm::new(8)),
        Layer::Activation(ActivationLayer::new(Activation::LeakyRelu(LEAKY_RELU_SLOPE))),
        Layer::Dense(Dense::new(8, 3, &mut rng)),
        Layer::Activation(ActivationLayer::new(Activation::Tanh)),
    ]);
    let x = random(6, 4, &mut rng);
    let r = gradient_check(&mlp, NetInput::Batch(&x), loss, Mode::Train, 1, DEFAULT_STEP)?;
    println!(
        "dense + batch norm: {} params, max rel error {:.2e}",
        r.checked, r.max_rel_error
    );

    let rnn = Network::new(vec![
        Layer::Lstm(Lstm::new(4, 5, &mut rng)),
        Layer::Dense(Dense::new(5, 3, &mut rng)),
    ]);
    let seq: Vec<_> = (0..5).map(|_| random(6, 4, &mut rng)).collect();
    let r = gradient_check(&rnn, NetInput::Sequence(&seq), loss, Mode::Train, 1, DEFAULT_STEP)?;
    println!("lstm: {} params, max rel error {:.2e}", r.checked, r.max_rel_error);
    Ok(())
}
