//! Trains the adversarial and the classic latent-delta forecaster from the
//! same initial generator on a small latent series and prints their
//! validation error.

use advrom::alstm::{evaluate_mse, make_windows, train_forecaster, ForecasterConfig, ForecasterMode};
use nalgebra::DMatrix;

fn main() -> advrom::Result<()> {
    // Two coupled oscillators plus a slow drift in a 4-d latent space.
    let series = DMatrix::from_fn(240, 4, |t, c| {
        let t = t as f64 * 0.1;
        match c {
            0 => t.sin(),
            1 => t.cos(),
            2 => 0.5 * (2.0 * t).sin(),
            _ => 0.3 * (0.2 * t).cos(),
        }
    });
    let windows = make_windows(&series, 5)?;
    let (_, val) = windows.split(0.8);

    for mode in [ForecasterMode::Adversarial, ForecasterMode::Classic] {
        let mut cfg = ForecasterConfig::new(4, mode);
        cfg.epochs = 60;
        cfg.hidden = 32;
        let (mut model, log) = train_forecaster(cfg, &windows)?;
        let last = log.epochs.last().expect("at least one epoch");
        println!(
            "{:<11} final train mse {:.2e} (dropout on), val mse {:.2e} (recomputed {:.2e})",
            mode.name(),
            last.gen_mse,
            last.val_mse,
            evaluate_mse(&mut model, &val)?
        );
    }
    Ok(())
}
