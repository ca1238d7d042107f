//! Autoregressive roll-outs from many starts, decoded to physical space and
//! scored per step. A forecaster that returns the true deltas recovers the
//! reconstruction floor exactly.

use advrom::aae::{train_aae, AaeConfig};
use advrom::forecast::{
    divergence_step, ensemble_evaluate, reconstruction_curve, DeltaModel, PhysicalDecoder, TrueDeltaOracle,
};
use advrom::rom::{fit_pca, fit_scaling, scale};
use advrom::snapshots::{generate_synthetic_flow, SyntheticFlowConfig};

const LAG: usize = 5;
const HORIZON: usize = 80;

fn main() -> advrom::Result<()> {
    let x = generate_synthetic_flow(&SyntheticFlowConfig::default())?;
    let pca = fit_pca(&x.rows(0..240)?)?;
    let k = pca.numerical_rank();
    let scores = pca.scores.columns(0, k).into_owned();
    let scaling = fit_scaling(&scores)?;
    let mut cfg = AaeConfig::new(k, 8);
    cfg.epochs = 100;
    let (mut aae, _) = train_aae(cfg, &scale(&scores, &scaling)?)?;

    let mut dec = PhysicalDecoder {
        aae: &mut aae,
        rom: &pca,
        scaling: &scaling,
    };
    let latents = dec.encode(x.data())?;
    let starts: Vec<usize> = (150..=200).collect();

    let floor = reconstruction_curve(&latents, &x, &mut dec, &starts, HORIZON, LAG)?;
    let mut oracle = TrueDeltaOracle::new(latents.clone(), LAG)?;
    let mut models: Vec<(&str, &mut dyn DeltaModel)> = vec![("oracle", &mut oracle)];
    let curves = ensemble_evaluate(&mut models, &latents, &x, &mut dec, &starts, HORIZON)?;

    let gap = curves[0]
        .mean
        .iter()
        .zip(&floor.mean)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("{} starts, horizon {HORIZON}", starts.len());
    for h in [0, 19, 39, 79] {
        println!(
            "step {:>2}: oracle {:.4} +- {:.4}, reconstruction {:.4}",
            h + 1,
            curves[0].mean[h],
            curves[0].std[h],
            floor.mean[h]
        );
    }
    println!("largest oracle/reconstruction gap {gap:.1e}");

    let threshold: Vec<f64> = floor.mean.iter().map(|v| 2.0 * v).collect();
    println!(
        "first step above twice the floor: {:?}",
        divergence_step(&curves[0].mean, &threshold)
    );
    Ok(())
}
