//! Trains the adversarial autoencoder on scaled principal components and
//! compares its held-out error with plain PCA truncation at the same width.

use advrom::aae::{latent_moments, train_aae, AaeConfig};
use advrom::forecast::PhysicalDecoder;
use advrom::rom::{fit_pca, fit_scaling, mae, scale};
use advrom::snapshots::{generate_synthetic_flow, SyntheticFlowConfig};

const LATENT: usize = 8;

fn main() -> advrom::Result<()> {
    let x = generate_synthetic_flow(&SyntheticFlowConfig::default())?;
    let (train, test) = (x.rows(0..240)?, x.rows(240..300)?);
    let pca = fit_pca(&train)?;
    let k = pca.numerical_rank();
    let scores = pca.scores.columns(0, k).into_owned();
    let scaling = fit_scaling(&scores)?;

    let mut cfg = AaeConfig::new(k, LATENT);
    cfg.epochs = 300;
    let (mut aae, log) = train_aae(cfg, &scale(&scores, &scaling)?)?;
    for e in log.epochs.iter().step_by(50) {
        println!(
            "epoch {:>3}: disc {:.3} adv {:.3} rec {:.2e}",
            e.epoch, e.disc_loss, e.adv_loss, e.rec_mse
        );
    }

    let mut dec = PhysicalDecoder {
        aae: &mut aae,
        rom: &pca,
        scaling: &scaling,
    };
    let z = dec.encode(test.data())?;
    let aae_mae = mae(&dec.decode(&z)?, test.data());
    let p = pca.project_matrix(test.data(), LATENT)?;
    let pca_mae = mae(&pca.reconstruct_matrix(&p, LATENT)?, test.data());
    println!("held-out MAE: autoencoder {aae_mae:.4}, PCA tau={LATENT} {pca_mae:.4}");

    let (mean, var) = latent_moments(&dec.encode(train.data())?);
    println!("latent mean {mean:.2?}");
    println!("latent var  {var:.2?}");
    Ok(())
}
