//! PCA of the synthetic flow: singular spectrum and truncation error on
//! training and held-out snapshots.

use advrom::rom::{fit_pca, mae};
use advrom::snapshots::{generate_synthetic_flow, SyntheticFlowConfig};

fn main() -> advrom::Result<()> {
    let x = generate_synthetic_flow(&SyntheticFlowConfig::default())?;
    let (train, test) = (x.rows(0..240)?, x.rows(240..300)?);
    let pca = fit_pca(&train)?;

    println!(
        "retained {} components, numerical rank {}",
        pca.rank(),
        pca.numerical_rank()
    );
    let total = pca.discarded_energy(0);
    println!("{:>4} {:>10} {:>10} {:>10}", "tau", "train", "held-out", "energy");
    for tau in [1, 2, 4, 8, 12, 16, 32] {
        let err = |m: &nalgebra::DMatrix<f64>| -> advrom::Result<f64> {
            let p = pca.project_matrix(m, tau)?;
            Ok(mae(&pca.reconstruct_matrix(&p, tau)?, m))
        };
        println!(
            "{tau:>4} {:>10.2e} {:>10.2e} {:>10.2e}",
            err(train.data())?,
            err(test.data())?,
            pca.discarded_energy(tau) / total
        );
    }
    Ok(())
}
