//! Runs every pipeline command on a reduced configuration and prints the
//! comparison written by `reproduce-fig2`.
//!
//! ```text
//! cargo run --release --example run_pipeline -- /tmp/advrom-run
//! ```

use advrom::pipeline::{run_all, RunConfig};

fn main() -> advrom::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/run_pipeline".into());
    let text = format!(
        r#"
seed = 3
output_dir = "{out}"

[aae]
epochs = 100

[forecaster.adversarial]
epochs = 40

[forecaster.classic]
epochs = 40

[evaluation]
horizon = 80
"#
    );
    let cfg = RunConfig::from_toml_str(&text, "inline".as_ref())?;
    for o in run_all(&cfg)? {
        println!("{}: {}", o.dir.display(), o.artifacts.join(", "));
    }
    let report = std::fs::read_to_string(cfg.output_dir.join("fig2/comparison.json")).expect("comparison.json");
    let v: serde_json::Value = serde_json::from_str(&report).expect("valid json");
    println!("winner at horizon: {}", v["winner_at_horizon"]);
    println!("mean at horizon: {}", v["mean_at_horizon"]);
    println!("divergence step: {}", v["divergence_step"]);
    Ok(())
}
