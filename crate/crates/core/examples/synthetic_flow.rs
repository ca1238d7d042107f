//! Generates the synthetic two-component flow and writes it as a binary
//! snapshot file and a CSV.
//!
//! ```text
//! cargo run --example synthetic_flow -- /tmp/flow
//! ```

use std::path::PathBuf;

use advrom::snapshots::{
    generate_synthetic_flow, load_snapshots, save_snapshots, save_snapshots_csv, SyntheticFlowConfig,
};

fn main() -> advrom::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "target/synthetic_flow".into()),
    );
    std::fs::create_dir_all(&out).expect("create output directory");

    let cfg = SyntheticFlowConfig {
        noise_amplitude: 0.01,
        ..Default::default()
    };
    let x = generate_synthetic_flow(&cfg)?;
    println!(
        "{} snapshots of {} values ({} components)",
        x.n(),
        x.m(),
        x.layout().components
    );

    for c in 0..x.layout().components as usize {
        let cols = x.component_range(c);
        let block = x.data().columns(cols.start, cols.len());
        println!("component {c}: min {:+.3} max {:+.3}", block.min(), block.max());
    }

    let bin = out.join("flow.romsnap");
    save_snapshots(&x, &bin)?;
    save_snapshots_csv(&x, &out.join("flow.csv"))?;
    assert_eq!(load_snapshots(&bin)?, x);
    println!("wrote {}", out.display());
    Ok(())
}
