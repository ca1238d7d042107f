use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use advrom::alstm::ForecasterMode;
use advrom::pipeline::{self, Command, RunConfig};

#[derive(Parser)]
#[command(
    name = "advrom",
    version,
    about = "Adversarial reduced-order forecasting of snapshot fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Shared {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, value_name = "PATH", global = true)]
    config: Option<PathBuf>,
    /// Output root, overrides `output_dir`.
    #[arg(long, value_name = "DIR", global = true)]
    out: Option<PathBuf>,
    /// Global seed, overrides `seed`.
    #[arg(long, value_name = "U64", global = true)]
    seed: Option<u64>,
    /// Only log warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate or import the snapshot matrix.
    GenData(Shared),
    /// Fit PCA and the component scaling; write the truncation table.
    FitRom(Shared),
    /// Train the adversarial autoencoder on the scaled components.
    TrainAae(Shared),
    /// Train a latent-delta forecaster.
    TrainForecaster {
        #[arg(long, value_enum)]
        mode: Mode,
        #[command(flatten)]
        shared: Shared,
    },
    /// Roll out both forecasters from every start and compare error curves.
    Evaluate(Shared),
    /// Write the reconstruction and forecast error tables.
    ReproduceFig2(Shared),
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Mode {
    Adversarial,
    Classic,
}

impl Cmd {
    fn split(self) -> (Command, Shared) {
        match self {
            Cmd::GenData(s) => (Command::GenData, s),
            Cmd::FitRom(s) => (Command::FitRom, s),
            Cmd::TrainAae(s) => (Command::TrainAae, s),
            Cmd::TrainForecaster { mode, shared } => {
                let mode = match mode {
                    Mode::Adversarial => ForecasterMode::Adversarial,
                    Mode::Classic => ForecasterMode::Classic,
                };
                (Command::TrainForecaster(mode), shared)
            }
            Cmd::Evaluate(s) => (Command::Evaluate, s),
            Cmd::ReproduceFig2(s) => (Command::ReproduceFig2, s),
        }
    }
}

fn execute(cmd: Command, shared: &Shared) -> advrom::Result<()> {
    let mut cfg = match &shared.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &shared.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = shared.seed {
        cfg.seed = seed;
    }
    let out = pipeline::run(cmd, &cfg)?;
    for name in &out.artifacts {
        println!("{}", out.dir.join(name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, shared) = cli.command.split();
    let level = if shared.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cmd, &shared) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
