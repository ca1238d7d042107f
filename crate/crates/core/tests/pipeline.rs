//! Command sequencing, idempotence and the command-line front end.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command as Process;

use advrom::alstm::ForecasterMode;
use advrom::pipeline::{run, run_all, Command, RunConfig};
use advrom::Error;

fn tiny(out: &Path) -> RunConfig {
    let text = format!(
        r#"
seed = 9
output_dir = "{}"

[data.synthetic]
grid_nx = 6
grid_ny = 5
n_steps = 70

[rom]
tau_grid = [2, 4, 8]

[aae]
latent_dim = 4
epochs = 3
batch_size = 16

[forecaster.adversarial]
epochs = 2
hidden = 8

[forecaster.classic]
epochs = 2
hidden = 8

[evaluation]
start_first = 30
start_last = 40
horizon = 25
"#,
        out.display()
    );
    RunConfig::from_toml_str(&text, Path::new("tiny.toml")).unwrap()
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn every_command_names_its_missing_prerequisite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let expect = |cmd: Command, upstream: &str| {
        let err = run(cmd, &cfg).unwrap_err();
        match &err {
            Error::MissingArtifact { command, .. } => assert_eq!(*command, upstream, "{}", cmd.name()),
            other => panic!("{}: {other}", cmd.name()),
        }
    };
    expect(Command::FitRom, "gen-data");
    run(Command::GenData, &cfg).unwrap();
    expect(Command::TrainAae, "fit-rom");
    run(Command::FitRom, &cfg).unwrap();
    expect(Command::TrainForecaster(ForecasterMode::Adversarial), "train-aae");
    run(Command::TrainAae, &cfg).unwrap();
    expect(Command::Evaluate, "train-forecaster --mode adversarial");
    run(Command::TrainForecaster(ForecasterMode::Adversarial), &cfg).unwrap();
    expect(Command::ReproduceFig2, "train-forecaster --mode classic");
}

#[test]
fn rerunning_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    run_all(&cfg).unwrap();
    let first = read_tree(dir.path());
    run_all(&cfg).unwrap();
    let second = read_tree(dir.path());
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (name, bytes) in &first {
        assert!(bytes == &second[name], "{name} changed between runs");
    }
    assert!(first.contains_key("fig2/top_per_step.csv"));
    assert!(first.contains_key("fig2/bottom_adversarial.csv"));
    for stage in [
        "data",
        "rom",
        "aae",
        "forecaster-adversarial",
        "forecaster-classic",
        "evaluation",
        "fig2",
    ] {
        assert!(first.contains_key(&format!("{stage}/manifest.json")), "{stage}");
    }
}

#[test]
fn same_run_in_another_directory_has_identical_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_all(&tiny(a.path())).unwrap();
    run_all(&tiny(b.path())).unwrap();
    assert_eq!(read_tree(a.path()), read_tree(b.path()));
}

#[test]
fn different_seed_changes_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ca = tiny(a.path());
    let mut cb = tiny(b.path());
    cb.seed = 10;
    for cfg in [&ca, &cb] {
        run(Command::GenData, cfg).unwrap();
    }
    assert_ne!(
        std::fs::read(a.path().join("data/snapshots.romsnap")).unwrap(),
        std::fs::read(b.path().join("data/snapshots.romsnap")).unwrap()
    );
}

#[test]
fn truncation_table_covers_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    run(Command::GenData, &cfg).unwrap();
    run(Command::FitRom, &cfg).unwrap();
    let mut reader = csv::Reader::from_path(dir.path().join("rom/truncation.csv")).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["tau", "train_mae", "test_mae", "discarded_energy_fraction"]
    );
    let taus: Vec<f64> = reader.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
    assert_eq!(taus, [2.0, 4.0, 8.0]);
}

fn cli(args: &[&str]) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_advrom")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let missing = cli(&["fit-rom", "--out", out, "--quiet"]);
    assert_eq!(missing.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("gen-data"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[aae]\nepochs = 0\nbatch_size = 1\n[evaluation]\nhorizon = 0\n").unwrap();
    let invalid = cli(&["gen-data", "--config", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(invalid.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&invalid.stderr);
    for key in [
        "bad.toml:2: aae.epochs",
        "bad.toml:3: aae.batch_size",
        "bad.toml:5: evaluation.horizon",
    ] {
        assert!(stderr.contains(key), "{key} missing from {stderr}");
    }

    let unreadable = cli(&["gen-data", "--config", dir.path().join("nope.toml").to_str().unwrap()]);
    assert_eq!(unreadable.status.code(), Some(3));

    let ok = cli(&["gen-data", "--out", out, "--seed", "4", "--quiet"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(dir.path().join("data/manifest.json").is_file());
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("data/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["command"], "gen-data");
}
