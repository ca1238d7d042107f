//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 6, 7 and 9 drive the full pipeline with the default
//! configuration (16×16 grid, 300 steps, latent 8, 500 epochs) for global
//! seeds 0, 1 and 2, so this target takes a few minutes in release mode.
//! Set `ACCEPTANCE_STRICT=1` to make any FAIL line a non-zero exit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use advrom::aae::{discriminator_loss, latent_moments, sample_latent, AaeModel, AaeTrainer};
use advrom::alstm::{make_windows, ForecasterMode, ForecasterTrainer};
use advrom::forecast::{ensemble_evaluate, reconstruction_curve, DeltaModel, TrueDeltaOracle};
use advrom::nn::gradcheck::{check_flat, gradient_check, NetInput, DEFAULT_STEP};
use advrom::nn::{
    bce_grad, bce_loss, bce_with_logits, mse_grad, mse_loss, nadam_step, Activation, ActivationLayer, BatchNorm, Dense,
    Layer, Lstm, Mode, NadamConfig, NadamState, Network, LEAKY_RELU_SLOPE,
};
use advrom::pipeline::{latent_series, run_all, Artifacts, RunConfig};
use advrom::rng::{self, Rng};
use advrom::rom::{fit_pca, fit_scaling, mae, scale, unscale};
use advrom::snapshots::{generate_synthetic_flow, SyntheticFlowConfig};
use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

const SEEDS: [u64; 3] = [0, 1, 2];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn uniform(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn leaky() -> Layer {
    Layer::Activation(ActivationLayer::new(Activation::LeakyRelu(LEAKY_RELU_SLOPE)))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn numerical_core() -> Outcome {
    let t0 = Instant::now();
    let (mut dense, mut lstm, mut loss, mut bn) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for seed in 0..24u64 {
        let mut rng = rng::stream(seed, "acceptance-gradients");
        let batch = rng.random_range(2..7);
        let (d_in, h, d_out) = (rng.random_range(1..7), rng.random_range(1..9), rng.random_range(1..4));
        let target = uniform(batch, d_out, &mut rng);
        let mse = |y: &DMatrix<f64>| (mse_loss(y, &target).unwrap(), mse_grad(y, &target).unwrap());

        let net = Network::new(vec![
            Layer::Dense(Dense::new(d_in, h, &mut rng)),
            leaky(),
            Layer::Dense(Dense::new(h, d_out, &mut rng)),
        ]);
        let x = uniform(batch, d_in, &mut rng);
        let r = gradient_check(&net, NetInput::Batch(&x), mse, Mode::Train, seed, DEFAULT_STEP).unwrap();
        dense = dense.max(r.max_rel_error);

        let net = Network::new(vec![
            Layer::Lstm(Lstm::new(d_in, h, &mut rng)),
            Layer::Dense(Dense::new(h, d_out, &mut rng)),
        ]);
        let seq: Vec<_> = (0..rng.random_range(1..6))
            .map(|_| uniform(batch, d_in, &mut rng))
            .collect();
        let r = gradient_check(&net, NetInput::Sequence(&seq), mse, Mode::Train, seed, DEFAULT_STEP).unwrap();
        lstm = lstm.max(r.max_rel_error);

        let net = Network::new(vec![
            Layer::Dense(Dense::new(d_in, h, &mut rng)),
            Layer::BatchNorm(BatchNorm::new(h)),
            leaky(),
            Layer::Dense(Dense::new(h, d_out, &mut rng)),
        ]);
        let r = gradient_check(&net, NetInput::Batch(&x), mse, Mode::Train, seed, DEFAULT_STEP).unwrap();
        bn = bn.max(r.max_rel_error);

        let a = uniform(batch, d_out, &mut rng);
        let reshape = |v: &[f64]| DMatrix::from_column_slice(batch, d_out, v);
        let r = check_flat(
            a.as_slice(),
            mse_grad(&a, &target).unwrap().as_slice(),
            |v| mse_loss(&reshape(v), &target).unwrap(),
            DEFAULT_STEP,
        );
        loss = loss.max(r.max_rel_error);
        let p = a.map(|v| 0.5 + 0.4 * v);
        let t = target.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let r = check_flat(
            p.as_slice(),
            bce_grad(&p, &t).unwrap().as_slice(),
            |v| bce_loss(&reshape(v), &t).unwrap(),
            DEFAULT_STEP,
        );
        loss = loss.max(r.max_rel_error);
        let label = (seed % 2) as f64;
        let (_, g) = bce_with_logits(&a, label);
        let r = check_flat(
            a.as_slice(),
            g.as_slice(),
            |v| bce_with_logits(&reshape(v), label).0,
            DEFAULT_STEP,
        );
        loss = loss.max(r.max_rel_error);
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        dense < 1e-4 && lstm < 1e-4 && loss < 1e-4 && bn < 1e-3 && secs < 30.0,
        format!(
            "24 seeds: dense/leaky {dense:.1e}, lstm {lstm:.1e}, losses {loss:.1e}, batch norm {bn:.1e}; {secs:.1}s"
        ),
    )
}

fn pca_exactness() -> Outcome {
    let x = generate_synthetic_flow(&SyntheticFlowConfig {
        noise_amplitude: 0.05,
        ..Default::default()
    })
    .unwrap();
    let t0 = Instant::now();
    let pca = fit_pca(&x).unwrap();
    let data = x.data();
    let r = pca.rank();
    let full = pca.reconstruct_matrix(&pca.scores, r).unwrap();
    let full_rel = (&full - data).norm() / data.norm();

    // Add one rank-one term per τ and compare the residual with the tail of
    // the spectrum.
    let mut centred = data.clone();
    for mut row in centred.row_iter_mut() {
        row -= &pca.mean;
    }
    let total = centred.norm_squared();
    let mut approx = DMatrix::<f64>::zeros(data.nrows(), data.ncols());
    let (mut worst_ey, mut monotone, mut last) = (0.0f64, true, f64::INFINITY);
    for tau in 0..=r {
        if tau > 0 {
            let e = pca.eofs.row(tau - 1);
            let p = &centred * e.transpose();
            approx += p * e;
        }
        let residual = (&centred - &approx).norm_squared();
        let tail: f64 = pca.singular_values.iter().skip(tau).map(|s| s * s).sum();
        worst_ey = worst_ey.max((residual - tail).abs() / total);
        let err = mae(&approx, &centred);
        monotone &= err <= last + 1e-12;
        last = err;
    }
    let mut grid_ok = true;
    for tau in [4, 8, 16, 32] {
        let p = pca.project_matrix(data, tau).unwrap();
        let back = pca.reconstruct_matrix(&p, tau).unwrap();
        let tail: f64 = pca.singular_values.iter().skip(tau).map(|s| s * s).sum();
        grid_ok &= ((&back - data).norm_squared() - tail).abs() <= 1e-6 * total;
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        full_rel < 1e-8 && worst_ey < 1e-6 && monotone && grid_ok && secs < 5.0,
        format!(
            "n=300 m=512 rank {r}: full-rank rel {full_rel:.1e}, residual identity {worst_ey:.1e} over all tau, \
             MAE monotone {monotone}; {secs:.2}s"
        ),
    )
}

fn scaling_round_trip() -> Outcome {
    let mut rng = rng::stream(3, "acceptance-scaling");
    let mut s = DMatrix::from_fn(200, 12, |_, c| rng.random_range(-1.0..1.0) * 10f64.powi(c as i32 - 4));
    s.column_mut(5).fill(-7.5);
    let params = fit_scaling(&s).unwrap();
    let scaled = scale(&s, &params).unwrap();
    let back = unscale(&scaled, &params).unwrap();
    let worst = back
        .iter()
        .zip(s.iter())
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max);
    let in_range = scaled.iter().all(|v| (-1.0..=1.0).contains(v));
    let constant_ok = params.constant == (0..12).map(|c| c == 5).collect::<Vec<_>>()
        && scaled.column(5).iter().all(|&v| v == 0.0)
        && back.column(5).iter().all(|&v| v == -7.5);
    outcome(
        worst < 1e-12 && in_range && constant_ok,
        format!("round trip {worst:.1e}, range [-1, 1] {in_range}, constant column -> 0 and back {constant_ok}"),
    )
}

fn reparameterisation() -> Outcome {
    let n = 100_000;
    let mut rng = rng::stream(4, "acceptance-reparameterisation");
    let eps = DMatrix::from_fn(n, 1, |_, _| StandardNormal.sample(&mut rng));
    let z = sample_latent(&DMatrix::repeat(n, 1, 2.0), &DMatrix::repeat(n, 1, 3f64.ln()), &eps);
    let (mean, var) = latent_moments(&z);
    let std = var[0].sqrt();
    outcome(
        (mean[0] - 2.0).abs() < 0.05 && (std - 3.0).abs() < 0.05,
        format!("1e5 samples: mean {:.4}, std {std:.4}", mean[0]),
    )
}

fn loss_identities() -> Outcome {
    let ln2 = std::f64::consts::LN_2;
    let half = DMatrix::repeat(8, 1, 0.5);
    let bce_one = bce_loss(&half, &DMatrix::repeat(8, 1, 1.0)).unwrap();
    let bce_zero = bce_loss(&half, &DMatrix::zeros(8, 1)).unwrap();
    let disc = discriminator_loss(&half, &half).unwrap();
    let mut state = NadamState::new(4, NadamConfig::default());
    let mut theta = [0.5, -1.0, 3.0, 0.0];
    let before = theta;
    nadam_step(&mut theta, &[0.0; 4], &mut state).unwrap();
    let ok = (bce_one - ln2).abs() < 1e-9
        && (bce_zero - ln2).abs() < 1e-9
        && (disc - 2.0 * ln2).abs() < 1e-9
        && theta == before;
    outcome(
        ok,
        format!(
            "BCE(0.5) - ln2 = {:.1e}, balanced loss - 2ln2 = {:.1e}, zero-gradient step identity {}",
            (bce_one - ln2).abs().max((bce_zero - ln2).abs()),
            (disc - 2.0 * ln2).abs(),
            theta == before
        ),
    )
}

fn default_run(seed: u64, out: PathBuf) -> RunConfig {
    RunConfig {
        seed,
        output_dir: out,
        ..Default::default()
    }
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).expect("read json")).expect("parse json")
}

/// Column `mean` of an error-curve CSV.
fn curve_means(path: &Path) -> Vec<f64> {
    let mut reader = csv::Reader::from_path(path).expect("curve csv");
    let col = reader
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == "mean")
        .expect("mean column");
    reader.records().map(|r| r.unwrap()[col].parse().unwrap()).collect()
}

struct SeedRun {
    dir: PathBuf,
    aae_test: f64,
    pca_test: f64,
    adv_curve: Vec<f64>,
    cls_curve: Vec<f64>,
    adv_div: Option<u64>,
    cls_div: Option<u64>,
}

fn seed_run(root: &Path, seed: u64) -> SeedRun {
    let dir = root.join(format!("seed{seed}"));
    run_all(&default_run(seed, dir.clone())).expect("pipeline run");
    let aae = read_json(&dir.join("aae/summary.json"));
    let cmp = read_json(&dir.join("evaluation/comparison.json"));
    SeedRun {
        aae_test: aae["test_mae"].as_f64().unwrap(),
        pca_test: aae["pca_test_mae"].as_f64().unwrap(),
        adv_curve: curve_means(&dir.join("evaluation/curve_adversarial.csv")),
        cls_curve: curve_means(&dir.join("evaluation/curve_classic.csv")),
        adv_div: cmp["divergence_step"][0].as_u64(),
        cls_div: cmp["divergence_step"][1].as_u64(),
        dir,
    }
}

fn aae_vs_truncation(runs: &[SeedRun], secs: f64) -> Outcome {
    let aae = median(runs.iter().map(|r| r.aae_test).collect());
    let pca = median(runs.iter().map(|r| r.pca_test).collect());
    let per: Vec<String> = runs
        .iter()
        .map(|r| format!("{:.4}/{:.4}", r.aae_test, r.pca_test))
        .collect();
    outcome(
        aae < pca && secs < 600.0,
        format!(
            "held-out MAE median: autoencoder {aae:.4} vs PCA tau=8 {pca:.4} (per seed {}); {secs:.0}s",
            per.join(", ")
        ),
    )
}

fn forecaster_comparison(runs: &[SeedRun], secs: f64) -> Outcome {
    let at = |h: usize, adv: bool| {
        median(
            runs.iter()
                .map(|r| if adv { r.adv_curve[h - 1] } else { r.cls_curve[h - 1] })
                .collect(),
        )
    };
    let horizon = runs[0].adv_curve.len();
    // A curve that never crosses the threshold diverges after the horizon.
    let div = |d: Option<u64>| d.map_or(horizon as f64 + 1.0, |v| v as f64);
    let adv_div = median(runs.iter().map(|r| div(r.adv_div)).collect());
    let cls_div = median(runs.iter().map(|r| div(r.cls_div)).collect());
    let (adv100, cls100) = (at(100, true), at(100, false));
    let (adv80, cls80) = (at(80, true), at(80, false));
    let per: Vec<String> = runs
        .iter()
        .map(|r| format!("{:.3}/{:.3}", r.adv_curve[99], r.cls_curve[99]))
        .collect();
    outcome(
        adv100 < cls100 && adv_div >= cls_div && secs < 900.0,
        format!(
            "median mean MAE at step 100: adversarial {adv100:.4} vs classic {cls100:.4} (per seed {}); \
             step 80: {adv80:.4} vs {cls80:.4}; median divergence step {adv_div} vs {cls_div}; {secs:.0}s",
            per.join(", ")
        ),
    )
}

fn oracle_decomposition(run_dir: &Path) -> Outcome {
    let cfg = default_run(0, run_dir.to_path_buf());
    let a = Artifacts::load(&cfg).unwrap();
    let mut aae = AaeModel::load(&run_dir.join("aae/aae.romnn")).unwrap();
    let latents = latent_series(&a, &mut aae).unwrap();
    let starts = cfg.evaluation.starts();
    let horizon = cfg.evaluation.horizon;
    let mut dec = a.decoder(&mut aae);
    let floor = reconstruction_curve(&latents, &a.data, &mut dec, &starts, horizon, 5).unwrap();
    let mut oracle = TrueDeltaOracle::new(latents.clone(), 5).unwrap();
    let mut models: Vec<(&str, &mut dyn DeltaModel)> = vec![("oracle", &mut oracle)];
    let curve = ensemble_evaluate(&mut models, &latents, &a.data, &mut dec, &starts, horizon)
        .unwrap()
        .remove(0);
    let worst = curve
        .mean
        .iter()
        .zip(&floor.mean)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    outcome(
        worst < 1e-8,
        format!(
            "{} starts x {horizon} steps: max |oracle - reconstruction| {worst:.1e}",
            starts.len()
        ),
    )
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
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

fn reproducibility(root: &Path, first: &Path) -> Outcome {
    let again = root.join("seed0-again");
    run_all(&default_run(0, again.clone())).expect("pipeline rerun");
    let (a, b) = (tree(first), tree(&again));
    let compared: Vec<&String> = a
        .keys()
        .filter(|k| k.ends_with(".csv") || k.ends_with(".json"))
        .collect();
    let differing: Vec<&String> = a.keys().filter(|k| b.get(*k) != Some(&a[*k])).collect();
    let same_files = a.keys().eq(b.keys());
    outcome(
        same_files && differing.is_empty(),
        format!(
            "{} files ({} CSV/JSON incl. manifests) compared across two runs, {} differ",
            a.len(),
            compared.len(),
            differing.len()
        ),
    )
}

fn gradient_isolation(run_dir: &Path) -> Outcome {
    let cfg = default_run(0, run_dir.to_path_buf());
    let a = Artifacts::load(&cfg).unwrap();
    let scores = a.scaled_scores(&a.train()).unwrap();
    let k = a.scaling.width();
    let mut trainer = AaeTrainer::new(cfg.aae_config(k, 8, 0)).unwrap();
    let mut rng = rng::stream(0, "acceptance-isolation");
    let mut aae_ok = true;
    for b in 0..5 {
        let batch = scores.rows(b * 32, 32).into_owned();
        let prior = DMatrix::from_fn(32, 8, |_, _| StandardNormal.sample(&mut rng));
        let eps = DMatrix::from_fn(32, 8, |_, _| StandardNormal.sample(&mut rng));
        let m0 = trainer.model.clone();
        let pass = trainer.encoder_pass(&batch, eps.clone()).unwrap();
        trainer.disc_step(&prior, &pass.z).unwrap();
        let m = &trainer.model;
        aae_ok &= m.encoder.flat_params() == m0.encoder.flat_params()
            && m.mu_head.flat_params() == m0.mu_head.flat_params()
            && m.log_sigma_head.flat_params() == m0.log_sigma_head.flat_params()
            && m.decoder.flat_params() == m0.decoder.flat_params()
            && m.discriminator.flat_params() != m0.discriminator.flat_params();
        let m0 = trainer.model.clone();
        trainer.ae_step(&batch, eps).unwrap();
        let m = &trainer.model;
        aae_ok &= m.discriminator.flat_params() == m0.discriminator.flat_params()
            && m.encoder.flat_params() != m0.encoder.flat_params();
    }

    let mut aae = AaeModel::load(&run_dir.join("aae/aae.romnn")).unwrap();
    let latents = latent_series(&a, &mut aae).unwrap();
    let windows = make_windows(&latents, 5).unwrap();
    let mut ft = ForecasterTrainer::new(cfg.forecaster_config(ForecasterMode::Adversarial)).unwrap();
    let mut lstm_ok = true;
    for b in 0..5 {
        let idx: Vec<usize> = (b * 32..(b + 1) * 32).collect();
        let (seq, targets) = windows.batch(&idx);
        let fake = ft.generator_forward(&seq).unwrap();
        let m0 = ft.model.clone();
        ft.disc_step(&seq, &targets, &fake).unwrap();
        let d = |m: &advrom::alstm::ForecasterModel| m.discriminator.as_ref().unwrap().flat_params();
        lstm_ok &= ft.model.generator.flat_params() == m0.generator.flat_params() && d(&ft.model) != d(&m0);
        let m0 = ft.model.clone();
        ft.gen_step(&seq, &targets).unwrap();
        lstm_ok &= d(&ft.model) == d(&m0) && ft.model.generator.flat_params() != m0.generator.flat_params();
    }
    outcome(
        aae_ok && lstm_ok,
        format!("5 batches each: autoencoder loop isolated {aae_ok}, forecaster loop isolated {lstm_ok}"),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |id: u32, name: &'static str, o: Outcome| {
        println!(
            "{} criterion {id:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o));
    };

    report(1, "numerical core", numerical_core());
    report(2, "pca exactness", pca_exactness());
    report(3, "scaling round trip", scaling_round_trip());
    report(4, "reparameterisation", reparameterisation());
    report(5, "loss identities", loss_identities());

    let root = tempfile::tempdir().expect("temp dir");
    let t0 = Instant::now();
    let runs: Vec<SeedRun> = SEEDS.iter().map(|&s| seed_run(root.path(), s)).collect();
    let secs = t0.elapsed().as_secs_f64();
    report(6, "autoencoder vs truncation", aae_vs_truncation(&runs, secs));
    report(
        7,
        "adversarial vs classic forecaster",
        forecaster_comparison(&runs, secs),
    );
    report(8, "oracle decomposition", oracle_decomposition(&runs[0].dir));
    report(9, "reproducibility", reproducibility(root.path(), &runs[0].dir));
    report(10, "gradient isolation", gradient_isolation(&runs[0].dir));

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria pass{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {failed:?}")
        }
    );
    if !failed.is_empty() && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
