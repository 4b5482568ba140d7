use std::fs;
use std::path::Path;
use std::process::Command;

use ringmix::mixing::{BatchManifest, BatchMode};
use ringmix::signal::Waveform;
use ringmix::wav::{read_wav, write_wav, Encoding};
use ringmix_cli::{cmd_evaluate, cmd_landscape, cmd_mix, cmd_optimize, estimate_files, ExperimentConfig};

fn config(text: &str, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::parse(text).unwrap();
    c.out_dir = out.to_path_buf();
    c
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn landscape_reports_known_minima() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("noise_profiles = 1:1, 1:0\nalpha = 1\nmc_trials = 0\n", tmp.path());
    let report = cmd_landscape(&cfg).unwrap();
    assert_eq!(report.lines[0], "profile 0 (e1=1, e2=1): minima 0.5000");
    assert_eq!(report.lines[2], "profile 1 (e1=1, e2=0): minima 0.0000, 1.0000");
    let summary: serde_json::Value = read_json(&tmp.path().join("landscape.json"));
    assert!(summary[0]["combined"][0]["argmin"].as_f64().unwrap() < 0.5);
    let csv = fs::read_to_string(tmp.path().join("landscape_p0.csv")).unwrap();
    assert!(csv.starts_with("lambda[dimensionless],analytic_pair_loss[dB]"));
    assert_eq!(csv.lines().count(), 102);
    assert!(tmp.path().join("landscape_p1_a0.svg").exists());
}

#[test]
fn landscape_with_monte_carlo_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        "noise_profiles = 1:0.5\nmc_trials = 8\nsegment_length = 500\nlambda_grid = 11\n",
        tmp.path(),
    );
    cmd_landscape(&cfg).unwrap();
    let csv = fs::read_to_string(tmp.path().join("landscape_p0.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(6).unwrap().split(',').collect();
    let analytic: f64 = row[1].parse().unwrap();
    let mc: f64 = row[2].parse().unwrap();
    let se: f64 = row[3].parse().unwrap();
    assert!((analytic - mc).abs() < 4.0 * se + 0.05);
}

#[test]
fn optimize_sweep_is_ordered_and_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        "batch_size = 6\nsegment_length = 4000\nalpha = 2, 0, 1\nsteps = 600\n",
        tmp.path(),
    );
    cmd_optimize(&cfg).unwrap();
    let rows: Vec<serde_json::Value> = read_json(&tmp.path().join("sweep.json"));
    let alphas: Vec<f64> = rows.iter().map(|r| r["alpha"].as_f64().unwrap()).collect();
    assert_eq!(alphas, vec![0.0, 1.0, 2.0]);
    let lambdas: Vec<f64> = rows.iter().map(|r| r["final_mean_lambda"].as_f64().unwrap()).collect();
    assert!(lambdas.windows(2).all(|w| w[1] <= w[0]), "{lambdas:?}");
    for key in ["occupancy_n_self", "occupancy_n_other"] {
        let occ = rows[0][key].as_f64().unwrap();
        assert!((occ - 0.5).abs() < 0.1, "{key} {occ}");
    }
    let header = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert!(header.starts_with("alpha[dimensionless],status"));
    assert!(tmp.path().join("trajectory_a2.csv").exists());
}

#[test]
fn optimize_needs_synthetic_sources() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config("", tmp.path());
    cfg.corpus = Some(tmp.path().to_path_buf());
    assert_eq!(cmd_optimize(&cfg).unwrap_err().exit_code(), 3);
}

#[test]
fn mix_writes_ring_batch() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("batch_size = 6\nsegment_length = 800\n", tmp.path());
    let report = cmd_mix(&cfg).unwrap();
    assert!(report.lines.iter().any(|l| l == "pairing forms one 6-cycle"));
    let m: BatchManifest = read_json(&tmp.path().join("manifest.json"));
    assert!(m.is_single_ring());
    for j in 0..6 {
        let f = read_wav(tmp.path().join(format!("mixtures/mix_{j:03}.wav"))).unwrap();
        assert_eq!(f.waveform.len(), 800);
    }
    assert_eq!(fs::read_dir(tmp.path().join("mixtures")).unwrap().count(), 6);
}

#[test]
fn mix_rejects_small_rings_and_corpora() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("batch_size = 2\n", tmp.path());
    assert_eq!(cmd_mix(&cfg).unwrap_err().exit_code(), 2);

    let corpus = tmp.path().join("corpus");
    fs::create_dir_all(&corpus).unwrap();
    let w = Waveform::new(vec![0.1; 500], 8000).unwrap();
    for i in 0..2 {
        write_wav(corpus.join(format!("r{i}.wav")), &w, Encoding::Pcm16).unwrap();
    }
    let mut cfg = config("batch_size = 3\nsegment_length = 400\n", &tmp.path().join("out"));
    cfg.corpus = Some(corpus.clone());
    assert_eq!(cmd_mix(&cfg).unwrap_err().exit_code(), 3);

    write_wav(
        corpus.join("r2.wav"),
        &Waveform::new(vec![0.1; 500], 16000).unwrap(),
        Encoding::Pcm16,
    )
    .unwrap();
    assert_eq!(cmd_mix(&cfg).unwrap_err().exit_code(), 3);
}

#[test]
fn mix_from_recordings() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    fs::create_dir_all(&corpus).unwrap();
    for i in 0..5 {
        let samples: Vec<f64> = (0..1000).map(|n| 0.2 * ((n * (i + 1)) as f64 * 0.01).sin()).collect();
        write_wav(
            corpus.join(format!("take{i}.wav")),
            &Waveform::new(samples, 8000).unwrap(),
            Encoding::Pcm16,
        )
        .unwrap();
    }
    let mut cfg = config(
        "batch_size = 4\nsegment_length = 600\nseed = 3\n",
        &tmp.path().join("out"),
    );
    cfg.corpus = Some(corpus);
    cmd_mix(&cfg).unwrap();
    let m: BatchManifest = read_json(&tmp.path().join("out/manifest.json"));
    assert_eq!(m.mode, BatchMode::Ring);
    assert_eq!(m.sources.len(), 4);
    assert!(m
        .sources
        .iter()
        .all(|s| s.clean_path.is_none() && s.noisy_path.is_some()));
}

/// Mixes a synthetic batch and writes estimates produced by `make` for each
/// (mixture, source slot).
fn mixed_with_estimates(
    dir: &Path,
    make: impl Fn(&ringmix::mixing::MixtureEntry, usize, &Path) -> Waveform,
) -> (std::path::PathBuf, std::path::PathBuf) {
    let cfg = config(
        "batch_size = 4\nsegment_length = 4000\nsnr_db = 5\n",
        &dir.join("batch"),
    );
    cmd_mix(&cfg).unwrap();
    let manifest_path = dir.join("batch/manifest.json");
    let m: BatchManifest = read_json(&manifest_path);
    let est_dir = dir.join("est");
    fs::create_dir_all(&est_dir).unwrap();
    for mix in &m.mixtures {
        let names = estimate_files(mix.index);
        for slot in 0..2 {
            let w = make(mix, slot, &dir.join("batch"));
            write_wav(est_dir.join(&names[slot]), &w, Encoding::Float32).unwrap();
        }
    }
    (est_dir, manifest_path)
}

fn source_wav(batch_dir: &Path, k: usize, part: &str) -> Waveform {
    read_wav(batch_dir.join(format!("sources/src_{k:03}_{part}.wav")))
        .unwrap()
        .waveform
}

#[test]
fn evaluate_clean_estimates() {
    let tmp = tempfile::tempdir().unwrap();
    // Swap the outputs of every mixture to exercise permutation resolution.
    let (est, manifest) = mixed_with_estimates(tmp.path(), |m, slot, b| source_wav(b, m.sources[1 - slot], "clean"));
    cmd_evaluate(&est, &manifest, &tmp.path().join("eval")).unwrap();
    let s: serde_json::Value = read_json(&tmp.path().join("eval/metrics.json"));
    let rows = s["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    // Chance correlation of a clean 5 dB source with a 4000-sample noise has
    // standard deviation near 0.03.
    for r in rows {
        assert!(r["swapped"].as_bool().unwrap());
        assert!(r["si_sdr_clean_db"].as_f64().unwrap() > 100.0);
        assert!(r["occupancy_n_self"].as_f64().unwrap().abs() < 0.12, "{r}");
        assert!(r["occupancy_n_other"].as_f64().unwrap().abs() < 0.12, "{r}");
        assert!(r["occupancy_s_other"].as_f64().unwrap().abs() < 0.25);
    }
}

#[test]
fn evaluate_mixtures_as_estimates() {
    let tmp = tempfile::tempdir().unwrap();
    let (est, manifest) = mixed_with_estimates(tmp.path(), |m, _, b| {
        read_wav(b.join(m.path.as_ref().unwrap())).unwrap().waveform
    });
    cmd_evaluate(&est, &manifest, &tmp.path().join("eval")).unwrap();
    let s: serde_json::Value = read_json(&tmp.path().join("eval/metrics.json"));
    for key in [
        "mean_occupancy_s_other",
        "mean_occupancy_n_other",
        "mean_occupancy_n_self",
    ] {
        let v = s[key].as_f64().unwrap();
        assert!((v - 1.0).abs() < 0.15, "{key} {v}");
    }
}

#[test]
fn evaluate_half_noise_family() {
    let tmp = tempfile::tempdir().unwrap();
    let (est, manifest) = mixed_with_estimates(tmp.path(), |m, slot, b| {
        let [a, c] = m.sources;
        let noise = source_wav(b, a, "noise").try_add(&source_wav(b, c, "noise")).unwrap();
        source_wav(b, m.sources[slot], "clean").add_scaled(&noise, 0.5).unwrap()
    });
    cmd_evaluate(&est, &manifest, &tmp.path().join("eval")).unwrap();
    let first = fs::read(tmp.path().join("eval/metrics.csv")).unwrap();
    let s: serde_json::Value = read_json(&tmp.path().join("eval/metrics.json"));
    for key in ["mean_occupancy_n_other", "mean_occupancy_n_self"] {
        let v = s[key].as_f64().unwrap();
        assert!((v - 0.5).abs() < 0.1, "{key} {v}");
    }
    cmd_evaluate(&est, &manifest, &tmp.path().join("again")).unwrap();
    assert_eq!(first, fs::read(tmp.path().join("again/metrics.csv")).unwrap());
}

#[test]
fn evaluate_lists_missing_estimates() {
    let tmp = tempfile::tempdir().unwrap();
    let (est, manifest) = mixed_with_estimates(tmp.path(), |m, slot, b| source_wav(b, m.sources[slot], "noisy"));
    fs::remove_file(est.join(&estimate_files(2)[1])).unwrap();
    let err = cmd_evaluate(&est, &manifest, &tmp.path().join("eval")).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    assert!(err.to_string().contains("mix_002_est1.wav"));
    let s: serde_json::Value = read_json(&tmp.path().join("eval/metrics.json"));
    assert_eq!(s["rows"].as_array().unwrap().len(), 6);
}

#[test]
fn mix_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    cmd_mix(&config("batch_size = 3\nsegment_length = 300\nseed = 9\n", &a)).unwrap();
    cmd_mix(&config("batch_size = 3\nsegment_length = 300\nseed = 9\n", &b)).unwrap();
    assert_eq!(
        fs::read(a.join("manifest.json")).unwrap(),
        fs::read(b.join("manifest.json")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("mixtures/mix_001.wav")).unwrap(),
        fs::read(b.join("mixtures/mix_001.wav")).unwrap()
    );
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_ringmix");
    let cfg_path = tmp.path().join("bad.cfg");
    fs::write(&cfg_path, "colour = red\n").unwrap();
    let status = Command::new(bin)
        .args(["mix", "--config", cfg_path.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let good = tmp.path().join("good.cfg");
    fs::write(&good, "batch_size = 3\nsegment_length = 200\n").unwrap();
    let out = tmp.path().join("out");
    let output = Command::new(bin)
        .args([
            "mix",
            "--config",
            good.to_str().unwrap(),
            "--seed",
            "4",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&output.stdout).contains("pairing forms one 3-cycle"));
    let m: BatchManifest = read_json(&out.join("manifest.json"));
    assert_eq!(m.seed.unwrap().0, 4);

    let status = Command::new(bin)
        .args([
            "evaluate",
            "--estimates",
            tmp.path().join("nowhere").to_str().unwrap(),
            "--manifest",
            out.join("manifest.json").to_str().unwrap(),
            "--out",
            tmp.path().join("eval").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}
