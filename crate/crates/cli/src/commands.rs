use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use ringmix::export::{self, sig9, Series, SweepRow};
use ringmix::landscape::{combined_argmin, compute_landscape, LambdaLandscape, McSpec, NoiseProfile};
use ringmix::losses::{occupancy, resolve_permutation, si_sdr, Assignment};
use ringmix::mixing::{
    build_conventional_batch, build_ring_batch, sample_batch_from_corpus, Batch, BatchManifest, BatchMode,
};
use ringmix::signal::{energy, Waveform};
use ringmix::synth::{synthetic_corpus, NoisySource};
use ringmix::toysep::{optimize, RunStatus, ToyProblem, TrajectoryRecord};
use ringmix::wav::{read_wav, write_wav, Encoding};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Files written by a subcommand and the lines it reports to the user.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

impl RunReport {
    fn write(&mut self, path: PathBuf, contents: &str) -> Result<(), CliError> {
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, path: PathBuf, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
        text.push('\n');
        self.write(path, &text)
    }

    fn write_wav(&mut self, path: PathBuf, w: &Waveform, enc: Encoding) -> Result<(), CliError> {
        write_wav(&path, w, enc)?;
        self.files.push(path);
        Ok(())
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

#[derive(Serialize)]
struct RunInfo<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a ExperimentConfig,
}

fn write_run_info(report: &mut RunReport, cfg: &ExperimentConfig, command: &str) -> Result<(), CliError> {
    let info = RunInfo {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
    };
    report.write_json(cfg.out_dir.join("run.json"), &info)
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

#[derive(Serialize)]
struct ProfileSummary {
    index: usize,
    profile: NoiseProfile,
    pair_minima: Vec<f64>,
    combined: Vec<CombinedSummary>,
}

#[derive(Serialize)]
struct CombinedSummary {
    alpha: f64,
    minima: Vec<f64>,
    argmin: f64,
}

fn landscape_plot(l: &LambdaLandscape, alpha_index: usize) -> String {
    let c = &l.combined[alpha_index];
    let series = [
        Series {
            label: "pair SDR".into(),
            xs: &l.grid,
            ys: &l.analytic_loss,
        },
        Series {
            label: "SCER".into(),
            xs: &l.grid,
            ys: &l.scer_curve,
        },
        Series {
            label: format!("combined a={}", sig9(c.alpha)),
            xs: &l.grid,
            ys: &c.values,
        },
    ];
    export::line_plot_svg(
        &format!(
            "e1={} e2={} alpha={}",
            sig9(l.profile.e1),
            sig9(l.profile.e2),
            sig9(c.alpha)
        ),
        "lambda",
        "loss [dB]",
        &series,
    )
}

/// Analytic and Monte-Carlo λ landscapes for every configured noise profile.
pub fn cmd_landscape(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    cfg.validate()?;
    ensure_dir(&cfg.out_dir)?;
    let seed = cfg.master_seed();
    let landscapes = cfg
        .noise_profiles
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mc = (cfg.mc_trials > 0).then(|| McSpec {
                noise_seeds: [seed.derive(2 * i as u64), seed.derive(2 * i as u64 + 1)],
                trials: cfg.mc_trials,
                length: cfg.segment_length,
                sample_rate: cfg.sample_rate,
            });
            compute_landscape(p, cfg.lambda_grid, &cfg.alpha, mc.as_ref())
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut report = RunReport::default();
    let mut summaries = Vec::new();
    for (i, l) in landscapes.iter().enumerate() {
        report.write(
            cfg.out_dir.join(format!("landscape_p{i}.csv")),
            &export::landscape_csv(l),
        )?;
        for j in 0..l.combined.len() {
            report.write(
                cfg.out_dir.join(format!("landscape_p{i}_a{j}.svg")),
                &landscape_plot(l, j),
            )?;
        }
        report.lines.push(format!(
            "profile {i} (e1={}, e2={}): minima {}",
            sig9(l.profile.e1),
            sig9(l.profile.e2),
            fmt_list(&l.minima)
        ));
        for c in &l.combined {
            report.lines.push(format!(
                "  alpha={}: combined minima {}; global minimum {:.4}",
                sig9(c.alpha),
                fmt_list(&c.minima),
                c.argmin
            ));
        }
        summaries.push(ProfileSummary {
            index: i,
            profile: l.profile,
            pair_minima: l.minima.clone(),
            combined: l
                .combined
                .iter()
                .map(|c| CombinedSummary {
                    alpha: c.alpha,
                    minima: c.minima.clone(),
                    argmin: c.argmin,
                })
                .collect(),
        });
    }
    report.write_json(cfg.out_dir.join("landscape.json"), &summaries)?;
    write_run_info(&mut report, cfg, "landscape")?;
    Ok(report)
}

fn status_name(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Converged => "converged",
        RunStatus::BudgetExhausted => "budget exhausted",
        RunStatus::Diverged => "diverged",
    }
}

/// Toy-separator α sweep on one synthetic ring batch.
pub fn cmd_optimize(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    cfg.validate()?;
    if cfg.corpus.is_some() {
        return Err(CliError::Data(
            "optimize needs synthetic sources with known clean/noise parts; unset corpus".into(),
        ));
    }
    let seed = cfg.master_seed();
    let batch = build_ring_batch(synthetic_corpus(
        seed,
        cfg.batch_size,
        &cfg.snr_db,
        cfg.segment_length,
        cfg.sample_rate,
    )?)?;
    let problem = ToyProblem::new(&batch)?;
    let mean_noise = batch
        .sources()
        .iter()
        .map(|s| s.noise().map(|n| energy(n).value()).unwrap_or(0.0))
        .sum::<f64>()
        / batch.k() as f64;

    let mut alphas = cfg.alpha.clone();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    ensure_dir(&cfg.out_dir)?;

    let runs: Vec<(TrajectoryRecord, SweepRow)> = alphas
        .par_iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let run = optimize(&batch, &cfg.optimize_config(alpha), seed.derive(1000 + i as u64))?;
            let m = problem.metrics(&run.final_model)?;
            let analytic_argmin = if mean_noise > 0.0 {
                combined_argmin(&NoiseProfile::balanced(mean_noise)?, alpha)?
            } else {
                f64::NAN
            };
            let row = SweepRow {
                alpha,
                status: run.status,
                steps: run.steps.len(),
                final_loss_db: run.final_loss(),
                final_mean_lambda: run.final_mean_lambda,
                occupancy_n_self: m.occupancy_n_self,
                occupancy_n_other: m.occupancy_n_other,
                si_sdr_clean_db: m.si_sdr_clean_db,
                analytic_argmin,
            };
            Ok((run, row))
        })
        .collect::<Result<Vec<_>, ringmix::Error>>()?;

    let mut report = RunReport::default();
    for (i, (run, row)) in runs.iter().enumerate() {
        report.write(
            cfg.out_dir.join(format!("trajectory_a{i}.csv")),
            &export::trajectory_csv(run),
        )?;
        report.lines.push(format!(
            "alpha={}: {} after {} steps, final mean lambda {}, occupancy n_self {} n_other {}",
            sig9(row.alpha),
            status_name(row.status),
            row.steps,
            sig9(row.final_mean_lambda),
            sig9(row.occupancy_n_self),
            sig9(row.occupancy_n_other),
        ));
    }
    let rows: Vec<SweepRow> = runs.iter().map(|(_, r)| r.clone()).collect();
    let records: Vec<TrajectoryRecord> = runs.into_iter().map(|(t, _)| t).collect();
    report.write(cfg.out_dir.join("sweep.csv"), &export::sweep_csv(&rows))?;
    report.write_json(cfg.out_dir.join("sweep.json"), &rows)?;
    report.write(cfg.out_dir.join("trajectories.svg"), &export::trajectory_svg(&records))?;
    write_run_info(&mut report, cfg, "optimize")?;

    let diverged = rows.iter().filter(|r| r.status == RunStatus::Diverged).count();
    if diverged > 0 {
        report
            .lines
            .push(format!("warning: {diverged} of {} runs diverged", rows.len()));
    }
    if diverged == rows.len() {
        return Err(CliError::Partial(format!("all {} runs diverged", rows.len())));
    }
    Ok(report)
}

fn load_corpus(dir: &Path, sample_rate: u32) -> Result<Vec<NoisySource>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let file = read_wav(p)?;
            if file.waveform.sample_rate() != sample_rate {
                return Err(CliError::Data(format!(
                    "{}: sample rate {} Hz differs from configured {} Hz (no resampling)",
                    p.display(),
                    file.waveform.sample_rate(),
                    sample_rate
                )));
            }
            let label = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(NoisySource::recording(label, p.to_string_lossy(), file.waveform))
        })
        .collect()
}

fn mixture_file(j: usize) -> String {
    format!("mixtures/mix_{j:03}.wav")
}

/// Estimate file names expected by [`cmd_evaluate`] for mixture `j`.
pub fn estimate_files(j: usize) -> [String; 2] {
    [format!("mix_{j:03}_est0.wav"), format!("mix_{j:03}_est1.wav")]
}

/// Builds one batch, writes its mixtures, float32 source references and a
/// manifest.
pub fn cmd_mix(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let seed = cfg.master_seed();
    let batch = match &cfg.corpus {
        Some(dir) => {
            let corpus = load_corpus(dir, cfg.sample_rate)?;
            sample_batch_from_corpus(&corpus, cfg.batch_size, seed, cfg.mode, cfg.segment_length)?
        }
        None => {
            let count = match cfg.mode {
                BatchMode::Ring => cfg.batch_size,
                BatchMode::Conventional => 2 * cfg.batch_size,
            };
            let sources = synthetic_corpus(seed, count, &cfg.snr_db, cfg.segment_length, cfg.sample_rate)?;
            match cfg.mode {
                BatchMode::Ring => Batch::Ring(build_ring_batch(sources)?),
                BatchMode::Conventional => Batch::Conventional(build_conventional_batch(sources)?),
            }
        }
    };

    ensure_dir(&cfg.out_dir.join("mixtures"))?;
    ensure_dir(&cfg.out_dir.join("sources"))?;
    let mut report = RunReport::default();
    let mut manifest = batch.manifest(Some(seed));
    for (j, m) in batch.mixtures().iter().enumerate() {
        let rel = mixture_file(j);
        report.write_wav(cfg.out_dir.join(&rel), m, cfg.wav_encoding)?;
        manifest.mixtures[j].path = Some(rel);
    }
    for (k, s) in batch.sources().iter().enumerate() {
        let entry = &mut manifest.sources[k];
        let noisy = format!("sources/src_{k:03}_noisy.wav");
        report.write_wav(cfg.out_dir.join(&noisy), s.noisy(), Encoding::Float32)?;
        entry.noisy_path = Some(noisy);
        if let Some(parts) = s.parts() {
            let clean = format!("sources/src_{k:03}_clean.wav");
            let noise = format!("sources/src_{k:03}_noise.wav");
            report.write_wav(cfg.out_dir.join(&clean), &parts.clean, Encoding::Float32)?;
            report.write_wav(cfg.out_dir.join(&noise), &parts.noise, Encoding::Float32)?;
            entry.clean_path = Some(clean);
            entry.noise_path = Some(noise);
        }
    }
    report.write_json(cfg.out_dir.join("manifest.json"), &manifest)?;
    write_run_info(&mut report, cfg, "mix")?;
    let k = manifest.mixtures.len();
    report.lines.push(format!(
        "{} batch of {k} mixtures from {} sources",
        manifest.mode,
        manifest.sources.len()
    ));
    if manifest.is_single_ring() {
        report.lines.push(format!("pairing forms one {k}-cycle"));
    }
    Ok(report)
}

#[derive(Debug, Clone)]
struct References {
    noisy: Waveform,
    clean: Option<Waveform>,
    noise: Option<Waveform>,
}

fn load_reference(base: &Path, rel: &Option<String>) -> Result<Option<Waveform>, CliError> {
    rel.as_ref().map(|r| Ok(read_wav(base.join(r))?.waveform)).transpose()
}

/// Metrics of one estimate of one source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub source: usize,
    pub mixture: usize,
    pub swapped: bool,
    pub si_sdr_clean_db: Option<f64>,
    pub si_sdr_noisy_db: f64,
    pub occupancy_s_other: Option<f64>,
    pub occupancy_n_other: Option<f64>,
    pub occupancy_n_self: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationSummary {
    pub rows: Vec<EstimateRow>,
    pub mean_si_sdr_clean_db: Option<f64>,
    pub mean_si_sdr_noisy_db: Option<f64>,
    pub mean_occupancy_s_other: Option<f64>,
    pub mean_occupancy_n_other: Option<f64>,
    pub mean_occupancy_n_self: Option<f64>,
    pub missing: Vec<String>,
}

fn mean_of(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn occ(est: &Waveform, clean: Option<&Waveform>, interferer: Option<&Waveform>) -> Result<Option<f64>, CliError> {
    match (clean, interferer) {
        (Some(c), Some(i)) if !energy(i).is_zero() => Ok(Some(occupancy(est, c, i)?)),
        _ => Ok(None),
    }
}

fn opt_cell(x: Option<f64>) -> String {
    x.map(sig9).unwrap_or_default()
}

/// Scores two-output separations of every mixture in `manifest` against
/// the references the manifest points to. Estimates for mixture `j` are
/// read from `estimates_dir` under the names from [`estimate_files`].
pub fn cmd_evaluate(estimates_dir: &Path, manifest_path: &Path, out_dir: &Path) -> Result<RunReport, CliError> {
    let text = fs::read_to_string(manifest_path).map_err(|e| CliError::io(manifest_path, e))?;
    let manifest: BatchManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", manifest_path.display())))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let refs = manifest
        .sources
        .iter()
        .map(|s| {
            let noisy = load_reference(base, &s.noisy_path)?
                .ok_or_else(|| CliError::Data(format!("manifest source {} has no noisy reference", s.index)))?;
            Ok(References {
                noisy,
                clean: load_reference(base, &s.clean_path)?,
                noise: load_reference(base, &s.noise_path)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for m in &manifest.mixtures {
        let files = estimate_files(m.index).map(|f| estimates_dir.join(f));
        let absent: Vec<&PathBuf> = files.iter().filter(|p| !p.exists()).collect();
        if !absent.is_empty() {
            missing.extend(absent.iter().map(|p| p.display().to_string()));
            continue;
        }
        let est0 = read_wav(&files[0])?.waveform;
        let est1 = read_wav(&files[1])?.waveform;
        let [a, b] = m.sources;
        let assignment = resolve_permutation((&est0, &est1), (&refs[a].noisy, &refs[b].noisy))?;
        let (ea, eb) = assignment.apply((&est0, &est1));
        for (src, other, est) in [(a, b, ea), (b, a, eb)] {
            let r = &refs[src];
            let o = &refs[other];
            let clean = r.clean.as_ref();
            rows.push(EstimateRow {
                source: src,
                mixture: m.index,
                swapped: assignment == Assignment::Swap,
                si_sdr_clean_db: clean.map(|c| si_sdr(est, c)).transpose()?,
                si_sdr_noisy_db: si_sdr(est, &r.noisy)?,
                occupancy_s_other: occ(est, clean, o.clean.as_ref())?,
                occupancy_n_other: occ(est, clean, o.noise.as_ref())?,
                occupancy_n_self: occ(est, clean, r.noise.as_ref())?,
            });
        }
    }
    rows.sort_by_key(|r| (r.source, r.mixture));

    let summary = EvaluationSummary {
        mean_si_sdr_clean_db: mean_of(rows.iter().map(|r| r.si_sdr_clean_db)),
        mean_si_sdr_noisy_db: mean_of(rows.iter().map(|r| Some(r.si_sdr_noisy_db))),
        mean_occupancy_s_other: mean_of(rows.iter().map(|r| r.occupancy_s_other)),
        mean_occupancy_n_other: mean_of(rows.iter().map(|r| r.occupancy_n_other)),
        mean_occupancy_n_self: mean_of(rows.iter().map(|r| r.occupancy_n_self)),
        rows,
        missing,
    };

    let mut csv = String::from(
        "source,mixture,swapped,si_sdr_clean[dB],si_sdr_noisy[dB],occupancy_s_other[dimensionless],occupancy_n_other[dimensionless],occupancy_n_self[dimensionless]\n",
    );
    for r in &summary.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.source,
            r.mixture,
            r.swapped,
            opt_cell(r.si_sdr_clean_db),
            sig9(r.si_sdr_noisy_db),
            opt_cell(r.occupancy_s_other),
            opt_cell(r.occupancy_n_other),
            opt_cell(r.occupancy_n_self),
        );
    }
    let _ = writeln!(
        csv,
        "mean,,,{},{},{},{},{}",
        opt_cell(summary.mean_si_sdr_clean_db),
        opt_cell(summary.mean_si_sdr_noisy_db),
        opt_cell(summary.mean_occupancy_s_other),
        opt_cell(summary.mean_occupancy_n_other),
        opt_cell(summary.mean_occupancy_n_self),
    );

    ensure_dir(out_dir)?;
    let mut report = RunReport::default();
    report.write(out_dir.join("metrics.csv"), &csv)?;
    report.write_json(out_dir.join("metrics.json"), &summary)?;
    report.lines.push(format!(
        "{} estimates scored; mean si_sdr vs clean {} dB, occupancy n_self {} n_other {}",
        summary.rows.len(),
        opt_cell(summary.mean_si_sdr_clean_db),
        opt_cell(summary.mean_occupancy_n_self),
        opt_cell(summary.mean_occupancy_n_other),
    ));
    if !summary.missing.is_empty() {
        return Err(CliError::Partial(format!(
            "missing estimate files: {}",
            summary.missing.join(", ")
        )));
    }
    Ok(report)
}
