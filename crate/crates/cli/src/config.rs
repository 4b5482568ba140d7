//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Unknown keys, repeated keys and malformed values are errors.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `seed` | `0` | master seed |
//! | `sample_rate` | `8000` | Hz |
//! | `segment_length` | `8000` | samples per source segment |
//! | `batch_size` | `8` | K, mixtures per batch |
//! | `snr_db` | `10` | comma list, cycled over sources; `clean` for no noise |
//! | `alpha` | `1` | comma list of SCER weights |
//! | `lambda_grid` | `101` | landscape grid points |
//! | `mc_trials` | `64` | Monte-Carlo trials per grid point, `0` disables |
//! | `noise_profiles` | `1:1,1:0,1:0.01` | landscape `e1:e2` pairs |
//! | `steps` | `2000` | optimizer step budget |
//! | `step_size` | `0.05` | optimizer step on raw parameters |
//! | `init_lambda` | `0.9` | initial λ |
//! | `tied` | `true` | share one λ across the batch |
//! | `grad_tol` | `1e-4` | convergence threshold on the gradient max-norm |
//! | `beta_gradient` | `full` | `full` or `frozen` |
//! | `target` | `noisy` | `noisy` or `clean` supervision |
//! | `mode` | `ring` | `ring` or `conventional` batches for `mix` |
//! | `wav_encoding` | `float32` | `float32` or `pcm16` for written WAVs |
//! | `corpus` | unset | directory of mono WAV recordings for `mix` |
//! | `out_dir` | `out` | output directory |

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use ringmix::landscape::NoiseProfile;
use ringmix::losses::TargetKind;
use ringmix::mixing::BatchMode;
use ringmix::synth::{Seed, Snr};
use ringmix::toysep::{BetaGradient, Init, OptimizeConfig};
use ringmix::wav::Encoding;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub sample_rate: u32,
    pub segment_length: usize,
    pub batch_size: usize,
    pub snr_db: Vec<Snr>,
    pub alpha: Vec<f64>,
    pub lambda_grid: usize,
    pub mc_trials: usize,
    pub noise_profiles: Vec<NoiseProfile>,
    pub steps: usize,
    pub step_size: f64,
    pub init_lambda: f64,
    pub tied: bool,
    pub grad_tol: f64,
    pub beta_gradient: BetaGradient,
    pub target: TargetKind,
    pub mode: BatchMode,
    pub wav_encoding: Encoding,
    pub corpus: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sample_rate: 8000,
            segment_length: 8000,
            batch_size: 8,
            snr_db: vec![Snr::Db(10.0)],
            alpha: vec![1.0],
            lambda_grid: 101,
            mc_trials: 64,
            noise_profiles: vec![
                NoiseProfile { e1: 1.0, e2: 1.0 },
                NoiseProfile { e1: 1.0, e2: 0.0 },
                NoiseProfile { e1: 1.0, e2: 0.01 },
            ],
            steps: 2000,
            step_size: 0.05,
            init_lambda: 0.9,
            tied: true,
            grad_tol: 1e-4,
            beta_gradient: BetaGradient::Full,
            target: TargetKind::Noisy,
            mode: BatchMode::Ring,
            wav_encoding: Encoding::Float32,
            corpus: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key} = {value:?}: {why}"))
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, value, e))
}

fn list<T>(key: &str, value: &str, item: impl Fn(&str) -> Result<T, CliError>) -> Result<Vec<T>, CliError> {
    let items = value
        .split(',')
        .map(str::trim)
        .map(|s| {
            if s.is_empty() {
                Err(bad(key, value, "empty list item"))
            } else {
                item(s)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    if items.is_empty() {
        return Err(bad(key, value, "list is empty"));
    }
    Ok(items)
}

fn snr(key: &str, value: &str) -> Result<Snr, CliError> {
    if value == "clean" {
        return Ok(Snr::Clean);
    }
    let db: f64 = number(key, value)?;
    if !db.is_finite() {
        return Err(bad(key, value, "SNR must be finite"));
    }
    Ok(Snr::Db(db))
}

fn profile(key: &str, value: &str) -> Result<NoiseProfile, CliError> {
    let (a, b) = value.split_once(':').ok_or_else(|| bad(key, value, "expected e1:e2"))?;
    NoiseProfile::new(number(key, a.trim())?, number(key, b.trim())?).map_err(|e| bad(key, value, e))
}

fn boolean(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(CliError::Config(format!("line {}: duplicate key {key}", n + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| CliError::Config(format!("line {}: {}", n + 1, e.message())))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "seed" => self.seed = number(key, value)?,
            "sample_rate" => self.sample_rate = number(key, value)?,
            "segment_length" => self.segment_length = number(key, value)?,
            "batch_size" => self.batch_size = number(key, value)?,
            "snr_db" => self.snr_db = list(key, value, |s| snr(key, s))?,
            "alpha" => self.alpha = list(key, value, |s| number(key, s))?,
            "lambda_grid" => self.lambda_grid = number(key, value)?,
            "mc_trials" => self.mc_trials = number(key, value)?,
            "noise_profiles" => self.noise_profiles = list(key, value, |s| profile(key, s))?,
            "steps" => self.steps = number(key, value)?,
            "step_size" => self.step_size = number(key, value)?,
            "init_lambda" => self.init_lambda = number(key, value)?,
            "tied" => self.tied = boolean(key, value)?,
            "grad_tol" => self.grad_tol = number(key, value)?,
            "beta_gradient" => self.beta_gradient = value.parse().map_err(|e| bad(key, value, e))?,
            "target" => {
                self.target = match value {
                    "noisy" => TargetKind::Noisy,
                    "clean" => TargetKind::Clean,
                    _ => return Err(bad(key, value, "expected noisy or clean")),
                }
            }
            "mode" => self.mode = value.parse().map_err(|e| bad(key, value, e))?,
            "wav_encoding" => {
                self.wav_encoding = match value {
                    "float32" => Encoding::Float32,
                    "pcm16" => Encoding::Pcm16,
                    _ => return Err(bad(key, value, "expected float32 or pcm16")),
                }
            }
            "corpus" => self.corpus = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            _ => return Err(CliError::Config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |field: &str, why: String| Err(CliError::Config(format!("{field}: {why}")));
        if self.sample_rate == 0 {
            return fail("sample_rate", "must be positive".into());
        }
        if self.segment_length < 2 {
            return fail(
                "segment_length",
                format!("needs at least 2 samples, got {}", self.segment_length),
            );
        }
        if self.lambda_grid < 3 {
            return fail(
                "lambda_grid",
                format!("needs at least 3 points, got {}", self.lambda_grid),
            );
        }
        if self.mc_trials == 1 {
            return fail("mc_trials", "needs 0 (disabled) or at least 2".into());
        }
        if let Some(a) = self.alpha.iter().find(|a| !a.is_finite() || **a < 0.0) {
            return fail("alpha", format!("must be finite and non-negative, got {a}"));
        }
        if self.steps == 0 {
            return fail("steps", "must be at least 1".into());
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return fail("step_size", format!("must be positive, got {}", self.step_size));
        }
        if !(self.init_lambda > 0.0 && self.init_lambda < 1.0) {
            return fail("init_lambda", format!("must lie in (0, 1), got {}", self.init_lambda));
        }
        if !(self.grad_tol > 0.0) {
            return fail("grad_tol", format!("must be positive, got {}", self.grad_tol));
        }
        Ok(())
    }

    pub fn optimize_config(&self, alpha: f64) -> OptimizeConfig {
        OptimizeConfig {
            alpha,
            steps: self.steps,
            step_size: self.step_size,
            init: Init::Constant {
                lambda: self.init_lambda,
            },
            tied: self.tied,
            grad_tolerance: self.grad_tol,
            target: self.target,
            beta_gradient: self.beta_gradient,
        }
    }

    pub fn master_seed(&self) -> Seed {
        Seed(self.seed)
    }
}
