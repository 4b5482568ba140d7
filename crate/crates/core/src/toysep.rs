//! Gradient descent over the λ-family of estimates, standing in for network
//! training on a ring batch.
//!
//! The estimate of source `k` from host mixture `j` is
//! `clean_k + λ_{k,j} (n_j + n_{j+1})`: the clean speech plus a fraction of
//! that mixture's own noise sum. Each λ is `sigmoid(raw)`. The gradient
//! either differentiates through the projection scales or holds them
//! constant within a step; see [`BetaGradient`].

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{
    self, batch_loss, EstimatePair, LossReport, TargetKind, DB_PER_NEPER_POWER, LOG_FLOOR, LOSS_CAP_DB,
};
use crate::mixing::RingBatch;
use crate::signal::{energy, Waveform};
use crate::synth::Seed;

pub const DEFAULT_STEP_SIZE: f64 = 0.05;
pub const DEFAULT_STEPS: usize = 2000;
pub const DEFAULT_GRAD_TOLERANCE: f64 = 1e-4;
/// Consecutive loss increases after which a run is declared divergent.
pub const DIVERGENCE_WINDOW: usize = 50;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// λ parameters for every (source, host mixture) slot. Slot `2k` is the
/// estimate of source `k` from mixture `k - 1`, slot `2k + 1` from mixture `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaModel {
    k: usize,
    tied: bool,
    raw: Vec<f64>,
}

impl LambdaModel {
    /// One λ shared by all `2k` slots.
    pub fn tied(k: usize, lambda: f64) -> Result<Self> {
        check_open_unit(lambda)?;
        Ok(Self {
            k,
            tied: true,
            raw: vec![logit(lambda)],
        })
    }

    pub fn untied(k: usize, lambdas: &[f64]) -> Result<Self> {
        if lambdas.len() != 2 * k {
            return Err(Error::SizeMismatch(format!(
                "untied model over {k} sources needs {} lambdas, got {}",
                2 * k,
                lambdas.len()
            )));
        }
        for &l in lambdas {
            check_open_unit(l)?;
        }
        Ok(Self {
            k,
            tied: false,
            raw: lambdas.iter().map(|&l| logit(l)).collect(),
        })
    }

    pub fn from_raw(k: usize, tied: bool, raw: Vec<f64>) -> Result<Self> {
        let expected = if tied { 1 } else { 2 * k };
        if raw.len() != expected || raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::SizeMismatch(format!(
                "expected {expected} finite raw parameters, got {}",
                raw.len()
            )));
        }
        Ok(Self { k, tied, raw })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_tied(&self) -> bool {
        self.tied
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn lambda(&self, source: usize, slot: usize) -> f64 {
        if self.tied {
            sigmoid(self.raw[0])
        } else {
            sigmoid(self.raw[2 * source + slot])
        }
    }

    /// All `2k` slot values.
    pub fn lambdas(&self) -> Vec<f64> {
        (0..2 * self.k).map(|i| self.lambda(i / 2, i % 2)).collect()
    }

    pub fn mean_lambda(&self) -> f64 {
        let l = self.lambdas();
        l.iter().sum::<f64>() / l.len() as f64
    }
}

fn check_open_unit(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    Ok(())
}

/// A ring batch with the per-mixture noise sums precomputed.
#[derive(Debug, Clone)]
pub struct ToyProblem<'a> {
    batch: &'a RingBatch,
    clean: Vec<&'a Waveform>,
    noise: Vec<&'a Waveform>,
    noise_sums: Vec<Waveform>,
}

impl<'a> ToyProblem<'a> {
    pub fn new(batch: &'a RingBatch) -> Result<Self> {
        let mut clean = Vec::with_capacity(batch.k());
        let mut noise = Vec::with_capacity(batch.k());
        for (k, s) in batch.sources().iter().enumerate() {
            let parts = s
                .parts()
                .ok_or_else(|| Error::InsufficientData(format!("source {k} has no clean/noise decomposition")))?;
            clean.push(&parts.clean);
            noise.push(&parts.noise);
        }
        let noise_sums = (0..batch.k())
            .map(|j| {
                let (a, b) = batch.pairing().sources_of(j);
                noise[a].try_add(noise[b])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            batch,
            clean,
            noise,
            noise_sums,
        })
    }

    pub fn batch(&self) -> &RingBatch {
        self.batch
    }

    fn check_model(&self, model: &LambdaModel) -> Result<()> {
        if model.k != self.batch.k() {
            return Err(Error::SizeMismatch(format!(
                "model sized for {} sources, batch has {}",
                model.k,
                self.batch.k()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, model: &LambdaModel) -> Result<Vec<EstimatePair>> {
        self.check_model(model)?;
        (0..self.batch.k())
            .map(|k| {
                let (prev, curr) = self.batch.pairing().mixtures_of(k);
                Ok(EstimatePair {
                    from_prev: self.clean[k].add_scaled(&self.noise_sums[prev], model.lambda(k, 0))?,
                    from_curr: self.clean[k].add_scaled(&self.noise_sums[curr], model.lambda(k, 1))?,
                    source_index: k,
                })
            })
            .collect()
    }

    /// Batch loss on the forward estimates and its gradient with respect to
    /// the model's raw parameters.
    pub fn loss_and_grad(
        &self,
        model: &LambdaModel,
        target: TargetKind,
        alpha: f64,
        mode: BetaGradient,
    ) -> Result<(LossReport, Vec<f64>)> {
        let estimates = self.forward(model)?;
        let report = batch_loss(self.batch, &estimates, target, alpha)?;
        let k_count = self.batch.k();
        let sdr_weight = 1.0 / (2 * k_count) as f64;
        let scer_weight = alpha / k_count as f64;

        // d loss / d lambda for every slot.
        let mut grad_lambda = vec![0.0; 2 * k_count];
        for (k, (pair, terms)) in estimates.iter().zip(&report.per_source).enumerate() {
            let target_wave = target.of(self.batch, k)?;
            let t = target_wave.samples();
            let floor = LOG_FLOOR * energy(target_wave).value();
            let (prev, curr) = self.batch.pairing().mixtures_of(k);
            let ests = [pair.from_prev.samples(), pair.from_curr.samples()];
            let sums = [self.noise_sums[prev].samples(), self.noise_sums[curr].samples()];
            let betas = terms.betas;

            // d(beta * est)/d lambda = beta * (N - r est), with
            // r = <N, t> / <est, t> from beta = ||t||² / <est, t>.
            let r: [f64; 2] = match mode {
                BetaGradient::Frozen => [0.0, 0.0],
                BetaGradient::Full => [0, 1].map(|slot| {
                    let (mut nt, mut et) = (0.0, 0.0);
                    for ((&ti, &ei), &ni) in t.iter().zip(ests[slot]).zip(sums[slot]) {
                        nt += ni * ti;
                        et += ei * ti;
                    }
                    nt / et
                }),
            };
            let tangent = |slot: usize, i: usize| betas[slot] * (sums[slot][i] - r[slot] * ests[slot][i]);

            for slot in 0..2 {
                if terms.sdr_db[slot] >= LOSS_CAP_DB {
                    continue;
                }
                // residual D = t - beta * est
                let (mut d2, mut dg) = (0.0, 0.0);
                for i in 0..t.len() {
                    let d = t[i] - betas[slot] * ests[slot][i];
                    d2 += d * d;
                    dg += d * tangent(slot, i);
                }
                grad_lambda[2 * k + slot] -= sdr_weight * DB_PER_NEPER_POWER * 2.0 * dg / (d2 + floor);
            }

            if alpha != 0.0 && terms.scer_db < LOSS_CAP_DB {
                // C = beta_p est_p - beta_c est_c
                let (mut c2, mut cg_p, mut cg_c) = (0.0, 0.0, 0.0);
                for i in 0..t.len() {
                    let c = betas[0] * ests[0][i] - betas[1] * ests[1][i];
                    c2 += c * c;
                    cg_p += c * tangent(0, i);
                    cg_c += c * tangent(1, i);
                }
                let scale = scer_weight * DB_PER_NEPER_POWER * 2.0 / (c2 + floor);
                grad_lambda[2 * k] += scale * cg_p;
                grad_lambda[2 * k + 1] -= scale * cg_c;
            }
        }

        let grad_raw = if model.tied {
            let l = sigmoid(model.raw[0]);
            vec![grad_lambda.iter().sum::<f64>() * l * (1.0 - l)]
        } else {
            grad_lambda
                .iter()
                .zip(&model.raw)
                .map(|(g, &r)| {
                    let l = sigmoid(r);
                    g * l * (1.0 - l)
                })
                .collect()
        };
        Ok((report, grad_raw))
    }

    /// Separation and denoising metrics of the forward estimates against the
    /// clean references.
    pub fn metrics(&self, model: &LambdaModel) -> Result<EstimateMetrics> {
        let estimates = self.forward(model)?;
        let mut occ_self = Vec::new();
        let mut occ_other = Vec::new();
        let mut si = Vec::new();
        for (k, pair) in estimates.iter().enumerate() {
            let (prev, curr) = self.batch.pairing().mixtures_of(k);
            for (est, m) in [(&pair.from_prev, prev), (&pair.from_curr, curr)] {
                let other = self.batch.pairing().partner(k, m).expect("pairing table is consistent");
                occ_self.push(losses::occupancy(est, self.clean[k], self.noise[k])?);
                occ_other.push(losses::occupancy(est, self.clean[k], self.noise[other])?);
                si.push(losses::si_sdr(est, self.clean[k])?);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Ok(EstimateMetrics {
            occupancy_n_self: mean(&occ_self),
            occupancy_n_other: mean(&occ_other),
            si_sdr_clean_db: mean(&si),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateMetrics {
    pub occupancy_n_self: f64,
    pub occupancy_n_other: f64,
    pub si_sdr_clean_db: f64,
}

pub fn forward(model: &LambdaModel, batch: &RingBatch) -> Result<Vec<EstimatePair>> {
    ToyProblem::new(batch)?.forward(model)
}

pub fn loss_and_grad(
    model: &LambdaModel,
    batch: &RingBatch,
    target: TargetKind,
    alpha: f64,
) -> Result<(f64, Vec<f64>)> {
    let (report, grad) = ToyProblem::new(batch)?.loss_and_grad(model, target, alpha, BetaGradient::default())?;
    Ok((report.batch_loss, grad))
}

/// How the projection scales β enter the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaGradient {
    /// Exact gradient of the batch loss, β included.
    #[default]
    Full,
    /// β treated as a constant within each step. The SDR-only fixed point
    /// then sits at `1 / (2β)` rather than at the loss minimum.
    Frozen,
}

impl fmt::Display for BetaGradient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BetaGradient::Full => "full",
            BetaGradient::Frozen => "frozen",
        })
    }
}

impl FromStr for BetaGradient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(BetaGradient::Full),
            "frozen" => Ok(BetaGradient::Frozen),
            other => Err(Error::Domain(format!("unknown beta gradient mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    Constant {
        lambda: f64,
    },
    /// Uniform draws (one per parameter) from `[lo, hi]`, seeded.
    Uniform {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub alpha: f64,
    pub steps: usize,
    pub step_size: f64,
    pub init: Init,
    pub tied: bool,
    pub grad_tolerance: f64,
    pub target: TargetKind,
    pub beta_gradient: BetaGradient,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            steps: DEFAULT_STEPS,
            step_size: DEFAULT_STEP_SIZE,
            init: Init::Constant { lambda: 0.9 },
            tied: true,
            grad_tolerance: DEFAULT_GRAD_TOLERANCE,
            target: TargetKind::Noisy,
            beta_gradient: BetaGradient::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
    /// Loss rose for `DIVERGENCE_WINDOW` consecutive steps.
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub lambdas: Vec<f64>,
    pub loss: f64,
    pub grad_max_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub alpha: f64,
    pub steps: Vec<StepRecord>,
    pub status: RunStatus,
    pub final_model: LambdaModel,
    pub final_mean_lambda: f64,
}

impl TrajectoryRecord {
    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    pub fn final_loss(&self) -> f64 {
        self.steps.last().map(|s| s.loss).unwrap_or(f64::NAN)
    }
}

fn initial_model(k: usize, init: Init, tied: bool, seed: Seed) -> Result<LambdaModel> {
    match init {
        Init::Constant { lambda } => {
            if tied {
                LambdaModel::tied(k, lambda)
            } else {
                LambdaModel::untied(k, &vec![lambda; 2 * k])
            }
        }
        Init::Uniform { lo, hi } => {
            check_open_unit(lo)?;
            check_open_unit(hi)?;
            if lo > hi {
                return Err(Error::Domain(format!("uniform init needs lo <= hi, got [{lo}, {hi}]")));
            }
            let mut rng = seed.rng();
            let n = if tied { 1 } else { 2 * k };
            let draws: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
            if tied {
                LambdaModel::tied(k, draws[0])
            } else {
                LambdaModel::untied(k, &draws)
            }
        }
    }
}

/// Outcome of [`descend`]: per-step `(parameters, loss, gradient max-norm)`
/// and the parameters after the last update.
#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    pub iterates: Vec<(Vec<f64>, f64, f64)>,
    pub status: RunStatus,
    pub last: Vec<f64>,
}

/// Fixed-step gradient descent. Stops when the gradient max-norm drops below
/// `tolerance`, after `steps` evaluations, or when the loss rises
/// `DIVERGENCE_WINDOW` times in a row (or parameters become non-finite).
pub fn descend(
    start: Vec<f64>,
    steps: usize,
    step_size: f64,
    tolerance: f64,
    mut objective: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
) -> Result<Descent> {
    let mut x = start;
    let mut iterates = Vec::with_capacity(steps);
    let mut status = RunStatus::BudgetExhausted;
    let mut rises = 0;
    let mut last_loss = f64::INFINITY;
    for _ in 0..steps {
        let (loss, grad) = objective(&x)?;
        let grad_max_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        iterates.push((x.clone(), loss, grad_max_norm));
        if grad_max_norm < tolerance {
            status = RunStatus::Converged;
            break;
        }
        rises = if loss > last_loss { rises + 1 } else { 0 };
        last_loss = loss;
        if rises >= DIVERGENCE_WINDOW {
            status = RunStatus::Diverged;
            break;
        }
        let next: Vec<f64> = x.iter().zip(&grad).map(|(r, g)| r - step_size * g).collect();
        if next.iter().any(|v| !v.is_finite()) {
            status = RunStatus::Diverged;
            break;
        }
        x = next;
    }
    Ok(Descent {
        iterates,
        status,
        last: x,
    })
}

/// Gradient descent of the ring-batch objective over the λ model.
pub fn optimize(batch: &RingBatch, config: &OptimizeConfig, seed: Seed) -> Result<TrajectoryRecord> {
    if config.steps == 0 {
        return Err(Error::Domain("optimizer needs at least one step".into()));
    }
    if !(config.step_size > 0.0) || !config.alpha.is_finite() || config.alpha < 0.0 {
        return Err(Error::Domain(format!(
            "invalid optimizer settings: step_size {}, alpha {}",
            config.step_size, config.alpha
        )));
    }
    let problem = ToyProblem::new(batch)?;
    let model = initial_model(batch.k(), config.init, config.tied, seed)?;
    let (k, tied) = (model.k, model.tied);
    let descent = descend(
        model.raw,
        config.steps,
        config.step_size,
        config.grad_tolerance,
        |raw| {
            let m = LambdaModel::from_raw(k, tied, raw.to_vec())?;
            let (report, grad) = problem.loss_and_grad(&m, config.target, config.alpha, config.beta_gradient)?;
            Ok((report.batch_loss, grad))
        },
    )?;
    let steps = descent
        .iterates
        .into_iter()
        .enumerate()
        .map(|(step, (raw, loss, grad_max_norm))| StepRecord {
            step,
            lambdas: LambdaModel { k, tied, raw }.lambdas(),
            loss,
            grad_max_norm,
        })
        .collect();
    let final_model = LambdaModel {
        k,
        tied,
        raw: descent.last,
    };
    Ok(TrajectoryRecord {
        alpha: config.alpha,
        final_mean_lambda: final_model.mean_lambda(),
        final_model,
        steps,
        status: descent.status,
    })
}
