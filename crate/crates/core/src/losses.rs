//! Loss and metric kernels: SDR, SI-SDR, SCER, the ring-batch objective,
//! two-output permutation resolution and the occupancy metric.
//!
//! All losses are in dB (factor 10, base-10 log). Energy ratios carry an
//! additive floor of `LOG_FLOOR * ||reference||²` on the error energy, so a
//! perfect estimate scores exactly `-LOSS_CAP_DB` and every loss is smooth
//! in its inputs. Losses above `+LOSS_CAP_DB` are clamped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixing::RingBatch;
use crate::signal::{self, dot, energy, Waveform};

pub const LOG_FLOOR: f64 = 1e-12;
pub const LOSS_CAP_DB: f64 = 120.0;

/// `10 / ln 10`, the derivative of `10 log10(x)` times `x`.
pub(crate) const DB_PER_NEPER_POWER: f64 = 10.0 / std::f64::consts::LN_10;

/// `10 log10((error + floor * reference) / reference)`, clamped above.
pub(crate) fn floored_ratio_db(reference_energy: f64, error_energy: f64) -> f64 {
    let v = 10.0 * ((error_energy + LOG_FLOOR * reference_energy) / reference_energy).log10();
    v.min(LOSS_CAP_DB)
}

fn reference_energy(reference: &Waveform) -> Result<f64> {
    let e = energy(reference).value();
    if e == 0.0 {
        return Err(Error::DegenerateReference);
    }
    Ok(e)
}

/// `-10 log10(||reference||² / ||reference - estimate||²)`. Lower is better.
pub fn sdr_loss(estimate: &Waveform, reference: &Waveform) -> Result<f64> {
    let e_ref = reference_energy(reference)?;
    let err = signal::distance_energy(reference, estimate)?.value();
    Ok(floored_ratio_db(e_ref, err))
}

/// Scale-invariant SDR in dB. Higher is better.
pub fn si_sdr(estimate: &Waveform, reference: &Waveform) -> Result<f64> {
    let e_ref = reference_energy(reference)?;
    signal::projection_scale(estimate, reference)?;
    let a = dot(estimate, reference)? / e_ref;
    let target = reference.scaled(a);
    let e_target = energy(&target).value();
    let e_res = signal::distance_energy(estimate, &target)?.value();
    Ok(-floored_ratio_db(e_target, e_res))
}

/// Two estimates of source `source_index`, from mixtures `k - 1` and `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatePair {
    pub from_prev: Waveform,
    pub from_curr: Waveform,
    pub source_index: usize,
}

/// Signal-to-consistency-error loss between two estimates of one source.
pub fn scer_loss(pair: &EstimatePair, reference: &Waveform) -> Result<f64> {
    scer_loss_raw(&pair.from_prev, &pair.from_curr, reference)
}

fn scer_loss_raw(a: &Waveform, b: &Waveform, reference: &Waveform) -> Result<f64> {
    let e_ref = reference_energy(reference)?;
    a.check_compatible(reference)?;
    let err = signal::distance_energy(a, b)?.value();
    Ok(floored_ratio_db(e_ref, err))
}

/// Which supervision signal the batch objective compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Noisy,
    Clean,
}

impl TargetKind {
    pub fn of(self, batch: &RingBatch, source: usize) -> Result<&Waveform> {
        let s = &batch.sources()[source];
        match self {
            TargetKind::Noisy => Ok(s.noisy()),
            TargetKind::Clean => s
                .clean()
                .ok_or_else(|| Error::InsufficientData(format!("source {source} has no clean reference"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTerms {
    pub source_index: usize,
    /// `[previous, current]` host mixture indices.
    pub mixtures: [usize; 2],
    pub sdr_db: [f64; 2],
    pub scer_db: f64,
    pub betas: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub target: TargetKind,
    pub alpha: f64,
    pub per_source: Vec<SourceTerms>,
    /// Mean of the 2K scaled SDR terms.
    pub sdr_mean: f64,
    /// Mean of the K SCER terms.
    pub scer_mean: f64,
    pub batch_loss: f64,
}

impl LossReport {
    /// Per-source `½(sdr_prev + sdr_curr) + α scer`, averaged over sources.
    pub fn recombined(&self) -> f64 {
        let k = self.per_source.len() as f64;
        self.per_source
            .iter()
            .map(|t| 0.5 * (t.sdr_db[0] + t.sdr_db[1]) + self.alpha * t.scer_db)
            .sum::<f64>()
            / k
    }
}

fn check_coverage(batch: &RingBatch, estimates: &[EstimatePair]) -> Result<()> {
    if estimates.len() != batch.k() {
        return Err(Error::Coverage(format!(
            "expected estimate pairs for {} sources, got {}",
            batch.k(),
            estimates.len()
        )));
    }
    for (k, pair) in estimates.iter().enumerate() {
        if pair.source_index != k {
            return Err(Error::Coverage(format!(
                "estimate pair {k} is labelled for source {}",
                pair.source_index
            )));
        }
        let (prev, curr) = batch.pairing().mixtures_of(k);
        batch.mixtures()[prev]
            .check_compatible(&pair.from_prev)
            .map_err(|e| e.at(k, prev))?;
        batch.mixtures()[curr]
            .check_compatible(&pair.from_curr)
            .map_err(|e| e.at(k, curr))?;
    }
    Ok(())
}

/// Ring-batch objective: for every source, SDR of both β-scaled estimates
/// against its target (β making the target orthogonal to its residual),
/// plus `alpha` times SCER between the two scaled estimates.
pub fn batch_loss(batch: &RingBatch, estimates: &[EstimatePair], target: TargetKind, alpha: f64) -> Result<LossReport> {
    check_coverage(batch, estimates)?;
    let k_count = batch.k();
    let mut per_source = Vec::with_capacity(k_count);
    let mut sdr_sum = 0.0;
    let mut scer_sum = 0.0;
    for (k, pair) in estimates.iter().enumerate() {
        let t = target.of(batch, k)?;
        let (prev, curr) = batch.pairing().mixtures_of(k);
        let beta_prev = signal::projection_scale(&pair.from_prev, t).map_err(|e| e.at(k, prev))?;
        let beta_curr = signal::projection_scale(&pair.from_curr, t).map_err(|e| e.at(k, curr))?;
        let scaled_prev = pair.from_prev.scaled(beta_prev);
        let scaled_curr = pair.from_curr.scaled(beta_curr);
        let sdr_prev = sdr_loss(&scaled_prev, t).map_err(|e| e.at(k, prev))?;
        let sdr_curr = sdr_loss(&scaled_curr, t).map_err(|e| e.at(k, curr))?;
        let scer = scer_loss_raw(&scaled_prev, &scaled_curr, t).map_err(|e| e.at(k, curr))?;
        sdr_sum += sdr_prev;
        sdr_sum += sdr_curr;
        scer_sum += scer;
        per_source.push(SourceTerms {
            source_index: k,
            mixtures: [prev, curr],
            sdr_db: [sdr_prev, sdr_curr],
            scer_db: scer,
            betas: [beta_prev, beta_curr],
        });
    }
    let sdr_mean = sdr_sum / (2 * k_count) as f64;
    let scer_mean = scer_sum / k_count as f64;
    // With alpha = 0 this is exactly the mean of the 2K SDR terms.
    let batch_loss = sdr_mean + alpha * scer_mean;
    Ok(LossReport {
        target,
        alpha,
        per_source,
        sdr_mean,
        scer_mean,
        batch_loss,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    Identity,
    Swap,
}

impl Assignment {
    pub fn apply<T>(self, pair: (T, T)) -> (T, T) {
        match self {
            Assignment::Identity => pair,
            Assignment::Swap => (pair.1, pair.0),
        }
    }
}

/// Output-to-target assignment with the lower summed SDR loss; ties go to
/// the identity.
pub fn resolve_permutation(estimates: (&Waveform, &Waveform), targets: (&Waveform, &Waveform)) -> Result<Assignment> {
    let identity = sdr_loss(estimates.0, targets.0)? + sdr_loss(estimates.1, targets.1)?;
    let swap = sdr_loss(estimates.1, targets.0)? + sdr_loss(estimates.0, targets.1)?;
    Ok(if swap < identity {
        Assignment::Swap
    } else {
        Assignment::Identity
    })
}

/// Turns unordered two-output separations of every ring mixture into
/// per-source estimate pairs, resolving each mixture's permutation by SDR
/// against the chosen targets.
pub fn pairs_from_outputs(
    batch: &RingBatch,
    outputs: &[(Waveform, Waveform)],
    target: TargetKind,
) -> Result<Vec<EstimatePair>> {
    let k_count = batch.k();
    if outputs.len() != k_count {
        return Err(Error::Coverage(format!(
            "expected outputs for {k_count} mixtures, got {}",
            outputs.len()
        )));
    }
    // assigned[j] = (estimate of first source of j, estimate of second)
    let mut assigned = Vec::with_capacity(k_count);
    for (j, (o1, o2)) in outputs.iter().enumerate() {
        let (a, b) = batch.pairing().sources_of(j);
        let ta = target.of(batch, a)?;
        let tb = target.of(batch, b)?;
        let perm = resolve_permutation((o1, o2), (ta, tb)).map_err(|e| e.at(a, j))?;
        assigned.push(perm.apply((o1, o2)));
    }
    Ok((0..k_count)
        .map(|k| {
            let (prev, curr) = batch.pairing().mixtures_of(k);
            EstimatePair {
                // Source k is the second source of mixture k-1 and the first of k.
                from_prev: assigned[prev].1.clone(),
                from_curr: assigned[curr].0.clone(),
                source_index: k,
            }
        })
        .collect())
}

/// `<β estimate, interferer> / ||interferer||²` with β rescaling the
/// estimate onto `clean_ref`. Unbounded; never clamped.
pub fn occupancy(estimate: &Waveform, clean_ref: &Waveform, interferer: &Waveform) -> Result<f64> {
    let beta = signal::projection_scale(estimate, clean_ref)?;
    let e_int = energy(interferer).value();
    if e_int == 0.0 {
        return Err(Error::DegenerateSignal("interferer"));
    }
    Ok(beta * dot(estimate, interferer)? / e_int)
}
