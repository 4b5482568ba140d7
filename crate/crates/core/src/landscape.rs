//! Loss landscapes over the estimate family `s_k + λ (n_1 + n_2)`.
//!
//! Analytic curves assume zero-mean, mutually uncorrelated noises so that
//! residual energies reduce to weighted sums of the noise energies. The
//! Monte-Carlo estimator evaluates the exact residuals of sampled noises and
//! is the empirical check on that assumption.
//!
//! Values are `10 log10` of residual energies with no reference
//! normalisation; each term is capped below at `-LOSS_CAP_DB`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LOG_FLOOR;
use crate::signal::{energy, Waveform};
use crate::synth::{self, Seed};

pub const DEFAULT_GRID_POINTS: usize = 101;

/// Absolute tolerance in λ for golden-section refinement.
pub const REFINE_TOLERANCE: f64 = 1e-9;

/// Noise energies of the two sources of a mixture. For SCER curves `e1`
/// and `e2` are the energies of the neighbouring noises `n_{k-1}` and
/// `n_{k+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub e1: f64,
    pub e2: f64,
}

impl NoiseProfile {
    pub fn new(e1: f64, e2: f64) -> Result<Self> {
        let p = NoiseProfile { e1, e2 };
        p.validate()?;
        Ok(p)
    }

    pub fn balanced(e: f64) -> Result<Self> {
        Self::new(e, e)
    }

    fn validate(&self) -> Result<()> {
        for (name, e) in [("e1", self.e1), ("e2", self.e2)] {
            if !(e >= 0.0) || !e.is_finite() {
                return Err(Error::Domain(format!(
                    "{name} must be finite and non-negative, got {e}"
                )));
            }
        }
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    Ok(())
}

/// `10 log10(x)` floored at `-LOSS_CAP_DB`.
pub fn capped_db(x: f64) -> f64 {
    10.0 * x.max(LOG_FLOOR).log10()
}

/// Expected residual of one source: `(1-λ)² e_self + λ² e_other`, in dB.
pub fn analytic_sdr_term(e_self: f64, e_other: f64, lambda: f64) -> f64 {
    let keep = 1.0 - lambda;
    capped_db(keep * keep * e_self + lambda * lambda * e_other)
}

/// Sum of both sources' expected SDR residuals for one mixture.
pub fn analytic_pair_loss(profile: &NoiseProfile, lambda: f64) -> Result<f64> {
    profile.validate()?;
    check_lambda(lambda)?;
    Ok(analytic_sdr_term(profile.e1, profile.e2, lambda) + analytic_sdr_term(profile.e2, profile.e1, lambda))
}

/// Expected consistency error `λ² (e_{k-1} + e_{k+1})`, in dB.
pub fn analytic_scer_curve(profile: &NoiseProfile, lambda: f64) -> Result<f64> {
    profile.validate()?;
    check_lambda(lambda)?;
    Ok(capped_db(lambda * lambda * (profile.e1 + profile.e2)))
}

/// Per-source ring objective on the family: the mean of the two SDR terms
/// plus `alpha` times SCER, i.e. `½ pair + α scer`.
pub fn analytic_combined(profile: &NoiseProfile, lambda: f64, alpha: f64) -> Result<f64> {
    Ok(0.5 * analytic_pair_loss(profile, lambda)? + alpha * analytic_scer_curve(profile, lambda)?)
}

/// `n` uniformly spaced points on `[0, 1]`, endpoints included exactly.
pub fn uniform_grid(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Domain(format!("grid needs at least 2 points, got {n}")));
    }
    let last = (n - 1) as f64;
    Ok((0..n).map(|i| i as f64 / last).collect())
}

fn check_grid(grid: &[f64], values: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid.len() != values.len() {
        return Err(Error::Domain(format!(
            "grid of {} points with {} values",
            grid.len(),
            values.len()
        )));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("grid must be strictly ascending".into()));
    }
    Ok(())
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
pub fn golden_section(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Local minima of a sampled curve.
///
/// A point (or a plateau of equal values) is a minimum when it is strictly
/// below each neighbour that exists. Plateaus report their midpoint.
/// Interior points are refined by golden-section search on `refine` over the
/// two neighbouring grid cells, keeping the grid point if refinement does not
/// improve on it. Endpoint minima are boundary minima and stay on the grid.
pub fn find_minima(grid: &[f64], values: &[f64], refine: Option<&dyn Fn(f64) -> f64>) -> Result<Vec<f64>> {
    check_grid(grid, values)?;
    let n = grid.len();
    let mut minima = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && values[end + 1] == values[start] {
            end += 1;
        }
        if start == 0 && end == n - 1 {
            return Err(Error::NoMinimum);
        }
        let v = values[start];
        let left_ok = start == 0 || v < values[start - 1];
        let right_ok = end == n - 1 || v < values[end + 1];
        if left_ok && right_ok {
            if end > start {
                minima.push(0.5 * (grid[start] + grid[end]));
            } else {
                let i = start;
                let at = match refine {
                    Some(f) if i > 0 && i < n - 1 => {
                        let lo = grid[i - 1];
                        let hi = grid[i + 1];
                        let x = golden_section(f, lo, hi, REFINE_TOLERANCE);
                        if f(x) < f(grid[i]) {
                            x
                        } else {
                            grid[i]
                        }
                    }
                    _ => grid[i],
                };
                minima.push(at);
            }
        }
        start = end + 1;
    }
    Ok(minima)
}

/// The lowest of the local minima (smallest λ on ties).
pub fn global_argmin(grid: &[f64], values: &[f64], refine: Option<&dyn Fn(f64) -> f64>) -> Result<f64> {
    let minima = find_minima(grid, values, refine)?;
    let eval = |x: f64| match refine {
        Some(f) => f(x),
        None => {
            let i = grid.iter().position(|&g| g >= x).unwrap_or(grid.len() - 1);
            values[i]
        }
    };
    let mut best = minima[0];
    let mut best_v = eval(best);
    for &m in &minima[1..] {
        let v = eval(m);
        if v < best_v {
            best = m;
            best_v = v;
        }
    }
    Ok(best)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::Domain(format!("need at least 2 samples, got {}", xs.len())));
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(MeanSe {
            mean,
            std_error: (var / n).sqrt(),
            n: xs.len(),
        })
    }
}

/// Monte-Carlo statistics of the exact residual terms for one λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McPairEstimate {
    /// `10 log10 ||(1-λ) n_1 - λ n_2||²`
    pub first: MeanSe,
    /// `10 log10 ||(1-λ) n_2 - λ n_1||²`
    pub second: MeanSe,
    pub total: MeanSe,
}

/// Sampling setup shared by the Monte-Carlo estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSpec {
    pub noise_seeds: [Seed; 2],
    pub trials: usize,
    pub length: usize,
    pub sample_rate: u32,
}

fn noise_with_energy(seed: Seed, target: f64, length: usize, sample_rate: u32) -> Result<Waveform> {
    if target == 0.0 {
        return Ok(Waveform::zeros(length, sample_rate));
    }
    let n = synth::gen_noise(seed, length, sample_rate)?;
    let e = energy(&n).value();
    Ok(n.scaled((target / e).sqrt()))
}

/// Monte-Carlo estimate of the pair residuals with noises drawn fresh per
/// trial and rescaled to exactly the profile energies.
pub fn mc_pair_loss_with_profile(profile: &NoiseProfile, lambda: f64, spec: &McSpec) -> Result<McPairEstimate> {
    profile.validate()?;
    check_lambda(lambda)?;
    if spec.trials < 2 {
        return Err(Error::Domain(format!("need at least 2 trials, got {}", spec.trials)));
    }
    let keep = 1.0 - lambda;
    let mut first = Vec::with_capacity(spec.trials);
    let mut second = Vec::with_capacity(spec.trials);
    let mut total = Vec::with_capacity(spec.trials);
    for t in 0..spec.trials as u64 {
        let n1 = noise_with_energy(spec.noise_seeds[0].derive(t), profile.e1, spec.length, spec.sample_rate)?;
        let n2 = noise_with_energy(spec.noise_seeds[1].derive(t), profile.e2, spec.length, spec.sample_rate)?;
        let r1 = n1.scaled(keep).add_scaled(&n2, -lambda)?;
        let r2 = n2.scaled(keep).add_scaled(&n1, -lambda)?;
        let a = capped_db(energy(&r1).value());
        let b = capped_db(energy(&r2).value());
        first.push(a);
        second.push(b);
        total.push(a + b);
    }
    Ok(McPairEstimate {
        first: MeanSe::from_samples(&first)?,
        second: MeanSe::from_samples(&second)?,
        total: MeanSe::from_samples(&total)?,
    })
}

/// Monte-Carlo pair residuals for two sources whose noises sit `snr_db`
/// below the energy of the pseudo-speech generated from `speech_seed`.
pub fn mc_pair_loss(
    speech_seed: Seed,
    noise_seeds: [Seed; 2],
    snr_db: f64,
    lambda: f64,
    n_trials: usize,
    length: usize,
    sample_rate: u32,
) -> Result<McPairEstimate> {
    if !snr_db.is_finite() {
        return Err(Error::Domain(format!("snr must be finite, got {snr_db}")));
    }
    let speech = synth::gen_pseudo_speech(speech_seed, length, sample_rate)?;
    let e = energy(&speech).value() / 10f64.powf(snr_db / 10.0);
    let spec = McSpec {
        noise_seeds,
        trials: n_trials,
        length,
        sample_rate,
    };
    mc_pair_loss_with_profile(&NoiseProfile::balanced(e)?, lambda, &spec)
}

/// Noise energies implied by two signals at a given SNR; a convenience for
/// callers that think in SNR rather than absolute energies.
pub fn profile_from_snr(signal_energy: f64, snr_db: [f64; 2]) -> Result<NoiseProfile> {
    NoiseProfile::new(
        signal_energy / 10f64.powf(snr_db[0] / 10.0),
        signal_energy / 10f64.powf(snr_db[1] / 10.0),
    )
}

/// One combined curve `½ pair + α scer` and its minima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedCurve {
    pub alpha: f64,
    pub values: Vec<f64>,
    pub minima: Vec<f64>,
    pub argmin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaLandscape {
    pub profile: NoiseProfile,
    pub grid: Vec<f64>,
    pub analytic_loss: Vec<f64>,
    pub mc_loss: Option<Vec<MeanSe>>,
    pub scer_curve: Vec<f64>,
    pub combined: Vec<CombinedCurve>,
    /// Minima of the analytic pair loss.
    pub minima: Vec<f64>,
}

pub fn compute_landscape(
    profile: &NoiseProfile,
    grid_points: usize,
    alphas: &[f64],
    mc: Option<&McSpec>,
) -> Result<LambdaLandscape> {
    profile.validate()?;
    let grid = uniform_grid(grid_points)?;
    let pair = |l: f64| analytic_pair_loss(profile, l).unwrap_or(f64::NAN);
    let analytic_loss: Vec<f64> = grid.iter().map(|&l| pair(l)).collect();
    let scer_curve = grid
        .iter()
        .map(|&l| analytic_scer_curve(profile, l))
        .collect::<Result<Vec<_>>>()?;
    let minima = find_minima(&grid, &analytic_loss, Some(&pair))?;

    let mut combined = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::Domain(format!(
                "alpha must be finite and non-negative, got {alpha}"
            )));
        }
        let f = |l: f64| analytic_combined(profile, l, alpha).unwrap_or(f64::NAN);
        let values: Vec<f64> = grid.iter().map(|&l| f(l)).collect();
        let minima = find_minima(&grid, &values, Some(&f))?;
        let argmin = global_argmin(&grid, &values, Some(&f))?;
        combined.push(CombinedCurve {
            alpha,
            values,
            minima,
            argmin,
        });
    }

    let mc_loss = match mc {
        Some(spec) => Some(
            grid.iter()
                .map(|&l| mc_pair_loss_with_profile(profile, l, spec).map(|e| e.total))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };

    Ok(LambdaLandscape {
        profile: *profile,
        grid,
        analytic_loss,
        mc_loss,
        scer_curve,
        combined,
        minima,
    })
}

/// Argmin of the combined analytic curve on the default grid.
pub fn combined_argmin(profile: &NoiseProfile, alpha: f64) -> Result<f64> {
    let l = compute_landscape(profile, DEFAULT_GRID_POINTS, &[alpha], None)?;
    Ok(l.combined[0].argmin)
}
