//! Waveforms and the inner-product primitives every loss is built from.
//!
//! Samples are stored and accumulated in `f64`. All arithmetic between two
//! waveforms requires equal length and equal sample rate; nothing is ever
//! resampled or padded implicitly.

use std::ops::{Add, Sub};

use crate::error::{Error, Result};

/// Sample rate used for synthetic material unless configured otherwise.
pub const DEFAULT_SAMPLE_RATE: u32 = 8000;

/// Relative threshold below which `<estimate, reference>` is treated as zero.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-12;

/// A finite, non-empty, single-channel discrete-time signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidWaveform("waveform must have at least one sample".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidWaveform("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidWaveform(format!(
                "sample {i} is not finite ({})",
                samples[i]
            )));
        }
        Ok(Self { samples, sample_rate })
    }

    /// All-zero waveform. Panics if `len == 0` or `sample_rate == 0`.
    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        assert!(len > 0 && sample_rate > 0, "empty waveform");
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    /// Builds a waveform from samples already known to be finite, e.g. the
    /// output of arithmetic on other waveforms.
    fn from_parts(samples: Vec<f64>, sample_rate: u32) -> Self {
        debug_assert!(!samples.is_empty());
        debug_assert!(samples.iter().all(|x| x.is_finite()));
        Self { samples, sample_rate }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; waveforms are non-empty by construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn is_silent(&self) -> bool {
        self.samples.iter().all(|&x| x == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Errors unless `other` has the same length and sample rate.
    pub fn check_compatible(&self, other: &Waveform) -> Result<()> {
        if self.len() != other.len() || self.sample_rate != other.sample_rate {
            return Err(Error::Dimension {
                left_len: self.len(),
                left_rate: self.sample_rate,
                right_len: other.len(),
                right_rate: other.sample_rate,
            });
        }
        Ok(())
    }

    pub fn scaled(&self, gain: f64) -> Waveform {
        Waveform::from_parts(self.samples.iter().map(|x| x * gain).collect(), self.sample_rate)
    }

    /// `self + gain * other`.
    pub fn add_scaled(&self, other: &Waveform, gain: f64) -> Result<Waveform> {
        self.check_compatible(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a + gain * b)
            .collect();
        Ok(Waveform::from_parts(samples, self.sample_rate))
    }

    pub fn try_add(&self, other: &Waveform) -> Result<Waveform> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &Waveform) -> Result<Waveform> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Waveform, f: impl Fn(f64, f64) -> f64) -> Result<Waveform> {
        self.check_compatible(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Waveform::from_parts(samples, self.sample_rate))
    }

    /// Contiguous sub-range `[offset, offset + len)`.
    pub fn segment(&self, offset: usize, len: usize) -> Result<Waveform> {
        if len == 0 || offset + len > self.len() {
            return Err(Error::InsufficientData(format!(
                "cannot crop {len} samples at offset {offset} from a {}-sample waveform",
                self.len()
            )));
        }
        Ok(Waveform::from_parts(
            self.samples[offset..offset + len].to_vec(),
            self.sample_rate,
        ))
    }

    /// Sum of equally shaped waveforms, accumulated in slice order.
    pub fn sum<'a>(waves: impl IntoIterator<Item = &'a Waveform>) -> Result<Waveform> {
        let mut iter = waves.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::InsufficientData("sum of zero waveforms".into()))?;
        let mut acc = first.clone();
        for w in iter {
            acc.check_compatible(w)?;
            for (a, b) in acc.samples.iter_mut().zip(&w.samples) {
                *a += b;
            }
        }
        Ok(acc)
    }
}

impl Add for &Waveform {
    type Output = Waveform;

    /// Panics on shape mismatch; use [`Waveform::try_add`] to handle it.
    fn add(self, rhs: &Waveform) -> Waveform {
        self.try_add(rhs).expect("waveform shape mismatch")
    }
}

impl Sub for &Waveform {
    type Output = Waveform;

    fn sub(self, rhs: &Waveform) -> Waveform {
        self.try_sub(rhs).expect("waveform shape mismatch")
    }
}

/// Squared-amplitude sum of a waveform.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Energy(f64);

impl Energy {
    pub fn new(value: f64) -> Result<Self> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::Domain(format!(
                "energy must be finite and non-negative, got {value}"
            )));
        }
        Ok(Energy(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }

    pub fn db(self) -> f64 {
        10.0 * self.0.log10()
    }
}

fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sum_i a_i * b_i`.
pub fn dot(a: &Waveform, b: &Waveform) -> Result<f64> {
    a.check_compatible(b)?;
    Ok(dot_unchecked(&a.samples, &b.samples))
}

pub fn energy(a: &Waveform) -> Energy {
    Energy(dot_unchecked(&a.samples, &a.samples))
}

/// Energy of `a - b` without materialising the difference.
pub fn distance_energy(a: &Waveform, b: &Waveform) -> Result<Energy> {
    a.check_compatible(b)?;
    Ok(Energy(
        a.samples.iter().zip(&b.samples).map(|(x, y)| (x - y) * (x - y)).sum(),
    ))
}

/// Scale `beta` with `reference ⊥ (reference - beta * estimate)`, i.e.
/// `beta = ||reference||² / <estimate, reference>`.
pub fn projection_scale(estimate: &Waveform, reference: &Waveform) -> Result<f64> {
    let d = dot(estimate, reference)?;
    let e_ref = energy(reference).value();
    let threshold = ORTHOGONALITY_TOLERANCE * (energy(estimate).value() * e_ref).sqrt();
    if !(d.abs() > threshold) {
        return Err(Error::UndefinedScale { dot: d, threshold });
    }
    Ok(e_ref / d)
}

/// `10 log10(||signal||² / ||noise||²)`.
pub fn snr_db(signal: &Waveform, noise: &Waveform) -> Result<f64> {
    signal.check_compatible(noise)?;
    let es = energy(signal);
    let en = energy(noise);
    if es.is_zero() {
        return Err(Error::DegenerateSignal("signal"));
    }
    if en.is_zero() {
        return Err(Error::DegenerateSignal("noise"));
    }
    Ok(10.0 * (es.value() / en.value()).log10())
}

/// Gain that brings `noise` to `target_snr_db` relative to `signal`.
pub fn snr_gain(signal: &Waveform, noise: &Waveform, target_snr_db: f64) -> Result<f64> {
    signal.check_compatible(noise)?;
    if !target_snr_db.is_finite() {
        return Err(Error::Domain(format!("target SNR must be finite, got {target_snr_db}")));
    }
    let es = energy(signal);
    let en = energy(noise);
    if es.is_zero() {
        return Err(Error::DegenerateSignal("signal"));
    }
    if en.is_zero() {
        return Err(Error::DegenerateSignal("noise"));
    }
    Ok((es.value() / (en.value() * 10f64.powf(target_snr_db / 10.0))).sqrt())
}

/// Returns `noise` rescaled so that the signal-to-noise ratio is `target_snr_db`.
pub fn scale_to_snr(signal: &Waveform, noise: &Waveform, target_snr_db: f64) -> Result<Waveform> {
    Ok(noise.scaled(snr_gain(signal, noise, target_snr_db)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: &[f64]) -> Waveform {
        Waveform::new(v.to_vec(), DEFAULT_SAMPLE_RATE).unwrap()
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(Waveform::new(vec![], 8000).is_err());
        assert!(Waveform::new(vec![1.0, f64::NAN], 8000).is_err());
        assert!(Waveform::new(vec![f64::INFINITY], 8000).is_err());
        assert!(Waveform::new(vec![1.0], 0).is_err());
    }

    #[test]
    fn dot_examples() {
        let a = w(&[1.0, 2.0, 3.0]);
        let b = w(&[4.0, 5.0, 6.0]);
        assert_eq!(dot(&a, &b).unwrap(), 32.0);
        assert_eq!(dot(&b, &a).unwrap(), 32.0);
        let z = Waveform::zeros(3, 8000);
        assert_eq!(dot(&z, &a).unwrap(), 0.0);
        assert_eq!(dot(&a, &a).unwrap(), energy(&a).value());
    }

    #[test]
    fn dot_rejects_mismatch() {
        let a = w(&[1.0, 2.0]);
        let b = w(&[1.0, 2.0, 3.0]);
        assert!(matches!(dot(&a, &b), Err(Error::Dimension { .. })));
        let c = Waveform::new(vec![1.0, 2.0], 16000).unwrap();
        assert!(matches!(dot(&a, &c), Err(Error::Dimension { .. })));
    }

    #[test]
    fn energy_examples() {
        assert_eq!(energy(&Waveform::zeros(8, 8000)).value(), 0.0);
        assert_eq!(energy(&w(&[3.0, 4.0])).value(), 25.0);
        // 1000 samples at 8 kHz of a 400 Hz sine: exactly 50 periods.
        let n = 1000;
        let sine: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 400.0 * i as f64 / 8000.0).sin())
            .collect();
        let e = energy(&w(&sine)).value();
        assert!((e - n as f64 / 2.0).abs() < 0.01 * n as f64 / 2.0, "{e}");
    }

    #[test]
    fn projection_scale_examples() {
        let r = w(&[1.0, -2.0, 0.5, 3.0]);
        assert_eq!(projection_scale(&r, &r).unwrap(), 1.0);
        assert_eq!(projection_scale(&r.scaled(0.5), &r).unwrap(), 2.0);

        let s = w(&[1.0, 1.0, 0.0, 0.0]);
        let n = w(&[1.0, -1.0, 2.0, 0.0]);
        assert_eq!(dot(&s, &n).unwrap(), 0.0);
        let beta = projection_scale(&(&s + &n), &s).unwrap();
        assert_eq!(beta, 1.0);
    }

    #[test]
    fn projection_scale_orthogonal_is_error() {
        let s = w(&[1.0, 0.0]);
        let n = w(&[0.0, 1.0]);
        assert!(matches!(projection_scale(&n, &s), Err(Error::UndefinedScale { .. })));
        let z = Waveform::zeros(2, 8000);
        assert!(projection_scale(&z, &s).is_err());
        assert!(projection_scale(&s, &z).is_err());
    }

    #[test]
    fn scale_to_snr_examples() {
        let s = w(&[1.0, -1.0, 1.0, -1.0]);
        let n = w(&[1.0, 1.0, -1.0, -1.0]);
        assert_eq!(snr_gain(&s, &n, 0.0).unwrap(), 1.0);
        assert!((snr_gain(&s, &n, 20.0).unwrap() - 0.1).abs() < 1e-15);

        let s4 = s.scaled(2.0);
        assert_eq!(energy(&s4).value(), 16.0);
        assert_eq!(snr_gain(&s4, &n, 0.0).unwrap(), 2.0);

        let scaled = scale_to_snr(&s, &n, 13.7).unwrap();
        assert!((snr_db(&s, &scaled).unwrap() - 13.7).abs() < 1e-9);
    }

    #[test]
    fn scale_to_snr_degenerate() {
        let s = w(&[1.0, 2.0]);
        let z = Waveform::zeros(2, 8000);
        assert!(matches!(
            scale_to_snr(&s, &z, 0.0),
            Err(Error::DegenerateSignal("noise"))
        ));
        assert!(matches!(
            scale_to_snr(&z, &s, 0.0),
            Err(Error::DegenerateSignal("signal"))
        ));
    }

    #[test]
    fn segment_bounds() {
        let a = w(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(a.segment(1, 2).unwrap().samples(), &[2.0, 3.0]);
        assert!(a.segment(3, 2).is_err());
        assert!(a.segment(0, 0).is_err());
    }
}
