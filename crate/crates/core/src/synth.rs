//! Deterministic pseudo-speech and noise generators, and noisy single-talker
//! sources built from them.
//!
//! Every generator is a pure function of its seed and parameters. Random
//! streams come from ChaCha8 seeded through a SplitMix64 derivation, so a
//! manifest only needs `(seed, RNG_ALGORITHM)` to be reproducible.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{self, Waveform};

/// Identifier recorded in manifests next to every seed.
pub const RNG_ALGORITHM: &str = "chacha8+splitmix64";

/// RMS level pseudo-speech is normalised to before any SNR scaling.
pub const SPEECH_RMS: f64 = 0.1;

const SPEECH_STREAM: u64 = 0x5350_4545_4348;
const NOISE_STREAM: u64 = 0x004e_4f49_5345;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    /// Child seed for an independent sub-stream.
    pub fn derive(self, stream: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(stream)))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Nominal source SNR. `Clean` is the infinite-SNR sentinel: the noise is
/// identically zero and never enters any log or division.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Snr {
    Db(f64),
    Clean,
}

impl Snr {
    pub fn as_db(self) -> Option<f64> {
        match self {
            Snr::Db(db) => Some(db),
            Snr::Clean => None,
        }
    }
}

/// Where a source came from, for manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceOrigin {
    Synthetic {
        speech_seed: Seed,
        noise_seed: Seed,
        snr: Snr,
    },
    File {
        path: String,
    },
}

/// The unobservable decomposition of a noisy recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceParts {
    pub clean: Waveform,
    pub noise: Waveform,
    /// Measured SNR of `(clean, noise)`; `Clean` when the noise is silent.
    pub snr: Snr,
}

/// A noisy single-talker signal `clean + noise`. Sources read from disk only
/// know their noisy waveform; synthetic ones also carry their parts.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisySource {
    pub label: String,
    pub origin: SourceOrigin,
    /// Crop offset (samples) into the originally generated or loaded signal.
    pub offset: usize,
    noisy: Waveform,
    parts: Option<SourceParts>,
}

impl NoisySource {
    pub fn from_parts(
        label: impl Into<String>,
        origin: SourceOrigin,
        clean: Waveform,
        noise: Waveform,
    ) -> Result<Self> {
        let noisy = clean.try_add(&noise)?;
        let snr = if noise.is_silent() {
            Snr::Clean
        } else {
            Snr::Db(signal::snr_db(&clean, &noise)?)
        };
        Ok(Self {
            label: label.into(),
            origin,
            offset: 0,
            noisy,
            parts: Some(SourceParts { clean, noise, snr }),
        })
    }

    pub fn recording(label: impl Into<String>, path: impl Into<String>, noisy: Waveform) -> Self {
        Self {
            label: label.into(),
            origin: SourceOrigin::File { path: path.into() },
            offset: 0,
            noisy,
            parts: None,
        }
    }

    pub fn noisy(&self) -> &Waveform {
        &self.noisy
    }

    pub fn parts(&self) -> Option<&SourceParts> {
        self.parts.as_ref()
    }

    pub fn clean(&self) -> Option<&Waveform> {
        self.parts.as_ref().map(|p| &p.clean)
    }

    pub fn noise(&self) -> Option<&Waveform> {
        self.parts.as_ref().map(|p| &p.noise)
    }

    pub fn len(&self) -> usize {
        self.noisy.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_rate(&self) -> u32 {
        self.noisy.sample_rate()
    }

    /// Segment `[offset, offset + len)` of every component. The noise is not
    /// rescaled, so the segment's measured SNR may differ from the nominal one.
    pub fn crop(&self, offset: usize, len: usize) -> Result<NoisySource> {
        let noisy = self.noisy.segment(offset, len)?;
        let parts = match &self.parts {
            Some(p) => {
                let clean = p.clean.segment(offset, len)?;
                let noise = p.noise.segment(offset, len)?;
                let snr = if noise.is_silent() {
                    Snr::Clean
                } else {
                    Snr::Db(signal::snr_db(&clean, &noise)?)
                };
                Some(SourceParts { clean, noise, snr })
            }
            None => None,
        };
        Ok(NoisySource {
            label: self.label.clone(),
            origin: self.origin.clone(),
            offset: self.offset + offset,
            noisy,
            parts,
        })
    }
}

/// Harmonic pseudo-speech: a wandering fundamental in 80-300 Hz with 3-8
/// decaying harmonics under a syllable-rate amplitude envelope, normalised
/// to [`SPEECH_RMS`].
pub fn gen_pseudo_speech(seed: Seed, length: usize, sample_rate: u32) -> Result<Waveform> {
    if length == 0 {
        return Err(Error::InvalidWaveform("length must be at least 1".into()));
    }
    let mut rng = seed.derive(SPEECH_STREAM).rng();
    let sr = sample_rate as f64;

    let f0: f64 = rng.random_range(80.0..300.0);
    let n_harmonics: usize = rng.random_range(3..=8);
    let tilt: f64 = rng.random_range(0.7..1.5);
    let harmonics: Vec<(f64, f64)> = (1..=n_harmonics)
        .map(|h| {
            let amp = (h as f64).powf(-tilt) * rng.random_range(0.6..1.0);
            (amp, rng.random_range(0.0..TAU))
        })
        .collect();

    // Pitch contour: two slow sinusoidal excursions around f0.
    let vib = [
        (
            rng.random_range(0.3..1.5),
            rng.random_range(0.04..0.10),
            rng.random_range(0.0..TAU),
        ),
        (
            rng.random_range(2.0..5.0),
            rng.random_range(0.01..0.03),
            rng.random_range(0.0..TAU),
        ),
    ];
    // Amplitude envelope at syllable rate with a slower phrase-level swell.
    let am = [
        (rng.random_range(2.0..6.0), rng.random_range(0.0..TAU)),
        (rng.random_range(0.2..0.8), rng.random_range(0.0..TAU)),
    ];

    // Keep every partial below Nyquist across the whole pitch excursion.
    let f_top = f0 * (1.0 + vib[0].1 + vib[1].1);
    let nyquist_guard = 0.45 * sr;

    let mut phase = 0.0;
    let mut samples = Vec::with_capacity(length);
    for i in 0..length {
        let t = i as f64 / sr;
        let inst_f0 = f0
            * (1.0
                + vib[0].1 * (TAU * vib[0].0 * t + vib[0].2).sin()
                + vib[1].1 * (TAU * vib[1].0 * t + vib[1].2).sin());
        let env =
            (0.55 + 0.45 * (TAU * am[0].0 * t + am[0].1).sin()) * (0.7 + 0.3 * (TAU * am[1].0 * t + am[1].1).sin());
        let mut x = 0.0;
        for (h, &(amp, ph)) in harmonics.iter().enumerate() {
            if f_top * (h + 1) as f64 >= nyquist_guard {
                break;
            }
            x += amp * ((h + 1) as f64 * phase + ph).sin();
        }
        samples.push(env * x);
        phase += TAU * inst_f0 / sr;
        if phase > TAU * 1e6 {
            phase = phase.rem_euclid(TAU);
        }
    }

    let rms = (samples.iter().map(|x| x * x).sum::<f64>() / length as f64).sqrt();
    if rms > 0.0 {
        let g = SPEECH_RMS / rms;
        samples.iter_mut().for_each(|x| *x *= g);
    } else {
        // A single sample at phase zero can vanish; fall back to a DC offset.
        samples.iter_mut().for_each(|x| *x = SPEECH_RMS);
    }
    Waveform::new(samples, sample_rate)
}

/// Zero-mean, unit-variance Gaussian white noise.
pub fn gen_noise(seed: Seed, length: usize, sample_rate: u32) -> Result<Waveform> {
    if length == 0 {
        return Err(Error::InvalidWaveform("length must be at least 1".into()));
    }
    let mut rng = seed.derive(NOISE_STREAM).rng();
    let samples = (0..length).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Waveform::new(samples, sample_rate)
}

pub fn make_noisy_source(
    speech_seed: Seed,
    noise_seed: Seed,
    snr: Snr,
    length: usize,
    sample_rate: u32,
) -> Result<NoisySource> {
    let clean = gen_pseudo_speech(speech_seed, length, sample_rate)?;
    let noise = match snr {
        Snr::Db(db) => signal::scale_to_snr(&clean, &gen_noise(noise_seed, length, sample_rate)?, db)?,
        Snr::Clean => Waveform::zeros(length, sample_rate),
    };
    let origin = SourceOrigin::Synthetic {
        speech_seed,
        noise_seed,
        snr,
    };
    let label = format!("syn-{:016x}-{:016x}", speech_seed.0, noise_seed.0);
    let mut source = NoisySource::from_parts(label, origin, clean, noise)?;
    // Record the nominal SNR; the measured one agrees to rounding.
    if let (Some(parts), Snr::Db(db)) = (source.parts.as_mut(), snr) {
        parts.snr = Snr::Db(db);
    }
    Ok(source)
}

/// `count` synthetic sources whose speech and noise seeds are derived from
/// `seed`, one SNR per source (cycled when shorter than `count`).
pub fn synthetic_corpus(
    seed: Seed,
    count: usize,
    snrs: &[Snr],
    length: usize,
    sample_rate: u32,
) -> Result<Vec<NoisySource>> {
    if snrs.is_empty() {
        return Err(Error::Domain("at least one SNR is required".into()));
    }
    (0..count)
        .map(|i| {
            let i = i as u64;
            make_noisy_source(
                seed.derive(2 * i),
                seed.derive(2 * i + 1),
                snrs[i as usize % snrs.len()],
                length,
                sample_rate,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{dot, energy, DEFAULT_SAMPLE_RATE};

    const N: usize = 8000;

    fn correlation(a: &Waveform, b: &Waveform) -> f64 {
        dot(a, b).unwrap() / (energy(a).value() * energy(b).value()).sqrt()
    }

    #[test]
    fn speech_is_deterministic_and_nonzero() {
        let a = gen_pseudo_speech(Seed(7), N, DEFAULT_SAMPLE_RATE).unwrap();
        let b = gen_pseudo_speech(Seed(7), N, DEFAULT_SAMPLE_RATE).unwrap();
        assert_eq!(a, b);
        assert!(energy(&a).value() > 0.0);
        let rms = (energy(&a).value() / N as f64).sqrt();
        assert!((rms - SPEECH_RMS).abs() < 1e-12);
        assert!(gen_pseudo_speech(Seed(7), 1, DEFAULT_SAMPLE_RATE).unwrap().max_abs() > 0.0);
    }

    #[test]
    fn speech_from_distinct_seeds_decorrelates() {
        let mut worst: f64 = 0.0;
        for pair in 0..100u64 {
            let a = gen_pseudo_speech(Seed(1000 + 2 * pair), N, DEFAULT_SAMPLE_RATE).unwrap();
            let b = gen_pseudo_speech(Seed(1001 + 2 * pair), N, DEFAULT_SAMPLE_RATE).unwrap();
            worst = worst.max(correlation(&a, &b).abs());
        }
        assert!(worst < 0.2, "max |rho| = {worst}");
    }

    #[test]
    fn noise_statistics() {
        let n = gen_noise(Seed(3), N, DEFAULT_SAMPLE_RATE).unwrap();
        let mean = n.samples().iter().sum::<f64>() / N as f64;
        assert!(mean.abs() < 4.0 / (N as f64).sqrt(), "mean {mean}");
        let var = n.samples().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (N - 1) as f64;
        assert!((var - 1.0).abs() < 0.1, "var {var}");
        let m = gen_noise(Seed(4), N, DEFAULT_SAMPLE_RATE).unwrap();
        assert!(correlation(&n, &m).abs() < 0.05);
        assert_eq!(n, gen_noise(Seed(3), N, DEFAULT_SAMPLE_RATE).unwrap());
    }

    #[test]
    fn noisy_source_invariants() {
        let s = make_noisy_source(Seed(1), Seed(2), Snr::Db(10.0), N, DEFAULT_SAMPLE_RATE).unwrap();
        let p = s.parts().unwrap();
        assert_eq!(s.noisy(), &(&p.clean + &p.noise));
        let measured = signal::snr_db(&p.clean, &p.noise).unwrap();
        assert!((measured - 10.0).abs() < 1e-6);
        assert_eq!(p.snr, Snr::Db(10.0));
    }

    #[test]
    fn clean_sentinel_has_silent_noise() {
        let s = make_noisy_source(Seed(1), Seed(2), Snr::Clean, N, DEFAULT_SAMPLE_RATE).unwrap();
        let p = s.parts().unwrap();
        assert!(p.noise.is_silent());
        assert_eq!(s.noisy(), &p.clean);
        assert_eq!(p.snr, Snr::Clean);
    }

    #[test]
    fn disjoint_sources_have_orthogonal_noise() {
        let a = make_noisy_source(Seed(10), Seed(11), Snr::Db(5.0), N, DEFAULT_SAMPLE_RATE).unwrap();
        let b = make_noisy_source(Seed(12), Seed(13), Snr::Db(5.0), N, DEFAULT_SAMPLE_RATE).unwrap();
        assert!(correlation(a.noise().unwrap(), b.noise().unwrap()).abs() < 0.05);
    }

    #[test]
    fn corpus_noises_pairwise_near_orthogonal() {
        let corpus = synthetic_corpus(Seed(99), 8, &[Snr::Db(10.0)], N, DEFAULT_SAMPLE_RATE).unwrap();
        for i in 0..corpus.len() {
            for j in i + 1..corpus.len() {
                let r = correlation(corpus[i].noise().unwrap(), corpus[j].noise().unwrap());
                assert!(r.abs() < 0.05, "({i},{j}) {r}");
            }
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let s = Seed(5);
        assert_ne!(s.derive(0), s.derive(1));
        assert_eq!(s.derive(3), s.derive(3));
        assert_ne!(s.derive(0), Seed(6).derive(0));
    }

    #[test]
    fn crop_keeps_parts_consistent() {
        let s = make_noisy_source(Seed(1), Seed(2), Snr::Db(0.0), N, DEFAULT_SAMPLE_RATE).unwrap();
        let c = s.crop(100, 400).unwrap();
        assert_eq!(c.len(), 400);
        assert_eq!(c.offset, 100);
        let p = c.parts().unwrap();
        assert_eq!(c.noisy(), &(&p.clean + &p.noise));
        assert!(s.crop(7900, 200).is_err());
    }
}
