//! Batch construction: conventional disjoint pairing and ring mixing.
//!
//! In a ring batch of `K` sources, mixture `j` is `noisy(j) + noisy(j + 1)`
//! (indices mod `K`), so source `k` is heard in mixtures `k - 1` and `k`.
//! All indices here are zero-based.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Waveform;
use crate::synth::{NoisySource, Seed, SourceOrigin, RNG_ALGORITHM};

/// Smallest ring with two distinct mixture contexts per source.
pub const MIN_RING_SIZE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    Ring,
    Conventional,
}

impl fmt::Display for BatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BatchMode::Ring => "ring",
            BatchMode::Conventional => "conventional",
        })
    }
}

impl FromStr for BatchMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ring" => Ok(BatchMode::Ring),
            "conventional" => Ok(BatchMode::Conventional),
            other => Err(format!("unknown batch mode {other:?} (expected ring|conventional)")),
        }
    }
}

/// Which sources make up which mixture and vice versa.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingPairing {
    mixture_sources: Vec<(usize, usize)>,
    source_mixtures: Vec<(usize, usize)>,
}

impl RingPairing {
    pub fn new(k: usize) -> Result<Self> {
        if k < MIN_RING_SIZE {
            return Err(Error::DegenerateRing(k));
        }
        Ok(Self {
            mixture_sources: (0..k).map(|j| (j, (j + 1) % k)).collect(),
            source_mixtures: (0..k).map(|s| ((s + k - 1) % k, s)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.mixture_sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mixture_sources.is_empty()
    }

    /// Ordered `(first, second)` source indices of mixture `j`.
    pub fn sources_of(&self, mixture: usize) -> (usize, usize) {
        self.mixture_sources[mixture]
    }

    /// `(previous, current)` host mixtures of source `k`, i.e. `(k - 1, k)`.
    pub fn mixtures_of(&self, source: usize) -> (usize, usize) {
        self.source_mixtures[source]
    }

    /// The source sharing `mixture` with `source`.
    pub fn partner(&self, source: usize, mixture: usize) -> Option<usize> {
        let (a, b) = self.mixture_sources[mixture];
        if a == source {
            Some(b)
        } else if b == source {
            Some(a)
        } else {
            None
        }
    }

    /// Walks source -> next host mixture -> partner source, and checks the
    /// walk returns to the start after visiting every source exactly once.
    pub fn is_single_cycle(&self) -> bool {
        cycle_check(&self.mixture_sources, &self.source_mixtures)
    }
}

fn cycle_check(mixture_sources: &[(usize, usize)], source_mixtures: &[(usize, usize)]) -> bool {
    let k = mixture_sources.len();
    if k == 0 || source_mixtures.len() != k {
        return false;
    }
    // Both directions of the table must agree.
    for (s, &(m_prev, m_curr)) in source_mixtures.iter().enumerate() {
        if m_prev == m_curr || m_prev >= k || m_curr >= k {
            return false;
        }
        for m in [m_prev, m_curr] {
            let (a, b) = mixture_sources[m];
            if a != s && b != s {
                return false;
            }
        }
    }
    for &(a, b) in mixture_sources {
        if a == b || a >= k || b >= k {
            return false;
        }
    }
    let mut visited = vec![false; k];
    let mut source = 0;
    let mut came_from = source_mixtures[0].0;
    for _ in 0..k {
        if visited[source] {
            return false;
        }
        visited[source] = true;
        let (m_prev, m_curr) = source_mixtures[source];
        let next_mix = if came_from == m_prev { m_curr } else { m_prev };
        let (a, b) = mixture_sources[next_mix];
        source = if a == source { b } else { a };
        came_from = next_mix;
    }
    source == 0 && visited.iter().all(|&v| v)
}

fn check_shapes(sources: &[NoisySource]) -> Result<()> {
    if let Some(first) = sources.first() {
        for s in &sources[1..] {
            first.noisy().check_compatible(s.noisy())?;
        }
    }
    Ok(())
}

/// K noisy sources and the K ring mixtures built from them.
#[derive(Debug, Clone)]
pub struct RingBatch {
    sources: Vec<NoisySource>,
    mixtures: Vec<Waveform>,
    pairing: RingPairing,
}

pub fn build_ring_batch(sources: Vec<NoisySource>) -> Result<RingBatch> {
    let pairing = RingPairing::new(sources.len())?;
    check_shapes(&sources)?;
    let mixtures = (0..sources.len())
        .map(|j| {
            let (a, b) = pairing.sources_of(j);
            sources[a].noisy().try_add(sources[b].noisy())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RingBatch {
        sources,
        mixtures,
        pairing,
    })
}

impl RingBatch {
    pub fn k(&self) -> usize {
        self.sources.len()
    }

    pub fn sources(&self) -> &[NoisySource] {
        &self.sources
    }

    pub fn mixtures(&self) -> &[Waveform] {
        &self.mixtures
    }

    pub fn pairing(&self) -> &RingPairing {
        &self.pairing
    }

    pub fn segment_length(&self) -> usize {
        self.mixtures[0].len()
    }

    pub fn sample_rate(&self) -> u32 {
        self.mixtures[0].sample_rate()
    }

    /// Re-sums mixture `j` from its two sources.
    pub fn recompose(&self, mixture: usize) -> Result<Waveform> {
        let (a, b) = self.pairing.sources_of(mixture);
        self.sources[a].noisy().try_add(self.sources[b].noisy())
    }

    pub fn manifest(&self, seed: Option<Seed>) -> BatchManifest {
        let mut m = BatchManifest::skeleton(BatchMode::Ring, seed, &self.sources, &self.mixtures);
        for (k, entry) in m.sources.iter_mut().enumerate() {
            let (p, c) = self.pairing.mixtures_of(k);
            entry.mixtures = vec![p, c];
        }
        for (j, entry) in m.mixtures.iter_mut().enumerate() {
            let (a, b) = self.pairing.sources_of(j);
            entry.sources = [a, b];
        }
        m
    }
}

/// 2K sources paired disjointly into K mixtures.
#[derive(Debug, Clone)]
pub struct ConventionalBatch {
    sources: Vec<NoisySource>,
    mixtures: Vec<Waveform>,
}

pub fn build_conventional_batch(sources: Vec<NoisySource>) -> Result<ConventionalBatch> {
    if sources.is_empty() || !sources.len().is_multiple_of(2) {
        return Err(Error::Pairing(sources.len()));
    }
    check_shapes(&sources)?;
    let mixtures = sources
        .chunks_exact(2)
        .map(|pair| pair[0].noisy().try_add(pair[1].noisy()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConventionalBatch { sources, mixtures })
}

impl ConventionalBatch {
    pub fn k(&self) -> usize {
        self.mixtures.len()
    }

    pub fn sources(&self) -> &[NoisySource] {
        &self.sources
    }

    pub fn mixtures(&self) -> &[Waveform] {
        &self.mixtures
    }

    pub fn sources_of(&self, mixture: usize) -> (usize, usize) {
        (2 * mixture, 2 * mixture + 1)
    }

    pub fn manifest(&self, seed: Option<Seed>) -> BatchManifest {
        let mut m = BatchManifest::skeleton(BatchMode::Conventional, seed, &self.sources, &self.mixtures);
        for (k, entry) in m.sources.iter_mut().enumerate() {
            entry.mixtures = vec![k / 2];
        }
        for (j, entry) in m.mixtures.iter_mut().enumerate() {
            entry.sources = [2 * j, 2 * j + 1];
        }
        m
    }
}

#[derive(Debug, Clone)]
pub enum Batch {
    Ring(RingBatch),
    Conventional(ConventionalBatch),
}

impl Batch {
    pub fn mixtures(&self) -> &[Waveform] {
        match self {
            Batch::Ring(b) => b.mixtures(),
            Batch::Conventional(b) => b.mixtures(),
        }
    }

    pub fn sources(&self) -> &[NoisySource] {
        match self {
            Batch::Ring(b) => b.sources(),
            Batch::Conventional(b) => b.sources(),
        }
    }

    pub fn manifest(&self, seed: Option<Seed>) -> BatchManifest {
        match self {
            Batch::Ring(b) => b.manifest(seed),
            Batch::Conventional(b) => b.manifest(seed),
        }
    }

    pub fn into_ring(self) -> Option<RingBatch> {
        match self {
            Batch::Ring(b) => Some(b),
            Batch::Conventional(_) => None,
        }
    }
}

/// Draws distinct corpus items (K for ring mode, 2K for conventional), crops
/// each to `segment_length` samples from a seeded offset and mixes them.
pub fn sample_batch_from_corpus(
    corpus: &[NoisySource],
    k: usize,
    seed: Seed,
    mode: BatchMode,
    segment_length: usize,
) -> Result<Batch> {
    let required = match mode {
        BatchMode::Ring => k,
        BatchMode::Conventional => 2 * k,
    };
    if mode == BatchMode::Ring && k < MIN_RING_SIZE {
        return Err(Error::DegenerateRing(k));
    }
    if k == 0 {
        return Err(Error::Pairing(0));
    }
    if corpus.len() < required {
        return Err(Error::InsufficientData(format!(
            "{mode} batch of {k} mixtures needs {required} sources, corpus has {}",
            corpus.len()
        )));
    }
    let mut rng = seed.rng();
    let picks = index::sample(&mut rng, corpus.len(), required).into_vec();
    let mut sources = Vec::with_capacity(required);
    for i in picks {
        let item = &corpus[i];
        if item.len() < segment_length {
            return Err(Error::InsufficientData(format!(
                "source {:?} has {} samples, segment needs {segment_length}",
                item.label,
                item.len()
            )));
        }
        let offset = rng.random_range(0..=item.len() - segment_length);
        sources.push(item.crop(offset, segment_length)?);
    }
    match mode {
        BatchMode::Ring => build_ring_batch(sources).map(Batch::Ring),
        BatchMode::Conventional => build_conventional_batch(sources).map(Batch::Conventional),
    }
}

/// JSON-serialisable description of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub mode: BatchMode,
    pub seed: Option<Seed>,
    pub rng_algorithm: String,
    pub sample_rate: u32,
    pub segment_length: usize,
    pub sources: Vec<SourceEntry>,
    pub mixtures: Vec<MixtureEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub index: usize,
    pub label: String,
    pub origin: SourceOrigin,
    pub offset: usize,
    /// Measured SNR of the segment; absent for recordings or clean sources.
    pub snr_db: Option<f64>,
    /// Host mixtures; `[previous, current]` for ring batches.
    pub mixtures: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noisy_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureEntry {
    pub index: usize,
    pub sources: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl BatchManifest {
    fn skeleton(mode: BatchMode, seed: Option<Seed>, sources: &[NoisySource], mixtures: &[Waveform]) -> Self {
        BatchManifest {
            mode,
            seed,
            rng_algorithm: RNG_ALGORITHM.to_string(),
            sample_rate: mixtures[0].sample_rate(),
            segment_length: mixtures[0].len(),
            sources: sources
                .iter()
                .enumerate()
                .map(|(index, s)| SourceEntry {
                    index,
                    label: s.label.clone(),
                    origin: s.origin.clone(),
                    offset: s.offset,
                    snr_db: s.parts().and_then(|p| p.snr.as_db()),
                    mixtures: Vec::new(),
                    clean_path: None,
                    noise_path: None,
                    noisy_path: None,
                })
                .collect(),
            mixtures: mixtures
                .iter()
                .enumerate()
                .map(|(index, _)| MixtureEntry {
                    index,
                    sources: [0, 0],
                    path: None,
                })
                .collect(),
        }
    }

    /// True when the manifest's pairing table forms one cycle through all
    /// sources (ring mode).
    pub fn is_single_ring(&self) -> bool {
        if self.mode != BatchMode::Ring || self.sources.len() != self.mixtures.len() {
            return false;
        }
        let mixture_sources: Vec<(usize, usize)> = self.mixtures.iter().map(|m| (m.sources[0], m.sources[1])).collect();
        let mut source_mixtures = Vec::with_capacity(self.sources.len());
        for s in &self.sources {
            match s.mixtures.as_slice() {
                &[p, c] => source_mixtures.push((p, c)),
                _ => return false,
            }
        }
        cycle_check(&mixture_sources, &source_mixtures)
    }
}
