use thiserror::Error;

/// Errors produced by the signal, mixing, loss and landscape kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {left_len} samples @ {left_rate} Hz vs {right_len} samples @ {right_rate} Hz")]
    Dimension {
        left_len: usize,
        left_rate: u32,
        right_len: usize,
        right_rate: u32,
    },

    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),

    /// The estimate is (numerically) orthogonal to its reference, so no
    /// projection scale exists.
    #[error("undefined projection scale: |<estimate, reference>| = {dot:e} below threshold {threshold:e}")]
    UndefinedScale { dot: f64, threshold: f64 },

    #[error("degenerate signal: {0} has zero energy")]
    DegenerateSignal(&'static str),

    #[error("degenerate reference: reference has zero energy")]
    DegenerateReference,

    #[error("ring mixing needs at least 3 sources, got {0}")]
    DegenerateRing(usize),

    #[error("conventional pairing needs an even, non-zero source count, got {0}")]
    Pairing(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("estimate coverage: {0}")]
    Coverage(String),

    #[error("source {source_index}, mixture {mixture_index}: {inner}")]
    AtSource {
        source_index: usize,
        mixture_index: usize,
        inner: Box<Error>,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("curve has no local minimum (constant)")]
    NoMinimum,

    #[error("size mismatch: {0}")]
    SizeMismatch(String),
}

impl Error {
    pub(crate) fn at(self, source_index: usize, mixture_index: usize) -> Error {
        Error::AtSource {
            source_index,
            mixture_index,
            inner: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
