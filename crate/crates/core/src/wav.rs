//! Mono RIFF/WAVE reading and writing, 16-bit PCM or 32-bit IEEE float.
//!
//! Files are written with the canonical 44-byte header (`fmt ` chunk of 16
//! bytes followed directly by `data`). Reading accepts any chunk order and
//! skips unknown chunks. PCM16 samples map to `[-1, 1)` by dividing by 32768.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::Waveform;

pub const PCM16_SCALE: f64 = 32768.0;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("unsupported channel count {0} (mono only)")]
    UnsupportedChannels(u16),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("sample out of range for pcm16: max |x| = {max_abs}")]
    Range { max_abs: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Pcm16,
    Float32,
}

impl Encoding {
    fn format_tag(self) -> u16 {
        match self {
            Encoding::Pcm16 => FORMAT_PCM,
            Encoding::Float32 => FORMAT_IEEE_FLOAT,
        }
    }

    fn bytes_per_sample(self) -> usize {
        match self {
            Encoding::Pcm16 => 2,
            Encoding::Float32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioFile {
    pub path: PathBuf,
    pub waveform: Waveform,
    pub encoding: Encoding,
    pub channels: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn decode(bytes: &[u8]) -> Result<(Waveform, Encoding), WavError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(WavError::CorruptFile("missing RIFF/WAVE header".into()));
    }
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        if body + size > bytes.len() {
            return Err(WavError::CorruptFile(format!(
                "chunk {:?} declares {size} bytes, {} available",
                String::from_utf8_lossy(id),
                bytes.len() - body
            )));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(WavError::CorruptFile(format!("fmt chunk too short ({size} bytes)")));
                }
                let mut tag = u16_at(bytes, body);
                if tag == FORMAT_EXTENSIBLE {
                    if size < 40 {
                        return Err(WavError::CorruptFile("extensible fmt chunk too short".into()));
                    }
                    // First two bytes of the sub-format GUID carry the real tag.
                    tag = u16_at(bytes, body + 24);
                }
                fmt = Some((
                    tag,
                    u16_at(bytes, body + 2),
                    u32_at(bytes, body + 4),
                    u16_at(bytes, body + 14),
                ));
            }
            b"data" => data = Some(&bytes[body..body + size]),
            _ => {}
        }
        pos = body + size + (size & 1);
    }
    let (tag, channels, sample_rate, bits) = fmt.ok_or_else(|| WavError::CorruptFile("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| WavError::CorruptFile("no data chunk".into()))?;
    if channels != 1 {
        return Err(WavError::UnsupportedChannels(channels));
    }
    let encoding = match (tag, bits) {
        (FORMAT_PCM, 16) => Encoding::Pcm16,
        (FORMAT_IEEE_FLOAT, 32) => Encoding::Float32,
        (tag, bits) => {
            return Err(WavError::UnsupportedFormat(format!(
                "format tag {tag} with {bits} bits"
            )))
        }
    };
    let width = encoding.bytes_per_sample();
    if data.len() % width != 0 {
        return Err(WavError::CorruptFile(format!(
            "data chunk of {} bytes is not a whole number of {width}-byte samples",
            data.len()
        )));
    }
    let samples: Vec<f64> = match encoding {
        Encoding::Pcm16 => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / PCM16_SCALE)
            .collect(),
        Encoding::Float32 => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
    };
    let wave = Waveform::new(samples, sample_rate).map_err(|e| WavError::CorruptFile(e.to_string()))?;
    Ok((wave, encoding))
}

pub fn encode(waveform: &Waveform, encoding: Encoding) -> Result<Vec<u8>, WavError> {
    let samples = waveform.samples();
    if encoding == Encoding::Pcm16 {
        let max_abs = waveform.max_abs();
        if max_abs > 1.0 {
            return Err(WavError::Range { max_abs });
        }
    }
    let width = encoding.bytes_per_sample();
    let data_len = samples.len() * width;
    let data_len_u32 = u32::try_from(data_len)
        .ok()
        .filter(|n| *n <= u32::MAX - 36)
        .ok_or_else(|| WavError::UnsupportedFormat("waveform too long for RIFF".into()))?;
    let rate = waveform.sample_rate();
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len_u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&encoding.format_tag().to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * width as u32).to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&(8 * width as u16).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len_u32.to_le_bytes());
    match encoding {
        Encoding::Pcm16 => {
            for &x in samples {
                let q = (x * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&q.to_le_bytes());
            }
        }
        Encoding::Float32 => {
            for &x in samples {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioFile, WavError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| WavError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (waveform, encoding) = decode(&bytes)?;
    Ok(AudioFile {
        path: path.to_path_buf(),
        waveform,
        encoding,
        channels: 1,
    })
}

pub fn write_wav(path: impl AsRef<Path>, waveform: &Waveform, encoding: Encoding) -> Result<(), WavError> {
    let path = path.as_ref();
    let bytes = encode(waveform, encoding)?;
    fs::write(path, bytes).map_err(|source| WavError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(tag: u16, channels: u16, rate: u32, bits: u16, data: &[u8]) -> Vec<u8> {
        let block = channels * bits / 8;
        let mut v = Vec::new();
        v.extend_from_slice(b"RIFF");
        v.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        v.extend_from_slice(b"WAVEfmt ");
        v.extend_from_slice(&16u32.to_le_bytes());
        v.extend_from_slice(&tag.to_le_bytes());
        v.extend_from_slice(&channels.to_le_bytes());
        v.extend_from_slice(&rate.to_le_bytes());
        v.extend_from_slice(&(rate * block as u32).to_le_bytes());
        v.extend_from_slice(&block.to_le_bytes());
        v.extend_from_slice(&bits.to_le_bytes());
        v.extend_from_slice(b"data");
        v.extend_from_slice(&(data.len() as u32).to_le_bytes());
        v.extend_from_slice(data);
        v
    }

    #[test]
    fn pcm16_silence() {
        let bytes = header(1, 1, 8000, 16, &vec![0u8; 16000]);
        let (w, enc) = decode(&bytes).unwrap();
        assert_eq!(enc, Encoding::Pcm16);
        assert_eq!(w.len(), 8000);
        assert_eq!(w.sample_rate(), 8000);
        assert!(w.is_silent());
    }

    #[test]
    fn pcm16_full_scale_square() {
        let data: Vec<u8> = (0..100)
            .flat_map(|i| if i % 2 == 0 { 32767i16 } else { -32768i16 }.to_le_bytes())
            .collect();
        let (w, _) = decode(&header(1, 1, 8000, 16, &data)).unwrap();
        for (i, &x) in w.samples().iter().enumerate() {
            let expect = if i % 2 == 0 { 32767.0 / 32768.0 } else { -1.0 };
            assert_eq!(x, expect);
        }
    }

    #[test]
    fn float32_round_trip_is_bit_exact() {
        let samples: Vec<f64> = (0..257).map(|i| (((i as f32) * 0.37).sin() * 3.0) as f64).collect();
        let w = Waveform::new(samples, 22050).unwrap();
        let bytes = encode(&w, Encoding::Float32).unwrap();
        assert_eq!(bytes.len(), 44 + 4 * 257);
        let (back, enc) = decode(&bytes).unwrap();
        assert_eq!(enc, Encoding::Float32);
        assert_eq!(back, w);
    }

    #[test]
    fn header_fields() {
        let w = Waveform::new(vec![0.25, -0.5, 1.0], 16000).unwrap();
        let b = encode(&w, Encoding::Pcm16).unwrap();
        assert_eq!(b.len(), 44 + 6);
        assert_eq!(u32_at(&b, 24), 16000);
        assert_eq!(u16_at(&b, 22), 1);
        assert_eq!(u16_at(&b, 34), 16);
        assert_eq!(u32_at(&b, 40), 6);
        let (back, _) = decode(&b).unwrap();
        for (a, b) in back.samples().iter().zip(w.samples()) {
            assert!((a - b).abs() <= 1.0 / PCM16_SCALE);
        }
    }

    #[test]
    fn pcm16_range_error() {
        let w = Waveform::new(vec![0.0, 1.5, -0.2], 8000).unwrap();
        match encode(&w, Encoding::Pcm16) {
            Err(WavError::Range { max_abs }) => assert_eq!(max_abs, 1.5),
            other => panic!("{other:?}"),
        }
        assert!(encode(&w, Encoding::Float32).is_ok());
    }

    #[test]
    fn rejects_stereo_codecs_and_truncation() {
        let stereo = header(1, 2, 8000, 16, &[0u8; 8]);
        assert!(matches!(decode(&stereo), Err(WavError::UnsupportedChannels(2))));
        let alaw = header(6, 1, 8000, 8, &[0u8; 8]);
        assert!(matches!(decode(&alaw), Err(WavError::UnsupportedFormat(_))));
        let pcm24 = header(1, 1, 8000, 24, &[0u8; 9]);
        assert!(matches!(decode(&pcm24), Err(WavError::UnsupportedFormat(_))));
        let mut truncated = header(1, 1, 8000, 16, &[0u8; 100]);
        truncated.truncate(80);
        assert!(matches!(decode(&truncated), Err(WavError::CorruptFile(_))));
        assert!(matches!(decode(b"RIFF\0\0\0\0WAVE"), Err(WavError::CorruptFile(_))));
        assert!(matches!(decode(b"nope"), Err(WavError::CorruptFile(_))));
    }

    #[test]
    fn skips_unknown_chunks() {
        let plain = header(3, 1, 8000, 32, &1.5f32.to_le_bytes());
        let mut with_list = plain[..36].to_vec();
        with_list.extend_from_slice(b"LIST");
        with_list.extend_from_slice(&3u32.to_le_bytes());
        with_list.extend_from_slice(&[1, 2, 3, 0]);
        with_list.extend_from_slice(&plain[36..]);
        let (w, _) = decode(&with_list).unwrap();
        assert_eq!(w.samples(), &[1.5]);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let w = Waveform::new(vec![0.125, -0.25, 0.5], 8000).unwrap();
        write_wav(&p, &w, Encoding::Pcm16).unwrap();
        let f = read_wav(&p).unwrap();
        assert_eq!(f.waveform, w);
        assert_eq!(f.channels, 1);
        assert!(matches!(
            read_wav(dir.path().join("missing.wav")),
            Err(WavError::Io { .. })
        ));
    }
}
