//! Mono PCM WAV reading and writing (16/32-bit integer, 32-bit float).
//!
//! Written files use the canonical 44-byte header: a 16-byte `fmt ` chunk
//! (format tag 1 for integer PCM, 3 for IEEE float) followed by `data`.
//! The reader also accepts `WAVE_FORMAT_EXTENSIBLE` and skips unknown chunks.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{Recording, SignalError};

#[derive(Debug, Error)]
pub enum WavError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a RIFF/WAVE file")]
    NotWave,
    #[error("truncated file: {0}")]
    Truncated(&'static str),
    #[error("expected a mono file, found {0} channels")]
    Channels(u16),
    #[error("unsupported encoding: format tag {format}, {bits} bits per sample")]
    Encoding { format: u16, bits: u16 },
    #[error("file has no audio samples")]
    Empty,
    #[error("sample rate {0} Hz cannot be stored in a WAV header")]
    SampleRate(f64),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BitDepth {
    Int16,
    Int32,
    #[default]
    Float32,
}

impl BitDepth {
    fn bits(self) -> u16 {
        match self {
            BitDepth::Int16 => 16,
            BitDepth::Int32 | BitDepth::Float32 => 32,
        }
    }

    fn format_tag(self) -> u16 {
        match self {
            BitDepth::Int16 | BitDepth::Int32 => FORMAT_PCM,
            BitDepth::Float32 => FORMAT_FLOAT,
        }
    }

    /// Largest round-trip error for samples in [−1, 1].
    pub fn quantization_step(self) -> f64 {
        match self {
            BitDepth::Int16 => 1.0 / 32768.0,
            BitDepth::Int32 => 1.0 / 2_147_483_648.0,
            BitDepth::Float32 => f32::EPSILON as f64,
        }
    }
}

impl std::str::FromStr for BitDepth {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "16" | "int16" | "i16" => Ok(BitDepth::Int16),
            "32" | "int32" | "i32" => Ok(BitDepth::Int32),
            "32f" | "float32" | "f32" | "float" => Ok(BitDepth::Float32),
            other => Err(format!("unknown bit depth `{other}` (16, 32, 32f)")),
        }
    }
}

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;
pub const HEADER_LEN: usize = 44;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> WavError + '_ {
    move |source| WavError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes a mono WAV file into samples in [−1, 1]. Metadata is left at its
/// defaults.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Recording, WavError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    decode_wav(&bytes)
}

pub fn decode_wav(bytes: &[u8]) -> Result<Recording, WavError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(WavError::NotWave);
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + size > bytes.len() {
                    return Err(WavError::Truncated("fmt chunk"));
                }
                let mut tag = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let rate = u32_at(bytes, body + 4);
                let bits = u16_at(bytes, body + 14);
                if tag == FORMAT_EXTENSIBLE {
                    if size < 26 {
                        return Err(WavError::Truncated("extensible fmt chunk"));
                    }
                    // first two bytes of the sub-format GUID carry the tag
                    tag = u16_at(bytes, body + 24);
                }
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => {
                let end = body + size;
                if end > bytes.len() {
                    return Err(WavError::Truncated("data chunk"));
                }
                data = Some(&bytes[body..end]);
                break;
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body + size + (size & 1);
    }
    let (tag, channels, rate, bits) = fmt.ok_or(WavError::Truncated("missing fmt chunk"))?;
    let data = data.ok_or(WavError::Truncated("missing data chunk"))?;
    if channels != 1 {
        return Err(WavError::Channels(channels));
    }
    let samples: Vec<f64> = match (tag, bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
            .collect(),
        (FORMAT_PCM, 32) => data
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64 / 2_147_483_648.0)
            .collect(),
        (FORMAT_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        (format, bits) => return Err(WavError::Encoding { format, bits }),
    };
    if samples.is_empty() {
        return Err(WavError::Empty);
    }
    Ok(Recording::new(samples, rate as f64)?)
}

/// Encodes `rec` as a mono WAV byte stream. Samples outside [−1, 1] are
/// clipped and reported with a warning.
pub fn encode_wav(rec: &Recording, depth: BitDepth) -> Result<Vec<u8>, WavError> {
    let rate = rec.sample_rate();
    if rate.fract() != 0.0 || rate < 1.0 || rate > u32::MAX as f64 {
        return Err(WavError::SampleRate(rate));
    }
    let rate = rate as u32;
    let bytes_per_sample = (depth.bits() / 8) as u32;
    let data_len = rec.samples().len() as u32 * bytes_per_sample;

    let mut out = Vec::with_capacity(HEADER_LEN + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&depth.format_tag().to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * bytes_per_sample).to_le_bytes());
    out.extend_from_slice(&(bytes_per_sample as u16).to_le_bytes());
    out.extend_from_slice(&depth.bits().to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());

    let mut clipped = 0usize;
    for &s in rec.samples() {
        let x = if !(-1.0..=1.0).contains(&s) {
            clipped += 1;
            s.clamp(-1.0, 1.0)
        } else {
            s
        };
        match depth {
            BitDepth::Int16 => {
                let v = (x * 32768.0)
                    .round()
                    .clamp(i16::MIN as f64, i16::MAX as f64) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
            BitDepth::Int32 => {
                let v = (x * 2_147_483_648.0)
                    .round()
                    .clamp(i32::MIN as f64, i32::MAX as f64) as i32;
                out.extend_from_slice(&v.to_le_bytes());
            }
            BitDepth::Float32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
        }
    }
    if clipped > 0 {
        log::warn!("clipped {clipped} samples outside [-1, 1] while encoding WAV");
    }
    Ok(out)
}

pub fn write_wav(rec: &Recording, path: impl AsRef<Path>, depth: BitDepth) -> Result<(), WavError> {
    let path = path.as_ref();
    let bytes = encode_wav(rec, depth)?;
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    w.write_all(&bytes).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(samples: Vec<f64>, rate: f64) -> Recording {
        Recording::new(samples, rate).unwrap()
    }

    #[test]
    fn zero_signal_byte_length() {
        let r = rec(vec![0.0; 1000], 500_000.0);
        for (depth, width) in [
            (BitDepth::Int16, 2),
            (BitDepth::Int32, 4),
            (BitDepth::Float32, 4),
        ] {
            let bytes = encode_wav(&r, depth).unwrap();
            assert_eq!(bytes.len(), HEADER_LEN + 1000 * width);
            assert_eq!(u32_at(&bytes, 24), 500_000);
            assert_eq!(u32_at(&bytes, 40), 1000 * width as u32);
        }
    }

    #[test]
    fn header_rate_is_preserved() {
        let r = rec(vec![0.1, -0.1, 0.2], 500_000.0);
        let back = decode_wav(&encode_wav(&r, BitDepth::Int16).unwrap()).unwrap();
        assert_eq!(back.sample_rate(), 500_000.0);
    }

    #[test]
    fn over_range_sample_clips() {
        let r = rec(vec![1.5, -2.0, 0.5], 8000.0);
        let back = decode_wav(&encode_wav(&r, BitDepth::Float32).unwrap()).unwrap();
        assert_eq!(back.samples(), &[1.0, -1.0, 0.5]);
    }

    #[test]
    fn full_scale_float_readback() {
        let n = 4800;
        let s: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 48000.0 + 0.3).sin())
            .collect();
        let back =
            decode_wav(&encode_wav(&rec(s.clone(), 48000.0), BitDepth::Float32).unwrap()).unwrap();
        let max = back.samples().iter().cloned().fold(f64::MIN, f64::max);
        let true_max = s.iter().cloned().fold(f64::MIN, f64::max);
        assert!((max - true_max).abs() < 1e-7);
        assert!((max - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_stereo() {
        let mut bytes = encode_wav(&rec(vec![0.0; 4], 8000.0), BitDepth::Int16).unwrap();
        bytes[22] = 2;
        let err = decode_wav(&bytes).unwrap_err();
        assert!(matches!(err, WavError::Channels(2)));
        assert!(err.to_string().contains("2 channels"));
    }

    #[test]
    fn rejects_truncated_and_empty() {
        let bytes = encode_wav(&rec(vec![0.0; 4], 8000.0), BitDepth::Int16).unwrap();
        assert!(matches!(
            decode_wav(&bytes[..bytes.len() - 2]),
            Err(WavError::Truncated(_))
        ));
        assert!(matches!(
            decode_wav(&bytes[..20]),
            Err(WavError::Truncated(_))
        ));
        assert!(matches!(decode_wav(b"OggS"), Err(WavError::NotWave)));
        let mut empty = bytes[..HEADER_LEN].to_vec();
        empty[40..44].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode_wav(&empty), Err(WavError::Empty)));
    }

    #[test]
    fn rejects_unsupported_encoding() {
        let mut bytes = encode_wav(&rec(vec![0.0; 4], 8000.0), BitDepth::Int16).unwrap();
        bytes[34] = 8; // 8-bit PCM
        assert!(matches!(
            decode_wav(&bytes),
            Err(WavError::Encoding { bits: 8, .. })
        ));
    }

    #[test]
    fn skips_unknown_chunks() {
        let bytes = encode_wav(&rec(vec![0.25, -0.25], 8000.0), BitDepth::Int16).unwrap();
        let mut patched = bytes[..36].to_vec();
        patched.extend_from_slice(b"LIST");
        patched.extend_from_slice(&3u32.to_le_bytes());
        patched.extend_from_slice(&[1, 2, 3, 0]);
        patched.extend_from_slice(&bytes[36..]);
        let back = decode_wav(&patched).unwrap();
        assert_eq!(back.samples(), &[0.25, -0.25]);
    }
}
