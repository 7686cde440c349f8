//! Minimal RIFF/WAVE reader and writer.
//!
//! Reading accepts mono PCM at 8/16/24/32 bits plus 32-bit IEEE float;
//! integer samples are scaled to `[-1, 1]` by `2^(bits-1)`. Writing always
//! produces 16-bit PCM with round-to-nearest and saturation, so any value a
//! 16-bit file can hold round-trips bit-exactly.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum WavError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: corrupt WAV header: {detail}")]
    CorruptHeader { path: PathBuf, detail: String },
    #[error("{path}: expected mono audio, found {channels} channels")]
    NotMono { path: PathBuf, channels: u16 },
    #[error("{path}: unsupported encoding (format tag {format_tag}, {bits_per_sample} bits)")]
    UnsupportedEncoding {
        path: PathBuf,
        format_tag: u16,
        bits_per_sample: u16,
    },
    #[error("{path}: sample rate {found} Hz, pipeline expects {expected} Hz (resampling disabled)")]
    SampleRateMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
}

/// Decoded audio: float samples in `[-1, 1]` and the file's sample rate.
#[derive(Debug, Clone)]
pub struct WavAudio {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;

/// Read a mono WAV file into float samples.
pub fn read_wav(path: &Path) -> Result<WavAudio, WavError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| WavError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    decode(&bytes).map_err(|detail| match detail {
        DecodeError::Corrupt(detail) => WavError::CorruptHeader {
            path: path.to_path_buf(),
            detail,
        },
        DecodeError::NotMono(channels) => WavError::NotMono {
            path: path.to_path_buf(),
            channels,
        },
        DecodeError::Unsupported(format_tag, bits_per_sample) => WavError::UnsupportedEncoding {
            path: path.to_path_buf(),
            format_tag,
            bits_per_sample,
        },
    })
}

enum DecodeError {
    Corrupt(String),
    NotMono(u16),
    Unsupported(u16, u16),
}

fn decode(bytes: &[u8]) -> Result<WavAudio, DecodeError> {
    let corrupt = |d: &str| DecodeError::Corrupt(d.to_string());
    if bytes.len() < 12 {
        return Err(corrupt("file shorter than the RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(corrupt("missing RIFF tag"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(corrupt("missing WAVE tag"));
    }

    // Walk the chunk list; we need "fmt " before "data".
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format_tag, channels, rate, bits)
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body = pos + 8;
        if body + size > bytes.len() {
            return Err(corrupt(&format!(
                "chunk {:?} claims {size} bytes past end of file",
                String::from_utf8_lossy(id)
            )));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(corrupt("fmt chunk shorter than 16 bytes"));
                }
                let f = &bytes[body..body + 16];
                fmt = Some((
                    u16::from_le_bytes(f[0..2].try_into().unwrap()),
                    u16::from_le_bytes(f[2..4].try_into().unwrap()),
                    u32::from_le_bytes(f[4..8].try_into().unwrap()),
                    u16::from_le_bytes(f[14..16].try_into().unwrap()),
                ));
            }
            b"data" => {
                let (format_tag, channels, rate, bits) =
                    fmt.ok_or_else(|| corrupt("data chunk before fmt chunk"))?;
                if channels != 1 {
                    return Err(DecodeError::NotMono(channels));
                }
                let data = &bytes[body..body + size];
                let samples = decode_samples(data, format_tag, bits)
                    .ok_or(DecodeError::Unsupported(format_tag, bits))?;
                return Ok(WavAudio {
                    samples,
                    sample_rate_hz: rate,
                });
            }
            _ => {}
        }
        // Chunk bodies are padded to even length.
        pos = body + size + (size & 1);
    }
    Err(corrupt("no data chunk"))
}

fn decode_samples(data: &[u8], format_tag: u16, bits: u16) -> Option<Vec<f64>> {
    match (format_tag, bits) {
        (FORMAT_PCM, 8) => {
            // 8-bit WAV is unsigned with a 128 offset.
            Some(data.iter().map(|&b| (b as f64 - 128.0) / 128.0).collect())
        }
        (FORMAT_PCM, 16) => Some(
            data.chunks_exact(2)
                .map(|c| i16::from_le_bytes(c.try_into().unwrap()) as f64 / 32768.0)
                .collect(),
        ),
        (FORMAT_PCM, 24) => Some(
            data.chunks_exact(3)
                .map(|c| {
                    let raw = (c[0] as i32) | (c[1] as i32) << 8 | ((c[2] as i8) as i32) << 16;
                    raw as f64 / 8_388_608.0
                })
                .collect(),
        ),
        (FORMAT_PCM, 32) => Some(
            data.chunks_exact(4)
                .map(|c| i32::from_le_bytes(c.try_into().unwrap()) as f64 / 2_147_483_648.0)
                .collect(),
        ),
        (FORMAT_IEEE_FLOAT, 32) => Some(
            data.chunks_exact(4)
                .map(|c| (f32::from_le_bytes(c.try_into().unwrap()) as f64).clamp(-1.0, 1.0))
                .collect(),
        ),
        _ => None,
    }
}

/// Write mono 16-bit PCM. Samples are rounded to nearest and saturated, so
/// `1.0` becomes 32767 and `-1.0` becomes -32768.
pub fn write_wav(path: &Path, samples: &[f64], sample_rate_hz: u32) -> Result<(), WavError> {
    let io_err = |source| WavError::Io {
        path: path.to_path_buf(),
        source,
    };
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // channels
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(io_err)
}

/// Linear-interpolation resampling. Endpoint samples map to endpoints; the
/// output length is `round(n * to / from)`.
pub fn resample_linear(samples: &[f64], from_hz: u32, to_hz: u32) -> Vec<f64> {
    if from_hz == to_hz || samples.len() < 2 {
        return samples.to_vec();
    }
    let n_out = ((samples.len() as u64 * to_hz as u64 + from_hz as u64 / 2) / from_hz as u64) as usize;
    let step = from_hz as f64 / to_hz as f64;
    (0..n_out)
        .map(|i| {
            let t = i as f64 * step;
            let lo = t.floor() as usize;
            if lo + 1 >= samples.len() {
                samples[samples.len() - 1]
            } else {
                let frac = t - lo as f64;
                samples[lo] * (1.0 - frac) + samples[lo + 1] * frac
            }
        })
        .collect()
}
