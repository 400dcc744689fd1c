//! RIFF/WAVE I/O, restricted to the only format the toolkit uses:
//! 16-bit signed PCM, mono.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{AudioError, Waveform};

const RIFF: &[u8; 4] = b"RIFF";
const WAVE: &[u8; 4] = b"WAVE";
const FMT: &[u8; 4] = b"fmt ";
const DATA: &[u8; 4] = b"data";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AudioError + '_ {
    move |source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> AudioError {
    AudioError::UnsupportedFormat {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Read a mono 16-bit PCM WAV file. Samples are scaled by 1/32768 into
/// [-1, 1); the file's sample rate is preserved.
pub fn read_pcm(path: &Path) -> Result<Waveform, AudioError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < 12 || &bytes[0..4] != RIFF || &bytes[8..12] != WAVE {
        return Err(format_err(path, "not a RIFF/WAVE file"));
    }

    let mut sample_rate = None;
    let mut data: Option<&[u8]> = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id: [u8; 4] = bytes[at..at + 4].try_into().unwrap();
        let size = read_u32(&bytes, at + 4) as usize;
        let body_start = at + 8;
        let body_end = body_start.checked_add(size).filter(|&e| e <= bytes.len());
        let body_end = match body_end {
            Some(e) => e,
            None => return Err(format_err(path, "truncated chunk")),
        };
        match &id {
            FMT => {
                if size < 16 {
                    return Err(format_err(path, "fmt chunk too short"));
                }
                let format_tag = read_u16(&bytes, body_start);
                let channels = read_u16(&bytes, body_start + 2);
                let rate = read_u32(&bytes, body_start + 4);
                let bits = read_u16(&bytes, body_start + 14);
                if format_tag != 1 {
                    return Err(format_err(
                        path,
                        format!("compressed or float audio (format tag {format_tag}); only PCM is supported"),
                    ));
                }
                if channels != 1 {
                    return Err(format_err(
                        path,
                        format!("{channels} channels; only mono is supported"),
                    ));
                }
                if bits != 16 {
                    return Err(format_err(
                        path,
                        format!("{bits}-bit samples; only 16-bit is supported"),
                    ));
                }
                sample_rate = Some(rate);
            }
            DATA => data = Some(&bytes[body_start..body_end]),
            _ => {} // skip unknown chunks (LIST, fact, ...)
        }
        // Chunks are word-aligned.
        at = body_end + (size & 1);
    }

    let sample_rate = sample_rate.ok_or_else(|| format_err(path, "missing fmt chunk"))?;
    let data = data.ok_or_else(|| format_err(path, "missing data chunk"))?;
    if data.len() % 2 != 0 {
        return Err(format_err(path, "odd data chunk length"));
    }
    let samples: Vec<f64> = data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
        .collect();
    if samples.is_empty() {
        return Err(AudioError::Empty);
    }
    Ok(Waveform {
        samples,
        sample_rate_hz: sample_rate,
    })
}

/// Quantize one sample to i16, rounding half away from zero and saturating.
fn quantize(s: f64) -> (i16, bool) {
    let scaled = s * 32768.0;
    let rounded = scaled.round(); // f64::round is half-away-from-zero
    if rounded > 32767.0 {
        (32767, scaled > 32767.0)
    } else if rounded < -32768.0 {
        (-32768, true)
    } else {
        (rounded as i16, false)
    }
}

/// Write a mono 16-bit PCM WAV file, rounding half away from zero.
///
/// Samples outside [-1, 1] are hard-clipped; the number of clipped samples
/// is returned and logged as a warning.
pub fn write_pcm(x: &Waveform, path: &Path) -> Result<usize, AudioError> {
    let mut pcm = Vec::with_capacity(x.samples.len() * 2);
    let mut clipped = 0usize;
    for &s in &x.samples {
        let (q, was_clipped) = quantize(s);
        if was_clipped {
            clipped += 1;
        }
        pcm.extend_from_slice(&q.to_le_bytes());
    }
    if clipped > 0 {
        log::warn!("{}: hard-clipped {clipped} samples at write", path.display());
    }

    let data_len = pcm.len() as u32;
    let byte_rate = x.sample_rate_hz * 2;
    let mut out = Vec::with_capacity(44 + pcm.len());
    out.extend_from_slice(RIFF);
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(WAVE);
    out.extend_from_slice(FMT);
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&x.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    out.extend_from_slice(DATA);
    out.extend_from_slice(&data_len.to_le_bytes());
    out.extend_from_slice(&pcm);

    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&out).map_err(io_err(path))?;
    Ok(clipped)
}
