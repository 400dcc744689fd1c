//! Deterministic PCM audio I/O and the DSP measurements the audits depend
//! on: framing, energy VAD, non-speech proportion, SNR estimation, and
//! BS.1770-style integrated loudness.

mod loudness;
mod vad;
mod wav;

pub use loudness::{measure_loudness_lufs, LOUDNESS_SILENT};
pub use vad::{energy_vad, estimate_snr, frame_energies, frame_powers, SnrEstimate};
pub use wav::{read_pcm, write_pcm};

use std::path::PathBuf;

use thiserror::Error;

/// Power floor applied inside every log; below one LSB^2 of 16-bit audio.
pub const POWER_FLOOR: f64 = 1e-12;

/// Default analysis frame length.
pub const DEFAULT_FRAME_MS: f64 = 25.0;

/// Default VAD threshold relative to the peak frame energy, in dB.
pub const DEFAULT_VAD_THRESHOLD_DB: f64 = 30.0;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    UnsupportedFormat { path: PathBuf, message: String },
    #[error("waveform contains non-finite samples")]
    NonFiniteSamples,
    #[error("waveform is empty")]
    Empty,
    #[error("signal too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("signal is silent: {0}")]
    Silent(&'static str),
    #[error("input has zero power")]
    ZeroPower,
}

/// Mono waveform with samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl Waveform {
    /// Validating constructor: rejects empty and non-finite input.
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        if samples.is_empty() {
            return Err(AudioError::Empty);
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(AudioError::NonFiniteSamples);
        }
        Ok(Waveform {
            samples,
            sample_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Mean square over all samples.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    /// Samples per analysis frame for a frame length in milliseconds.
    pub fn frame_len(&self, frame_ms: f64) -> usize {
        ((self.sample_rate_hz as f64 * frame_ms / 1000.0).round() as usize).max(1)
    }
}

/// Per-frame speech flags (1 = speech) at a fixed frame length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VadMask {
    pub frame_length_samples: usize,
    pub flags: Vec<u8>,
}

impl VadMask {
    /// Fraction of frames flagged non-speech.
    pub fn nonspeech_proportion(&self) -> f64 {
        nonspeech_proportion(self)
    }
}

/// Fraction of frames flagged non-speech, `(# zero flags) / (# flags)`.
pub fn nonspeech_proportion(mask: &VadMask) -> f64 {
    let zeros = mask.flags.iter().filter(|&&f| f == 0).count();
    zeros as f64 / mask.flags.len() as f64
}

/// The scalar measurements used as nuisance features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuisanceKind {
    SnrDb,
    NonspeechProportion,
}

impl NuisanceKind {
    pub fn name(self) -> &'static str {
        match self {
            NuisanceKind::SnrDb => "snr_db",
            NuisanceKind::NonspeechProportion => "nonspeech_proportion",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "snr_db" | "snr" => Some(NuisanceKind::SnrDb),
            "nonspeech_proportion" | "nonspeech" => Some(NuisanceKind::NonspeechProportion),
            _ => None,
        }
    }
}

/// One extracted nuisance measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuisanceFeature {
    pub kind: NuisanceKind,
    pub value: f64,
}

/// Extract the named nuisance feature from a waveform.
pub fn nuisance_feature(x: &Waveform, kind: NuisanceKind) -> NuisanceFeature {
    let value = match kind {
        NuisanceKind::SnrDb => estimate_snr(x).snr_db,
        NuisanceKind::NonspeechProportion => {
            nonspeech_proportion(&energy_vad(x, DEFAULT_FRAME_MS, DEFAULT_VAD_THRESHOLD_DB))
        }
    };
    NuisanceFeature { kind, value }
}

/// Multiply samples by `10^(gain_db/20)`. No clipping is applied here;
/// samples are only clipped at write time.
pub fn apply_gain(x: &Waveform, gain_db: f64) -> Waveform {
    let g = 10f64.powf(gain_db / 20.0);
    Waveform {
        samples: x.samples.iter().map(|s| s * g).collect(),
        sample_rate_hz: x.sample_rate_hz,
    }
}
