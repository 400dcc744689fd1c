//! Frame energies, energy-threshold voice activity detection, and a
//! VAD-style signal-to-noise estimator.

use super::{VadMask, Waveform, POWER_FLOOR};

/// Per-frame mean-square power over non-overlapping frames; the final
/// partial frame is kept.
pub fn frame_powers(x: &Waveform, frame_ms: f64) -> Vec<f64> {
    let flen = x.frame_len(frame_ms);
    x.samples
        .chunks(flen)
        .map(|frame| frame.iter().map(|s| s * s).sum::<f64>() / frame.len() as f64)
        .collect()
}

/// Per-frame log energies in dB: `10*log10(mean square + floor)`.
pub fn frame_energies(x: &Waveform, frame_ms: f64) -> Vec<f64> {
    frame_powers(x, frame_ms)
        .into_iter()
        .map(|p| 10.0 * (p + POWER_FLOOR).log10())
        .collect()
}

/// Energy threshold VAD: a frame is speech iff its energy is within
/// `threshold_db_below_peak` of the loudest frame.
///
/// When the peak energy is at the silence floor (<= -119 dB) the relative
/// rule is meaningless and every frame is flagged non-speech.
pub fn energy_vad(x: &Waveform, frame_ms: f64, threshold_db_below_peak: f64) -> VadMask {
    let energies = frame_energies(x, frame_ms);
    let peak = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let flags = if peak <= -119.0 {
        vec![0; energies.len()]
    } else {
        energies
            .iter()
            .map(|&e| (e >= peak - threshold_db_below_peak) as u8)
            .collect()
    };
    VadMask {
        frame_length_samples: x.frame_len(frame_ms),
        flags,
    }
}

/// SNR estimate in dB, clamped to [-10, 60].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrEstimate {
    pub snr_db: f64,
    /// Set when the signal had no usable speech/noise contrast and a clamp
    /// boundary was returned instead of a measured ratio.
    pub degenerate: bool,
}

pub const SNR_CLAMP_LO: f64 = -10.0;
pub const SNR_CLAMP_HI: f64 = 60.0;

/// Minimum energy contrast (dB) between the two frame clusters for the
/// speech/noise split to be considered meaningful.
const SNR_SPLIT_MARGIN_DB: f64 = 2.0;

/// Two-cluster split of frame energies (dB); returns (low mean, high mean,
/// threshold). Deterministic: initialized at the min/max energies.
fn two_means_split(energies: &[f64]) -> (f64, f64, f64) {
    let lo0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi0 = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = lo0;
    let mut hi = hi0;
    for _ in 0..64 {
        let thr = 0.5 * (lo + hi);
        let (mut sl, mut nl, mut sh, mut nh) = (0.0, 0usize, 0.0, 0usize);
        for &e in energies {
            if e < thr {
                sl += e;
                nl += 1;
            } else {
                sh += e;
                nh += 1;
            }
        }
        if nl == 0 || nh == 0 {
            break;
        }
        let new_lo = sl / nl as f64;
        let new_hi = sh / nh as f64;
        if (new_lo - lo).abs() < 1e-9 && (new_hi - hi).abs() < 1e-9 {
            lo = new_lo;
            hi = new_hi;
            break;
        }
        lo = new_lo;
        hi = new_hi;
    }
    (lo, hi, 0.5 * (lo + hi))
}

/// Estimate SNR as the speech-minus-noise over noise power ratio.
///
/// Frames are split into a high-energy (speech) and a low-energy (noise)
/// cluster by a deterministic two-means partition of the frame energies.
/// The estimate is `10*log10((Ps - Pn)+ / Pn)` with the difference floored
/// at the power floor, clamped to [-10, 60] dB. Signals whose frame
/// energies show no usable contrast (stationary noise, digital silence)
/// yield a clamp boundary with the `degenerate` flag set.
pub fn estimate_snr(x: &Waveform) -> SnrEstimate {
    let powers = frame_powers(x, super::DEFAULT_FRAME_MS);
    let energies: Vec<f64> = powers
        .iter()
        .map(|&p| 10.0 * (p + POWER_FLOOR).log10())
        .collect();
    let peak = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if peak <= -119.0 || energies.len() < 2 {
        return SnrEstimate {
            snr_db: SNR_CLAMP_LO,
            degenerate: true,
        };
    }
    let (lo_mean, hi_mean, thr) = two_means_split(&energies);
    if hi_mean - lo_mean < SNR_SPLIT_MARGIN_DB {
        // No temporal structure to separate speech from background.
        return SnrEstimate {
            snr_db: SNR_CLAMP_LO,
            degenerate: true,
        };
    }
    let mut speech = (0.0, 0usize);
    let mut noise = (0.0, 0usize);
    for (&p, &e) in powers.iter().zip(&energies) {
        if e >= thr {
            speech.0 += p;
            speech.1 += 1;
        } else {
            noise.0 += p;
            noise.1 += 1;
        }
    }
    if speech.1 == 0 || noise.1 == 0 {
        let all_speech = noise.1 == 0;
        return SnrEstimate {
            snr_db: if all_speech { SNR_CLAMP_HI } else { SNR_CLAMP_LO },
            degenerate: true,
        };
    }
    let ps = speech.0 / speech.1 as f64;
    let pn = (noise.0 / noise.1 as f64).max(POWER_FLOOR);
    let diff = (ps - pn).max(POWER_FLOOR);
    SnrEstimate {
        snr_db: (10.0 * (diff / pn).log10()).clamp(SNR_CLAMP_LO, SNR_CLAMP_HI),
        degenerate: false,
    }
}
