//! Integrated loudness measurement (LUFS) with K-weighting and the
//! absolute/relative gating scheme of ITU-R BS.1770-4.
//!
//! The standard tabulates filter coefficients for 48 kHz only; here the two
//! pre-filter stages are re-derived at the waveform's sample rate from the
//! analog prototypes (high shelf, then high pass), the same parametrization
//! used by common loudness meters.

use super::{AudioError, Waveform};

/// Sentinel for "every block fell below the absolute gate".
pub const LOUDNESS_SILENT: f64 = f64::NEG_INFINITY;

const BLOCK_S: f64 = 0.400;
const HOP_S: f64 = 0.100; // 75% overlap
const ABSOLUTE_GATE_LUFS: f64 = -70.0;
const RELATIVE_GATE_LU: f64 = -10.0;
const LOUDNESS_OFFSET: f64 = -0.691;

/// Direct-form biquad with a0 normalized to 1.
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl Biquad {
    /// Stage 1: high-shelf boost (+4 dB above ~1681 Hz).
    fn high_shelf(fs: f64) -> Biquad {
        let gain_db = 3.999_843_853_97;
        let q = 0.707_175_236_955_419_3;
        let center_hz = 1_681.974_450_955_531_9;

        let k = (std::f64::consts::PI * center_hz / fs).tan();
        let vh = 10f64.powf(gain_db / 20.0);
        let vb = vh.powf(0.499_666_774_155);
        let a0 = 1.0 + k / q + k * k;
        Biquad {
            b0: (vh + vb * k / q + k * k) / a0,
            b1: 2.0 * (k * k - vh) / a0,
            b2: (vh - vb * k / q + k * k) / a0,
            a1: 2.0 * (k * k - 1.0) / a0,
            a2: (1.0 - k / q + k * k) / a0,
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    /// Stage 2: high-pass (~38 Hz) removing DC and rumble.
    fn high_pass(fs: f64) -> Biquad {
        let q = 0.500_327_037_325_395_3;
        let center_hz = 38.135_470_876_139_82;

        let k = (std::f64::consts::PI * center_hz / fs).tan();
        let a0 = 1.0 + k / q + k * k;
        Biquad {
            b0: 1.0,
            b1: -2.0,
            b2: 1.0,
            a1: 2.0 * (k * k - 1.0) / a0,
            a2: (1.0 - k / q + k * k) / a0,
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn apply(&mut self, x0: f64) -> f64 {
        let y0 =
            self.b0 * x0 + self.b1 * self.x1 + self.b2 * self.x2 - self.a1 * self.y1 - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x0;
        self.y2 = self.y1;
        self.y1 = y0;
        y0
    }
}

fn k_weight(x: &Waveform) -> Vec<f64> {
    let fs = x.sample_rate_hz as f64;
    let mut shelf = Biquad::high_shelf(fs);
    let mut hp = Biquad::high_pass(fs);
    x.samples
        .iter()
        .map(|&s| hp.apply(shelf.apply(s)))
        .collect()
}

fn block_loudness(ms: f64) -> f64 {
    LOUDNESS_OFFSET + 10.0 * (ms + super::POWER_FLOOR).log10()
}

/// Integrated loudness in LUFS.
///
/// Mean squares are taken over 400 ms blocks with 75% overlap on the
/// K-weighted signal; blocks are gated absolutely at -70 LUFS, then
/// relatively at 10 LU below the first-pass level. Returns
/// [`LOUDNESS_SILENT`] when every block is below the absolute gate, and an
/// error for input shorter than one block.
pub fn measure_loudness_lufs(x: &Waveform) -> Result<f64, AudioError> {
    let fs = x.sample_rate_hz as f64;
    let block = (BLOCK_S * fs).round() as usize;
    let hop = (HOP_S * fs).round() as usize;
    if x.samples.len() < block {
        return Err(AudioError::TooShort {
            needed: block,
            got: x.samples.len(),
        });
    }

    let weighted = k_weight(x);
    let mut block_ms = Vec::new();
    let mut start = 0;
    while start + block <= weighted.len() {
        let ms = weighted[start..start + block]
            .iter()
            .map(|s| s * s)
            .sum::<f64>()
            / block as f64;
        block_ms.push(ms);
        start += hop;
    }

    let above_absolute: Vec<f64> = block_ms
        .iter()
        .copied()
        .filter(|&ms| block_loudness(ms) > ABSOLUTE_GATE_LUFS)
        .collect();
    if above_absolute.is_empty() {
        return Ok(LOUDNESS_SILENT);
    }
    let first_pass =
        block_loudness(above_absolute.iter().sum::<f64>() / above_absolute.len() as f64);
    let threshold = (first_pass + RELATIVE_GATE_LU).max(ABSOLUTE_GATE_LUFS);
    let gated: Vec<f64> = above_absolute
        .iter()
        .copied()
        .filter(|&ms| block_loudness(ms) > threshold)
        .collect();
    // The loudest contributing block always survives the relative gate.
    debug_assert!(!gated.is_empty());
    Ok(block_loudness(gated.iter().sum::<f64>() / gated.len() as f64))
}
