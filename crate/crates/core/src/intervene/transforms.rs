//! The intervention transforms themselves. Each is a deterministic function
//! of the input waveform and its control parameter (plus an explicit seed
//! where the transform draws randomness).

use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand_distr::{Distribution, Normal};

use crate::audio::{
    self, energy_vad, measure_loudness_lufs, AudioError, Waveform, DEFAULT_FRAME_MS,
    DEFAULT_VAD_THRESHOLD_DB, LOUDNESS_SILENT,
};
use crate::seeding;

/// Add white Gaussian noise at the requested signal-to-noise ratio.
///
/// The noise is scaled against the full-signal mean square and normalized by
/// its own realized power, so the realized ratio equals `snr_db` exactly
/// under the full-signal power definition. Deterministic under `noise_seed`.
pub fn add_white_noise(x: &Waveform, snr_db: f64, noise_seed: u64) -> Result<Waveform, AudioError> {
    let p_signal = x.power();
    if p_signal <= 0.0 {
        return Err(AudioError::ZeroPower);
    }
    let mut rng = seeding::rng_from_seed(noise_seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let noise: Vec<f64> = (0..x.len()).map(|_| normal.sample(&mut rng)).collect();
    let realized = noise.iter().map(|n| n * n).sum::<f64>() / noise.len() as f64;
    let target_power = p_signal * 10f64.powf(-snr_db / 10.0);
    let scale = (target_power / realized).sqrt();
    let samples = x
        .samples
        .iter()
        .zip(&noise)
        .map(|(s, n)| s + scale * n)
        .collect();
    Ok(Waveform {
        samples,
        sample_rate_hz: x.sample_rate_hz,
    })
}

const MU: f64 = 255.0;
/// Mu-law quantizer levels. An odd count keeps 0 and +/-1 exact levels.
const MU_LEVELS: usize = 255;

fn mu_compress(x: f64) -> f64 {
    x.signum() * (1.0 + MU * x.abs()).ln() / (1.0 + MU).ln()
}

fn mu_expand(c: f64) -> f64 {
    c.signum() * ((1.0 + MU).powf(c.abs()) - 1.0) / MU
}

/// Mu-law companding round trip: compress, quantize to 255 levels, expand.
/// The only change it introduces is quantization error; quantizer outputs
/// are fixed points, so a second application is a bit-exact no-op.
pub fn mu_law_roundtrip(x: &Waveform) -> Waveform {
    let steps = (MU_LEVELS - 1) as f64;
    let samples = x
        .samples
        .iter()
        .map(|&s| {
            let c = mu_compress(s.clamp(-1.0, 1.0));
            let k = ((c + 1.0) / 2.0 * steps).round();
            let c_q = 2.0 * k / steps - 1.0;
            mu_expand(c_q)
        })
        .collect();
    Waveform {
        samples,
        sample_rate_hz: x.sample_rate_hz,
    }
}

/// Exact round-trip error bound of the quantizer, by enumerating every
/// cell: the largest sample-space distance from a reproduction level to the
/// edge of its decision cell. Expansion is convex, so the level is not the
/// cell midpoint. Used by tests as an independent oracle.
#[cfg(test)]
pub(crate) fn mu_law_quantizer_error_bound() -> f64 {
    let steps = (MU_LEVELS - 1) as f64;
    let level = |k: f64| 2.0 * k / steps - 1.0;
    (0..MU_LEVELS)
        .map(|k| {
            let lo_c = if k == 0 { -1.0 } else { level(k as f64 - 0.5) };
            let hi_c = if k == MU_LEVELS - 1 {
                1.0
            } else {
                level(k as f64 + 0.5)
            };
            let y = mu_expand(level(k as f64));
            (mu_expand(hi_c) - y).max(y - mu_expand(lo_c))
        })
        .fold(0.0f64, f64::max)
}

/// Apply constant gain so the measured integrated loudness lands on
/// `target_lufs`, with one correction iteration permitted.
pub fn loudness_normalize(x: &Waveform, target_lufs: f64) -> Result<Waveform, AudioError> {
    let measured = measure_loudness_lufs(x)?;
    if measured == LOUDNESS_SILENT {
        return Err(AudioError::Silent("cannot normalize loudness"));
    }
    let mut y = audio::apply_gain(x, target_lufs - measured);
    let check = measure_loudness_lufs(&y)?;
    if check != LOUDNESS_SILENT && (check - target_lufs).abs() > 0.2 {
        y = audio::apply_gain(&y, target_lufs - check);
    }
    Ok(y)
}

/// Set every frame flagged non-speech by the default energy VAD to exact
/// zeros; speech frames are copied bit-exactly.
pub fn zero_nonspeech(x: &Waveform) -> Waveform {
    let mask = energy_vad(x, DEFAULT_FRAME_MS, DEFAULT_VAD_THRESHOLD_DB);
    let flen = mask.frame_length_samples;
    let mut samples = x.samples.clone();
    for (f, &flag) in mask.flags.iter().enumerate() {
        if flag == 0 {
            let start = f * flen;
            let end = ((f + 1) * flen).min(samples.len());
            samples[start..end].fill(0.0);
        }
    }
    Waveform {
        samples,
        sample_rate_hz: x.sample_rate_hz,
    }
}

fn format_codec_param(z: f64) -> String {
    if z.fract() == 0.0 && z.abs() < 1e15 {
        format!("{}", z as i64)
    } else {
        format!("{z}")
    }
}

/// Run an external codec over the waveform.
///
/// `cmd_template` is tokenized on whitespace; `{in}`, `{out}` and `{z}`
/// placeholders are substituted per token. The input is written as PCM to a
/// temp file, the command is run with a timeout, and the decoded result is
/// read back, trimmed or zero-padded to the input length to absorb codec
/// padding. Errors carry the captured diagnostics.
pub fn external_codec(
    x: &Waveform,
    cmd_template: &str,
    z: f64,
    timeout_s: u64,
) -> Result<Waveform, String> {
    if !cmd_template.contains("{in}") || !cmd_template.contains("{out}") {
        return Err("command template must contain {in} and {out} placeholders".into());
    }
    let dir = tempfile::tempdir().map_err(|e| format!("cannot create temp dir: {e}"))?;
    let in_path = dir.path().join("in.wav");
    let out_path = dir.path().join("out.wav");
    audio::write_pcm(x, &in_path).map_err(|e| format!("cannot stage input: {e}"))?;

    let z_str = format_codec_param(z);
    let tokens: Vec<String> = cmd_template
        .split_whitespace()
        .map(|t| {
            t.replace("{in}", &in_path.to_string_lossy())
                .replace("{out}", &out_path.to_string_lossy())
                .replace("{z}", &z_str)
        })
        .collect();
    let (program, args) = tokens
        .split_first()
        .ok_or_else(|| "empty command template".to_string())?;

    let mut child = Command::new(program)
        .args(args)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| format!("cannot start {program:?}: {e}"))?;
    let deadline = Instant::now() + Duration::from_secs(timeout_s);
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(format!("{program:?} timed out after {timeout_s}s"));
                }
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(format!("wait on {program:?} failed: {e}")),
        }
    };
    let output = child
        .wait_with_output()
        .map_err(|e| format!("cannot collect {program:?} output: {e}"))?;
    if !status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        return Err(format!(
            "{program:?} exited with {status}: {}",
            stderr.trim()
        ));
    }

    let mut decoded =
        audio::read_pcm(&out_path).map_err(|e| format!("cannot read codec output: {e}"))?;
    decoded.samples.resize(x.len(), 0.0);
    decoded.sample_rate_hz = x.sample_rate_hz;
    Ok(decoded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tone(freq: f64, amp: f64, n: usize, fs: u32) -> Waveform {
        Waveform::new(
            (0..n)
                .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / fs as f64).sin())
                .collect(),
            fs,
        )
        .unwrap()
    }

    #[test]
    fn noise_hits_the_dialed_snr() {
        let x = tone(440.0, 0.4, 16_000, 16_000);
        for snr in [0.0, 10.0, 30.0, 60.0] {
            let y = add_white_noise(&x, snr, 7).unwrap();
            let noise_power: f64 = y
                .samples
                .iter()
                .zip(&x.samples)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / x.len() as f64;
            let realized = 10.0 * (x.power() / noise_power).log10();
            assert!((realized - snr).abs() < 0.2, "snr {snr}: got {realized}");
        }
        // 60 dB on unit-power input leaves 1e-6 noise power.
        let unit = Waveform::new(vec![1.0, -1.0].repeat(8000), 16_000).unwrap();
        let y = add_white_noise(&unit, 60.0, 3).unwrap();
        let p: f64 = y
            .samples
            .iter()
            .zip(&unit.samples)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / unit.len() as f64;
        assert!((p - 1e-6).abs() < 1e-8);
    }

    #[test]
    fn noise_is_deterministic_under_seed() {
        let x = tone(220.0, 0.2, 4000, 16_000);
        let a = add_white_noise(&x, 12.0, 99).unwrap();
        let b = add_white_noise(&x, 12.0, 99).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = add_white_noise(&x, 12.0, 100).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn noise_rejects_zero_power() {
        let x = Waveform::new(vec![0.0; 100], 16_000).unwrap();
        assert!(matches!(
            add_white_noise(&x, 10.0, 1),
            Err(AudioError::ZeroPower)
        ));
    }

    #[test]
    fn mu_law_fixes_zero_and_full_scale() {
        let x = Waveform::new(vec![0.0, 1.0, -1.0], 16_000).unwrap();
        let y = mu_law_roundtrip(&x);
        assert_eq!(y.samples, vec![0.0, 1.0, -1.0]);
    }

    #[test]
    fn mu_law_error_is_bounded_by_the_enumerated_cells() {
        let bound = mu_law_quantizer_error_bound();
        let mut rng = crate::seeding::rng_from_seed(5);
        let samples: Vec<f64> = (0..20_000).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let x = Waveform::new(samples, 16_000).unwrap();
        let y = mu_law_roundtrip(&x);
        let max_err = x
            .samples
            .iter()
            .zip(&y.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err <= bound + 1e-12, "{max_err} > {bound}");
        // The bound is tight in order of magnitude: the widest cell sits at
        // full scale and random draws come close to its edge.
        assert!(max_err > bound / 2.0);
    }

    #[test]
    fn mu_law_is_idempotent_after_first_application() {
        let mut rng = crate::seeding::rng_from_seed(6);
        let samples: Vec<f64> = (0..10_000).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let x = Waveform::new(samples, 16_000).unwrap();
        let once = mu_law_roundtrip(&x);
        let twice = mu_law_roundtrip(&once);
        assert_eq!(once.samples, twice.samples);
    }

    #[test]
    fn zero_nonspeech_zeroes_only_quiet_frames() {
        let mut samples = tone(440.0, 0.5, 8000, 16_000).samples;
        samples.extend(vec![1e-5; 8000]);
        let x = Waveform::new(samples, 16_000).unwrap();
        let y = zero_nonspeech(&x);
        assert_eq!(&y.samples[..8000], &x.samples[..8000]);
        assert!(y.samples[8000..].iter().all(|&s| s == 0.0));

        let speech = tone(300.0, 0.4, 4000, 16_000);
        assert_eq!(zero_nonspeech(&speech).samples, speech.samples);

        let silent = Waveform::new(vec![0.0; 4000], 16_000).unwrap();
        assert!(zero_nonspeech(&silent).samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn loudness_normalize_reaches_target() {
        let x = tone(440.0, 0.5, 16_000, 16_000);
        for target in [-23.0, -17.0, -31.0] {
            let y = loudness_normalize(&x, target).unwrap();
            let got = measure_loudness_lufs(&y).unwrap();
            assert!((got - target).abs() <= 0.2, "target {target}: {got}");
        }
    }

    #[test]
    fn loudness_normalize_gain_hand_value() {
        let x = tone(997.0, 0.5, 16_000, 16_000);
        let measured = measure_loudness_lufs(&x).unwrap();
        let y = loudness_normalize(&x, measured - 6.0).unwrap();
        let ratio = y.samples[100] / x.samples[100];
        assert!((20.0 * ratio.log10() + 6.0).abs() < 0.1);
        // Already at target: gain is essentially zero.
        let same = loudness_normalize(&x, measured).unwrap();
        let ratio = same.samples[100] / x.samples[100];
        assert!((ratio - 1.0).abs() < 0.01);
    }

    #[test]
    fn loudness_normalize_rejects_silence() {
        let x = Waveform::new(vec![0.0; 16_000], 16_000).unwrap();
        assert!(matches!(
            loudness_normalize(&x, -23.0),
            Err(AudioError::Silent(_))
        ));
    }

    #[test]
    fn identity_codec_round_trips() {
        let x = tone(440.0, 0.3, 4000, 16_000);
        let quantized = {
            // Stage through PCM so the reference is exactly representable.
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("q.wav");
            audio::write_pcm(&x, &p).unwrap();
            audio::read_pcm(&p).unwrap()
        };
        let y = external_codec(&quantized, "cp {in} {out}", 64.0, 30).unwrap();
        assert_eq!(y.samples, quantized.samples);
    }

    #[test]
    fn missing_codec_executable_names_the_command() {
        let x = tone(440.0, 0.3, 2000, 16_000);
        let err = external_codec(&x, "definitely-not-a-codec {in} {out} {z}", 64.0, 5)
            .unwrap_err();
        assert!(err.contains("definitely-not-a-codec"), "{err}");
    }

    #[test]
    fn failing_codec_reports_diagnostics() {
        let x = tone(440.0, 0.3, 2000, 16_000);
        let err = external_codec(&x, "false {in} {out}", 64.0, 5).unwrap_err();
        assert!(err.contains("exited"), "{err}");
    }
}
