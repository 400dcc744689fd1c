//! Synthetic corpus generator and a simple trainable detector, so the full
//! interventional pipeline can be exercised end to end at desk scale.
//!
//! Each item is utterance-like: bursts of harmonic content plus shaped noise
//! separated by near-silent gaps. The two classes differ in spectral tilt in
//! proportion to `class_separation`; speakers and attacks add small
//! per-group tilt offsets. The detector models per-class octave-band
//! log-energy profiles with diagonal Gaussians and scores their
//! log-density ratio, which makes additive-noise and codec-style spectral
//! distortions learnable cues.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use thiserror::Error;

use crate::audio::{self, AudioError, Waveform};
use crate::manifest::{AudioItem, DatasetManifest, ManifestError};
use crate::seeding;

#[derive(Debug, Error)]
pub enum ToyError {
    #[error("n_per_cell must be at least 10 for trainability, got {0}")]
    CorpusTooSmall(usize),
    #[error("class_separation must lie in [0, 1], got {0}")]
    BadSeparation(f64),
    #[error("duration must cover at least one analysis frame, got {0}s")]
    TooShort(f64),
    #[error("training split lacks a non-empty {0} class")]
    MissingClass(&'static str),
    #[error("degenerate features: {0}")]
    DegenerateFeatures(String),
    #[error("item {id:?}: {source}")]
    Audio { id: String, source: AudioError },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("cannot create {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Parameters of a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    /// Items per (class, split) cell.
    pub n_per_cell: usize,
    pub duration_s: f64,
    /// Spectral difference between the classes, 0 (identical) to 1.
    pub class_separation: f64,
    pub n_speakers: usize,
    pub n_attacks: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n_per_cell: 100,
            duration_s: 1.0,
            // Weak legitimate cue, so shortcut effects stay visible.
            class_separation: 0.2,
            n_speakers: 8,
            n_attacks: 4,
            seed: 1,
        }
    }
}

impl CorpusSpec {
    fn validate(&self) -> Result<(), ToyError> {
        if self.n_per_cell < 10 {
            return Err(ToyError::CorpusTooSmall(self.n_per_cell));
        }
        if !(0.0..=1.0).contains(&self.class_separation) {
            return Err(ToyError::BadSeparation(self.class_separation));
        }
        if self.duration_s * (SAMPLE_RATE as f64) < 400.0 {
            return Err(ToyError::TooShort(self.duration_s));
        }
        Ok(())
    }
}

const SAMPLE_RATE: u32 = 16_000;
/// 125 ms envelope chunks: utterances alternate bursts and gaps.
const CHUNK_S: f64 = 0.125;
const GAP_NOISE_AMP: f64 = 1e-4;
/// Base lowpass cutoff of the in-burst noise.
const BASE_CUTOFF_HZ: f64 = 420.0;
/// Class cutoff swing at full separation, in octaves.
const CLASS_OCTAVE_SWING: f64 = 1.0;
const SPEAKER_OCTAVE_STEP: f64 = 0.03;
const ATTACK_OCTAVE_STEP: f64 = 0.05;

fn one_pole_lowpass(input: &[f64], coefficient: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(input.len());
    let mut state = 0.0;
    for &x in input {
        state = coefficient * state + (1.0 - coefficient) * x;
        out.push(state);
    }
    out
}

/// Synthesize one item: bursts of cutoff-shaped noise plus a harmonic
/// stack, with near-silent gaps. The two-pole shaping keeps the top
/// octaves quiet, so wide-band distortions stand out in the band features.
fn synthesize(rng: &mut impl Rng, n_samples: usize, cutoff_hz: f64, f0: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let white: Vec<f64> = (0..n_samples).map(|_| normal.sample(rng)).collect();
    let a = (-2.0 * PI * cutoff_hz / SAMPLE_RATE as f64).exp();
    let shaped = one_pole_lowpass(&one_pole_lowpass(&white, a), a);
    let shaped_rms = (shaped.iter().map(|s| s * s).sum::<f64>() / n_samples as f64)
        .sqrt()
        .max(1e-12);

    // Utterance envelope: 125 ms chunks, each active with probability 0.7,
    // with at least one burst and one gap.
    let chunk = (CHUNK_S * SAMPLE_RATE as f64) as usize;
    let n_chunks = n_samples.div_ceil(chunk);
    let mut active: Vec<bool> = (0..n_chunks).map(|_| rng.gen_bool(0.7)).collect();
    if active.iter().all(|&a| a) {
        let off = rng.gen_range(0..n_chunks);
        active[off] = false;
    }
    if active.iter().all(|&a| !a) {
        let on = rng.gen_range(0..n_chunks);
        active[on] = true;
    }

    let mut phase = rng.gen_range(0.0..2.0 * PI);
    let mut samples = Vec::with_capacity(n_samples);
    for (i, &w) in white.iter().enumerate() {
        let is_active = active[i / chunk];
        let value = if is_active {
            let mut tone = 0.0;
            for h in 1..=6 {
                tone += (phase * h as f64).sin() / h as f64;
            }
            0.8 * shaped[i] / shaped_rms + 0.6 * tone
        } else {
            GAP_NOISE_AMP * w
        };
        samples.push(value);
        phase += 2.0 * PI * f0 / SAMPLE_RATE as f64;
    }

    // Level the item near -22 dBFS RMS with per-item spread.
    let rms = (samples.iter().map(|s| s * s).sum::<f64>() / n_samples as f64).sqrt();
    let target = 0.08 * 10f64.powf(rng.gen_range(-2.0..2.0) / 20.0);
    let gain = target / rms.max(1e-9);
    for s in &mut samples {
        *s *= gain;
    }
    samples
}

fn group_offset(index: usize, count: usize, step: f64) -> f64 {
    // Offsets centered on zero, e.g. 4 groups -> -1.5, -0.5, 0.5, 1.5 steps.
    (index as f64 - (count as f64 - 1.0) / 2.0) * step
}

/// Generate the corpus audio under `out_dir/audio` and return its manifest
/// (also written to `out_dir/manifest.csv`). Deterministic under the spec's
/// seed.
pub fn generate_corpus(spec: &CorpusSpec, out_dir: &Path) -> Result<DatasetManifest, ToyError> {
    spec.validate()?;
    let audio_dir = out_dir.join("audio");
    fs::create_dir_all(&audio_dir).map_err(|source| ToyError::Io {
        path: audio_dir.clone(),
        source,
    })?;
    let n_samples = (spec.duration_s * SAMPLE_RATE as f64).round() as usize;

    let mut items = Vec::new();
    for (class, split, tag) in [(0u8, 0u8, "tn"), (1, 0, "tp"), (0, 1, "en"), (1, 1, "ep")] {
        for i in 0..spec.n_per_cell {
            let id = format!("{tag}{i:05}");
            let speaker = i % spec.n_speakers.max(1);
            let attack = i % spec.n_attacks.max(1);
            let mut item = AudioItem::new(&id, audio_dir.join(format!("{id}.wav")), class, split);
            item.speaker_id = Some(format!("spk{speaker:03}"));
            // Attack ids only exist for the negative (machine-made) class.
            if class == 0 {
                item.attack_id = Some(format!("atk{attack:02}"));
            }
            items.push(item);
        }
    }

    let results: Vec<Result<(), ToyError>> = items
        .par_iter()
        .map(|item| {
            let mut rng = seeding::substream_rng(spec.seed, "toy-item", &item.id);
            let speaker_idx: usize = item
                .speaker_id
                .as_ref()
                .and_then(|s| s[3..].parse().ok())
                .unwrap_or(0);
            let attack_idx: usize = item
                .attack_id
                .as_ref()
                .and_then(|s| s[3..].parse().ok())
                .unwrap_or(0);
            let class_octaves = (item.class_label as f64 - 0.5)
                * spec.class_separation
                * CLASS_OCTAVE_SWING;
            let octaves = class_octaves
                + group_offset(speaker_idx, spec.n_speakers.max(1), SPEAKER_OCTAVE_STEP)
                + if item.class_label == 0 {
                    group_offset(attack_idx, spec.n_attacks.max(1), ATTACK_OCTAVE_STEP)
                } else {
                    0.0
                };
            let cutoff_hz = BASE_CUTOFF_HZ * 2f64.powf(octaves);
            let f0 = 110.0 + 9.0 * speaker_idx as f64 + rng.gen_range(-2.0..2.0);
            let samples = synthesize(&mut rng, n_samples, cutoff_hz, f0);
            let x = Waveform {
                samples,
                sample_rate_hz: SAMPLE_RATE,
            };
            audio::write_pcm(&x, &item.path).map_err(|source| ToyError::Audio {
                id: item.id.clone(),
                source,
            })?;
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }

    let manifest = DatasetManifest::new(format!("toy-{}", spec.seed), SAMPLE_RATE, items)?;
    manifest.save(&out_dir.join("manifest.csv"))?;
    Ok(manifest)
}

/// Octave band edges in Hz up to the 8 kHz Nyquist of the 16 kHz rate.
const BAND_EDGES_HZ: [f64; 9] = [
    31.25, 62.5, 125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0,
];
pub const N_BANDS: usize = 8;
const FFT_LEN: usize = 512;

/// Mean log energy per octave band, the detector's feature map.
/// Non-speech proportion is excluded from the features by design.
pub fn band_log_energies(x: &Waveform) -> [f64; N_BANDS] {
    let fft = FftPlanner::new().plan_fft_forward(FFT_LEN);
    band_log_energies_with(&fft, x)
}

fn band_log_energies_with(fft: &Arc<dyn Fft<f64>>, x: &Waveform) -> [f64; N_BANDS] {
    let hop = FFT_LEN / 2;
    let window: Vec<f64> = (0..FFT_LEN)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / FFT_LEN as f64).cos())
        .collect();
    let mut power = vec![0.0f64; FFT_LEN / 2 + 1];
    let mut n_frames = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); FFT_LEN];
    let mut start = 0;
    while start + FFT_LEN <= x.samples.len() || (n_frames == 0 && !x.samples.is_empty()) {
        for (i, b) in buf.iter_mut().enumerate() {
            let s = x.samples.get(start + i).copied().unwrap_or(0.0);
            *b = Complex::new(s * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (i, p) in power.iter_mut().enumerate() {
            *p += buf[i].norm_sqr();
        }
        n_frames += 1;
        start += hop;
    }
    let bin_hz = x.sample_rate_hz as f64 / FFT_LEN as f64;
    let mut features = [0.0f64; N_BANDS];
    for (b, feature) in features.iter_mut().enumerate() {
        let lo = ((BAND_EDGES_HZ[b] / bin_hz).round() as usize).max(1);
        let hi = ((BAND_EDGES_HZ[b + 1] / bin_hz).round() as usize)
            .min(FFT_LEN / 2)
            .max(lo + 1);
        let energy: f64 =
            power[lo..hi].iter().sum::<f64>() / ((hi - lo) as f64 * n_frames.max(1) as f64);
        *feature = (energy + 1e-20).ln();
    }
    features
}

/// Per-class diagonal Gaussians over the band-energy features.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDetector {
    pub pos_mean: [f64; N_BANDS],
    pub pos_var: [f64; N_BANDS],
    pub neg_mean: [f64; N_BANDS],
    pub neg_var: [f64; N_BANDS],
}

const TOY_VAR_FLOOR: f64 = 1e-6;

fn moments(features: &[[f64; N_BANDS]]) -> ([f64; N_BANDS], [f64; N_BANDS]) {
    let n = features.len() as f64;
    let mut mean = [0.0; N_BANDS];
    let mut var = [0.0; N_BANDS];
    for f in features {
        for j in 0..N_BANDS {
            mean[j] += f[j];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    for f in features {
        for j in 0..N_BANDS {
            var[j] += (f[j] - mean[j]).powi(2);
        }
    }
    for v in &mut var {
        *v = (*v / n).max(TOY_VAR_FLOOR);
    }
    (mean, var)
}

fn extract_all(items: &[(String, PathBuf)]) -> Result<Vec<[f64; N_BANDS]>, ToyError> {
    items
        .par_iter()
        .map(|(id, path)| {
            let x = audio::read_pcm(path).map_err(|source| ToyError::Audio {
                id: id.clone(),
                source,
            })?;
            let f = band_log_energies(&x);
            if f.iter().any(|v| !v.is_finite()) {
                return Err(ToyError::DegenerateFeatures(format!(
                    "non-finite band energy for {id}"
                )));
            }
            Ok(f)
        })
        .collect()
}

/// Train the detector on the manifest's training split: per-class diagonal
/// Gaussian maximum likelihood over the band features.
pub fn train_toy(manifest: &DatasetManifest) -> Result<ToyDetector, ToyError> {
    let part = manifest.partition();
    if part.train_pos.is_empty() {
        return Err(ToyError::MissingClass("positive"));
    }
    if part.train_neg.is_empty() {
        return Err(ToyError::MissingClass("negative"));
    }
    let tuples = |items: &[&AudioItem]| {
        items
            .iter()
            .map(|i| (i.id.clone(), i.path.clone()))
            .collect::<Vec<_>>()
    };
    let pos = extract_all(&tuples(&part.train_pos))?;
    let neg = extract_all(&tuples(&part.train_neg))?;
    let (pos_mean, pos_var) = moments(&pos);
    let (neg_mean, neg_var) = moments(&neg);
    Ok(ToyDetector {
        pos_mean,
        pos_var,
        neg_mean,
        neg_var,
    })
}

/// Detector score: log-density ratio of the feature vector, positive class
/// over negative class.
pub fn score_toy(detector: &ToyDetector, x: &Waveform) -> f64 {
    let f = band_log_energies(x);
    score_features(detector, &f)
}

fn score_features(detector: &ToyDetector, f: &[f64; N_BANDS]) -> f64 {
    let mut score = 0.0;
    for j in 0..N_BANDS {
        let dp = f[j] - detector.pos_mean[j];
        let dn = f[j] - detector.neg_mean[j];
        score += -0.5 * (detector.pos_var[j].ln() + dp * dp / detector.pos_var[j])
            + 0.5 * (detector.neg_var[j].ln() + dn * dn / detector.neg_var[j]);
    }
    score
}

/// Score every evaluation item; rows come back in id order.
pub fn score_eval_split(
    detector: &ToyDetector,
    manifest: &DatasetManifest,
) -> Result<Vec<(String, f64, u8)>, ToyError> {
    let part = manifest.partition();
    let mut eval: Vec<&AudioItem> = part.eval_neg.into_iter().chain(part.eval_pos).collect();
    eval.sort_by(|a, b| a.id.cmp(&b.id));
    let scores: Vec<Result<(String, f64, u8), ToyError>> = eval
        .par_iter()
        .map(|item| {
            let x = audio::read_pcm(&item.path).map_err(|source| ToyError::Audio {
                id: item.id.clone(),
                source,
            })?;
            Ok((item.id.clone(), score_toy(detector, &x), item.class_label))
        })
        .collect();
    scores.into_iter().collect()
}
