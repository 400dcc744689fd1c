//! Controlled dataset interventions: the transform catalogue, the seeded
//! subset-assignment rule, the named configuration algebra, partial-bias
//! grids, and the treatment-difference features used by the score models.

mod receipt;
mod transforms;

pub use receipt::{parse_receipt, receipt_to_text, PlanReceipt};
pub use transforms::{
    add_white_noise, external_codec, loudness_normalize, mu_law_roundtrip, zero_nonspeech,
};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::audio::{self, AudioError, Waveform};
use crate::manifest::{AudioItem, DatasetManifest, ManifestError, Subset};
use crate::seeding;

#[derive(Debug, Error)]
pub enum InterveneError {
    #[error("unknown configuration name {0:?}")]
    UnknownConfig(String),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("control interval has lo {lo} > hi {hi}")]
    BadInterval { lo: f64, hi: f64 },
    #[error("{kind} takes no control parameter")]
    UnexpectedControl { kind: &'static str },
    #[error("{kind} requires a control distribution")]
    MissingControl { kind: &'static str },
    #[error("external codec requires a command template")]
    MissingCodecCommand,
    #[error("codec command failed for {id:?}: {message}")]
    Codec { id: String, message: String },
    #[error("item {id:?}: {source}")]
    Audio { id: String, source: AudioError },
    #[error("plan does not cover item {0:?}")]
    UncoveredItem(String),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("receipt parse error at line {line}: {message}")]
    ReceiptParse { line: usize, message: String },
}

/// The supported intervention transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterventionKind {
    WhiteNoise,
    MuLaw,
    LoudnessNorm,
    NonspeechZeroing,
    ExternalCodec,
}

impl InterventionKind {
    pub fn name(self) -> &'static str {
        match self {
            InterventionKind::WhiteNoise => "white_noise",
            InterventionKind::MuLaw => "mu_law",
            InterventionKind::LoudnessNorm => "loudness_norm",
            InterventionKind::NonspeechZeroing => "nonspeech_zeroing",
            InterventionKind::ExternalCodec => "external_codec",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "white_noise" | "noise" => Some(InterventionKind::WhiteNoise),
            "mu_law" | "mulaw" => Some(InterventionKind::MuLaw),
            "loudness_norm" | "loudness" => Some(InterventionKind::LoudnessNorm),
            "nonspeech_zeroing" | "nonspeech" | "blanking" => Some(InterventionKind::NonspeechZeroing),
            "external_codec" | "codec" => Some(InterventionKind::ExternalCodec),
            _ => None,
        }
    }
}

/// Distribution of the per-item control parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlDist {
    /// Parameter-free transform.
    None,
    /// Continuous uniform on [lo, hi].
    Uniform { lo: f64, hi: f64 },
    /// Uniform over a discrete value set (codec bitrates).
    Discrete(Vec<f64>),
}

/// A transform plus its control-parameter distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionSpec {
    pub kind: InterventionKind,
    pub control_dist: ControlDist,
    /// Command template for [`InterventionKind::ExternalCodec`], with
    /// `{in}`, `{out}` and `{z}` placeholders.
    pub codec_cmd: Option<String>,
}

/// Default control ranges: noise SNR in dB, loudness target in LUFS, codec
/// parameter in kbps.
pub const NOISE_SNR_RANGE_DB: (f64, f64) = (0.0, 30.0);
pub const LOUDNESS_TARGET_RANGE_LUFS: (f64, f64) = (-31.0, -13.0);
pub const CODEC_BITRATES_KBPS: [f64; 5] = [16.0, 32.0, 64.0, 128.0, 256.0];

impl InterventionSpec {
    /// Spec with the default control distribution for `kind`.
    pub fn with_defaults(kind: InterventionKind) -> Self {
        let control_dist = match kind {
            InterventionKind::WhiteNoise => ControlDist::Uniform {
                lo: NOISE_SNR_RANGE_DB.0,
                hi: NOISE_SNR_RANGE_DB.1,
            },
            InterventionKind::LoudnessNorm => ControlDist::Uniform {
                lo: LOUDNESS_TARGET_RANGE_LUFS.0,
                hi: LOUDNESS_TARGET_RANGE_LUFS.1,
            },
            InterventionKind::ExternalCodec => ControlDist::Discrete(CODEC_BITRATES_KBPS.to_vec()),
            InterventionKind::MuLaw | InterventionKind::NonspeechZeroing => ControlDist::None,
        };
        InterventionSpec {
            kind,
            control_dist,
            codec_cmd: None,
        }
    }

    pub fn validate(&self) -> Result<(), InterveneError> {
        match (&self.control_dist, self.kind) {
            (ControlDist::Uniform { lo, hi }, _) if lo > hi => {
                Err(InterveneError::BadInterval { lo: *lo, hi: *hi })
            }
            (ControlDist::None, InterventionKind::WhiteNoise | InterventionKind::LoudnessNorm) => {
                Err(InterveneError::MissingControl {
                    kind: self.kind.name(),
                })
            }
            (
                ControlDist::Uniform { .. } | ControlDist::Discrete(_),
                InterventionKind::MuLaw | InterventionKind::NonspeechZeroing,
            ) => Err(InterveneError::UnexpectedControl {
                kind: self.kind.name(),
            }),
            (_, InterventionKind::ExternalCodec) if self.codec_cmd.is_none() => {
                Err(InterveneError::MissingCodecCommand)
            }
            _ => Ok(()),
        }
    }

    fn has_control(&self) -> bool {
        !matches!(self.control_dist, ControlDist::None)
    }
}

/// Intervention probabilities for the four subsets, in the order
/// (train_neg, train_pos, test_neg, test_pos).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigQuadruple {
    pub rho: [f64; 4],
    pub name: String,
}

/// The ten named corner configurations and their indicator quadruples.
pub const NAMED_CONFIGS: [(&str, [f64; 4]); 10] = [
    ("O", [0.0, 0.0, 0.0, 0.0]),
    ("I", [1.0, 1.0, 1.0, 1.0]),
    ("M_tr", [1.0, 1.0, 0.0, 0.0]),
    ("M_te", [0.0, 0.0, 1.0, 1.0]),
    ("IT_p", [0.0, 1.0, 0.0, 1.0]),
    ("IT_n", [1.0, 0.0, 1.0, 0.0]),
    ("IV_pn", [0.0, 1.0, 1.0, 0.0]),
    ("IV_np", [1.0, 0.0, 0.0, 1.0]),
    ("O_n", [0.0, 0.0, 1.0, 0.0]),
    ("O_p", [0.0, 0.0, 0.0, 1.0]),
];

/// Look up a named corner configuration.
pub fn config_from_name(name: &str) -> Result<ConfigQuadruple, InterveneError> {
    NAMED_CONFIGS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, rho)| ConfigQuadruple {
            rho: *rho,
            name: (*n).to_string(),
        })
        .ok_or_else(|| InterveneError::UnknownConfig(name.to_string()))
}

impl ConfigQuadruple {
    /// A (possibly partial) configuration from raw probabilities. Matches
    /// the corner name when the quadruple is one of the named patterns.
    pub fn from_rho(rho: [f64; 4]) -> Result<Self, InterveneError> {
        for p in rho {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(InterveneError::BadProbability(p));
            }
        }
        let name = NAMED_CONFIGS
            .iter()
            .find(|(_, pattern)| *pattern == rho)
            .map(|(n, _)| (*n).to_string())
            .unwrap_or_else(|| "partial".to_string());
        Ok(ConfigQuadruple { rho, name })
    }

    pub fn rho_for(&self, subset: Subset) -> f64 {
        match subset {
            Subset::TrainNeg => self.rho[0],
            Subset::TrainPos => self.rho[1],
            Subset::EvalNeg => self.rho[2],
            Subset::EvalPos => self.rho[3],
        }
    }

    pub fn rho_train_neg(&self) -> f64 {
        self.rho[0]
    }

    pub fn rho_train_pos(&self) -> f64 {
        self.rho[1]
    }
}

/// Per-item outcome of the assignment draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub intervene: bool,
    pub z: Option<f64>,
}

/// A fully realized intervention plan: which items get the transform and
/// with what control value. Reproducible from (manifest ids, spec, config,
/// master_seed) alone.
#[derive(Debug, Clone)]
pub struct InterventionPlan {
    pub spec: InterventionSpec,
    pub config: ConfigQuadruple,
    pub master_seed: u64,
    pub decisions: BTreeMap<String, Decision>,
}

fn draw_z(spec: &InterventionSpec, master_seed: u64, id: &str) -> Option<f64> {
    match &spec.control_dist {
        ControlDist::None => None,
        ControlDist::Uniform { lo, hi } => {
            let mut rng = seeding::substream_rng(master_seed, "z", id);
            Some(if lo == hi { *lo } else { rng.gen_range(*lo..*hi) })
        }
        ControlDist::Discrete(values) => {
            let mut rng = seeding::substream_rng(master_seed, "z", id);
            Some(values[rng.gen_range(0..values.len())])
        }
    }
}

/// Draw the per-subset treatment assignment.
///
/// Within each subset the item ids are sorted, shuffled by a subset-keyed
/// stream, and the first `floor(rho * M)` selected. Control values come from
/// per-item substreams, so the result is independent of iteration order and
/// stable under partial re-runs.
pub fn assign(
    manifest: &DatasetManifest,
    spec: &InterventionSpec,
    config: &ConfigQuadruple,
    master_seed: u64,
) -> Result<InterventionPlan, InterveneError> {
    spec.validate()?;
    let part = manifest.partition();
    let mut decisions = BTreeMap::new();
    for subset in Subset::ALL {
        let mut ids: Vec<&str> = part.subset(subset).iter().map(|i| i.id.as_str()).collect();
        ids.sort_unstable();
        let mut rng = seeding::substream_rng(master_seed, "subset-shuffle", subset.name());
        ids.shuffle(&mut rng);
        let m = ids.len();
        let n_intervene = (config.rho_for(subset) * m as f64).floor() as usize;
        for (rank, id) in ids.into_iter().enumerate() {
            let intervene = rank < n_intervene;
            let z = if intervene && spec.has_control() {
                draw_z(spec, master_seed, id)
            } else {
                None
            };
            decisions.insert(id.to_string(), Decision { intervene, z });
        }
    }
    Ok(InterventionPlan {
        spec: spec.clone(),
        config: config.clone(),
        master_seed,
        decisions,
    })
}

/// Treatment-difference features of one test trial: absolute differences
/// between the trial's realized intervention indicator and each training
/// class's intervention probability. Zero means the trial was treated like
/// that training class; one means maximally differently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaFeatures {
    /// |rho_test(i) - rho_train_pos|
    pub delta_pos: f64,
    /// |rho_test(i) - rho_train_neg|
    pub delta_neg: f64,
}

/// Compute the treatment-difference pair for a test item whose realized
/// intervention indicator is `test_indicator` (0 or 1 for realized draws).
pub fn delta_features(test_indicator: f64, config: &ConfigQuadruple) -> DeltaFeatures {
    DeltaFeatures {
        delta_pos: (test_indicator - config.rho_train_pos()).abs(),
        delta_neg: (test_indicator - config.rho_train_neg()).abs(),
    }
}

/// Training-side corners available to a partial-bias grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainCorner {
    /// Original training data for both classes.
    Original,
    /// Intervene the positive training class only.
    PositiveOnly,
    /// Intervene the negative training class only.
    NegativeOnly,
}

impl TrainCorner {
    pub fn rho_train(self) -> (f64, f64) {
        match self {
            TrainCorner::Original => (0.0, 0.0),
            TrainCorner::PositiveOnly => (0.0, 1.0),
            TrainCorner::NegativeOnly => (1.0, 0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrainCorner::Original => "original",
            TrainCorner::PositiveOnly => "positive_only",
            TrainCorner::NegativeOnly => "negative_only",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "original" | "O" => Some(TrainCorner::Original),
            "positive_only" | "bonafide" | "bonafide_only" => Some(TrainCorner::PositiveOnly),
            "negative_only" | "spoof" | "spoof_only" => Some(TrainCorner::NegativeOnly),
            _ => None,
        }
    }
}

/// One plan per test-side grid point, sharing the training-side decisions of
/// the chosen corner (train once, score many). Grid points are
/// (rho_test_neg, rho_test_pos) pairs.
pub fn grid_plans(
    manifest: &DatasetManifest,
    spec: &InterventionSpec,
    train_corner: TrainCorner,
    test_grid: &[(f64, f64)],
    master_seed: u64,
) -> Result<Vec<InterventionPlan>, InterveneError> {
    let (tr_neg, tr_pos) = train_corner.rho_train();
    test_grid
        .iter()
        .map(|&(te_neg, te_pos)| {
            let config = ConfigQuadruple::from_rho([tr_neg, tr_pos, te_neg, te_pos])?;
            assign(manifest, spec, &config, master_seed)
        })
        .collect()
}

/// How the transformed dataset is materialized.
#[derive(Debug, Clone)]
pub struct ApplyOptions {
    /// Codec subprocess timeout in seconds.
    pub codec_timeout_s: u64,
}

impl Default for ApplyOptions {
    fn default() -> Self {
        ApplyOptions { codec_timeout_s: 60 }
    }
}

/// Result of materializing a plan.
#[derive(Debug)]
pub struct ApplyOutcome {
    pub manifest: DatasetManifest,
    pub receipt: PlanReceipt,
    /// Total samples hard-clipped while writing transformed audio.
    pub clipped_samples: usize,
}

fn transform_item(
    item: &AudioItem,
    x: &Waveform,
    plan: &InterventionPlan,
    z: Option<f64>,
    opts: &ApplyOptions,
) -> Result<Waveform, InterveneError> {
    let audio_err = |source| InterveneError::Audio {
        id: item.id.clone(),
        source,
    };
    match plan.spec.kind {
        InterventionKind::WhiteNoise => {
            let snr_db = z.expect("white noise draws a control value");
            let noise_seed = seeding::substream_seed(plan.master_seed, "noise", &item.id);
            add_white_noise(x, snr_db, noise_seed).map_err(audio_err)
        }
        InterventionKind::MuLaw => Ok(mu_law_roundtrip(x)),
        InterventionKind::LoudnessNorm => {
            let target = z.expect("loudness normalization draws a control value");
            loudness_normalize(x, target).map_err(audio_err)
        }
        InterventionKind::NonspeechZeroing => Ok(zero_nonspeech(x)),
        InterventionKind::ExternalCodec => {
            let cmd = plan.spec.codec_cmd.as_deref().expect("validated");
            external_codec(x, cmd, z.expect("codec draws a control value"), opts.codec_timeout_s)
                .map_err(|message| InterveneError::Codec {
                    id: item.id.clone(),
                    message,
                })
        }
    }
}

/// Materialize a plan: write every item (transformed or byte-copied) under
/// `out_dir` and emit the new manifest plus the plan receipt.
///
/// The output dataset has the same size and labels as the input; only the
/// class-conditional data distributions change.
pub fn apply_plan(
    manifest: &DatasetManifest,
    plan: &InterventionPlan,
    out_dir: &Path,
    opts: &ApplyOptions,
) -> Result<ApplyOutcome, InterveneError> {
    for item in manifest.items() {
        if !plan.decisions.contains_key(&item.id) {
            return Err(InterveneError::UncoveredItem(item.id.clone()));
        }
    }
    let audio_dir = out_dir.join("audio");
    fs::create_dir_all(&audio_dir).map_err(|source| InterveneError::Io {
        path: audio_dir.clone(),
        source,
    })?;

    struct ItemOutcome {
        item: AudioItem,
        clipped: usize,
    }

    let results: Vec<Result<ItemOutcome, InterveneError>> = manifest
        .items()
        .par_iter()
        .map(|item| {
            let decision = plan.decisions[&item.id];
            let out_path = audio_dir.join(format!("{}.wav", item.id));
            let clipped = if decision.intervene {
                let x = audio::read_pcm(&item.path).map_err(|source| InterveneError::Audio {
                    id: item.id.clone(),
                    source,
                })?;
                let y = transform_item(item, &x, plan, decision.z, opts)?;
                audio::write_pcm(&y, &out_path).map_err(|source| InterveneError::Audio {
                    id: item.id.clone(),
                    source,
                })?
            } else {
                fs::copy(&item.path, &out_path).map_err(|source| InterveneError::Io {
                    path: out_path.clone(),
                    source,
                })?;
                0
            };
            let mut new_item = item.clone();
            new_item.path = out_path;
            Ok(ItemOutcome {
                item: new_item,
                clipped,
            })
        })
        .collect();

    let mut items = Vec::with_capacity(results.len());
    let mut clipped_samples = 0usize;
    for r in results {
        let outcome = r?;
        clipped_samples += outcome.clipped;
        items.push(outcome.item);
    }
    let out_manifest = DatasetManifest::new(
        format!("{}-{}", manifest.name, plan.config.name),
        manifest.sample_rate_hz,
        items,
    )?;
    out_manifest.save(&out_dir.join("manifest.csv"))?;

    let receipt = PlanReceipt::from_plan(manifest, plan);
    let receipt_path = out_dir.join("receipt.csv");
    fs::write(&receipt_path, receipt.to_text()).map_err(|source| InterveneError::Io {
        path: receipt_path,
        source,
    })?;
    if clipped_samples > 0 {
        log::warn!(
            "{}: {clipped_samples} samples clipped while writing intervened audio",
            out_dir.display()
        );
    }
    Ok(ApplyOutcome {
        manifest: out_manifest,
        receipt,
        clipped_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::AudioItem;

    fn manifest_with(counts: [usize; 4]) -> DatasetManifest {
        let mut items = Vec::new();
        let specs = [
            (0u8, 0u8, "tn"),
            (1, 0, "tp"),
            (0, 1, "en"),
            (1, 1, "ep"),
        ];
        for (slot, &(c, s, tag)) in specs.iter().enumerate() {
            for i in 0..counts[slot] {
                items.push(AudioItem::new(format!("{tag}{i:03}"), format!("{tag}{i:03}.wav"), c, s));
            }
        }
        DatasetManifest::new("t", 16_000, items).unwrap()
    }

    fn noise_spec() -> InterventionSpec {
        InterventionSpec::with_defaults(InterventionKind::WhiteNoise)
    }

    #[test]
    fn named_configs_match_their_indicator_patterns() {
        assert_eq!(config_from_name("IT_p").unwrap().rho, [0.0, 1.0, 0.0, 1.0]);
        assert_eq!(config_from_name("O").unwrap().rho, [0.0, 0.0, 0.0, 0.0]);
        assert_eq!(config_from_name("IV_np").unwrap().rho, [1.0, 0.0, 0.0, 1.0]);
        assert_eq!(config_from_name("M_te").unwrap().rho, [0.0, 0.0, 1.0, 1.0]);
        assert!(matches!(
            config_from_name("bogus"),
            Err(InterveneError::UnknownConfig(_))
        ));
    }

    #[test]
    fn full_probability_intervenes_every_item() {
        let m = manifest_with([10, 10, 10, 10]);
        let plan = assign(&m, &noise_spec(), &config_from_name("I").unwrap(), 5).unwrap();
        assert!(plan.decisions.values().all(|d| d.intervene && d.z.is_some()));
    }

    #[test]
    fn half_probability_on_seven_items_selects_three() {
        let m = manifest_with([7, 0, 0, 0]);
        let config = ConfigQuadruple::from_rho([0.5, 0.0, 0.0, 0.0]).unwrap();
        let plan = assign(&m, &noise_spec(), &config, 5).unwrap();
        let n = plan.decisions.values().filter(|d| d.intervene).count();
        assert_eq!(n, 3);
    }

    #[test]
    fn assignment_is_order_independent() {
        let m = manifest_with([5, 5, 5, 5]);
        let mut rev_items = m.items().to_vec();
        rev_items.reverse();
        let m_rev = DatasetManifest::new("t", 16_000, rev_items).unwrap();
        let cfg = ConfigQuadruple::from_rho([0.4, 0.6, 0.2, 0.8]).unwrap();
        let a = assign(&m, &noise_spec(), &cfg, 99).unwrap();
        let b = assign(&m_rev, &noise_spec(), &cfg, 99).unwrap();
        assert_eq!(a.decisions, b.decisions);
    }

    #[test]
    fn floor_counts_hold_over_random_draws() {
        let mut rng = crate::seeding::rng_from_seed(123);
        for _ in 0..50 {
            let m_size = rng.gen_range(1..40);
            let rho = rng.gen_range(0.0..=1.0);
            let m = manifest_with([m_size, 0, 0, 0]);
            let config = ConfigQuadruple::from_rho([rho, 0.0, 0.0, 0.0]).unwrap();
            let plan = assign(&m, &noise_spec(), &config, 7).unwrap();
            let n = plan.decisions.values().filter(|d| d.intervene).count();
            assert_eq!(n, (rho * m_size as f64).floor() as usize);
        }
    }

    #[test]
    fn z_is_present_exactly_for_intervened_items_with_control() {
        let m = manifest_with([4, 4, 4, 4]);
        let plan = assign(&m, &noise_spec(), &config_from_name("IT_p").unwrap(), 3).unwrap();
        for (id, d) in &plan.decisions {
            assert_eq!(d.z.is_some(), d.intervene, "{id}");
            if let Some(z) = d.z {
                assert!((0.0..=30.0).contains(&z));
            }
        }
        let mu = InterventionSpec::with_defaults(InterventionKind::MuLaw);
        let plan = assign(&m, &mu, &config_from_name("I").unwrap(), 3).unwrap();
        assert!(plan.decisions.values().all(|d| d.intervene && d.z.is_none()));
    }

    #[test]
    fn delta_features_worked_patterns() {
        let it_p = config_from_name("IT_p").unwrap();
        // Intervened positive test trial vs. untouched negative test trial.
        assert_eq!(
            delta_features(1.0, &it_p),
            DeltaFeatures {
                delta_pos: 0.0,
                delta_neg: 1.0
            }
        );
        assert_eq!(
            delta_features(0.0, &it_p),
            DeltaFeatures {
                delta_pos: 1.0,
                delta_neg: 0.0
            }
        );
        let o = config_from_name("O").unwrap();
        assert_eq!(
            delta_features(0.0, &o),
            DeltaFeatures {
                delta_pos: 0.0,
                delta_neg: 0.0
            }
        );
    }

    #[test]
    fn delta_features_patterns_for_all_corners() {
        // Realized indicators at corners equal the test-side probabilities.
        for (name, rho) in NAMED_CONFIGS {
            let cfg = config_from_name(name).unwrap();
            for (class, test_rho) in [(0usize, rho[2]), (1, rho[3])] {
                let d = delta_features(test_rho, &cfg);
                match name {
                    "O" | "I" | "M_tr" | "M_te" => {
                        assert_eq!(d.delta_pos, d.delta_neg, "{name}/{class}")
                    }
                    "IT_p" | "IT_n" => {
                        let expect = if class == 1 { (0.0, 1.0) } else { (1.0, 0.0) };
                        assert_eq!((d.delta_pos, d.delta_neg), expect, "{name}");
                    }
                    "IV_pn" | "IV_np" => {
                        let expect = if class == 1 { (1.0, 0.0) } else { (0.0, 1.0) };
                        assert_eq!((d.delta_pos, d.delta_neg), expect, "{name}");
                    }
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn grid_covers_all_points_and_matches_corners() {
        let m = manifest_with([6, 6, 6, 6]);
        let axis = [0.0, 0.25, 0.5, 0.75, 1.0];
        let mut grid = Vec::new();
        for &a in &axis {
            for &b in &axis {
                grid.push((a, b));
            }
        }
        let plans = grid_plans(&m, &noise_spec(), TrainCorner::Original, &grid, 11).unwrap();
        assert_eq!(plans.len(), 25);

        let o_plan = assign(&m, &noise_spec(), &config_from_name("O").unwrap(), 11).unwrap();
        assert_eq!(plans[0].decisions, o_plan.decisions);
        assert_eq!(plans[0].config.name, "O");

        let m_te = assign(&m, &noise_spec(), &config_from_name("M_te").unwrap(), 11).unwrap();
        assert_eq!(plans[24].decisions, m_te.decisions);
        assert_eq!(plans[24].config.name, "M_te");
    }

    #[test]
    fn grid_shares_training_side_decisions() {
        let m = manifest_with([6, 6, 6, 6]);
        let grid = [(0.0, 0.0), (0.5, 0.5), (1.0, 0.25)];
        let plans =
            grid_plans(&m, &noise_spec(), TrainCorner::PositiveOnly, &grid, 4).unwrap();
        let train_ids: Vec<&str> = m
            .items()
            .iter()
            .filter(|i| i.split == 0)
            .map(|i| i.id.as_str())
            .collect();
        for id in train_ids {
            let first = plans[0].decisions[id];
            for p in &plans[1..] {
                assert_eq!(p.decisions[id], first, "{id}");
            }
        }
    }

    #[test]
    fn invalid_probability_is_rejected() {
        assert!(matches!(
            ConfigQuadruple::from_rho([0.0, 1.2, 0.0, 0.0]),
            Err(InterveneError::BadProbability(_))
        ));
    }
}
