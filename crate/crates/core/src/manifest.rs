//! Experiment manifests: loading, validation, partitioning, prior
//! bookkeeping, and speaker-verification trial construction.
//!
//! A manifest is UTF-8 delimited text with the header
//! `id,path,class,split,speaker,attack,gender,country,session`. The `class`
//! bit is 0 for the negative class (spoof / nontarget side) and 1 for the
//! positive class (bonafide); the `split` bit is 0 for training and 1 for
//! evaluation. Optional metadata fields may be left empty.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::seeding;

pub const MANIFEST_HEADER: &str = "id,path,class,split,speaker,attack,gender,country,session";
pub const TRIAL_HEADER: &str = "enroll_id,test_id,is_target,R,G,C";

/// Default sample rate for all audio in an experiment.
pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 16_000;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate item id {0:?}")]
    DuplicateId(String),
    #[error("item {id:?}: audio file missing: {path}")]
    MissingFile { id: String, path: PathBuf },
    #[error("item id {0:?} contains characters outside [A-Za-z0-9._-]")]
    BadId(String),
    #[error("empty {0} split: priors are undefined")]
    EmptySplit(&'static str),
    #[error("no {class} pair satisfies flags (R={r}, G={g}, C={c})")]
    InfeasibleFlags {
        class: &'static str,
        r: u8,
        g: u8,
        c: u8,
    },
    #[error("item {0:?} lacks {1} metadata required for trial building")]
    MissingMetadata(String, &'static str),
    #[error("speaker {0:?} has inconsistent gender/country metadata across items")]
    InconsistentSpeaker(String),
}

/// One audio item with its 2-bit (class, split) label and optional metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioItem {
    pub id: String,
    pub path: PathBuf,
    /// 0 = negative (spoof / nontarget side), 1 = positive (bonafide).
    pub class_label: u8,
    /// 0 = train, 1 = eval.
    pub split: u8,
    pub speaker_id: Option<String>,
    pub attack_id: Option<String>,
    pub gender: Option<String>,
    pub country: Option<String>,
    pub session_id: Option<String>,
}

impl AudioItem {
    pub fn new(id: impl Into<String>, path: impl Into<PathBuf>, class_label: u8, split: u8) -> Self {
        AudioItem {
            id: id.into(),
            path: path.into(),
            class_label,
            split,
            speaker_id: None,
            attack_id: None,
            gender: None,
            country: None,
            session_id: None,
        }
    }

    /// Subset this item belongs to, by its (class, split) bits.
    pub fn subset(&self) -> Subset {
        Subset::from_bits(self.class_label, self.split)
    }
}

/// The four disjoint (class, split) subsets of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subset {
    TrainNeg,
    TrainPos,
    EvalNeg,
    EvalPos,
}

impl Subset {
    pub const ALL: [Subset; 4] = [
        Subset::TrainNeg,
        Subset::TrainPos,
        Subset::EvalNeg,
        Subset::EvalPos,
    ];

    pub fn from_bits(class: u8, split: u8) -> Self {
        match (class, split) {
            (0, 0) => Subset::TrainNeg,
            (1, 0) => Subset::TrainPos,
            (0, 1) => Subset::EvalNeg,
            _ => Subset::EvalPos,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Subset::TrainNeg => "train_neg",
            Subset::TrainPos => "train_pos",
            Subset::EvalNeg => "eval_neg",
            Subset::EvalPos => "eval_pos",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "train_neg" => Some(Subset::TrainNeg),
            "train_pos" => Some(Subset::TrainPos),
            "eval_neg" => Some(Subset::EvalNeg),
            "eval_pos" => Some(Subset::EvalPos),
            _ => None,
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A validated collection of audio items.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub name: String,
    pub sample_rate_hz: u32,
    items: Vec<AudioItem>,
}

/// Items split into the four (class, split) subsets. Every manifest item
/// appears in exactly one slot.
#[derive(Debug, Clone)]
pub struct Partition<'a> {
    pub train_neg: Vec<&'a AudioItem>,
    pub train_pos: Vec<&'a AudioItem>,
    pub eval_neg: Vec<&'a AudioItem>,
    pub eval_pos: Vec<&'a AudioItem>,
}

impl<'a> Partition<'a> {
    pub fn counts(&self) -> [usize; 4] {
        [
            self.train_neg.len(),
            self.train_pos.len(),
            self.eval_neg.len(),
            self.eval_pos.len(),
        ]
    }

    pub fn subset(&self, s: Subset) -> &[&'a AudioItem] {
        match s {
            Subset::TrainNeg => &self.train_neg,
            Subset::TrainPos => &self.train_pos,
            Subset::EvalNeg => &self.eval_neg,
            Subset::EvalPos => &self.eval_pos,
        }
    }
}

/// Class-prior bookkeeping over the train/eval splits.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorReport {
    /// Positive-class prior in the training split.
    pub pi_1_given_0: f64,
    /// Positive-class prior in the evaluation split.
    pub pi_1_given_1: f64,
    pub prior_matched: bool,
    pub class_balanced_train: bool,
    pub class_balanced_eval: bool,
    /// Counts in subset order (train_neg, train_pos, eval_neg, eval_pos).
    pub subset_counts: [usize; 4],
}

/// One speaker-verification trial with its condition flags.
///
/// `same_recording` is 1 when both sides share a session id, `same_gender`
/// and `same_country` compare the respective metadata fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsvTrial {
    pub enroll_id: String,
    pub test_id: String,
    pub is_target: bool,
    pub same_recording: u8,
    pub same_gender: u8,
    pub same_country: u8,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'.' || b == b'_' || b == b'-')
}

impl DatasetManifest {
    /// Build a manifest from items, validating id uniqueness and label bits.
    /// File existence is only checked by [`load_manifest`].
    pub fn new(
        name: impl Into<String>,
        sample_rate_hz: u32,
        items: Vec<AudioItem>,
    ) -> Result<Self, ManifestError> {
        let mut seen = BTreeSet::new();
        for item in &items {
            if !valid_id(&item.id) {
                return Err(ManifestError::BadId(item.id.clone()));
            }
            if !seen.insert(item.id.clone()) {
                return Err(ManifestError::DuplicateId(item.id.clone()));
            }
        }
        Ok(DatasetManifest {
            name: name.into(),
            sample_rate_hz,
            items,
        })
    }

    pub fn items(&self) -> &[AudioItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&AudioItem> {
        self.items.iter().find(|i| i.id == id)
    }

    /// Split items into the four (class, split) subsets.
    pub fn partition(&self) -> Partition<'_> {
        let mut p = Partition {
            train_neg: Vec::new(),
            train_pos: Vec::new(),
            eval_neg: Vec::new(),
            eval_pos: Vec::new(),
        };
        for item in &self.items {
            match item.subset() {
                Subset::TrainNeg => p.train_neg.push(item),
                Subset::TrainPos => p.train_pos.push(item),
                Subset::EvalNeg => p.eval_neg.push(item),
                Subset::EvalPos => p.eval_pos.push(item),
            }
        }
        p
    }

    /// Compute split priors and balance flags. Errors when a split is empty.
    pub fn prior_report(&self) -> Result<PriorReport, ManifestError> {
        let [n00, n10, n01, n11] = self.partition().counts();
        let n_train = n00 + n10;
        let n_eval = n01 + n11;
        if n_train == 0 {
            return Err(ManifestError::EmptySplit("train"));
        }
        if n_eval == 0 {
            return Err(ManifestError::EmptySplit("eval"));
        }
        let pi_train = n10 as f64 / n_train as f64;
        let pi_eval = n11 as f64 / n_eval as f64;
        Ok(PriorReport {
            pi_1_given_0: pi_train,
            pi_1_given_1: pi_eval,
            prior_matched: (pi_train - pi_eval).abs() <= 1e-12,
            class_balanced_train: (pi_train - 0.5).abs() <= 1e-12,
            class_balanced_eval: (pi_eval - 0.5).abs() <= 1e-12,
            subset_counts: [n00, n10, n01, n11],
        })
    }

    /// Serialize to the delimited manifest format (with trailing newline).
    pub fn to_text(&self) -> String {
        self.to_text_relative_to(None)
    }

    fn to_text_relative_to(&self, base: Option<&Path>) -> String {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for item in &self.items {
            let opt = |v: &Option<String>| v.clone().unwrap_or_default();
            let path = match base.and_then(|b| item.path.strip_prefix(b).ok()) {
                Some(stripped) => stripped.to_path_buf(),
                None => item.path.clone(),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                item.id,
                path.display(),
                item.class_label,
                item.split,
                opt(&item.speaker_id),
                opt(&item.attack_id),
                opt(&item.gender),
                opt(&item.country),
                opt(&item.session_id),
            ));
        }
        out
    }

    /// Write the manifest; audio paths under the manifest's directory are
    /// stored relative to it, so the dataset directory is relocatable.
    pub fn save(&self, path: &Path) -> Result<(), ManifestError> {
        let base = path.parent().filter(|p| !p.as_os_str().is_empty());
        let mut f = fs::File::create(path).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        f.write_all(self.to_text_relative_to(base).as_bytes())
            .map_err(|source| ManifestError::Io {
                path: path.to_path_buf(),
                source,
            })
    }
}

/// Parse manifest text. `origin` is used in error messages only.
pub fn parse_manifest(
    text: &str,
    origin: &Path,
    name: &str,
) -> Result<DatasetManifest, ManifestError> {
    let parse_err = |line: usize, message: String| ManifestError::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    if header.trim() != MANIFEST_HEADER {
        return Err(parse_err(
            1,
            format!("expected header {MANIFEST_HEADER:?}, found {header:?}"),
        ));
    }
    let mut items = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(parse_err(
                lineno,
                format!("expected 9 fields, found {}", fields.len()),
            ));
        }
        let bit = |s: &str, what: &str| -> Result<u8, ManifestError> {
            match s {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(parse_err(lineno, format!("{what} must be 0 or 1, got {other:?}"))),
            }
        };
        let opt = |s: &str| {
            if s.is_empty() {
                None
            } else {
                Some(s.to_string())
            }
        };
        items.push(AudioItem {
            id: fields[0].to_string(),
            path: PathBuf::from(fields[1]),
            class_label: bit(fields[2], "class")?,
            split: bit(fields[3], "split")?,
            speaker_id: opt(fields[4]),
            attack_id: opt(fields[5]),
            gender: opt(fields[6]),
            country: opt(fields[7]),
            session_id: opt(fields[8]),
        });
    }
    DatasetManifest::new(name, DEFAULT_SAMPLE_RATE_HZ, items)
}

/// Load a manifest from disk, rejecting duplicate ids and missing audio files.
///
/// Relative audio paths are resolved against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, ManifestError> {
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "manifest".to_string());
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut manifest = parse_manifest(&text, path, &name)?;
    for item in &mut manifest.items {
        if item.path.is_relative() {
            item.path = base.join(&item.path);
        }
        if !item.path.is_file() {
            return Err(ManifestError::MissingFile {
                id: item.id.clone(),
                path: item.path.clone(),
            });
        }
    }
    Ok(manifest)
}

/// Requested (recording, gender, country) agreement bits for one trial class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialFlags {
    pub same_recording: u8,
    pub same_gender: u8,
    pub same_country: u8,
}

impl TrialFlags {
    pub fn new(r: u8, g: u8, c: u8) -> Self {
        TrialFlags {
            same_recording: r,
            same_gender: g,
            same_country: c,
        }
    }
}

struct TrialMeta<'a> {
    id: &'a str,
    speaker: &'a str,
    session: &'a str,
    gender: &'a str,
    country: &'a str,
}

fn trial_meta<'a>(item: &'a AudioItem) -> Result<TrialMeta<'a>, ManifestError> {
    let need = |field: &'a Option<String>, what: &'static str| {
        field
            .as_deref()
            .ok_or_else(|| ManifestError::MissingMetadata(item.id.clone(), what))
    };
    Ok(TrialMeta {
        id: &item.id,
        speaker: need(&item.speaker_id, "speaker")?,
        session: need(&item.session_id, "session")?,
        gender: need(&item.gender, "gender")?,
        country: need(&item.country, "country")?,
    })
}

fn pair_flags(a: &TrialMeta, b: &TrialMeta) -> TrialFlags {
    TrialFlags {
        same_recording: (a.session == b.session) as u8,
        same_gender: (a.gender == b.gender) as u8,
        same_country: (a.country == b.country) as u8,
    }
}

/// Build target and nontarget trials whose metadata agreement matches the
/// requested flags.
///
/// Target trials pair same-speaker items; nontarget trials pair items from
/// different speakers. Qualifying pairs are enumerated over unordered item
/// pairs (the lexicographically smaller id becomes the enrollment side),
/// sampled without replacement by a seeded shuffle when `max_trials` caps a
/// class, and emitted in sorted order.
pub fn build_asv_trials(
    manifest: &DatasetManifest,
    target_flags: TrialFlags,
    nontarget_flags: TrialFlags,
    max_trials: Option<usize>,
    seed: u64,
) -> Result<Vec<AsvTrial>, ManifestError> {
    let metas: Vec<TrialMeta> = manifest
        .items()
        .iter()
        .map(trial_meta)
        .collect::<Result<_, _>>()?;

    // Target trials share demographics by construction; inconsistent gender or
    // country within a speaker is a data error, not a trial condition.
    let mut speaker_demo: BTreeMap<&str, (&str, &str)> = BTreeMap::new();
    for m in &metas {
        match speaker_demo.get(m.speaker) {
            None => {
                speaker_demo.insert(m.speaker, (m.gender, m.country));
            }
            Some(&(g, c)) => {
                if g != m.gender || c != m.country {
                    return Err(ManifestError::InconsistentSpeaker(m.speaker.to_string()));
                }
            }
        }
    }
    if target_flags.same_gender != 1 || target_flags.same_country != 1 {
        return Err(ManifestError::InfeasibleFlags {
            class: "target",
            r: target_flags.same_recording,
            g: target_flags.same_gender,
            c: target_flags.same_country,
        });
    }

    let mut targets = Vec::new();
    let mut nontargets = Vec::new();
    for i in 0..metas.len() {
        for j in (i + 1)..metas.len() {
            let (a, b) = if metas[i].id <= metas[j].id {
                (&metas[i], &metas[j])
            } else {
                (&metas[j], &metas[i])
            };
            let flags = pair_flags(a, b);
            let same_speaker = a.speaker == b.speaker;
            let want = if same_speaker {
                target_flags
            } else {
                nontarget_flags
            };
            if flags == want {
                let trial = AsvTrial {
                    enroll_id: a.id.to_string(),
                    test_id: b.id.to_string(),
                    is_target: same_speaker,
                    same_recording: flags.same_recording,
                    same_gender: flags.same_gender,
                    same_country: flags.same_country,
                };
                if same_speaker {
                    targets.push(trial);
                } else {
                    nontargets.push(trial);
                }
            }
        }
    }
    if targets.is_empty() {
        return Err(ManifestError::InfeasibleFlags {
            class: "target",
            r: target_flags.same_recording,
            g: target_flags.same_gender,
            c: target_flags.same_country,
        });
    }
    if nontargets.is_empty() {
        return Err(ManifestError::InfeasibleFlags {
            class: "nontarget",
            r: nontarget_flags.same_recording,
            g: nontarget_flags.same_gender,
            c: nontarget_flags.same_country,
        });
    }

    let sort_key = |t: &AsvTrial| (t.enroll_id.clone(), t.test_id.clone());
    for (class, trials) in [("target", &mut targets), ("nontarget", &mut nontargets)] {
        trials.sort_by_key(sort_key);
        if let Some(cap) = max_trials {
            if trials.len() > cap {
                let mut rng = seeding::substream_rng(seed, "asv-trials", class);
                trials.shuffle(&mut rng);
                trials.truncate(cap);
                trials.sort_by_key(sort_key);
            }
        }
    }
    targets.extend(nontargets);
    Ok(targets)
}

/// Serialize trials as `enroll_id,test_id,is_target,R,G,C` rows.
pub fn trials_to_text(trials: &[AsvTrial]) -> String {
    let mut out = String::from(TRIAL_HEADER);
    out.push('\n');
    for t in trials {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.enroll_id,
            t.test_id,
            t.is_target as u8,
            t.same_recording,
            t.same_gender,
            t.same_country
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(id: &str, class: u8, split: u8) -> AudioItem {
        AudioItem::new(id, format!("{id}.wav"), class, split)
    }

    fn minimal() -> DatasetManifest {
        DatasetManifest::new(
            "t",
            16_000,
            vec![
                item("a00", 0, 0),
                item("a10", 1, 0),
                item("a01", 0, 1),
                item("a11", 1, 1),
            ],
        )
        .unwrap()
    }

    #[test]
    fn minimal_manifest_has_one_item_per_subset() {
        let m = minimal();
        assert_eq!(m.partition().counts(), [1, 1, 1, 1]);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = DatasetManifest::new("t", 16_000, vec![item("a01", 0, 0), item("a01", 1, 0)])
            .unwrap_err();
        match err {
            ManifestError::DuplicateId(id) => assert_eq!(id, "a01"),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn parse_round_trip_and_line_numbers() {
        let m = minimal();
        let text = m.to_text();
        assert!(text.ends_with('\n'));
        let parsed = parse_manifest(&text, Path::new("mem"), "t").unwrap();
        assert_eq!(parsed.items(), m.items());

        let bad = format!("{MANIFEST_HEADER}\nx,p.wav,2,0,,,,,\n");
        let err = parse_manifest(&bad, Path::new("mem"), "t").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mem:2"), "got: {msg}");
    }

    #[test]
    fn partition_follows_label_bits() {
        let m = minimal();
        let p = m.partition();
        assert_eq!(p.train_pos[0].id, "a10");
        assert_eq!(p.eval_neg[0].id, "a01");

        let empty = DatasetManifest::new("e", 16_000, vec![]).unwrap();
        assert_eq!(empty.partition().counts(), [0, 0, 0, 0]);
    }

    #[test]
    fn partition_counts_match_label_histogram() {
        // 10 items covering all four label combinations.
        let labels = [
            (0, 0),
            (0, 0),
            (1, 0),
            (1, 0),
            (1, 0),
            (0, 1),
            (1, 1),
            (1, 1),
            (1, 1),
            (1, 1),
        ];
        let items: Vec<AudioItem> = labels
            .iter()
            .enumerate()
            .map(|(i, &(c, s))| item(&format!("i{i:02}"), c, s))
            .collect();
        let mut hist = [0usize; 4];
        for &(c, s) in &labels {
            hist[match (c, s) {
                (0, 0) => 0,
                (1, 0) => 1,
                (0, 1) => 2,
                _ => 3,
            }] += 1;
        }
        let m = DatasetManifest::new("h", 16_000, items).unwrap();
        assert_eq!(m.partition().counts(), hist);
    }

    #[test]
    fn prior_report_hand_values() {
        // (n00, n10, n01, n11) = (70, 30, 40, 60)
        let mut items = Vec::new();
        for (count, class, split, tag) in
            [(70, 0, 0, "tn"), (30, 1, 0, "tp"), (40, 0, 1, "en"), (60, 1, 1, "ep")]
        {
            for i in 0..count {
                items.push(item(&format!("{tag}{i:03}"), class, split));
            }
        }
        let m = DatasetManifest::new("p", 16_000, items).unwrap();
        let r = m.prior_report().unwrap();
        assert!((r.pi_1_given_0 - 0.3).abs() < 1e-15);
        assert!((r.pi_1_given_1 - 0.6).abs() < 1e-15);
        assert!(!r.prior_matched);
        assert_eq!(r.subset_counts, [70, 30, 40, 60]);
    }

    #[test]
    fn prior_report_balance_flags() {
        let m = minimal();
        let r = m.prior_report().unwrap();
        assert!(r.prior_matched);
        assert!(r.class_balanced_train);
        assert!(r.class_balanced_eval);
    }

    #[test]
    fn prior_report_eval_imbalance_ratio() {
        // Eval-heavy negative class mimicking a spoof-style imbalance:
        // 2580 positive vs 22800 negative eval rows.
        let mut items = vec![item("tr0", 0, 0), item("tr1", 1, 0)];
        for i in 0..2580 {
            items.push(item(&format!("bp{i:05}"), 1, 1));
        }
        for i in 0..22800 {
            items.push(item(&format!("sn{i:05}"), 0, 1));
        }
        let m = DatasetManifest::new("imb", 16_000, items).unwrap();
        let r = m.prior_report().unwrap();
        assert!((r.pi_1_given_1 - 2580.0 / 25380.0).abs() < 1e-12);
        assert!((r.pi_1_given_1 - 0.1017).abs() < 5e-4);
    }

    #[test]
    fn prior_report_is_permutation_invariant() {
        let m = minimal();
        let mut rev: Vec<AudioItem> = m.items().to_vec();
        rev.reverse();
        let m2 = DatasetManifest::new("t", 16_000, rev).unwrap();
        assert_eq!(m.prior_report().unwrap(), m2.prior_report().unwrap());
    }

    #[test]
    fn empty_split_is_an_error() {
        let m = DatasetManifest::new("t", 16_000, vec![item("a", 0, 0), item("b", 1, 0)]).unwrap();
        assert!(matches!(
            m.prior_report(),
            Err(ManifestError::EmptySplit("eval"))
        ));
    }

    fn asv_item(
        id: &str,
        speaker: &str,
        session: &str,
        gender: &str,
        country: &str,
    ) -> AudioItem {
        let mut it = item(id, 1, 1);
        it.speaker_id = Some(speaker.into());
        it.session_id = Some(session.into());
        it.gender = Some(gender.into());
        it.country = Some(country.into());
        it
    }

    /// 8 speakers x 4 sessions, one utterance per session; alternating
    /// genders and countries.
    fn asv_manifest() -> DatasetManifest {
        let mut items = Vec::new();
        for s in 0..8 {
            let gender = if s % 2 == 0 { "m" } else { "f" };
            let country = if s % 4 < 2 { "uk" } else { "us" };
            for sess in 0..4 {
                items.push(asv_item(
                    &format!("spk{s}-u{sess}"),
                    &format!("spk{s}"),
                    &format!("spk{s}-sess{sess}"),
                    gender,
                    country,
                ));
            }
        }
        DatasetManifest::new("asv", 16_000, items).unwrap()
    }

    #[test]
    fn same_session_pair_is_a_valid_target_when_r1() {
        let mut items = asv_manifest().items().to_vec();
        // Two utterances of one speaker in one session.
        items.push(asv_item("spk0-extra", "spk0", "spk0-sess0", "m", "uk"));
        let m = DatasetManifest::new("asv", 16_000, items).unwrap();
        let trials = build_asv_trials(
            &m,
            TrialFlags::new(1, 1, 1),
            TrialFlags::new(0, 0, 0),
            None,
            7,
        )
        .unwrap();
        assert!(trials
            .iter()
            .any(|t| t.is_target && t.enroll_id == "spk0-extra" && t.test_id == "spk0-u0"));
    }

    #[test]
    fn trial_counts_match_brute_force_enumeration() {
        let m = asv_manifest();
        let metas: Vec<_> = m.items().iter().map(|i| trial_meta(i).unwrap()).collect();
        for (tr, tg, tc) in [(0, 1, 1)] {
            for nr in [0, 1] {
                for ng in [0, 1] {
                    for nc in [0, 1] {
                        let mut want_t = 0usize;
                        let mut want_n = 0usize;
                        for i in 0..metas.len() {
                            for j in (i + 1)..metas.len() {
                                let f = pair_flags(&metas[i], &metas[j]);
                                let same = metas[i].speaker == metas[j].speaker;
                                if same
                                    && f == TrialFlags::new(tr, tg, tc)
                                {
                                    want_t += 1;
                                }
                                if !same && f == TrialFlags::new(nr, ng, nc) {
                                    want_n += 1;
                                }
                            }
                        }
                        let built = build_asv_trials(
                            &m,
                            TrialFlags::new(tr, tg, tc),
                            TrialFlags::new(nr, ng, nc),
                            None,
                            3,
                        );
                        match built {
                            Ok(trials) => {
                                let got_t = trials.iter().filter(|t| t.is_target).count();
                                let got_n = trials.len() - got_t;
                                assert_eq!((got_t, got_n), (want_t, want_n));
                            }
                            Err(ManifestError::InfeasibleFlags { .. }) => {
                                assert!(want_t == 0 || want_n == 0);
                            }
                            Err(e) => panic!("unexpected error: {e}"),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn trials_are_deterministic_and_flags_recomputable() {
        let m = asv_manifest();
        let a = build_asv_trials(
            &m,
            TrialFlags::new(0, 1, 1),
            TrialFlags::new(0, 0, 0),
            Some(5),
            99,
        )
        .unwrap();
        let b = build_asv_trials(
            &m,
            TrialFlags::new(0, 1, 1),
            TrialFlags::new(0, 0, 0),
            Some(5),
            99,
        )
        .unwrap();
        assert_eq!(trials_to_text(&a), trials_to_text(&b));

        for t in &a {
            let ea = m.get(&t.enroll_id).unwrap();
            let eb = m.get(&t.test_id).unwrap();
            assert_eq!(
                t.same_recording,
                (ea.session_id == eb.session_id) as u8
            );
            assert_eq!(t.same_gender, (ea.gender == eb.gender) as u8);
            assert_eq!(t.same_country, (ea.country == eb.country) as u8);
            if t.is_target {
                assert_eq!(ea.speaker_id, eb.speaker_id);
                assert_eq!(t.same_gender, 1);
                assert_eq!(t.same_country, 1);
            }
        }
    }

    #[test]
    fn nontarget_gender_flag_is_enforced() {
        let m = asv_manifest();
        let trials = build_asv_trials(
            &m,
            TrialFlags::new(0, 1, 1),
            TrialFlags::new(0, 1, 0),
            None,
            1,
        )
        .unwrap();
        for t in trials.iter().filter(|t| !t.is_target) {
            let a = m.get(&t.enroll_id).unwrap();
            let b = m.get(&t.test_id).unwrap();
            assert_eq!(a.gender, b.gender);
            assert_ne!(a.country, b.country);
        }
    }

    #[test]
    fn infeasible_flags_error() {
        let m = asv_manifest();
        // Every speaker has one utterance per session: same-recording targets
        // cannot exist.
        let err = build_asv_trials(
            &m,
            TrialFlags::new(1, 1, 1),
            TrialFlags::new(0, 0, 0),
            None,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, ManifestError::InfeasibleFlags { class: "target", .. }));
    }
}
