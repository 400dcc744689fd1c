//! Dataset-bias audit toolkit for binary detectors.
//!
//! The crate provides the building blocks for two complementary audits of a
//! black-box binary detector:
//!
//! * **Interventional**: apply controlled, seeded perturbations (additive
//!   noise, mu-law companding, loudness normalization, non-speech zeroing,
//!   external codecs) to chosen class/split subsets of an audio dataset, then
//!   regress the detector scores on the induced treatment differences.
//! * **Observational**: extract scalar nuisance features (SNR, non-speech
//!   proportion) from the data as-is, train a per-class Gaussian-mixture
//!   nuisance classifier, and regress detector scores on its log-likelihood
//!   ratio.
//!
//! Both audits share a linear mixed-effects fitter with up to two crossed
//! random intercepts (REML), an equal-error-rate metric with fixed score
//! polarity, and a synthetic corpus plus toy detector for end-to-end runs at
//! desk scale.

pub mod audio;
pub mod intervene;
pub mod lme;
pub mod manifest;
pub mod metrics;
pub mod nuisance;
pub mod report;
pub mod seeding;
pub mod toy;

pub use manifest::{AudioItem, DatasetManifest, PriorReport};
