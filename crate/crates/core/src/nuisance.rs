//! Observational nuisance pipeline: per-class univariate Gaussian mixtures
//! fit by EM over a scalar nuisance feature, log-likelihood-ratio scoring of
//! evaluation items, and the Gaussian summary of the resulting scores with
//! its closed-form equal-error-rate relation.
//!
//! The nuisance classifier is built to be *bad on purpose*: when it can
//! separate the classes from a feature the detector should not rely on, the
//! protocol is biased. An unbiased protocol yields scores centered at zero
//! and a nuisance EER of one half.

use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

use crate::audio::{self, AudioError, NuisanceKind};
use crate::manifest::DatasetManifest;

#[derive(Debug, Error)]
pub enum NuisanceError {
    #[error("need at least {needed} values to fit {k} components, got {got}")]
    TooFewPoints { needed: usize, got: usize, k: usize },
    #[error("component count must be at least 1")]
    ZeroComponents,
    #[error("scores contain only one class")]
    OneClass,
    #[error("manifest is missing a non-empty {0} subset")]
    MissingSubset(&'static str),
    #[error("feature extraction failed for {failures} file(s):\n{listing}")]
    FeatureExtraction { failures: usize, listing: String },
}

/// Univariate Gaussian mixture with floored variances.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateGmm {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Diagnostics from one EM run.
#[derive(Debug, Clone)]
pub struct EmTrace {
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
}

const EM_TOL: f64 = 1e-8;
const EM_MAX_ITERS: usize = 500;
/// Variance floor relative to the data variance.
const VAR_FLOOR_REL: f64 = 1e-6;
/// Absolute fallback when the data itself is constant.
const VAR_FLOOR_ABS: f64 = 1e-12;

fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

impl UnivariateGmm {
    /// Log density of the mixture at `x`, evaluated with log-sum-exp.
    pub fn log_density(&self, x: f64) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(&w, (&m, &v))| w.ln() + log_normal_pdf(x, m, v))
            .collect();
        log_sum_exp(&terms)
    }
}

/// Evenly spaced sample quantiles used to seed the component means.
fn quantile_means(sorted: &[f64], k: usize) -> Vec<f64> {
    (0..k)
        .map(|j| {
            let q = (j as f64 + 0.5) / k as f64;
            let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
            sorted[idx]
        })
        .collect()
}

/// Fit a K-component mixture by EM.
///
/// Initialization is deterministic: means at the K evenly spaced sample
/// quantiles, equal weights, pooled variance. Iterates until the
/// log-likelihood gain drops below 1e-8 (or 500 iterations), flooring
/// variances at each M-step. The likelihood trace is returned so callers can
/// audit monotonicity. `_seed` is kept in the signature for callers that
/// script the pipeline; the deterministic initializer does not consume it.
pub fn fit_gmm(
    values: &[f64],
    k: usize,
    _seed: u64,
) -> Result<(UnivariateGmm, EmTrace), NuisanceError> {
    if k == 0 {
        return Err(NuisanceError::ZeroComponents);
    }
    if values.len() < 10 * k {
        return Err(NuisanceError::TooFewPoints {
            needed: 10 * k,
            got: values.len(),
            k,
        });
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let floor = (VAR_FLOOR_REL * var).max(VAR_FLOOR_ABS);

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut gmm = UnivariateGmm {
        weights: vec![1.0 / k as f64; k],
        means: quantile_means(&sorted, k),
        variances: vec![var.max(floor); k],
    };

    let mut lls = Vec::new();
    let mut resp = vec![0.0f64; k];
    let mut converged = false;
    for _ in 0..EM_MAX_ITERS {
        // E step: responsibilities and the current log-likelihood.
        let mut ll = 0.0;
        let mut wsum = vec![0.0f64; k];
        let mut wx = vec![0.0f64; k];
        let mut wxx = vec![0.0f64; k];
        for &x in values {
            for j in 0..k {
                resp[j] = gmm.weights[j].ln() + log_normal_pdf(x, gmm.means[j], gmm.variances[j]);
            }
            let lse = log_sum_exp(&resp);
            ll += lse;
            for j in 0..k {
                let r = (resp[j] - lse).exp();
                wsum[j] += r;
                wx[j] += r * x;
                wxx[j] += r * x * x;
            }
        }
        if let Some(&prev) = lls.last() {
            debug_assert!(ll >= prev - 1e-9, "EM log-likelihood decreased");
            if ll - prev < EM_TOL {
                lls.push(ll);
                converged = true;
                break;
            }
        }
        lls.push(ll);

        // M step with variance flooring.
        for j in 0..k {
            let w = wsum[j].max(1e-300);
            let m = wx[j] / w;
            let v = (wxx[j] / w - m * m).max(floor);
            gmm.weights[j] = w / n as f64;
            gmm.means[j] = m;
            gmm.variances[j] = v;
        }
        let wtot: f64 = gmm.weights.iter().sum();
        for w in &mut gmm.weights {
            *w /= wtot;
        }
    }
    Ok((
        gmm,
        EmTrace {
            log_likelihoods: lls,
            converged,
        },
    ))
}

/// Log-likelihood ratio of `w` under the positive vs. negative model.
pub fn llr(w: f64, pos: &UnivariateGmm, neg: &UnivariateGmm) -> f64 {
    pos.log_density(w) - neg.log_density(w)
}

/// One scored evaluation item.
#[derive(Debug, Clone)]
pub struct NuisanceScore {
    pub id: String,
    pub y_cls: u8,
    pub feature_value: f64,
    pub llr: f64,
}

/// Models and diagnostics from a full observational scoring run.
#[derive(Debug, Clone)]
pub struct NuisanceRun {
    pub kind: NuisanceKind,
    pub pos_model: UnivariateGmm,
    pub neg_model: UnivariateGmm,
    pub pos_trace: EmTrace,
    pub neg_trace: EmTrace,
    pub scores: Vec<NuisanceScore>,
}

fn extract_features(
    items: &[(String, PathBuf, u8)],
    kind: NuisanceKind,
) -> Result<Vec<(String, u8, f64)>, NuisanceError> {
    let results: Vec<(String, u8, Result<f64, AudioError>)> = items
        .par_iter()
        .map(|(id, path, y)| {
            let value = audio::read_pcm(path).map(|x| audio::nuisance_feature(&x, kind).value);
            (id.clone(), *y, value)
        })
        .collect();
    let failures: Vec<String> = results
        .iter()
        .filter_map(|(id, _, r)| r.as_ref().err().map(|e| format!("  {id}: {e}")))
        .collect();
    if !failures.is_empty() {
        return Err(NuisanceError::FeatureExtraction {
            failures: failures.len(),
            listing: failures.join("\n"),
        });
    }
    Ok(results
        .into_iter()
        .map(|(id, y, r)| (id, y, r.unwrap()))
        .collect())
}

/// Run the observational pipeline over a manifest: extract the named feature
/// everywhere, fit one GMM per training class, and score every evaluation
/// item with the log-likelihood ratio.
pub fn score_dataset(
    manifest: &DatasetManifest,
    kind: NuisanceKind,
    k: usize,
    seed: u64,
) -> Result<NuisanceRun, NuisanceError> {
    let part = manifest.partition();
    if part.train_pos.is_empty() {
        return Err(NuisanceError::MissingSubset("positive training"));
    }
    if part.train_neg.is_empty() {
        return Err(NuisanceError::MissingSubset("negative training"));
    }
    if part.eval_pos.is_empty() && part.eval_neg.is_empty() {
        return Err(NuisanceError::MissingSubset("evaluation"));
    }

    let to_tuple = |items: &[&crate::manifest::AudioItem]| {
        items
            .iter()
            .map(|i| (i.id.clone(), i.path.clone(), i.class_label))
            .collect::<Vec<_>>()
    };
    let train_pos = extract_features(&to_tuple(&part.train_pos), kind)?;
    let train_neg = extract_features(&to_tuple(&part.train_neg), kind)?;
    let mut eval_items = to_tuple(&part.eval_neg);
    eval_items.extend(to_tuple(&part.eval_pos));
    eval_items.sort_by(|a, b| a.0.cmp(&b.0));
    let eval = extract_features(&eval_items, kind)?;

    let pos_values: Vec<f64> = train_pos.iter().map(|(_, _, v)| *v).collect();
    let neg_values: Vec<f64> = train_neg.iter().map(|(_, _, v)| *v).collect();
    let (pos_model, pos_trace) = fit_gmm(&pos_values, k, seed)?;
    let (neg_model, neg_trace) = fit_gmm(&neg_values, k, seed)?;

    let scores = eval
        .into_iter()
        .map(|(id, y_cls, feature_value)| NuisanceScore {
            id,
            y_cls,
            feature_value,
            llr: llr(feature_value, &pos_model, &neg_model),
        })
        .collect();
    Ok(NuisanceRun {
        kind,
        pos_model,
        neg_model,
        pos_trace,
        neg_trace,
        scores,
    })
}

/// Gaussian summary of nuisance scores: negative-class mean, class-mean
/// difference, and tied within-class variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuisanceGaussianSummary {
    pub mu_ell: f64,
    pub d_ell: f64,
    pub sigma2_ell: f64,
}

/// Fit the tied-variance Gaussian summary to (score, class) pairs.
pub fn fit_nuisance_summary(
    scores: &[(f64, u8)],
) -> Result<NuisanceGaussianSummary, NuisanceError> {
    let pos: Vec<f64> = scores.iter().filter(|(_, y)| *y == 1).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().filter(|(_, y)| *y == 0).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(NuisanceError::OneClass);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let m_pos = mean(&pos);
    let m_neg = mean(&neg);
    let ss: f64 = pos.iter().map(|s| (s - m_pos).powi(2)).sum::<f64>()
        + neg.iter().map(|s| (s - m_neg).powi(2)).sum::<f64>();
    let dof = (pos.len() + neg.len()).saturating_sub(2).max(1);
    Ok(NuisanceGaussianSummary {
        mu_ell: m_neg,
        d_ell: m_pos - m_neg,
        sigma2_ell: ss / dof as f64,
    })
}

/// Model-based equal error rate of a tied-variance Gaussian score model with
/// class-mean difference `d_ell` (on the unit-variance scale): the standard
/// normal CDF at `-d_ell/2`.
pub fn gaussian_eer(d_ell: f64) -> f64 {
    standard_normal_cdf(-d_ell / 2.0)
}

/// Standard normal CDF via the complementary error function.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}
