//! Score models: z-score normalization, design-matrix construction for the
//! interventional, observational and speaker-verification regressions, and a
//! REML fitter for linear mixed-effects models with up to two crossed random
//! intercepts.

mod reml;

pub use reml::{fit_reml, reml_deviance_at, LmeFit};

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::intervene::{delta_features, ConfigQuadruple};
use crate::manifest::TrialFlags;

#[derive(Debug, Error)]
pub enum LmeError {
    #[error("need at least 2 scores to normalize, got {0}")]
    TooFewScores(usize),
    #[error("scores have zero variance")]
    ZeroVariance,
    #[error("score table contains a non-finite score for trial {0:?}")]
    NonFiniteScore(String),
    #[error("term {term} needs covariate {covariate:?}, missing on trial {id:?}")]
    MissingCovariate {
        term: &'static str,
        covariate: &'static str,
        id: String,
    },
    #[error("random factor {0} requested but trial {1:?} has no group value")]
    MissingGroup(&'static str, String),
    #[error("random factor {0} has fewer than 2 levels")]
    DegenerateFactor(&'static str),
    #[error("{0} observations cannot identify {1} fixed effects")]
    TooFewObservations(usize, usize),
    #[error("fixed-effect matrix is rank deficient")]
    RankDeficient,
    #[error("empty score table")]
    Empty,
    #[error("fit has no coefficient {0:?}")]
    MissingCoefficient(String),
    #[error("class-mean difference is defined for corner configurations; {0:?} is partial")]
    PartialConfig(String),
}

/// Z-score normalization with the n-1 standard-deviation denominator.
/// Callers apply this over the pooled evaluation scores of one
/// (configuration, intervention) cell.
pub fn zscore_normalize(scores: &[f64]) -> Result<Vec<f64>, LmeError> {
    if scores.len() < 2 {
        return Err(LmeError::TooFewScores(scores.len()));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return Err(LmeError::ZeroVariance);
    }
    let sd = var.sqrt();
    Ok(scores.iter().map(|s| (s - mean) / sd).collect())
}

/// One scored trial with its regression inputs.
#[derive(Debug, Clone)]
pub struct ScoreRow {
    pub id: String,
    pub score: f64,
    pub y_cls: u8,
    pub covariates: BTreeMap<String, f64>,
    /// First random-effect grouping key (e.g. speaker).
    pub group_a: Option<String>,
    /// Second random-effect grouping key (e.g. attack type).
    pub group_b: Option<String>,
}

impl ScoreRow {
    pub fn new(id: impl Into<String>, score: f64, y_cls: u8) -> Self {
        ScoreRow {
            id: id.into(),
            score,
            y_cls,
            covariates: BTreeMap::new(),
            group_a: None,
            group_b: None,
        }
    }

    pub fn with_covariate(mut self, name: &str, value: f64) -> Self {
        self.covariates.insert(name.to_string(), value);
        self
    }
}

/// A set of scored trials ready for regression.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

/// Fixed-effect terms, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedTerm {
    /// Negative-class mean (column of ones); coefficient `mu`.
    Intercept,
    /// Class discrimination; coefficient `d`.
    Class,
    /// Treatment difference vs. the positive training class
    /// (covariate `delta_pos`); coefficient `beta_bon`.
    DeltaPos,
    /// Treatment difference vs. the negative training class
    /// (covariate `delta_neg`); coefficient `beta_spf`.
    DeltaNeg,
    /// Class-split slopes of the nuisance log-likelihood ratio (covariate
    /// `llr`): columns `beta_llr_bon` (llr * y) and `beta_llr_spf`
    /// (llr * (1 - y)).
    LlrSplitSlopes,
    /// Same-recording trial flag (covariate `recording`); `beta_recording`.
    Recording,
    /// Same-gender trial flag (covariate `gender`); `beta_gender`.
    Gender,
    /// Same-country trial flag (covariate `country`); `beta_country`.
    Country,
}

/// Which fixed terms and random factors a fit uses. The intercept and class
/// terms are always present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelFormula {
    pub fixed: Vec<FixedTerm>,
    pub random_a: bool,
    pub random_b: bool,
}

impl ModelFormula {
    fn base(mut extra: Vec<FixedTerm>, random_a: bool, random_b: bool) -> Self {
        let mut fixed = vec![FixedTerm::Intercept, FixedTerm::Class];
        fixed.append(&mut extra);
        ModelFormula {
            fixed,
            random_a,
            random_b,
        }
    }

    /// Interventional score model: intercept, class, and the two treatment
    /// differences. Residual absorbs random effects by default.
    pub fn interventional() -> Self {
        Self::base(vec![FixedTerm::DeltaPos, FixedTerm::DeltaNeg], false, false)
    }

    /// Observational score model: class-split slopes of the nuisance score
    /// plus crossed speaker/attack random intercepts.
    pub fn observational() -> Self {
        Self::base(vec![FixedTerm::LlrSplitSlopes], true, true)
    }

    /// Speaker-verification score model: trial condition flags plus a
    /// per-speaker random intercept.
    pub fn asv() -> Self {
        Self::base(
            vec![FixedTerm::Recording, FixedTerm::Gender, FixedTerm::Country],
            true,
            false,
        )
    }

    pub fn with_random(mut self, random_a: bool, random_b: bool) -> Self {
        self.random_a = random_a;
        self.random_b = random_b;
        self
    }
}

/// Per-row level indices of one random-effect factor.
#[derive(Debug, Clone)]
pub struct FactorIndex {
    pub name: &'static str,
    pub levels: Vec<String>,
    pub index: Vec<usize>,
}

/// Response, fixed-effect matrix and factor indices for one fit.
#[derive(Debug, Clone)]
pub struct Design {
    pub response: DVector<f64>,
    pub fixed: DMatrix<f64>,
    pub fixed_names: Vec<String>,
    pub factor_a: Option<FactorIndex>,
    pub factor_b: Option<FactorIndex>,
}

fn covariate(
    row: &ScoreRow,
    term: &'static str,
    name: &'static str,
) -> Result<f64, LmeError> {
    row.covariates
        .get(name)
        .copied()
        .ok_or_else(|| LmeError::MissingCovariate {
            term,
            covariate: name,
            id: row.id.clone(),
        })
}

fn build_factor(
    table: &ScoreTable,
    name: &'static str,
    get: impl Fn(&ScoreRow) -> Option<&String>,
) -> Result<FactorIndex, LmeError> {
    let mut levels: Vec<String> = Vec::new();
    let mut level_of: BTreeMap<String, usize> = BTreeMap::new();
    let mut index = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let key = get(row).ok_or_else(|| LmeError::MissingGroup(name, row.id.clone()))?;
        let idx = match level_of.get(key) {
            Some(&i) => i,
            None => {
                let i = levels.len();
                levels.push(key.clone());
                level_of.insert(key.clone(), i);
                i
            }
        };
        index.push(idx);
    }
    if levels.len() < 2 {
        return Err(LmeError::DegenerateFactor(name));
    }
    Ok(FactorIndex {
        name,
        levels,
        index,
    })
}

/// Assemble the response vector, fixed matrix and factor index vectors for a
/// formula. Fixed columns appear in formula order; the split-slope term
/// contributes two columns.
pub fn build_design(table: &ScoreTable, formula: &ModelFormula) -> Result<Design, LmeError> {
    if table.rows.is_empty() {
        return Err(LmeError::Empty);
    }
    for row in &table.rows {
        if !row.score.is_finite() {
            return Err(LmeError::NonFiniteScore(row.id.clone()));
        }
    }
    let n = table.rows.len();
    let mut names: Vec<String> = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for term in &formula.fixed {
        match term {
            FixedTerm::Intercept => {
                names.push("mu".into());
                columns.push(vec![1.0; n]);
            }
            FixedTerm::Class => {
                names.push("d".into());
                columns.push(table.rows.iter().map(|r| r.y_cls as f64).collect());
            }
            FixedTerm::DeltaPos => {
                names.push("beta_bon".into());
                columns.push(
                    table
                        .rows
                        .iter()
                        .map(|r| covariate(r, "delta_pos", "delta_pos"))
                        .collect::<Result<_, _>>()?,
                );
            }
            FixedTerm::DeltaNeg => {
                names.push("beta_spf".into());
                columns.push(
                    table
                        .rows
                        .iter()
                        .map(|r| covariate(r, "delta_neg", "delta_neg"))
                        .collect::<Result<_, _>>()?,
                );
            }
            FixedTerm::LlrSplitSlopes => {
                let llr: Vec<f64> = table
                    .rows
                    .iter()
                    .map(|r| covariate(r, "llr_split_slopes", "llr"))
                    .collect::<Result<_, _>>()?;
                names.push("beta_llr_bon".into());
                columns.push(
                    llr.iter()
                        .zip(&table.rows)
                        .map(|(l, r)| l * r.y_cls as f64)
                        .collect(),
                );
                names.push("beta_llr_spf".into());
                columns.push(
                    llr.iter()
                        .zip(&table.rows)
                        .map(|(l, r)| l * (1.0 - r.y_cls as f64))
                        .collect(),
                );
            }
            FixedTerm::Recording => {
                names.push("beta_recording".into());
                columns.push(
                    table
                        .rows
                        .iter()
                        .map(|r| covariate(r, "recording", "recording"))
                        .collect::<Result<_, _>>()?,
                );
            }
            FixedTerm::Gender => {
                names.push("beta_gender".into());
                columns.push(
                    table
                        .rows
                        .iter()
                        .map(|r| covariate(r, "gender", "gender"))
                        .collect::<Result<_, _>>()?,
                );
            }
            FixedTerm::Country => {
                names.push("beta_country".into());
                columns.push(
                    table
                        .rows
                        .iter()
                        .map(|r| covariate(r, "country", "country"))
                        .collect::<Result<_, _>>()?,
                );
            }
        }
    }
    let p = columns.len();
    let fixed = DMatrix::from_fn(n, p, |i, j| columns[j][i]);
    let response = DVector::from_iterator(n, table.rows.iter().map(|r| r.score));
    let factor_a = if formula.random_a {
        Some(build_factor(table, "group_a", |r| r.group_a.as_ref())?)
    } else {
        None
    };
    let factor_b = if formula.random_b {
        Some(build_factor(table, "group_b", |r| r.group_b.as_ref())?)
    } else {
        None
    };
    Ok(Design {
        response,
        fixed,
        fixed_names: names,
        factor_a,
        factor_b,
    })
}

/// Variance-partition goodness of fit (fixed-effects only, and fixed plus
/// random). `var_fixed` is the sample variance of the fixed-effect linear
/// predictor.
pub fn conditional_r2(fit: &LmeFit, design: &Design) -> (f64, f64) {
    let p = design.fixed.ncols();
    let beta = DVector::from_iterator(p, fit.beta.iter().map(|(_, b)| *b));
    let predictor = &design.fixed * beta;
    let n = predictor.len() as f64;
    let mean = predictor.sum() / n;
    let var_fixed = if n > 1.0 {
        predictor.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let total = var_fixed + fit.sigma2_a + fit.sigma2_b + fit.sigma2_eps;
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    (
        var_fixed / total,
        (var_fixed + fit.sigma2_a + fit.sigma2_b) / total,
    )
}

/// Difference of class-conditional mean scores implied by a fitted
/// interventional model under a corner configuration: `d` plus the
/// treatment-difference contrast between the classes.
pub fn class_mean_difference(fit: &LmeFit, config: &ConfigQuadruple) -> Result<f64, LmeError> {
    for rho in config.rho {
        if rho != 0.0 && rho != 1.0 {
            return Err(LmeError::PartialConfig(config.name.clone()));
        }
    }
    let coef = |name: &str| {
        fit.coef(name)
            .ok_or_else(|| LmeError::MissingCoefficient(name.to_string()))
    };
    let d = coef("d")?;
    let b_bon = coef("beta_bon")?;
    let b_spf = coef("beta_spf")?;
    // At a corner, the realized test indicator equals the subset probability.
    let pos = delta_features(config.rho[3], config);
    let neg = delta_features(config.rho[2], config);
    Ok(d + b_bon * (pos.delta_pos - neg.delta_pos) + b_spf * (pos.delta_neg - neg.delta_neg))
}

/// Difference of target vs. nontarget mean scores implied by a fitted
/// speaker-verification model for a (target flags, nontarget flags) pair:
/// `d` plus each condition coefficient times its flag contrast.
pub fn asv_class_mean_difference(
    fit: &LmeFit,
    target: TrialFlags,
    nontarget: TrialFlags,
) -> Result<f64, LmeError> {
    let coef = |name: &str| {
        fit.coef(name)
            .ok_or_else(|| LmeError::MissingCoefficient(name.to_string()))
    };
    let contrast = |t: u8, n: u8| t as f64 - n as f64;
    Ok(coef("d")?
        + coef("beta_recording")? * contrast(target.same_recording, nontarget.same_recording)
        + coef("beta_gender")? * contrast(target.same_gender, nontarget.same_gender)
        + coef("beta_country")? * contrast(target.same_country, nontarget.same_country))
}
