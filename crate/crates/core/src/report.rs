//! Delimited-text interfaces: score files, fit reports, detection-rate
//! tables, heatmap matrices, and nuisance exports. All emitted files use
//! comma-separated columns with a header row and end with a trailing
//! newline; floats are printed in shortest round-trip form so identical
//! runs produce identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::lme::{LmeFit, ScoreRow, ScoreTable};
use crate::nuisance::{NuisanceGaussianSummary, NuisanceScore};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing required column {0:?}")]
    MissingColumn(&'static str),
}

/// A parsed delimited table.
#[derive(Debug, Clone, PartialEq)]
pub struct TextTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl TextTable {
    pub fn new(columns: &[&str]) -> Self {
        TextTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn col(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn parse(text: &str) -> Result<Self, ReportError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(ReportError::Parse {
            line: 1,
            message: "empty file".into(),
        })?;
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<String> = line.split(',').map(|f| f.to_string()).collect();
            if fields.len() != columns.len() {
                return Err(ReportError::Parse {
                    line: idx + 1,
                    message: format!(
                        "expected {} fields, found {}",
                        columns.len(),
                        fields.len()
                    ),
                });
            }
            rows.push(fields);
        }
        Ok(TextTable { columns, rows })
    }

    pub fn to_text(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Canonical float formatting for emitted files.
pub fn fmt_float(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

/// Convert a parsed score file into regression rows.
///
/// Requires `id`, `score` and `y_cls` columns. A `speaker` column populates
/// the first random-effect group, an `attack` column the second. Every other
/// column whose value parses as a float becomes a covariate under its column
/// name.
pub fn score_table_from_text(table: &TextTable) -> Result<ScoreTable, ReportError> {
    let id_col = table.col("id").ok_or(ReportError::MissingColumn("id"))?;
    let score_col = table
        .col("score")
        .ok_or(ReportError::MissingColumn("score"))?;
    let y_col = table
        .col("y_cls")
        .ok_or(ReportError::MissingColumn("y_cls"))?;
    let mut rows = Vec::with_capacity(table.rows.len());
    for (i, fields) in table.rows.iter().enumerate() {
        let line = i + 2;
        let parse_f64 = |text: &str, what: &str| {
            text.parse::<f64>().map_err(|e| ReportError::Parse {
                line,
                message: format!("bad {what} {text:?}: {e}"),
            })
        };
        let score = parse_f64(&fields[score_col], "score")?;
        let y_cls = match fields[y_col].as_str() {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(ReportError::Parse {
                    line,
                    message: format!("y_cls must be 0 or 1, got {other:?}"),
                })
            }
        };
        let mut row = ScoreRow::new(fields[id_col].clone(), score, y_cls);
        for (c, name) in table.columns.iter().enumerate() {
            if c == id_col || c == score_col || c == y_col {
                continue;
            }
            match name.as_str() {
                "speaker" => {
                    if !fields[c].is_empty() {
                        row.group_a = Some(fields[c].clone());
                    }
                }
                "attack" => {
                    if !fields[c].is_empty() {
                        row.group_b = Some(fields[c].clone());
                    }
                }
                _ => {
                    if let Ok(v) = fields[c].parse::<f64>() {
                        row.covariates.insert(name.clone(), v);
                    }
                }
            }
        }
        rows.push(row);
    }
    Ok(ScoreTable { rows })
}

/// Serialize score rows, placing covariates in sorted column order after the
/// required columns, then `speaker` and `attack` when any row carries them.
pub fn score_table_to_text(table: &ScoreTable) -> String {
    let mut covariate_names: Vec<String> = Vec::new();
    let mut has_speaker = false;
    let mut has_attack = false;
    for row in &table.rows {
        for name in row.covariates.keys() {
            if !covariate_names.contains(name) {
                covariate_names.push(name.clone());
            }
        }
        has_speaker |= row.group_a.is_some();
        has_attack |= row.group_b.is_some();
    }
    covariate_names.sort();

    let mut columns = vec!["id".to_string(), "score".to_string(), "y_cls".to_string()];
    columns.extend(covariate_names.iter().cloned());
    if has_speaker {
        columns.push("speaker".to_string());
    }
    if has_attack {
        columns.push("attack".to_string());
    }

    let mut out = columns.join(",");
    out.push('\n');
    for row in &table.rows {
        let mut fields = vec![row.id.clone(), fmt_float(row.score), row.y_cls.to_string()];
        for name in &covariate_names {
            fields.push(
                row.covariates
                    .get(name)
                    .map(|v| fmt_float(*v))
                    .unwrap_or_default(),
            );
        }
        if has_speaker {
            fields.push(row.group_a.clone().unwrap_or_default());
        }
        if has_attack {
            fields.push(row.group_b.clone().unwrap_or_default());
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Fit report: one `name,estimate` row per fixed effect, then the variance
/// components, the two goodness-of-fit ratios, the convergence flag and the
/// observation count.
pub fn fit_report_to_text(fit: &LmeFit) -> String {
    let mut out = String::from("name,estimate\n");
    for (name, value) in &fit.beta {
        let _ = writeln!(out, "{name},{}", fmt_float(*value));
    }
    let _ = writeln!(out, "sigma2_eps,{}", fmt_float(fit.sigma2_eps));
    let _ = writeln!(out, "sigma2_a,{}", fmt_float(fit.sigma2_a));
    let _ = writeln!(out, "sigma2_b,{}", fmt_float(fit.sigma2_b));
    let _ = writeln!(out, "marginal_r2,{}", fmt_float(fit.marginal_r2));
    let _ = writeln!(out, "conditional_r2,{}", fmt_float(fit.conditional_r2));
    let _ = writeln!(out, "converged,{}", fit.converged as u8);
    let _ = writeln!(out, "n_obs,{}", fit.n_obs);
    out
}

/// Detection-rate table: one row per group cell.
pub fn eer_report_to_text(rows: &[(Vec<String>, f64)], group_columns: &[String]) -> String {
    let mut columns: Vec<String> = group_columns.to_vec();
    columns.push("eer".to_string());
    let mut out = columns.join(",");
    out.push('\n');
    for (keys, eer) in rows {
        let mut fields = keys.clone();
        fields.push(fmt_float(*eer));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Heatmap matrix over a partial-bias grid: columns are the negative-class
/// test probabilities, rows the positive-class test probabilities, both
/// ascending. Missing cells are left empty.
pub fn heatmap_to_text(cells: &BTreeMap<(String, String), f64>) -> String {
    let mut row_keys: Vec<f64> = Vec::new();
    let mut col_keys: Vec<f64> = Vec::new();
    for (pos, neg) in cells.keys() {
        let p: f64 = pos.parse().unwrap_or(f64::NAN);
        let n: f64 = neg.parse().unwrap_or(f64::NAN);
        if !row_keys.iter().any(|v| v == &p) {
            row_keys.push(p);
        }
        if !col_keys.iter().any(|v| v == &n) {
            col_keys.push(n);
        }
    }
    row_keys.sort_by(f64::total_cmp);
    col_keys.sort_by(f64::total_cmp);

    let mut out = String::from("rho_test_pos\\rho_test_neg");
    for c in &col_keys {
        let _ = write!(out, ",{}", fmt_float(*c));
    }
    out.push('\n');
    for r in &row_keys {
        let _ = write!(out, "{}", fmt_float(*r));
        for c in &col_keys {
            let key = (fmt_float(*r), fmt_float(*c));
            match cells.get(&key) {
                Some(v) => {
                    let _ = write!(out, ",{}", fmt_float(*v));
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// Nuisance score export: `id,y_cls,feature_value,llr`.
pub fn nuisance_scores_to_text(scores: &[NuisanceScore]) -> String {
    let mut out = String::from("id,y_cls,feature_value,llr\n");
    for s in scores {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            s.id,
            s.y_cls,
            fmt_float(s.feature_value),
            fmt_float(s.llr)
        );
    }
    out
}

/// Nuisance summary export:
/// `mu_ell,d_ell,sigma2_ell,gaussian_eer,empirical_eer`.
pub fn nuisance_summary_to_text(
    summary: &NuisanceGaussianSummary,
    empirical_eer: f64,
) -> String {
    format!(
        "mu_ell,d_ell,sigma2_ell,gaussian_eer,empirical_eer\n{},{},{},{},{}\n",
        fmt_float(summary.mu_ell),
        fmt_float(summary.d_ell),
        fmt_float(summary.sigma2_ell),
        fmt_float(crate::nuisance::gaussian_eer(summary.d_ell)),
        fmt_float(empirical_eer)
    )
}

/// Per-file measurement export: `id,kind,value`.
pub fn measurements_to_text(rows: &[(String, &'static str, f64)]) -> String {
    let mut out = String::from("id,kind,value\n");
    for (id, kind, value) in rows {
        let _ = writeln!(out, "{id},{kind},{}", fmt_float(*value));
    }
    out
}
