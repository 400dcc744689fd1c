use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use biasaudit::lme::{build_design, fit_reml, zscore_normalize, ModelFormula};
use biasaudit::report::{fit_report_to_text, fmt_float, score_table_from_text, TextTable};

use crate::{data, usage, CliError};

fn formula_from_name(name: &str) -> Result<ModelFormula, CliError> {
    match name {
        "interventional" => Ok(ModelFormula::interventional()),
        "observational" => Ok(ModelFormula::observational()),
        "asv" => Ok(ModelFormula::asv()),
        other => Err(usage(format!(
            "unknown formula {other:?}; expected interventional, observational, or asv"
        ))),
    }
}

fn random_from_flag(flag: &str) -> Result<(bool, bool), CliError> {
    let mut random = (false, false);
    if flag == "none" {
        return Ok(random);
    }
    for part in flag.split(',') {
        match part.trim() {
            "speaker" => random.0 = true,
            "attack" => random.1 = true,
            other => {
                return Err(usage(format!(
                    "unknown random factor {other:?}; expected speaker and/or attack, or none"
                )))
            }
        }
    }
    Ok(random)
}

/// Z-score the score column in place, separately per (config, intervention)
/// cell when those columns exist.
pub(crate) fn zscore_cells(table: &mut TextTable) -> Result<(), CliError> {
    let score_col = table
        .col("score")
        .ok_or_else(|| data(anyhow::anyhow!("score file lacks a score column")))?;
    let group_cols: Vec<usize> = ["config", "intervention"]
        .iter()
        .filter_map(|name| table.col(name))
        .collect();
    let mut cells: BTreeMap<Vec<String>, Vec<usize>> = BTreeMap::new();
    for (i, row) in table.rows.iter().enumerate() {
        let key: Vec<String> = group_cols.iter().map(|&c| row[c].clone()).collect();
        cells.entry(key).or_default().push(i);
    }
    for (key, rows) in cells {
        let scores: Vec<f64> = rows
            .iter()
            .map(|&i| {
                table.rows[i][score_col].parse::<f64>().map_err(|e| {
                    data(anyhow::anyhow!("bad score {:?}: {e}", table.rows[i][score_col]))
                })
            })
            .collect::<Result<_, _>>()?;
        let normalized = zscore_normalize(&scores)
            .map_err(|e| data(anyhow::anyhow!("cell {key:?}: {e}")))?;
        for (&i, z) in rows.iter().zip(normalized) {
            table.rows[i][score_col] = fmt_float(z);
        }
    }
    Ok(())
}

pub fn run(
    scores_path: &Path,
    formula_name: &str,
    random: Option<&str>,
    zscore: bool,
    out: &Path,
) -> Result<(), CliError> {
    let mut formula = formula_from_name(formula_name)?;
    if let Some(flag) = random {
        let (a, b) = random_from_flag(flag)?;
        formula = formula.with_random(a, b);
    }

    let text = fs::read_to_string(scores_path)
        .map_err(|e| data(anyhow::anyhow!("cannot read {}: {e}", scores_path.display())))?;
    let mut table = TextTable::parse(&text).map_err(data)?;
    if zscore {
        zscore_cells(&mut table)?;
    }
    let score_table = score_table_from_text(&table).map_err(data)?;
    let classes: (usize, usize) = score_table.rows.iter().fold((0, 0), |acc, r| {
        if r.y_cls == 1 {
            (acc.0 + 1, acc.1)
        } else {
            (acc.0, acc.1 + 1)
        }
    });
    if classes.0 == 0 || classes.1 == 0 {
        return Err(data(anyhow::anyhow!(
            "score file contains only one class ({} positive / {} negative)",
            classes.0,
            classes.1
        )));
    }

    let design = build_design(&score_table, &formula).map_err(data)?;
    let fit = fit_reml(&design).map_err(data)?;
    fs::write(out, fit_report_to_text(&fit))
        .map_err(|e| data(anyhow::anyhow!("cannot write {}: {e}", out.display())))?;
    println!(
        "fit {} on {} rows: d = {:.4}, conditional R2 = {:.4} -> {}",
        formula_name,
        fit.n_obs,
        fit.coef("d").unwrap_or(f64::NAN),
        fit.conditional_r2,
        out.display()
    );
    if !fit.converged {
        return Err(CliError::NonConvergence);
    }
    Ok(())
}
