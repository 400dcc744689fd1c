use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use biasaudit::metrics::{eer, MetricsError, ScoredTrials};
use biasaudit::report::{eer_report_to_text, heatmap_to_text, TextTable};

use crate::{data, usage, CliError};

fn parse_pairs(
    table: &TextTable,
    rows: &[usize],
) -> Result<Vec<(f64, u8)>, CliError> {
    let score_col = table
        .col("score")
        .ok_or_else(|| data(anyhow::anyhow!("score file lacks a score column")))?;
    let y_col = table
        .col("y_cls")
        .ok_or_else(|| data(anyhow::anyhow!("score file lacks a y_cls column")))?;
    rows.iter()
        .map(|&i| {
            let fields = &table.rows[i];
            let score = fields[score_col]
                .parse::<f64>()
                .map_err(|e| data(anyhow::anyhow!("bad score {:?}: {e}", fields[score_col])))?;
            let y = match fields[y_col].as_str() {
                "0" => 0u8,
                "1" => 1u8,
                other => return Err(data(anyhow::anyhow!("bad y_cls {other:?}"))),
            };
            Ok((score, y))
        })
        .collect()
}

pub fn run(
    scores_path: &Path,
    group_by: Option<&str>,
    heatmap: bool,
    out: &Path,
) -> Result<(), CliError> {
    let text = fs::read_to_string(scores_path)
        .map_err(|e| data(anyhow::anyhow!("cannot read {}: {e}", scores_path.display())))?;
    let table = TextTable::parse(&text).map_err(data)?;

    let group_columns: Vec<String> = if heatmap {
        vec!["rho_test_pos".to_string(), "rho_test_neg".to_string()]
    } else {
        match group_by {
            Some(spec) => spec.split(',').map(|c| c.trim().to_string()).collect(),
            None => Vec::new(),
        }
    };
    let col_indices: Vec<usize> = group_columns
        .iter()
        .map(|name| {
            table
                .col(name)
                .ok_or_else(|| usage(format!("score file has no column {name:?}")))
        })
        .collect::<Result<_, _>>()?;

    let mut groups: BTreeMap<Vec<String>, Vec<usize>> = BTreeMap::new();
    for (i, row) in table.rows.iter().enumerate() {
        let key: Vec<String> = col_indices.iter().map(|&c| row[c].clone()).collect();
        groups.entry(key).or_default().push(i);
    }

    let mut report_rows: Vec<(Vec<String>, f64)> = Vec::new();
    for (key, rows) in groups {
        let pairs = parse_pairs(&table, &rows)?;
        match eer(&ScoredTrials::new(pairs)) {
            Ok(value) => report_rows.push((key, value)),
            Err(MetricsError::OneClass { .. }) => {
                log::warn!("group {key:?} has a single class; omitted");
            }
        }
    }
    if report_rows.is_empty() {
        return Err(data(anyhow::anyhow!("no group with both classes present")));
    }

    let output = if heatmap {
        let cells: BTreeMap<(String, String), f64> = report_rows
            .into_iter()
            .map(|(key, value)| ((key[0].clone(), key[1].clone()), value))
            .collect();
        heatmap_to_text(&cells)
    } else {
        eer_report_to_text(&report_rows, &group_columns)
    };
    fs::write(out, output)
        .map_err(|e| data(anyhow::anyhow!("cannot write {}: {e}", out.display())))?;
    println!("wrote detection rates to {}", out.display());
    Ok(())
}
