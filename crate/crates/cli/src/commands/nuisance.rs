use std::fs;
use std::path::Path;

use biasaudit::audio::NuisanceKind;
use biasaudit::manifest::load_manifest;
use biasaudit::metrics::{eer, ScoredTrials};
use biasaudit::nuisance::{fit_nuisance_summary, score_dataset};
use biasaudit::report::{nuisance_scores_to_text, nuisance_summary_to_text};

use crate::{data, usage, CliError};

pub fn run(
    manifest_path: &Path,
    feature: &str,
    k: usize,
    seed: u64,
    scores_path: &Path,
    summary_path: Option<&Path>,
) -> Result<(), CliError> {
    let kind = NuisanceKind::from_name(feature)
        .ok_or_else(|| usage(format!("unknown nuisance feature {feature:?}")))?;
    if !(1..=8).contains(&k) {
        return Err(usage(format!("--k must lie in 1..=8, got {k}")));
    }
    let manifest = load_manifest(manifest_path).map_err(data)?;
    let run = score_dataset(&manifest, kind, k, seed).map_err(data)?;

    fs::write(scores_path, nuisance_scores_to_text(&run.scores))
        .map_err(|e| data(anyhow::anyhow!("cannot write {}: {e}", scores_path.display())))?;

    let pairs: Vec<(f64, u8)> = run.scores.iter().map(|s| (s.llr, s.y_cls)).collect();
    let summary = fit_nuisance_summary(&pairs).map_err(data)?;
    let empirical = eer(&ScoredTrials::new(pairs)).map_err(data)?;
    let summary_text = nuisance_summary_to_text(&summary, empirical);
    if let Some(path) = summary_path {
        fs::write(path, &summary_text)
            .map_err(|e| data(anyhow::anyhow!("cannot write {}: {e}", path.display())))?;
    }
    println!(
        "{}: d_ell = {:.4}, empirical nuisance EER = {:.4} over {} eval items",
        kind.name(),
        summary.d_ell,
        empirical,
        run.scores.len()
    );
    Ok(())
}
