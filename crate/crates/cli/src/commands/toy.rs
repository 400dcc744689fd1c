use std::fs;
use std::path::Path;

use biasaudit::intervene::{
    apply_plan, assign, config_from_name, delta_features, ApplyOptions,
};
use biasaudit::lme::{build_design, fit_reml, ModelFormula};
use biasaudit::metrics::{eer, ScoredTrials};
use biasaudit::report::{
    eer_report_to_text, fit_report_to_text, fmt_float, score_table_from_text, TextTable,
};
use biasaudit::toy::{generate_corpus, score_eval_split, train_toy, CorpusSpec};

use crate::config::ConfigFile;
use crate::{data, usage, CliError, CorpusArgs, InterventionArgs};

fn resolve_corpus(
    args: &CorpusArgs,
    seed: Option<u64>,
    file: &ConfigFile,
) -> CorpusSpec {
    let defaults = CorpusSpec::default();
    CorpusSpec {
        n_per_cell: args
            .n_per_cell
            .or(file.corpus.n_per_cell)
            .unwrap_or(defaults.n_per_cell),
        duration_s: args
            .duration
            .or(file.corpus.duration_s)
            .unwrap_or(defaults.duration_s),
        class_separation: args
            .separation
            .or(file.corpus.class_separation)
            .unwrap_or(defaults.class_separation),
        n_speakers: args
            .speakers
            .or(file.corpus.n_speakers)
            .unwrap_or(defaults.n_speakers),
        n_attacks: args
            .attacks
            .or(file.corpus.n_attacks)
            .unwrap_or(defaults.n_attacks),
        seed: seed.or(file.corpus.seed).unwrap_or(defaults.seed),
    }
}

pub fn run_gen(
    out: &Path,
    corpus: &CorpusArgs,
    seed: Option<u64>,
    config_file: Option<&Path>,
) -> Result<(), CliError> {
    let file = ConfigFile::load(config_file)?;
    let spec = resolve_corpus(corpus, seed, &file);
    let manifest = generate_corpus(&spec, out).map_err(data)?;
    println!(
        "generated {} items ({} per cell) under {}",
        manifest.len(),
        spec.n_per_cell,
        out.display()
    );
    Ok(())
}

const SCORE_COLUMNS: [&str; 9] = [
    "id",
    "score",
    "y_cls",
    "delta_pos",
    "delta_neg",
    "speaker",
    "attack",
    "config",
    "intervention",
];

pub fn run_demo(
    out: &Path,
    configs: &str,
    corpus: &CorpusArgs,
    intervention: &InterventionArgs,
    seed: Option<u64>,
    config_file: Option<&Path>,
) -> Result<(), CliError> {
    let file = ConfigFile::load(config_file)?;
    let mut intervention = intervention.clone();
    if intervention.kind.is_none() && file.intervention.kind.is_none() {
        intervention.kind = Some("white_noise".to_string());
    }
    let spec = super::resolve_spec(&intervention, &file)?;
    let corpus_spec = resolve_corpus(corpus, seed, &file);
    let master_seed = seed.or(file.run.seed).unwrap_or(corpus_spec.seed);
    let config_names: Vec<String> = match &file.run.configs {
        Some(from_file) if configs == "O,IT_p,IT_n,IV_pn,IV_np" => from_file.clone(),
        _ => configs.split(',').map(|c| c.trim().to_string()).collect(),
    };
    if config_names.is_empty() {
        return Err(usage("no configurations given"));
    }

    let manifest = generate_corpus(&corpus_spec, &out.join("corpus")).map_err(data)?;
    println!(
        "corpus: {} items, separation {}, seed {}",
        manifest.len(),
        corpus_spec.class_separation,
        corpus_spec.seed
    );

    let mut pooled = TextTable::new(&SCORE_COLUMNS);
    let mut eer_rows: Vec<(Vec<String>, f64)> = Vec::new();
    for name in &config_names {
        let config = config_from_name(name).map_err(data)?;
        let plan = assign(&manifest, &spec, &config, master_seed).map_err(data)?;
        let run_dir = out.join("runs").join(name);
        let outcome = apply_plan(&manifest, &plan, &run_dir, &ApplyOptions::default())
            .map_err(data)?;
        let detector = train_toy(&outcome.manifest).map_err(data)?;
        let scores = score_eval_split(&detector, &outcome.manifest).map_err(data)?;

        let mut per_config = TextTable::new(&SCORE_COLUMNS);
        for (id, score, y) in &scores {
            let item = manifest.get(id).expect("scored item exists");
            let realized = plan.decisions[id].intervene as u8 as f64;
            let deltas = delta_features(realized, &config);
            per_config.push(vec![
                id.clone(),
                fmt_float(*score),
                y.to_string(),
                fmt_float(deltas.delta_pos),
                fmt_float(deltas.delta_neg),
                item.speaker_id.clone().unwrap_or_default(),
                item.attack_id.clone().unwrap_or_default(),
                name.clone(),
                spec.kind.name().to_string(),
            ]);
        }
        let eer_value = eer(&ScoredTrials::new(
            scores.iter().map(|(_, s, y)| (*s, *y)).collect(),
        ))
        .map_err(data)?;
        eer_rows.push((
            vec![name.clone(), spec.kind.name().to_string()],
            eer_value,
        ));
        println!("config {name}: EER = {eer_value:.4}");

        let score_path = out.join(format!("scores_{name}.csv"));
        fs::write(&score_path, per_config.to_text())
            .map_err(|e| data(anyhow::anyhow!("cannot write {}: {e}", score_path.display())))?;
        pooled.rows.extend(per_config.rows);
    }

    fs::write(out.join("scores.csv"), pooled.to_text())
        .map_err(|e| data(anyhow::anyhow!("cannot write pooled scores: {e}")))?;
    fs::write(
        out.join("eer.csv"),
        eer_report_to_text(&eer_rows, &["config".to_string(), "intervention".to_string()]),
    )
    .map_err(|e| data(anyhow::anyhow!("cannot write rate table: {e}")))?;

    // Interventional fit over the pooled scores, z-scored per configuration.
    crate::commands::fit::zscore_cells(&mut pooled)?;
    let score_table = score_table_from_text(&pooled).map_err(data)?;
    let design = build_design(&score_table, &ModelFormula::interventional()).map_err(data)?;
    let fit = fit_reml(&design).map_err(data)?;
    fs::write(out.join("fit.csv"), fit_report_to_text(&fit))
        .map_err(|e| data(anyhow::anyhow!("cannot write fit report: {e}")))?;
    println!(
        "interventional fit: d = {:.4}, beta_bon = {:.4}, beta_spf = {:.4} -> {}",
        fit.coef("d").unwrap_or(f64::NAN),
        fit.coef("beta_bon").unwrap_or(f64::NAN),
        fit.coef("beta_spf").unwrap_or(f64::NAN),
        out.join("fit.csv").display()
    );
    if !fit.converged {
        return Err(CliError::NonConvergence);
    }
    Ok(())
}
