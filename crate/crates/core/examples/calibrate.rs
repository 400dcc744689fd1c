//! Scratch calibration harness for the toy pipeline.

use std::time::Instant;

use biasaudit::intervene::{
    apply_plan, assign, config_from_name, ApplyOptions, InterventionKind, InterventionSpec,
};
use biasaudit::metrics::{eer, ScoredTrials};
use biasaudit::toy::{generate_corpus, score_eval_split, train_toy, CorpusSpec};

fn pipeline_eer(
    manifest: &biasaudit::manifest::DatasetManifest,
    config_name: &str,
    seed: u64,
    dir: &std::path::Path,
) -> f64 {
    let spec = InterventionSpec::with_defaults(InterventionKind::WhiteNoise);
    let config = config_from_name(config_name).unwrap();
    let plan = assign(manifest, &spec, &config, seed).unwrap();
    let out = apply_plan(
        manifest,
        &plan,
        &dir.join(config_name),
        &ApplyOptions::default(),
    )
    .unwrap();
    let det = train_toy(&out.manifest).unwrap();
    let scores = score_eval_split(&det, &out.manifest).unwrap();
    eer(&ScoredTrials::new(
        scores.into_iter().map(|(_, s, y)| (s, y)).collect(),
    ))
    .unwrap()
}

fn main() {
    let n_per_cell: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(200);
    for sep in [0.0, 0.1, 0.2, 0.4, 1.0] {
        for seed in [1u64, 2, 3] {
            let t0 = Instant::now();
            let dir = tempfile::tempdir().unwrap();
            let spec = CorpusSpec {
                n_per_cell,
                duration_s: 1.0,
                class_separation: sep,
                n_speakers: 8,
                n_attacks: 4,
                seed,
            };
            let manifest = generate_corpus(&spec, dir.path()).unwrap();
            let det = train_toy(&manifest).unwrap();
            let scores = score_eval_split(&det, &manifest).unwrap();
            let eer_o = eer(&ScoredTrials::new(
                scores.into_iter().map(|(_, s, y)| (s, y)).collect(),
            ))
            .unwrap();
            let eer_itp = pipeline_eer(&manifest, "IT_p", seed, dir.path());
            let eer_ivpn = pipeline_eer(&manifest, "IV_pn", seed, dir.path());
            println!(
                "sep={sep:.1} seed={seed}: EER(O)={eer_o:.3} EER(IT_p)={eer_itp:.3} EER(IV_pn)={eer_ivpn:.3}  [{:.1}s]",
                t0.elapsed().as_secs_f64()
            );
        }
    }
}
