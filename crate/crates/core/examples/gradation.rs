//! Scratch probe: EER along the test-side positive-probability axis under
//! original training.

use biasaudit::intervene::{
    apply_plan, grid_plans, ApplyOptions, InterventionKind, InterventionSpec, TrainCorner,
};
use biasaudit::metrics::{eer, ScoredTrials};
use biasaudit::toy::{generate_corpus, score_eval_split, train_toy, CorpusSpec};

fn main() {
    for seed in [1u64, 2, 3] {
        let dir = tempfile::tempdir().unwrap();
        let corpus = CorpusSpec {
            n_per_cell: 300,
            duration_s: 1.0,
            class_separation: 0.2,
            n_speakers: 8,
            n_attacks: 4,
            seed,
        };
        let manifest = generate_corpus(&corpus, dir.path()).unwrap();
        let spec = InterventionSpec::with_defaults(InterventionKind::WhiteNoise);
        let grid: Vec<(f64, f64)> = [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&p| (0.0, p))
            .collect();
        let plans = grid_plans(&manifest, &spec, TrainCorner::Original, &grid, seed).unwrap();
        // Original training: one detector serves every grid point.
        let out0 = apply_plan(
            &manifest,
            &plans[0],
            &dir.path().join("p0"),
            &ApplyOptions::default(),
        )
        .unwrap();
        let detector = train_toy(&out0.manifest).unwrap();
        let mut line = format!("seed {seed}:");
        for (k, plan) in plans.iter().enumerate() {
            let out = apply_plan(
                &manifest,
                plan,
                &dir.path().join(format!("p{k}")),
                &ApplyOptions::default(),
            )
            .unwrap();
            let scores = score_eval_split(&detector, &out.manifest).unwrap();
            let e = eer(&ScoredTrials::new(
                scores.into_iter().map(|(_, s, y)| (s, y)).collect(),
            ))
            .unwrap();
            line.push_str(&format!(" {:.3}", e));
        }
        println!("{line}");
    }
}
