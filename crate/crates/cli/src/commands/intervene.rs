use std::fs;
use std::path::PathBuf;

use biasaudit::intervene::{
    apply_plan, assign, config_from_name, grid_plans, ApplyOptions, ConfigQuadruple, TrainCorner,
};
use biasaudit::manifest::load_manifest;
use biasaudit::report::fmt_float;

use crate::config::ConfigFile;
use crate::{data, usage, CliError, InterventionArgs};

pub struct Params {
    pub manifest: PathBuf,
    pub config: Option<String>,
    pub rho: Option<String>,
    pub grid: Option<String>,
    pub train_corner: String,
    pub intervention: InterventionArgs,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub config_file: Option<PathBuf>,
}

pub fn run(params: Params) -> Result<(), CliError> {
    let file = ConfigFile::load(params.config_file.as_deref())?;
    let spec = super::resolve_spec(&params.intervention, &file)?;
    let seed = params
        .seed
        .or(file.run.seed)
        .ok_or_else(|| usage("--seed is required"))?;
    let manifest = load_manifest(&params.manifest).map_err(data)?;

    let mode_count = [
        params.config.is_some(),
        params.rho.is_some(),
        params.grid.is_some(),
    ]
    .iter()
    .filter(|&&b| b)
    .count();
    if mode_count != 1 {
        return Err(usage(
            "give exactly one of --config NAME, --rho A,B,C,D, or --grid LIST",
        ));
    }

    if let Some(axis_text) = &params.grid {
        let axis = super::parse_f64_list(axis_text)?;
        let corner = TrainCorner::from_name(&params.train_corner)
            .ok_or_else(|| usage(format!("unknown train corner {:?}", params.train_corner)))?;
        let mut points = Vec::new();
        for &te_neg in &axis {
            for &te_pos in &axis {
                points.push((te_neg, te_pos));
            }
        }
        let plans = grid_plans(&manifest, &spec, corner, &points, seed).map_err(data)?;
        fs::create_dir_all(&params.out)
            .map_err(|e| data(anyhow::anyhow!("cannot create {}: {e}", params.out.display())))?;
        let mut index = String::from("cell,rho_test_neg,rho_test_pos,dir\n");
        for (plan, (i, j)) in plans.iter().zip(
            (0..axis.len()).flat_map(|i| (0..axis.len()).map(move |j| (i, j))),
        ) {
            let cell = format!("cell_{i}_{j}");
            let cell_dir = params.out.join(&cell);
            apply_plan(&manifest, plan, &cell_dir, &ApplyOptions::default()).map_err(data)?;
            index.push_str(&format!(
                "{cell},{},{},{}\n",
                fmt_float(plan.config.rho[2]),
                fmt_float(plan.config.rho[3]),
                cell_dir.display()
            ));
        }
        fs::write(params.out.join("grid_index.csv"), index)
            .map_err(|e| data(anyhow::anyhow!("cannot write grid index: {e}")))?;
        println!("wrote {} grid cells under {}", plans.len(), params.out.display());
        return Ok(());
    }

    let config = if let Some(name) = &params.config {
        config_from_name(name).map_err(data)?
    } else {
        let values = super::parse_f64_list(params.rho.as_deref().unwrap())?;
        if values.len() != 4 {
            return Err(usage("--rho needs exactly four probabilities"));
        }
        ConfigQuadruple::from_rho([values[0], values[1], values[2], values[3]]).map_err(data)?
    };
    let plan = assign(&manifest, &spec, &config, seed).map_err(data)?;
    let outcome = apply_plan(&manifest, &plan, &params.out, &ApplyOptions::default()).map_err(data)?;
    let n_intervened = outcome
        .receipt
        .rows
        .iter()
        .filter(|r| r.intervened)
        .count();
    println!(
        "config {}: intervened {n_intervened}/{} items; receipt at {}",
        config.name,
        outcome.manifest.len(),
        params.out.join("receipt.csv").display()
    );
    Ok(())
}
