use std::fs;
use std::path::Path;

use biasaudit::manifest::{build_asv_trials, load_manifest, trials_to_text, TrialFlags};

use crate::{data, usage, CliError};

fn parse_flags(text: &str, what: &str) -> Result<TrialFlags, CliError> {
    let bits: Vec<u8> = text
        .chars()
        .map(|c| match c {
            '0' => Ok(0u8),
            '1' => Ok(1u8),
            other => Err(usage(format!("{what}: bad flag bit {other:?}"))),
        })
        .collect::<Result<_, _>>()?;
    if bits.len() != 3 {
        return Err(usage(format!("{what} must be three bits RGC, e.g. 011")));
    }
    Ok(TrialFlags::new(bits[0], bits[1], bits[2]))
}

pub fn run(
    manifest_path: &Path,
    target_flags: &str,
    nontarget_flags: &str,
    max_trials: Option<usize>,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let manifest = load_manifest(manifest_path).map_err(data)?;
    let target = parse_flags(target_flags, "--target-flags")?;
    let nontarget = parse_flags(nontarget_flags, "--nontarget-flags")?;
    let trials = build_asv_trials(&manifest, target, nontarget, max_trials, seed).map_err(data)?;
    fs::write(out, trials_to_text(&trials))
        .map_err(|e| data(anyhow::anyhow!("cannot write {}: {e}", out.display())))?;
    let targets = trials.iter().filter(|t| t.is_target).count();
    println!(
        "wrote {targets} target + {} nontarget trials to {}",
        trials.len() - targets,
        out.display()
    );
    Ok(())
}
