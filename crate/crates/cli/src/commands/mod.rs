pub mod eer;
pub mod fit;
pub mod intervene;
pub mod nuisance;
pub mod toy;
pub mod trials;

use biasaudit::intervene::{ControlDist, InterventionKind, InterventionSpec};

use crate::config::ConfigFile;
use crate::{usage, CliError, InterventionArgs};

/// Resolve the intervention spec from flags over config-file values over
/// per-kind defaults.
pub fn resolve_spec(
    args: &InterventionArgs,
    file: &ConfigFile,
) -> Result<InterventionSpec, CliError> {
    let kind_name = args
        .kind
        .clone()
        .or_else(|| file.intervention.kind.clone())
        .ok_or_else(|| usage("an intervention --kind is required"))?;
    let kind = InterventionKind::from_name(&kind_name)
        .ok_or_else(|| usage(format!("unknown intervention kind {kind_name:?}")))?;
    let mut spec = InterventionSpec::with_defaults(kind);

    let lo = args.lo.or(file.intervention.lo);
    let hi = args.hi.or(file.intervention.hi);
    if lo.is_some() || hi.is_some() {
        match spec.control_dist {
            ControlDist::Uniform {
                lo: default_lo,
                hi: default_hi,
            } => {
                spec.control_dist = ControlDist::Uniform {
                    lo: lo.unwrap_or(default_lo),
                    hi: hi.unwrap_or(default_hi),
                }
            }
            _ => return Err(usage(format!("{kind_name} takes no --lo/--hi interval"))),
        }
    }
    let bitrates = match &args.bitrates {
        Some(text) => Some(parse_f64_list(text)?),
        None => file.intervention.bitrates.clone(),
    };
    if let Some(values) = bitrates {
        if kind != InterventionKind::ExternalCodec {
            return Err(usage(format!("{kind_name} takes no --bitrates set")));
        }
        if values.is_empty() {
            return Err(usage("--bitrates must not be empty"));
        }
        spec.control_dist = ControlDist::Discrete(values);
    }
    spec.codec_cmd = args
        .codec_cmd
        .clone()
        .or_else(|| file.intervention.codec_cmd.clone());
    spec.validate().map_err(crate::data)?;
    Ok(spec)
}

pub fn parse_f64_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| usage(format!("bad number {v:?}: {e}")))
        })
        .collect()
}
