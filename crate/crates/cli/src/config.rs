//! Optional structured-text (TOML) config file. Command-line flags override
//! any value given here.

use std::path::Path;

use serde::Deserialize;

use crate::{data, CliError};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub intervention: InterventionSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub n_per_cell: Option<usize>,
    pub duration_s: Option<f64>,
    pub class_separation: Option<f64>,
    pub n_speakers: Option<usize>,
    pub n_attacks: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionSection {
    pub kind: Option<String>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub bitrates: Option<Vec<f64>>,
    pub codec_cmd: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub configs: Option<Vec<String>>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    data(anyhow::anyhow!("cannot read config file {}: {e}", path.display()))
                })?;
                toml::from_str(&text).map_err(|e| {
                    data(anyhow::anyhow!("bad config file {}: {e}", path.display()))
                })
            }
        }
    }
}
