//! Plan receipts: a delimited-text record of every assignment decision plus
//! the header needed to re-derive the plan from scratch.

use std::collections::BTreeMap;

use crate::manifest::{DatasetManifest, Subset};

use super::{
    ConfigQuadruple, ControlDist, Decision, InterveneError, InterventionKind, InterventionPlan,
    InterventionSpec,
};

pub const RECEIPT_ROW_HEADER: &str = "id,subset,intervened,kind,z";
const RECEIPT_MAGIC: &str = "# biasaudit plan receipt v1";

/// One receipt row.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiptRow {
    pub id: String,
    pub subset: Subset,
    pub intervened: bool,
    pub z: Option<f64>,
}

/// The receipt: spec, config and master seed plus the realized per-item
/// decisions, in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanReceipt {
    pub spec: InterventionSpec,
    pub config: ConfigQuadruple,
    pub master_seed: u64,
    pub rows: Vec<ReceiptRow>,
}

fn control_to_text(dist: &ControlDist) -> String {
    match dist {
        ControlDist::None => "none".to_string(),
        ControlDist::Uniform { lo, hi } => format!("uniform:{lo},{hi}"),
        ControlDist::Discrete(values) => {
            let items: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
            format!("discrete:{}", items.join(","))
        }
    }
}

fn control_from_text(text: &str, line: usize) -> Result<ControlDist, InterveneError> {
    let parse_err = |message: String| InterveneError::ReceiptParse { line, message };
    if text == "none" {
        return Ok(ControlDist::None);
    }
    if let Some(rest) = text.strip_prefix("uniform:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 2 {
            return Err(parse_err(format!("bad uniform control {text:?}")));
        }
        let lo = parts[0]
            .parse()
            .map_err(|e| parse_err(format!("bad lo: {e}")))?;
        let hi = parts[1]
            .parse()
            .map_err(|e| parse_err(format!("bad hi: {e}")))?;
        return Ok(ControlDist::Uniform { lo, hi });
    }
    if let Some(rest) = text.strip_prefix("discrete:") {
        let values = rest
            .split(',')
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| parse_err(format!("bad discrete set: {e}")))?;
        return Ok(ControlDist::Discrete(values));
    }
    Err(parse_err(format!("unknown control distribution {text:?}")))
}

impl PlanReceipt {
    pub fn from_plan(manifest: &DatasetManifest, plan: &InterventionPlan) -> Self {
        let subsets: BTreeMap<&str, Subset> = manifest
            .items()
            .iter()
            .map(|i| (i.id.as_str(), i.subset()))
            .collect();
        // BTreeMap iteration keeps rows in id order.
        let rows = plan
            .decisions
            .iter()
            .filter_map(|(id, d)| {
                subsets.get(id.as_str()).map(|&subset| ReceiptRow {
                    id: id.clone(),
                    subset,
                    intervened: d.intervene,
                    z: d.z,
                })
            })
            .collect();
        PlanReceipt {
            spec: plan.spec.clone(),
            config: plan.config.clone(),
            master_seed: plan.master_seed,
            rows,
        }
    }

    /// Reconstruct the decision mapping recorded in the rows.
    pub fn decisions(&self) -> BTreeMap<String, Decision> {
        self.rows
            .iter()
            .map(|r| {
                (
                    r.id.clone(),
                    Decision {
                        intervene: r.intervened,
                        z: r.z,
                    },
                )
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let rho: Vec<String> = self.config.rho.iter().map(|p| format!("{p}")).collect();
        let mut out = String::new();
        out.push_str(RECEIPT_MAGIC);
        out.push('\n');
        out.push_str(&format!("# kind={}\n", self.spec.kind.name()));
        out.push_str(&format!(
            "# control={}\n",
            control_to_text(&self.spec.control_dist)
        ));
        if let Some(cmd) = &self.spec.codec_cmd {
            out.push_str(&format!("# codec_cmd={cmd}\n"));
        }
        out.push_str(&format!("# config={}\n", self.config.name));
        out.push_str(&format!("# rho={}\n", rho.join(",")));
        out.push_str(&format!("# master_seed={}\n", self.master_seed));
        out.push_str(RECEIPT_ROW_HEADER);
        out.push('\n');
        for r in &self.rows {
            let kind = if r.intervened {
                self.spec.kind.name()
            } else {
                ""
            };
            let z = r.z.map(|z| format!("{z}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.id,
                r.subset.name(),
                r.intervened as u8,
                kind,
                z
            ));
        }
        out
    }
}

/// Write-side counterpart of [`PlanReceipt::to_text`].
pub fn receipt_to_text(receipt: &PlanReceipt) -> String {
    receipt.to_text()
}

/// Parse a receipt produced by [`PlanReceipt::to_text`].
pub fn parse_receipt(text: &str) -> Result<PlanReceipt, InterveneError> {
    let mut kind = None;
    let mut control = None;
    let mut codec_cmd = None;
    let mut config_name = None;
    let mut rho = None;
    let mut master_seed = None;
    let mut rows = Vec::new();
    let mut saw_header = false;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let parse_err = |message: String| InterveneError::ReceiptParse {
            line: lineno,
            message,
        };
        if idx == 0 {
            if line != RECEIPT_MAGIC {
                return Err(parse_err("not a plan receipt".into()));
            }
            continue;
        }
        if let Some(meta) = line.strip_prefix("# ") {
            let (key, value) = meta
                .split_once('=')
                .ok_or_else(|| parse_err(format!("bad metadata line {meta:?}")))?;
            match key {
                "kind" => {
                    kind = Some(InterventionKind::from_name(value).ok_or_else(|| {
                        parse_err(format!("unknown intervention kind {value:?}"))
                    })?)
                }
                "control" => control = Some(control_from_text(value, lineno)?),
                "codec_cmd" => codec_cmd = Some(value.to_string()),
                "config" => config_name = Some(value.to_string()),
                "rho" => {
                    let values = value
                        .split(',')
                        .map(|v| v.parse::<f64>())
                        .collect::<Result<Vec<f64>, _>>()
                        .map_err(|e| parse_err(format!("bad rho: {e}")))?;
                    if values.len() != 4 {
                        return Err(parse_err("rho must have four entries".into()));
                    }
                    rho = Some([values[0], values[1], values[2], values[3]]);
                }
                "master_seed" => {
                    master_seed = Some(
                        value
                            .parse::<u64>()
                            .map_err(|e| parse_err(format!("bad master_seed: {e}")))?,
                    )
                }
                other => return Err(parse_err(format!("unknown metadata key {other:?}"))),
            }
            continue;
        }
        if line == RECEIPT_ROW_HEADER {
            saw_header = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            return Err(parse_err("row before header".into()));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(parse_err(format!("expected 5 fields, got {}", fields.len())));
        }
        let subset = Subset::from_name(fields[1])
            .ok_or_else(|| parse_err(format!("unknown subset {:?}", fields[1])))?;
        let intervened = match fields[2] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(format!("bad intervened bit {other:?}"))),
        };
        let z = if fields[4].is_empty() {
            None
        } else {
            Some(
                fields[4]
                    .parse::<f64>()
                    .map_err(|e| parse_err(format!("bad z: {e}")))?,
            )
        };
        rows.push(ReceiptRow {
            id: fields[0].to_string(),
            subset,
            intervened,
            z,
        });
    }

    let missing = |what: &str| InterveneError::ReceiptParse {
        line: 0,
        message: format!("missing {what} metadata"),
    };
    let kind = kind.ok_or_else(|| missing("kind"))?;
    let control = control.ok_or_else(|| missing("control"))?;
    let rho = rho.ok_or_else(|| missing("rho"))?;
    let name = config_name.ok_or_else(|| missing("config"))?;
    let master_seed = master_seed.ok_or_else(|| missing("master_seed"))?;
    Ok(PlanReceipt {
        spec: InterventionSpec {
            kind,
            control_dist: control,
            codec_cmd,
        },
        config: ConfigQuadruple { rho, name },
        master_seed,
        rows,
    })
}
