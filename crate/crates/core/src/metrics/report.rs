use std::path::Path;

use serde::{Deserialize, Serialize};

use super::correlation::{CorrelationTable, Reference};
use super::robustness::{BoxStats, SsimSamples};
use crate::cells::CellKind;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::simulator::Season;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportMetadata {
    pub seeds: Vec<u64>,
    /// SHA-256 of the canonical experiment config.
    pub config_hash: String,
    pub reference: Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSummary {
    pub best_epoch: usize,
    pub val_mse: f64,
    pub val_weighted: f64,
    /// MSE of the constant training-mean predictor on the same split.
    pub baseline_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeasonReport {
    pub season: Season,
    /// Fraction of each evaluation road covered before leaving the lane.
    pub completion: Vec<f64>,
    pub correlation: CorrelationTable,
    pub ssim: Vec<SsimSamples>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelReport {
    pub model: String,
    pub kind: CellKind,
    pub validation: Option<ValidationSummary>,
    pub seasons: Vec<SeasonReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub format_version: u32,
    pub metadata: ReportMetadata,
    pub models: Vec<ModelReport>,
}

fn bad(msg: String) -> Error {
    Error::Format(msg)
}

impl MetricsReport {
    pub fn new(metadata: ReportMetadata) -> Self {
        MetricsReport {
            format_version: REPORT_FORMAT_VERSION,
            metadata,
            models: Vec::new(),
        }
    }

    /// Checks value ranges and that every stored aggregate equals its
    /// recomputation from the stored samples.
    pub fn verify(&self) -> Result<()> {
        if self.format_version != REPORT_FORMAT_VERSION {
            return Err(bad(format!("unsupported report format {}", self.format_version)));
        }
        for m in &self.models {
            for s in &m.seasons {
                let at = format!("{} / {}", m.model, s.season);
                let c = &s.correlation;
                if c.runs.iter().flatten().any(|v| !(0.0..=1.0).contains(&v.value)) {
                    return Err(bad(format!("{at}: |corr| outside [0, 1]")));
                }
                let again = CorrelationTable::from_runs(c.reference, c.runs.clone())?;
                if &again != c {
                    return Err(bad(format!("{at}: correlation aggregates differ from their samples")));
                }
                for x in &s.ssim {
                    if x.samples.iter().any(|v| !(-1.0..=1.0).contains(v)) {
                        return Err(bad(format!("{at}: SSIM outside [-1, 1]")));
                    }
                    if BoxStats::from_samples(&x.samples)? != x.summary {
                        return Err(bad(format!("{at}: SSIM summary at variance {} is stale", x.variance)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: MetricsReport = serde_json::from_str(text)?;
        r.verify()?;
        Ok(r)
    }

    /// Long-format SSIM samples: `model,season,variance,frame_index,ssim`.
    pub fn ssim_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "season", "variance", "frame_index", "ssim"])?;
        for m in &self.models {
            for s in &m.seasons {
                for x in &s.ssim {
                    for (i, v) in x.samples.iter().enumerate() {
                        w.write_record([
                            m.model.clone(),
                            s.season.to_string(),
                            x.variance.to_string(),
                            i.to_string(),
                            v.to_string(),
                        ])?;
                    }
                }
            }
        }
        String::from_utf8(w.into_inner().map_err(|e| bad(e.to_string()))?).map_err(|e| bad(e.to_string()))
    }

    /// Writes `report.json` and `ssim.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("report.json"), self.to_json()?.as_bytes())?;
        write_atomic(&dir.join("ssim.csv"), self.ssim_csv()?.as_bytes())
    }
}
