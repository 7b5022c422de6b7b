//! Per-run report and atomic file output.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::Result;
use crate::fairness::{FairnessMetrics, GroupRate};

/// One evaluated run. `acc` is a fraction; `d_sp` and `d_eo` are in percent.
/// The number of evaluated nodes is the sum of the group counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairnessReport {
    pub dataset: String,
    pub missing_rate: f64,
    pub seed: u64,
    pub acc: f64,
    pub d_sp: f64,
    pub d_eo: f64,
    pub group_rates: Vec<GroupRate>,
    pub config: TrainConfig,
    pub runtime_s: f64,
}

impl FairnessReport {
    pub fn new(dataset: &str, config: &TrainConfig, metrics: FairnessMetrics, runtime_s: f64) -> Self {
        Self {
            dataset: dataset.to_string(),
            missing_rate: config.missing_rate,
            seed: config.seed,
            acc: metrics.accuracy,
            d_sp: 100.0 * metrics.delta_sp,
            d_eo: 100.0 * metrics.delta_eo,
            group_rates: metrics.group_rates,
            config: config.clone(),
            runtime_s,
        }
    }

    pub fn n_eval(&self) -> usize {
        self.group_rates.iter().map(|g| g.count).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into place,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
