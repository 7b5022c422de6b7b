//! Training and run configuration. Files are flat JSON objects whose keys
//! match the field names; missing keys take the defaults below.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{FairgeError, Result};

/// Hidden widths explored in the training recipe.
pub const HIDDEN_SIZES: [usize; 4] = [16, 32, 64, 128];

/// Missing-rate grid swept by default.
pub const DEFAULT_MISSING_RATES: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Retained eigenpairs (clamped to the node count).
    pub m: usize,
    /// Extra propagated copies `A^1 X .. A^k X` appended to the node inputs.
    pub k_hops: usize,
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub d_m: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub missing_rate: f64,
    pub sensitive_in_features: bool,
    /// Training nodes sampled after the validation and test quarters;
    /// `None` takes the whole remainder.
    pub train_size: Option<usize>,
    /// Disabling removes the spectral branch (the truncation ablation).
    pub spectral: bool,
    pub eig_tol: f64,
    pub eig_max_iter: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            m: 8,
            k_hops: 2,
            layers: 1,
            hidden: 64,
            heads: 2,
            d_m: 16,
            lr: 0.01,
            weight_decay: 5e-4,
            epochs: 300,
            seed: 0,
            missing_rate: 0.0,
            sensitive_in_features: true,
            train_size: None,
            spectral: true,
            eig_tol: 1e-10,
            eig_max_iter: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FairgeError::InvalidArgument(msg));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be finite and nonnegative", self.lr));
        }
        if !(self.weight_decay >= 0.0) {
            return bad(format!("weight decay {} must be nonnegative", self.weight_decay));
        }
        if self.m == 0 || self.layers == 0 || self.hidden == 0 || self.heads == 0 {
            return bad("m, layers, hidden and heads must be positive".into());
        }
        if self.d_m < 2 || !self.d_m.is_multiple_of(2) {
            return bad(format!("d_m={} must be even and at least 2", self.d_m));
        }
        if !self.d_m.is_multiple_of(self.heads) {
            return bad(format!("d_m={} is not divisible by heads={}", self.d_m, self.heads));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return bad(format!("missing rate {} outside [0, 1)", self.missing_rate));
        }
        Ok(())
    }
}

/// Everything a CLI run needs: the training recipe plus inputs, sweep grid
/// and output location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    pub dataset: String,
    pub edges: Option<PathBuf>,
    pub attributes: Option<PathBuf>,
    pub mask_file: Option<PathBuf>,
    pub missing_rates: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            dataset: "dataset".into(),
            edges: None,
            attributes: None,
            mask_file: None,
            missing_rates: DEFAULT_MISSING_RATES.to_vec(),
            seeds: vec![0, 1, 2, 3, 4],
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Parses a flat JSON config, rejecting unknown keys.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let known = serde_json::to_value(RunConfig::default())?;
        if let (Some(given), Some(known)) = (value.as_object(), known.as_object()) {
            if let Some(key) = given.keys().find(|k| !known.contains_key(*k)) {
                return Err(FairgeError::InvalidArgument(format!("unknown config key `{key}`")));
            }
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if let Some(r) = self.missing_rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(FairgeError::InvalidArgument(format!(
                "missing rate {r} outside [0, 1)"
            )));
        }
        if self.seeds.is_empty() {
            return Err(FairgeError::InvalidArgument("at least one seed is required".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_recipe() {
        let c = TrainConfig::default();
        assert_eq!((c.lr, c.weight_decay, c.epochs), (0.01, 5e-4, 300));
        assert!(HIDDEN_SIZES.contains(&c.hidden));
        c.validate().unwrap();
    }

    #[test]
    fn flat_json_with_overrides() {
        let c = RunConfig::from_json(r#"{"hidden": 32, "seeds": [7], "dataset": "toy"}"#).unwrap();
        assert_eq!(c.train.hidden, 32);
        assert_eq!(c.seeds, vec![7]);
        assert_eq!(c.missing_rates.len(), 6);
        assert!(RunConfig::from_json(r#"{"hiden": 32}"#).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = TrainConfig::default();
        c.epochs = 0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.missing_rate = 1.0;
        assert!(c.validate().is_err());
        let mut r = RunConfig::default();
        r.seeds.clear();
        assert!(r.validate().is_err());
    }
}
