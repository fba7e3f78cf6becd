//! Run configuration read with `--config`. Every field is optional and
//! command-line flags take precedence. The schema is in
//! `docs/config.schema.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use sdpolicy_core::dominance::MAX_ORDER;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in model name or model file.
    pub model: Option<String>,
    /// Built-in prior name or prior file.
    pub prior: Option<String>,
    pub rules: Option<Vec<String>>,
    pub draws: Option<usize>,
    pub seed: Option<u64>,
    pub kmax: Option<usize>,
    pub out: Option<PathBuf>,
    /// Loss weight per role.
    pub weights: Option<BTreeMap<String, f64>>,
    pub optimizer: Option<OptimizerConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub grid_points: Option<usize>,
    pub max_evals: Option<usize>,
    pub xtol: Option<f64>,
    pub ftol: Option<f64>,
    pub penalty: Option<f64>,
}

const BUILTINS: [&str; 1] = ["nk3"];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for file in [&self.model, &self.prior].into_iter().flatten() {
            if !BUILTINS.contains(&file.as_str()) && !Path::new(file).exists() {
                bail!("referenced file `{file}` does not exist");
            }
        }
        if self.draws == Some(0) {
            bail!("draw count must be at least 1");
        }
        if let Some(k) = self.kmax {
            check_kmax(k)?;
        }
        Ok(())
    }
}

pub fn check_kmax(k: usize) -> Result<()> {
    if !(1..=MAX_ORDER).contains(&k) {
        bail!("kmax {k} outside 1..={MAX_ORDER}");
    }
    Ok(())
}
