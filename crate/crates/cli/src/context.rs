use std::fs::{self, File};
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use serde::Serialize;

use sdpolicy_core::{ModelSpec, PolicyProblem, PriorSpec, RuleFamily};

use crate::config::RunConfig;

pub const DEFAULT_SEED: u64 = 42;

/// Resolved global options.
pub struct Context {
    pub seed: u64,
    pub out: PathBuf,
    pub config: RunConfig,
}

impl Context {
    pub fn new(seed: Option<u64>, out: Option<PathBuf>, config: Option<&Path>) -> Result<Self> {
        let config = match config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Ok(Self {
            seed: seed.or(config.seed).unwrap_or(DEFAULT_SEED),
            out: out.or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
            config,
        })
    }

    pub fn model(&self, flag: Option<&str>) -> Result<ModelSpec> {
        let name = flag.or(self.config.model.as_deref()).unwrap_or("nk3");
        ModelSpec::load(name).with_context(|| format!("loading model `{name}`"))
    }

    pub fn prior(&self, flag: Option<&str>) -> Result<PriorSpec> {
        let name = flag.or(self.config.prior.as_deref()).unwrap_or("nk3");
        PriorSpec::load(name).with_context(|| format!("loading prior `{name}`"))
    }

    pub fn draws(&self, flag: Option<usize>, default: usize) -> Result<usize> {
        let n = flag.or(self.config.draws).unwrap_or(default);
        anyhow::ensure!(n >= 1, "draw count must be at least 1");
        Ok(n)
    }

    /// Problem with the configured loss weights and optimizer settings.
    pub fn problem(&self, spec: &ModelSpec, family: RuleFamily) -> Result<PolicyProblem> {
        let mut p = PolicyProblem::new(spec, family)?;
        if let Some(weights) = &self.config.weights {
            p.weights.clear();
            for (role, w) in weights {
                p.set_weight(role, *w)?;
            }
        }
        if let Some(o) = &self.config.optimizer {
            let s = &mut p.search;
            s.grid_points = o.grid_points.unwrap_or(s.grid_points);
            s.max_evals = o.max_evals.unwrap_or(s.max_evals);
            s.xtol = o.xtol.unwrap_or(s.xtol);
            s.ftol = o.ftol.unwrap_or(s.ftol);
            p.penalty = o.penalty.unwrap_or(p.penalty);
        }
        Ok(p)
    }

    pub fn path(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(name))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name)?;
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Writes a header and rows; every field goes through `Display`.
    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.path(name)?;
        let file = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Parses `name=value` pairs.
pub fn parse_assignment(text: &str) -> Result<(String, f64)> {
    let (name, value) = text
        .split_once('=')
        .with_context(|| format!("expected name=value, got `{text}`"))?;
    let v: f64 = value
        .trim()
        .parse()
        .with_context(|| format!("`{value}` is not a number"))?;
    Ok((name.trim().to_string(), v))
}
