use std::path::PathBuf;

use anyhow::{bail, Result};
use serde_json::{json, Value};

use sdpolicy_core::dominance::{omega_ratio, var_cvar, DominanceError};
use sdpolicy_core::portfolio::portfolio_return_dist;

use super::portfolio::{load_panel, weights_for};
use crate::context::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Scenario returns, same layout as for `portfolio`.
    #[arg(long)]
    returns: PathBuf,
    /// Analyse a single asset column.
    #[arg(long)]
    column: Option<String>,
    /// Comma-separated portfolio weights (default: equal).
    #[arg(long, value_delimiter = ',')]
    weights: Vec<f64>,
    /// Comma-separated thresholds; default is an even grid over the support.
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<f64>,
    /// Points of the default threshold grid.
    #[arg(long, default_value_t = 21)]
    grid: usize,
    /// Level of VaR and CVaR of the loss `-R`.
    #[arg(long, default_value_t = 0.95)]
    alpha: f64,
}

pub fn run(ctx: &Context, args: Args) -> Result<Value> {
    let panel = load_panel(&args.returns)?;
    let w = weights_for(&panel, &args.weights, args.column.as_deref())?;
    let dist = portfolio_return_dist(&panel, &w)?;
    let thresholds = if args.thresholds.is_empty() {
        if args.grid < 2 {
            bail!("threshold grid needs at least two points");
        }
        let (lo, hi) = (dist.min(), dist.max());
        (0..args.grid)
            .map(|i| lo + (hi - lo) * i as f64 / (args.grid - 1) as f64)
            .collect()
    } else {
        args.thresholds
    };
    let mut rows = Vec::with_capacity(thresholds.len());
    for &t in &thresholds {
        let omega = match omega_ratio(&dist, t) {
            Ok(v) => v,
            Err(DominanceError::OmegaUndefined(_)) => f64::NAN,
            Err(e) => return Err(e.into()),
        };
        rows.push(vec![t.to_string(), omega.to_string()]);
    }
    let curve = ctx.write_csv("omega.csv", &["threshold", "omega"], &rows)?;
    let mean = dist.mean();
    let (var, cvar) = var_cvar(&dist.negated(), args.alpha)?;
    let omega_at_mean = omega_ratio(&dist, mean).ok();
    let report = json!({
        "weights": w,
        "mean": mean,
        "omega_at_mean": omega_at_mean,
        "alpha": args.alpha,
        "var": var,
        "cvar": cvar,
    });
    let path = ctx.write_json("risk.json", &report)?;
    Ok(json!({
        "command": "omega",
        "mean": mean,
        "omega_at_mean": omega_at_mean,
        "var": var,
        "cvar": cvar,
        "outputs": [curve, path],
    }))
}
