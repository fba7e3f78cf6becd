use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use serde_json::{json, Value};

use sdpolicy_core::portfolio::{is_sd_efficient, portfolio_return_dist, Efficiency, PortfolioWeights, ReturnsPanel};

use crate::context::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Scenario returns: one column per asset, optional `probability` column.
    #[arg(long)]
    returns: PathBuf,
    /// Comma-separated portfolio weights (default: equal).
    #[arg(long, value_delimiter = ',')]
    weights: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Lattice step is 1/resolution.
    #[arg(long, default_value_t = 10)]
    resolution: usize,
    /// Extra uniformly random candidates.
    #[arg(long, default_value_t = 1000)]
    tries: usize,
}

pub fn load_panel(path: &Path) -> Result<ReturnsPanel> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(ReturnsPanel::from_csv(file)?)
}

/// Explicit weights, or the pure portfolio of `column`, or equal weights.
pub fn weights_for(panel: &ReturnsPanel, weights: &[f64], column: Option<&str>) -> Result<PortfolioWeights> {
    if let Some(c) = column {
        if !weights.is_empty() {
            bail!("give either --column or --weights");
        }
        let i = panel
            .labels()
            .iter()
            .position(|l| l == c)
            .with_context(|| format!("no asset column `{c}`"))?;
        return Ok(PortfolioWeights::pure(panel.assets(), i));
    }
    if weights.is_empty() {
        return Ok(PortfolioWeights::equal(panel.assets()));
    }
    Ok(PortfolioWeights::new(weights.to_vec())?)
}

pub fn run(ctx: &Context, args: Args) -> Result<Value> {
    let panel = load_panel(&args.returns)?;
    let tau = weights_for(&panel, &args.weights, None)?;
    let report = is_sd_efficient(&panel, &tau, args.order, args.resolution, args.tries, ctx.seed)?;
    let dist = portfolio_return_dist(&panel, &tau)?;
    let rows: Vec<Vec<String>> = dist
        .atoms()
        .map(|(x, w)| vec![x.to_string(), w.to_string()])
        .collect();
    let dist_path = ctx.write_csv("portfolio_returns.csv", &["return", "probability"], &rows)?;
    let path = ctx.write_json("portfolio.json", &json!({ "assets": panel.labels(), "report": report }))?;
    Ok(json!({
        "command": "portfolio",
        "efficient": report.verdict == Efficiency::EfficientAtResolution,
        "dominating": report.dominating,
        "candidates": report.candidates,
        "outputs": [path, dist_path],
    }))
}
