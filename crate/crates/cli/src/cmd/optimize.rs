use anyhow::Result;
use serde_json::{json, Value};

use sdpolicy_core::uncertainty::sample_prior;
use sdpolicy_core::ParameterDraw;

use super::{family, optimize_family};
use crate::context::Context;
use crate::error::Halt;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    prior: Option<String>,
    #[arg(long)]
    rule: String,
    /// Prior draws (default 20).
    #[arg(long)]
    draws: Option<usize>,
    /// Optimise at the model calibration only.
    #[arg(long, conflicts_with = "draws")]
    calibration: bool,
}

pub fn run(ctx: &Context, args: Args) -> Result<Value> {
    let spec = ctx.model(args.model.as_deref())?;
    let family = family(&args.rule)?;
    let draws = if args.calibration {
        vec![ParameterDraw::new()]
    } else {
        let prior = ctx.prior(args.prior.as_deref())?;
        sample_prior(&prior, ctx.draws(args.draws, 20)?, ctx.seed)?
    };
    let (dist, per_draw) = optimize_family(ctx, &spec, family, &draws)?;
    let path = ctx.write_json(
        "optimize.json",
        &json!({ "distribution": dist, "draws": per_draw }),
    )?;
    if dist.values.is_empty() {
        return Err(Halt::Infeasible(format!("{family} is indeterminate on every draw")).into());
    }
    let n = dist.values.len() as f64;
    Ok(json!({
        "command": "optimize",
        "family": family,
        "draws": dist.draw_count,
        "dropped": dist.dropped,
        "mean_loss": dist.values.iter().sum::<f64>() / n,
        "min_loss": dist.values.iter().copied().fold(f64::INFINITY, f64::min),
        "max_loss": dist.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "outputs": [path, ctx.out.join(format!("losses_{}.csv", family.name()))],
    }))
}
