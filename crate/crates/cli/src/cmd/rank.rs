use anyhow::{bail, Result};
use serde_json::{json, Value};

use sdpolicy_core::dominance::rank_rules;
use sdpolicy_core::uncertainty::sample_prior;

use super::{family, optimize_family};
use crate::config::check_kmax;
use crate::context::Context;
use crate::error::Halt;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    prior: Option<String>,
    /// Comma-separated rule families; at least two.
    #[arg(long, value_delimiter = ',')]
    rules: Vec<String>,
    /// Prior draws shared by all rules (default 50).
    #[arg(long)]
    draws: Option<usize>,
    /// Highest dominance order tested (default 4).
    #[arg(long)]
    kmax: Option<usize>,
}

pub fn run(ctx: &Context, args: Args) -> Result<Value> {
    let names = if args.rules.is_empty() {
        ctx.config.rules.clone().unwrap_or_default()
    } else {
        args.rules
    };
    if names.len() < 2 {
        bail!("rank needs at least two rules, got {}", names.len());
    }
    let families = names.iter().map(|n| family(n)).collect::<Result<Vec<_>>>()?;
    let kmax = args.kmax.or(ctx.config.kmax).unwrap_or(4);
    check_kmax(kmax)?;
    let spec = ctx.model(args.model.as_deref())?;
    let prior = ctx.prior(args.prior.as_deref())?;
    let draws = sample_prior(&prior, ctx.draws(args.draws, 50)?, ctx.seed)?;

    let mut outputs = Vec::new();
    let mut dists = Vec::new();
    let mut summaries = Vec::new();
    for &f in &families {
        let (dist, _) = optimize_family(ctx, &spec, f, &draws)?;
        outputs.push(ctx.out.join(format!("losses_{}.csv", f.name())));
        if dist.values.is_empty() {
            return Err(Halt::Infeasible(format!("{f} is indeterminate on every draw")).into());
        }
        summaries.push(json!({ "family": f, "atoms": dist.values.len(), "dropped": dist.dropped }));
        dists.push((f.name().to_string(), dist.to_empirical()?));
    }
    let ranking = rank_rules(&dists, kmax)?;

    let mut rows = Vec::new();
    for (k, grid) in ranking.results.iter().enumerate() {
        for (i, row) in grid.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if let Some(r) = cell {
                    rows.push(vec![
                        (k + 1).to_string(),
                        ranking.names[i].clone(),
                        ranking.names[j].clone(),
                        r.dominates.to_string(),
                        r.weak.to_string(),
                        r.strict.to_string(),
                        r.max_violation.to_string(),
                    ]);
                }
            }
        }
    }
    outputs.push(ctx.write_csv(
        "ranking.csv",
        &["order", "rule", "versus", "dominates", "weak", "strict", "max_violation"],
        &rows,
    )?);
    outputs.push(ctx.write_json(
        "ranking.json",
        &json!({ "seed": ctx.seed, "draws": draws.len(), "rules": summaries, "ranking": ranking }),
    )?);
    Ok(json!({
        "command": "rank",
        "optimal": ranking.optimal,
        "optimal_order": ranking.optimal_order,
        "min_order": ranking.min_order,
        "outputs": outputs,
    }))
}
