use std::fs::File;
use std::path::PathBuf;

use anyhow::{Context as _, Result};
use serde::Serialize;
use serde_json::{json, Value};

use sdpolicy_core::lre::simulate_observables;
use sdpolicy_core::rng::substream_seed;
use sdpolicy_core::uncertainty::{rwmh_posterior, DataPanel, McmcSettings};
use sdpolicy_core::ParameterDraw;

use super::{coefficients, family};
use crate::context::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    prior: Option<String>,
    #[arg(long, default_value = "Taylor")]
    rule: String,
    #[arg(long = "set")]
    set: Vec<String>,
    /// CSV with one column per model observable; without it data are
    /// simulated at the model calibration.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Periods to simulate when no data file is given.
    #[arg(long, default_value_t = 200)]
    simulate: usize,
    #[arg(long, default_value_t = 20_000)]
    chain: usize,
    #[arg(long, default_value_t = 5_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 10)]
    thin: usize,
    /// Proposal sd as a multiple of each prior sd.
    #[arg(long, default_value_t = 0.2)]
    scale: f64,
}

#[derive(Serialize)]
struct Marginal {
    parameter: String,
    mean: f64,
    sd: f64,
    q05: f64,
    q50: f64,
    q95: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn run(ctx: &Context, args: Args) -> Result<Value> {
    let spec = ctx.model(args.model.as_deref())?;
    let prior = ctx.prior(args.prior.as_deref())?;
    let family = family(&args.rule)?;
    let phi = coefficients(family, &args.set)?;
    let problem = ctx.problem(&spec, family)?;
    let observables: Vec<String> = spec.observables.iter().map(|o| o.name.clone()).collect();
    let mut outputs = Vec::new();
    let y = match &args.data {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            DataPanel::from_csv(file)?.select(&observables)?
        }
        None => {
            let ss = problem.bind(&ParameterDraw::new())?.state_space(&phi)?;
            let y = simulate_observables(&ss, args.simulate, substream_seed(ctx.seed, 0))?;
            let rows: Vec<Vec<String>> = y.row_iter().map(|r| r.iter().map(f64::to_string).collect()).collect();
            let header: Vec<&str> = observables.iter().map(String::as_str).collect();
            outputs.push(ctx.write_csv("observations.csv", &header, &rows)?);
            y
        }
    };
    let settings = McmcSettings {
        chain_len: args.chain,
        proposal_scale: args.scale,
        burn_in: args.burn_in,
        thin: args.thin,
    };
    let bind = |d: &ParameterDraw| problem.bind(d).and_then(|b| b.state_space(&phi));
    let post = rwmh_posterior(&prior, &y, bind, settings, substream_seed(ctx.seed, 1))?;

    let mut rows = Vec::new();
    for (i, d) in post.draws.iter().enumerate() {
        for (name, v) in d.iter() {
            rows.push(vec![i.to_string(), name.to_string(), v.to_string()]);
        }
    }
    outputs.push(ctx.write_csv("posterior.csv", &["draw", "parameter", "value"], &rows)?);
    let marginals: Vec<Marginal> = prior
        .names()
        .map(|name| {
            let mut v = post.values(name);
            v.sort_by(f64::total_cmp);
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            Marginal {
                parameter: name.to_string(),
                mean,
                sd,
                q05: quantile(&v, 0.05),
                q50: quantile(&v, 0.5),
                q95: quantile(&v, 0.95),
            }
        })
        .collect();
    let report = json!({
        "family": family,
        "observations": y.nrows(),
        "acceptance_rate": post.acceptance_rate,
        "kept": post.kept,
        "burn_in": post.burn_in,
        "thin": post.thin,
        "seed": ctx.seed,
        "marginals": marginals,
    });
    outputs.push(ctx.write_json("estimate.json", &report)?);
    Ok(json!({
        "command": "estimate",
        "acceptance_rate": post.acceptance_rate,
        "kept": post.kept,
        "outputs": outputs,
    }))
}
