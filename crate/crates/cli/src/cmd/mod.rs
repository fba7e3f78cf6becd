pub mod estimate;
pub mod omega;
pub mod optimize;
pub mod portfolio;
pub mod protocol;
pub mod rank;
pub mod solve;

use anyhow::{Context as _, Result};
use nalgebra::DMatrix;

use sdpolicy_core::optimizer::loss_distribution;
use sdpolicy_core::{LossDistribution, ModelSpec, OptimalDraw, ParameterDraw, RuleCoefficients, RuleFamily};

use crate::context::Context;

pub fn family(name: &str) -> Result<RuleFamily> {
    name.parse().with_context(|| format!("rule `{name}`"))
}

/// Family defaults with `name=value` overrides applied.
pub fn coefficients(family: RuleFamily, overrides: &[String]) -> Result<RuleCoefficients> {
    let mut c = RuleCoefficients::defaults(family);
    for o in overrides {
        c.apply_override(o)?;
    }
    Ok(c)
}

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Optimises `family` on every draw and writes `losses_<family>.csv`.
pub fn optimize_family(
    ctx: &Context,
    spec: &ModelSpec,
    family: RuleFamily,
    draws: &[ParameterDraw],
) -> Result<(LossDistribution, Vec<OptimalDraw>)> {
    let problem = ctx.problem(spec, family)?;
    let (mut dist, per_draw) = loss_distribution(&problem, draws)?;
    dist.seed = Some(ctx.seed);
    let names: Vec<&str> = problem.bounds.names.iter().map(String::as_str).collect();
    let mut header = vec!["draw", "loss", "determinate"];
    header.extend(&names);
    let rows: Vec<Vec<String>> = per_draw
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let mut r = vec![i.to_string(), d.loss.to_string(), d.determinate.to_string()];
            r.extend(names.iter().map(|n| d.phi_min.get(n).map_or(String::new(), |v| v.to_string())));
            r
        })
        .collect();
    ctx.write_csv(&format!("losses_{}.csv", family.name()), &header, &rows)?;
    Ok((dist, per_draw))
}
