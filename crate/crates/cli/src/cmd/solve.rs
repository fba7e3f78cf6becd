use anyhow::Result;
use serde::Serialize;
use serde_json::{json, Value};

use sdpolicy_core::lre::{irf, lyapunov, solve_re, LreError};
use sdpolicy_core::rules::rule_to_policy_block;
use sdpolicy_core::{ParameterDraw, RuleCoefficients, RuleFamily};

use super::{coefficients, family, rows_of};
use crate::context::{parse_assignment, Context};
use crate::error::Halt;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Built-in model name or model file.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value = "Taylor")]
    rule: String,
    /// Rule coefficient override, `name=value`; repeatable.
    #[arg(long = "set")]
    set: Vec<String>,
    /// Structural parameter override, `name=value`; repeatable.
    #[arg(long = "param")]
    param: Vec<String>,
    /// Last IRF horizon.
    #[arg(long, default_value_t = 20)]
    horizon: usize,
}

#[derive(Serialize)]
struct SolveReport {
    family: RuleFamily,
    coefficients: RuleCoefficients,
    determinate: bool,
    spectral_radius: f64,
    forward_radius: f64,
    residual: f64,
    iterations: usize,
    state_names: Vec<String>,
    shock_names: Vec<String>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    /// Unconditional variances and welfare loss; absent when indeterminate.
    variances: Option<Vec<f64>>,
    loss: Option<f64>,
}

pub fn run(ctx: &Context, args: Args) -> Result<Value> {
    let spec = ctx.model(args.model.as_deref())?;
    let family = family(&args.rule)?;
    let phi = coefficients(family, &args.set)?;
    let problem = ctx.problem(&spec, family)?;
    let mut theta = ParameterDraw::new();
    for p in &args.param {
        let (name, v) = parse_assignment(p)?;
        theta.insert(name, v);
    }
    let bound = problem.model().bind(&theta.over(problem.base()))?;
    let canonical = bound.canonical(&rule_to_policy_block(&phi, problem.model())?)?;
    let solved = match solve_re(&canonical, problem.solver.tol, problem.solver.max_iter) {
        Ok(s) => s,
        Err(e @ (LreError::NonConvergence { .. } | LreError::Singular(_))) => {
            return Err(Halt::Infeasible(format!("no unique stable solution: {e}")).into())
        }
        Err(e) => return Err(e.into()),
    };
    let (variances, loss) = if solved.determinate {
        let sigma = lyapunov(&solved)?;
        let w = problem.bind(&theta)?.weights().clone();
        (Some(sigma.diagonal().iter().copied().collect()), Some(sigma.diagonal().dot(&w)))
    } else {
        (None, None)
    };
    let report = SolveReport {
        family,
        coefficients: phi,
        determinate: solved.determinate,
        spectral_radius: solved.spectral_radius,
        forward_radius: solved.forward_radius,
        residual: solved.residual,
        iterations: solved.iterations,
        state_names: solved.state_names.clone(),
        shock_names: solved.shock_names.clone(),
        a: rows_of(&solved.a),
        b: rows_of(&solved.b),
        variances,
        loss,
    };
    let path = ctx.write_json("solve.json", &report)?;
    if !solved.determinate {
        return Err(Halt::Infeasible(format!(
            "no unique stable solution (spectral radius {:.6}, forward radius {:.6}); report in {}",
            solved.spectral_radius,
            solved.forward_radius,
            path.display()
        ))
        .into());
    }
    let mut rows = Vec::new();
    for (j, shock) in solved.shock_names.iter().enumerate() {
        let r = irf(&solved, j, args.horizon)?;
        for h in 0..r.nrows() {
            for (i, var) in solved.state_names.iter().enumerate() {
                rows.push(vec![shock.clone(), h.to_string(), var.clone(), r[(h, i)].to_string()]);
            }
        }
    }
    let irf_path = ctx.write_csv("irf.csv", &["shock", "horizon", "variable", "value"], &rows)?;
    Ok(json!({
        "command": "solve",
        "family": family,
        "determinate": true,
        "spectral_radius": solved.spectral_radius,
        "residual": solved.residual,
        "loss": loss,
        "outputs": [path, irf_path],
    }))
}
