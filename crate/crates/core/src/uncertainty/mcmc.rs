use nalgebra::DMatrix;
use rand::RngExt;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{ParameterDraw, PriorSpec, UncertaintyError};
use crate::lre::{kalman_loglik, StateSpace};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcSettings {
    /// Total iterations, burn-in included.
    pub chain_len: usize,
    /// Proposal sd as a multiple of each prior sd.
    pub proposal_scale: f64,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            chain_len: 20_000,
            proposal_scale: 0.2,
            burn_in: 5_000,
            thin: 10,
        }
    }
}

/// Equally weighted posterior draws with chain diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSample {
    pub draws: Vec<ParameterDraw>,
    /// Accepted share of all proposals, burn-in included.
    pub acceptance_rate: f64,
    pub kept: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl PosteriorSample {
    pub fn values(&self, name: &str) -> Vec<f64> {
        self.draws.iter().filter_map(|d| d.get(name)).collect()
    }
}

const START_ATTEMPTS: usize = 100;

/// Log posterior kernel; `-inf` outside the prior support or where the
/// binding or the likelihood fails (e.g. an indeterminate draw).
fn log_target<F, E>(prior: &PriorSpec, y: &DMatrix<f64>, bind: &F, draw: &ParameterDraw) -> f64
where
    F: Fn(&ParameterDraw) -> Result<StateSpace, E>,
{
    let lp = prior.ln_density(draw);
    if !lp.is_finite() {
        return f64::NEG_INFINITY;
    }
    let Ok(ss) = bind(draw) else {
        return f64::NEG_INFINITY;
    };
    if !ss.solved.determinate {
        return f64::NEG_INFINITY;
    }
    match kalman_loglik(&ss, y) {
        Ok(ll) if ll.is_finite() => lp + ll,
        _ => f64::NEG_INFINITY,
    }
}

/// Random-walk Metropolis on `prior(theta) * likelihood(Y | theta)`.
///
/// The chain starts at the prior center, falling back to up to 100 prior
/// draws. Every non-degenerate parameter moves jointly with Gaussian steps of
/// `proposal_scale` times its prior sd. After `burn_in` iterations every
/// `thin`-th state is kept.
pub fn rwmh_posterior<F, E>(
    prior: &PriorSpec,
    y: &DMatrix<f64>,
    bind: F,
    settings: McmcSettings,
    seed: u64,
) -> Result<PosteriorSample, UncertaintyError>
where
    F: Fn(&ParameterDraw) -> Result<StateSpace, E>,
{
    prior.validate()?;
    let McmcSettings {
        chain_len,
        proposal_scale,
        burn_in,
        thin,
    } = settings;
    if chain_len <= burn_in {
        return Err(UncertaintyError::BadSettings(format!(
            "chain length {chain_len} must exceed burn-in {burn_in}"
        )));
    }
    if !(proposal_scale > 0.0) || thin == 0 {
        return Err(UncertaintyError::BadSettings(
            "proposal scale must be positive and thinning at least 1".into(),
        ));
    }
    let mut rng = rng::stream(seed);
    let mut current = prior.center();
    let mut current_lp = log_target(prior, y, &bind, &current);
    let mut attempt = 0;
    while !current_lp.is_finite() {
        if attempt == START_ATTEMPTS {
            return Err(UncertaintyError::NoStartingPoint(START_ATTEMPTS));
        }
        current = prior.draw_one(&mut rng)?;
        current_lp = log_target(prior, y, &bind, &current);
        attempt += 1;
    }
    let steps: Vec<(usize, f64)> = prior
        .parameters
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_point())
        .map(|(i, p)| (i, proposal_scale * p.step_scale()))
        .collect();
    let mut accepted = 0usize;
    let mut draws = Vec::with_capacity((chain_len - burn_in) / thin + 1);
    for it in 0..chain_len {
        let mut proposal = current.clone();
        for &(i, step) in &steps {
            let name = &prior.parameters[i].name;
            let z: f64 = rng.sample(StandardNormal);
            proposal.insert(name.clone(), current.get(name).unwrap_or(0.0) + step * z);
        }
        let u: f64 = rng.random();
        let lp = if prior.in_support(&proposal) {
            log_target(prior, y, &bind, &proposal)
        } else {
            f64::NEG_INFINITY
        };
        if lp.is_finite() && u.ln() < lp - current_lp {
            current = proposal;
            current_lp = lp;
            accepted += 1;
        }
        if it >= burn_in && (it - burn_in) % thin == 0 {
            draws.push(current.clone());
        }
    }
    Ok(PosteriorSample {
        kept: draws.len(),
        draws,
        acceptance_rate: accepted as f64 / chain_len as f64,
        burn_in,
        thin,
        seed,
    })
}
