//! Per-draw minimisation of the welfare loss over a rule's coefficient box.
//!
//! The loss of coefficients `phi` under parameters `theta` is
//! `sum_r w_r Var(z_r)`, the weighted unconditional variances of the role
//! variables (default weights: inflation 1, output gap 0.05). Points without
//! a unique stable solution get a flat penalty.
//!
//! Minimisation scans a grid of 7 points per free coefficient (both bounds
//! included) and polishes the best grid point with a box-projected
//! Nelder-Mead search.

mod nelder_mead;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dominance::{DominanceError, EmpiricalDistribution};
use crate::lre::{self, BoundModel, LreError, SolvedModel, SolverSettings, StateSpace, StructuralModel};
use crate::model::{ModelError, ModelSpec};
use crate::rules::{rule_to_policy_block, RuleCoefficients, RuleError, RuleFamily};
use crate::rng;
use crate::uncertainty::ParameterDraw;

pub use nelder_mead::{minimize_box, BoxMinimum, SearchSettings};

/// Loss assigned to coefficients without a unique stable solution.
pub const DEFAULT_PENALTY: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error(transparent)]
    Model(#[from] LreError),
    #[error(transparent)]
    ModelFile(#[from] ModelError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("no variable has role `{0}`")]
    UnknownRole(String),
    #[error("weight for `{0}` must be finite and nonnegative")]
    BadWeight(String),
    #[error("coefficients are for {got}, problem is for {expected}")]
    WrongFamily { expected: RuleFamily, got: RuleFamily },
    #[error("model has no unique stable solution at these coefficients")]
    Indeterminate,
    #[error("horizon and path count must be at least 1")]
    BadHorizon,
    #[error("state has length {got}, model has {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("no parameter draws")]
    NoDraws,
}

/// Free and fixed coefficients of a family's box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientBox {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CoefficientBox {
    pub fn default_for(family: RuleFamily) -> Self {
        let specs = family.coefficients();
        Self {
            names: specs.iter().map(|c| c.name.to_string()).collect(),
            lower: specs.iter().map(|c| c.lower).collect(),
            upper: specs.iter().map(|c| c.upper).collect(),
        }
    }

    /// Indices of coefficients with `lower < upper`.
    pub fn free(&self) -> Vec<usize> {
        (0..self.names.len()).filter(|&i| self.lower[i] < self.upper[i]).collect()
    }

    pub fn contains(&self, c: &RuleCoefficients) -> bool {
        self.names.iter().enumerate().all(|(i, n)| {
            c.get(n).is_some_and(|v| v >= self.lower[i] && v <= self.upper[i])
        })
    }
}

/// A rule family, its box, loss weights and the model it is evaluated in.
#[derive(Debug, Clone)]
pub struct PolicyProblem {
    pub family: RuleFamily,
    pub bounds: CoefficientBox,
    /// Role name to weight.
    pub weights: BTreeMap<String, f64>,
    pub penalty: f64,
    pub solver: SolverSettings,
    pub search: SearchSettings,
    model: StructuralModel,
    /// Values for parameters a draw does not set.
    base: ParameterDraw,
}

impl PolicyProblem {
    /// Problem for `family` in `spec`, with the model calibration as base.
    pub fn new(spec: &ModelSpec, family: RuleFamily) -> Result<Self, OptimizerError> {
        Self::with_model(spec.for_family(family)?, spec.calibration(), family)
    }

    pub fn with_model(
        model: StructuralModel,
        base: ParameterDraw,
        family: RuleFamily,
    ) -> Result<Self, OptimizerError> {
        model.validate()?;
        let weights = BTreeMap::from([("inflation".to_string(), 1.0), ("output_gap".to_string(), 0.05)]);
        let problem = Self {
            family,
            bounds: CoefficientBox::default_for(family),
            weights,
            penalty: DEFAULT_PENALTY,
            solver: SolverSettings::default(),
            search: SearchSettings::default(),
            model,
            base,
        };
        // surfaces unsupported pairings before any optimisation
        rule_to_policy_block(&RuleCoefficients::defaults(family), &problem.model)?;
        Ok(problem)
    }

    pub fn model(&self) -> &StructuralModel {
        &self.model
    }

    pub fn base(&self) -> &ParameterDraw {
        &self.base
    }

    pub fn set_weight(&mut self, role: &str, w: f64) -> Result<(), OptimizerError> {
        if !(w.is_finite() && w >= 0.0) {
            return Err(OptimizerError::BadWeight(role.to_string()));
        }
        self.model
            .role_index(role)
            .ok_or_else(|| OptimizerError::UnknownRole(role.to_string()))?;
        self.weights.insert(role.to_string(), w);
        Ok(())
    }

    /// Diagonal of `W` in state order.
    fn weight_vector(&self) -> Result<DVector<f64>, OptimizerError> {
        let mut w = DVector::zeros(self.model.n() + self.model.k());
        for (role, v) in &self.weights {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(OptimizerError::BadWeight(role.clone()));
            }
            let idx = self
                .model
                .role_index(role)
                .ok_or_else(|| OptimizerError::UnknownRole(role.clone()))?;
            w[idx] += v;
        }
        Ok(w)
    }

    /// Binds a parameter draw; the result evaluates losses cheaply.
    pub fn bind(&self, theta: &ParameterDraw) -> Result<BoundProblem<'_>, OptimizerError> {
        Ok(BoundProblem {
            problem: self,
            model: self.model.bind(&theta.over(&self.base))?,
            weights: self.weight_vector()?,
        })
    }
}

/// A problem with one parameter draw bound.
pub struct BoundProblem<'a> {
    problem: &'a PolicyProblem,
    model: BoundModel,
    weights: DVector<f64>,
}

impl BoundProblem<'_> {
    /// Solved model at `phi`, or `None` if there is no unique stable solution.
    pub fn solve(&self, phi: &RuleCoefficients) -> Result<Option<SolvedModel>, OptimizerError> {
        if phi.family != self.problem.family {
            return Err(OptimizerError::WrongFamily {
                expected: self.problem.family,
                got: phi.family,
            });
        }
        let block = rule_to_policy_block(phi, &self.problem.model)?;
        let canonical = self.model.canonical(&block)?;
        let s = self.problem.solver;
        match lre::solve_re(&canonical, s.tol, s.max_iter) {
            Ok(solved) if solved.determinate => Ok(Some(solved)),
            Ok(_) | Err(LreError::NonConvergence { .. }) | Err(LreError::Singular(_)) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// `tr(W Sigma)`, or the penalty when indeterminate.
    pub fn loss(&self, phi: &RuleCoefficients) -> Result<f64, OptimizerError> {
        match self.solve(phi)? {
            Some(solved) => {
                let sigma = lre::lyapunov(&solved)?;
                Ok(sigma.diagonal().dot(&self.weights))
            }
            None => Ok(self.problem.penalty),
        }
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Solved model with its measurement equation.
    pub fn state_space(&self, phi: &RuleCoefficients) -> Result<StateSpace, OptimizerError> {
        let solved = self.solve(phi)?.ok_or(OptimizerError::Indeterminate)?;
        Ok(self.model.state_space(solved)?)
    }
}

/// Welfare loss at `phi`; the penalty if the model is indeterminate there.
/// Errors only signal configuration problems such as missing parameters.
pub fn welfare_loss(
    theta: &ParameterDraw,
    phi: &RuleCoefficients,
    prob: &PolicyProblem,
) -> Result<f64, OptimizerError> {
    prob.bind(theta)?.loss(phi)
}

/// Average per-period loss `(1/H) sum_h z_h' W z_h` over `n_paths` simulated
/// futures from state `z_t`; path `p` uses substream `p` of `seed`.
pub fn conditional_loss(
    theta: &ParameterDraw,
    phi: &RuleCoefficients,
    prob: &PolicyProblem,
    z_t: &DVector<f64>,
    horizon: usize,
    n_paths: usize,
    seed: u64,
) -> Result<f64, OptimizerError> {
    if horizon == 0 || n_paths == 0 {
        return Err(OptimizerError::BadHorizon);
    }
    let bound = prob.bind(theta)?;
    let solved = bound.solve(phi)?.ok_or(OptimizerError::Indeterminate)?;
    if z_t.len() != solved.dim() {
        return Err(OptimizerError::StateLength {
            expected: solved.dim(),
            got: z_t.len(),
        });
    }
    let w = bound.weights();
    let mut total = 0.0;
    for p in 0..n_paths as u64 {
        let path = lre::simulate(&solved, z_t, horizon, rng::substream_seed(seed, p))?;
        total += path_loss(&path, w);
    }
    Ok(total / n_paths as f64)
}

fn path_loss(path: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    let per_period: f64 = path
        .row_iter()
        .map(|z| z.iter().zip(w.iter()).map(|(v, wi)| wi * v * v).sum::<f64>())
        .sum();
    per_period / path.nrows() as f64
}

/// Minimised loss for one parameter draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalDraw {
    pub theta: ParameterDraw,
    pub phi_min: RuleCoefficients,
    pub loss: f64,
    /// False when every evaluated point was indeterminate.
    pub determinate: bool,
    /// Loss evaluations spent.
    pub iterations: usize,
}

/// Minimises the welfare loss over the problem's box for one draw.
///
/// Returns the best of the grid scan and the Nelder-Mead polish, so the
/// result is never worse than any grid point.
pub fn optimize_rule(theta: &ParameterDraw, prob: &PolicyProblem) -> Result<OptimalDraw, OptimizerError> {
    let bound = prob.bind(theta)?;
    let mut template = RuleCoefficients::defaults(prob.family);
    for (i, name) in prob.bounds.names.iter().enumerate() {
        if prob.bounds.lower[i] == prob.bounds.upper[i] {
            template.set(name, prob.bounds.lower[i])?;
        }
    }
    let free = prob.bounds.free();
    let lower: Vec<f64> = free.iter().map(|&i| prob.bounds.lower[i]).collect();
    let upper: Vec<f64> = free.iter().map(|&i| prob.bounds.upper[i]).collect();
    let coefficients_at = |x: &[f64]| -> Result<RuleCoefficients, OptimizerError> {
        let mut c = template.clone();
        for (j, &i) in free.iter().enumerate() {
            c.set(&prob.bounds.names[i], x[j])?;
        }
        Ok(c)
    };
    // configuration errors surface here; later evaluations cannot fail
    bound.loss(&coefficients_at(&lower)?)?;
    let objective = |x: &[f64]| {
        coefficients_at(x)
            .and_then(|c| bound.loss(&c))
            .unwrap_or(prob.penalty)
    };
    let best = minimize_box(objective, &lower, &upper, &prob.search);
    Ok(OptimalDraw {
        theta: theta.clone(),
        phi_min: coefficients_at(&best.x)?,
        determinate: best.f < prob.penalty,
        loss: best.f,
        iterations: best.evaluations,
    })
}

/// Minimised losses across draws, one equally weighted atom per
/// determinate draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossDistribution {
    pub family: RuleFamily,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    /// Draws whose whole box was indeterminate; excluded from `values`.
    pub dropped: usize,
    pub draw_count: usize,
    pub seed: Option<u64>,
}

impl LossDistribution {
    pub fn to_empirical(&self) -> Result<EmpiricalDistribution, DominanceError> {
        EmpiricalDistribution::new(&self.values, &self.weights, crate::dominance::Orientation::Loss)
    }
}

/// Optimises every draw (in parallel) and collects the minimised losses in
/// draw order.
pub fn loss_distribution(
    prob: &PolicyProblem,
    draws: &[ParameterDraw],
) -> Result<(LossDistribution, Vec<OptimalDraw>), OptimizerError> {
    if draws.is_empty() {
        return Err(OptimizerError::NoDraws);
    }
    let results = draws
        .par_iter()
        .map(|theta| optimize_rule(theta, prob))
        .collect::<Result<Vec<_>, _>>()?;
    let values: Vec<f64> = results.iter().filter(|r| r.determinate).map(|r| r.loss).collect();
    let weights = vec![1.0 / values.len().max(1) as f64; values.len()];
    Ok((
        LossDistribution {
            family: prob.family,
            dropped: draws.len() - values.len(),
            draw_count: draws.len(),
            values,
            weights,
            seed: None,
        },
        results,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Entry;
    use crate::lre::StructuralModel;

    /// pi = a pi_lag + e, money growth pinned by the rule.
    fn scalar_problem(a: f64, shock: f64, family: RuleFamily) -> PolicyProblem {
        let mut m = StructuralModel::empty(vec!["pi".into()], vec!["mu".into()], vec!["e".into()]);
        m.f3.push(0, 0, Entry::Literal(-1.0));
        m.f_lag_x.push(0, 0, Entry::Literal(a));
        m.f.push(0, 0, Entry::Literal(shock));
        m.roles.insert("inflation".into(), "pi".into());
        m.roles.insert("output_gap".into(), "pi".into());
        m.roles.insert("money_growth".into(), "mu".into());
        let mut p = PolicyProblem::with_model(m, ParameterDraw::new(), family).unwrap();
        p.weights = BTreeMap::from([("inflation".into(), 1.0)]);
        p
    }

    #[test]
    fn scalar_loss_is_lyapunov_variance() {
        let p = scalar_problem(0.5, 1.0, RuleFamily::ConstantMoneyGrowth);
        let phi = RuleCoefficients::defaults(RuleFamily::ConstantMoneyGrowth);
        let l = welfare_loss(&ParameterDraw::new(), &phi, &p).unwrap();
        assert!((l - 4.0 / 3.0).abs() < 1e-12);
        let mut zero = p.clone();
        zero.weights.clear();
        assert_eq!(welfare_loss(&ParameterDraw::new(), &phi, &zero).unwrap(), 0.0);
    }

    #[test]
    fn explosive_model_gets_penalty() {
        let p = scalar_problem(1.5, 1.0, RuleFamily::ConstantMoneyGrowth);
        let phi = RuleCoefficients::defaults(RuleFamily::ConstantMoneyGrowth);
        assert_eq!(welfare_loss(&ParameterDraw::new(), &phi, &p).unwrap(), DEFAULT_PENALTY);
        let opt = optimize_rule(&ParameterDraw::new(), &p).unwrap();
        assert!(!opt.determinate);
        assert_eq!(opt.loss, DEFAULT_PENALTY);
        let (dist, _) = loss_distribution(&p, &[ParameterDraw::new()]).unwrap();
        assert_eq!(dist.dropped, 1);
        assert!(dist.values.is_empty());
    }

    #[test]
    fn conditional_loss_examples() {
        let p = scalar_problem(0.5, 0.0, RuleFamily::ConstantMoneyGrowth);
        let phi = RuleCoefficients::defaults(RuleFamily::ConstantMoneyGrowth);
        let theta = ParameterDraw::new();
        let z = DVector::from_vec(vec![1.0, 0.0]);
        let l = conditional_loss(&theta, &phi, &p, &z, 2, 3, 1).unwrap();
        assert!((l - 0.15625).abs() < 1e-15);
        let l0 = conditional_loss(&theta, &phi, &p, &DVector::zeros(2), 5, 2, 1).unwrap();
        assert_eq!(l0, 0.0);
        assert!(conditional_loss(&theta, &phi, &p, &z, 0, 1, 1).is_err());
        assert!(conditional_loss(&theta, &phi, &p, &DVector::zeros(3), 1, 1, 1).is_err());
    }

    #[test]
    fn wrong_family_coefficients_are_rejected() {
        let p = scalar_problem(0.5, 1.0, RuleFamily::ConstantMoneyGrowth);
        let phi = RuleCoefficients::defaults(RuleFamily::AugmentedMoneyGrowth);
        assert!(matches!(
            welfare_loss(&ParameterDraw::new(), &phi, &p),
            Err(OptimizerError::WrongFamily { .. })
        ));
    }

    #[test]
    fn singleton_box_returns_its_point() {
        let p = scalar_problem(0.5, 1.0, RuleFamily::ConstantMoneyGrowth);
        let opt = optimize_rule(&ParameterDraw::new(), &p).unwrap();
        assert_eq!(opt.phi_min, RuleCoefficients::defaults(RuleFamily::ConstantMoneyGrowth));
        assert!((opt.loss - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(opt.iterations, 1);
    }

    #[test]
    fn missing_parameter_is_a_configuration_error() {
        let mut m = StructuralModel::empty(vec!["pi".into()], vec!["mu".into()], vec![]);
        m.f3.push(0, 0, Entry::Expr(crate::expr::Expr::parse("-c").unwrap()));
        m.roles.insert("money_growth".into(), "mu".into());
        m.roles.insert("inflation".into(), "pi".into());
        m.roles.insert("output_gap".into(), "pi".into());
        let p = PolicyProblem::with_model(m, ParameterDraw::new(), RuleFamily::ConstantMoneyGrowth).unwrap();
        let phi = RuleCoefficients::defaults(RuleFamily::ConstantMoneyGrowth);
        assert!(matches!(
            welfare_loss(&ParameterDraw::new(), &phi, &p),
            Err(OptimizerError::Model(LreError::MissingParameter(_)))
        ));
    }
}
