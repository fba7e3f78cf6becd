//! Linear rational-expectations models.
//!
//! A [`StructuralModel`] splits the endogenous vector into non-policy
//! variables `x` (n) and policy instruments `u` (k). Its private-sector block
//! reads
//!
//! ```text
//! F1 E x' + F2 E u' + F3 x + F4 u + Fx_lag x_lag + Fu_lag u_lag + F diag(s) v = 0
//! ```
//!
//! and a [`PolicyBlock`] supplies the instrument equation
//!
//! ```text
//! G1 u = G2 E x' + G3 x + Gx_lag x_lag + Gu_lag u_lag + G diag(s) v
//! ```
//!
//! where `s` are the shock scales. Stacking both with `z = [x; u]` gives the
//! [`CanonicalForm`] `Fc E z' + Gc z + Hc z_lag + Nc v = 0`, whose stable
//! solution `z = A z_lag + B v` is a [`SolvedModel`].
//!
//! Observables follow `y = c + M1 x + M2 u + r * M w` with `w` standard
//! normal measurement noise and `r` the noise scale.

mod kalman;
mod solve;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::expr::{Entry, ExprError};
use crate::uncertainty::ParameterDraw;

pub use kalman::{kalman_loglik, simulate_observables, SIMULATION_BURN_IN};
pub use solve::{irf, lyapunov, simulate, solve_re, spectral_radius, SolverSettings};

pub use crate::rules::PolicyBlock;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LreError {
    #[error("missing parameter `{0}` in draw")]
    MissingParameter(String),
    #[error("invalid expression: {0}")]
    Expr(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("fixed-point iteration did not converge in {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("model is not determinate")]
    Indeterminate,
    #[error("shock index {index} out of range (model has {count} shocks)")]
    ShockIndex { index: usize, count: usize },
    #[error("tolerance must be positive")]
    BadTolerance,
}

impl From<ExprError> for LreError {
    fn from(e: ExprError) -> Self {
        match e {
            ExprError::UnknownParameter(p) => LreError::MissingParameter(p),
            other => LreError::Expr(other.to_string()),
        }
    }
}

/// Sparse matrix whose entries may be parameter expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, Entry)>,
}

impl ParamMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    out.entries.push((i, j, Entry::Literal(m[(i, j)])));
                }
            }
        }
        out
    }

    /// Adds `entry` at `(row, col)`; repeated positions are summed on evaluation.
    pub fn push(&mut self, row: usize, col: usize, entry: Entry) {
        self.entries.push((row, col, entry));
    }

    pub fn parameters(&self) -> BTreeSet<String> {
        self.entries.iter().flat_map(|(_, _, e)| e.parameters()).collect()
    }

    pub fn eval(&self, draw: &ParameterDraw) -> Result<DMatrix<f64>, LreError> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        let lookup = |name: &str| draw.get(name);
        for (i, j, e) in &self.entries {
            if *i >= self.rows || *j >= self.cols {
                return Err(LreError::Dimension(format!(
                    "entry ({i}, {j}) outside {}x{} matrix",
                    self.rows, self.cols
                )));
            }
            m[(*i, *j)] += e.eval(&lookup)?;
        }
        Ok(m)
    }

    fn check(&self, name: &str, rows: usize, cols: usize) -> Result<(), LreError> {
        if self.rows != rows || self.cols != cols {
            return Err(LreError::Dimension(format!(
                "{name} is {}x{}, expected {rows}x{cols}",
                self.rows, self.cols
            )));
        }
        if let Some((i, j, _)) = self.entries.iter().find(|(i, j, _)| *i >= rows || *j >= cols) {
            return Err(LreError::Dimension(format!("{name} entry ({i}, {j}) out of range")));
        }
        Ok(())
    }
}

fn eval_entries(entries: &[Entry], draw: &ParameterDraw) -> Result<DVector<f64>, LreError> {
    let lookup = |name: &str| draw.get(name);
    let vals = entries
        .iter()
        .map(|e| e.eval(&lookup))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DVector::from_vec(vals))
}

/// Private-sector equations, measurement map and naming of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralModel {
    pub endogenous: Vec<String>,
    pub policy: Vec<String>,
    pub shocks: Vec<String>,
    pub observables: Vec<String>,
    pub f1: ParamMatrix,
    pub f2: ParamMatrix,
    pub f3: ParamMatrix,
    pub f4: ParamMatrix,
    pub f_lag_x: ParamMatrix,
    pub f_lag_u: ParamMatrix,
    pub f: ParamMatrix,
    pub shock_scales: Vec<Entry>,
    pub m1: ParamMatrix,
    pub m2: ParamMatrix,
    pub m: ParamMatrix,
    pub intercept: Vec<Entry>,
    pub noise_scale: Entry,
    /// Role name (`inflation`, `output_gap`, ...) to variable name.
    pub roles: BTreeMap<String, String>,
    /// Shock that policy rules load their disturbance on, if any.
    pub policy_shock: Option<String>,
}

impl StructuralModel {
    /// A model with all blocks zero and no observables.
    pub fn empty(endogenous: Vec<String>, policy: Vec<String>, shocks: Vec<String>) -> Self {
        let (n, k, s) = (endogenous.len(), policy.len(), shocks.len());
        Self {
            f1: ParamMatrix::zeros(n, n),
            f2: ParamMatrix::zeros(n, k),
            f3: ParamMatrix::zeros(n, n),
            f4: ParamMatrix::zeros(n, k),
            f_lag_x: ParamMatrix::zeros(n, n),
            f_lag_u: ParamMatrix::zeros(n, k),
            f: ParamMatrix::zeros(n, s),
            shock_scales: vec![Entry::Literal(1.0); s],
            m1: ParamMatrix::zeros(0, n),
            m2: ParamMatrix::zeros(0, k),
            m: ParamMatrix::zeros(0, 0),
            intercept: Vec::new(),
            noise_scale: Entry::Literal(1.0),
            roles: BTreeMap::new(),
            policy_shock: None,
            endogenous,
            policy,
            shocks,
            observables: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.endogenous.len()
    }

    pub fn k(&self) -> usize {
        self.policy.len()
    }

    pub fn m_obs(&self) -> usize {
        self.observables.len()
    }

    /// State names in `z = [x; u]` order.
    pub fn state_names(&self) -> Vec<String> {
        self.endogenous.iter().chain(&self.policy).cloned().collect()
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.endogenous
            .iter()
            .chain(&self.policy)
            .position(|v| v == name)
    }

    pub fn role_index(&self, role: &str) -> Option<usize> {
        self.roles.get(role).and_then(|v| self.state_index(v))
    }

    pub fn validate(&self) -> Result<(), LreError> {
        let (n, k, s, m) = (self.n(), self.k(), self.shocks.len(), self.m_obs());
        self.f1.check("F1", n, n)?;
        self.f2.check("F2", n, k)?;
        self.f3.check("F3", n, n)?;
        self.f4.check("F4", n, k)?;
        self.f_lag_x.check("Fx_lag", n, n)?;
        self.f_lag_u.check("Fu_lag", n, k)?;
        self.f.check("F", n, s)?;
        self.m1.check("M1", m, n)?;
        self.m2.check("M2", m, k)?;
        self.m.check("M", m, m)?;
        if self.shock_scales.len() != s {
            return Err(LreError::Dimension(format!(
                "{} shock scales for {s} shocks",
                self.shock_scales.len()
            )));
        }
        if self.intercept.len() != m {
            return Err(LreError::Dimension(format!(
                "{} intercepts for {m} observables",
                self.intercept.len()
            )));
        }
        if m > n + k {
            return Err(LreError::Dimension(format!(
                "{m} observables exceed state dimension {}",
                n + k
            )));
        }
        if let Some(ps) = &self.policy_shock {
            if !self.shocks.contains(ps) {
                return Err(LreError::Dimension(format!("unknown policy shock `{ps}`")));
            }
        }
        Ok(())
    }

    /// Every parameter name referenced by any block.
    pub fn parameters(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for pm in [
            &self.f1, &self.f2, &self.f3, &self.f4, &self.f_lag_x, &self.f_lag_u, &self.f, &self.m1,
            &self.m2, &self.m,
        ] {
            out.extend(pm.parameters());
        }
        for e in self.shock_scales.iter().chain(&self.intercept) {
            out.extend(e.parameters());
        }
        out.extend(self.noise_scale.parameters());
        out
    }

    /// Evaluates every parameter slot against `draw`.
    pub fn bind(&self, draw: &ParameterDraw) -> Result<BoundModel, LreError> {
        self.validate()?;
        let (n, k) = (self.n(), self.k());
        let nz = n + k;
        let scales = eval_entries(&self.shock_scales, draw)?;
        let mut fc = DMatrix::zeros(n, nz);
        let mut gc = DMatrix::zeros(n, nz);
        let mut hc = DMatrix::zeros(n, nz);
        fc.columns_mut(0, n).copy_from(&self.f1.eval(draw)?);
        fc.columns_mut(n, k).copy_from(&self.f2.eval(draw)?);
        gc.columns_mut(0, n).copy_from(&self.f3.eval(draw)?);
        gc.columns_mut(n, k).copy_from(&self.f4.eval(draw)?);
        hc.columns_mut(0, n).copy_from(&self.f_lag_x.eval(draw)?);
        hc.columns_mut(n, k).copy_from(&self.f_lag_u.eval(draw)?);
        let nc = self.f.eval(draw)? * DMatrix::from_diagonal(&scales);
        let m = self.m_obs();
        let mut measurement = DMatrix::zeros(m, nz);
        measurement.columns_mut(0, n).copy_from(&self.m1.eval(draw)?);
        measurement.columns_mut(n, k).copy_from(&self.m2.eval(draw)?);
        let lookup = |name: &str| draw.get(name);
        Ok(BoundModel {
            n,
            k,
            fc,
            gc,
            hc,
            nc,
            scales,
            measurement,
            intercept: eval_entries(&self.intercept, draw)?,
            noise_loading: self.m.eval(draw)?,
            noise_scale: self.noise_scale.eval(&lookup)?,
            state_names: self.state_names(),
            shock_names: self.shocks.clone(),
        })
    }
}

/// A structural model with every parameter slot evaluated; policy rows can be
/// filled repeatedly without re-binding.
#[derive(Debug, Clone)]
pub struct BoundModel {
    n: usize,
    k: usize,
    fc: DMatrix<f64>,
    gc: DMatrix<f64>,
    hc: DMatrix<f64>,
    nc: DMatrix<f64>,
    scales: DVector<f64>,
    measurement: DMatrix<f64>,
    intercept: DVector<f64>,
    noise_loading: DMatrix<f64>,
    noise_scale: f64,
    state_names: Vec<String>,
    shock_names: Vec<String>,
}

impl BoundModel {
    pub fn canonical(&self, block: &PolicyBlock) -> Result<CanonicalForm, LreError> {
        let (n, k, s) = (self.n, self.k, self.scales.len());
        let checks = [
            ("G1", &block.g1, k, k),
            ("G2", &block.g2, k, n),
            ("G3", &block.g3, k, n),
            ("Gx_lag", &block.g_lag_x, k, n),
            ("Gu_lag", &block.g_lag_u, k, k),
            ("G", &block.g, k, s),
        ];
        for (name, m, r, c) in checks {
            if m.nrows() != r || m.ncols() != c {
                return Err(LreError::Dimension(format!(
                    "policy block {name} is {}x{}, expected {r}x{c}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        let nz = n + k;
        let mut fc = DMatrix::zeros(nz, nz);
        let mut gc = DMatrix::zeros(nz, nz);
        let mut hc = DMatrix::zeros(nz, nz);
        let mut nc = DMatrix::zeros(nz, s);
        fc.rows_mut(0, n).copy_from(&self.fc);
        gc.rows_mut(0, n).copy_from(&self.gc);
        hc.rows_mut(0, n).copy_from(&self.hc);
        nc.rows_mut(0, n).copy_from(&self.nc);
        fc.view_mut((n, 0), (k, n)).copy_from(&(-&block.g2));
        gc.view_mut((n, 0), (k, n)).copy_from(&(-&block.g3));
        gc.view_mut((n, n), (k, k)).copy_from(&block.g1);
        hc.view_mut((n, 0), (k, n)).copy_from(&(-&block.g_lag_x));
        hc.view_mut((n, n), (k, k)).copy_from(&(-&block.g_lag_u));
        nc.rows_mut(n, k)
            .copy_from(&(-&block.g * DMatrix::from_diagonal(&self.scales)));
        Ok(CanonicalForm {
            fc,
            gc,
            hc,
            nc,
            state_names: self.state_names.clone(),
            shock_names: self.shock_names.clone(),
        })
    }

    pub fn state_space(&self, solved: SolvedModel) -> Result<StateSpace, LreError> {
        StateSpace::new(
            solved,
            self.measurement.clone(),
            self.intercept.clone(),
            self.noise_loading.clone(),
            self.noise_scale,
        )
    }
}

/// Stacks the private block and a policy block into one system.
pub fn assemble_canonical(
    model: &StructuralModel,
    block: &PolicyBlock,
    draw: &ParameterDraw,
) -> Result<CanonicalForm, LreError> {
    model.bind(draw)?.canonical(block)
}

/// `Fc E z' + Gc z + Hc z_lag + Nc v = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    pub fc: DMatrix<f64>,
    pub gc: DMatrix<f64>,
    pub hc: DMatrix<f64>,
    pub nc: DMatrix<f64>,
    pub state_names: Vec<String>,
    pub shock_names: Vec<String>,
}

impl CanonicalForm {
    /// Builds a system with generated names `z0..`, `v0..`.
    pub fn new(
        fc: DMatrix<f64>,
        gc: DMatrix<f64>,
        hc: DMatrix<f64>,
        nc: DMatrix<f64>,
    ) -> Result<Self, LreError> {
        let nz = gc.nrows();
        for (name, m) in [("Fc", &fc), ("Gc", &gc), ("Hc", &hc)] {
            if m.nrows() != nz || m.ncols() != nz {
                return Err(LreError::Dimension(format!(
                    "{name} is {}x{}, expected {nz}x{nz}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        if nc.nrows() != nz {
            return Err(LreError::Dimension(format!(
                "Nc has {} rows, expected {nz}",
                nc.nrows()
            )));
        }
        let state_names = (0..nz).map(|i| format!("z{i}")).collect();
        let shock_names = (0..nc.ncols()).map(|i| format!("v{i}")).collect();
        Ok(Self {
            fc,
            gc,
            hc,
            nc,
            state_names,
            shock_names,
        })
    }

    pub fn dim(&self) -> usize {
        self.gc.nrows()
    }

    pub fn shock_count(&self) -> usize {
        self.nc.ncols()
    }
}

/// Stable solution `z = A z_lag + B v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// `max |Fc A^2 + Gc A + Hc|`.
    pub residual: f64,
    pub spectral_radius: f64,
    /// Spectral radius of `(Fc A + Gc)^-1 Fc`; below one iff the remaining
    /// roots are unstable.
    pub forward_radius: f64,
    pub determinate: bool,
    pub iterations: usize,
    pub state_names: Vec<String>,
    pub shock_names: Vec<String>,
}

impl SolvedModel {
    /// Wraps a known transition, e.g. for tests or exogenous processes.
    pub fn from_transition(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self, LreError> {
        if a.nrows() != a.ncols() || b.nrows() != a.nrows() {
            return Err(LreError::Dimension(format!(
                "A is {}x{}, B is {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        let rho = spectral_radius(&a)?;
        Ok(Self {
            state_names: (0..a.nrows()).map(|i| format!("z{i}")).collect(),
            shock_names: (0..b.ncols()).map(|i| format!("v{i}")).collect(),
            a,
            b,
            residual: 0.0,
            spectral_radius: rho,
            forward_radius: 0.0,
            determinate: rho < 1.0,
            iterations: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Solved model plus measurement equation.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub solved: SolvedModel,
    /// `[M1 M2]`, one row per observable.
    pub measurement: DMatrix<f64>,
    pub intercept: DVector<f64>,
    pub noise_loading: DMatrix<f64>,
    pub noise_scale: f64,
}

impl StateSpace {
    pub fn new(
        solved: SolvedModel,
        measurement: DMatrix<f64>,
        intercept: DVector<f64>,
        noise_loading: DMatrix<f64>,
        noise_scale: f64,
    ) -> Result<Self, LreError> {
        let m = measurement.nrows();
        if measurement.ncols() != solved.dim()
            || intercept.len() != m
            || noise_loading.nrows() != m
            || noise_loading.ncols() != m
        {
            return Err(LreError::Dimension(format!(
                "measurement {}x{}, intercept {}, noise {}x{} for state dim {}",
                m,
                measurement.ncols(),
                intercept.len(),
                noise_loading.nrows(),
                noise_loading.ncols(),
                solved.dim()
            )));
        }
        Ok(Self {
            solved,
            measurement,
            intercept,
            noise_loading,
            noise_scale,
        })
    }

    pub fn observables(&self) -> usize {
        self.measurement.nrows()
    }

    /// Measurement-noise covariance `r^2 M M'`.
    pub fn noise_cov(&self) -> DMatrix<f64> {
        let s2 = self.noise_scale * self.noise_scale;
        &self.noise_loading * self.noise_loading.transpose() * s2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    fn draw(pairs: &[(&str, f64)]) -> ParameterDraw {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn static_rule_stacks_to_identity() {
        let model = StructuralModel::empty(vec![], vec!["u".into()], vec!["eps".into()]);
        let mut block = PolicyBlock::zeros(0, 1, 1);
        block.g1[(0, 0)] = 1.0;
        block.g[(0, 0)] = 1.0;
        let c = assemble_canonical(&model, &block, &ParameterDraw::default()).unwrap();
        assert_eq!(c.fc, DMatrix::zeros(1, 1));
        assert_eq!(c.hc, DMatrix::zeros(1, 1));
        assert_eq!(c.gc, DMatrix::identity(1, 1));
        assert_eq!(c.nc, DMatrix::from_element(1, 1, -1.0));
    }

    #[test]
    fn missing_parameter_is_reported() {
        let mut model = StructuralModel::empty(vec!["x".into()], vec![], vec![]);
        model.f3.push(0, 0, Entry::Expr(Expr::parse("-rho").unwrap()));
        let block = PolicyBlock::zeros(1, 0, 0);
        assert_eq!(
            assemble_canonical(&model, &block, &draw(&[])),
            Err(LreError::MissingParameter("rho".into()))
        );
        let c = assemble_canonical(&model, &block, &draw(&[("rho", 2.0)])).unwrap();
        assert_eq!(c.gc[(0, 0)], -2.0);
    }

    #[test]
    fn block_dimension_mismatch_is_rejected() {
        let model = StructuralModel::empty(vec!["x".into()], vec!["u".into()], vec![]);
        let block = PolicyBlock::zeros(2, 1, 0);
        assert!(matches!(
            assemble_canonical(&model, &block, &draw(&[])),
            Err(LreError::Dimension(_))
        ));
    }

    #[test]
    fn too_many_observables_is_rejected() {
        let mut model = StructuralModel::empty(vec!["x".into()], vec![], vec![]);
        model.observables = vec!["a".into(), "b".into()];
        model.m1 = ParamMatrix::zeros(2, 1);
        model.m2 = ParamMatrix::zeros(2, 0);
        model.m = ParamMatrix::zeros(2, 2);
        model.intercept = vec![Entry::Literal(0.0); 2];
        assert!(matches!(model.validate(), Err(LreError::Dimension(_))));
    }
}
