//! Model files.
//!
//! A model file is a JSON document listing variables, shocks, one equation
//! per non-instrument variable, variable roles, observables and a default
//! calibration. Equation coefficients are numbers or expressions over the
//! calibration's parameter names; every equation reads `sum of terms = 0`.
//! The published schema is `docs/model.schema.json`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Entry;
use crate::lre::{ParamMatrix, StructuralModel};
use crate::rules::RuleFamily;
use crate::uncertainty::ParameterDraw;

const NK3: &str = include_str!("../models/nk3.json");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("cannot read model file: {0}")]
    Io(String),
    #[error("malformed model file: {0}")]
    Json(String),
    #[error("no built-in model named `{0}`")]
    UnknownBuiltin(String),
    #[error("`{context}` refers to unknown variable `{name}`")]
    UnknownVariable { context: String, name: String },
    #[error("`{context}` refers to unknown shock `{name}`")]
    UnknownShock { context: String, name: String },
    #[error("duplicate name `{0}`")]
    Duplicate(String),
    #[error("{equations} equations for {unknowns} non-instrument variables")]
    EquationCount { equations: usize, unknowns: usize },
    #[error("model declares no variable for role `{0}`")]
    MissingRole(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shock {
    pub name: String,
    /// Standard deviation of the innovation.
    pub scale: Entry,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equation {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub equation: String,
    /// Coefficients on expected next-period values.
    #[serde(default)]
    pub lead: BTreeMap<String, Entry>,
    #[serde(default)]
    pub current: BTreeMap<String, Entry>,
    #[serde(default)]
    pub lag: BTreeMap<String, Entry>,
    /// Loadings on unit-variance innovations, before shock scaling.
    #[serde(default)]
    pub shocks: BTreeMap<String, Entry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub name: String,
    pub terms: BTreeMap<String, Entry>,
    #[serde(default = "zero_entry")]
    pub intercept: Entry,
    /// Measurement-noise standard deviation.
    #[serde(default = "zero_entry")]
    pub noise: Entry,
}

fn zero_entry() -> Entry {
    Entry::Literal(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub variables: Vec<Variable>,
    pub shocks: Vec<Shock>,
    pub equations: Vec<Equation>,
    #[serde(default)]
    pub roles: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_shock: Option<String>,
    #[serde(default)]
    pub observables: Vec<Observable>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let spec: ModelSpec = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn builtin(name: &str) -> Result<Self, ModelError> {
        match name {
            "nk3" => Self::from_json(NK3),
            other => Err(ModelError::UnknownBuiltin(other.to_string())),
        }
    }

    pub fn nk3() -> Self {
        Self::builtin("nk3").expect("bundled model is valid")
    }

    /// A built-in name or a path to a model file.
    pub fn load(name_or_path: &str) -> Result<Self, ModelError> {
        match Self::builtin(name_or_path) {
            Err(ModelError::UnknownBuiltin(_)) => Self::from_path(Path::new(name_or_path)),
            other => other,
        }
    }

    pub fn calibration(&self) -> ParameterDraw {
        self.parameters.iter().map(|(k, v)| (k.clone(), *v)).collect()
    }

    fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let mut seen = std::collections::BTreeSet::new();
        for name in self.variables.iter().map(|v| &v.name).chain(self.shocks.iter().map(|s| &s.name)) {
            if !seen.insert(name) {
                return Err(ModelError::Duplicate(name.clone()));
            }
        }
        let check_vars = |context: &str, names: &mut dyn Iterator<Item = &String>| {
            for n in names {
                if self.var_index(n).is_none() {
                    return Err(ModelError::UnknownVariable {
                        context: context.to_string(),
                        name: n.clone(),
                    });
                }
            }
            Ok(())
        };
        for eq in &self.equations {
            check_vars(&eq.name, &mut eq.lead.keys().chain(eq.current.keys()).chain(eq.lag.keys()))?;
            for s in eq.shocks.keys() {
                if !self.shocks.iter().any(|sh| &sh.name == s) {
                    return Err(ModelError::UnknownShock {
                        context: eq.name.clone(),
                        name: s.clone(),
                    });
                }
            }
        }
        for obs in &self.observables {
            check_vars(&obs.name, &mut obs.terms.keys())?;
        }
        check_vars("roles", &mut self.roles.values())?;
        if let Some(ps) = &self.policy_shock {
            if !self.shocks.iter().any(|s| &s.name == ps) {
                return Err(ModelError::UnknownShock {
                    context: "policy_shock".into(),
                    name: ps.clone(),
                });
            }
        }
        Ok(())
    }

    /// The structural model with `instruments` as the policy variables.
    pub fn structural(&self, instruments: &[&str]) -> Result<StructuralModel, ModelError> {
        for ins in instruments {
            if self.var_index(ins).is_none() {
                return Err(ModelError::UnknownVariable {
                    context: "instrument".into(),
                    name: ins.to_string(),
                });
            }
        }
        let endogenous: Vec<String> = self
            .variables
            .iter()
            .map(|v| v.name.clone())
            .filter(|v| !instruments.contains(&v.as_str()))
            .collect();
        let policy: Vec<String> = instruments.iter().map(|s| s.to_string()).collect();
        if self.equations.len() != endogenous.len() {
            return Err(ModelError::EquationCount {
                equations: self.equations.len(),
                unknowns: endogenous.len(),
            });
        }
        let shocks: Vec<String> = self.shocks.iter().map(|s| s.name.clone()).collect();
        let mut m = StructuralModel::empty(endogenous, policy, shocks);
        let n = m.n();
        let place = |model: &StructuralModel, name: &str| -> (bool, usize) {
            let idx = model.state_index(name).expect("validated variable");
            if idx < n {
                (true, idx)
            } else {
                (false, idx - n)
            }
        };
        for (row, eq) in self.equations.iter().enumerate() {
            for (name, e) in &eq.lead {
                match place(&m, name) {
                    (true, j) => m.f1.push(row, j, e.clone()),
                    (false, j) => m.f2.push(row, j, e.clone()),
                }
            }
            for (name, e) in &eq.current {
                match place(&m, name) {
                    (true, j) => m.f3.push(row, j, e.clone()),
                    (false, j) => m.f4.push(row, j, e.clone()),
                }
            }
            for (name, e) in &eq.lag {
                match place(&m, name) {
                    (true, j) => m.f_lag_x.push(row, j, e.clone()),
                    (false, j) => m.f_lag_u.push(row, j, e.clone()),
                }
            }
            for (name, e) in &eq.shocks {
                let j = m.shocks.iter().position(|s| s == name).expect("validated shock");
                m.f.push(row, j, e.clone());
            }
        }
        m.shock_scales = self.shocks.iter().map(|s| s.scale.clone()).collect();
        let k = m.k();
        let mo = self.observables.len();
        m.observables = self.observables.iter().map(|o| o.name.clone()).collect();
        m.m1 = ParamMatrix::zeros(mo, n);
        m.m2 = ParamMatrix::zeros(mo, k);
        m.m = ParamMatrix::zeros(mo, mo);
        m.intercept = self.observables.iter().map(|o| o.intercept.clone()).collect();
        for (row, obs) in self.observables.iter().enumerate() {
            for (name, e) in &obs.terms {
                match place(&m, name) {
                    (true, j) => m.m1.push(row, j, e.clone()),
                    (false, j) => m.m2.push(row, j, e.clone()),
                }
            }
            m.m.push(row, row, obs.noise.clone());
        }
        m.roles = self.roles.clone();
        m.policy_shock = self.policy_shock.clone();
        Ok(m)
    }

    /// The structural model with the instrument of `family` as policy variable.
    pub fn for_family(&self, family: RuleFamily) -> Result<StructuralModel, ModelError> {
        let role = family.instrument_role();
        let instrument = self
            .roles
            .get(role)
            .ok_or_else(|| ModelError::MissingRole(role.to_string()))?;
        self.structural(&[instrument.as_str()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nk3_loads_and_covers_its_parameters() {
        let spec = ModelSpec::nk3();
        let cal = spec.calibration();
        for family in [RuleFamily::Taylor, RuleFamily::AugmentedMoneyGrowth] {
            let m = spec.for_family(family).unwrap();
            m.validate().unwrap();
            assert_eq!(m.n(), 8);
            assert_eq!(m.k(), 1);
            assert_eq!(m.m_obs(), 2);
            for p in m.parameters() {
                assert!(cal.get(&p).is_some(), "{p} not calibrated");
            }
        }
        assert!(spec.for_family(RuleFamily::McCallum).is_err());
    }

    #[test]
    fn load_errors() {
        assert!(matches!(ModelSpec::builtin("rbc"), Err(ModelError::UnknownBuiltin(_))));
        assert!(matches!(ModelSpec::load("/nonexistent/model.json"), Err(ModelError::Io(_))));
        assert!(matches!(ModelSpec::from_json("{"), Err(ModelError::Json(_))));
        let mut spec = ModelSpec::nk3();
        spec.equations[0].lead.insert("q".into(), Entry::Literal(1.0));
        let text = serde_json::to_string(&spec).unwrap();
        assert!(matches!(
            ModelSpec::from_json(&text),
            Err(ModelError::UnknownVariable { .. })
        ));
        let spec = ModelSpec::nk3();
        assert!(matches!(
            spec.structural(&[]),
            Err(ModelError::EquationCount { equations: 8, unknowns: 9 })
        ));
    }

    #[test]
    fn serialization_round_trip() {
        let spec = ModelSpec::nk3();
        let text = serde_json::to_string_pretty(&spec).unwrap();
        assert_eq!(ModelSpec::from_json(&text).unwrap(), spec);
    }
}
