//! Monetary-policy rule families.
//!
//! Each family has named feedback coefficients with a default box. Inside a
//! model the rule enters in log-deviation form as a [`PolicyBlock`]; the
//! standalone evaluators in [`evaluators`] keep the level form.
//!
//! Blocks on a model with one instrument (the built-in `nk3` layout):
//!
//! | family | instrument role | equation |
//! |---|---|---|
//! | Taylor | `interest_rate` | `i = rho1 i_lag + (rho2-rho1)(phi_pi pi + phi_y (y - y_lag)) - rho3 (mr_lag - y_lag) + e_i` |
//! | AugmentedMoneyGrowth | `money_growth` | `mu = rho_mm mu_lag + rho_mpi pi + rho_mx y` |
//! | ConstantMoneyGrowth, BitcoinSupply | `money_growth` | `mu = 0` |
//! | ChinaQuantity | `money_growth` | `mu = theta1 mu_lag - theta2 y - theta3 pi` |
//!
//! McCallum's rule targets a base-money stock with a 16-quarter velocity
//! average and has no block on `nk3`; use [`evaluators::mccallum_delta_b`].

pub mod evaluators;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lre::StructuralModel;

pub use evaluators::{
    btc_block_supply, btc_block_supply_sat, btc_supply_fit, btc_supply_fit_path,
    china_quantity_step, mccallum_delta_b, money_growth_step, SupplyPeriod, SupplySchedule,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("unknown rule family `{0}`")]
    UnknownFamily(String),
    #[error("{family} has no coefficient `{name}`")]
    UnknownCoefficient { family: RuleFamily, name: String },
    #[error("coefficient `{0}` must be finite")]
    NonFinite(String),
    #[error("{family} cannot be placed in this model: {reason}")]
    UnsupportedPairing { family: RuleFamily, reason: String },
    #[error("model declares no variable for role `{0}`")]
    MissingRole(String),
    #[error("coefficients belong to {got}, expected {expected}")]
    WrongFamily { expected: RuleFamily, got: RuleFamily },
    #[error("need {needed} history entries, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("{0} must be strictly positive")]
    NonPositive(&'static str),
    #[error("growth rate {0} outside (0, 1)")]
    BadGrowthRate(f64),
    #[error("feedback weight must be nonnegative, got {0}")]
    NegativeFeedback(f64),
    #[error("malformed coefficient override `{0}`, expected name=value")]
    BadOverride(String),
    #[error("{family} coefficient `{0}` is missing", family = .1)]
    MissingCoefficient(String, RuleFamily),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleFamily {
    Taylor,
    ConstantMoneyGrowth,
    BitcoinSupply,
    McCallum,
    AugmentedMoneyGrowth,
    ChinaQuantity,
}

/// Name, box bounds and default value of one coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientSpec {
    pub name: &'static str,
    pub lower: f64,
    pub upper: f64,
    pub default: f64,
}

const fn coef(name: &'static str, lower: f64, upper: f64, default: f64) -> CoefficientSpec {
    CoefficientSpec {
        name,
        lower,
        upper,
        default,
    }
}

const fn fixed(name: &'static str, value: f64) -> CoefficientSpec {
    coef(name, value, value, value)
}

const TAYLOR: &[CoefficientSpec] = &[
    coef("rho1", 0.0, 0.97, 0.0),
    fixed("rho2", 1.0),
    fixed("rho3", 0.0),
    coef("phi_pi", 1.01, 5.0, 1.5),
    coef("phi_y", 0.0, 2.0, 0.5),
    fixed("i_bar", 0.01),
    fixed("pi_bar", 0.005),
];
const CONSTANT_MONEY: &[CoefficientSpec] = &[fixed("mu_ss", 1.005)];
const BITCOIN: &[CoefficientSpec] = &[];
const MCCALLUM: &[CoefficientSpec] = &[fixed("dx_star", 0.005), coef("lambda_fb", 0.0, 1.0, 0.25)];
const AUGMENTED_MONEY: &[CoefficientSpec] = &[
    coef("rho_mm", 0.0, 0.97, 0.5),
    coef("rho_mpi", -2.0, 0.0, -0.5),
    coef("rho_mx", -2.0, 0.0, -0.5),
    fixed("mu_ss", 1.005),
    fixed("pi_ss", 1.005),
    fixed("x_ss", 1.0),
];
const CHINA: &[CoefficientSpec] = &[
    coef("theta1", 0.0, 0.97, 0.88),
    coef("theta2", 0.0, 2.0, 0.16),
    coef("theta3", 0.0, 2.0, 0.06),
    fixed("pi_star", 0.0),
];

impl RuleFamily {
    pub const ALL: [RuleFamily; 6] = [
        RuleFamily::Taylor,
        RuleFamily::ConstantMoneyGrowth,
        RuleFamily::BitcoinSupply,
        RuleFamily::McCallum,
        RuleFamily::AugmentedMoneyGrowth,
        RuleFamily::ChinaQuantity,
    ];

    pub fn coefficients(self) -> &'static [CoefficientSpec] {
        match self {
            RuleFamily::Taylor => TAYLOR,
            RuleFamily::ConstantMoneyGrowth => CONSTANT_MONEY,
            RuleFamily::BitcoinSupply => BITCOIN,
            RuleFamily::McCallum => MCCALLUM,
            RuleFamily::AugmentedMoneyGrowth => AUGMENTED_MONEY,
            RuleFamily::ChinaQuantity => CHINA,
        }
    }

    pub fn spec(self, name: &str) -> Option<&'static CoefficientSpec> {
        self.coefficients().iter().find(|c| c.name == name)
    }

    /// Role of the model variable this family sets.
    pub fn instrument_role(self) -> &'static str {
        match self {
            RuleFamily::Taylor => "interest_rate",
            RuleFamily::McCallum => "base_money",
            _ => "money_growth",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RuleFamily::Taylor => "Taylor",
            RuleFamily::ConstantMoneyGrowth => "ConstantMoneyGrowth",
            RuleFamily::BitcoinSupply => "BitcoinSupply",
            RuleFamily::McCallum => "McCallum",
            RuleFamily::AugmentedMoneyGrowth => "AugmentedMoneyGrowth",
            RuleFamily::ChinaQuantity => "ChinaQuantity",
        }
    }
}

impl fmt::Display for RuleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleFamily {
    type Err = RuleError;

    /// Case-insensitive; `-` and `_` are ignored, so `augmented-money-growth`
    /// and `AugmentedMoneyGrowth` both parse.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .flat_map(char::to_lowercase)
            .collect();
        RuleFamily::ALL
            .into_iter()
            .find(|f| f.name().to_lowercase() == key)
            .or(match key.as_str() {
                "constant" => Some(RuleFamily::ConstantMoneyGrowth),
                "augmented" => Some(RuleFamily::AugmentedMoneyGrowth),
                "bitcoin" => Some(RuleFamily::BitcoinSupply),
                "china" => Some(RuleFamily::ChinaQuantity),
                _ => None,
            })
            .ok_or_else(|| RuleError::UnknownFamily(s.to_string()))
    }
}

/// Feedback coefficients of one rule family.
///
/// Values only need to be finite; membership in the default box is checked
/// by [`RuleCoefficients::in_box`] and enforced by the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoefficients")]
pub struct RuleCoefficients {
    pub family: RuleFamily,
    values: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
struct RawCoefficients {
    family: RuleFamily,
    values: BTreeMap<String, f64>,
}

impl TryFrom<RawCoefficients> for RuleCoefficients {
    type Error = RuleError;

    fn try_from(raw: RawCoefficients) -> Result<Self, RuleError> {
        let mut c = RuleCoefficients::defaults(raw.family);
        for spec in raw.family.coefficients() {
            if !raw.values.contains_key(spec.name) {
                return Err(RuleError::MissingCoefficient(spec.name.to_string(), raw.family));
            }
        }
        for (name, v) in raw.values {
            c.set(&name, v)?;
        }
        Ok(c)
    }
}

impl RuleCoefficients {
    pub fn defaults(family: RuleFamily) -> Self {
        Self {
            family,
            values: family
                .coefficients()
                .iter()
                .map(|c| (c.name.to_string(), c.default))
                .collect(),
        }
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), RuleError> {
        if self.family.spec(name).is_none() {
            return Err(RuleError::UnknownCoefficient {
                family: self.family,
                name: name.to_string(),
            });
        }
        if !value.is_finite() {
            return Err(RuleError::NonFinite(name.to_string()));
        }
        self.values.insert(name.to_string(), value);
        Ok(())
    }

    pub fn with(mut self, name: &str, value: f64) -> Result<Self, RuleError> {
        self.set(name, value)?;
        Ok(self)
    }

    /// Applies a `name=value` override.
    pub fn apply_override(&mut self, text: &str) -> Result<(), RuleError> {
        let (name, value) = text
            .split_once('=')
            .ok_or_else(|| RuleError::BadOverride(text.to_string()))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| RuleError::BadOverride(text.to_string()))?;
        self.set(name.trim(), value)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    fn req(&self, name: &str) -> f64 {
        // every family coefficient is present by construction
        self.values[name]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.family
            .coefficients()
            .iter()
            .map(|c| (c.name, self.values[c.name]))
    }

    pub fn in_box(&self) -> bool {
        self.iter().all(|(name, v)| {
            let s = self.family.spec(name).expect("known coefficient");
            v >= s.lower && v <= s.upper
        })
    }
}

/// Policy matrices `G1, G2, G3, Gx_lag, Gu_lag, G` for `k` instruments,
/// `n` non-policy variables and `s` shocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyBlock {
    pub g1: DMatrix<f64>,
    pub g2: DMatrix<f64>,
    pub g3: DMatrix<f64>,
    pub g_lag_x: DMatrix<f64>,
    pub g_lag_u: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

impl PolicyBlock {
    pub fn zeros(n: usize, k: usize, s: usize) -> Self {
        Self {
            g1: DMatrix::zeros(k, k),
            g2: DMatrix::zeros(k, n),
            g3: DMatrix::zeros(k, n),
            g_lag_x: DMatrix::zeros(k, n),
            g_lag_u: DMatrix::zeros(k, k),
            g: DMatrix::zeros(k, s),
        }
    }
}

struct BlockBuilder<'a> {
    model: &'a StructuralModel,
    family: RuleFamily,
    block: PolicyBlock,
}

impl BlockBuilder<'_> {
    fn index(&self, role: &str) -> Result<usize, RuleError> {
        self.model
            .role_index(role)
            .ok_or_else(|| RuleError::MissingRole(role.to_string()))
    }

    /// Adds `coef * role` to the right-hand side at the current date.
    fn current(&mut self, role: &str, coef: f64) -> Result<(), RuleError> {
        let idx = self.index(role)?;
        let n = self.model.n();
        if idx < n {
            self.block.g3[(0, idx)] += coef;
        } else {
            self.block.g1[(0, idx - n)] -= coef;
        }
        Ok(())
    }

    fn lag(&mut self, role: &str, coef: f64) -> Result<(), RuleError> {
        let idx = self.index(role)?;
        let n = self.model.n();
        if idx < n {
            self.block.g_lag_x[(0, idx)] += coef;
        } else {
            self.block.g_lag_u[(0, idx - n)] += coef;
        }
        Ok(())
    }

    fn policy_shock(&mut self) -> Result<(), RuleError> {
        let Some(name) = &self.model.policy_shock else {
            return Ok(());
        };
        let j = self
            .model
            .shocks
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| RuleError::UnsupportedPairing {
                family: self.family,
                reason: format!("unknown policy shock `{name}`"),
            })?;
        self.block.g[(0, j)] = 1.0;
        Ok(())
    }
}

/// Encodes the rule as the policy block of `model`.
pub fn rule_to_policy_block(
    c: &RuleCoefficients,
    model: &StructuralModel,
) -> Result<PolicyBlock, RuleError> {
    let family = c.family;
    if family == RuleFamily::McCallum {
        return Err(RuleError::UnsupportedPairing {
            family,
            reason: "the base-money rule has no log-linear block; use the standalone evaluator".into(),
        });
    }
    let role = family.instrument_role();
    let instrument = model.roles.get(role).ok_or_else(|| RuleError::UnsupportedPairing {
        family,
        reason: format!("no variable has role `{role}`"),
    })?;
    if model.policy.len() != 1 || &model.policy[0] != instrument {
        return Err(RuleError::UnsupportedPairing {
            family,
            reason: format!(
                "instrument `{instrument}` must be the single policy variable, model has {:?}",
                model.policy
            ),
        });
    }
    let mut b = BlockBuilder {
        model,
        family,
        block: PolicyBlock::zeros(model.n(), 1, model.shocks.len()),
    };
    b.block.g1[(0, 0)] = 1.0;
    match family {
        RuleFamily::Taylor => {
            let gain = c.req("rho2") - c.req("rho1");
            b.lag(role, c.req("rho1"))?;
            b.current("inflation", gain * c.req("phi_pi"))?;
            b.current("output_gap", gain * c.req("phi_y"))?;
            b.lag("output_gap", -gain * c.req("phi_y"))?;
            let rho3 = c.req("rho3");
            if rho3 != 0.0 {
                b.lag("real_balances", -rho3)?;
                b.lag("output_gap", rho3)?;
            }
            b.policy_shock()?;
        }
        RuleFamily::AugmentedMoneyGrowth => {
            b.lag(role, c.req("rho_mm"))?;
            b.current("inflation", c.req("rho_mpi"))?;
            b.current("output_gap", c.req("rho_mx"))?;
        }
        RuleFamily::ChinaQuantity => {
            b.lag(role, c.req("theta1"))?;
            b.current("output_gap", -c.req("theta2"))?;
            b.current("inflation", -c.req("theta3"))?;
        }
        RuleFamily::ConstantMoneyGrowth | RuleFamily::BitcoinSupply => {}
        RuleFamily::McCallum => unreachable!("rejected above"),
    }
    Ok(b.block)
}

/// The catalog of families, coefficient names and default boxes.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub family: RuleFamily,
    pub instrument_role: &'static str,
    pub coefficients: &'static [CoefficientSpec],
}

pub fn catalog() -> Vec<CatalogEntry> {
    RuleFamily::ALL
        .into_iter()
        .map(|family| CatalogEntry {
            family,
            instrument_role: family.instrument_role(),
            coefficients: family.coefficients(),
        })
        .collect()
}
