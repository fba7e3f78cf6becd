//! CRRA stochastic discount factors for two segmented markets: a dominant
//! currency `D` and a proof-of-work/stake incumbent `B`.
//!
//! These are numeric evaluators of the pricing identities on user-supplied
//! series, not an equilibrium solver.

use serde::{Deserialize, Serialize};

use super::PortfolioError;
use crate::dominance::{sd_dominates_returns, EmpiricalDistribution, SDResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Market {
    Dominant,
    Bitcoin,
}

/// Per-period series for both markets, all of the same length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingInputs {
    /// Relative risk aversion.
    pub gamma: f64,
    /// Monetary-policy shock levels.
    pub ms_d: Vec<f64>,
    pub ms_b: Vec<f64>,
    /// Consumption levels.
    pub c_d: Vec<f64>,
    pub c_b: Vec<f64>,
    /// Real exchange rate.
    pub q: Vec<f64>,
    /// Log (continuously compounded) risk-free rates.
    pub rf_d: f64,
    pub rf_b: f64,
}

impl PricingInputs {
    pub fn validate(&self) -> Result<(), PortfolioError> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(PortfolioError::BadRiskAversion);
        }
        let series: [(&'static str, &Vec<f64>); 5] = [
            ("ms_d", &self.ms_d),
            ("ms_b", &self.ms_b),
            ("c_d", &self.c_d),
            ("c_b", &self.c_b),
            ("q", &self.q),
        ];
        let len = self.ms_d.len();
        for (name, s) in series {
            if s.len() != len {
                return Err(PortfolioError::SeriesLength);
            }
            if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(PortfolioError::NonPositive(name));
            }
        }
        if len < 2 {
            return Err(PortfolioError::TooShort);
        }
        for (name, r) in [("rf_d", self.rf_d), ("rf_b", self.rf_b)] {
            if !r.is_finite() {
                return Err(PortfolioError::NonPositive(name));
            }
        }
        Ok(())
    }

    fn series(&self, market: Market) -> (&[f64], &[f64]) {
        match market {
            Market::Dominant => (&self.ms_d, &self.c_d),
            Market::Bitcoin => (&self.ms_b, &self.c_b),
        }
    }
}

/// `M_{t+1}` for `t = 0..T-1` and its consumption and monetary factors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdfSeries {
    pub total: Vec<f64>,
    pub consumption: Vec<f64>,
    pub monetary: Vec<f64>,
}

fn growth_pow(s: &[f64], gamma: f64) -> Vec<f64> {
    s.windows(2).map(|w| (w[1] / w[0]).powf(-gamma)).collect()
}

/// `M_{t+1} = (ms_{t+1} C_{t+1} / (ms_t C_t))^-gamma` in `market`.
pub fn crra_sdf(inputs: &PricingInputs, market: Market) -> Result<SdfSeries, PortfolioError> {
    inputs.validate()?;
    let (ms, c) = inputs.series(market);
    let total = ms
        .windows(2)
        .zip(c.windows(2))
        .map(|(m, c)| ((m[1] * c[1]) / (m[0] * c[0])).powf(-inputs.gamma))
        .collect();
    Ok(SdfSeries {
        total,
        consumption: growth_pow(c, inputs.gamma),
        monetary: growth_pow(ms, inputs.gamma),
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population variance.
fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

/// Expected log real-exchange-rate change under lognormal SDFs, split into
/// its addends.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnDecomposition {
    pub total: f64,
    /// `r^B - r^D`.
    pub rate_spread: f64,
    /// `(Var m^B - Var m^D) / 2`.
    pub variance_term: f64,
    /// `E m^{ms_B}`.
    pub ms_b_term: f64,
    /// `-E m^{ms_D}`.
    pub ms_d_term: f64,
    /// `E m^{ms_B} - E m^{ms_D}`; positive means the dominant currency is
    /// expected to appreciate through the monetary channel.
    pub ms_premium: f64,
    pub dominant_appreciates: bool,
}

pub fn expected_return_decomposition(inputs: &PricingInputs) -> Result<ReturnDecomposition, PortfolioError> {
    let d = crra_sdf(inputs, Market::Dominant)?;
    let b = crra_sdf(inputs, Market::Bitcoin)?;
    let logs = |v: &[f64]| v.iter().map(|x| x.ln()).collect::<Vec<_>>();
    let rate_spread = inputs.rf_b - inputs.rf_d;
    let variance_term = 0.5 * (variance(&logs(&b.total)) - variance(&logs(&d.total)));
    let ms_b_term = mean(&logs(&b.monetary));
    let ms_d_term = -mean(&logs(&d.monetary));
    let ms_premium = ms_b_term + ms_d_term;
    Ok(ReturnDecomposition {
        total: rate_spread + variance_term + ms_b_term + ms_d_term,
        rate_spread,
        variance_term,
        ms_b_term,
        ms_d_term,
        ms_premium,
        dominant_appreciates: ms_premium > 0.0,
    })
}

/// Absolute gaps between sample Euler-equation means and the inverse gross
/// risk-free rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricingResiduals {
    /// `|mean(M^B Q'/Q) - 1/R^D|`.
    pub dominant_holder: f64,
    /// `|mean(M^D Q'/Q) - 1/R^B|`.
    pub bitcoin_holder: f64,
    /// `|mean(M^D M^{ms_B} / M^{ms_D}) - 1/R^D|`.
    pub dominant_holder_monetary: f64,
    /// `|mean(M^B M^{ms_D} / M^{ms_B}) - 1/R^B|`.
    pub bitcoin_holder_monetary: f64,
}

pub fn fundamental_pricing_check(inputs: &PricingInputs) -> Result<PricingResiduals, PortfolioError> {
    let d = crra_sdf(inputs, Market::Dominant)?;
    let b = crra_sdf(inputs, Market::Bitcoin)?;
    let q_growth: Vec<f64> = inputs.q.windows(2).map(|w| w[1] / w[0]).collect();
    let inv_rd = (-inputs.rf_d).exp();
    let inv_rb = (-inputs.rf_b).exp();
    let euler = |m: &[f64], g: &[f64]| mean(&m.iter().zip(g).map(|(a, b)| a * b).collect::<Vec<_>>());
    let ratio = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x / y).collect::<Vec<_>>();
    Ok(PricingResiduals {
        dominant_holder: (euler(&b.total, &q_growth) - inv_rd).abs(),
        bitcoin_holder: (euler(&d.total, &q_growth) - inv_rb).abs(),
        dominant_holder_monetary: (euler(&d.total, &ratio(&b.monetary, &d.monetary)) - inv_rd).abs(),
        bitcoin_holder_monetary: (euler(&b.total, &ratio(&d.monetary, &b.monetary)) - inv_rb).abs(),
    })
}

/// Whether asset `y` first-order dominates `x` and an investor's beliefs
/// put `y` weakly above `x` as well; together these are the conditions
/// under which switching from `x` to `y` is an arbitrage in a complete
/// market.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArbitrageReport {
    pub first_order: SDResult,
    /// `max_a P(y <= a) - P(x <= a)` under the beliefs.
    pub max_belief_gap: f64,
    pub beliefs_agree: bool,
    pub conditions_hold: bool,
}

pub fn arbitrage_diagnostic(
    x: &EmpiricalDistribution,
    y: &EmpiricalDistribution,
    belief_x: &EmpiricalDistribution,
    belief_y: &EmpiricalDistribution,
) -> Result<ArbitrageReport, PortfolioError> {
    let first_order = sd_dominates_returns(y, x, 1)?;
    let max_belief_gap = belief_x
        .points()
        .iter()
        .chain(belief_y.points())
        .map(|&a| belief_y.cdf(a) - belief_x.cdf(a))
        .fold(f64::NEG_INFINITY, f64::max);
    let beliefs_agree = max_belief_gap <= 1e-12;
    Ok(ArbitrageReport {
        conditions_hold: first_order.weak && beliefs_agree,
        first_order,
        max_belief_gap,
        beliefs_agree,
    })
}
