//! Level-form rule evaluators that do not need a model.

use serde::{Deserialize, Serialize};

use super::{RuleCoefficients, RuleError, RuleFamily};

/// Block reward schedule and the fitted exponential supply curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupplySchedule {
    pub initial_reward: f64,
    pub halving_interval: u64,
    pub halvings: u64,
    pub period: SupplyPeriod,
    pub cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SupplyPeriod {
    Yearly,
    Quarterly,
}

impl SupplyPeriod {
    /// Fitted per-period growth rate of the exponential curve.
    pub fn alpha(self) -> f64 {
        match self {
            SupplyPeriod::Yearly => 0.825,
            SupplyPeriod::Quarterly => 0.953,
        }
    }
}

impl Default for SupplySchedule {
    fn default() -> Self {
        Self {
            initial_reward: 50.0,
            halving_interval: 210_000,
            halvings: 33,
            period: SupplyPeriod::Yearly,
            cap: 2.1e7,
        }
    }
}

impl SupplySchedule {
    /// Last height that pays a reward, plus one.
    pub fn final_height(&self) -> u64 {
        self.halving_interval * self.halvings
    }

    /// Reward paid at `height`.
    pub fn block_reward(&self, height: u64) -> f64 {
        if height >= self.final_height() {
            return 0.0;
        }
        self.initial_reward * 0.5_f64.powi((height / self.halving_interval) as i32)
    }

    /// Cumulative reward of the blocks at heights `0..t`, with the reward at
    /// height `s` equal to `initial_reward / 2^floor(s / interval)`.
    pub fn block_supply(&self, t: u64) -> f64 {
        let t = t.min(self.final_height());
        let full_eras = t / self.halving_interval;
        let rest = t % self.halving_interval;
        let reward = |era: u64| self.initial_reward * 0.5_f64.powi(era as i32);
        let mut total: f64 = (0..full_eras)
            .map(|e| reward(e) * self.halving_interval as f64)
            .sum();
        total += reward(full_eras) * rest as f64;
        total
    }

    pub fn fit(&self, t: u64) -> Result<f64, RuleError> {
        fit_with(self.cap, t, self.period.alpha())
    }
}

/// Cumulative supply after `t` blocks under the default schedule.
pub fn btc_block_supply(t: u64) -> f64 {
    SupplySchedule::default().block_supply(t)
}

/// Same schedule in integer satoshis, each reward rounded down as the
/// protocol does (`5_000_000_000 >> era`).
pub fn btc_block_supply_sat(t: u64) -> u64 {
    let s = SupplySchedule::default();
    let t = t.min(s.final_height());
    let reward = |era: u64| 5_000_000_000_u64 >> era;
    let full_eras = t / s.halving_interval;
    let rest = t % s.halving_interval;
    (0..full_eras)
        .map(|e| reward(e) * s.halving_interval)
        .sum::<u64>()
        + reward(full_eras) * rest
}

fn check_alpha(alpha: f64) -> Result<(), RuleError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(RuleError::BadGrowthRate(alpha))
    }
}

fn fit_with(cap: f64, t: u64, alpha: f64) -> Result<f64, RuleError> {
    check_alpha(alpha)?;
    let t = i32::try_from(t).unwrap_or(i32::MAX);
    Ok(cap * (1.0 - alpha.powi(t)))
}

/// Exponential supply fit `2.1e7 * (1 - alpha^t)`.
pub fn btc_supply_fit(t: u64, alpha: f64) -> Result<f64, RuleError> {
    fit_with(2.1e7, t, alpha)
}

/// `S_0 ..= S_periods` from `S_{t+1} = alpha S_t + (1 - alpha) 2.1e7`, `S_0 = 0`.
pub fn btc_supply_fit_path(alpha: f64, periods: usize) -> Result<Vec<f64>, RuleError> {
    check_alpha(alpha)?;
    let mut out = Vec::with_capacity(periods + 1);
    let mut s = 0.0;
    out.push(s);
    for _ in 0..periods {
        s = alpha * s + (1.0 - alpha) * 2.1e7;
        out.push(s);
    }
    Ok(out)
}

/// Base-money growth with a 16-period velocity correction.
///
/// `history` holds `(x, b)` pairs in time order, the newest being `t-1`; at
/// least 17 entries are needed.
pub fn mccallum_delta_b(
    history: &[(f64, f64)],
    x_target: f64,
    dx_star: f64,
    lambda_fb: f64,
) -> Result<f64, RuleError> {
    const NEED: usize = 17;
    if history.len() < NEED {
        return Err(RuleError::InsufficientHistory {
            needed: NEED,
            got: history.len(),
        });
    }
    if lambda_fb < 0.0 {
        return Err(RuleError::NegativeFeedback(lambda_fb));
    }
    let (x1, b1) = history[history.len() - 1];
    let (x17, b17) = history[history.len() - NEED];
    Ok(dx_star - (x1 - b1 - x17 + b17) / 16.0 + lambda_fb * (x_target - x1))
}

fn expect_family(c: &RuleCoefficients, allowed: &[RuleFamily]) -> Result<(), RuleError> {
    if allowed.contains(&c.family) {
        Ok(())
    } else {
        Err(RuleError::WrongFamily {
            expected: allowed[0],
            got: c.family,
        })
    }
}

/// Gross money growth `mu_t` from
/// `ln(mu_t/mu) = rho_mm ln(mu_prev/mu) + rho_mpi ln(pi_t/pi) + rho_mx ln(x_t/x)`.
///
/// Accepts augmented or constant money-growth coefficients; the latter has
/// all feedback terms zero.
pub fn money_growth_step(
    mu_prev: f64,
    pi_t: f64,
    x_t: f64,
    c: &RuleCoefficients,
) -> Result<f64, RuleError> {
    expect_family(
        c,
        &[RuleFamily::AugmentedMoneyGrowth, RuleFamily::ConstantMoneyGrowth],
    )?;
    for (name, v) in [("mu_prev", mu_prev), ("pi_t", pi_t), ("x_t", x_t)] {
        if !(v > 0.0) {
            return Err(RuleError::NonPositive(name));
        }
    }
    let get = |n: &str, d: f64| c.get(n).unwrap_or(d);
    let (mu, pi, x) = (get("mu_ss", 1.0), get("pi_ss", 1.0), get("x_ss", 1.0));
    if !(mu > 0.0 && pi > 0.0 && x > 0.0) {
        return Err(RuleError::NonPositive("steady state"));
    }
    let log_dev = get("rho_mm", 0.0) * (mu_prev / mu).ln()
        + get("rho_mpi", 0.0) * (pi_t / pi).ln()
        + get("rho_mx", 0.0) * (x_t / x).ln();
    Ok(mu * log_dev.exp())
}

/// `dM = dM* + theta1 dM_prev - theta2 y_hat - theta3 (pi - pi*)`.
pub fn china_quantity_step(
    dm_prev: f64,
    y_hat: f64,
    pi_t: f64,
    dm_star: f64,
    c: &RuleCoefficients,
) -> Result<f64, RuleError> {
    expect_family(c, &[RuleFamily::ChinaQuantity])?;
    Ok(dm_star + c.req("theta1") * dm_prev
        - c.req("theta2") * y_hat
        - c.req("theta3") * (pi_t - c.req("pi_star")))
}
