//! Stochastic dominance over weighted empirical distributions.
//!
//! Distributions carry an explicit [`Orientation`]. For losses smaller is
//! better: `L1` dominates `L2` at order 1 when `F1 >= F2` everywhere, and at
//! order `k >= 2` when `E(L1 - a)_+^(k-1) <= E(L2 - a)_+^(k-1)` for every `a`
//! (plus, for `k >= 3`, the moment conditions at the lower end of the pooled
//! support). Returns mirror this with lower partial moments.
//!
//! The tests are exact on the pooled support; see `docs/dominance.md` for
//! the argument behind the test-point set.

mod poly;
mod ranking;
mod risk;
mod sd;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ranking::{min_dominance_order, multi_period_sd, rank_rules, RuleRanking};
pub use risk::{omega_ratio, var_cvar};
pub use sd::{sd_dominates, sd_dominates_losses, sd_dominates_returns, SDResult};

/// Highest supported dominance order.
pub const MAX_ORDER: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DominanceError {
    #[error("expected {expected:?} orientation, got {got:?}")]
    Orientation { expected: Orientation, got: Orientation },
    #[error("dominance order {0} outside 1..=8")]
    Order(usize),
    #[error("distribution needs at least one atom")]
    Empty,
    #[error("values must be finite and weights positive and finite")]
    BadSample,
    #[error("{values} values but {weights} weights")]
    WeightCount { values: usize, weights: usize },
    #[error("level {0} outside (0, 1)")]
    Level(f64),
    #[error("Omega ratio undefined at threshold {0}: no mass below it and mean not above it")]
    OmegaUndefined(f64),
    #[error("sequence lengths differ or are empty ({0} vs {1})")]
    Length(usize, usize),
    #[error("need at least two distributions to rank")]
    TooFew,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Loss,
    Return,
}

/// Sorted atoms with positive weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    points: Vec<f64>,
    weights: Vec<f64>,
    orientation: Orientation,
}

impl EmpiricalDistribution {
    /// Sorts the atoms, merges ties and normalizes the weights.
    pub fn new(values: &[f64], weights: &[f64], orientation: Orientation) -> Result<Self, DominanceError> {
        if values.len() != weights.len() {
            return Err(DominanceError::WeightCount {
                values: values.len(),
                weights: weights.len(),
            });
        }
        if values.is_empty() {
            return Err(DominanceError::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(DominanceError::BadSample);
        }
        let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = weights.iter().sum();
        let mut points: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut merged: Vec<f64> = Vec::with_capacity(pairs.len());
        for (v, w) in pairs {
            if points.last() == Some(&v) {
                *merged.last_mut().expect("nonempty") += w;
            } else {
                points.push(v);
                merged.push(w);
            }
        }
        Ok(Self {
            points,
            weights: merged.into_iter().map(|w| w / total).collect(),
            orientation,
        })
    }

    pub fn equally_weighted(values: &[f64], orientation: Orientation) -> Result<Self, DominanceError> {
        Self::new(values, &vec![1.0; values.len()], orientation)
    }

    pub fn losses(values: &[f64]) -> Result<Self, DominanceError> {
        Self::equally_weighted(values, Orientation::Loss)
    }

    pub fn returns(values: &[f64]) -> Result<Self, DominanceError> {
        Self::equally_weighted(values, Orientation::Return)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(x, w)| x * w).sum()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let end = self.points.partition_point(|p| *p <= x);
        self.weights[..end].iter().sum()
    }

    /// `E (X - x)_+^j`; for `j = 0` the mass strictly above `x`.
    pub fn upper_partial_moment(&self, x: f64, j: u32) -> f64 {
        let start = self.points.partition_point(|p| *p <= x);
        self.points[start..]
            .iter()
            .zip(&self.weights[start..])
            .map(|(p, w)| w * (p - x).powi(j as i32))
            .sum()
    }

    /// `E (x - X)_+^j`; for `j = 0` the mass strictly below `x`.
    pub fn lower_partial_moment(&self, x: f64, j: u32) -> f64 {
        let end = self.points.partition_point(|p| *p < x);
        self.points[..end]
            .iter()
            .zip(&self.weights[..end])
            .map(|(p, w)| w * (x - p).powi(j as i32))
            .sum()
    }

    /// The distribution of `-X` with the opposite orientation, e.g. returns
    /// as losses.
    pub fn negated(&self) -> Self {
        let flip = match self.orientation {
            Orientation::Loss => Orientation::Return,
            Orientation::Return => Orientation::Loss,
        };
        Self {
            points: self.points.iter().rev().map(|p| -p).collect(),
            weights: self.weights.iter().rev().copied().collect(),
            orientation: flip,
        }
    }

    pub(crate) fn expect(&self, o: Orientation) -> Result<(), DominanceError> {
        if self.orientation == o {
            Ok(())
        } else {
            Err(DominanceError::Orientation {
                expected: o,
                got: self.orientation,
            })
        }
    }
}

/// `E (X - x)_+^j` as a free function.
pub fn upper_partial_moment(d: &EmpiricalDistribution, x: f64, j: u32) -> f64 {
    d.upper_partial_moment(x, j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_sorts_merges_and_normalizes() {
        let d = EmpiricalDistribution::new(&[3.0, 1.0, 3.0], &[1.0, 2.0, 1.0], Orientation::Loss).unwrap();
        assert_eq!(d.points(), [1.0, 3.0]);
        assert_eq!(d.weights(), [0.5, 0.5]);
        assert!(EmpiricalDistribution::losses(&[]).is_err());
        assert!(EmpiricalDistribution::losses(&[f64::NAN]).is_err());
        assert!(EmpiricalDistribution::new(&[1.0], &[0.0], Orientation::Loss).is_err());
        assert!(EmpiricalDistribution::new(&[1.0], &[1.0, 2.0], Orientation::Loss).is_err());
    }

    #[test]
    fn partial_moment_examples() {
        let d = EmpiricalDistribution::losses(&[1.0, 3.0]).unwrap();
        assert_eq!(d.upper_partial_moment(2.0, 1), 0.5);
        assert_eq!(d.upper_partial_moment(-1.0, 1), d.mean() + 1.0);
        for j in 0..5 {
            assert_eq!(d.upper_partial_moment(3.0, j), 0.0);
            assert_eq!(d.upper_partial_moment(10.0, j), 0.0);
        }
        // ties at x are excluded for j = 0
        assert_eq!(d.upper_partial_moment(1.0, 0), 0.5);
        assert_eq!(d.lower_partial_moment(3.0, 0), 0.5);
        assert_eq!(d.lower_partial_moment(4.0, 2), 0.5 * 9.0 + 0.5);
        assert_eq!(d.cdf(1.0), 0.5);
        assert_eq!(d.cdf(0.999), 0.0);
    }

    #[test]
    fn negation_flips_orientation() {
        let d = EmpiricalDistribution::new(&[1.0, 2.0], &[0.25, 0.75], Orientation::Return).unwrap();
        let n = d.negated();
        assert_eq!(n.points(), [-2.0, -1.0]);
        assert_eq!(n.weights(), [0.75, 0.25]);
        assert_eq!(n.orientation(), Orientation::Loss);
        assert_eq!(n.negated(), d);
    }
}
