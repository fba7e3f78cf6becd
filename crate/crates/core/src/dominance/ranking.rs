use serde::Serialize;

use super::sd::{sd_dominates, SDResult};
use super::{DominanceError, EmpiricalDistribution, MAX_ORDER};

/// Smallest order `k <= kmax` at which `d1` dominates `d2`.
pub fn min_dominance_order(
    d1: &EmpiricalDistribution,
    d2: &EmpiricalDistribution,
    kmax: usize,
) -> Result<Option<usize>, DominanceError> {
    if !(1..=MAX_ORDER).contains(&kmax) {
        return Err(DominanceError::Order(kmax));
    }
    for k in 1..=kmax {
        if sd_dominates(d1, d2, k)?.dominates {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// Pairwise dominance across named distributions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleRanking {
    pub names: Vec<String>,
    pub kmax: usize,
    /// `results[k - 1][row][col]`: does `row` dominate `col` at order `k`.
    /// Diagonal entries are `None`.
    pub results: Vec<Vec<Vec<Option<SDResult>>>>,
    /// Smallest order at which `row` dominates `col`.
    pub min_order: Vec<Vec<Option<usize>>>,
    /// Name of the distribution dominating every other at `optimal_order`.
    pub optimal: Option<String>,
    pub optimal_order: Option<usize>,
}

/// Tests every ordered pair at orders `1..=kmax`. A distribution is reported
/// optimal at the smallest order where it dominates all others.
pub fn rank_rules(
    dists: &[(String, EmpiricalDistribution)],
    kmax: usize,
) -> Result<RuleRanking, DominanceError> {
    if dists.len() < 2 {
        return Err(DominanceError::TooFew);
    }
    if !(1..=MAX_ORDER).contains(&kmax) {
        return Err(DominanceError::Order(kmax));
    }
    let n = dists.len();
    let mut results = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let mut grid = vec![vec![None; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    grid[i][j] = Some(sd_dominates(&dists[i].1, &dists[j].1, k)?);
                }
            }
        }
        results.push(grid);
    }
    let min_order = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (1..=kmax).find(|&k| results[k - 1][i][j].is_some_and(|r: SDResult| r.dominates))
                })
                .collect()
        })
        .collect();
    let mut optimal = None;
    let mut optimal_order = None;
    'orders: for k in 1..=kmax {
        for i in 0..n {
            if (0..n).all(|j| i == j || results[k - 1][i][j].is_some_and(|r| r.dominates)) {
                optimal = Some(dists[i].0.clone());
                optimal_order = Some(k);
                break 'orders;
            }
        }
    }
    Ok(RuleRanking {
        names: dists.iter().map(|(n, _)| n.clone()).collect(),
        kmax,
        results,
        min_order,
        optimal,
        optimal_order,
    })
}

/// Sufficient check for multi-period dominance: `seq1` weakly dominates
/// `seq2` period by period at `order` (1 or 2) and strictly in at least one
/// period. `false` does not prove the absence of dominance.
pub fn multi_period_sd(
    seq1: &[EmpiricalDistribution],
    seq2: &[EmpiricalDistribution],
    order: usize,
) -> Result<bool, DominanceError> {
    if seq1.len() != seq2.len() || seq1.is_empty() {
        return Err(DominanceError::Length(seq1.len(), seq2.len()));
    }
    if !(1..=2).contains(&order) {
        return Err(DominanceError::Order(order));
    }
    let mut any_strict = false;
    for (a, b) in seq1.iter().zip(seq2) {
        let r = sd_dominates(a, b, order)?;
        if !r.weak {
            return Ok(false);
        }
        any_strict |= r.strict;
    }
    Ok(any_strict)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::losses(v).unwrap()
    }

    #[test]
    fn min_order_examples() {
        let same = l(&[1.0, 2.0]);
        assert_eq!(min_dominance_order(&same, &same, 4).unwrap(), None);
        assert_eq!(min_dominance_order(&l(&[1.0]), &l(&[2.0]), 4).unwrap(), Some(1));
        assert_eq!(min_dominance_order(&l(&[2.0]), &l(&[1.0, 3.0]), 4).unwrap(), Some(2));
        assert!(min_dominance_order(&same, &same, 0).is_err());
    }

    #[test]
    fn ranking_examples() {
        let d = l(&[1.0, 2.0]);
        let r = rank_rules(&[("a".into(), d.clone()), ("b".into(), d)], 3).unwrap();
        assert_eq!(r.optimal, None);

        // A beats B at order 1, A beats C only from order 2
        let a = ("A".to_string(), l(&[2.0]));
        let b = ("B".to_string(), l(&[2.5, 3.0]));
        let c = ("C".to_string(), l(&[1.0, 3.0]));
        let r = rank_rules(&[b.clone(), a.clone(), c.clone()], 4).unwrap();
        assert_eq!(r.optimal.as_deref(), Some("A"));
        assert_eq!(r.optimal_order, Some(2));
        assert_eq!(r.min_order[1][0], Some(1));
        assert_eq!(r.min_order[1][2], Some(2));
        assert!(rank_rules(&[a], 2).is_err());
    }

    #[test]
    fn multi_period_examples() {
        let x = l(&[1.0, 2.0]);
        let better = l(&[0.5, 2.0]);
        let same = vec![x.clone(), x.clone()];
        assert!(!multi_period_sd(&same, &same, 1).unwrap());
        assert!(multi_period_sd(&[better.clone(), x.clone()], &same, 1).unwrap());
        assert!(!multi_period_sd(&[better, l(&[3.0])], &same, 1).unwrap());
        assert!(multi_period_sd(&same, &same[..1], 1).is_err());
        assert!(multi_period_sd(&same, &same, 3).is_err());
    }
}
