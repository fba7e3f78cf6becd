use serde::Serialize;

use super::{poly, DominanceError, EmpiricalDistribution, Orientation, MAX_ORDER};

/// Outcome of one dominance test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SDResult {
    pub dominates: bool,
    pub order: usize,
    /// Largest amount by which a dominance inequality fails (0 if none).
    pub max_violation: f64,
    /// Location of the largest violation.
    pub worst_at: Option<f64>,
    /// Every inequality holds within the tolerance.
    pub weak: bool,
    /// Some inequality holds with margin above the tolerance.
    pub strict: bool,
}

const REL_TOL: f64 = 1e-12;

struct Tally {
    order: usize,
    violation: f64,
    worst_at: Option<f64>,
    weak: bool,
    strict: bool,
}

impl Tally {
    fn new(order: usize) -> Self {
        Self {
            order,
            violation: 0.0,
            worst_at: None,
            weak: true,
            strict: false,
        }
    }

    /// Records `margin >= 0` as the condition to hold at `at`.
    fn check(&mut self, margin: f64, tol: f64, at: f64) {
        if margin < -tol {
            self.weak = false;
        }
        if margin > tol {
            self.strict = true;
        }
        if -margin > self.violation {
            self.violation = -margin;
            self.worst_at = Some(at);
        }
    }

    fn finish(self) -> SDResult {
        SDResult {
            dominates: self.weak && self.strict,
            order: self.order,
            max_violation: self.violation,
            worst_at: self.worst_at,
            weak: self.weak,
            strict: self.strict,
        }
    }
}

fn check_order(k: usize) -> Result<(), DominanceError> {
    if (1..=MAX_ORDER).contains(&k) {
        Ok(())
    } else {
        Err(DominanceError::Order(k))
    }
}

fn pooled(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> Vec<f64> {
    let mut p: Vec<f64> = a.points().iter().chain(b.points()).copied().collect();
    p.sort_by(f64::total_cmp);
    p.dedup();
    p
}

/// Coefficients in `t` of `sum_m w_m (c_m - t)^j` over atoms with `c_m > 0`,
/// where `c_m = x_m - origin`.
fn upm_poly(d: &EmpiricalDistribution, origin: f64, j: usize, sign: f64, acc: &mut [f64]) {
    let mut binom = vec![1.0; j + 1];
    for q in 1..=j {
        binom[q] = binom[q - 1] * (j + 1 - q) as f64 / q as f64;
    }
    for (x, w) in d.atoms() {
        let c = x - origin;
        if c <= 0.0 {
            continue;
        }
        for q in 0..=j {
            let term = binom[q] * c.powi((j - q) as i32) * if q % 2 == 0 { 1.0 } else { -1.0 };
            acc[q] += sign * w * term;
        }
    }
}

/// Order-`k` dominance of loss distribution `l1` over `l2`.
///
/// Order 1 compares CDFs at the pooled atoms. Order `k >= 2` compares
/// `E(L - a)_+^(k-1)` at the pooled atoms, the midpoints between them and,
/// for `k >= 3`, every interior critical point of the difference (a
/// polynomial between consecutive atoms), together with the moments
/// `E(L - lo)^j`, `j = 1..=k-2`, at the pooled minimum `lo`, which govern
/// all `a < lo`.
///
/// A condition counts as violated beyond `1e-12 * max(1, |x|max)^p` and as
/// strict above the same margin, where `p` is the power of its integrand.
pub fn sd_dominates_losses(
    l1: &EmpiricalDistribution,
    l2: &EmpiricalDistribution,
    k: usize,
) -> Result<SDResult, DominanceError> {
    l1.expect(Orientation::Loss)?;
    l2.expect(Orientation::Loss)?;
    check_order(k)?;
    let pts = pooled(l1, l2);
    let scale = pts.iter().fold(1.0_f64, |m, p| m.max(p.abs()));
    let mut tally = Tally::new(k);
    if k == 1 {
        for &x in &pts {
            tally.check(l1.cdf(x) - l2.cdf(x), REL_TOL, x);
        }
        return Ok(tally.finish());
    }
    let j = (k - 1) as u32;
    let tol = REL_TOL * scale.powi(j as i32);
    let gap = |a: f64| l2.upper_partial_moment(a, j) - l1.upper_partial_moment(a, j);
    for (i, &x) in pts.iter().enumerate() {
        tally.check(gap(x), tol, x);
        if let Some(&next) = pts.get(i + 1) {
            let mid = 0.5 * (x + next);
            tally.check(gap(mid), tol, mid);
            if k >= 3 {
                let mut coeffs = vec![0.0; k];
                upm_poly(l2, x, k - 1, 1.0, &mut coeffs);
                upm_poly(l1, x, k - 1, -1.0, &mut coeffs);
                for t in poly::roots_in(&poly::derivative(&coeffs), 0.0, next - x) {
                    let a = x + t;
                    if a > x && a < next {
                        tally.check(gap(a), tol, a);
                    }
                }
            }
        }
    }
    let lo = pts[0];
    for p in 1..=(k as i32 - 2) {
        let moment = |d: &EmpiricalDistribution| d.atoms().map(|(x, w)| w * (x - lo).powi(p)).sum::<f64>();
        tally.check(moment(l2) - moment(l1), REL_TOL * scale.powi(p), lo);
    }
    Ok(tally.finish())
}

/// Order-`k` dominance of return distribution `r1` over `r2`: CDFs for
/// `k = 1`, lower partial moments `E(x - R)_+^(k-1)` for `k >= 2`.
pub fn sd_dominates_returns(
    r1: &EmpiricalDistribution,
    r2: &EmpiricalDistribution,
    k: usize,
) -> Result<SDResult, DominanceError> {
    r1.expect(Orientation::Return)?;
    r2.expect(Orientation::Return)?;
    // R1 beats R2 exactly when the loss -R1 beats -R2
    let mut res = sd_dominates_losses(&r1.negated(), &r2.negated(), k)?;
    res.worst_at = res.worst_at.map(|x| -x);
    Ok(res)
}

/// Dispatches on the orientation of `d1`; `d2` must match it.
pub fn sd_dominates(
    d1: &EmpiricalDistribution,
    d2: &EmpiricalDistribution,
    k: usize,
) -> Result<SDResult, DominanceError> {
    match d1.orientation() {
        Orientation::Loss => sd_dominates_losses(d1, d2, k),
        Orientation::Return => sd_dominates_returns(d1, d2, k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::losses(v).unwrap()
    }

    #[test]
    fn identical_samples_never_strictly_dominate() {
        let d = l(&[0.3, 1.2, 2.5]);
        for k in 1..=MAX_ORDER {
            let r = sd_dominates_losses(&d, &d, k).unwrap();
            assert!(!r.dominates && !r.strict && r.max_violation == 0.0);
        }
    }

    #[test]
    fn sure_losses() {
        let r = sd_dominates_losses(&l(&[1.0]), &l(&[2.0]), 1).unwrap();
        assert!(r.dominates);
        assert!(!sd_dominates_losses(&l(&[2.0]), &l(&[1.0]), 1).unwrap().dominates);
    }

    #[test]
    fn spread_versus_sure_loss() {
        let spread = l(&[1.0, 3.0]);
        let sure = l(&[2.0]);
        assert!(!sd_dominates_losses(&sure, &spread, 1).unwrap().dominates);
        assert!(!sd_dominates_losses(&spread, &sure, 1).unwrap().dominates);
        let r = sd_dominates_losses(&sure, &spread, 2).unwrap();
        assert!(r.dominates, "{r:?}");
        let back = sd_dominates_losses(&spread, &sure, 2).unwrap();
        assert!(!back.dominates);
        assert!((back.max_violation - 0.5).abs() < 1e-15);
        assert_eq!(back.worst_at, Some(2.0));
    }

    #[test]
    fn interior_violation_is_found_at_order_three() {
        // Equal means and second moments about the minimum, but the gap of
        // E(L - a)_+^2 dips below zero strictly between atoms.
        let a = l(&[0.0, 0.0, 3.0, 3.0]);
        let b = EmpiricalDistribution::new(&[0.0, 1.5, 3.0], &[0.125, 0.75, 0.125], Orientation::Loss).unwrap();
        let r = sd_dominates_losses(&b, &a, 3).unwrap();
        let brute = (0..=3000)
            .map(|i| i as f64 * 1e-3)
            .map(|x| a.upper_partial_moment(x, 2) - b.upper_partial_moment(x, 2))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.dominates, brute >= -1e-12);
    }

    #[test]
    fn orientation_and_order_are_checked() {
        let ret = EmpiricalDistribution::returns(&[1.0]).unwrap();
        assert!(matches!(
            sd_dominates_losses(&ret, &ret, 1),
            Err(DominanceError::Orientation { .. })
        ));
        assert_eq!(
            sd_dominates_losses(&l(&[1.0]), &l(&[1.0]), 0),
            Err(DominanceError::Order(0))
        );
        assert_eq!(
            sd_dominates_losses(&l(&[1.0]), &l(&[1.0]), 9),
            Err(DominanceError::Order(9))
        );
    }

    #[test]
    fn returns_mirror_losses() {
        let hi = EmpiricalDistribution::returns(&[2.0, 3.0]).unwrap();
        let lo = EmpiricalDistribution::returns(&[1.0, 2.0]).unwrap();
        assert!(sd_dominates_returns(&hi, &lo, 1).unwrap().dominates);
        assert!(!sd_dominates_returns(&lo, &hi, 1).unwrap().dominates);
        let sure = EmpiricalDistribution::returns(&[2.0]).unwrap();
        let spread = EmpiricalDistribution::returns(&[1.0, 3.0]).unwrap();
        assert!(sd_dominates(&sure, &spread, 2).unwrap().dominates);
        assert!(!sd_dominates(&spread, &sure, 2).unwrap().dominates);
    }
}
