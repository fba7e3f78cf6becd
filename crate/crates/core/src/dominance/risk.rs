use super::{DominanceError, EmpiricalDistribution, Orientation};

/// `(mean - theta) / E(theta - R)_+ + 1` for a return distribution.
///
/// With no mass below `theta` the ratio is `+inf` when the mean exceeds
/// `theta` and undefined otherwise.
pub fn omega_ratio(d: &EmpiricalDistribution, theta: f64) -> Result<f64, DominanceError> {
    d.expect(Orientation::Return)?;
    let mean = d.mean();
    let downside = d.lower_partial_moment(theta, 1);
    if downside > 0.0 {
        Ok((mean - theta) / downside + 1.0)
    } else if mean > theta {
        Ok(f64::INFINITY)
    } else {
        Err(DominanceError::OmegaUndefined(theta))
    }
}

/// Value at risk (lower `alpha`-quantile) and conditional value at risk
/// `min_v v + E(L - v)_+ / (1 - alpha)` of a loss distribution. The minimum
/// is attained at the quantile.
pub fn var_cvar(d: &EmpiricalDistribution, alpha: f64) -> Result<(f64, f64), DominanceError> {
    d.expect(Orientation::Loss)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DominanceError::Level(alpha));
    }
    let mut cum = 0.0;
    let mut var = d.max();
    for (x, w) in d.atoms() {
        cum += w;
        if cum >= alpha {
            var = x;
            break;
        }
    }
    let cvar = var + d.upper_partial_moment(var, 1) / (1.0 - alpha);
    Ok((var, cvar.max(var)))
}
