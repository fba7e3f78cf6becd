//! Real roots of low-degree polynomials on an interval.

/// Horner evaluation; `c[i]` multiplies `t^i`.
pub fn eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ci| acc * t + ci)
}

pub fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(i, ci)| i as f64 * ci).collect()
}

/// Roots in the open interval `(lo, hi)`, located by splitting at the roots
/// of the derivative and bisecting each monotone piece that changes sign.
pub fn roots_in(c: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut c = c.to_vec();
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    if c.len() <= 1 {
        return Vec::new();
    }
    let mut knots = vec![lo];
    knots.extend(roots_in(&derivative(&c), lo, hi));
    knots.push(hi);
    let mut out = Vec::new();
    for w in knots.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (mut fa, fb) = (eval(&c, a), eval(&c, b));
        if fa == 0.0 {
            if a > lo && a < hi {
                out.push(a);
            }
            continue;
        }
        if fa.signum() == fb.signum() || fb == 0.0 {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = eval(&c, m);
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        out.push(0.5 * (a + b));
    }
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_roots_of_a_cubic() {
        // (t - 0.2)(t - 0.5)(t - 0.9)
        let c = [-0.09, 0.73, -1.6, 1.0];
        let r = roots_in(&c, 0.0, 1.0);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([0.2, 0.5, 0.9]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(roots_in(&c, 0.3, 0.4).is_empty());
        assert!(roots_in(&[1.0], 0.0, 1.0).is_empty());
        assert_eq!(roots_in(&[-0.5, 1.0], 0.0, 1.0), [0.5]);
    }
}
