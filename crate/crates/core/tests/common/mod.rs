//! Independent oracles and fixture generators shared by integration tests.
#![allow(dead_code)]

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdpolicy_core::dominance::{EmpiricalDistribution, Orientation};

/// Raw atoms and weights, kept separate from the library type so the
/// oracle never touches its internals.
#[derive(Debug, Clone)]
pub struct Atoms {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl Atoms {
    pub fn normalized(x: Vec<f64>, w: Vec<f64>) -> Self {
        let s: f64 = w.iter().sum();
        Self {
            x,
            w: w.into_iter().map(|v| v / s).collect(),
        }
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.x.iter().zip(&self.w).map(|(x, w)| w * f(*x)).sum()
    }

    pub fn losses(&self) -> EmpiricalDistribution {
        EmpiricalDistribution::new(&self.x, &self.w, Orientation::Loss).unwrap()
    }

    pub fn returns(&self) -> EmpiricalDistribution {
        EmpiricalDistribution::new(&self.x, &self.w, Orientation::Return).unwrap()
    }
}

fn pooled(a: &Atoms, b: &Atoms) -> Vec<f64> {
    let mut p: Vec<f64> = a.x.iter().chain(&b.x).copied().collect();
    p.sort_by(f64::total_cmp);
    p.dedup();
    p
}

/// Brute-force order-`k` dominance of loss `l1` over `l2`: `E u(L1) <= E u(L2)`
/// for every test disutility, with one strict. The family is steps
/// `1{x > a}` for `k = 1`; otherwise `(x - a)_+^(k-1)` with `a` on the pooled
/// atoms, their midpoints and `dense` interior points per gap, plus the
/// powers `(x - lo)^j`, `j = 1..k-2`, at the pooled minimum.
pub fn oracle_losses(l1: &Atoms, l2: &Atoms, k: usize, tol: f64, dense: usize) -> bool {
    let pts = pooled(l1, l2);
    let mut gaps = Vec::new();
    if k == 1 {
        for &a in &pts {
            let step = |x: f64| if x > a { 1.0 } else { 0.0 };
            gaps.push(l2.expect(step) - l1.expect(step));
        }
    } else {
        let j = (k - 1) as i32;
        let mut grid = Vec::new();
        for (i, &a) in pts.iter().enumerate() {
            grid.push(a);
            if let Some(&b) = pts.get(i + 1) {
                for s in 1..=dense {
                    grid.push(a + (b - a) * s as f64 / (dense + 1) as f64);
                }
            }
        }
        for a in grid {
            let u = |x: f64| if x > a { (x - a).powi(j) } else { 0.0 };
            gaps.push(l2.expect(u) - l1.expect(u));
        }
        let lo = pts[0];
        for p in 1..=(k as i32 - 2) {
            let u = |x: f64| (x - lo).powi(p);
            gaps.push(l2.expect(u) - l1.expect(u));
        }
    }
    gaps.iter().all(|&g| g >= -tol) && gaps.iter().any(|&g| g > tol)
}

/// Return-orientation oracle: `R1` dominates `R2` iff `-R1` dominates `-R2`
/// as losses.
pub fn oracle_returns(r1: &Atoms, r2: &Atoms, k: usize, tol: f64, dense: usize) -> bool {
    let neg = |a: &Atoms| Atoms {
        x: a.x.iter().map(|v| -v).collect(),
        w: a.w.clone(),
    };
    oracle_losses(&neg(r1), &neg(r2), k, tol, dense)
}

/// A pair of 50-atom loss distributions; `kind` cycles through unrelated,
/// statewise-shifted, mean-preserving contraction and contraction plus
/// shift, so positive and negative cases both occur.
pub fn sd_pair(seed: u64) -> (Atoms, Atoms) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 50;
    let base: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..5.0)).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let l2 = Atoms::normalized(base.clone(), w.clone());
    let mean = l2.expect(|x| x);
    let l1 = match seed % 4 {
        0 => Atoms::normalized(
            (0..n).map(|_| rng.random_range(-2.0..5.0)).collect(),
            (0..n).map(|_| rng.random_range(0.2..1.0)).collect(),
        ),
        1 => Atoms::normalized(base.iter().map(|x| x - rng.random_range(0.0..0.5)).collect(), w),
        2 => {
            let c = rng.random_range(0.3..0.95);
            Atoms::normalized(base.iter().map(|x| mean + c * (x - mean)).collect(), w)
        }
        _ => {
            let c = rng.random_range(0.3..0.95);
            let s = rng.random_range(-0.2..0.2);
            Atoms::normalized(base.iter().map(|x| mean + s + c * (x - mean)).collect(), w)
        }
    };
    (l1, l2)
}

/// Brute-force CVaR: minimum over `v` on a grid with step `1e-4` of the
/// range of `v + E(L - v)_+ / (1 - alpha)`.
pub fn cvar_brute(l: &Atoms, alpha: f64) -> f64 {
    let lo = l.x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = l.x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let steps = 10_000;
    let step = (hi - lo) / steps as f64;
    (0..=steps)
        .map(|i| {
            let v = lo + step * i as f64;
            v + l.expect(|x| (x - v).max(0.0)) / (1.0 - alpha)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Loss atoms on the integers `0..=100` with both ends present, so every
/// atom lies on the brute-force grid.
pub fn cvar_fixture(seed: u64) -> (Atoms, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..30);
    let mut x: Vec<f64> = vec![0.0, 100.0];
    x.extend((2..n).map(|_| rng.random_range(0..=100) as f64));
    let w: Vec<f64> = x.iter().map(|_| rng.random_range(0.1..1.0)).collect();
    (Atoms::normalized(x, w), rng.random_range(0.01..0.99))
}

/// Omega ratio computed from its definition.
pub fn omega_brute(r: &Atoms, theta: f64) -> Option<f64> {
    let up = r.expect(|x| (x - theta).max(0.0));
    let down = r.expect(|x| (theta - x).max(0.0));
    if down > 0.0 {
        Some(up / down)
    } else if up > 0.0 {
        Some(f64::INFINITY)
    } else {
        None
    }
}

/// `(X, Y)` returns with `Y >= X` statewise, so `Y` first-order dominates.
pub fn fsd_pair(seed: u64) -> (Atoms, Atoms) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..40);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-0.3..0.3)).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| v + rng.random_range(0.0..0.1)).collect();
    (Atoms::normalized(x, w.clone()), Atoms::normalized(y, w))
}
