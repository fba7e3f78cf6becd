//! Grid scan plus box-projected Nelder-Mead.

use std::cell::Cell;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchSettings {
    /// Points per dimension in the initial scan, bounds included.
    pub grid_points: usize,
    /// Nelder-Mead evaluation budget on top of the grid.
    pub max_evals: usize,
    /// Stop when the simplex spans less than this, in box-relative units.
    pub xtol: f64,
    /// ... and its values differ by less than this.
    pub ftol: f64,
    /// Initial simplex edge, in box-relative units.
    pub initial_step: f64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            grid_points: 7,
            max_evals: 2000,
            xtol: 1e-9,
            ftol: 1e-12,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxMinimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
}

/// Minimises `f` over the box `[lower, upper]`.
///
/// Every evaluated point lies in the box. The result is the best point seen,
/// so it is never worse than the best grid point. Degenerate dimensions
/// (`lower == upper`) are held fixed. Non-finite values count as `+inf`.
pub fn minimize_box<F>(mut f: F, lower: &[f64], upper: &[f64], settings: &SearchSettings) -> BoxMinimum
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(lower.len(), upper.len(), "bound lengths differ");
    assert!(
        lower.iter().zip(upper).all(|(l, u)| l <= u),
        "empty box"
    );
    let evaluations = Cell::new(0usize);
    let mut eval = |x: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };

    let dims = lower.len();
    let points = settings.grid_points.max(1);
    let axis = |d: usize, i: usize| -> f64 {
        if points == 1 || i + 1 == points {
            if points == 1 { 0.5 * (lower[d] + upper[d]) } else { upper[d] }
        } else {
            lower[d] + (upper[d] - lower[d]) * i as f64 / (points - 1) as f64
        }
    };

    // grid scan, odometer order; degenerate axes take one value
    let counts: Vec<usize> = (0..dims).map(|d| if lower[d] == upper[d] { 1 } else { points }).collect();
    let mut idx = vec![0usize; dims];
    let mut best_x: Vec<f64> = lower.to_vec();
    let mut best_f = f64::INFINITY;
    loop {
        let x: Vec<f64> = (0..dims)
            .map(|d| if counts[d] == 1 { lower[d] } else { axis(d, idx[d]) })
            .collect();
        let v = eval(&x);
        if v < best_f || evaluations.get() == 1 {
            best_f = v;
            best_x = x;
        }
        let mut d = 0;
        while d < dims {
            idx[d] += 1;
            if idx[d] < counts[d] {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dims {
            break;
        }
    }

    let free: Vec<usize> = (0..dims).filter(|&d| lower[d] < upper[d]).collect();
    if free.is_empty() || settings.max_evals == 0 || !best_f.is_finite() {
        return BoxMinimum { x: best_x, f: best_f, evaluations: evaluations.get() };
    }

    // Nelder-Mead in unit coordinates over the free dimensions
    let m = free.len();
    let to_x = |u: &[f64]| -> Vec<f64> {
        let mut x = best_x.clone();
        for (j, &d) in free.iter().enumerate() {
            x[d] = lower[d] + (upper[d] - lower[d]) * u[j].clamp(0.0, 1.0);
        }
        x
    };
    let start: Vec<f64> = free
        .iter()
        .map(|&d| (best_x[d] - lower[d]) / (upper[d] - lower[d]))
        .collect();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(m + 1);
    simplex.push((start.clone(), best_f));
    for j in 0..m {
        let mut u = start.clone();
        u[j] += if u[j] + settings.initial_step <= 1.0 {
            settings.initial_step
        } else {
            -settings.initial_step
        };
        let v = eval(&to_x(&u));
        simplex.push((u, v));
    }
    let budget = evaluations.get() + settings.max_evals;
    let project = |u: Vec<f64>| -> Vec<f64> { u.into_iter().map(|c| c.clamp(0.0, 1.0)).collect() };

    while evaluations.get() < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread_f = simplex[m].1 - simplex[0].1;
        let spread_x = simplex[1..]
            .iter()
            .flat_map(|(u, _)| u.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0_f64, f64::max);
        if spread_x < settings.xtol && (spread_f < settings.ftol || !spread_f.is_finite()) {
            break;
        }
        if spread_x < settings.xtol * 1e-3 {
            break;
        }
        let centroid: Vec<f64> = (0..m)
            .map(|j| simplex[..m].iter().map(|(u, _)| u[j]).sum::<f64>() / m as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            project(
                centroid
                    .iter()
                    .zip(&simplex[m].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect(),
            )
        };
        let xr = along(1.0);
        let fr = eval(&to_x(&xr));
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&to_x(&xe));
            simplex[m] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[m - 1].1 {
            simplex[m] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[m].1 {
                let xc = along(0.5);
                let fc = eval(&to_x(&xc));
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&to_x(&xc));
                (xc, fc)
            };
            if fc < simplex[m].1.min(fr) {
                simplex[m] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let u: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
                    vertex.1 = eval(&to_x(&u));
                    vertex.0 = u;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let evaluations = evaluations.get();
    if simplex[0].1 < best_f {
        let x = to_x(&simplex[0].0);
        return BoxMinimum { x, f: simplex[0].1, evaluations };
    }
    BoxMinimum { x: best_x, f: best_f, evaluations }
}
