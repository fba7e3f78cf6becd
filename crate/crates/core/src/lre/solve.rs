use nalgebra::{DMatrix, DVector, Schur};
use rand::RngExt;
use rand_distr::StandardNormal;

use super::{CanonicalForm, LreError, SolvedModel};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
        }
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64, LreError> {
    if m.is_empty() {
        return Ok(0.0);
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or(LreError::NonConvergence { iterations: 10_000 })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, z| acc.max(z.norm())))
}

/// Solves `Fc A^2 + Gc A + Hc = 0` by the iteration
/// `A <- -(Fc A + Gc)^-1 Hc` from `A = 0`, then `B = -(Fc A + Gc)^-1 Nc`.
///
/// Iteration stops when successive iterates differ by less than
/// `tol * max(1, |A|)` in max norm. The result is flagged determinate when
/// both `A` and `(Fc A + Gc)^-1 Fc` have spectral radius below one; the
/// second condition rules out convergence to a stable but non-unique
/// solution.
pub fn solve_re(c: &CanonicalForm, tol: f64, max_iter: usize) -> Result<SolvedModel, LreError> {
    if !(tol > 0.0) {
        return Err(LreError::BadTolerance);
    }
    let nz = c.dim();
    let mut a = DMatrix::<f64>::zeros(nz, nz);
    let mut converged_at = None;
    for it in 1..=max_iter {
        let lhs = &c.fc * &a + &c.gc;
        let next = -lhs
            .lu()
            .solve(&c.hc)
            .ok_or(LreError::Singular("Fc A + Gc"))?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(LreError::NonConvergence { iterations: it });
        }
        let diff = max_abs(&(&next - &a));
        let scale = max_abs(&next).max(1.0);
        a = next;
        if diff < tol * scale {
            converged_at = Some(it);
            break;
        }
    }
    let iterations = converged_at.ok_or(LreError::NonConvergence {
        iterations: max_iter,
    })?;
    let lu = (&c.fc * &a + &c.gc).lu();
    let b = -lu.solve(&c.nc).ok_or(LreError::Singular("Fc A + Gc"))?;
    let j = lu.solve(&c.fc).ok_or(LreError::Singular("Fc A + Gc"))?;
    let residual = max_abs(&(&c.fc * &a * &a + &c.gc * &a + &c.hc));
    let spectral_radius = spectral_radius(&a)?;
    let forward_radius = spectral_radius_or_inf(&j);
    Ok(SolvedModel {
        determinate: spectral_radius < 1.0 && forward_radius < 1.0,
        a,
        b,
        residual,
        spectral_radius,
        forward_radius,
        iterations,
        state_names: c.state_names.clone(),
        shock_names: c.shock_names.clone(),
    })
}

fn spectral_radius_or_inf(m: &DMatrix<f64>) -> f64 {
    spectral_radius(m).unwrap_or(f64::INFINITY)
}

/// Unconditional covariance `S = A S A' + B B'` by doubling:
/// `S <- S + A_k S A_k'`, `A_k <- A_k^2`.
pub fn lyapunov(s: &SolvedModel) -> Result<DMatrix<f64>, LreError> {
    if !s.determinate {
        return Err(LreError::Indeterminate);
    }
    let mut sigma = &s.b * s.b.transpose();
    let mut ak = s.a.clone();
    for _ in 0..64 {
        let step = &ak * &sigma * ak.transpose();
        let inc = max_abs(&step);
        sigma += step;
        ak = &ak * &ak;
        if inc <= 1e-17 * max_abs(&sigma).max(1e-300) {
            break;
        }
    }
    Ok((&sigma + sigma.transpose()) * 0.5)
}

/// Simulates `T` periods of `z = A z_lag + B v` from `z0`; row `t` holds
/// `z_{t+1}`.
pub fn simulate(
    s: &SolvedModel,
    z0: &DVector<f64>,
    periods: usize,
    seed: u64,
) -> Result<DMatrix<f64>, LreError> {
    if !s.determinate {
        return Err(LreError::Indeterminate);
    }
    let nz = s.dim();
    if z0.len() != nz {
        return Err(LreError::Dimension(format!(
            "initial state has length {}, expected {nz}",
            z0.len()
        )));
    }
    let nv = s.b.ncols();
    let mut rng = rng::stream(seed);
    let mut out = DMatrix::zeros(periods, nz);
    let mut z = z0.clone();
    let mut next = DVector::zeros(nz);
    let mut v = DVector::zeros(nv);
    for t in 0..periods {
        for e in v.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        next.gemv(1.0, &s.a, &z, 0.0);
        next.gemv(1.0, &s.b, &v, 1.0);
        std::mem::swap(&mut z, &mut next);
        out.row_mut(t).copy_from(&z.transpose());
    }
    Ok(out)
}

/// Responses `A^h B e_j` for `h = 0..=horizon`, one row per horizon.
pub fn irf(s: &SolvedModel, shock_index: usize, horizon: usize) -> Result<DMatrix<f64>, LreError> {
    let count = s.b.ncols();
    if shock_index >= count {
        return Err(LreError::ShockIndex {
            index: shock_index,
            count,
        });
    }
    let mut out = DMatrix::zeros(horizon + 1, s.dim());
    let mut r = s.b.column(shock_index).into_owned();
    for h in 0..=horizon {
        out.row_mut(h).copy_from(&r.transpose());
        r = &s.a * r;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn scalar_system(f: f64, g: f64, h: f64, n: f64) -> CanonicalForm {
        CanonicalForm::new(scalar(f), scalar(g), scalar(h), scalar(n)).unwrap()
    }

    #[test]
    fn backward_ar1() {
        let s = solve_re(&scalar_system(0.0, 1.0, -0.9, -1.0), 1e-12, 100).unwrap();
        assert!((s.a[(0, 0)] - 0.9).abs() < 1e-15);
        assert!((s.b[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(s.determinate);
        assert!(s.iterations <= 2);
    }

    #[test]
    fn backward_matrix_system_matches_direct_solve() {
        let gc = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.1, 1.5]);
        let hc = DMatrix::from_row_slice(2, 2, &[-0.4, 0.2, 0.3, -0.6]);
        let c = CanonicalForm::new(DMatrix::zeros(2, 2), gc.clone(), hc.clone(), DMatrix::identity(2, 2))
            .unwrap();
        let s = solve_re(&c, 1e-12, 100).unwrap();
        let direct = -gc.clone().try_inverse().unwrap() * hc;
        assert!((s.a - direct).amax() < 1e-14);
    }

    #[test]
    fn forward_scalar_picks_stable_root() {
        let s = solve_re(&scalar_system(0.5, -1.0, 0.3, 0.0), 1e-12, 10_000).unwrap();
        let root = (1.0 - (1.0_f64 - 4.0 * 0.5 * 0.3).sqrt()) / (2.0 * 0.5);
        assert!((s.a[(0, 0)] - root).abs() < 1e-10);
        assert!((s.a[(0, 0)] - 0.367544).abs() < 1e-6);
        assert!(s.residual < 1e-12);
        assert!(s.determinate);
    }

    #[test]
    fn indeterminate_scalar_is_flagged() {
        // x = 0.5 E x': A = 0 solves it, but so does any path decaying at rate 0.5.
        let s = solve_re(&scalar_system(2.0, -1.0, 0.0, 1.0), 1e-12, 100).unwrap();
        assert!(!s.determinate);
        assert!(s.forward_radius > 1.0);
    }

    #[test]
    fn nonpositive_tolerance_is_rejected() {
        assert_eq!(
            solve_re(&scalar_system(0.0, 1.0, 0.0, 0.0), 0.0, 10),
            Err(LreError::BadTolerance)
        );
    }

    #[test]
    fn explosive_backward_system_is_not_determinate() {
        let s = solve_re(&scalar_system(0.0, 1.0, -1.1, 1.0), 1e-12, 10).unwrap();
        assert!(!s.determinate);
        assert!(s.spectral_radius > 1.0);
    }

    #[test]
    fn lyapunov_closed_forms() {
        let s = SolvedModel::from_transition(scalar(0.5), scalar(1.0)).unwrap();
        assert!((lyapunov(&s).unwrap()[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);

        let b = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let s = SolvedModel::from_transition(DMatrix::zeros(2, 2), b.clone()).unwrap();
        assert_eq!(lyapunov(&s).unwrap(), &b * b.transpose());
    }

    #[test]
    fn lyapunov_matches_truncated_sum() {
        let a = DMatrix::from_row_slice(3, 3, &[0.7, 0.2, 0.0, -0.1, 0.5, 0.3, 0.05, 0.0, 0.9]);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 1.0, 0.0, 0.3]);
        let s = SolvedModel::from_transition(a.clone(), b.clone()).unwrap();
        let sigma = lyapunov(&s).unwrap();
        let bb = &b * b.transpose();
        let mut sum = DMatrix::zeros(3, 3);
        let mut aj = DMatrix::identity(3, 3);
        for _ in 0..10_000 {
            sum += &aj * &bb * aj.transpose();
            aj = &a * aj;
        }
        assert!((&sigma - sum).amax() < 1e-10);
        assert!((&a * &sigma * a.transpose() + bb - &sigma).amax() < 1e-10);
    }

    #[test]
    fn lyapunov_rejects_indeterminate() {
        let s = SolvedModel::from_transition(scalar(1.5), scalar(1.0)).unwrap();
        assert_eq!(lyapunov(&s), Err(LreError::Indeterminate));
    }

    #[test]
    fn simulate_without_shocks_is_deterministic_powers() {
        let s = SolvedModel::from_transition(scalar(0.5), scalar(0.0)).unwrap();
        let path = simulate(&s, &DVector::from_element(1, 2.0), 5, 1).unwrap();
        for t in 0..5 {
            assert_eq!(path[(t, 0)], 2.0 * 0.5_f64.powi(t as i32 + 1));
        }
    }

    #[test]
    fn simulate_white_noise_has_unit_variance() {
        let s = SolvedModel::from_transition(DMatrix::zeros(2, 2), DMatrix::identity(2, 2)).unwrap();
        let t = 40_000;
        let path = simulate(&s, &DVector::zeros(2), t, 11).unwrap();
        for j in 0..2 {
            let col = path.column(j);
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t as f64;
            assert!((var - 1.0).abs() < 3.0 / (t as f64).sqrt());
        }
        assert_eq!(path, simulate(&s, &DVector::zeros(2), t, 11).unwrap());
        assert_ne!(path, simulate(&s, &DVector::zeros(2), t, 12).unwrap());
    }

    #[test]
    fn irf_closed_forms() {
        let s = SolvedModel::from_transition(scalar(0.9), scalar(1.0)).unwrap();
        let r = irf(&s, 0, 10).unwrap();
        for h in 0..=10 {
            assert!((r[(h, 0)] - 0.9_f64.powi(h as i32)).abs() < 1e-14);
        }
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let s = SolvedModel::from_transition(DMatrix::zeros(2, 2), b).unwrap();
        let r = irf(&s, 1, 3).unwrap();
        assert_eq!(r.row(0).iter().copied().collect::<Vec<_>>(), [2.0, 4.0]);
        assert!(r.rows(1, 3).iter().all(|v| *v == 0.0));
        assert_eq!(irf(&s, 2, 1), Err(LreError::ShockIndex { index: 2, count: 2 }));
    }
}
