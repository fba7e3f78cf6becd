use nalgebra::{DMatrix, DVector};

use rand::RngExt;
use rand_distr::StandardNormal;

use super::{lyapunov, simulate, LreError, StateSpace};
use crate::rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Gaussian log-likelihood of the panel `y` (one row per period), with the
/// filter started from the unconditional state distribution.
pub fn kalman_loglik(ss: &StateSpace, y: &DMatrix<f64>) -> Result<f64, LreError> {
    let m = ss.observables();
    if y.ncols() != m {
        return Err(LreError::Dimension(format!(
            "panel has {} columns, model has {m} observables",
            y.ncols()
        )));
    }
    if y.nrows() == 0 {
        return Ok(0.0);
    }
    let a = &ss.solved.a;
    let q = &ss.solved.b * ss.solved.b.transpose();
    let r = ss.noise_cov();
    let z = &ss.measurement;
    let mut state = DVector::zeros(ss.solved.dim());
    let mut p = lyapunov(&ss.solved)?;
    let mut total = 0.0;
    for t in 0..y.nrows() {
        let innov = y.row(t).transpose() - &ss.intercept - z * &state;
        let pz = &p * z.transpose();
        let f = z * &pz + &r;
        let f = (&f + f.transpose()) * 0.5;
        let chol = f
            .cholesky()
            .ok_or(LreError::Singular("forecast-error covariance"))?;
        let f_inv_innov = chol.solve(&innov);
        total -= 0.5 * (m as f64 * LN_2PI + chol.ln_determinant() + innov.dot(&f_inv_innov));
        // update, then predict
        let gain_t = chol.solve(&pz.transpose());
        state += gain_t.transpose() * &innov;
        p -= &pz * &gain_t;
        state = a * state;
        p = a * &p * a.transpose() + &q;
        p = (&p + p.transpose()) * 0.5;
    }
    Ok(total)
}

/// Periods discarded before the first simulated observation.
pub const SIMULATION_BURN_IN: usize = 1000;

/// Simulates an observable panel (one row per period) from the model,
/// starting at zero and discarding [`SIMULATION_BURN_IN`] periods. State
/// shocks use substream 0 of `seed`, measurement noise substream 1.
pub fn simulate_observables(ss: &StateSpace, periods: usize, seed: u64) -> Result<DMatrix<f64>, LreError> {
    let z0 = DVector::zeros(ss.solved.dim());
    let path = simulate(&ss.solved, &z0, SIMULATION_BURN_IN + periods, rng::substream_seed(seed, 0))?;
    let mut noise_rng = rng::substream(seed, 1);
    let m = ss.observables();
    let mut out = DMatrix::zeros(periods, m);
    let mut w = DVector::zeros(ss.noise_loading.ncols());
    for t in 0..periods {
        for e in w.iter_mut() {
            *e = noise_rng.sample(StandardNormal);
        }
        let z = path.row(SIMULATION_BURN_IN + t).transpose();
        let y = &ss.intercept + &ss.measurement * z + &ss.noise_loading * &w * ss.noise_scale;
        out.row_mut(t).copy_from(&y.transpose());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lre::{simulate, SolvedModel};

    /// Joint density of the stacked panel under its dense covariance.
    fn dense_oracle(ss: &StateSpace, y: &DMatrix<f64>) -> f64 {
        let (t, m) = (y.nrows(), y.ncols());
        let sigma = lyapunov(&ss.solved).unwrap();
        let z = &ss.measurement;
        let r = ss.noise_cov();
        let mut cov = DMatrix::zeros(t * m, t * m);
        for s in 0..t {
            for u in s..t {
                let mut lag = sigma.clone();
                for _ in s..u {
                    lag = &ss.solved.a * lag;
                }
                // Cov(y_u, y_s) = Z A^(u-s) Sigma Z'
                let mut block = z * lag * z.transpose();
                if s == u {
                    block += &r;
                }
                cov.view_mut((u * m, s * m), (m, m)).copy_from(&block);
                cov.view_mut((s * m, u * m), (m, m)).copy_from(&block.transpose());
            }
        }
        let mut dev = DVector::zeros(t * m);
        for s in 0..t {
            for j in 0..m {
                dev[s * m + j] = y[(s, j)] - ss.intercept[j];
            }
        }
        let chol = cov.cholesky().unwrap();
        -0.5 * ((t * m) as f64 * LN_2PI + chol.ln_determinant() + dev.dot(&chol.solve(&dev)))
    }

    fn pure_noise_model() -> StateSpace {
        let solved = SolvedModel::from_transition(DMatrix::zeros(1, 1), DMatrix::zeros(1, 1)).unwrap();
        StateSpace::new(
            solved,
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
            DMatrix::identity(1, 1),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn pure_noise_is_sum_of_normal_log_densities() {
        let ss = pure_noise_model();
        let y = DMatrix::from_column_slice(4, 1, &[0.3, -1.2, 2.0, 0.0]);
        let expected: f64 = y.iter().map(|v| -0.5 * (LN_2PI + v * v)).sum();
        assert!((kalman_loglik(&ss, &y).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_panel_is_zero() {
        let ss = pure_noise_model();
        assert_eq!(kalman_loglik(&ss, &DMatrix::zeros(0, 1)).unwrap(), 0.0);
    }

    #[test]
    fn column_mismatch_is_rejected() {
        let ss = pure_noise_model();
        assert!(matches!(
            kalman_loglik(&ss, &DMatrix::zeros(3, 2)),
            Err(LreError::Dimension(_))
        ));
    }

    #[test]
    fn singular_forecast_covariance_is_reported() {
        let mut ss = pure_noise_model();
        ss.noise_scale = 0.0;
        assert_eq!(
            kalman_loglik(&ss, &DMatrix::zeros(2, 1)),
            Err(LreError::Singular("forecast-error covariance"))
        );
    }

    #[test]
    fn matches_dense_oracle() {
        let a = DMatrix::from_row_slice(3, 3, &[0.6, 0.2, 0.0, -0.3, 0.4, 0.1, 0.0, 0.5, 0.8]);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.4, 0.7, 0.0, 0.5]);
        let solved = SolvedModel::from_transition(a, b).unwrap();
        let meas = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.5, 0.0, 1.0, -1.0]);
        let ss = StateSpace::new(
            solved.clone(),
            meas.clone(),
            DVector::from_vec(vec![0.1, -0.2]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 1.0]),
            0.4,
        )
        .unwrap();
        let path = simulate(&solved, &DVector::zeros(3), 6, 5).unwrap();
        for t in 1..=6 {
            let y = DMatrix::from_fn(t, 2, |i, j| {
                (meas.row(j) * path.row(i).transpose())[0] + 0.1 * (i as f64 - j as f64)
            });
            let k = kalman_loglik(&ss, &y).unwrap();
            let d = dense_oracle(&ss, &y);
            assert!((k - d).abs() < 1e-8, "T={t}: {k} vs {d}");
        }
    }
}
