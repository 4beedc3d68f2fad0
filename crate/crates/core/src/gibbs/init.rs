//! Two-step least-squares pre-fit that supplies starting values and the
//! centring of the data-dependent priors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ns_basis::{loading_matrix, MaturityGrid, REFERENCE_LAMBDA};
use crate::regime_tree::RegimeLabels;
use crate::state_space::{InitialState, ModelParams, Observations};

const FALLBACK_AR: f64 = 0.9;
const FALLBACK_VAR: f64 = 0.1;
const H_RIDGE: f64 = 1e-4;
const Q_START_FLOOR: f64 = 1e-3;
pub const P0_SCALE: f64 = 10.0;

/// Cross-sectional least-squares factors at the reference decay, with the
/// observed macro factors appended.
pub fn cross_section_factors(data: &Observations, grid: &MaturityGrid, n_macro: usize) -> Result<Vec<DVector<f64>>> {
    let n = grid.len();
    if data.dim() != n + n_macro {
        return Err(Error::Dimension("observations do not match the maturity grid".into()));
    }
    let lm = loading_matrix(REFERENCE_LAMBDA, grid)?.values;
    if n < 3 {
        return Err(Error::Domain("at least three tenors are needed to identify the factors".into()));
    }
    let chol = (lm.transpose() * &lm)
        .cholesky()
        .ok_or_else(|| Error::Domain("loading matrix is rank deficient".into()))?;
    Ok(data
        .rows()
        .iter()
        .map(|y| {
            let f = chol.solve(&(lm.transpose() * y.rows(0, n)));
            DVector::from_fn(3 + n_macro, |j, _| if j < 3 { f[j] } else { y[n + j - 3] })
        })
        .collect())
}

/// Starting parameters and initial state from the two-step fit.
pub fn initial_values(
    data: &Observations,
    labels: &RegimeLabels,
    grid: &MaturityGrid,
    n_macro: usize,
) -> Result<(ModelParams, InitialState)> {
    let t_len = data.len();
    if t_len != labels.len() {
        return Err(Error::Dimension(format!("{} labels for {t_len} periods", labels.len())));
    }
    if t_len < 2 {
        return Err(Error::Domain("need at least two periods".into()));
    }
    let d = 3 + n_macro;
    let g_count = labels.n_regimes();
    let f_hat = cross_section_factors(data, grid, n_macro)?;

    let overall = f_hat.iter().fold(DVector::zeros(d), |a, f| a + f) / t_len as f64;
    let mut mu = vec![DVector::zeros(d); g_count];
    let counts = labels.counts();
    for (t, f) in f_hat.iter().enumerate() {
        mu[labels.get(t)] += f;
    }
    for g in 0..g_count {
        mu[g] = if counts[g] > 0 { &mu[g] / counts[g] as f64 } else { overall.clone() };
    }
    let demeaned: Vec<DVector<f64>> = f_hat.iter().enumerate().map(|(t, f)| f - &mu[labels.get(t)]).collect();

    let mut a = Vec::with_capacity(g_count);
    for g in 0..g_count {
        let mut sxx = DMatrix::zeros(d, d);
        let mut syx = DMatrix::zeros(d, d);
        let mut n_obs = 0;
        for t in 0..t_len - 1 {
            if labels.get(t) == g {
                sxx += &demeaned[t] * demeaned[t].transpose();
                syx += &demeaned[t + 1] * demeaned[t].transpose();
                n_obs += 1;
            }
        }
        let ols = if n_obs > d + 1 { sxx.cholesky().map(|c| c.solve(&syx.transpose()).transpose()) } else { None };
        a.push(ols.unwrap_or_else(|| DMatrix::identity(d, d) * FALLBACK_AR));
    }

    let mut h = Vec::with_capacity(g_count);
    for g in 0..g_count {
        let mut s = DMatrix::zeros(d, d);
        let mut n_obs = 0;
        for t in 1..t_len {
            if labels.get(t) == g {
                let e = &demeaned[t] - &a[labels.get(t - 1)] * &demeaned[t - 1];
                s += &e * e.transpose();
                n_obs += 1;
            }
        }
        let cov = if n_obs > d {
            s / n_obs as f64 + DMatrix::identity(d, d) * H_RIDGE
        } else {
            DMatrix::identity(d, d) * FALLBACK_VAR
        };
        h.push(cov);
    }

    let lm = loading_matrix(REFERENCE_LAMBDA, grid)?.values;
    let n = grid.len();
    let mut q = DVector::from_element(n + n_macro, Q_START_FLOOR);
    for i in 0..n {
        let ss: f64 = (0..t_len)
            .map(|t| {
                let fit = (lm.row(i) * f_hat[t].rows(0, 3))[(0, 0)];
                (data.get(t)[i] - fit).powi(2)
            })
            .sum();
        q[i] = (ss / t_len as f64).max(Q_START_FLOOR);
    }

    let params = ModelParams {
        lambda: REFERENCE_LAMBDA,
        grid: grid.clone(),
        n_macro,
        a,
        h,
        mu,
        q_diag: q,
        gamma: vec![DMatrix::from_element(d, d, true); g_count],
    };
    let init = InitialState::new(demeaned[0].clone(), DMatrix::identity(d, d) * P0_SCALE);
    Ok((params, init))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ns_basis::measurement_matrix;

    #[test]
    fn noiseless_factors_are_recovered() {
        let grid = MaturityGrid::default();
        let lm = measurement_matrix(REFERENCE_LAMBDA, &grid, 1).unwrap();
        let rows: Vec<DVector<f64>> = (0..30)
            .map(|t| {
                let f = DVector::from_vec(vec![5.0 + 0.1 * t as f64, -1.0, 0.5 * (t as f64).sin(), 2.0]);
                &lm * f
            })
            .collect();
        let data = Observations::new(rows).unwrap();
        let f = cross_section_factors(&data, &grid, 1).unwrap();
        assert!((f[3][0] - 5.3).abs() < 1e-10);
        assert!((f[3][3] - 2.0).abs() < 1e-12);
        let labels = RegimeLabels::new((0..30).map(|t| usize::from(t >= 15)).collect(), 2).unwrap();
        let (params, init) = initial_values(&data, &labels, &grid, 1).unwrap();
        params.validate().unwrap();
        assert_eq!(init.mean.len(), 4);
        assert!(params.q_diag.iter().all(|&q| q == Q_START_FLOOR));
    }

    #[test]
    fn short_regimes_use_fallbacks() {
        let grid = MaturityGrid::default();
        let data = Observations::new((0..6).map(|t| DVector::from_element(13, t as f64)).collect()).unwrap();
        let labels = RegimeLabels::new(vec![0, 0, 0, 0, 1, 1], 3).unwrap();
        let (params, _) = initial_values(&data, &labels, &grid, 0).unwrap();
        assert_eq!(params.a[1], DMatrix::identity(3, 3) * FALLBACK_AR);
        assert_eq!(params.h[2], DMatrix::identity(3, 3) * FALLBACK_VAR);
    }
}
