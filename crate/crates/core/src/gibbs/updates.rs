//! Full conditional updates of one Gibbs sweep.

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky_regularized, log_det_cholesky, sample_from_precision, sample_inverse_gamma};
use crate::ns_basis::measurement_matrix;
use crate::regime_tree::RegimeLabels;
use crate::state_space::{FactorPath, ModelParams, Observations};

use super::prior::{PriorConfig, RegimePriors};

fn measurement_residuals(
    lambda: &DMatrix<f64>,
    factors: &FactorPath,
    data: &Observations,
    mu: &[DVector<f64>],
    labels: &RegimeLabels,
) -> Vec<DVector<f64>> {
    (0..data.len())
        .map(|t| data.get(t) - lambda * (&factors.states[t] + &mu[labels.get(t)]))
        .collect()
}

/// `σ_i² ~ IG(α + T/2, β + ½ Σ_t e_{ti}²)`.
pub fn update_q<R: Rng + ?Sized>(
    factors: &FactorPath,
    data: &Observations,
    params: &ModelParams,
    labels: &RegimeLabels,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let lambda = params.measurement()?;
    let n = params.obs_dim();
    let mut ss = DVector::zeros(n);
    for e in measurement_residuals(&lambda, factors, data, &params.mu, labels) {
        ss += e.component_mul(&e);
    }
    let shape = prior.q_alpha + data.len() as f64 / 2.0;
    Ok(DVector::from_fn(n, |i, _| sample_inverse_gamma(shape, prior.q_beta + 0.5 * ss[i], rng)))
}

/// Per regime `H_g ~ IW(m0 + T_g, M0 + G_g)` over transitions into regime `g`.
/// The first period has no sampled predecessor and is not counted.
pub fn update_h<R: Rng + ?Sized>(
    factors: &FactorPath,
    params: &ModelParams,
    labels: &RegimeLabels,
    priors: &RegimePriors,
    rng: &mut R,
) -> Result<Vec<DMatrix<f64>>> {
    let g_count = params.n_regimes();
    let d = params.state_dim();
    let mut scatter = vec![DMatrix::zeros(d, d); g_count];
    let mut counts = vec![0usize; g_count];
    let f = &factors.states;
    for t in 1..f.len() {
        let g = labels.get(t);
        let e = &f[t] - &params.a[labels.get(t - 1)] * &f[t - 1];
        scatter[g] += &e * e.transpose();
        counts[g] += 1;
    }
    (0..g_count)
        .map(|g| {
            let scale = &priors.h_scale[g] + &scatter[g];
            linalg::sample_inverse_wishart(priors.h_df + counts[g] as f64, &scale, rng)
        })
        .collect()
}

/// Sufficient statistics of the regression `F_{t+1} = A_g F_t + η_{t+1}` for
/// `a = vec(Aᵀ)` (row-major): precision `Σ H⁻¹ ⊗ F_t F_tᵀ` and linear term
/// `Σ vec(F_t F_{t+1}ᵀ H⁻¹)`.
#[derive(Clone, Debug)]
pub struct TransitionStats {
    pub precision: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub n_obs: usize,
}

pub fn transition_stats(
    factors: &FactorPath,
    h_inv: &[DMatrix<f64>],
    labels: &RegimeLabels,
    regime: usize,
) -> TransitionStats {
    let d = h_inv[0].nrows();
    let g_count = h_inv.len();
    let f = &factors.states;
    // group by the regime of the destination period, which sets the noise
    let mut sxx = vec![DMatrix::zeros(d, d); g_count];
    let mut linear = DVector::zeros(d * d);
    let mut n_obs = 0;
    for t in 0..f.len().saturating_sub(1) {
        if labels.get(t) != regime {
            continue;
        }
        let next = labels.get(t + 1);
        sxx[next] += &f[t] * f[t].transpose();
        let w = &h_inv[next] * &f[t + 1];
        for j in 0..d {
            for k in 0..d {
                linear[j * d + k] += f[t][k] * w[j];
            }
        }
        n_obs += 1;
    }
    let mut precision = DMatrix::zeros(d * d, d * d);
    for (hi, s) in h_inv.iter().zip(&sxx) {
        if s.iter().all(|&v| v == 0.0) {
            continue;
        }
        precision += hi.kronecker(s);
    }
    TransitionStats { precision, linear, n_obs }
}

fn prior_variances(gamma: &DMatrix<bool>, prior: &PriorConfig) -> DVector<f64> {
    let d = gamma.nrows();
    DVector::from_fn(d * d, |idx, _| {
        let (j, k) = (idx / d, idx % d);
        if j == k {
            prior.xi1_sq
        } else {
            prior.coef_var(gamma[(j, k)])
        }
    })
}

fn posterior_precision_chol(stats: &TransitionStats, variances: &DVector<f64>) -> Cholesky<f64, Dyn> {
    let mut p = stats.precision.clone();
    for i in 0..variances.len() {
        p[(i, i)] += 1.0 / variances[i];
    }
    match cholesky_regularized(&p) {
        Some((c, jitter)) => {
            if jitter > 0.0 {
                warn!("transition posterior precision regularized with jitter {jitter:e}");
            }
            c
        }
        None => {
            warn!("transition posterior precision unusable, falling back to the prior");
            DMatrix::from_diagonal(&variances.map(|v| 1.0 / v)).cholesky().expect("positive prior variances")
        }
    }
}

/// Log of the γ-dependent part of `p(F | γ)` with `a` integrated out:
/// `-½ ln|U| + ½ ln|D̄| + ½ lᵀ D̄ l`.
fn log_collapsed(stats: &TransitionStats, variances: &DVector<f64>) -> f64 {
    let chol = posterior_precision_chol(stats, variances);
    let white = chol
        .l_dirty()
        .lower_triangle()
        .solve_lower_triangular(&stats.linear)
        .expect("cholesky factor has a positive diagonal");
    let log_det_u: f64 = variances.iter().map(|v| v.ln()).sum();
    -0.5 * log_det_u - 0.5 * log_det_cholesky(&chol) + 0.5 * white.norm_squared()
}

/// Off-diagonal indicators, one at a time in row-major order, from their
/// two-point conditionals with `a` integrated out.
pub fn draw_gamma<R: Rng + ?Sized>(
    stats: &TransitionStats,
    gamma: &DMatrix<bool>,
    prior: &PriorConfig,
    rng: &mut R,
) -> DMatrix<bool> {
    let d = gamma.nrows();
    let mut out = gamma.clone();
    for i in 0..d {
        out[(i, i)] = true;
    }
    for j in 0..d {
        for k in 0..d {
            if j == k {
                continue;
            }
            out[(j, k)] = true;
            let on = log_collapsed(stats, &prior_variances(&out, prior)) + prior.w.ln();
            out[(j, k)] = false;
            let off = log_collapsed(stats, &prior_variances(&out, prior)) + (1.0 - prior.w).ln();
            let p_on = 1.0 / (1.0 + (off - on).exp());
            let u: f64 = rng.random();
            out[(j, k)] = u < p_on;
        }
    }
    out
}

/// `a ~ N(D̄ l, D̄)` with `D̄ = (U⁻¹ + precision)⁻¹`, returned as the matrix `A`.
pub fn draw_a<R: Rng + ?Sized>(
    stats: &TransitionStats,
    gamma: &DMatrix<bool>,
    prior: &PriorConfig,
    rng: &mut R,
) -> DMatrix<f64> {
    let d = gamma.nrows();
    let chol = posterior_precision_chol(stats, &prior_variances(gamma, prior));
    let a = sample_from_precision(&chol, &stats.linear, rng);
    DMatrix::from_fn(d, d, |j, k| a[j * d + k])
}

/// Joint update of the indicators and transition matrices for every regime.
pub fn update_a_gamma<R: Rng + ?Sized>(
    factors: &FactorPath,
    h: &[DMatrix<f64>],
    params: &ModelParams,
    labels: &RegimeLabels,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<bool>>)> {
    let h_inv = h
        .iter()
        .map(|m| {
            linalg::symmetrized(m.clone())
                .cholesky()
                .map(|c| linalg::symmetrized(c.inverse()))
                .ok_or_else(|| Error::Numerical { period: 0, msg: "factor covariance not positive definite".into() })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut a_out = Vec::with_capacity(h.len());
    let mut gamma_out = Vec::with_capacity(h.len());
    for g in 0..params.n_regimes() {
        let stats = transition_stats(factors, &h_inv, labels, g);
        let gamma = draw_gamma(&stats, &params.gamma[g], prior, rng);
        a_out.push(draw_a(&stats, &gamma, prior, rng));
        gamma_out.push(gamma);
    }
    Ok((a_out, gamma_out))
}

/// Gaussian conjugate draw of each regime mean.
pub fn update_mu<R: Rng + ?Sized>(
    factors: &FactorPath,
    data: &Observations,
    params: &ModelParams,
    labels: &RegimeLabels,
    priors: &RegimePriors,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    let lambda = params.measurement()?;
    let q_inv = params.floored_q().map(|q| 1.0 / q);
    // Λᵀ Q⁻¹
    let mut lq = lambda.transpose();
    for (j, mut col) in lq.column_iter_mut().enumerate() {
        col *= q_inv[j];
    }
    let info = &lq * &lambda;
    let d = params.state_dim();
    let prior_prec = 1.0 / priors.scalars.mu_prior_var;
    let mut sums = vec![DVector::zeros(data.dim()); params.n_regimes()];
    let counts = labels.counts();
    for t in 0..data.len() {
        sums[labels.get(t)] += data.get(t) - &lambda * &factors.states[t];
    }
    (0..params.n_regimes())
        .map(|g| {
            let mut prec = &info * counts.get(g).copied().unwrap_or(0) as f64;
            for i in 0..d {
                prec[(i, i)] += prior_prec;
            }
            let linear = &priors.mu_mean[g] * prior_prec + &lq * &sums[g];
            let chol = cholesky_regularized(&prec)
                .map(|(c, _)| c)
                .ok_or_else(|| Error::Numerical { period: 0, msg: "mean posterior precision singular".into() })?;
            Ok(sample_from_precision(&chol, &linear, rng))
        })
        .collect()
}

/// `log p0(λ) = -½ Σ_t Σ_i (y_ti − Λ_i(λ)(F_t + μ_{z_t}))² / σ_i²`.
pub fn measurement_log_kernel(
    lambda: f64,
    factors: &FactorPath,
    data: &Observations,
    params: &ModelParams,
    labels: &RegimeLabels,
) -> Result<f64> {
    let lm = measurement_matrix(lambda, &params.grid, params.n_macro)?;
    let q = params.floored_q();
    let mut total = 0.0;
    for e in measurement_residuals(&lm, factors, data, &params.mu, labels) {
        total += e.iter().zip(q.iter()).map(|(r, s)| r * r / s).sum::<f64>();
    }
    Ok(-0.5 * total)
}

/// Independence Metropolis-Hastings step with a uniform proposal on the
/// prior bounds. Returns the new decay and whether the proposal was accepted.
pub fn update_lambda_mh<R: Rng + ?Sized>(
    factors: &FactorPath,
    data: &Observations,
    params: &ModelParams,
    labels: &RegimeLabels,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<(f64, bool)> {
    let (lo, hi) = prior.lambda_bounds;
    let proposal = rng.random_range(lo..hi);
    let u: f64 = rng.random();
    let current = measurement_log_kernel(params.lambda, factors, data, params, labels)?;
    let proposed = measurement_log_kernel(proposal, factors, data, params, labels)?;
    if u.ln() < proposed - current {
        Ok((proposal, true))
    } else {
        Ok((params.lambda, false))
    }
}
