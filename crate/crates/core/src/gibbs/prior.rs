use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state_space::ModelParams;

/// Scalar prior hyperparameters. Regime-specific pieces (prior means of `μ_g`
/// and the inverse-Wishart scales) are filled in from the starting values by
/// [`RegimePriors::from_initial`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    /// Spike variance for excluded transition coefficients.
    pub xi0_sq: f64,
    /// Slab variance for included coefficients and the diagonal.
    pub xi1_sq: f64,
    /// Prior inclusion probability.
    pub w: f64,
    pub lambda_bounds: (f64, f64),
    pub q_alpha: f64,
    pub q_beta: f64,
    /// Prior variance of each element of `μ_g`.
    pub mu_prior_var: f64,
    /// Inverse-Wishart degrees of freedom minus the state dimension.
    pub h_df_extra: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            xi0_sq: 1e-5,
            xi1_sq: 1.0,
            w: 0.5,
            lambda_bounds: (0.01, 0.1),
            q_alpha: 5.0,
            q_beta: 0.05,
            mu_prior_var: 10.0,
            h_df_extra: 4.0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi0_sq > 0.0 && self.xi0_sq < self.xi1_sq) {
            return Err(Error::Domain("need 0 < xi0_sq < xi1_sq".into()));
        }
        if !(self.w > 0.0 && self.w < 1.0) {
            return Err(Error::Domain("inclusion probability must lie in (0, 1)".into()));
        }
        let (lo, hi) = self.lambda_bounds;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::Domain("lambda bounds must satisfy 0 < lo < hi".into()));
        }
        if !(self.q_alpha > 0.0 && self.q_beta > 0.0 && self.mu_prior_var > 0.0) {
            return Err(Error::Domain("prior scales must be positive".into()));
        }
        if !(self.h_df_extra > 1.0) {
            return Err(Error::Domain("inverse-Wishart df must exceed dimension + 1".into()));
        }
        Ok(())
    }

    /// Prior variance of a transition coefficient given its indicator.
    pub fn coef_var(&self, included: bool) -> f64 {
        if included {
            self.xi1_sq
        } else {
            self.xi0_sq
        }
    }
}

/// Fully specified priors for a given regime count.
#[derive(Clone, Debug, PartialEq)]
pub struct RegimePriors {
    pub scalars: PriorConfig,
    pub mu_mean: Vec<DVector<f64>>,
    pub h_df: f64,
    pub h_scale: Vec<DMatrix<f64>>,
}

impl RegimePriors {
    /// Centres `μ_g` on its starting value and sets the inverse-Wishart scale
    /// so that the prior mean of `H_g` equals its starting value.
    pub fn from_initial(scalars: &PriorConfig, init: &ModelParams) -> Self {
        let d = init.state_dim() as f64;
        let h_df = d + scalars.h_df_extra;
        Self {
            scalars: scalars.clone(),
            mu_mean: init.mu.clone(),
            h_df,
            h_scale: init.h.iter().map(|h| h * (h_df - d - 1.0)).collect(),
        }
    }
}
