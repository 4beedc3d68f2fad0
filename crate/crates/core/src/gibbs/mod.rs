//! Gibbs sampler for the regime-switching model.
//!
//! One sweep draws, in order: the factor path by FFBS, `Q`, every `H_g`, the
//! indicators and transition matrices `(γ_g, A_g)`, every `μ_g`, and finally
//! `λ` by Metropolis-Hastings.

mod init;
mod io;
mod prior;
mod updates;

pub use init::{cross_section_factors, initial_values, P0_SCALE};
pub use io::{read_draws, write_draws, DrawsManifest};
pub use prior::{PriorConfig, RegimePriors};
pub use updates::{
    draw_a, draw_gamma, measurement_log_kernel, transition_stats, update_a_gamma, update_h, update_lambda_mh,
    update_mu, update_q, TransitionStats,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regime_tree::RegimeLabels;
use crate::rng::rng_from_seed;
use crate::state_space::{ffbs_sample, kalman_filter, FactorPath, InitialState, ModelParams, Observations};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub n_burn: usize,
    /// Post burn-in sweeps; every `thinning`-th one is stored.
    pub n_draws: usize,
    pub thinning: usize,
    pub seed: u64,
    pub store_factors: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_burn: 2000,
            n_draws: 5000,
            thinning: 5,
            seed: 0,
            store_factors: true,
        }
    }
}

impl ChainConfig {
    /// Shorter chain used when scoring split candidates.
    pub fn candidate() -> Self {
        Self {
            n_burn: 500,
            n_draws: 1000,
            thinning: 5,
            seed: 0,
            store_factors: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thinning == 0 || self.n_draws == 0 {
            return Err(Error::Domain("draw count and thinning must be positive".into()));
        }
        if self.n_draws < self.thinning {
            return Err(Error::Domain("fewer post burn-in sweeps than the thinning interval".into()));
        }
        Ok(())
    }

    pub fn n_stored(&self) -> usize {
        self.n_draws / self.thinning
    }
}

/// Stored output of one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorDraws {
    pub params: Vec<ModelParams>,
    pub factors: Option<Vec<FactorPath>>,
    /// Fraction of accepted `λ` proposals over all sweeps.
    pub lambda_acceptance: f64,
    /// Fixed initial-state distribution used by the filter.
    pub init: InitialState,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Element-wise posterior mean of the factor paths.
    pub fn mean_factors(&self) -> Option<FactorPath> {
        let paths = self.factors.as_ref()?;
        let first = paths.first()?;
        let n = paths.len() as f64;
        let states = (0..first.len())
            .map(|t| paths.iter().fold(first.states[t].map(|_| 0.0), |acc, p| acc + &p.states[t]) / n)
            .collect();
        Some(FactorPath { states })
    }

    /// Element-wise posterior means of `μ_g` and `λ`.
    pub fn mean_mu(&self) -> Vec<nalgebra::DVector<f64>> {
        let n = self.len() as f64;
        let first = &self.params[0];
        (0..first.n_regimes())
            .map(|g| self.params.iter().fold(first.mu[g].map(|_| 0.0), |acc, p| acc + &p.mu[g]) / n)
            .collect()
    }

    pub fn mean_lambda(&self) -> f64 {
        self.params.iter().map(|p| p.lambda).sum::<f64>() / self.len() as f64
    }
}

/// Posterior means of every parameter block; `params.gamma` holds the
/// majority indicator and `gamma_freq` the inclusion frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary {
    pub params: ModelParams,
    pub gamma_freq: Vec<nalgebra::DMatrix<f64>>,
}

pub fn posterior_mean(draws: &PosteriorDraws) -> Result<PosteriorSummary> {
    let first = draws.params.first().ok_or_else(|| Error::Invalid("no posterior draws".into()))?;
    let n = draws.len() as f64;
    let mut mean = first.clone();
    let d = first.state_dim();
    let mut freq = vec![nalgebra::DMatrix::zeros(d, d); first.n_regimes()];
    mean.lambda = draws.mean_lambda();
    mean.mu = draws.mean_mu();
    mean.q_diag = draws.params.iter().fold(first.q_diag.map(|_| 0.0), |acc, p| acc + &p.q_diag) / n;
    for g in 0..first.n_regimes() {
        mean.a[g] = draws.params.iter().fold(first.a[g].map(|_| 0.0), |acc, p| acc + &p.a[g]) / n;
        mean.h[g] = draws.params.iter().fold(first.h[g].map(|_| 0.0), |acc, p| acc + &p.h[g]) / n;
        for p in &draws.params {
            freq[g] += p.gamma[g].map(|b| if b { 1.0 } else { 0.0 });
        }
        freq[g] /= n;
        mean.gamma[g] = freq[g].map(|f| f >= 0.5);
        for i in 0..d {
            mean.gamma[g][(i, i)] = true;
        }
    }
    Ok(PosteriorSummary { params: mean, gamma_freq: freq })
}

/// Everything one sweep conditions on besides the parameters.
pub struct GibbsSampler<'a> {
    pub data: &'a Observations,
    pub labels: &'a RegimeLabels,
    pub priors: RegimePriors,
    pub init: InitialState,
    pub params: ModelParams,
    pub factors: Option<FactorPath>,
    pub accepted: usize,
    pub sweeps: usize,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(
        data: &'a Observations,
        labels: &'a RegimeLabels,
        priors: RegimePriors,
        params: ModelParams,
        init: InitialState,
    ) -> Result<Self> {
        params.validate()?;
        priors.scalars.validate()?;
        if priors.mu_mean.len() != params.n_regimes() || priors.h_scale.len() != params.n_regimes() {
            return Err(Error::Dimension("priors and parameters disagree on the regime count".into()));
        }
        Ok(Self {
            data,
            labels,
            priors,
            init,
            params,
            factors: None,
            accepted: 0,
            sweeps: 0,
        })
    }

    /// One full sweep in the fixed order.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.sweep_inner(rng).map_err(|e| Error::Sweep {
            sweep: self.sweeps + 1,
            source: Box::new(e),
        })?;
        self.sweeps += 1;
        Ok(())
    }

    fn sweep_inner<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let (data, labels) = (self.data, self.labels);
        let filter = kalman_filter(&self.params, labels, data, &self.init)?;
        let factors = ffbs_sample(&filter, &self.params, labels, rng)?;
        let prior = &self.priors.scalars;

        self.params.q_diag = update_q(&factors, data, &self.params, labels, prior, rng)?;
        self.params.h = update_h(&factors, &self.params, labels, &self.priors, rng)?;
        let (a, gamma) = update_a_gamma(&factors, &self.params.h, &self.params, labels, prior, rng)?;
        self.params.a = a;
        self.params.gamma = gamma;
        self.params.mu = update_mu(&factors, data, &self.params, labels, &self.priors, rng)?;
        let (lambda, accepted) = update_lambda_mh(&factors, data, &self.params, labels, prior, rng)?;
        self.params.lambda = lambda;
        self.accepted += usize::from(accepted);
        self.factors = Some(factors);
        Ok(())
    }
}

/// Runs a chain from the given starting values.
pub fn run_chain_from(
    data: &Observations,
    labels: &RegimeLabels,
    priors: RegimePriors,
    start: ModelParams,
    init: InitialState,
    chain: &ChainConfig,
) -> Result<PosteriorDraws> {
    chain.validate()?;
    let mut rng = rng_from_seed(chain.seed);
    let mut sampler = GibbsSampler::new(data, labels, priors, start, init)?;
    for _ in 0..chain.n_burn {
        sampler.sweep(&mut rng)?;
    }
    let mut params = Vec::with_capacity(chain.n_stored());
    let mut factors = chain.store_factors.then(|| Vec::with_capacity(chain.n_stored()));
    for i in 1..=chain.n_draws {
        sampler.sweep(&mut rng)?;
        if i % chain.thinning == 0 {
            params.push(sampler.params.clone());
            if let Some(store) = factors.as_mut() {
                store.push(sampler.factors.clone().expect("a sweep has run"));
            }
        }
    }
    Ok(PosteriorDraws {
        params,
        factors,
        lambda_acceptance: sampler.accepted as f64 / sampler.sweeps as f64,
        init: sampler.init,
    })
}

/// Runs a chain started at the two-step least-squares fit, with the priors
/// centred on it.
pub fn run_chain(
    data: &Observations,
    labels: &RegimeLabels,
    grid: &crate::ns_basis::MaturityGrid,
    n_macro: usize,
    prior: &PriorConfig,
    chain: &ChainConfig,
) -> Result<PosteriorDraws> {
    let (start, init) = initial_values(data, labels, grid, n_macro)?;
    let priors = RegimePriors::from_initial(prior, &start);
    run_chain_from(data, labels, priors, start, init, chain)
}

#[cfg(test)]
mod tests;
