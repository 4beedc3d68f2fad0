//! Regime-switching linear-Gaussian state-space model.
//!
//! Conditional on regime labels `z_t`,
//!
//! ```text
//! y_t = Λ μ_{z_t} + Λ F_t + ε_t,      ε_t ~ N(0, Q),  Q diagonal
//! F_t = A_{z_{t-1}} F_{t-1} + η_t,    η_t ~ N(0, H_{z_t})
//! ```
//!
//! where `F_t` is the demeaned factor vector. For the yields-macro model `Λ`
//! is the augmented block loading and `y_t` stacks yields over macro factors.
//! The recursion starts from `F_0 ~ N(F0, P0)`; the regime before the sample
//! is taken to be `z_1`.

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, log_det_cholesky, symmetrize, symmetrized};
use crate::ns_basis::{measurement_matrix, MaturityGrid};
use crate::panel_io::{MacroPanel, YieldPanel};
use crate::regime_tree::RegimeLabels;

/// Measurement variances are clamped at this floor.
pub const Q_FLOOR: f64 = 1e-10;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    YieldsOnly,
    YieldsMacro,
}

/// Per-period likelihood used when scoring parameter draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LikelihoodMode {
    /// Prediction-error decomposition from the Kalman filter.
    #[default]
    PredictionError,
    /// Densities built from the backward-conditioned moments given a sampled
    /// factor path.
    SmootherConditioned,
}

/// Full parameter state of the model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub lambda: f64,
    pub grid: MaturityGrid,
    /// Number of observed macro factors `K`.
    pub n_macro: usize,
    /// Transition matrices, one per regime, `(3+K)×(3+K)`.
    pub a: Vec<DMatrix<f64>>,
    /// Innovation covariances, one per regime.
    pub h: Vec<DMatrix<f64>>,
    /// Factor means; yield block in percent, macro block in native units.
    pub mu: Vec<DVector<f64>>,
    /// Measurement variances, `N + K` entries.
    pub q_diag: DVector<f64>,
    /// Inclusion indicators for the entries of each `A_g`; diagonal fixed at one.
    pub gamma: Vec<DMatrix<bool>>,
}

impl ModelParams {
    pub fn state_dim(&self) -> usize {
        3 + self.n_macro
    }

    pub fn obs_dim(&self) -> usize {
        self.grid.len() + self.n_macro
    }

    pub fn n_regimes(&self) -> usize {
        self.a.len()
    }

    pub fn measurement(&self) -> Result<DMatrix<f64>> {
        measurement_matrix(self.lambda, &self.grid, self.n_macro)
    }

    pub fn floored_q(&self) -> DVector<f64> {
        self.q_diag.map(|q| q.max(Q_FLOOR))
    }

    /// Same parameters with every regime's blocks copied from regime `from`.
    pub fn tied(&self, from: usize, n_regimes: usize) -> Self {
        Self {
            a: vec![self.a[from].clone(); n_regimes],
            h: vec![self.h[from].clone(); n_regimes],
            mu: vec![self.mu[from].clone(); n_regimes],
            gamma: vec![self.gamma[from].clone(); n_regimes],
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.state_dim();
        let g = self.a.len();
        if g == 0 {
            return Err(Error::Dimension("parameters need at least one regime".into()));
        }
        if self.h.len() != g || self.mu.len() != g || self.gamma.len() != g {
            return Err(Error::Dimension("per-regime blocks disagree on the regime count".into()));
        }
        if self.q_diag.len() != self.obs_dim() {
            return Err(Error::Dimension(format!(
                "Q has {} entries, expected {}",
                self.q_diag.len(),
                self.obs_dim()
            )));
        }
        if self.q_diag.iter().any(|q| !(*q > 0.0)) {
            return Err(Error::Domain("measurement variances must be positive".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Domain("decay must be positive".into()));
        }
        for r in 0..g {
            if self.a[r].shape() != (d, d) || self.h[r].shape() != (d, d) || self.mu[r].len() != d {
                return Err(Error::Dimension(format!("regime {} blocks have the wrong size", r + 1)));
            }
            if self.gamma[r].shape() != (d, d) || (0..d).any(|i| !self.gamma[r][(i, i)]) {
                return Err(Error::Domain(format!("regime {} inclusion diagonal must be one", r + 1)));
            }
            if !linalg::is_symmetric_pd(&self.h[r]) {
                return Err(Error::Domain(format!("H for regime {} is not symmetric positive definite", r + 1)));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsRepr {
    lambda: f64,
    maturities: MaturityGrid,
    #[serde(default)]
    n_macro: usize,
    a: Vec<Vec<Vec<f64>>>,
    h: Vec<Vec<Vec<f64>>>,
    mu: Vec<Vec<f64>>,
    q_diag: Vec<f64>,
    #[serde(default)]
    gamma: Option<Vec<Vec<Vec<bool>>>>,
}

fn nested<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_nested<T: nalgebra::Scalar + Copy>(rows: &[Vec<T>], what: &str) -> Result<DMatrix<T>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension(format!("{what} must be a non-empty square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl TryFrom<ParamsRepr> for ModelParams {
    type Error = Error;

    fn try_from(r: ParamsRepr) -> Result<Self> {
        let a = r.a.iter().map(|m| from_nested(m, "A")).collect::<Result<Vec<_>>>()?;
        let d = 3 + r.n_macro;
        let gamma = match r.gamma {
            Some(g) => g.iter().map(|m| from_nested(m, "gamma")).collect::<Result<Vec<_>>>()?,
            None => vec![DMatrix::from_element(d, d, true); a.len()],
        };
        let params = ModelParams {
            lambda: r.lambda,
            grid: r.maturities,
            n_macro: r.n_macro,
            a,
            h: r.h.iter().map(|m| from_nested(m, "H")).collect::<Result<Vec<_>>>()?,
            mu: r.mu.into_iter().map(DVector::from_vec).collect(),
            q_diag: DVector::from_vec(r.q_diag),
            gamma,
        };
        params.validate()?;
        Ok(params)
    }
}

impl From<&ModelParams> for ParamsRepr {
    fn from(p: &ModelParams) -> Self {
        ParamsRepr {
            lambda: p.lambda,
            maturities: p.grid.clone(),
            n_macro: p.n_macro,
            a: p.a.iter().map(nested).collect(),
            h: p.h.iter().map(nested).collect(),
            mu: p.mu.iter().map(|m| m.iter().copied().collect()).collect(),
            q_diag: p.q_diag.iter().copied().collect(),
            gamma: Some(p.gamma.iter().map(nested).collect()),
        }
    }
}

/// JSON form: nested row-major arrays per regime.
impl Serialize for ModelParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ParamsRepr::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = ParamsRepr::deserialize(d)?;
        ModelParams::try_from(repr).map_err(serde::de::Error::custom)
    }
}

/// Observation vectors `y_t` (yields, then macro factors when present).
#[derive(Clone, Debug, PartialEq)]
pub struct Observations {
    rows: Vec<DVector<f64>>,
}

impl Observations {
    pub fn new(rows: Vec<DVector<f64>>) -> Result<Self> {
        if let Some(first) = rows.first() {
            if rows.iter().any(|r| r.len() != first.len()) {
                return Err(Error::Dimension("observation rows differ in length".into()));
            }
        }
        Ok(Self { rows })
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            rows: (0..m.nrows()).map(|t| m.row(t).transpose()).collect(),
        }
    }

    /// Yields alone, or yields stacked over the macro factors.
    pub fn from_panels(yields: &YieldPanel, macro_panel: Option<&MacroPanel>) -> Result<Self> {
        let t = yields.len();
        let k = macro_panel.map_or(0, |m| m.model_factors.ncols());
        if let Some(m) = macro_panel {
            if m.len() != t {
                return Err(Error::Dimension(format!("macro panel has {} rows, yields {t}", m.len())));
            }
        }
        let n = yields.grid.len();
        let rows = (0..t)
            .map(|i| {
                DVector::from_fn(n + k, |j, _| {
                    if j < n {
                        yields.values[(i, j)]
                    } else {
                        macro_panel.unwrap().model_factors[(i, j - n)]
                    }
                })
            })
            .collect();
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    pub fn get(&self, t: usize) -> &DVector<f64> {
        &self.rows[t]
    }

    pub fn rows(&self) -> &[DVector<f64>] {
        &self.rows
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.dim(), |t, j| self.rows[t][j])
    }
}

/// Distribution of the state before the first period.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl InitialState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov }
    }

    /// `F0` from a cross-sectional least-squares fit of the first observation
    /// on the measurement matrix, net of the first period's regime mean;
    /// `P0 = scale · I`.
    pub fn from_first_observation(params: &ModelParams, labels: &RegimeLabels, data: &Observations, scale: f64) -> Result<Self> {
        let lambda = params.measurement()?;
        let d = params.state_dim();
        let y = data.get(0);
        let normal = lambda.transpose() * &lambda;
        let rhs = lambda.transpose() * y;
        let f = normal
            .cholesky()
            .ok_or_else(|| Error::Numerical { period: 1, msg: "loading matrix has deficient column rank".into() })?
            .solve(&rhs);
        Ok(Self {
            mean: f - &params.mu[labels.get(0)],
            cov: DMatrix::identity(d, d) * scale,
        })
    }
}

/// Output of the forward recursion, indexed by period `0..T`.
#[derive(Clone, Debug)]
pub struct FilterOutput {
    pub pred_mean: Vec<DVector<f64>>,
    pub pred_cov: Vec<DMatrix<f64>>,
    pub filt_mean: Vec<DVector<f64>>,
    pub filt_cov: Vec<DMatrix<f64>>,
    pub gains: Vec<DMatrix<f64>>,
    /// Per-period predictive log-densities.
    pub loglik_terms: Vec<f64>,
    pub loglik: f64,
}

/// Sampled demeaned factor path, one vector per period.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorPath {
    pub states: Vec<DVector<f64>>,
}

impl FactorPath {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let d = self.states.first().map_or(0, |s| s.len());
        DMatrix::from_fn(self.len(), d, |t, j| self.states[t][j])
    }
}

fn check_inputs(params: &ModelParams, labels: &RegimeLabels, data: &Observations, init: &InitialState) -> Result<()> {
    if labels.len() != data.len() {
        return Err(Error::Dimension(format!("{} labels for {} periods", labels.len(), data.len())));
    }
    if data.is_empty() {
        return Err(Error::Dimension("no observations".into()));
    }
    if data.dim() != params.obs_dim() {
        return Err(Error::Dimension(format!(
            "observations have {} series, model expects {}",
            data.dim(),
            params.obs_dim()
        )));
    }
    if labels.n_regimes() > params.n_regimes() {
        return Err(Error::Dimension(format!(
            "labels use {} regimes, parameters have {}",
            labels.n_regimes(),
            params.n_regimes()
        )));
    }
    let d = params.state_dim();
    if init.mean.len() != d || init.cov.shape() != (d, d) {
        return Err(Error::Dimension("initial state has the wrong dimension".into()));
    }
    Ok(())
}

/// Regime governing the transition into period `t` (the previous period's
/// regime; the first period uses its own).
fn transition_regime(labels: &RegimeLabels, t: usize) -> usize {
    labels.get(t.saturating_sub(1))
}

/// Forward Kalman recursion with regime-indexed system matrices.
pub fn kalman_filter(
    params: &ModelParams,
    labels: &RegimeLabels,
    data: &Observations,
    init: &InitialState,
) -> Result<FilterOutput> {
    check_inputs(params, labels, data, init)?;
    let lambda = params.measurement()?;
    let lambda_t = lambda.transpose();
    let q = params.floored_q();
    let n = data.dim() as f64;
    let t_len = data.len();
    let obs_means: Vec<DVector<f64>> = params.mu.iter().map(|m| &lambda * m).collect();

    let mut out = FilterOutput {
        pred_mean: Vec::with_capacity(t_len),
        pred_cov: Vec::with_capacity(t_len),
        filt_mean: Vec::with_capacity(t_len),
        filt_cov: Vec::with_capacity(t_len),
        gains: Vec::with_capacity(t_len),
        loglik_terms: Vec::with_capacity(t_len),
        loglik: 0.0,
    };
    let mut mean = init.mean.clone();
    let mut cov = init.cov.clone();
    for t in 0..t_len {
        let g_prev = transition_regime(labels, t);
        let g = labels.get(t);
        let a = &params.a[g_prev];
        let pred_mean = a * &mean;
        let mut pred_cov = a * &cov * a.transpose() + &params.h[g];
        symmetrize(&mut pred_cov);

        let lp = &lambda * &pred_cov;
        let mut s = &lp * &lambda_t;
        for i in 0..s.nrows() {
            s[(i, i)] += q[i];
        }
        let chol = symmetrized(s).cholesky().ok_or_else(|| Error::Numerical {
            period: t + 1,
            msg: "predictive covariance is not positive definite".into(),
        })?;
        let innovation = data.get(t) - &lambda * &pred_mean - &obs_means[g];
        // S⁻¹ Λ P̂ gives Kᵀ without forming S⁻¹
        let gain = chol.solve(&lp).transpose();
        let new_mean = &pred_mean + &gain * &innovation;
        let mut new_cov = &pred_cov - &gain * &lp;
        symmetrize(&mut new_cov);

        let white = chol
            .l_dirty()
            .lower_triangle()
            .solve_lower_triangular(&innovation)
            .expect("cholesky factor has a positive diagonal");
        let term = -0.5 * (n * LN_2PI + log_det_cholesky(&chol) + white.norm_squared());
        if !term.is_finite() {
            return Err(Error::Numerical {
                period: t + 1,
                msg: "non-finite predictive log-density".into(),
            });
        }
        out.loglik += term;
        out.loglik_terms.push(term);
        out.pred_mean.push(pred_mean);
        out.pred_cov.push(pred_cov);
        out.gains.push(gain);
        out.filt_mean.push(new_mean.clone());
        out.filt_cov.push(new_cov.clone());
        mean = new_mean;
        cov = new_cov;
    }
    Ok(out)
}

/// Total predictive log-likelihood `Σ_t ℓ_t`.
pub fn predictive_loglik(
    params: &ModelParams,
    labels: &RegimeLabels,
    data: &Observations,
    init: &InitialState,
) -> Result<f64> {
    kalman_filter(params, labels, data, init).map(|f| f.loglik)
}

fn factor_predictive(pred_cov: &DMatrix<f64>, period: usize) -> Cholesky<f64, Dyn> {
    match linalg::cholesky_regularized(pred_cov) {
        Some((c, jitter)) => {
            if jitter > 0.0 {
                warn!("period {period}: one-step factor covariance regularized with jitter {jitter:e}");
            }
            c
        }
        None => {
            warn!("period {period}: one-step factor covariance unusable, falling back to identity");
            DMatrix::identity(pred_cov.nrows(), pred_cov.nrows()).cholesky().unwrap()
        }
    }
}

/// Moments of `F_t | F_{t+1}, y_{1:t}` for `t < T - 1` (zero-based).
pub fn backward_conditional(
    filter: &FilterOutput,
    params: &ModelParams,
    labels: &RegimeLabels,
    t: usize,
    next_state: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let a = &params.a[labels.get(t)];
    let p = &filter.filt_cov[t];
    // one-step prediction of t+1 from t uses A_{z_t} and H_{z_{t+1}}
    let chol = factor_predictive(&filter.pred_cov[t + 1], t + 2);
    let ap = a * p;
    let gain_t = chol.solve(&ap);
    let gain = gain_t.transpose();
    let mean = &filter.filt_mean[t] + &gain * (next_state - &filter.pred_mean[t + 1]);
    let mut cov = p - &gain * &ap;
    symmetrize(&mut cov);
    (mean, cov)
}

/// Forward-filtering backward-sampling draw of the factor path.
pub fn ffbs_sample<R: Rng + ?Sized>(
    filter: &FilterOutput,
    params: &ModelParams,
    labels: &RegimeLabels,
    rng: &mut R,
) -> Result<FactorPath> {
    let t_len = filter.filt_mean.len();
    let mut states = vec![DVector::zeros(0); t_len];
    states[t_len - 1] = linalg::sample_mvn(&filter.filt_mean[t_len - 1], &filter.filt_cov[t_len - 1], rng)
        .map_err(|e| relabel_period(e, t_len))?;
    for t in (0..t_len - 1).rev() {
        let (mean, cov) = backward_conditional(filter, params, labels, t, &states[t + 1]);
        states[t] = linalg::sample_mvn(&mean, &cov, rng).map_err(|e| relabel_period(e, t + 1))?;
    }
    Ok(FactorPath { states })
}

fn relabel_period(e: Error, period: usize) -> Error {
    match e {
        Error::Numerical { msg, .. } => Error::Numerical { period, msg },
        other => other,
    }
}

/// Log-likelihood built from the backward-conditioned factor moments:
/// `N(Λ F_{t|t,F_{t+1}} + Λ μ_{z_t}, Λ P_{t|t,F_{t+1}} Λᵀ + Q)` for `t < T`
/// and the filtered moments at `T`.
pub fn smoother_conditioned_loglik(
    params: &ModelParams,
    labels: &RegimeLabels,
    data: &Observations,
    init: &InitialState,
    path: &FactorPath,
) -> Result<f64> {
    let filter = kalman_filter(params, labels, data, init)?;
    let t_len = data.len();
    if path.len() != t_len {
        return Err(Error::Dimension("factor path length differs from the sample".into()));
    }
    let lambda = params.measurement()?;
    let q = DMatrix::from_diagonal(&params.floored_q());
    let mut total = 0.0;
    for t in 0..t_len {
        let (mean, cov) = if t + 1 < t_len {
            backward_conditional(&filter, params, labels, t, &path.states[t + 1])
        } else {
            (filter.filt_mean[t].clone(), filter.filt_cov[t].clone())
        };
        let obs_mean = &lambda * (mean + &params.mu[labels.get(t)]);
        let obs_cov = &lambda * cov * lambda.transpose() + &q;
        total += linalg::mvn_log_density(data.get(t), &obs_mean, &obs_cov).ok_or_else(|| Error::Numerical {
            period: t + 1,
            msg: "conditioned predictive covariance is not positive definite".into(),
        })?;
    }
    Ok(total)
}

/// Dense reference computations that unroll the whole model into one joint
/// Gaussian. Independent of the recursive filter; used to check it.
pub mod oracle {
    use super::*;

    /// Largest stacked observation dimension the oracle will build.
    pub const MAX_STACKED_DIM: usize = 500;

    /// Joint Gaussian of the stacked states `F_{1:T}` and observations `y_{1:T}`.
    pub struct JointGaussian {
        pub state_mean: DVector<f64>,
        pub state_cov: DMatrix<f64>,
        pub obs_mean: DVector<f64>,
        pub obs_cov: DMatrix<f64>,
        /// Cov(states, observations).
        pub cross_cov: DMatrix<f64>,
    }

    pub fn joint_gaussian(params: &ModelParams, labels: &RegimeLabels, init: &InitialState) -> Result<JointGaussian> {
        let t_len = labels.len();
        let d = params.state_dim();
        let n = params.obs_dim();
        if t_len * n > MAX_STACKED_DIM {
            return Err(Error::Domain(format!(
                "dense oracle limited to {MAX_STACKED_DIM} stacked observations, got {}",
                t_len * n
            )));
        }
        let lambda = params.measurement()?;
        // shocks ξ = (F_0, η_1, ..., η_T); F_t = Φ_t ξ
        let width = (t_len + 1) * d;
        let mut shock_mean = DVector::zeros(width);
        shock_mean.rows_mut(0, d).copy_from(&init.mean);
        let mut shock_cov = DMatrix::zeros(width, width);
        shock_cov.view_mut((0, 0), (d, d)).copy_from(&init.cov);
        for t in 0..t_len {
            let h = &params.h[labels.get(t)];
            shock_cov.view_mut(((t + 1) * d, (t + 1) * d), (d, d)).copy_from(h);
        }
        let mut phi = DMatrix::zeros(t_len * d, width);
        let mut prev = DMatrix::zeros(d, width);
        prev.view_mut((0, 0), (d, d)).fill_with_identity();
        for t in 0..t_len {
            let a = &params.a[labels.get(if t == 0 { 0 } else { t - 1 })];
            let mut cur = a * &prev;
            for i in 0..d {
                cur[(i, (t + 1) * d + i)] += 1.0;
            }
            phi.view_mut((t * d, 0), (d, width)).copy_from(&cur);
            prev = cur;
        }
        let mut big_lambda = DMatrix::zeros(t_len * n, t_len * d);
        let mut mean_shift = DVector::zeros(t_len * n);
        for t in 0..t_len {
            big_lambda.view_mut((t * n, t * d), (n, d)).copy_from(&lambda);
            mean_shift
                .rows_mut(t * n, n)
                .copy_from(&(&lambda * &params.mu[labels.get(t)]));
        }
        let state_mean = &phi * &shock_mean;
        let state_cov = &phi * &shock_cov * phi.transpose();
        let q = params.floored_q();
        let mut obs_cov = &big_lambda * &state_cov * big_lambda.transpose();
        for t in 0..t_len {
            for i in 0..n {
                obs_cov[(t * n + i, t * n + i)] += q[i];
            }
        }
        let obs_mean = &big_lambda * &state_mean + mean_shift;
        let cross_cov = &state_cov * big_lambda.transpose();
        Ok(JointGaussian {
            state_mean,
            state_cov,
            obs_mean,
            obs_cov,
            cross_cov,
        })
    }

    /// Log-density of all observations under the unrolled joint Gaussian.
    pub fn joint_density_oracle(
        params: &ModelParams,
        labels: &RegimeLabels,
        data: &Observations,
        init: &InitialState,
    ) -> Result<f64> {
        let joint = joint_gaussian(params, labels, init)?;
        let stacked = DVector::from_iterator(
            data.len() * data.dim(),
            data.rows().iter().flat_map(|r| r.iter().copied()),
        );
        linalg::mvn_log_density(&stacked, &joint.obs_mean, &joint.obs_cov)
            .ok_or_else(|| Error::Numerical { period: 0, msg: "stacked covariance not positive definite".into() })
    }

    /// Exact mean and covariance of `F_{1:T} | y_{1:T}` stacked period-major.
    pub fn smoothing_moments(
        params: &ModelParams,
        labels: &RegimeLabels,
        data: &Observations,
        init: &InitialState,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let joint = joint_gaussian(params, labels, init)?;
        let stacked = DVector::from_iterator(
            data.len() * data.dim(),
            data.rows().iter().flat_map(|r| r.iter().copied()),
        );
        let chol = joint
            .obs_cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical { period: 0, msg: "stacked covariance not positive definite".into() })?;
        let mean = &joint.state_mean + &joint.cross_cov * chol.solve(&(stacked - &joint.obs_mean));
        let cov = &joint.state_cov - &joint.cross_cov * chol.solve(&joint.cross_cov.transpose());
        Ok((mean, symmetrized(cov)))
    }
}
