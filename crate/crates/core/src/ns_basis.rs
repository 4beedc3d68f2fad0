//! Nelson-Siegel factor loadings.
//!
//! Yields at tenor `τ` (months) load on level, slope and curvature through
//!
//! ```text
//! (1, (1 - e^{-λτ}) / (λτ), (1 - e^{-λτ}) / (λτ) - e^{-λτ})
//! ```
//!
//! with the decay `λ` expressed per month. The yields-macro model stacks an
//! identity block under the yield loadings so that the macro factors are
//! observed directly.

use nalgebra::{DMatrix, RowVector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decay value used by Diebold-Li style calibrations; also the sampler's
/// starting point for `λ`.
pub const REFERENCE_LAMBDA: f64 = 0.0609;

/// Below this value of `λτ` the loadings switch to their Taylor expansion.
const SERIES_CUTOFF: f64 = 1e-6;

pub const DEFAULT_MATURITIES: [f64; 13] = [
    3.0, 6.0, 9.0, 12.0, 24.0, 36.0, 48.0, 60.0, 72.0, 84.0, 96.0, 108.0, 120.0,
];

/// Strictly increasing, positive tenors in months.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MaturityGrid(Vec<f64>);

impl MaturityGrid {
    pub fn new(maturities: Vec<f64>) -> Result<Self> {
        if maturities.is_empty() {
            return Err(Error::Domain("maturity grid must be non-empty".into()));
        }
        if let Some(bad) = maturities.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::Domain(format!("maturity {bad} is not a positive tenor")));
        }
        if maturities.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("maturities must be strictly increasing".into()));
        }
        Ok(Self(maturities))
    }

    pub fn maturities(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for MaturityGrid {
    fn default() -> Self {
        Self(DEFAULT_MATURITIES.to_vec())
    }
}

impl TryFrom<Vec<f64>> for MaturityGrid {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<MaturityGrid> for Vec<f64> {
    fn from(grid: MaturityGrid) -> Self {
        grid.0
    }
}

/// N×3 loading matrix at a given decay.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadingMatrix {
    pub values: DMatrix<f64>,
    pub lambda: f64,
}

/// One row of the loading matrix.
pub fn loading_row(lambda: f64, tau: f64) -> Result<RowVector3<f64>> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("decay must be positive, got {lambda}")));
    }
    if !(tau > 0.0) || tau.is_nan() {
        return Err(Error::Domain(format!("tenor must be positive, got {tau}")));
    }
    let x = lambda * tau;
    let (slope, curvature) = if x < SERIES_CUTOFF {
        (1.0 - x / 2.0 + x * x / 6.0, x / 2.0 - x * x / 3.0)
    } else if x.is_infinite() {
        (0.0, 0.0)
    } else {
        let decay = (-x).exp();
        // exp_m1 keeps 1 - e^{-x} accurate just above the cutoff
        let slope = -(-x).exp_m1() / x;
        (slope, slope - decay)
    };
    Ok(RowVector3::new(1.0, slope, curvature))
}

pub fn loading_matrix(lambda: f64, grid: &MaturityGrid) -> Result<LoadingMatrix> {
    if grid.is_empty() {
        return Err(Error::Domain("maturity grid must be non-empty".into()));
    }
    let mut values = DMatrix::zeros(grid.len(), 3);
    for (i, &tau) in grid.maturities().iter().enumerate() {
        let row = loading_row(lambda, tau)?;
        values.row_mut(i).copy_from(&row);
    }
    Ok(LoadingMatrix { values, lambda })
}

/// Block-diagonal `[[Λ, 0], [0, I_K]]` measurement matrix.
pub fn augmented_loading(loadings: &LoadingMatrix, n_macro: usize) -> DMatrix<f64> {
    let n = loadings.values.nrows();
    let mut out = DMatrix::zeros(n + n_macro, 3 + n_macro);
    out.view_mut((0, 0), (n, 3)).copy_from(&loadings.values);
    for k in 0..n_macro {
        out[(n + k, 3 + k)] = 1.0;
    }
    out
}

/// Measurement matrix for `n_macro` observed macro factors at decay `lambda`.
pub fn measurement_matrix(lambda: f64, grid: &MaturityGrid, n_macro: usize) -> Result<DMatrix<f64>> {
    Ok(augmented_loading(&loading_matrix(lambda, grid)?, n_macro))
}
