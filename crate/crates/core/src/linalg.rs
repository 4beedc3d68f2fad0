//! Small dense linear-algebra and sampling helpers shared by the filter and
//! the Gibbs conditionals.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn symmetrized(mut m: DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&mut m);
    m
}

pub fn is_symmetric_pd(m: &DMatrix<f64>) -> bool {
    if !m.is_square() || m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-10 * scale {
        return false;
    }
    m.clone().cholesky().is_some()
}

/// Cholesky factor of a symmetric matrix, retrying with growing diagonal
/// jitter when the plain factorization fails. Returns the factor and the
/// jitter that was needed (zero when none).
pub fn cholesky_regularized(m: &DMatrix<f64>) -> Option<(Cholesky<f64, Dyn>, f64)> {
    let base = symmetrized(m.clone());
    if let Some(c) = base.clone().cholesky() {
        return Some((c, 0.0));
    }
    let scale = base.diagonal().amax().max(1e-300);
    let n = base.nrows();
    let mut jitter = scale * 1e-12;
    for _ in 0..12 {
        let trial = &base + DMatrix::identity(n, n) * jitter;
        if let Some(c) = trial.cholesky() {
            return Some((c, jitter));
        }
        jitter *= 10.0;
    }
    None
}

pub fn log_det_cholesky(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

pub fn standard_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

/// Draws from `N(mean, cov)` for a symmetric positive semi-definite `cov`.
///
/// Singular covariances (for example a filter variance that has collapsed)
/// fall back to a jittered factorization and finally to a clipped
/// eigen-decomposition, so exact-zero variances produce exact draws at the mean.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let n = mean.len();
    let z = standard_normal_vector(n, rng);
    if cov.amax() == 0.0 {
        return Ok(mean.clone());
    }
    if let Some(c) = symmetrized(cov.clone()).cholesky() {
        return Ok(mean + c.l() * z);
    }
    let eig = symmetrized(cov.clone()).symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            period: 0,
            msg: "covariance has non-finite eigenvalues".into(),
        });
    }
    let scaled = DVector::from_iterator(
        n,
        eig.eigenvalues.iter().zip(z.iter()).map(|(l, zi)| l.max(0.0).sqrt() * zi),
    );
    Ok(mean + &eig.eigenvectors * scaled)
}

/// Draws `x ~ N(P⁻¹ b, P⁻¹)` given the Cholesky factor of the precision `P`.
pub fn sample_from_precision<R: Rng + ?Sized>(
    precision_chol: &Cholesky<f64, Dyn>,
    linear: &DVector<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let mean = precision_chol.solve(linear);
    let z = standard_normal_vector(linear.len(), rng);
    // L⁻ᵀ z has covariance (L Lᵀ)⁻¹
    let noise = precision_chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .expect("cholesky factor has a positive diagonal");
    mean + noise
}

/// Inverse-Gamma draw with shape `a` and scale `b` (density ∝ x^{-a-1} e^{-b/x}).
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0 / scale).expect("inverse-gamma parameters must be positive");
    1.0 / g.sample(rng)
}

/// Inverse-Wishart draw `IW(df, scale)` with mean `scale / (df - p - 1)`.
///
/// Draws `W ~ Wishart(df, scale⁻¹)` through the Bartlett decomposition and
/// returns `W⁻¹`.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(
    df: f64,
    scale: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let p = scale.nrows();
    if df <= (p as f64) - 1.0 {
        return Err(Error::Domain(format!(
            "inverse-Wishart degrees of freedom {df} too small for dimension {p}"
        )));
    }
    let scale_chol = symmetrized(scale.clone())
        .cholesky()
        .ok_or_else(|| Error::Numerical {
            period: 0,
            msg: "inverse-Wishart scale matrix is not positive definite".into(),
        })?;
    let precision = scale_chol.inverse();
    let l = symmetrized(precision)
        .cholesky()
        .ok_or_else(|| Error::Numerical {
            period: 0,
            msg: "inverse-Wishart scale inverse is not positive definite".into(),
        })?
        .unpack();
    let mut bartlett = DMatrix::zeros(p, p);
    for i in 0..p {
        let chi = Gamma::new((df - i as f64) / 2.0, 2.0).expect("positive chi-square dof");
        bartlett[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            bartlett[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let la = l * bartlett;
    let wishart = &la * la.transpose();
    let inv = symmetrized(wishart)
        .cholesky()
        .ok_or_else(|| Error::Numerical {
            period: 0,
            msg: "Wishart draw is singular".into(),
        })?
        .inverse();
    Ok(symmetrized(inv))
}

/// `log N(x; mean, cov)` through a Cholesky factorization of `cov`.
pub fn mvn_log_density(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Option<f64> {
    let c = symmetrized(cov.clone()).cholesky()?;
    let r = x - mean;
    let w = c.l_dirty().lower_triangle().solve_lower_triangular(&r)?;
    let n = x.len() as f64;
    Some(-0.5 * (n * (2.0 * std::f64::consts::PI).ln() + log_det_cholesky(&c) + w.norm_squared()))
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
