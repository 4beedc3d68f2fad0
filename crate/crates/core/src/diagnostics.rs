//! Posterior summaries: residual tables, regime-average curves, Welch tests
//! across regimes, density exports and generalized impulse responses.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::gibbs::PosteriorDraws;
use crate::ns_basis::loading_matrix;
use crate::panel_io::YieldPanel;
use crate::regime_tree::RegimeLabels;

/// Maturity buckets (inclusive month ranges) of the residual table.
pub const BUCKETS: [(f64, f64); 3] = [(3.0, 12.0), (24.0, 48.0), (60.0, 120.0)];

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::parse(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- residuals

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualRow {
    #[serde(rename = "Maturity")]
    pub label: String,
    #[serde(rename = "Mean")]
    pub mean: f64,
    #[serde(rename = "Std")]
    pub std: f64,
    #[serde(rename = "Min")]
    pub min: f64,
    #[serde(rename = "Max")]
    pub max: f64,
    #[serde(rename = "MAE")]
    pub mae: f64,
    #[serde(rename = "RMSE")]
    pub rmse: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    /// One row per tenor, in grid order.
    pub tenors: Vec<ResidualRow>,
    /// Bucket averages followed by the overall average.
    pub summary: Vec<ResidualRow>,
}

impl ResidualReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let all: Vec<&ResidualRow> = self.tenors.iter().chain(&self.summary).collect();
        write_rows(&all, path)
    }
}

fn fmt_months(m: f64) -> String {
    if m.fract() == 0.0 {
        format!("{}", m as i64)
    } else {
        format!("{m}")
    }
}

fn column_stats(label: String, x: &[f64]) -> ResidualRow {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let std = if x.len() > 1 {
        (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    ResidualRow {
        label,
        mean,
        std,
        min: x.iter().copied().fold(f64::INFINITY, f64::min),
        max: x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mae: x.iter().map(|v| v.abs()).sum::<f64>() / n,
        rmse: (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt(),
    }
}

fn average_rows(label: String, rows: &[&ResidualRow]) -> ResidualRow {
    let n = rows.len() as f64;
    let avg = |f: fn(&ResidualRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    ResidualRow {
        label,
        mean: avg(|r| r.mean),
        std: avg(|r| r.std),
        min: avg(|r| r.min),
        max: avg(|r| r.max),
        mae: avg(|r| r.mae),
        rmse: avg(|r| r.rmse),
    }
}

/// Residual statistics from a `T×N` matrix of residuals already in basis points.
pub fn residual_stats(residuals_bp: &DMatrix<f64>, maturities: &[f64]) -> Result<ResidualReport> {
    if residuals_bp.ncols() != maturities.len() {
        return Err(Error::Dimension("one residual column per tenor expected".into()));
    }
    if residuals_bp.nrows() == 0 {
        return Err(Error::Invalid("no residuals".into()));
    }
    let tenors: Vec<ResidualRow> = maturities
        .iter()
        .enumerate()
        .map(|(j, m)| column_stats(fmt_months(*m), residuals_bp.column(j).as_slice()))
        .collect();
    let mut summary = Vec::new();
    for (lo, hi) in BUCKETS {
        let members: Vec<&ResidualRow> = maturities
            .iter()
            .zip(&tenors)
            .filter(|(m, _)| **m >= lo && **m <= hi)
            .map(|(_, r)| r)
            .collect();
        if !members.is_empty() {
            summary.push(average_rows(format!("{}-{}", fmt_months(lo), fmt_months(hi)), &members));
        }
    }
    summary.push(average_rows("Average".into(), &tenors.iter().collect::<Vec<_>>()));
    Ok(ResidualReport { tenors, summary })
}

/// Fitted yields `Λ(λ̄)(F̄_t + μ̄_{z_t})` from posterior means, `T×N`.
pub fn fitted_yields(yields: &YieldPanel, draws: &PosteriorDraws, labels: &RegimeLabels) -> Result<DMatrix<f64>> {
    let factors = draws
        .mean_factors()
        .ok_or_else(|| Error::Invalid("draws carry no factor paths".into()))?;
    if factors.len() != yields.len() || labels.len() != yields.len() {
        return Err(Error::Dimension("draws, labels and yields cover different periods".into()));
    }
    if draws.params[0].grid != yields.grid {
        return Err(Error::Dimension("draws were fitted on a different maturity grid".into()));
    }
    let lm = loading_matrix(draws.mean_lambda(), &yields.grid)?.values;
    let mu = draws.mean_mu();
    let mut fitted = DMatrix::zeros(yields.len(), yields.grid.len());
    for t in 0..yields.len() {
        let f = factors.states[t].rows(0, 3) + mu[labels.get(t)].rows(0, 3);
        fitted.row_mut(t).copy_from(&(&lm * f).transpose());
    }
    Ok(fitted)
}

/// Per-tenor and bucket residual statistics in basis points.
pub fn residual_report(yields: &YieldPanel, draws: &PosteriorDraws, labels: &RegimeLabels) -> Result<ResidualReport> {
    let fitted = fitted_yields(yields, draws, labels)?;
    let resid = (&yields.values - fitted) * 100.0;
    residual_stats(&resid, yields.grid.maturities())
}

// ----------------------------------------------------------- fitted curves

#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    /// 1-based regime, or `None` for the full sample.
    pub regime: Option<usize>,
    pub n_periods: usize,
    pub actual: Vec<f64>,
    pub fitted: Vec<f64>,
}

/// Average actual and fitted curve in each regime plus the full sample.
pub fn fitted_curves(yields: &YieldPanel, draws: &PosteriorDraws, labels: &RegimeLabels) -> Result<Vec<CurveRow>> {
    let fitted = fitted_yields(yields, draws, labels)?;
    let n = yields.grid.len();
    let average = |rows: &[usize], m: &DMatrix<f64>| -> Vec<f64> {
        (0..n)
            .map(|j| rows.iter().map(|&t| m[(t, j)]).sum::<f64>() / rows.len() as f64)
            .collect()
    };
    let mut out = Vec::new();
    for g in 0..labels.n_regimes() {
        let rows: Vec<usize> = (0..labels.len()).filter(|&t| labels.get(t) == g).collect();
        if rows.is_empty() {
            continue;
        }
        out.push(CurveRow {
            regime: Some(g + 1),
            n_periods: rows.len(),
            actual: average(&rows, &yields.values),
            fitted: average(&rows, &fitted),
        });
    }
    let all: Vec<usize> = (0..labels.len()).collect();
    out.push(CurveRow {
        regime: None,
        n_periods: all.len(),
        actual: average(&all, &yields.values),
        fitted: average(&all, &fitted),
    });
    Ok(out)
}

#[derive(Serialize)]
struct CurveCsvRow {
    regime: String,
    maturity: f64,
    actual: f64,
    fitted: f64,
}

pub fn write_curves_csv(curves: &[CurveRow], maturities: &[f64], path: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for c in curves {
        for (j, m) in maturities.iter().enumerate() {
            rows.push(CurveCsvRow {
                regime: c.regime.map_or("all".to_string(), |g| g.to_string()),
                maturity: *m,
                actual: c.actual[j],
                fitted: c.fitted[j],
            });
        }
    }
    write_rows(&rows, path)
}

// ------------------------------------------------------------------- Welch

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// Both samples have zero variance.
    pub degenerate: bool,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Welch two-sample t-test for equally sized samples:
/// `t = (X̄₁ − X̄₂)/√((s₁² + s₂²)/n)`, `df = (n−1)(s₁² + s₂²)²/(s₁⁴ + s₂⁴)`.
pub fn welch_t_test(x1: &[f64], x2: &[f64]) -> Result<WelchResult> {
    if x1.len() != x2.len() {
        return Err(Error::Dimension(format!("sample sizes differ: {} and {}", x1.len(), x2.len())));
    }
    let n = x1.len();
    if n < 2 {
        return Err(Error::Domain("need at least two draws per sample".into()));
    }
    let (m1, v1) = mean_var(x1);
    let (m2, v2) = mean_var(x2);
    let nf = n as f64;
    let pooled = v1 + v2;
    if pooled == 0.0 {
        let diff = m1 - m2;
        let (t, p) = if diff == 0.0 { (0.0, 1.0) } else { (diff.signum() * f64::INFINITY, 0.0) };
        return Ok(WelchResult {
            t,
            df: 2.0 * (nf - 1.0),
            p,
            degenerate: true,
        });
    }
    let t = (m1 - m2) / (pooled / nf).sqrt();
    let df = (nf - 1.0) * pooled * pooled / (v1 * v1 + v2 * v2);
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numerical { period: 0, msg: e.to_string() })?;
    let p = (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0);
    Ok(WelchResult { t, df, p, degenerate: false })
}

/// Scalar parameter location used by tests and density exports.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParamAddress {
    Lambda,
    A(usize, usize),
    H(usize, usize),
    Mu(usize),
    Q(usize),
}

impl ParamAddress {
    pub fn is_regime_specific(&self) -> bool {
        matches!(self, ParamAddress::A(..) | ParamAddress::H(..) | ParamAddress::Mu(..))
    }

    /// Value in a draw; indices are 1-based.
    pub fn get(&self, p: &crate::state_space::ModelParams, regime: usize) -> Option<f64> {
        let d = p.state_dim();
        let ok = |i: usize| (1..=d).contains(&i);
        match *self {
            ParamAddress::Lambda => Some(p.lambda),
            ParamAddress::A(i, j) if ok(i) && ok(j) => p.a.get(regime).map(|m| m[(i - 1, j - 1)]),
            ParamAddress::H(i, j) if ok(i) && ok(j) => p.h.get(regime).map(|m| m[(i - 1, j - 1)]),
            ParamAddress::Mu(i) if ok(i) => p.mu.get(regime).map(|m| m[i - 1]),
            ParamAddress::Q(i) if (1..=p.obs_dim()).contains(&i) => Some(p.q_diag[i - 1]),
            _ => None,
        }
    }
}

impl std::fmt::Display for ParamAddress {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamAddress::Lambda => write!(f, "lambda"),
            ParamAddress::A(i, j) => write!(f, "A({i},{j})"),
            ParamAddress::H(i, j) => write!(f, "H({i},{j})"),
            ParamAddress::Mu(i) => write!(f, "mu({i})"),
            ParamAddress::Q(i) => write!(f, "Q({i})"),
        }
    }
}

impl FromStr for ParamAddress {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("unknown parameter address `{s}`"));
        let s = s.trim();
        if s == "lambda" {
            return Ok(ParamAddress::Lambda);
        }
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let idx: Vec<usize> = s[open + 1..s.len() - 1]
            .split(',')
            .map(|v| v.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match (&s[..open], idx.as_slice()) {
            ("A", [i, j]) => Ok(ParamAddress::A(*i, *j)),
            ("H", [i, j]) => Ok(ParamAddress::H(*i, *j)),
            ("mu", [i]) => Ok(ParamAddress::Mu(*i)),
            ("Q", [i]) => Ok(ParamAddress::Q(*i)),
            _ => Err(bad()),
        }
    }
}

fn address_draws(draws: &PosteriorDraws, addr: &ParamAddress, regime: usize) -> Result<Vec<f64>> {
    draws
        .params
        .iter()
        .map(|p| p.get_checked(addr, regime))
        .collect()
}

impl crate::state_space::ModelParams {
    fn get_checked(&self, addr: &ParamAddress, regime: usize) -> Result<f64> {
        addr.get(self, regime)
            .ok_or_else(|| Error::Invalid(format!("parameter {addr} does not exist for regime {}", regime + 1)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TTestRow {
    pub parameter: String,
    pub regime_a: usize,
    pub regime_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Welch tests of every regime pair for each regime-specific address.
pub fn regime_t_tests(draws: &PosteriorDraws, addresses: &[ParamAddress]) -> Result<Vec<TTestRow>> {
    let g_count = draws.params.first().ok_or_else(|| Error::Invalid("no posterior draws".into()))?.n_regimes();
    let mut rows = Vec::new();
    for addr in addresses.iter().filter(|a| a.is_regime_specific()) {
        let samples = (0..g_count).map(|g| address_draws(draws, addr, g)).collect::<Result<Vec<_>>>()?;
        for a in 0..g_count {
            for b in a + 1..g_count {
                let w = welch_t_test(&samples[a], &samples[b])?;
                let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
                rows.push(TTestRow {
                    parameter: addr.to_string(),
                    regime_a: a + 1,
                    regime_b: b + 1,
                    mean_a: mean(&samples[a]),
                    mean_b: mean(&samples[b]),
                    t: w.t,
                    df: w.df,
                    p: w.p,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_t_tests_csv(rows: &[TTestRow], path: &Path) -> Result<()> {
    write_rows(rows, path)
}

// -------------------------------------------------------------------- GIRF

/// `GI(h) = A^h H e_j / √H_jj` for `h = 0..=h_max`.
pub fn girf(a: &DMatrix<f64>, h: &DMatrix<f64>, shock: usize, h_max: usize) -> Result<Vec<DVector<f64>>> {
    let d = a.nrows();
    if !a.is_square() || h.shape() != (d, d) {
        return Err(Error::Dimension("A and H must be square and of equal size".into()));
    }
    if shock >= d {
        return Err(Error::Dimension(format!("shock index {shock} outside 0..{d}")));
    }
    let scale = h[(shock, shock)];
    if !(scale > 0.0) {
        return Err(Error::Domain("shocked variable has non-positive variance".into()));
    }
    let mut cur = h.column(shock) / scale.sqrt();
    let mut out = Vec::with_capacity(h_max + 1);
    out.push(cur.clone());
    for _ in 0..h_max {
        cur = a * cur;
        out.push(cur.clone());
    }
    Ok(out)
}

/// Type-7 sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrfResult {
    pub regime: usize,
    pub shock: usize,
    /// `(h_max+1)×d`, posterior median.
    pub point: DMatrix<f64>,
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
}

/// Pointwise posterior quantile bands of the GIRF for one regime and shock.
pub fn girf_bands(
    draws: &PosteriorDraws,
    regime: usize,
    shock: usize,
    h_max: usize,
    quantiles: (f64, f64),
) -> Result<IrfResult> {
    if draws.is_empty() {
        return Err(Error::Invalid("no posterior draws".into()));
    }
    if regime >= draws.params[0].n_regimes() {
        return Err(Error::Dimension(format!("regime {} not in draws", regime + 1)));
    }
    let paths = draws
        .params
        .par_iter()
        .map(|p| girf(&p.a[regime], &p.h[regime], shock, h_max))
        .collect::<Result<Vec<_>>>()?;
    let d = paths[0][0].len();
    let mut point = DMatrix::zeros(h_max + 1, d);
    let mut lower = point.clone();
    let mut upper = point.clone();
    let mut cell = Vec::with_capacity(paths.len());
    for h in 0..=h_max {
        for v in 0..d {
            cell.clear();
            cell.extend(paths.iter().map(|p| p[h][v]));
            cell.sort_by(|a, b| a.total_cmp(b));
            point[(h, v)] = quantile_sorted(&cell, 0.5);
            lower[(h, v)] = quantile_sorted(&cell, quantiles.0);
            upper[(h, v)] = quantile_sorted(&cell, quantiles.1);
        }
    }
    Ok(IrfResult {
        regime,
        shock,
        point,
        lower,
        upper,
    })
}

#[derive(Serialize)]
struct IrfCsvRow {
    regime: usize,
    shock: String,
    variable: String,
    horizon: usize,
    lo: f64,
    point: f64,
    hi: f64,
}

pub fn write_irf_csv(results: &[IrfResult], names: &[String], path: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for r in results {
        for h in 0..r.point.nrows() {
            for v in 0..r.point.ncols() {
                rows.push(IrfCsvRow {
                    regime: r.regime + 1,
                    shock: names[r.shock].clone(),
                    variable: names[v].clone(),
                    horizon: h,
                    lo: r.lower[(h, v)],
                    point: r.point[(h, v)],
                    hi: r.upper[(h, v)],
                });
            }
        }
    }
    write_rows(&rows, path)
}

// --------------------------------------------------------------- densities

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    /// 1-based regime, 0 for global parameters.
    pub regime: usize,
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn area(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }
}

/// Equal-width histogram normalized to unit area. Constant samples occupy a
/// single bin of width one centred on the value.
pub fn histogram(values: &[f64], bins: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if values.is_empty() || bins == 0 {
        return Err(Error::Invalid("histogram needs values and at least one bin".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi, bins) = if hi > lo { (lo, hi, bins) } else { (lo - 0.5, lo + 0.5, 1) };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| if k == bins { hi } else { lo + k as f64 * width }).collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = values.len() as f64;
    let density = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (n * (w[1] - w[0])))
        .collect();
    Ok((edges, density))
}

/// Normalized histograms of one parameter, per regime when regime-specific.
pub fn posterior_density_export(draws: &PosteriorDraws, address: &ParamAddress, bins: usize) -> Result<Vec<Histogram>> {
    let first = draws.params.first().ok_or_else(|| Error::Invalid("no posterior draws".into()))?;
    let regimes: Vec<usize> = if address.is_regime_specific() { (0..first.n_regimes()).collect() } else { vec![0] };
    regimes
        .into_iter()
        .map(|g| {
            let values = address_draws(draws, address, g)?;
            let (edges, density) = histogram(&values, bins)?;
            Ok(Histogram {
                regime: if address.is_regime_specific() { g + 1 } else { 0 },
                edges,
                density,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct DensityCsvRow {
    parameter: String,
    regime: usize,
    bin_lo: f64,
    bin_hi: f64,
    density: f64,
}

pub fn write_density_csv(entries: &[(ParamAddress, Vec<Histogram>)], path: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for (addr, hists) in entries {
        for h in hists {
            for (k, d) in h.density.iter().enumerate() {
                rows.push(DensityCsvRow {
                    parameter: addr.to_string(),
                    regime: h.regime,
                    bin_lo: h.edges[k],
                    bin_hi: h.edges[k + 1],
                    density: *d,
                });
            }
        }
    }
    write_rows(&rows, path)
}

// ---------------------------------------------------------------------- KS

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov
/// distribution (Stephens' small-sample correction).
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let mut x = samples.to_vec();
    x.sort_by(|a, b| a.total_cmp(b));
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in x.iter().enumerate() {
        let f = cdf(*v);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_survival(lambda),
    }
}

fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

// --------------------------------------------------------------------- SVG

/// Minimal SVG line chart; each series is drawn as one polyline.
pub fn svg_line_plot(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 48.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
    let pts = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        if x.is_finite() && y.is_finite() {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" font-size="14" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="gray"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(out, r#"<text x="{PAD}" y="{}" font-size="10">{x0:.3}</text>"#, H - PAD + 14.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{x1:.3}</text>"#, W - PAD, H - PAD + 14.0);
    let _ = writeln!(out, r#"<text x="4" y="{}" font-size="10">{y0:.3}</text>"#, H - PAD);
    let _ = writeln!(out, r#"<text x="4" y="{}" font-size="10">{y1:.3}</text>"#, PAD + 4.0);
    for (k, (name, points)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" fill="{color}">{}</text>"#,
            W - PAD + 4.0,
            PAD + 12.0 * (k as f64 + 1.0),
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
