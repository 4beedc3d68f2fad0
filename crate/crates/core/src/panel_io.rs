//! Yield and macro panels: CSV ingestion, rolling-quantile standardization of
//! split candidates, and descriptive statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ns_basis::MaturityGrid;

/// Macro series used as candidate split variables.
pub const SPLIT_CANDIDATES: [&str; 10] = [
    "DTB3",
    "INDPRO",
    "CPI",
    "M2",
    "PAYEMS",
    "UNRATE",
    "OILPRICE",
    "TERM_SPREAD",
    "DEFAULT_SPREAD",
    "VIX",
];

/// Observed macro factors entering the yields-macro state vector.
pub const MODEL_FACTORS: [&str; 3] = ["CU", "FFR", "INFL"];

pub const DEFAULT_WINDOW: usize = 120;

/// Calendar month, printed and parsed as `YYYY-MM` (a trailing `-DD` is accepted
/// on input and ignored).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Domain(format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    pub fn succ(self) -> Self {
        if self.month == 12 {
            Self { year: self.year + 1, month: 1 }
        } else {
            Self { year: self.year, month: self.month + 1 }
        }
    }

    pub fn add_months(self, n: usize) -> Self {
        let total = self.year as i64 * 12 + (self.month as i64 - 1) + n as i64;
        Self {
            year: total.div_euclid(12) as i32,
            month: (total.rem_euclid(12) + 1) as u32,
        }
    }

    pub fn months_back(self, n: usize) -> Self {
        let total = self.year as i64 * 12 + (self.month as i64 - 1) - n as i64;
        Self {
            year: total.div_euclid(12) as i32,
            month: (total.rem_euclid(12) + 1) as u32,
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("invalid date `{s}`, expected YYYY-MM"));
        let mut parts = s.trim().split('-');
        let year: i32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let month: u32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if let Some(day) = parts.next() {
            let day: u32 = day.parse().map_err(|_| bad())?;
            if !(1..=31).contains(&day) {
                return Err(bad());
            }
        }
        if parts.next().is_some() {
            return Err(bad());
        }
        YearMonth::new(year, month).map_err(|_| bad())
    }
}

/// Balanced monthly panel of yields in percent.
#[derive(Clone, Debug, PartialEq)]
pub struct YieldPanel {
    pub dates: Vec<YearMonth>,
    /// T×N, one column per tenor of `grid`.
    pub values: DMatrix<f64>,
    pub grid: MaturityGrid,
}

impl YieldPanel {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Rows `start..` of the panel.
    pub fn tail_from(&self, start: usize) -> YieldPanel {
        let t = self.len();
        YieldPanel {
            dates: self.dates[start..].to_vec(),
            values: self.values.rows(start, t - start).clone_owned(),
            grid: self.grid.clone(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header = vec!["date".to_string()];
        header.extend(self.grid.maturities().iter().map(|m| format!("y{}", fmt_tenor(*m))));
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for (t, date) in self.dates.iter().enumerate() {
            let mut row = vec![date.to_string()];
            row.extend(self.values.row(t).iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Raw macro series keyed by column name, before standardization.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroTable {
    pub dates: Vec<YearMonth>,
    pub columns: BTreeMap<String, Vec<f64>>,
}

impl MacroTable {
    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn write_csv(&self, path: &Path, order: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header = vec!["date".to_string()];
        header.extend(order.iter().cloned());
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for (t, date) in self.dates.iter().enumerate() {
            let mut row = vec![date.to_string()];
            for name in order {
                row.push(self.column(name)?[t].to_string());
            }
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Model-ready macro information aligned with a yield panel.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroPanel {
    pub dates: Vec<YearMonth>,
    pub factor_names: Vec<String>,
    /// T×K raw macro factors (empty when K = 0).
    pub model_factors: DMatrix<f64>,
    pub candidate_names: Vec<String>,
    /// T×S rolling quantiles in [0, 1].
    pub split_candidates: DMatrix<f64>,
    pub warmup_len: usize,
}

impl MacroPanel {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn candidate_index(&self, name: &str) -> Result<usize> {
        self.candidate_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Standardized value of `name` at every period.
    pub fn candidate(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.candidate_index(name)?;
        Ok(self.split_candidates.column(j).iter().copied().collect())
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::parse(path, e.to_string())
}

fn fmt_tenor(m: f64) -> String {
    if m.fract() == 0.0 {
        format!("{}", m as i64)
    } else {
        m.to_string()
    }
}

fn parse_value(path: &Path, row: usize, col: &str, raw: &str) -> Result<f64> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(Error::parse(path, format!("missing value at row {row}, column {col}")));
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::parse(path, format!("invalid number `{raw}` at row {row}, column {col}")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, format!("non-finite value at row {row}, column {col}")));
    }
    Ok(v)
}

fn check_monthly(path: &Path, dates: &[YearMonth]) -> Result<()> {
    for (i, w) in dates.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::parse(
                path,
                format!("dates not strictly increasing at row {} ({} after {})", i + 2, w[1], w[0]),
            ));
        }
        if w[1] != w[0].succ() {
            return Err(Error::parse(
                path,
                format!("gap in monthly dates at row {} ({} after {})", i + 2, w[1], w[0]),
            ));
        }
    }
    Ok(())
}

struct RawCsv {
    header: Vec<String>,
    dates: Vec<YearMonth>,
    rows: Vec<csv::StringRecord>,
}

fn read_raw_csv(path: &Path) -> Result<RawCsv> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Err(Error::parse(path, "file is empty"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    if header.first().map(String::as_str) != Some("date") {
        return Err(Error::parse(path, "first column must be `date`"));
    }
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let date: YearMonth = rec[0]
            .parse()
            .map_err(|e: Error| Error::parse(path, format!("row {}: {e}", i + 1)))?;
        dates.push(date);
        rows.push(rec);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, "no data rows"));
    }
    check_monthly(path, &dates)?;
    Ok(RawCsv { header, dates, rows })
}

/// Reads a `date,y3,y6,...` panel, matching columns to `grid` by tenor.
pub fn load_yield_panel(path: &Path, grid: &MaturityGrid) -> Result<YieldPanel> {
    let raw = read_raw_csv(path)?;
    let mut tenor_cols = Vec::with_capacity(grid.len());
    for &m in grid.maturities() {
        let name = format!("y{}", fmt_tenor(m));
        let idx = raw
            .header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::parse(path, format!("missing tenor {}", fmt_tenor(m))))?;
        tenor_cols.push((idx, name));
    }
    let t = raw.dates.len();
    let mut values = DMatrix::zeros(t, grid.len());
    for (r, rec) in raw.rows.iter().enumerate() {
        for (j, (idx, name)) in tenor_cols.iter().enumerate() {
            let cell = rec.get(*idx).unwrap_or("");
            values[(r, j)] = parse_value(path, r + 1, name, cell)?;
        }
    }
    Ok(YieldPanel {
        dates: raw.dates,
        values,
        grid: grid.clone(),
    })
}

/// Reads a `date,<name>...` macro table. Every name in `required` must be
/// present; other columns are kept as-is.
pub fn load_macro_panel(path: &Path, required: &[String]) -> Result<MacroTable> {
    let raw = read_raw_csv(path)?;
    for name in required {
        if !raw.header.iter().any(|h| h == name) {
            return Err(Error::parse(path, format!("missing required column {name}")));
        }
    }
    let mut columns = BTreeMap::new();
    for (c, name) in raw.header.iter().enumerate().skip(1) {
        if columns.contains_key(name) {
            return Err(Error::parse(path, format!("duplicate column {name}")));
        }
        let mut col = Vec::with_capacity(raw.rows.len());
        for (r, rec) in raw.rows.iter().enumerate() {
            col.push(parse_value(path, r + 1, name, rec.get(c).unwrap_or(""))?);
        }
        columns.insert(name.clone(), col);
    }
    Ok(MacroTable {
        dates: raw.dates,
        columns,
    })
}

/// Rolling mid-rank quantiles; `values[i]` belongs to period `warmup + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct RollingQuantiles {
    pub warmup: usize,
    pub values: Vec<f64>,
}

/// Fraction of the trailing `window` observations (strictly before `t`) lying
/// below `x_t`, counting ties with weight one half.
pub fn rolling_quantile_standardize(series: &[f64], window: usize) -> Result<RollingQuantiles> {
    if window == 0 {
        return Err(Error::Domain("window must be positive".into()));
    }
    if series.len() <= window {
        return Err(Error::InsufficientHistory {
            window,
            len: series.len(),
        });
    }
    let values = (window..series.len())
        .map(|t| {
            let x = series[t];
            let (below, ties) = series[t - window..t].iter().fold((0usize, 0usize), |(b, e), &s| {
                if s < x {
                    (b + 1, e)
                } else if s == x {
                    (b, e + 1)
                } else {
                    (b, e)
                }
            });
            (below as f64 + 0.5 * ties as f64) / window as f64
        })
        .collect();
    Ok(RollingQuantiles { warmup: window, values })
}

/// Joins yields with the macro table on dates, standardizes the split
/// candidates over the macro table's own history, and drops every yield
/// month that still falls inside the standardization warm-up.
pub fn align_panels(
    yields: &YieldPanel,
    table: &MacroTable,
    candidates: &[String],
    factors: &[String],
    window: usize,
) -> Result<(YieldPanel, MacroPanel)> {
    let mut standardized = Vec::with_capacity(candidates.len());
    for name in candidates {
        standardized.push(rolling_quantile_standardize(table.column(name)?, window)?);
    }
    for name in factors {
        table.column(name)?;
    }
    let first_usable = table.dates[window];
    let start = yields
        .dates
        .iter()
        .position(|d| *d >= first_usable)
        .ok_or_else(|| Error::Invalid("no yield months remain after the standardization warm-up".into()))?;
    let trimmed = yields.tail_from(start);
    let t = trimmed.len();
    let offset = table
        .dates
        .iter()
        .position(|d| *d == trimmed.dates[0])
        .ok_or_else(|| Error::Invalid(format!("macro table has no row for {}", trimmed.dates[0])))?;
    if offset + t > table.dates.len() {
        return Err(Error::Invalid(format!(
            "macro table ends at {} but yields run to {}",
            table.dates.last().unwrap(),
            trimmed.dates[t - 1]
        )));
    }
    let mut split = DMatrix::zeros(t, candidates.len());
    for (j, q) in standardized.iter().enumerate() {
        for i in 0..t {
            split[(i, j)] = q.values[offset + i - q.warmup];
        }
    }
    let mut model_factors = DMatrix::zeros(t, factors.len());
    for (k, name) in factors.iter().enumerate() {
        let col = table.column(name)?;
        for i in 0..t {
            model_factors[(i, k)] = col[offset + i];
        }
    }
    let macro_panel = MacroPanel {
        dates: trimmed.dates.clone(),
        factor_names: factors.to_vec(),
        model_factors,
        candidate_names: candidates.to_vec(),
        split_candidates: split,
        warmup_len: window,
    };
    Ok((trimmed, macro_panel))
}

/// Per-tenor summary row of the descriptive statistics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveRow {
    pub maturity: f64,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// `(lag, autocorrelation)`; NaN for a constant column.
    pub autocorrelations: Vec<(usize, f64)>,
}

pub const TABLE_LAGS: [usize; 4] = [1, 6, 12, 30];

pub fn sample_mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Lag-`k` sample autocorrelation with the full-sample mean and variance in
/// the denominator.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let mean = sample_mean(x);
    let denom: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if denom == 0.0 {
        return f64::NAN;
    }
    let num: f64 = (lag..x.len()).map(|t| (x[t] - mean) * (x[t - lag] - mean)).sum();
    num / denom
}

pub fn descriptive_stats(panel: &YieldPanel, lags: &[usize]) -> Result<Vec<DescriptiveRow>> {
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    if panel.len() <= max_lag || panel.len() < 2 {
        return Err(Error::InsufficientHistory {
            window: max_lag,
            len: panel.len(),
        });
    }
    let rows = panel
        .grid
        .maturities()
        .iter()
        .enumerate()
        .map(|(j, &maturity)| {
            let col: Vec<f64> = panel.values.column(j).iter().copied().collect();
            let mean = sample_mean(&col);
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64;
            DescriptiveRow {
                maturity,
                mean,
                std: var.sqrt(),
                min: col.iter().cloned().fold(f64::INFINITY, f64::min),
                max: col.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                autocorrelations: lags.iter().map(|&k| (k, autocorrelation(&col, k))).collect(),
            }
        })
        .collect();
    Ok(rows)
}

pub fn write_descriptive_csv(rows: &[DescriptiveRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = ["Maturity", "Mean", "Std", "Min", "Max"].iter().map(|s| s.to_string()).collect();
    if let Some(first) = rows.first() {
        header.extend(first.autocorrelations.iter().map(|(k, _)| format!("rho({k})")));
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        let mut rec = vec![
            fmt_tenor(r.maturity),
            r.mean.to_string(),
            r.std.to_string(),
            r.min.to_string(),
            r.max.to_string(),
        ];
        rec.extend(r.autocorrelations.iter().map(|(_, v)| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
