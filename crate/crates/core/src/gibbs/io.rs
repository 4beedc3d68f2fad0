//! Long-format CSV storage of posterior draws.
//!
//! Each block goes to its own file with columns `draw,regime,row,col,value`
//! (1-based indices; regime 0 marks global parameters). Factor paths use
//! `row` for the period and `regime` for that period's label.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ns_basis::MaturityGrid;
use crate::regime_tree::RegimeLabels;
use crate::state_space::{FactorPath, InitialState, ModelParams};

use super::{ChainConfig, PosteriorDraws, PriorConfig};

pub const BLOCK_FILES: [&str; 6] = ["lambda.csv", "A.csv", "H.csv", "mu.csv", "Q.csv", "gamma.csv"];
const FACTORS_FILE: &str = "factors.csv";
const MANIFEST_FILE: &str = "draws.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawsManifest {
    pub seed: u64,
    pub n_draws: usize,
    pub n_regimes: usize,
    pub n_macro: usize,
    pub maturities: Vec<f64>,
    pub lambda_acceptance: f64,
    pub has_factors: bool,
    pub init_mean: Vec<f64>,
    pub init_cov: Vec<Vec<f64>>,
    pub chain: ChainConfig,
    pub prior: PriorConfig,
}

struct LongWriter {
    inner: csv::Writer<fs::File>,
    path: std::path::PathBuf,
}

impl LongWriter {
    fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
        inner
            .write_record(["draw", "regime", "row", "col", "value"])
            .map_err(|e| Error::parse(path, e.to_string()))?;
        Ok(Self {
            inner,
            path: path.to_path_buf(),
        })
    }

    fn row(&mut self, draw: usize, regime: usize, row: usize, col: usize, value: impl ToString) -> Result<()> {
        self.inner
            .write_record([
                draw.to_string(),
                regime.to_string(),
                row.to_string(),
                col.to_string(),
                value.to_string(),
            ])
            .map_err(|e| Error::parse(&self.path, e.to_string()))
    }

    fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_draws(
    draws: &PosteriorDraws,
    labels: &RegimeLabels,
    dir: &Path,
    chain: &ChainConfig,
    prior: &PriorConfig,
) -> Result<()> {
    if draws.is_empty() {
        return Err(Error::Invalid("no draws to write".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w: Vec<LongWriter> = BLOCK_FILES
        .iter()
        .map(|f| LongWriter::create(&dir.join(f)))
        .collect::<Result<_>>()?;
    for (s, p) in draws.params.iter().enumerate() {
        let s = s + 1;
        w[0].row(s, 0, 1, 1, p.lambda)?;
        for g in 0..p.n_regimes() {
            let d = p.state_dim();
            for i in 0..d {
                for j in 0..d {
                    w[1].row(s, g + 1, i + 1, j + 1, p.a[g][(i, j)])?;
                    w[2].row(s, g + 1, i + 1, j + 1, p.h[g][(i, j)])?;
                    w[5].row(s, g + 1, i + 1, j + 1, u8::from(p.gamma[g][(i, j)]))?;
                }
                w[3].row(s, g + 1, i + 1, 1, p.mu[g][i])?;
            }
        }
        for (i, q) in p.q_diag.iter().enumerate() {
            w[4].row(s, 0, i + 1, i + 1, q)?;
        }
    }
    for writer in w {
        writer.finish()?;
    }
    if let Some(paths) = &draws.factors {
        let mut fw = LongWriter::create(&dir.join(FACTORS_FILE))?;
        for (s, path) in paths.iter().enumerate() {
            for (t, state) in path.states.iter().enumerate() {
                for (j, v) in state.iter().enumerate() {
                    fw.row(s + 1, labels.get(t) + 1, t + 1, j + 1, v)?;
                }
            }
        }
        fw.finish()?;
    }
    let first = &draws.params[0];
    let manifest = DrawsManifest {
        seed: chain.seed,
        n_draws: draws.len(),
        n_regimes: first.n_regimes(),
        n_macro: first.n_macro,
        maturities: first.grid.maturities().to_vec(),
        lambda_acceptance: draws.lambda_acceptance,
        has_factors: draws.factors.is_some(),
        init_mean: draws.init.mean.iter().copied().collect(),
        init_cov: draws.init.cov.row_iter().map(|r| r.iter().copied().collect()).collect(),
        chain: chain.clone(),
        prior: prior.clone(),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

type LongRow = (usize, usize, usize, usize, f64);

fn read_long(path: &Path) -> Result<Vec<LongRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string())),
        _ => Error::parse(path, e.to_string()),
    })?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
        let field = |k: usize| rec.get(k).ok_or_else(|| Error::parse(path, format!("line {}: missing field", i + 2)));
        let int = |k: usize| -> Result<usize> {
            field(k)?
                .parse()
                .map_err(|_| Error::parse(path, format!("line {}: bad index", i + 2)))
        };
        let value: f64 = field(4)?
            .parse()
            .map_err(|_| Error::parse(path, format!("line {}: bad value", i + 2)))?;
        rows.push((int(0)?, int(1)?, int(2)?, int(3)?, value));
    }
    Ok(rows)
}

fn check_index(path: &Path, ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::parse(path, "index outside the manifest dimensions"))
    }
}

/// Reads draws written by [`write_draws`], returning them with the manifest
/// and the period labels recorded with the factor paths (if any).
pub fn read_draws(dir: &Path) -> Result<(PosteriorDraws, DrawsManifest, Option<RegimeLabels>)> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let m: DrawsManifest = serde_json::from_str(&text).map_err(|e| Error::parse(&mpath, e.to_string()))?;
    if m.n_draws == 0 {
        return Err(Error::parse(&mpath, "manifest lists no draws"));
    }
    let d = 3 + m.n_macro;
    let n_obs = m.maturities.len() + m.n_macro;
    let g_count = m.n_regimes;
    let grid = MaturityGrid::new(m.maturities.clone())?;
    let blank = ModelParams {
        lambda: 0.0,
        grid,
        n_macro: m.n_macro,
        a: vec![DMatrix::zeros(d, d); g_count],
        h: vec![DMatrix::zeros(d, d); g_count],
        mu: vec![DVector::zeros(d); g_count],
        q_diag: DVector::zeros(n_obs),
        gamma: vec![DMatrix::from_element(d, d, false); g_count],
    };
    let mut params = vec![blank; m.n_draws];
    for (k, file) in BLOCK_FILES.iter().enumerate() {
        let path = dir.join(file);
        for (s, g, i, j, v) in read_long(&path)? {
            check_index(&path, (1..=m.n_draws).contains(&s))?;
            let p = &mut params[s - 1];
            match k {
                0 => p.lambda = v,
                4 => {
                    check_index(&path, (1..=n_obs).contains(&i))?;
                    p.q_diag[i - 1] = v;
                }
                _ => {
                    check_index(&path, (1..=g_count).contains(&g) && (1..=d).contains(&i) && (1..=d).contains(&j))?;
                    let (g, i, j) = (g - 1, i - 1, j - 1);
                    match k {
                        1 => p.a[g][(i, j)] = v,
                        2 => p.h[g][(i, j)] = v,
                        3 => p.mu[g][i] = v,
                        _ => p.gamma[g][(i, j)] = v != 0.0,
                    }
                }
            }
        }
    }
    let mut labels = None;
    let factors = if m.has_factors {
        let path = dir.join(FACTORS_FILE);
        let rows = read_long(&path)?;
        let t_len = rows.iter().map(|r| r.2).max().unwrap_or(0);
        let mut paths = vec![FactorPath { states: vec![DVector::zeros(d); t_len] }; m.n_draws];
        let mut z = vec![0usize; t_len];
        for (s, g, t, j, v) in rows {
            check_index(
                &path,
                (1..=m.n_draws).contains(&s) && (1..=g_count).contains(&g) && (1..=d).contains(&j) && t >= 1,
            )?;
            paths[s - 1].states[t - 1][j - 1] = v;
            z[t - 1] = g - 1;
        }
        labels = Some(RegimeLabels::new(z, g_count)?);
        Some(paths)
    } else {
        None
    };
    let init = InitialState::new(
        DVector::from_vec(m.init_mean.clone()),
        DMatrix::from_fn(d, d, |i, j| m.init_cov.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0)),
    );
    let draws = PosteriorDraws {
        params,
        factors,
        lambda_acceptance: m.lambda_acceptance,
        init,
    };
    Ok((draws, m, labels))
}
