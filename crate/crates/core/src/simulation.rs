//! Synthetic regime-switching panels and parameter-recovery scoring.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{posterior_mean, PosteriorDraws};
use crate::linalg::sample_mvn;
use crate::ns_basis::MaturityGrid;
use crate::panel_io::{align_panels, MacroPanel, MacroTable, YearMonth, YieldPanel, SPLIT_CANDIDATES};
use crate::regime_tree::{assign_labels, RegimeLabels, RegimeTree, TreeNode};
use crate::state_space::{FactorPath, ModelParams, Observations};

const FIRST_MONTH: (i32, u32) = (1970, 1);

/// Parameters, regime rule and sample size of a simulation experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationDesign {
    pub truth: ModelParams,
    pub tree: RegimeTree,
    pub t_len: usize,
    #[serde(default = "default_replications")]
    pub n_replications: usize,
    /// AR(1) coefficient of the latent macro drivers.
    #[serde(default = "default_driver_ar")]
    pub driver_ar: f64,
    /// Rolling standardization window; the drivers run this much longer than
    /// the yield sample.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Names of the simulated split candidates.
    #[serde(default = "default_drivers")]
    pub drivers: Vec<String>,
}

fn default_replications() -> usize {
    1
}

fn default_driver_ar() -> f64 {
    0.97
}

fn default_window() -> usize {
    crate::panel_io::DEFAULT_WINDOW
}

fn default_drivers() -> Vec<String> {
    vec!["INFL".into(), "UNRATE".into()]
}

fn split(var: &str, threshold: f64, yes: TreeNode, no: TreeNode) -> TreeNode {
    TreeNode::Split {
        var: var.into(),
        threshold,
        yes: Box::new(yes),
        no: Box::new(no),
    }
}

fn leaf(regime: usize) -> TreeNode {
    TreeNode::Leaf { regime }
}

fn mat3(rows: [[f64; 3]; 3]) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |i, j| rows[i][j])
}

/// Three-regime calibration: INFL < 0.4 is regime 1; otherwise UNRATE < 0.2
/// is regime 2 and the rest regime 3.
pub fn default_design() -> SimulationDesign {
    let truth = ModelParams {
        lambda: crate::ns_basis::REFERENCE_LAMBDA,
        grid: MaturityGrid::default(),
        n_macro: 0,
        a: vec![
            mat3([[0.99, 0.0, 0.05], [0.0, 0.98, 0.10], [0.0, 0.0, 0.92]]),
            mat3([[0.98, -0.04, 0.0], [0.0, 0.95, 0.0], [0.0, -0.20, 0.90]]),
            mat3([[0.97, -0.03, 0.08], [0.0, 0.92, 0.0], [0.0, 0.0, 0.85]]),
        ],
        h: vec![
            mat3([[0.07, -0.02, -0.03], [-0.02, 0.05, -0.07], [-0.03, -0.07, 0.50]]),
            mat3([[0.10, -0.08, -0.05], [-0.08, 0.12, 0.04], [-0.05, 0.04, 0.90]]),
            mat3([[0.18, -0.13, -0.20], [-0.13, 0.25, 0.20], [-0.20, 0.20, 1.18]]),
        ],
        mu: vec![
            DVector::from_vec(vec![6.5, -1.8, -0.8]),
            DVector::from_vec(vec![6.0, -1.5, -0.5]),
            DVector::from_vec(vec![5.5, -1.2, -0.2]),
        ],
        q_diag: DVector::from_fn(13, |i, _| if i == 0 || i == 8 { 0.07 } else { 0.01 }),
        gamma: vec![DMatrix::from_element(3, 3, true); 3],
    };
    let tree = RegimeTree::from_root(split(
        "INFL",
        0.4,
        leaf(1),
        split("UNRATE", 0.2, leaf(2), leaf(3)),
    ))
    .expect("static tree is valid");
    SimulationDesign {
        truth,
        tree,
        t_len: 264,
        n_replications: 1,
        driver_ar: default_driver_ar(),
        window: default_window(),
        drivers: default_drivers(),
    }
}

/// Two regimes separated by a single break at `UNRATE < 0.6`, with widely
/// separated factor means; all ten candidate series are simulated.
pub fn planted_split_design() -> SimulationDesign {
    let base = default_design();
    let mut truth = base.truth.tie_to(&[0, 2]);
    truth.mu[1] = DVector::from_vec(vec![4.0, -0.2, 0.6]);
    let tree = RegimeTree::from_root(split("UNRATE", 0.6, leaf(1), leaf(2))).expect("static tree is valid");
    SimulationDesign {
        truth,
        tree,
        drivers: SPLIT_CANDIDATES.iter().map(|s| s.to_string()).collect(),
        ..base
    }
}

impl ModelParams {
    /// Parameters keeping only the listed regimes, in that order.
    pub fn tie_to(&self, regimes: &[usize]) -> ModelParams {
        ModelParams {
            a: regimes.iter().map(|&g| self.a[g].clone()).collect(),
            h: regimes.iter().map(|&g| self.h[g].clone()).collect(),
            mu: regimes.iter().map(|&g| self.mu[g].clone()).collect(),
            gamma: regimes.iter().map(|&g| self.gamma[g].clone()).collect(),
            ..self.clone()
        }
    }
}

impl SimulationDesign {
    pub fn validate(&self) -> Result<()> {
        self.truth.validate()?;
        self.tree.validate()?;
        if self.t_len == 0 {
            return Err(Error::Domain("simulation length must be positive".into()));
        }
        if self.truth.n_macro != 0 {
            return Err(Error::Domain("simulation designs are yields-only".into()));
        }
        if self.tree.n_regimes() != self.truth.n_regimes() {
            return Err(Error::Dimension(format!(
                "design tree has {} leaves, parameters {} regimes",
                self.tree.n_regimes(),
                self.truth.n_regimes()
            )));
        }
        for v in self.tree.variables() {
            if !self.drivers.contains(&v) {
                return Err(Error::UnknownVariable(v));
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let design: Self = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        design.validate().map_err(|e| Error::parse(path, e.to_string()))?;
        Ok(design)
    }
}

/// One simulated data set.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedPanel {
    pub yields: YieldPanel,
    /// Raw driver paths including the standardization warm-up.
    pub macro_table: MacroTable,
    pub macro_panel: MacroPanel,
    pub labels: RegimeLabels,
    pub factors: FactorPath,
}

/// Demeaned factor path and observations given labels and the pre-sample state.
pub fn simulate_observations<R: Rng + ?Sized>(
    params: &ModelParams,
    labels: &RegimeLabels,
    f0: &DVector<f64>,
    rng: &mut R,
) -> Result<(FactorPath, Observations)> {
    let lambda = params.measurement()?;
    let q_sd = params.q_diag.map(|q| q.max(0.0).sqrt());
    let zero = DVector::zeros(params.state_dim());
    let mut prev = f0.clone();
    let mut states = Vec::with_capacity(labels.len());
    let mut rows = Vec::with_capacity(labels.len());
    for t in 0..labels.len() {
        let g = labels.get(t);
        let a = &params.a[labels.get(t.saturating_sub(1))];
        let eta = sample_mvn(&zero, &params.h[g], rng)?;
        let f = a * &prev + eta;
        let eps = DVector::from_fn(q_sd.len(), |i, _| {
            let z: f64 = StandardNormal.sample(rng);
            q_sd[i] * z
        });
        rows.push(&lambda * (&f + &params.mu[g]) + eps);
        states.push(f.clone());
        prev = f;
    }
    Ok((FactorPath { states }, Observations::new(rows)?))
}

/// Simulates driver paths, labels them through the design tree after
/// rolling standardization, and generates yields from the true parameters.
pub fn simulate_panel<R: Rng + ?Sized>(design: &SimulationDesign, rng: &mut R) -> Result<SimulatedPanel> {
    design.validate()?;
    let total = design.t_len + design.window;
    let phi = design.driver_ar;
    let stationary_sd = if phi.abs() < 1.0 { (1.0 - phi * phi).sqrt().recip() } else { 1.0 };
    let mut columns = BTreeMap::new();
    for name in &design.drivers {
        let mut x: f64 = StandardNormal.sample(rng);
        x *= stationary_sd;
        let mut path = Vec::with_capacity(total);
        for _ in 0..total {
            let e: f64 = StandardNormal.sample(rng);
            x = phi * x + e;
            path.push(x);
        }
        columns.insert(name.clone(), path);
    }
    let first = YearMonth::new(FIRST_MONTH.0, FIRST_MONTH.1)?;
    let dates: Vec<YearMonth> = (0..total).map(|i| first.add_months(i)).collect();
    let table = MacroTable { dates: dates.clone(), columns };

    let grid = design.truth.grid.clone();
    let placeholder = YieldPanel {
        dates: dates[design.window..].to_vec(),
        values: DMatrix::zeros(design.t_len, grid.len()),
        grid: grid.clone(),
    };
    let (_, macro_panel) = align_panels(&placeholder, &table, &design.drivers, &[], design.window)?;
    let labels = assign_labels(&design.tree, &macro_panel)?;

    let d = design.truth.state_dim();
    let f0 = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
    let (factors, obs) = simulate_observations(&design.truth, &labels, &f0, rng)?;
    let yields = YieldPanel {
        dates: placeholder.dates,
        values: obs.to_matrix(),
        grid,
    };
    Ok(SimulatedPanel {
        yields,
        macro_table: table,
        macro_panel,
        labels,
        factors,
    })
}

/// One row of the recovery table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoveryRow {
    pub block: String,
    /// 1-based regime; 0 for global parameters.
    pub regime: usize,
    pub row: usize,
    pub col: usize,
    pub truth: f64,
    /// Mean over replications of the posterior means.
    pub mean: f64,
    pub rmse: f64,
    pub mae: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryReport {
    pub rows: Vec<RecoveryRow>,
    pub n_replications: usize,
}

impl RecoveryReport {
    pub fn find(&self, block: &str, regime: usize, row: usize, col: usize) -> Option<&RecoveryRow> {
        self.rows
            .iter()
            .find(|r| r.block == block && r.regime == regime && r.row == row && r.col == col)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::parse(path, e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn score(block: &str, regime: usize, row: usize, col: usize, truth: f64, estimates: &[f64]) -> RecoveryRow {
    let n = estimates.len() as f64;
    RecoveryRow {
        block: block.into(),
        regime,
        row,
        col,
        truth,
        mean: estimates.iter().sum::<f64>() / n,
        rmse: (estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / n).sqrt(),
        mae: estimates.iter().map(|e| (e - truth).abs()).sum::<f64>() / n,
    }
}

/// Mean, RMSE and MAE of the posterior means across replications for every
/// scalar parameter; the `gamma` block reports mean inclusion frequencies
/// (its `truth` is 1 for nonzero true coefficients).
pub fn recovery_metrics(truth: &ModelParams, replications: &[PosteriorDraws]) -> Result<RecoveryReport> {
    if replications.is_empty() {
        return Err(Error::Invalid("recovery needs at least one replication".into()));
    }
    let summaries = replications.iter().map(posterior_mean).collect::<Result<Vec<_>>>()?;
    for s in &summaries {
        if s.params.n_regimes() != truth.n_regimes() || s.params.state_dim() != truth.state_dim() {
            return Err(Error::Dimension("replication shape differs from the truth".into()));
        }
    }
    let mut rows = Vec::new();
    let collect = |f: &dyn Fn(&crate::gibbs::PosteriorSummary) -> f64| summaries.iter().map(f).collect::<Vec<f64>>();
    rows.push(score("lambda", 0, 1, 1, truth.lambda, &collect(&|s| s.params.lambda)));
    let d = truth.state_dim();
    for g in 0..truth.n_regimes() {
        for i in 0..d {
            for j in 0..d {
                rows.push(score("A", g + 1, i + 1, j + 1, truth.a[g][(i, j)], &collect(&|s| s.params.a[g][(i, j)])));
            }
        }
        for i in 0..d {
            for j in 0..d {
                rows.push(score("H", g + 1, i + 1, j + 1, truth.h[g][(i, j)], &collect(&|s| s.params.h[g][(i, j)])));
            }
        }
        for i in 0..d {
            rows.push(score("mu", g + 1, i + 1, 1, truth.mu[g][i], &collect(&|s| s.params.mu[g][i])));
        }
        for i in 0..d {
            for j in 0..d {
                let on = if truth.a[g][(i, j)] != 0.0 { 1.0 } else { 0.0 };
                rows.push(score("gamma", g + 1, i + 1, j + 1, on, &collect(&|s| s.gamma_freq[g][(i, j)])));
            }
        }
    }
    for i in 0..truth.q_diag.len() {
        rows.push(score("Q", 0, i + 1, i + 1, truth.q_diag[i], &collect(&|s| s.params.q_diag[i])));
    }
    Ok(RecoveryReport {
        rows,
        n_replications: replications.len(),
    })
}
