//! Marginal-likelihood scoring of regime partitions and greedy tree growth.
//!
//! Each candidate split gets a fresh Gibbs chain under its labels; its score
//! is `log((1/n_s) Σ_s exp ℓ_s)` over the stored draws, with `ℓ_s` the full
//! log-likelihood at draw `s`.

use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{run_chain, ChainConfig, PosteriorDraws, PriorConfig};
use crate::linalg::log_sum_exp;
use crate::panel_io::{MacroPanel, YieldPanel};
use crate::regime_tree::{
    apply_split, assign_labels, enumerate_candidates, RegimeLabels, RegimeTree, SplitCandidate, DEFAULT_THRESHOLDS,
};
use crate::rng::derive_seed;
use crate::state_space::{predictive_loglik, smoother_conditioned_loglik, LikelihoodMode, ModelKind, Observations};

/// Gap (in log points) under which the top two candidates are flagged.
pub const NEAR_TIE: f64 = 0.5;

/// Aligned panels plus the model variant they feed.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub yields: YieldPanel,
    pub macro_panel: MacroPanel,
    pub kind: ModelKind,
}

impl Dataset {
    pub fn n_macro(&self) -> usize {
        match self.kind {
            ModelKind::YieldsOnly => 0,
            ModelKind::YieldsMacro => self.macro_panel.model_factors.ncols(),
        }
    }

    pub fn observations(&self) -> Result<Observations> {
        match self.kind {
            ModelKind::YieldsOnly => Observations::from_panels(&self.yields, None),
            ModelKind::YieldsMacro => Observations::from_panels(&self.yields, Some(&self.macro_panel)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub max_regimes: usize,
    pub min_months: usize,
    pub thresholds: Vec<f64>,
    /// Chain run for every candidate; its seed is replaced per candidate.
    pub chain: ChainConfig,
    pub root_seed: u64,
    pub likelihood: LikelihoodMode,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_regimes: 3,
            min_months: 24,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            chain: ChainConfig::candidate(),
            root_seed: 0,
            likelihood: LikelihoodMode::PredictionError,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_regimes == 0 || self.min_months == 0 {
            return Err(Error::Domain("max_regimes and min_months must be at least one".into()));
        }
        if self.thresholds.iter().any(|c| !(c.is_finite() && *c > 0.0 && *c < 1.0)) {
            return Err(Error::Domain("thresholds must lie strictly inside (0, 1)".into()));
        }
        self.chain.validate()
    }
}

/// Score of one candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitEvaluation {
    pub step: usize,
    pub candidate: SplitCandidate,
    pub leaf_path: String,
    pub leaf_depth: usize,
    pub seed: u64,
    /// `Err` holds the failure message of a chain that did not complete.
    pub log_marginal: std::result::Result<f64, String>,
    pub draws_used: usize,
    pub selected: bool,
}

/// Per-draw log-likelihoods averaged in the likelihood domain.
pub fn log_marginal_likelihood(
    draws: &PosteriorDraws,
    data: &Observations,
    labels: &RegimeLabels,
    mode: LikelihoodMode,
) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::Invalid("no posterior draws".into()));
    }
    let terms: Vec<f64> = match mode {
        LikelihoodMode::PredictionError => draws
            .params
            .par_iter()
            .map(|p| predictive_loglik(p, labels, data, &draws.init))
            .collect::<Result<_>>()?,
        LikelihoodMode::SmootherConditioned => {
            let paths = draws
                .factors
                .as_ref()
                .ok_or_else(|| Error::Invalid("smoother-conditioned scoring needs stored factor paths".into()))?;
            draws
                .params
                .par_iter()
                .zip(paths.par_iter())
                .map(|(p, f)| smoother_conditioned_loglik(p, labels, data, &draws.init, f))
                .collect::<Result<_>>()?
        }
    };
    log_marginal_from_terms(&terms)
}

/// `log((1/n) Σ exp ℓ_s)`.
pub fn log_marginal_from_terms(terms: &[f64]) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::Invalid("no log-likelihood terms".into()));
    }
    let lse = log_sum_exp(terms);
    if lse == f64::NEG_INFINITY || lse.is_nan() {
        return Err(Error::Numerical {
            period: 0,
            msg: "every draw has zero likelihood".into(),
        });
    }
    Ok(lse - (terms.len() as f64).ln())
}

fn chain_for(config: &SearchConfig, seed: u64) -> ChainConfig {
    ChainConfig {
        seed,
        store_factors: config.chain.store_factors || config.likelihood == LikelihoodMode::SmootherConditioned,
        ..config.chain.clone()
    }
}

/// Seed keyed on the candidate's identity, not its position in the list.
pub fn candidate_seed(root: u64, leaf_path: &str, c: &SplitCandidate) -> u64 {
    derive_seed(root, &["candidate", leaf_path, &c.variable, &c.threshold.to_string()])
}

/// Chain under the labels of `labels`, returning its log-marginal score.
pub fn score_labels(
    data: &Dataset,
    labels: &RegimeLabels,
    prior: &PriorConfig,
    chain: &ChainConfig,
    mode: LikelihoodMode,
) -> Result<(f64, usize)> {
    let obs = data.observations()?;
    let draws = run_chain(&obs, labels, &data.yields.grid, data.n_macro(), prior, chain)?;
    let lm = log_marginal_likelihood(&draws, &obs, labels, mode)?;
    Ok((lm, draws.len()))
}

pub fn evaluate_candidate(
    c: &SplitCandidate,
    tree: &RegimeTree,
    data: &Dataset,
    prior: &PriorConfig,
    config: &SearchConfig,
    step: usize,
) -> Result<SplitEvaluation> {
    let leaf = tree
        .leaf(c.leaf)
        .ok_or_else(|| Error::InadmissibleSplit(format!("no leaf {}", c.leaf)))?;
    let grown = apply_split(tree, c)?;
    let labels = assign_labels(&grown, &data.macro_panel)?;
    let seed = candidate_seed(config.root_seed, &leaf.path, c);
    let outcome = score_labels(data, &labels, prior, &chain_for(config, seed), config.likelihood);
    let (log_marginal, draws_used) = match outcome {
        Ok((lm, n)) => (Ok(lm), n),
        Err(e) => {
            warn!("candidate {c} failed: {e}");
            (Err(e.to_string()), 0)
        }
    };
    Ok(SplitEvaluation {
        step,
        candidate: c.clone(),
        leaf_path: leaf.path.clone(),
        leaf_depth: leaf.depth(),
        seed,
        log_marginal,
        draws_used,
        selected: false,
    })
}

/// Index of the best successful evaluation; exact ties go to the smaller
/// variable name, then the smaller threshold, then the shallower leaf.
pub fn select_best(evals: &[SplitEvaluation]) -> Option<usize> {
    let tie_key = |e: &SplitEvaluation| (e.candidate.variable.clone(), e.candidate.threshold, e.leaf_depth);
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in evals.iter().enumerate() {
        let Ok(score) = e.log_marginal else { continue };
        let better = match best {
            None => true,
            Some((b, bs)) => {
                score > bs || (score == bs && tie_key(e).partial_cmp(&tie_key(&evals[b])) == Some(std::cmp::Ordering::Less))
            }
        };
        if better {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| i)
}

/// Outcome of one growth step.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthStep {
    pub step: usize,
    pub chosen: SplitCandidate,
    pub log_marginal: f64,
    /// Runner-up within [`NEAR_TIE`] log points.
    pub near_tie: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowResult {
    pub tree: RegimeTree,
    pub evaluations: Vec<SplitEvaluation>,
    pub steps: Vec<GrowthStep>,
}

/// Greedy growth: at each step evaluate every admissible split of every leaf
/// and keep the best, until `max_regimes` is reached or nothing is admissible.
pub fn grow_tree(data: &Dataset, prior: &PriorConfig, config: &SearchConfig) -> Result<GrowResult> {
    config.validate()?;
    let mut tree = RegimeTree::single_leaf();
    let mut evaluations = Vec::new();
    let mut steps = Vec::new();
    let mut step = 1;
    while tree.n_regimes() < config.max_regimes {
        let candidates = enumerate_candidates(
            &tree,
            &data.macro_panel,
            &config.thresholds,
            config.min_months,
            config.max_regimes,
        )?;
        if candidates.is_empty() {
            info!("step {step}: no admissible candidates");
            break;
        }
        info!("step {step}: evaluating {} candidates", candidates.len());
        let mut evals = candidates
            .par_iter()
            .map(|c| evaluate_candidate(c, &tree, data, prior, config, step))
            .collect::<Result<Vec<_>>>()?;
        let Some(best) = select_best(&evals) else {
            warn!("step {step}: every candidate failed; stopping");
            evaluations.extend(evals);
            break;
        };
        evals[best].selected = true;
        let best_score = evals[best].log_marginal.clone().unwrap();
        let near_tie = evals
            .iter()
            .enumerate()
            .any(|(i, e)| i != best && matches!(e.log_marginal, Ok(s) if best_score - s < NEAR_TIE));
        if near_tie {
            warn!("step {step}: runner-up within {NEAR_TIE} log points of {}", evals[best].candidate);
        }
        let chosen = evals[best].candidate.clone();
        info!("step {step}: selected {chosen} with log marginal {best_score:.3}");
        tree = apply_split(&tree, &chosen)?;
        steps.push(GrowthStep {
            step,
            chosen,
            log_marginal: best_score,
            near_tie,
        });
        evaluations.extend(evals);
        step += 1;
    }
    Ok(GrowResult {
        tree,
        evaluations,
        steps,
    })
}

#[derive(Serialize)]
struct EvalCsvRow<'a> {
    step: usize,
    leaf: usize,
    leaf_path: &'a str,
    variable: &'a str,
    threshold: f64,
    log_marginal: String,
    seed: u64,
    status: String,
    selected: bool,
}

pub fn write_evaluation_log(evals: &[SplitEvaluation], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    for e in evals {
        let (lm, status) = match &e.log_marginal {
            Ok(v) => (v.to_string(), "ok".to_string()),
            Err(msg) => (String::new(), format!("failed: {msg}")),
        };
        w.serialize(EvalCsvRow {
            step: e.step,
            leaf: e.candidate.leaf,
            leaf_path: &e.leaf_path,
            variable: &e.candidate.variable,
            threshold: e.candidate.threshold,
            log_marginal: lm,
            seed: e.seed,
            status,
            selected: e.selected,
        })
        .map_err(|err| Error::parse(path, err.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Long chain under the labels of a fixed tree.
pub fn fit_final(
    tree: &RegimeTree,
    data: &Dataset,
    prior: &PriorConfig,
    chain: &ChainConfig,
) -> Result<(PosteriorDraws, RegimeLabels)> {
    let labels = assign_labels(tree, &data.macro_panel)?;
    let obs = data.observations()?;
    let draws = run_chain(&obs, &labels, &data.yields.grid, data.n_macro(), prior, chain)?;
    Ok((draws, labels))
}
