//! Command-line driver.
//!
//! Every subcommand reads an optional JSON [`RunConfig`], applies command-line
//! overrides, runs inside a rayon pool capped by `--threads`, and writes its
//! outputs plus a `manifest.json` into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{
    fitted_curves, girf_bands, posterior_density_export, regime_t_tests, residual_report, svg_line_plot,
    write_curves_csv, write_density_csv, write_irf_csv, write_t_tests_csv, ParamAddress,
};
use crate::error::{Error, Result};
use crate::gibbs::{read_draws, write_draws, ChainConfig, PriorConfig};
use crate::model_select::{fit_final, grow_tree, write_evaluation_log, Dataset, SearchConfig};
use crate::ns_basis::{MaturityGrid, DEFAULT_MATURITIES};
use crate::panel_io::{
    align_panels, descriptive_stats, load_macro_panel, load_yield_panel, write_descriptive_csv, MacroTable,
    YearMonth, YieldPanel, DEFAULT_WINDOW, MODEL_FACTORS, SPLIT_CANDIDATES, TABLE_LAGS,
};
use crate::regime_tree::{assign_labels, RegimeLabels, RegimeTree};
use crate::rng::{derive_seed, rng_from_seed};
use crate::simulation::{default_design, planted_split_design, simulate_panel, SimulationDesign};
use crate::state_space::{FactorPath, ModelKind};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "regime-dns", version, about = "Regime-switching dynamic Nelson-Siegel estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub plots: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate panels from a design.
    Simulate {
        #[arg(long)]
        design: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<DesignPreset>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Grow the regime tree.
    Grow {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        max_regimes: Option<usize>,
    },
    /// Run the full chain under a fixed tree.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        tree: Option<PathBuf>,
    },
    /// Residual, curve, t-test, density and impulse-response reports.
    Report {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        draws: Option<PathBuf>,
    },
    /// Descriptive statistics of the yield panel.
    Stats {
        #[command(flatten)]
        data: DataArgs,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub yields: Option<PathBuf>,
    #[arg(long = "macro")]
    pub macro_data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelKindArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKindArg {
    YieldsOnly,
    YieldsMacro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DesignPreset {
    /// Three regimes split on INFL and UNRATE.
    #[default]
    Default,
    /// Two regimes split on UNRATE at 0.6.
    Planted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub yields: Option<PathBuf>,
    #[serde(rename = "macro")]
    pub macro_data: Option<PathBuf>,
    pub maturities: Vec<f64>,
    /// Split candidates; `None` uses every standard candidate present in the
    /// macro file.
    pub candidates: Option<Vec<String>>,
    pub factors: Vec<String>,
    pub window: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            yields: None,
            macro_data: None,
            maturities: DEFAULT_MATURITIES.to_vec(),
            candidates: None,
            factors: MODEL_FACTORS.iter().map(|s| s.to_string()).collect(),
            window: DEFAULT_WINDOW,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Design JSON; overrides `preset`.
    pub design: Option<PathBuf>,
    pub preset: DesignPreset,
    pub replications: Option<usize>,
    pub t_len: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub horizon: usize,
    /// Central credible mass of the impulse-response bands.
    pub band: f64,
    pub bins: usize,
    /// Parameter addresses such as `A(1,2)`; empty means all.
    pub parameters: Vec<String>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            horizon: 24,
            band: 0.9,
            bins: 40,
            parameters: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub data: DataConfig,
    pub simulation: SimulationConfig,
    pub prior: PriorConfig,
    pub search: SearchConfig,
    /// Chain of the final fit; its seed is derived from `seed`.
    pub chain: ChainConfig,
    pub tree: Option<PathBuf>,
    pub draws: Option<PathBuf>,
    pub report: ReportConfig,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::YieldsOnly,
            data: DataConfig::default(),
            simulation: SimulationConfig::default(),
            prior: PriorConfig::default(),
            search: SearchConfig::default(),
            chain: ChainConfig::default(),
            tree: None,
            draws: None,
            report: ReportConfig::default(),
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.search.validate()?;
        self.chain.validate()?;
        if !(self.report.band > 0.0 && self.report.band < 1.0) {
            return Err(Error::Domain("report band must lie in (0, 1)".into()));
        }
        if self.report.bins == 0 {
            return Err(Error::Domain("report bins must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the configuration with the output directory removed.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.hashed_value()).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn hashed_value(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("out");
        }
        v
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config_sha256: String,
    config: serde_json::Value,
}

fn write_manifest(cfg: &RunConfig, command: &str) -> Result<()> {
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config_sha256: cfg.hash(),
        config: cfg.hashed_value(),
    };
    let path = cfg.out.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

/// Resolves the configuration, applies overrides and runs the subcommand.
pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::read(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.common.out {
        cfg.out = out.clone();
    }
    apply_overrides(&mut cfg, &cli.command);
    cfg.search.root_seed = cfg.seed;
    cfg.chain.seed = derive_seed(cfg.seed, &["fit"]);
    cfg.validate()?;

    let threads = cli.common.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Invalid(format!("cannot build thread pool: {e}")))?;
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let plots = cli.common.plots;
    pool.install(|| match &cli.command {
        Command::Simulate { .. } => cmd_simulate(&cfg),
        Command::Grow { .. } => cmd_grow(&cfg),
        Command::Fit { .. } => cmd_fit(&cfg),
        Command::Report { .. } => cmd_report(&cfg, plots),
        Command::Stats { .. } => cmd_stats(&cfg),
    })?;
    write_manifest(&cfg, command_name(&cli.command))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate { .. } => "simulate",
        Command::Grow { .. } => "grow",
        Command::Fit { .. } => "fit",
        Command::Report { .. } => "report",
        Command::Stats { .. } => "stats",
    }
}

fn apply_data_overrides(cfg: &mut RunConfig, data: &DataArgs) {
    if let Some(p) = &data.yields {
        cfg.data.yields = Some(p.clone());
    }
    if let Some(p) = &data.macro_data {
        cfg.data.macro_data = Some(p.clone());
    }
    match data.model {
        Some(ModelKindArg::YieldsOnly) => cfg.model = ModelKind::YieldsOnly,
        Some(ModelKindArg::YieldsMacro) => cfg.model = ModelKind::YieldsMacro,
        None => {}
    }
}

fn apply_overrides(cfg: &mut RunConfig, command: &Command) {
    match command {
        Command::Simulate {
            design,
            preset,
            replications,
        } => {
            if let Some(p) = design {
                cfg.simulation.design = Some(p.clone());
            }
            if let Some(p) = preset {
                cfg.simulation.preset = *p;
            }
            if let Some(n) = replications {
                cfg.simulation.replications = Some(*n);
            }
        }
        Command::Grow { data, max_regimes } => {
            apply_data_overrides(cfg, data);
            if let Some(m) = max_regimes {
                cfg.search.max_regimes = *m;
            }
        }
        Command::Fit { data, tree } => {
            apply_data_overrides(cfg, data);
            if let Some(t) = tree {
                cfg.tree = Some(t.clone());
            }
        }
        Command::Report { data, draws } => {
            apply_data_overrides(cfg, data);
            if let Some(d) = draws {
                cfg.draws = Some(d.clone());
            }
        }
        Command::Stats { data } => apply_data_overrides(cfg, data),
    }
}

// ---------------------------------------------------------------- simulate

fn load_design(cfg: &RunConfig) -> Result<SimulationDesign> {
    let mut design = match &cfg.simulation.design {
        Some(path) => SimulationDesign::read(path)?,
        None => match cfg.simulation.preset {
            DesignPreset::Default => default_design(),
            DesignPreset::Planted => planted_split_design(),
        },
    };
    if let Some(n) = cfg.simulation.replications {
        design.n_replications = n;
    }
    if let Some(t) = cfg.simulation.t_len {
        design.t_len = t;
    }
    if design.n_replications == 0 {
        return Err(Error::Domain("at least one replication is required".into()));
    }
    design.validate()?;
    Ok(design)
}

fn write_labels_csv(dates: &[YearMonth], labels: &RegimeLabels, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    w.write_record(["date", "regime"]).map_err(|e| Error::parse(path, e.to_string()))?;
    for (d, z) in dates.iter().zip(labels.as_slice()) {
        w.write_record([d.to_string(), (z + 1).to_string()])
            .map_err(|e| Error::parse(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_factors_csv(dates: &[YearMonth], factors: &FactorPath, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let d = factors.states.first().map_or(0, |s| s.len());
    let mut header = vec!["date".to_string()];
    header.extend((1..=d).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(|e| Error::parse(path, e.to_string()))?;
    for (date, s) in dates.iter().zip(&factors.states) {
        let mut row = vec![date.to_string()];
        row.extend(s.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| Error::parse(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn replication_dir(out: &Path, r: usize) -> PathBuf {
    out.join(format!("rep_{r:03}"))
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let design = load_design(cfg)?;
    let truth_path = cfg.out.join("truth.json");
    let text = serde_json::to_string_pretty(&design).expect("design serializes");
    fs::write(&truth_path, text + "\n").map_err(|e| Error::io(&truth_path, e))?;
    design.tree.write(&cfg.out.join("tree.json"))?;
    (1..=design.n_replications).into_par_iter().try_for_each(|r| {
        let mut rng = rng_from_seed(derive_seed(cfg.seed, &["simulate", &r.to_string()]));
        let sim = simulate_panel(&design, &mut rng)?;
        let dir = replication_dir(&cfg.out, r);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        sim.yields.write_csv(&dir.join("yields.csv"))?;
        sim.macro_table.write_csv(&dir.join("macro.csv"), &design.drivers)?;
        write_labels_csv(&sim.yields.dates, &sim.labels, &dir.join("labels.csv"))?;
        write_factors_csv(&sim.yields.dates, &sim.factors, &dir.join("factors.csv"))
    })?;
    info!("wrote {} replications to {}", design.n_replications, cfg.out.display());
    Ok(())
}

// -------------------------------------------------------------------- data

fn required_path<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Invalid(format!("no {what} file given (set it in the config or by flag)")))
}

fn load_yields(cfg: &RunConfig) -> Result<YieldPanel> {
    let grid = MaturityGrid::new(cfg.data.maturities.clone())?;
    load_yield_panel(required_path(&cfg.data.yields, "yield")?, &grid)
}

fn resolve_candidates(cfg: &RunConfig, table: &MacroTable, extra: &[String]) -> Result<Vec<String>> {
    let mut names: Vec<String> = match &cfg.data.candidates {
        Some(list) => list.clone(),
        None => SPLIT_CANDIDATES
            .iter()
            .filter(|n| table.columns.contains_key(**n))
            .map(|s| s.to_string())
            .collect(),
    };
    for v in extra {
        if !names.contains(v) {
            names.push(v.clone());
        }
    }
    if names.is_empty() {
        return Err(Error::Invalid("the macro file holds none of the split candidates".into()));
    }
    Ok(names)
}

/// Loads and aligns the panels; `extra` lists variables that must be
/// standardized besides the search candidates (those of a fixed tree).
fn load_dataset(cfg: &RunConfig, extra: &[String]) -> Result<Dataset> {
    let yields = load_yields(cfg)?;
    let macro_path = required_path(&cfg.data.macro_data, "macro")?;
    let factors: Vec<String> = match cfg.model {
        ModelKind::YieldsOnly => Vec::new(),
        ModelKind::YieldsMacro => cfg.data.factors.clone(),
    };
    let table = load_macro_panel(macro_path, &factors)?;
    let candidates = resolve_candidates(cfg, &table, extra)?;
    let (yields, macro_panel) = align_panels(&yields, &table, &candidates, &factors, cfg.data.window)?;
    Ok(Dataset {
        yields,
        macro_panel,
        kind: cfg.model,
    })
}

fn load_tree(cfg: &RunConfig) -> Result<RegimeTree> {
    match &cfg.tree {
        Some(path) => RegimeTree::read(path),
        None => Ok(RegimeTree::single_leaf()),
    }
}

// -------------------------------------------------------------------- grow

fn cmd_grow(cfg: &RunConfig) -> Result<()> {
    let data = load_dataset(cfg, &[])?;
    let result = grow_tree(&data, &cfg.prior, &cfg.search)?;
    result.tree.write(&cfg.out.join("tree.json"))?;
    write_evaluation_log(&result.evaluations, &cfg.out.join("evaluations.csv"))?;
    let labels = assign_labels(&result.tree, &data.macro_panel)?;
    write_labels_csv(&data.yields.dates, &labels, &cfg.out.join("labels.csv"))?;
    for s in &result.steps {
        println!(
            "step {}: split leaf {} on {} < {} (log marginal {:.4}{})",
            s.step,
            s.chosen.leaf,
            s.chosen.variable,
            s.chosen.threshold,
            s.log_marginal,
            if s.near_tie { ", near tie" } else { "" }
        );
    }
    for leaf in result.tree.leaves() {
        println!("regime {}: {}", leaf.regime, leaf.describe());
    }
    Ok(())
}

// --------------------------------------------------------------------- fit

fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let tree = load_tree(cfg)?;
    let data = load_dataset(cfg, &tree.variables())?;
    let (draws, labels) = fit_final(&tree, &data, &cfg.prior, &cfg.chain)?;
    tree.write(&cfg.out.join("tree.json"))?;
    write_labels_csv(&data.yields.dates, &labels, &cfg.out.join("labels.csv"))?;
    write_draws(&draws, &labels, &cfg.out.join("draws"), &cfg.chain, &cfg.prior)?;
    info!(
        "stored {} draws, lambda acceptance {:.3}",
        draws.len(),
        draws.lambda_acceptance
    );
    Ok(())
}

// ------------------------------------------------------------------ report

fn factor_names(data: &Dataset) -> Vec<String> {
    let mut names: Vec<String> = ["level", "slope", "curvature"].iter().map(|s| s.to_string()).collect();
    if data.kind == ModelKind::YieldsMacro {
        names.extend(data.macro_panel.factor_names.iter().cloned());
    }
    names
}

fn report_addresses(cfg: &RunConfig, d: usize, n_obs: usize) -> Result<Vec<ParamAddress>> {
    if !cfg.report.parameters.is_empty() {
        return cfg.report.parameters.iter().map(|s| s.parse()).collect();
    }
    let mut out = vec![ParamAddress::Lambda];
    out.extend((1..=d).map(ParamAddress::Mu));
    for i in 1..=d {
        for j in 1..=d {
            out.push(ParamAddress::A(i, j));
        }
    }
    for i in 1..=d {
        for j in i..=d {
            out.push(ParamAddress::H(i, j));
        }
    }
    out.extend((1..=n_obs).map(ParamAddress::Q));
    Ok(out)
}

fn write_svg(path: &Path, svg: &str) -> Result<()> {
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

fn cmd_report(cfg: &RunConfig, plots: bool) -> Result<()> {
    let draws_dir = required_path(&cfg.draws, "draws")?;
    let (draws, manifest, stored_labels) = read_draws(draws_dir)?;
    let tree_path = draws_dir.parent().map(|p| p.join("tree.json"));
    let tree_vars = match (&cfg.tree, &tree_path) {
        (Some(p), _) => RegimeTree::read(p)?.variables(),
        (None, Some(p)) if p.exists() => RegimeTree::read(p)?.variables(),
        _ => Vec::new(),
    };
    let data = load_dataset(cfg, &tree_vars)?;
    if manifest.maturities != data.yields.grid.maturities() {
        return Err(Error::Dimension("draws were fitted on a different maturity grid".into()));
    }
    let labels = stored_labels.ok_or_else(|| Error::Invalid("draws carry no factor paths".into()))?;

    let report = residual_report(&data.yields, &draws, &labels)?;
    report.write_csv(&cfg.out.join("residuals.csv"))?;
    let curves = fitted_curves(&data.yields, &draws, &labels)?;
    let maturities = data.yields.grid.maturities();
    write_curves_csv(&curves, maturities, &cfg.out.join("curves.csv"))?;

    let first = &draws.params[0];
    let d = first.state_dim();
    let addresses = report_addresses(cfg, d, first.obs_dim())?;
    if first.n_regimes() > 1 {
        let rows = regime_t_tests(&draws, &addresses)?;
        write_t_tests_csv(&rows, &cfg.out.join("t_tests.csv"))?;
    }
    let densities = addresses
        .iter()
        .map(|a| Ok((a.clone(), posterior_density_export(&draws, a, cfg.report.bins)?)))
        .collect::<Result<Vec<_>>>()?;
    write_density_csv(&densities, &cfg.out.join("densities.csv"))?;

    let tail = (1.0 - cfg.report.band) / 2.0;
    let mut irfs = Vec::new();
    for g in 0..first.n_regimes() {
        for shock in 0..d {
            irfs.push(girf_bands(&draws, g, shock, cfg.report.horizon, (tail, 1.0 - tail))?);
        }
    }
    let names = factor_names(&data);
    write_irf_csv(&irfs, &names, &cfg.out.join("irf.csv"))?;

    if plots {
        let plot_dir = cfg.out.join("plots");
        fs::create_dir_all(&plot_dir).map_err(|e| Error::io(&plot_dir, e))?;
        for c in &curves {
            let tag = c.regime.map_or("all".to_string(), |g| format!("regime{g}"));
            let series = vec![
                ("actual".to_string(), maturities.iter().copied().zip(c.actual.iter().copied()).collect()),
                ("fitted".to_string(), maturities.iter().copied().zip(c.fitted.iter().copied()).collect()),
            ];
            write_svg(&plot_dir.join(format!("curve_{tag}.svg")), &svg_line_plot(&format!("Average curve, {tag}"), &series))?;
        }
        for r in &irfs {
            for v in 0..d {
                let pts = |m: &DMatrix<f64>| (0..m.nrows()).map(|h| (h as f64, m[(h, v)])).collect::<Vec<_>>();
                let series = vec![
                    ("lower".to_string(), pts(&r.lower)),
                    ("median".to_string(), pts(&r.point)),
                    ("upper".to_string(), pts(&r.upper)),
                ];
                let title = format!("Regime {}: {} shock on {}", r.regime + 1, names[r.shock], names[v]);
                let file = format!("irf_r{}_{}_{}.svg", r.regime + 1, names[r.shock], names[v]);
                write_svg(&plot_dir.join(file), &svg_line_plot(&title, &series))?;
            }
        }
        for (addr, hists) in &densities {
            let series = hists
                .iter()
                .map(|h| {
                    let mids = h.edges.windows(2).map(|w| 0.5 * (w[0] + w[1]));
                    (format!("regime {}", h.regime), mids.zip(h.density.iter().copied()).collect())
                })
                .collect::<Vec<_>>();
            let file: String = addr
                .to_string()
                .chars()
                .filter_map(|c| match c {
                    '(' | ',' => Some('_'),
                    ')' => None,
                    c => Some(c),
                })
                .collect();
            write_svg(&plot_dir.join(format!("density_{file}.svg")), &svg_line_plot(&addr.to_string(), &series))?;
        }
    }
    Ok(())
}

// ------------------------------------------------------------------- stats

fn cmd_stats(cfg: &RunConfig) -> Result<()> {
    let yields = load_yields(cfg)?;
    let rows = descriptive_stats(&yields, &TABLE_LAGS)?;
    write_descriptive_csv(&rows, &cfg.out.join("descriptive.csv"))
}

/// Process exit code for a result: 0 success, 2 input error, 3 numerical
/// failure.
pub fn exit_code(result: &Result<()>) -> u8 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_numerical() => 3,
        Err(_) => 2,
    }
}
