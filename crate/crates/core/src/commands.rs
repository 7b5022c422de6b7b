//! The `fairge` command line: argument definitions and one function per
//! subcommand. Configuration precedence is defaults, then the `--config`
//! file, then individual flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::data::{apply_missing_mask, load_attributes, read_mask_file, write_attributes, write_mask_file, Dataset};
use crate::error::FairgeError;
use crate::lab::suite::{clique_suite, convergence_suite, verify_graphs, SuiteGraph, VerifyOptions};
use crate::lab::{gen_synthetic, GraphKind, SyntheticSpec, Variant};
use crate::model::checkpoint_to_json;
use crate::pipeline::run_experiment;
use crate::report::{write_atomic, FairnessReport};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const NUMERICAL: i32 = 2;
    pub const VERIFICATION: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Fairge(#[from] FairgeError),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Fairge(e) if e.is_numerical() => exit::NUMERICAL,
            CliError::Fairge(_) => exit::USAGE,
            CliError::Verification(_) => exit::VERIFICATION,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Fairge(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "fairge", version, about = "Fairness-aware graph encoding with incomplete sensitive attributes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic edge list and attribute CSV.
    Gen(GenArgs),
    /// Hide a fraction of sensitive values and write the mask file.
    Mask(MaskArgs),
    /// Train once, evaluate on the test split, write report and checkpoint.
    Train(RunArgs),
    /// Train over the missing-rate x seed grid and aggregate.
    Sweep(RunArgs),
    /// Check the multi-hop alignment limits on loaded or generated graphs.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum GenKind {
    Sbm,
    ErdosRenyi,
    DisjointCliques,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Full generator spec as JSON; replaces the shape flags below.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "sbm")]
    pub kind: GenKind,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Number of equal SBM blocks.
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    #[arg(long = "p_in", alias = "p-in", default_value_t = 0.1)]
    pub p_in: f64,
    #[arg(long = "p_out", alias = "p-out", default_value_t = 0.02)]
    pub p_out: f64,
    /// Erdos-Renyi edge probability.
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    /// Clique sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "3,3")]
    pub sizes: Vec<usize>,
    #[arg(long = "rho_s", alias = "rho-s", default_value_t = 0.8)]
    pub rho_s: f64,
    #[arg(long = "label_flip", alias = "label-flip", default_value_t = 0.1)]
    pub label_flip: f64,
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long)]
    pub attributes: PathBuf,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[arg(long)]
    pub attributes: PathBuf,
    #[arg(long)]
    pub rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Flags overriding [`RunConfig`] fields; names match the config keys.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// Flat JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    #[arg(long = "mask_file", alias = "mask-file")]
    pub mask_file: Option<PathBuf>,
    #[arg(long = "missing_rates", alias = "missing-rates", value_delimiter = ',')]
    pub missing_rates: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long = "output_dir", alias = "output-dir")]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long = "k_hops", alias = "k-hops")]
    pub k_hops: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long = "d_m", alias = "d-m")]
    pub d_m: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long = "weight_decay", alias = "weight-decay")]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "missing_rate", alias = "missing-rate")]
    pub missing_rate: Option<f64>,
    #[arg(long = "sensitive_in_features", alias = "sensitive-in-features", action = ArgAction::Set)]
    pub sensitive_in_features: Option<bool>,
    #[arg(long = "train_size", alias = "train-size")]
    pub train_size: Option<usize>,
    #[arg(long, action = ArgAction::Set)]
    pub spectral: Option<bool>,
    #[arg(long = "eig_tol", alias = "eig-tol")]
    pub eig_tol: Option<f64>,
    #[arg(long = "eig_max_iter", alias = "eig-max-iter")]
    pub eig_max_iter: Option<usize>,
}

impl RunArgs {
    /// Defaults, then the config file, then the flags.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_json(&read_text(path)?)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = &self.$field { $target = v.clone(); })*
            };
        }
        set! {
            dataset => c.dataset,
            missing_rates => c.missing_rates,
            seeds => c.seeds,
            output_dir => c.output_dir,
            m => c.train.m,
            k_hops => c.train.k_hops,
            layers => c.train.layers,
            hidden => c.train.hidden,
            heads => c.train.heads,
            d_m => c.train.d_m,
            lr => c.train.lr,
            weight_decay => c.train.weight_decay,
            epochs => c.train.epochs,
            seed => c.train.seed,
            missing_rate => c.train.missing_rate,
            sensitive_in_features => c.train.sensitive_in_features,
            spectral => c.train.spectral,
            eig_tol => c.train.eig_tol,
            eig_max_iter => c.train.eig_max_iter,
        }
        if self.edges.is_some() {
            c.edges = self.edges.clone();
        }
        if self.attributes.is_some() {
            c.attributes = self.attributes.clone();
        }
        if self.mask_file.is_some() {
            c.mask_file = self.mask_file.clone();
        }
        if self.train_size.is_some() {
            c.train.train_size = self.train_size;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Edge list of a graph to check (with `--attributes`).
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    /// Hidden sensitive values for the loaded graph.
    #[arg(long = "mask_file", alias = "mask-file")]
    pub mask_file: Option<PathBuf>,
    /// Number of generated convergence-suite graphs.
    #[arg(long, default_value_t = 0)]
    pub suite: usize,
    /// Number of generated repeated-eigenvalue (disjoint clique) graphs.
    #[arg(long, default_value_t = 0)]
    pub cliques: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated subset of lemma1, thm1, thm2, thm3.
    #[arg(long, value_delimiter = ',', default_value = "lemma1,thm1,thm2,thm3")]
    pub variants: Vec<String>,
    #[arg(long = "k_max", alias = "k-max", default_value_t = 40)]
    pub k_max: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Fit and judge the decay rate of each thm1 series.
    #[arg(long, action = ArgAction::Set, default_value_t = true)]
    pub decay: bool,
    #[arg(long = "output_dir", alias = "output-dir", default_value = "out")]
    pub output_dir: PathBuf,
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a PathBuf> {
    value.as_ref().ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Mask(a) => cmd_mask(&a),
        Command::Train(a) => cmd_train(&a.resolve()?).map(|_| ()),
        Command::Sweep(a) => cmd_sweep(&a.resolve()?).map(|_| ()),
        Command::Verify(a) => cmd_verify(&a),
    }
}

pub fn gen_spec(a: &GenArgs) -> CliResult<SyntheticSpec> {
    if let Some(path) = &a.spec {
        return serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Usage(format!("bad spec: {e}")));
    }
    let graph = match a.kind {
        GenKind::Sbm => {
            if a.blocks == 0 {
                return Err(CliError::Usage("--blocks must be positive".into()));
            }
            let sizes: Vec<usize> = (0..a.blocks)
                .map(|b| a.n / a.blocks + usize::from(b < a.n % a.blocks))
                .collect();
            let probs = (0..a.blocks)
                .map(|i| (0..a.blocks).map(|j| if i == j { a.p_in } else { a.p_out }).collect())
                .collect();
            GraphKind::Sbm { sizes, probs }
        }
        GenKind::ErdosRenyi => GraphKind::ErdosRenyi { n: a.n, p: a.p },
        GenKind::DisjointCliques => GraphKind::DisjointCliques { sizes: a.sizes.clone() },
    };
    Ok(SyntheticSpec {
        graph,
        rho_s: a.rho_s,
        label_flip: a.label_flip,
        noise: a.noise,
        seed: a.seed,
    })
}

pub fn cmd_gen(a: &GenArgs) -> CliResult<()> {
    let ds = gen_synthetic(&gen_spec(a)?)?;
    write_atomic(&a.edges, ds.graph.to_edge_list().as_bytes())?;
    let csv = write_attributes(&ds.attributes, &ds.sensitive, &ds.labels)?;
    write_atomic(&a.attributes, csv.as_bytes())?;
    log::info!("wrote {} nodes, {} edges", ds.graph.n(), ds.graph.edge_count());
    Ok(())
}

pub fn cmd_mask(a: &MaskArgs) -> CliResult<()> {
    let (_, sensitive, _) = load_attributes(&read_text(&a.attributes)?)?;
    let masked = apply_missing_mask(&sensitive, a.rate, a.seed)?;
    write_atomic(&a.out, write_mask_file(&masked).as_bytes())?;
    Ok(())
}

fn load_dataset(c: &RunConfig) -> CliResult<Dataset> {
    let edges = read_text(required(&c.edges, "edges")?)?;
    let attrs = read_text(required(&c.attributes, "attributes")?)?;
    Ok(Dataset::from_text(&edges, &attrs)?)
}

/// File stem shared by the outputs of one (rate, seed) cell.
pub fn cell_name(dataset: &str, rate: f64, seed: u64) -> String {
    format!("{dataset}_r{rate}_s{seed}")
}

pub fn cmd_train(c: &RunConfig) -> CliResult<FairnessReport> {
    let ds = load_dataset(c)?;
    let mask = match &c.mask_file {
        Some(p) => Some(read_mask_file(&read_text(p)?, ds.graph.n())?),
        None => None,
    };
    let exp = run_experiment(&ds, &c.dataset, &c.train, mask.as_deref())?;
    let stem = cell_name(&c.dataset, c.train.missing_rate, c.train.seed);
    exp.report.write(&c.output_dir.join(format!("{stem}.report.json")))?;
    write_atomic(
        &c.output_dir.join(format!("{stem}.checkpoint.json")),
        checkpoint_to_json(&exp.params)?.as_bytes(),
    )?;
    let history = serde_json::to_string_pretty(&exp.history).map_err(FairgeError::from)?;
    write_atomic(&c.output_dir.join(format!("{stem}.history.json")), history.as_bytes())?;
    log::info!(
        "acc {:.4}  d_sp {:.4}%  d_eo {:.4}%",
        exp.report.acc,
        exp.report.d_sp,
        exp.report.d_eo
    );
    Ok(exp.report)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// One aggregate CSV row per missing rate: mean and sample standard
/// deviation over seeds.
pub fn aggregate_csv(rates: &[f64], reports: &[FairnessReport]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "missing_rate", "runs", "acc_mean", "acc_std", "d_sp_mean", "d_sp_std", "d_eo_mean", "d_eo_std",
    ])
    .map_err(FairgeError::from)?;
    for &rate in rates {
        let cell: Vec<&FairnessReport> = reports.iter().filter(|r| r.missing_rate == rate).collect();
        let stats = |f: fn(&FairnessReport) -> f64| mean_std(&cell.iter().map(|r| f(r)).collect::<Vec<_>>());
        let (a, sa) = stats(|r| r.acc);
        let (p, sp) = stats(|r| r.d_sp);
        let (e, se) = stats(|r| r.d_eo);
        let fields = [a, sa, p, sp, e, se].map(|v| format!("{v:.6}"));
        let mut record = vec![rate.to_string(), cell.len().to_string()];
        record.extend(fields);
        w.write_record(&record).map_err(FairgeError::from)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn cmd_sweep(c: &RunConfig) -> CliResult<Vec<FairnessReport>> {
    if c.mask_file.is_some() {
        return Err(CliError::Usage("--mask_file cannot be combined with a missing-rate sweep".into()));
    }
    let ds = load_dataset(c)?;
    let cells: Vec<(f64, u64)> = c
        .missing_rates
        .iter()
        .flat_map(|&r| c.seeds.iter().map(move |&s| (r, s)))
        .collect();
    let reports = cells
        .par_iter()
        .map(|&(rate, seed)| {
            let mut train = c.train.clone();
            train.missing_rate = rate;
            train.seed = seed;
            let exp = run_experiment(&ds, &c.dataset, &train, None)?;
            let stem = cell_name(&c.dataset, rate, seed);
            exp.report.write(&c.output_dir.join(format!("{stem}.report.json")))?;
            Ok(exp.report)
        })
        .collect::<crate::error::Result<Vec<_>>>()?;
    let csv = aggregate_csv(&c.missing_rates, &reports)?;
    write_atomic(&c.output_dir.join(format!("{}_aggregate.csv", c.dataset)), csv.as_bytes())?;
    Ok(reports)
}

pub fn cmd_verify(a: &VerifyArgs) -> CliResult<()> {
    let variants = a
        .variants
        .iter()
        .map(|v| v.parse::<Variant>())
        .collect::<crate::error::Result<Vec<_>>>()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut graphs: Vec<SuiteGraph> = Vec::new();
    if let Some(edges) = &a.edges {
        let attrs = required(&a.attributes, "attributes")?;
        let ds = Dataset::from_text(&read_text(edges)?, &read_text(attrs)?)?;
        let sensitive = match &a.mask_file {
            Some(p) => ds.sensitive.with_missing(&read_mask_file(&read_text(p)?, ds.graph.n())?)?,
            None => ds.sensitive.clone(),
        };
        let id = edges.file_stem().map_or("input".into(), |s| s.to_string_lossy().into_owned());
        graphs.push(SuiteGraph {
            id,
            graph: ds.graph,
            sensitive,
        });
    }
    graphs.extend(convergence_suite(a.suite, a.seed)?);
    graphs.extend(clique_suite(a.cliques, a.seed)?);
    if graphs.is_empty() {
        return Err(CliError::Usage("give --edges/--attributes, --suite or --cliques".into()));
    }
    let opts = VerifyOptions {
        k_max: a.k_max,
        tol: a.tol,
        check_decay: a.decay,
    };
    let report = verify_graphs(&graphs, &variants, &opts)?;
    write_atomic(&a.output_dir.join("verify.csv"), report.to_csv()?.as_bytes())?;
    write_atomic(&a.output_dir.join("verify_summary.json"), report.summary_json()?.as_bytes())?;
    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<String> = report
            .checks
            .iter()
            .filter(|c| c.passed == Some(false))
            .map(|c| format!("{}@{}", c.check, c.graph_id))
            .collect();
        Err(CliError::Verification(failed.join(", ")))
    }
}
