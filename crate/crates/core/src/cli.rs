//! Command-line interface of the `rvfl-cil` binary. Every subcommand is
//! reachable in-process through [`run_from`], which parses arguments,
//! dispatches, and returns the process exit code (0 success, 2 configuration
//! error, 3 dataset error, 4 numerical failure) without calling `exit`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, inject_noise, normalize, Dataset, NoiseSpec};
use crate::error::{Error, Result};
use crate::eval::{
    average_ranks, friedman, grid_search, nemenyi_cd, results_csv, results_markdown, sign_test,
    BenchRow, GridCell, GridSpec,
};
use crate::featuremap::{init_featuremap, Activation};
use crate::solver::{decision_scores, fit, ModelKind, TrainConfig, TrainedModel};

/// Environment variable consulted when neither the command line nor the
/// config file names an output directory.
pub const OUTPUT_DIR_ENV: &str = "RVFL_CIL_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// The level is the fraction of rows corrupted (at full feature scale).
    #[default]
    Fraction,
    /// The level scales the noise amplitude applied to every row.
    Amplitude,
}

impl NoiseMode {
    fn parse(s: &str) -> Result<NoiseMode> {
        match s {
            "fraction" => Ok(NoiseMode::Fraction),
            "amplitude" => Ok(NoiseMode::Amplitude),
            other => Err(Error::Config(format!(
                "noise mode must be 'fraction' or 'amplitude', got '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSpec {
    /// Path to a KEEL `.dat` or CSV file.
    Path(String),
    /// Inline synthetic two-Gaussian specification.
    Synthetic {
        n_pos: usize,
        n_neg: usize,
        p: usize,
        separation: f64,
        seed: u64,
        #[serde(default)]
        name: Option<String>,
    },
}

fn default_folds() -> usize {
    5
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub datasets: Vec<DatasetSpec>,
    pub variants: Vec<String>,
    #[serde(default)]
    pub grids: Option<GridSpec>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub noise_levels: Vec<f64>,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub noise_mode: NoiseMode,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("config lists no datasets".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("config lists no variants".into()));
        }
        for tag in &self.variants {
            ModelKind::parse(tag)?;
        }
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("config lists no seeds".into()));
        }
        if let Some(g) = &self.grids {
            g.validate()?;
        }
        if (self.alpha - 0.05).abs() > 1e-12 && (self.alpha - 0.10).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "alpha must be 0.05 or 0.10, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Parser, Debug)]
#[command(name = "rvfl-cil", version, about = "Randomized functional-link classifiers for imbalanced data")]
pub struct Cli {
    /// Worker threads for score computation (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Cross-validated grid-search benchmark over datasets and variants.
    Bench(RunArgs),
    /// Benchmark under injected Gaussian noise, one block per level.
    Noise(RunArgs),
    /// Train, inspect, or apply a single serialized model.
    Model {
        #[command(subcommand)]
        cmd: ModelCmd,
    },
    /// Rank/Friedman/Nemenyi/sign-test report from a score-matrix CSV.
    Stats(StatsArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// JSON run configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub noise_levels: Option<Vec<f64>>,
    /// 'fraction' (corrupt a fraction of rows) or 'amplitude' (scale noise).
    #[arg(long)]
    pub noise_mode: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum ModelCmd {
    /// Fit one variant on one dataset and write the model JSON.
    Save(SaveArgs),
    /// Validate a model file and print a summary.
    Load { model: PathBuf },
    /// Score a feature CSV with a saved model.
    Predict(PredictArgs),
}

#[derive(Args, Debug)]
pub struct SaveArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub variant: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 100)]
    pub h_l: usize,
    #[arg(long, default_value = "relu")]
    pub activation: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of feature rows (no label column, no header).
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// CSV with a header row (name, model...) and one score row per dataset.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for stats.json and manifest.json; stdout-only when absent.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::ConfigMismatch(_)
        | Error::Json(_)
        | Error::DimensionMismatch(_)
        | Error::InvalidWidth
        | Error::UnsupportedD(_)
        | Error::NonPositiveMu(_)
        | Error::NonPositiveSigma(_)
        | Error::DegenerateInputs(_) => 2,
        Error::NumericalFailure(_)
        | Error::SingularPenalty
        | Error::NonFinite
        | Error::NotSquare { .. }
        | Error::NotSymmetric { .. } => 4,
        _ => 3,
    }
}

/// Parses and dispatches; returns the process exit code.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(jobs) = cli.jobs {
        // The global pool can only be built once per process; later calls
        // (e.g. repeated in-process runs) keep the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let outcome = match cli.command {
        Command::Bench(args) => cmd_bench(&args),
        Command::Noise(args) => cmd_noise(&args),
        Command::Model { cmd } => cmd_model(&cmd),
        Command::Stats(args) => cmd_stats(&args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn read_config(args: &RunArgs) -> Result<RunConfig> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let mut cfg: RunConfig = serde_json::from_str(&text)?;
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = Some(dir.display().to_string());
    }
    if let Some(folds) = args.folds {
        cfg.folds = folds;
    }
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(variants) = &args.variants {
        cfg.variants = variants.clone();
    }
    if let Some(levels) = &args.noise_levels {
        cfg.noise_levels = levels.clone();
    }
    if let Some(mode) = &args.noise_mode {
        cfg.noise_mode = NoiseMode::parse(mode)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_output_dir(cfg: &RunConfig) -> PathBuf {
    if let Some(dir) = &cfg.output_dir {
        return PathBuf::from(dir);
    }
    if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from("rvfl_cil_out")
}

fn load_datasets(cfg: &RunConfig) -> Result<Vec<Dataset>> {
    cfg.datasets
        .iter()
        .map(|spec| match spec {
            DatasetSpec::Path(p) => {
                let path = Path::new(p);
                dataset::load(path).map_err(|e| match e {
                    Error::Io(io) => Error::Io(std::io::Error::new(
                        io.kind(),
                        format!("{}: {io}", path.display()),
                    )),
                    other => other,
                })
            }
            DatasetSpec::Synthetic {
                n_pos,
                n_neg,
                p,
                separation,
                seed,
                name,
            } => {
                let mut ds = dataset::synth_gaussians(*n_pos, *n_neg, *p, *separation, *seed);
                if let Some(name) = name {
                    ds.name = name.clone();
                }
                Ok(ds)
            }
        })
        .collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
}

fn write_manifest(dir: &Path, command: &'static str, cfg: &RunConfig) -> Result<()> {
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: cfg,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

/// Scales every feature by `level` times its sample standard deviation and
/// perturbs all rows; the alternate reading of "x% noise".
fn inject_noise_amplitude(ds: &Dataset, level: f64, seed: u64) -> Result<Dataset> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::Config(format!(
            "amplitude noise level must be non-negative, got {level}"
        )));
    }
    let mut out = ds.clone();
    if level == 0.0 || ds.n() < 2 {
        return Ok(out);
    }
    let n = ds.n();
    let mut sigmas = Vec::with_capacity(ds.p());
    for j in 0..ds.p() {
        let col = ds.x.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        sigmas.push(level * var.sqrt());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for i in 0..n {
        for j in 0..ds.p() {
            let draw: f64 = rng.sample(StandardNormal);
            if sigmas[j] > 0.0 {
                out.x[(i, j)] += sigmas[j] * draw;
            }
        }
    }
    Ok(out)
}

fn apply_noise(ds: &Dataset, level: f64, mode: NoiseMode, seed: u64) -> Result<Dataset> {
    match mode {
        NoiseMode::Fraction => Ok(inject_noise(ds, &NoiseSpec::new(level, seed)?)),
        NoiseMode::Amplitude => inject_noise_amplitude(ds, level, seed),
    }
}

#[derive(Serialize)]
struct SignEntry {
    first: String,
    second: String,
    wins: usize,
    ties: usize,
    losses: usize,
    effective_wins: f64,
    threshold: f64,
    significant: bool,
}

#[derive(Serialize)]
struct StatsReport {
    models: Vec<String>,
    datasets: Vec<String>,
    average_ranks: Vec<f64>,
    chi2: f64,
    ff: f64,
    ff_infinite: bool,
    cd_alpha_05: f64,
    cd_alpha_10: Option<f64>,
    sign_tests: Vec<SignEntry>,
}

fn build_stats_report(
    models: &[String],
    datasets: &[String],
    table: &[Vec<f64>],
) -> Result<StatsReport> {
    let rt = average_ranks(table)?;
    let fr = friedman(table)?;
    let d = models.len();
    let cd_alpha_05 = nemenyi_cd(d, datasets.len(), 0.05)?;
    let cd_alpha_10 = nemenyi_cd(d, datasets.len(), 0.10).ok();
    let mut sign_tests = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let a: Vec<f64> = table.iter().map(|r| r[i]).collect();
            let b: Vec<f64> = table.iter().map(|r| r[j]).collect();
            let st = sign_test(&a, &b)?;
            sign_tests.push(SignEntry {
                first: models[i].clone(),
                second: models[j].clone(),
                wins: st.wins,
                ties: st.ties,
                losses: st.losses,
                effective_wins: st.effective_wins,
                threshold: st.threshold,
                significant: st.significant,
            });
        }
    }
    Ok(StatsReport {
        models: models.to_vec(),
        datasets: datasets.to_vec(),
        average_ranks: rt.average,
        chi2: fr.chi2,
        ff: fr.ff,
        ff_infinite: fr.ff_infinite,
        cd_alpha_05,
        cd_alpha_10,
        sign_tests,
    })
}

fn render_stats_text(report: &StatsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} models on {} datasets",
        report.models.len(),
        report.datasets.len()
    );
    let _ = writeln!(out, "average ranks (1 = best):");
    let mut order: Vec<usize> = (0..report.models.len()).collect();
    order.sort_by(|&a, &b| report.average_ranks[a].total_cmp(&report.average_ranks[b]));
    for idx in order {
        let _ = writeln!(
            out,
            "  {:<20} {:.4}",
            report.models[idx], report.average_ranks[idx]
        );
    }
    let _ = writeln!(out, "friedman chi2 = {:.4}", report.chi2);
    if report.ff_infinite {
        let _ = writeln!(out, "friedman F = infinite (chi2 saturates the denominator)");
    } else {
        let _ = writeln!(out, "friedman F = {:.4}", report.ff);
    }
    let _ = writeln!(out, "nemenyi CD (alpha 0.05) = {:.4}", report.cd_alpha_05);
    if let Some(cd) = report.cd_alpha_10 {
        let _ = writeln!(out, "nemenyi CD (alpha 0.10) = {cd:.4}");
    }
    let significant: Vec<&SignEntry> =
        report.sign_tests.iter().filter(|s| s.significant).collect();
    let _ = writeln!(out, "sign test, significant pairs at 5%:");
    if significant.is_empty() {
        let _ = writeln!(out, "  none");
    } else {
        for s in significant {
            let _ = writeln!(
                out,
                "  {} beats {} ({} wins, {} ties, threshold {:.2})",
                s.first, s.second, s.wins, s.ties, s.threshold
            );
        }
    }
    out
}

struct DetailRow {
    dataset: String,
    variant: ModelKind,
    seed: u64,
    cell: GridCell,
}

/// Shared core of `bench` and `noise`: runs the grid search for every
/// dataset, variant, and seed (corrupting the data per seed when a noise
/// level is given), writes per-dataset detail CSVs, the summary table in CSV
/// and markdown, and the significance report when the table is large enough.
fn run_bench_core(
    datasets: &[Dataset],
    cfg: &RunConfig,
    noise: Option<(f64, NoiseMode)>,
    out_dir: &Path,
) -> Result<Vec<BenchRow>> {
    fs::create_dir_all(out_dir)?;
    let variants: Vec<ModelKind> = cfg
        .variants
        .iter()
        .map(|t| ModelKind::parse(t))
        .collect::<Result<_>>()?;
    let grids = cfg.grids.clone().unwrap_or_default();

    let mut rows = Vec::new();
    let mut details: Vec<DetailRow> = Vec::new();
    for ds in datasets {
        let mut results = Vec::new();
        for &variant in &variants {
            let mut per_seed: Vec<GridCell> = Vec::new();
            for &seed in &cfg.seeds {
                let started = Instant::now();
                let data = match noise {
                    Some((level, mode)) => apply_noise(ds, level, mode, seed)?,
                    None => ds.clone(),
                };
                let res = grid_search(&data, variant, &grids, cfg.folds, seed)?;
                eprintln!(
                    "[{}] {} seed {}: best auc {:.4} (h_l={}, C={:.0e}, mu={}, theta={:.0e}) in {:.1}s",
                    ds.name,
                    variant.tag(),
                    seed,
                    res.best.auc,
                    res.best.h_l,
                    res.best.c,
                    res.best.mu,
                    res.best.theta,
                    started.elapsed().as_secs_f64()
                );
                details.push(DetailRow {
                    dataset: ds.name.clone(),
                    variant,
                    seed,
                    cell: res.best.clone(),
                });
                per_seed.push(res.best);
            }
            let nf = per_seed.len() as f64;
            let mean = |f: fn(&GridCell) -> f64| per_seed.iter().map(f).sum::<f64>() / nf;
            let mut agg = per_seed[0].clone();
            agg.auc = mean(|c| c.auc);
            agg.sensitivity = mean(|c| c.sensitivity);
            agg.specificity = mean(|c| c.specificity);
            agg.g_mean = mean(|c| c.g_mean);
            agg.f_measure = mean(|c| c.f_measure);
            agg.roc_auc = mean(|c| c.roc_auc);
            results.push((variant, agg));
        }
        rows.push(BenchRow {
            dataset: ds.name.clone(),
            results,
        });
    }

    for ds in datasets {
        let mut text = String::from(
            "dataset,variant,seed,auc,sensitivity,specificity,g_mean,f_measure,roc_auc,h_l,c,mu,theta\n",
        );
        for row in details.iter().filter(|r| r.dataset == ds.name) {
            let c = &row.cell;
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                row.dataset,
                row.variant.tag(),
                row.seed,
                c.auc,
                c.sensitivity,
                c.specificity,
                c.g_mean,
                c.f_measure,
                c.roc_auc,
                c.h_l,
                c.c,
                c.mu,
                c.theta
            );
        }
        fs::write(out_dir.join(format!("{}_detail.csv", ds.name)), text)?;
    }

    fs::write(out_dir.join("results.csv"), results_csv(&rows)?)?;
    fs::write(out_dir.join("results.md"), results_markdown(&rows)?)?;

    if rows.len() >= 2 && variants.len() >= 2 && (2..=10).contains(&variants.len()) {
        let models: Vec<String> = variants.iter().map(|v| v.tag().to_string()).collect();
        let names: Vec<String> = rows.iter().map(|r| r.dataset.clone()).collect();
        let table: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.results.iter().map(|(_, c)| c.auc).collect())
            .collect();
        let report = build_stats_report(&models, &names, &table)?;
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        fs::write(out_dir.join("stats.json"), json)?;
        fs::write(out_dir.join("stats.txt"), render_stats_text(&report))?;
    }
    Ok(rows)
}

fn cmd_bench(args: &RunArgs) -> Result<()> {
    let cfg = read_config(args)?;
    let out_dir = resolve_output_dir(&cfg);
    fs::create_dir_all(&out_dir)?;
    write_manifest(&out_dir, "bench", &cfg)?;
    let datasets = load_datasets(&cfg)?;
    run_bench_core(&datasets, &cfg, None, &out_dir)?;
    Ok(())
}

fn format_level(level: f64) -> String {
    format!("{level}")
}

fn cmd_noise(args: &RunArgs) -> Result<()> {
    let cfg = read_config(args)?;
    if cfg.noise_levels.is_empty() {
        return Err(Error::Config(
            "noise command requires non-empty noise_levels".into(),
        ));
    }
    for &level in &cfg.noise_levels {
        match cfg.noise_mode {
            NoiseMode::Fraction => {
                NoiseSpec::new(level, 0)?;
            }
            NoiseMode::Amplitude => {
                if !(level >= 0.0 && level.is_finite()) {
                    return Err(Error::Config(format!("invalid noise level {level}")));
                }
            }
        }
    }
    let out_dir = resolve_output_dir(&cfg);
    fs::create_dir_all(&out_dir)?;
    write_manifest(&out_dir, "noise", &cfg)?;
    let datasets = load_datasets(&cfg)?;

    let variants: Vec<ModelKind> = cfg
        .variants
        .iter()
        .map(|t| ModelKind::parse(t))
        .collect::<Result<_>>()?;
    let mut per_level: Vec<(f64, Vec<BenchRow>)> = Vec::new();
    for &level in &cfg.noise_levels {
        let sub = out_dir.join(format!("level_{}", format_level(level)));
        let rows = run_bench_core(&datasets, &cfg, Some((level, cfg.noise_mode)), &sub)?;
        per_level.push((level, rows));
    }

    // Table layout: one row per variant, one column per level, values are
    // the mean best AUC across datasets.
    let mut summary = String::from("variant");
    for (level, _) in &per_level {
        let _ = write!(summary, ",level_{}", format_level(*level));
    }
    summary.push('\n');
    for (vi, variant) in variants.iter().enumerate() {
        summary.push_str(variant.tag());
        for (_, rows) in &per_level {
            let mean =
                rows.iter().map(|r| r.results[vi].1.auc).sum::<f64>() / rows.len() as f64;
            let _ = write!(summary, ",{mean}");
        }
        summary.push('\n');
    }
    fs::write(out_dir.join("noise_summary.csv"), summary)?;
    Ok(())
}

fn cmd_model(cmd: &ModelCmd) -> Result<()> {
    match cmd {
        ModelCmd::Save(args) => {
            let variant = ModelKind::parse(&args.variant)?;
            let ds = dataset::load(&args.dataset).map_err(|e| match e {
                Error::Io(io) => Error::Io(std::io::Error::new(
                    io.kind(),
                    format!("{}: {io}", args.dataset.display()),
                )),
                other => other,
            })?;
            let (norm_ds, nrm) = normalize(&ds);
            let activation = Activation::parse(&args.activation)?;
            let fm = init_featuremap(norm_ds.p(), args.h_l, activation, args.seed)?;
            let cfg = TrainConfig::new(variant, args.c, args.theta, args.mu);
            let model = fit(&norm_ds, &cfg, &fm)?.with_normalizer(nrm);
            model.save(&args.out)?;
            eprintln!(
                "saved {} model ({} features, h_l {}) to {}",
                variant.tag(),
                norm_ds.p(),
                args.h_l,
                args.out.display()
            );
            Ok(())
        }
        ModelCmd::Load { model } => {
            let m = TrainedModel::load(model)?;
            println!(
                "variant: {}\nfeatures: {}\nhidden width: {}\nC: {}\ntheta: {}\nmu: {}\nnormalizer: {}",
                m.config.variant.tag(),
                m.fm.p(),
                m.fm.h_l(),
                m.config.c,
                m.config.theta,
                m.config.mu,
                if m.normalizer.is_some() { "stored" } else { "none" }
            );
            Ok(())
        }
        ModelCmd::Predict(args) => {
            let model = TrainedModel::load(&args.model)?;
            let text = fs::read_to_string(&args.input).map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", args.input.display()),
                ))
            })?;
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for (li, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let vals: Vec<f64> = line
                    .split(',')
                    .map(|tok| {
                        tok.trim().parse::<f64>().map_err(|_| {
                            Error::Config(format!(
                                "input row {}: cannot parse {:?} as a number",
                                li + 1,
                                tok.trim()
                            ))
                        })
                    })
                    .collect::<Result<_>>()?;
                if let Some(first) = rows.first() {
                    if vals.len() != first.len() {
                        return Err(Error::Config(format!(
                            "input row {}: expected {} values, found {}",
                            li + 1,
                            first.len(),
                            vals.len()
                        )));
                    }
                }
                rows.push(vals);
            }
            if rows.is_empty() {
                return Err(Error::Config("prediction input has no rows".into()));
            }
            let p = rows[0].len();
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let x = DMatrix::from_row_slice(rows.len(), p, &flat);
            let scores = decision_scores(&model, &x)?;
            let mut out = String::from("label,score\n");
            for s in scores.iter() {
                let label = if *s >= 0.0 { 1 } else { -1 };
                let _ = writeln!(out, "{label},{s}");
            }
            match &args.out {
                Some(path) => fs::write(path, out)?,
                None => print!("{out}"),
            }
            Ok(())
        }
    }
}

/// Parses a score-matrix CSV: header `name,model...`, then one row per
/// dataset with the dataset name followed by one score per model.
pub fn parse_matrix_csv(text: &str) -> Result<(Vec<String>, Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or(Error::MissingHeader)?;
    let models: Vec<String> = header
        .split(',')
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    if models.is_empty() {
        return Err(Error::MissingHeader);
    }
    let mut datasets = Vec::new();
    let mut table = Vec::new();
    for (row_idx, line) in lines.enumerate() {
        let mut parts = line.split(',');
        let name = parts.next().unwrap_or("").trim().to_string();
        let vals: Vec<&str> = parts.collect();
        if vals.len() != models.len() {
            return Err(Error::ArityMismatch {
                row: row_idx + 1,
                expected: models.len() + 1,
                found: vals.len() + 1,
            });
        }
        let mut row = Vec::with_capacity(models.len());
        for (col, tok) in vals.iter().enumerate() {
            let v: f64 = tok.trim().parse().map_err(|_| Error::NonNumericFeature {
                row: row_idx + 1,
                col,
                value: tok.trim().to_string(),
            })?;
            row.push(v);
        }
        datasets.push(name);
        table.push(row);
    }
    if table.is_empty() {
        return Err(Error::DegenerateInputs("score matrix has no rows".into()));
    }
    Ok((models, datasets, table))
}

fn cmd_stats(args: &StatsArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", args.input.display()),
        ))
    })?;
    let (models, datasets, table) = parse_matrix_csv(&text)?;
    if (args.alpha - 0.05).abs() > 1e-12 && (args.alpha - 0.10).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "alpha must be 0.05 or 0.10, got {}",
            args.alpha
        )));
    }
    let report = build_stats_report(&models, &datasets, &table)?;
    print!("{}", render_stats_text(&report));
    let out_dir = args
        .output_dir
        .clone()
        .or_else(|| std::env::var(OUTPUT_DIR_ENV).ok().filter(|s| !s.is_empty()).map(PathBuf::from));
    if let Some(dir) = out_dir {
        fs::create_dir_all(&dir)?;
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        fs::write(dir.join("stats.json"), json)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_class() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::ConfigMismatch("x".into())), 2);
        assert_eq!(exit_code(&Error::DimensionMismatch("x".into())), 2);
        assert_eq!(exit_code(&Error::MissingHeader), 3);
        assert_eq!(exit_code(&Error::SingleClass), 3);
        assert_eq!(
            exit_code(&Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "gone"
            ))),
            3
        );
        assert_eq!(exit_code(&Error::NumericalFailure("x".into())), 4);
        assert_eq!(exit_code(&Error::SingularPenalty), 4);
    }

    #[test]
    fn config_validation_rules() {
        let mut cfg = RunConfig {
            datasets: vec![DatasetSpec::Path("a.dat".into())],
            variants: vec!["rvfl".into()],
            grids: None,
            folds: 5,
            seeds: vec![0],
            noise_levels: vec![],
            output_dir: None,
            noise_mode: NoiseMode::Fraction,
            alpha: 0.05,
        };
        cfg.validate().unwrap();
        cfg.folds = 1;
        assert!(cfg.validate().is_err());
        cfg.folds = 5;
        cfg.variants = vec!["svm".into()];
        assert!(cfg.validate().is_err());
        cfg.variants = vec![];
        assert!(cfg.validate().is_err());
        cfg.variants = vec!["rvfl".into()];
        cfg.alpha = 0.07;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn dataset_spec_json_forms() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{
                "datasets": [
                    "data/a.dat",
                    {"n_pos": 4, "n_neg": 16, "p": 2, "separation": 2.0, "seed": 1}
                ],
                "variants": ["rvfl", "elm"]
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.datasets.len(), 2);
        assert!(matches!(cfg.datasets[0], DatasetSpec::Path(_)));
        assert!(matches!(cfg.datasets[1], DatasetSpec::Synthetic { .. }));
        assert_eq!(cfg.folds, 5);
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.noise_mode, NoiseMode::Fraction);
    }

    #[test]
    fn matrix_csv_round_trip_and_errors() {
        let (models, names, table) =
            parse_matrix_csv("name,m1,m2\nd1,0.9,0.8\nd2,0.7,0.75\n").unwrap();
        assert_eq!(models, vec!["m1", "m2"]);
        assert_eq!(names, vec!["d1", "d2"]);
        assert_eq!(table[1][1], 0.75);
        assert!(matches!(
            parse_matrix_csv("name,m1\nd1,0.9,0.8\n"),
            Err(Error::ArityMismatch { .. })
        ));
        assert!(matches!(
            parse_matrix_csv("name,m1\nd1,zebra\n"),
            Err(Error::NonNumericFeature { .. })
        ));
        assert!(parse_matrix_csv("").is_err());
    }

    #[test]
    fn amplitude_noise_scales_with_level() {
        let ds = dataset::synth_gaussians(5, 15, 3, 1.0, 2);
        let same = inject_noise_amplitude(&ds, 0.0, 7).unwrap();
        assert_eq!(ds.x.as_slice(), same.x.as_slice());
        let small = inject_noise_amplitude(&ds, 0.05, 7).unwrap();
        let large = inject_noise_amplitude(&ds, 0.5, 7).unwrap();
        let dev_small = (&small.x - &ds.x).amax();
        let dev_large = (&large.x - &ds.x).amax();
        assert!(dev_small > 0.0);
        assert!(dev_large > dev_small);
        assert!(inject_noise_amplitude(&ds, -0.1, 7).is_err());
    }

    #[test]
    fn level_directory_names_are_stable() {
        assert_eq!(format_level(0.0), "0");
        assert_eq!(format_level(0.05), "0.05");
        assert_eq!(format_level(0.3), "0.3");
    }
}
