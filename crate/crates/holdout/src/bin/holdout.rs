//! Command-line interface: anchor estimation, curve fitting, optimal-m
//! analysis, frontier sweeps, implicit-sigma2 tables, and simulation
//! experiments, with TOML config files mirroring every flag and
//! machine-readable JSON/CSV reports.
//!
//! Exit codes: 0 success, 1 usage or IO error, 2 infeasible-sigma2 analysis
//! (soft; reports are still written), 3 invariant violation in `--check` mode.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::{Deserialize, Serialize};

use holdout::curve::{
    fit_power_curve, BoundMode, LossCurve, Noise, Symmetry,
};
use holdout::cv::{estimate_anchors, LossAnchors, DEFAULT_K_REF};
use holdout::dataset::{load_csv, CategoricalPolicy};
use holdout::models::PredictorSpec;
use holdout::optimizer::{
    implicit_sigma2, log_grid, optimal_m, pareto_frontier, sigma2_upper_bound, OptimalSplit,
    ParetoPoint,
};
use holdout::report::{
    curve_table, frontier_table, implicit_sigma_table, kfold_table, split_table, write_csv_atomic,
    write_json_atomic, Report,
};
use holdout::rng::RngStream;
use holdout::sim::{
    default_beta, run_kfold_experiment, run_split_experiment, DgpConfig, KfoldVarianceReport,
    NoiseKind, SplitVarianceReport,
};

const DEFAULT_SEED: u64 = 0;
const DEFAULT_SIGMA2: f64 = 1.0;
const DEFAULT_REPS: usize = 500;
const DEFAULT_PARTITIONS: usize = 100;
const IMPLICIT_TOLERANCE: f64 = 1e-6;
const CONVENTIONAL_K: [usize; 4] = [4, 5, 10, 20];

/// Select the hold-out size for cross-validation from loss anchors, and run
/// the supporting variance simulations.
#[derive(Debug, Parser)]
#[command(name = "holdout", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Subcommand)]
enum Command {
    /// Estimate anchors, fit the loss curve, and report optimal m per sigma2.
    Analyze(Opts),
    /// Sweep sigma2 over a grid and report the Pareto frontier of optimal m.
    Frontier(Opts),
    /// Invert the frontier: the sigma2 under which each K would be optimal.
    ImplicitSigma(Opts),
    /// Run the Monte-Carlo variance experiments (split or kfold).
    Simulate(Opts),
}

/// All flags; a TOML config file (--config) carries the same keys and flags
/// override it.
#[derive(Debug, Clone, Default, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct Opts {
    /// TOML config file whose keys mirror these flags one-to-one.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,

    /// CSV dataset path (header row required).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Name of the numeric target column in --data.
    #[arg(long)]
    target: Option<String>,
    /// Model: "ols" (default) or "rf".
    #[arg(long)]
    model: Option<String>,
    /// Bypass training: comma triple "l_loo,l_kref,l_lmo" of anchor losses.
    #[arg(long)]
    anchors: Option<String>,
    /// Dataset size N (required with --anchors; simulation n_rows).
    #[arg(long)]
    n: Option<usize>,
    /// RNG seed (default 0); recorded in every report.
    #[arg(long)]
    seed: Option<u64>,
    /// Bound symmetry: "symmetric" (C=4, default) or "asymmetric" (C=16).
    #[arg(long)]
    bound: Option<String>,
    /// Worst-case per-observation variance for the heteroskedastic bound.
    #[arg(long)]
    sigma_max: Option<f64>,
    /// Subsample size for the LOOCV anchor (refit models only).
    #[arg(long)]
    loocv_subsample: Option<usize>,
    /// Comma list of sigma2 values (analyze) or the noise level (simulate).
    #[arg(long)]
    sigma2: Option<String>,
    /// Log-spaced sigma2 grid "min:max:count" for the frontier sweep.
    #[arg(long)]
    sigma2_grid: Option<String>,
    /// Comma list of fold counts K.
    #[arg(long)]
    k: Option<String>,
    /// Comma list of hold-out sizes m for the split experiment.
    #[arg(long)]
    m: Option<String>,
    /// Simulation experiment: "split" or "kfold".
    #[arg(long)]
    experiment: Option<String>,
    /// Simulation noise family: "gaussian" (default), "hetero", or "gamma".
    #[arg(long)]
    noise: Option<String>,
    /// Monte-Carlo repetitions (default 500).
    #[arg(long)]
    reps: Option<usize>,
    /// Partition redraws per fixed y for the nested-CV column (default 100).
    #[arg(long)]
    partitions: Option<usize>,
    /// Fail (exit 3) if a variance bound is violated beyond 3 MC standard
    /// errors in the simulation report.
    #[arg(long)]
    #[serde(deserialize_with = "de_flag", serialize_with = "ser_flag")]
    check: bool,
    /// JSON report output path.
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// CSV table output path.
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

fn de_flag<'de, D: serde::Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    Option::<bool>::deserialize(d).map(|v| v.unwrap_or(false))
}

fn ser_flag<S: serde::Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_bool(*v)
}

/// Errors carrying the process exit code.
#[derive(Debug)]
struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 1,
        }
    }
}

impl From<holdout::Error> for CliError {
    fn from(e: holdout::Error) -> Self {
        CliError::usage(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successes; everything else is usage.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Analyze(opts) => run(opts, "analyze", cmd_analyze),
        Command::Frontier(opts) => run(opts, "frontier", cmd_frontier),
        Command::ImplicitSigma(opts) => run(opts, "implicit-sigma", cmd_implicit_sigma),
        Command::Simulate(opts) => run(opts, "simulate", cmd_simulate),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(opts: Opts, name: &str, f: fn(&Opts, &str) -> CliResult<u8>) -> CliResult<u8> {
    let opts = merge_config(opts)?;
    f(&opts, name)
}

/// Load the TOML config file (if any) and fill unset flags from it.
fn merge_config(cli: Opts) -> CliResult<Opts> {
    let Some(path) = cli.config.clone() else {
        return Ok(cli);
    };
    let body = std::fs::read_to_string(&path)
        .map_err(|e| CliError::usage(format!("failed to read {}: {e}", path.display())))?;
    let file: Opts = toml::from_str(&body)
        .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))?;
    Ok(Opts {
        config: cli.config,
        data: cli.data.or(file.data),
        target: cli.target.or(file.target),
        model: cli.model.or(file.model),
        anchors: cli.anchors.or(file.anchors),
        n: cli.n.or(file.n),
        seed: cli.seed.or(file.seed),
        bound: cli.bound.or(file.bound),
        sigma_max: cli.sigma_max.or(file.sigma_max),
        loocv_subsample: cli.loocv_subsample.or(file.loocv_subsample),
        sigma2: cli.sigma2.or(file.sigma2),
        sigma2_grid: cli.sigma2_grid.or(file.sigma2_grid),
        k: cli.k.or(file.k),
        m: cli.m.or(file.m),
        experiment: cli.experiment.or(file.experiment),
        noise: cli.noise.or(file.noise),
        reps: cli.reps.or(file.reps),
        partitions: cli.partitions.or(file.partitions),
        check: cli.check || file.check,
        out_json: cli.out_json.or(file.out_json),
        out_csv: cli.out_csv.or(file.out_csv),
    })
}

fn parse_f64_list(text: &str, flag: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("invalid number {t:?} in {flag}")))
        })
        .collect()
}

fn parse_usize_list(text: &str, flag: &str) -> CliResult<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("invalid integer {t:?} in {flag}")))
        })
        .collect()
}

/// Parse "min:max:count" into a log-spaced grid.
fn parse_sigma2_grid(text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::usage(format!(
            "--sigma2-grid expects min:max:count, got {text:?}"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::usage("invalid grid min"))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::usage("invalid grid max"))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| CliError::usage("invalid grid count"))?;
    // partial_cmp so NaN endpoints are rejected too.
    if lo.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
        || matches!(hi.partial_cmp(&lo), None | Some(std::cmp::Ordering::Less))
        || count < 1
    {
        return Err(CliError::usage(
            "--sigma2-grid needs 0 < min <= max and count >= 1",
        ));
    }
    Ok(log_grid(lo, hi, count))
}

fn predictor_spec(opts: &Opts, seed: u64) -> CliResult<PredictorSpec> {
    match opts.model.as_deref().unwrap_or("ols") {
        "ols" => Ok(PredictorSpec::Ols),
        "rf" => Ok(PredictorSpec::default_forest(seed)),
        other => Err(CliError::usage(format!(
            "unknown --model {other:?}; expected \"ols\" or \"rf\""
        ))),
    }
}

fn bound_mode(opts: &Opts, sigma2: f64) -> CliResult<BoundMode> {
    let symmetry = match opts.bound.as_deref().unwrap_or("symmetric") {
        "symmetric" => Symmetry::Symmetric,
        "asymmetric" => Symmetry::Asymmetric,
        other => {
            return Err(CliError::usage(format!(
                "unknown --bound {other:?}; expected \"symmetric\" or \"asymmetric\""
            )))
        }
    };
    let noise = match opts.sigma_max {
        Some(sigma2_max) if sigma2_max >= sigma2 => Noise::Heteroskedastic { sigma2, sigma2_max },
        Some(sigma2_max) => {
            return Err(CliError::usage(format!(
                "--sigma-max {sigma2_max} must be >= sigma2 {sigma2}"
            )))
        }
        None => Noise::Homoskedastic { sigma2 },
    };
    Ok(BoundMode { symmetry, noise })
}

/// Curve inputs: either --anchors l1,l2,l3 with --n, or --data/--target.
fn build_curve(opts: &Opts, seed: u64) -> CliResult<(LossCurve, LossAnchors)> {
    let anchors = if let Some(text) = &opts.anchors {
        let values = parse_f64_list(text, "--anchors")?;
        if values.len() != 3 {
            return Err(CliError::usage(
                "--anchors expects exactly three losses: l_loo,l_kref,l_lmo",
            ));
        }
        let n = opts
            .n
            .ok_or_else(|| CliError::usage("--anchors requires --n (dataset size)"))?;
        LossAnchors::new(values[0], values[1], values[2], DEFAULT_K_REF, n)?
    } else {
        let data_path = opts
            .data
            .as_ref()
            .ok_or_else(|| CliError::usage("either --anchors or --data is required"))?;
        let target = opts
            .target
            .as_ref()
            .ok_or_else(|| CliError::usage("--data requires --target"))?;
        let dataset = load_csv(data_path, target, CategoricalPolicy::OneHotDropFirst)?;
        let spec = predictor_spec(opts, seed)?;
        let mut rng = RngStream::new(seed);
        estimate_anchors(&spec, &dataset, DEFAULT_K_REF, opts.loocv_subsample, &mut rng)?
    };
    let curve = fit_power_curve(&anchors)?;
    Ok((curve, anchors))
}

fn config_json(opts: &Opts) -> serde_json::Value {
    serde_json::to_value(opts).expect("flags serialize")
}

fn write_outputs<T: Serialize>(
    opts: &Opts,
    report: &Report<T>,
    csv: Option<&holdout::report::CsvTable>,
) -> CliResult<()> {
    if let Some(path) = &opts.out_json {
        write_json_atomic(path, report)?;
    }
    if let (Some(path), Some(table)) = (&opts.out_csv, csv) {
        write_csv_atomic(path, table)?;
    }
    if opts.out_json.is_none() {
        // No file requested: print the JSON report to stdout.
        println!(
            "{}",
            serde_json::to_string_pretty(report)
                .map_err(|e| CliError::usage(format!("serialization failed: {e}")))?
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct AnalyzeResults {
    anchors: LossAnchors,
    exponent: f64,
    scale: f64,
    beta: f64,
    alpha: f64,
    n: usize,
    per_sigma2: Vec<OptimalSplit>,
}

fn cmd_analyze(opts: &Opts, name: &str) -> CliResult<u8> {
    let start = Instant::now();
    let seed = opts.seed.unwrap_or(DEFAULT_SEED);
    let (curve, anchors) = build_curve(opts, seed)?;
    let power = curve.power().expect("power fit");
    let sigma2_list = match &opts.sigma2 {
        Some(text) => parse_f64_list(text, "--sigma2")?,
        None => vec![DEFAULT_SIGMA2],
    };
    if sigma2_list.is_empty() {
        return Err(CliError::usage("--sigma2 list is empty"));
    }
    let mode = bound_mode(opts, sigma2_list[0])?;
    let per_sigma2: Vec<OptimalSplit> = sigma2_list
        .iter()
        .map(|&s2| optimal_m(&curve, s2, &mode))
        .collect();
    let any_infeasible = per_sigma2.iter().any(|r| !r.feasible);

    let results = AnalyzeResults {
        anchors,
        exponent: power.exponent,
        scale: power.scale,
        beta: power.beta,
        alpha: power.alpha,
        n: curve.n(),
        per_sigma2,
    };
    let report = Report::new(
        name,
        config_json(opts),
        seed,
        start.elapsed().as_secs_f64(),
        results,
    );
    let table = curve_table(&curve, &mode);
    write_outputs(opts, &report, Some(&table))?;
    Ok(if any_infeasible { 2 } else { 0 })
}

#[derive(Debug, Serialize)]
struct KLine {
    k: usize,
    /// sigma2 range over which the frontier's nearest implied K equals k.
    sigma2_lo: Option<f64>,
    sigma2_hi: Option<f64>,
}

#[derive(Debug, Serialize)]
struct FrontierResults {
    sigma2_upper_bound: f64,
    points: Vec<ParetoPoint>,
    k_lines: Vec<KLine>,
}

fn cmd_frontier(opts: &Opts, name: &str) -> CliResult<u8> {
    let start = Instant::now();
    let seed = opts.seed.unwrap_or(DEFAULT_SEED);
    let (curve, _) = build_curve(opts, seed)?;
    let mode = bound_mode(opts, DEFAULT_SIGMA2)?;
    let upper = sigma2_upper_bound(&curve, &mode, IMPLICIT_TOLERANCE)?;
    let grid = match &opts.sigma2_grid {
        Some(text) => parse_sigma2_grid(text)?,
        // Default: the rising branch of the frontier, where m* is monotone.
        None => log_grid(1e-3_f64.min(upper / 2.0), upper, 60),
    };
    let points = pareto_frontier(&curve, &grid, &mode);
    let k_lines = CONVENTIONAL_K
        .iter()
        .map(|&k| {
            let hits: Vec<f64> = points
                .iter()
                .filter(|p| p.feasible && p.implied_k.round() as usize == k)
                .map(|p| p.sigma2)
                .collect();
            KLine {
                k,
                sigma2_lo: hits.first().copied(),
                sigma2_hi: hits.last().copied(),
            }
        })
        .collect();
    let any_infeasible = points.iter().any(|p| !p.feasible);
    let results = FrontierResults {
        sigma2_upper_bound: upper,
        points: points.clone(),
        k_lines,
    };
    let report = Report::new(
        name,
        config_json(opts),
        seed,
        start.elapsed().as_secs_f64(),
        results,
    );
    let table = frontier_table(&points);
    write_outputs(opts, &report, Some(&table))?;
    Ok(if any_infeasible { 2 } else { 0 })
}

#[derive(Debug, Serialize)]
struct ImplicitRow {
    k: usize,
    m_k: usize,
    implicit_sigma2: Option<f64>,
}

fn cmd_implicit_sigma(opts: &Opts, name: &str) -> CliResult<u8> {
    let start = Instant::now();
    let seed = opts.seed.unwrap_or(DEFAULT_SEED);
    let (curve, _) = build_curve(opts, seed)?;
    let mode = bound_mode(opts, DEFAULT_SIGMA2)?;
    let k_list = match &opts.k {
        Some(text) => parse_usize_list(text, "--k")?,
        None => CONVENTIONAL_K.to_vec(),
    };
    let mut rows = Vec::with_capacity(k_list.len());
    for k in k_list {
        let implicit = match implicit_sigma2(&curve, k, &mode, IMPLICIT_TOLERANCE) {
            Ok(value) => value,
            // Domain-edge K (m_K outside the curve) is an infeasible row,
            // not a hard failure.
            Err(holdout::Error::HoldOutSizeOutOfRange { .. })
            | Err(holdout::Error::FoldCountOutOfRange { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        rows.push(ImplicitRow {
            k,
            m_k: curve.n() / k,
            implicit_sigma2: implicit,
        });
    }
    let any_infeasible = rows.iter().any(|r| r.implicit_sigma2.is_none());
    let table = implicit_sigma_table(
        &rows
            .iter()
            .map(|r| (r.k, r.m_k, r.implicit_sigma2))
            .collect::<Vec<_>>(),
    );
    let report = Report::new(
        name,
        config_json(opts),
        seed,
        start.elapsed().as_secs_f64(),
        rows,
    );
    write_outputs(opts, &report, Some(&table))?;
    Ok(if any_infeasible { 2 } else { 0 })
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum SimResults {
    Split(SplitVarianceReport),
    Kfold(KfoldVarianceReport),
}

fn cmd_simulate(opts: &Opts, name: &str) -> CliResult<u8> {
    let start = Instant::now();
    let seed = opts.seed.unwrap_or(DEFAULT_SEED);
    let noise_kind = match opts.noise.as_deref().unwrap_or("gaussian") {
        "gaussian" => NoiseKind::Gaussian,
        "hetero" => NoiseKind::Heteroskedastic,
        "gamma" => NoiseKind::GammaCentered,
        other => {
            return Err(CliError::usage(format!(
                "unknown --noise {other:?}; expected gaussian, hetero, or gamma"
            )))
        }
    };
    let sigma2 = match &opts.sigma2 {
        Some(text) => {
            let values = parse_f64_list(text, "--sigma2")?;
            if values.len() != 1 {
                return Err(CliError::usage("simulate takes a single --sigma2 value"));
            }
            values[0]
        }
        None => DEFAULT_SIGMA2,
    };
    let n_rows = opts.n.unwrap_or(400);
    let n_features = 10.min(n_rows.saturating_sub(2).max(1));
    let config = DgpConfig {
        n_rows,
        n_features,
        beta: default_beta(n_features),
        noise_kind,
        sigma2,
        seed,
    };
    let reps = opts.reps.unwrap_or(DEFAULT_REPS);
    let rng = RngStream::new(seed);

    let (results, violations) = match opts.experiment.as_deref().unwrap_or("split") {
        "split" => {
            let m_grid = match &opts.m {
                Some(text) => parse_usize_list(text, "--m")?,
                None => vec![10, 20, 40, 80, 160],
            };
            let report = run_split_experiment(&config, &m_grid, reps, &rng)?;
            let violations = split_check(&report);
            (SimResults::Split(report), violations)
        }
        "kfold" => {
            let k_grid = match &opts.k {
                Some(text) => parse_usize_list(text, "--k")?,
                None => vec![2, 4, 5, 8, 10, 20],
            };
            let partitions = opts.partitions.unwrap_or(DEFAULT_PARTITIONS);
            let report = run_kfold_experiment(&config, &k_grid, reps, partitions, &rng)?;
            let violations = kfold_check(&report);
            (SimResults::Kfold(report), violations)
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown --experiment {other:?}; expected \"split\" or \"kfold\""
            )))
        }
    };

    let report = Report::new(
        name,
        config_json(opts),
        seed,
        start.elapsed().as_secs_f64(),
        &results,
    );
    let table = match &results {
        SimResults::Split(r) => split_table(r),
        SimResults::Kfold(r) => kfold_table(r),
    };
    write_outputs(opts, &report, Some(&table))?;

    if opts.check && !violations.is_empty() {
        for v in &violations {
            eprintln!("check failed: {v}");
        }
        return Ok(3);
    }
    Ok(0)
}

/// Bound invariant for the split experiment: empirical variance must not
/// exceed the bound by more than 3 MC standard errors.
fn split_check(report: &SplitVarianceReport) -> Vec<String> {
    report
        .rows
        .iter()
        .filter(|row| row.empirical_variance - 3.0 * row.variance_mc_se > row.bound)
        .map(|row| {
            format!(
                "m={}: empirical variance {:.6e} exceeds bound {:.6e} beyond 3 MC SE",
                row.m, row.empirical_variance, row.bound
            )
        })
        .collect()
}

/// K-fold invariants: the raw single-split bound (with the noise-appropriate
/// C) dominates the true variance, and fold averaging never increases the
/// variance past the worst single fold.
fn kfold_check(report: &KfoldVarianceReport) -> Vec<String> {
    let mut violations = Vec::new();
    for row in &report.rows {
        let raw_bound = match report.config.noise_kind {
            NoiseKind::GammaCentered => row.bound_raw_c16,
            _ => row.bound_raw_c4,
        };
        if row.true_mc_variance_pure - 3.0 * row.pure_variance_mc_se > raw_bound {
            violations.push(format!(
                "K={}: true variance {:.6e} exceeds raw bound {:.6e} beyond 3 MC SE",
                row.k, row.true_mc_variance_pure, raw_bound
            ));
        }
        if row.true_mc_variance_pure - 3.0 * row.max_single_fold_variance_mc_se
            > row.max_single_fold_variance_pure
        {
            violations.push(format!(
                "K={}: fold-average variance {:.6e} exceeds max single-fold variance {:.6e}",
                row.k, row.true_mc_variance_pure, row.max_single_fold_variance_pure
            ));
        }
    }
    violations
}
