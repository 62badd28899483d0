//! Command-line front end: `fit`, `simulate` and `diagnose`.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 the MLE fit did not
//! converge.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::chart::mse_chart;
use crate::data::{dataset_from_table, read_table, DataError};
use crate::irls::{fit_mle, IrlsOptions};
use crate::linalg::{condition_number, correlation_matrix, symmetric_eigen};
use crate::liu::DChoice;
use crate::report::{build_report, EstimatorKind, FitRequest};
use crate::simulation::{run_grid_with_workers, CellResult, SimulationGrid};

/// Environment variable that overrides the configured master seed.
pub const SEED_ENV: &str = "LIU_MNL_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    Model(#[from] crate::Error),

    #[error("cannot write `{path}`: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("invalid config `{path}`: {reason}")]
    Config { path: PathBuf, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(crate::Error::Separation { .. }) => 2,
            _ => 1,
        }
    }
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    NotConverged,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::NotConverged => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "liu-mnl", version, about = "Multinomial logistic regression with Liu shrinkage")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the MLE (and optionally the Liu estimator) to a CSV dataset.
    Fit(FitArgs),
    /// Run the Monte Carlo MSE study described by a JSON config.
    Simulate(SimulateArgs),
    /// Print correlation and condition-number diagnostics.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Mle,
    Liu,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub response: String,
    /// Reference level; `last` selects the lexicographically last level.
    #[arg(long, default_value = "last")]
    pub reference: String,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Liu)]
    pub estimator: EstimatorArg,
    /// `d1`, `d2`, `d3` or `fixed:<value>`.
    #[arg(long, default_value = "d3")]
    pub d_rule: DChoice,
    /// Prepend a column of ones.
    #[arg(long)]
    pub intercept: bool,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Where the JSON report is written.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON grid; absent fields take their defaults.
    #[arg(long)]
    pub config: PathBuf,
    /// CSV destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: all available cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Directory for the SVG charts (default: next to the CSV).
    #[arg(long)]
    pub charts: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Response column; when given, the MLE is fitted and each category's
    /// weighted cross-product is diagnosed too.
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long, default_value = "last")]
    pub reference: String,
    #[arg(long)]
    pub intercept: bool,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Diagnose(a) => cmd_diagnose(&a, out),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

fn stdout_err(source: io::Error) -> CliError {
    CliError::Write { path: PathBuf::from("<stdout>"), source }
}

pub fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let table = read_table(&args.input)?;
    let data = dataset_from_table(&table, &args.response, Some(&args.reference), args.intercept)?;
    let options = IrlsOptions { max_iter: args.max_iter, tol: args.tol, ..Default::default() };
    let fit = fit_mle(&data, &options)?;
    let request = FitRequest {
        response: args.response.clone(),
        estimator: match args.estimator {
            EstimatorArg::Mle => EstimatorKind::Mle,
            EstimatorArg::Liu => EstimatorKind::Liu,
        },
        d_rule: args.d_rule,
        intercept: args.intercept,
        options,
    };
    let report = build_report(&data, &fit, &request)?;
    write_file(&args.output, report.to_json().as_bytes())?;
    out.write_all(report.render_table().as_bytes()).map_err(stdout_err)?;
    Ok(if fit.converged { Outcome::Success } else { Outcome::NotConverged })
}

/// Parses a simulation config, applying the seed override when set.
pub fn load_grid(path: &Path, seed_override: Option<&str>) -> Result<SimulationGrid, CliError> {
    let config_err = |reason: String| CliError::Config { path: path.to_path_buf(), reason };
    let text = fs::read_to_string(path).map_err(|e| config_err(e.to_string()))?;
    let mut grid: SimulationGrid = serde_json::from_str(&text).map_err(|e| config_err(e.to_string()))?;
    if let Some(s) = seed_override {
        grid.master_seed =
            s.trim().parse().map_err(|_| config_err(format!("{SEED_ENV}=`{s}` is not a 64-bit unsigned integer")))?;
    }
    grid.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(grid)
}

#[derive(Serialize)]
struct CsvRow {
    rho: f64,
    p: usize,
    n: usize,
    estimator: String,
    mse: f64,
    replications: usize,
    failed: usize,
    master_seed: u64,
}

/// Simulation results as CSV text, one row per cell and estimator.
pub fn results_csv(results: &[CellResult]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in results {
        for &(est, mse) in &c.mse {
            w.serialize(CsvRow {
                rho: c.cell.rho,
                p: c.cell.p,
                n: c.cell.n,
                estimator: est.name().to_string(),
                mse,
                replications: c.replications,
                failed: c.failed_replications,
                master_seed: c.seed_trace.master_seed,
            })?;
        }
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

#[derive(Serialize)]
struct Metadata<'a> {
    grid: &'a SimulationGrid,
    notes: Vec<&'static str>,
}

const SIMULATION_NOTES: [&str; 3] = [
    "m (number of response categories) is a configurable default",
    "every non-reference category shares the same true coefficient vector",
    "replications counts successful fits; failed fits are excluded from every estimator's average",
];

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let seed = std::env::var(SEED_ENV).ok();
    let grid = load_grid(&args.config, seed.as_deref())?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty() && !d.is_dir()) {
        return Err(CliError::Write {
            path: args.out.clone(),
            source: io::Error::new(io::ErrorKind::NotFound, format!("directory `{}` does not exist", dir.display())),
        });
    }
    let workers = args.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let results = run_grid_with_workers(&grid, workers)?;

    let csv = results_csv(&results).map_err(|e| CliError::Write {
        path: args.out.clone(),
        source: io::Error::other(e),
    })?;
    write_file(&args.out, &csv)?;
    let meta = Metadata { grid: &grid, notes: SIMULATION_NOTES.to_vec() };
    let meta = serde_json::to_string_pretty(&meta).expect("metadata is always serializable");
    write_file(&sidecar_path(&args.out), meta.as_bytes())?;

    let chart_dir = match &args.charts {
        Some(d) => d.clone(),
        None => args.out.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    if !chart_dir.as_os_str().is_empty() {
        fs::create_dir_all(&chart_dir).map_err(|source| CliError::Write { path: chart_dir.clone(), source })?;
    }
    let stem = args.out.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    let mut charts = 0;
    for &p in &grid.ps {
        if let Some(svg) = mse_chart(&results, p) {
            write_file(&chart_dir.join(format!("{stem}_p{p}.svg")), svg.as_bytes())?;
            charts += 1;
        }
    }

    let failed: usize = results.iter().map(|c| c.failed_replications).sum();
    writeln!(
        out,
        "{} cells, {} rows written to {}; {charts} charts; {failed} failed replications",
        results.len(),
        results.iter().map(|c| c.mse.len()).sum::<usize>(),
        args.out.display()
    )
    .map_err(stdout_err)?;
    Ok(Outcome::Success)
}

/// Severity label for a condition number.
pub fn collinearity_flag(cn: f64) -> Option<&'static str> {
    if cn > 30.0 {
        Some("strong multicollinearity")
    } else if cn > 10.0 {
        Some("moderate multicollinearity")
    } else {
        None
    }
}

fn cn_line(label: &str, cn: f64) -> String {
    match collinearity_flag(cn) {
        Some(flag) => format!("{label} = {cn:.4}  [{flag}]"),
        None => format!("{label} = {cn:.4}"),
    }
}

/// Correlation matrix in a labelled grid with four decimals.
pub fn render_correlation(names: &[String], r: &crate::linalg::Matrix) -> String {
    let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(7) + 1;
    let mut s = format!("{:<width$}", "");
    for n in names {
        let _ = write!(s, "{n:>width$}");
    }
    s.push('\n');
    for (i, n) in names.iter().enumerate() {
        let _ = write!(s, "{n:<width$}");
        for j in 0..names.len() {
            let _ = write!(s, "{:>width$.4}", r[(i, j)]);
        }
        s.push('\n');
    }
    s
}

pub fn cmd_diagnose(args: &DiagnoseArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let table = read_table(&args.input)?;
    let exclude = args.response.as_deref().map(|r| table.column_index(r)).transpose()?;
    let (x, names) = table.numeric_columns(exclude)?;
    let corr = correlation_matrix(&x)?;

    let mut s = String::from("Correlation matrix of the covariates:\n");
    s.push_str(&render_correlation(&names, corr.matrix()));
    let _ = writeln!(s, "{}", cn_line("CN", condition_number(&corr)?));

    let mut outcome = Outcome::Success;
    if let Some(response) = &args.response {
        let data = dataset_from_table(&table, response, Some(&args.reference), args.intercept)?;
        let fit = fit_mle(&data, &IrlsOptions::default())?;
        if !fit.converged {
            outcome = Outcome::NotConverged;
            let _ = writeln!(s, "\nwarning: the MLE did not converge within {} iterations", fit.iterations);
        }
        let _ = writeln!(s, "\nWeighted cross-products (reference `{}`):", data.reference());
        for (j, c) in fit.weighted_crossprods.iter().enumerate() {
            let eig = symmetric_eigen(c)?;
            let ev: Vec<String> = eig.eigenvalues.iter().map(|v| format!("{v:.6e}")).collect();
            let _ = writeln!(s, "  {}: eigenvalues {}", fit.coeffs.category_order[j], ev.join(" "));
            let _ = writeln!(s, "  {}", cn_line(&format!("CN{}", j + 1), condition_number(c)?));
        }
    }
    out.write_all(s.as_bytes()).map_err(stdout_err)?;
    Ok(outcome)
}
