//! Command-line driver. Exit codes: 0 success, 1 invalid input, 2 numerical
//! failure (a `failure.json` manifest is written to the output directory).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::density::{self, DensityProfile};
use crate::edges::EdgeInfo;
use crate::error::Error;
use crate::measures::AtomicMeasure;
use crate::montecarlo::{self, ComparisonStats, EntryLaw, SimConfig};
use crate::solver::ModelSpec;
use crate::support::{self, SupportReport};

#[derive(Debug, Parser)]
#[command(name = "sepcov", version, about = "Limit spectra of separable sample covariance matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Support intervals, atom at zero and branch samples
    Support(Common),
    /// Density on a grid
    Density {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Polished edges with square-root slopes
    Edges(Common),
    /// Monte Carlo eigenvalues
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Support, edges, density and a simulation comparison in one JSON
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Relative margin around the support for counting outliers
        #[arg(long, default_value_t = 0.05)]
        dilation: f64,
    },
    /// Quantile discretization of a whitespace-separated sample file
    Discretize {
        /// Sample file
        #[arg(long)]
        input: PathBuf,
        /// Number of atoms
        #[arg(long, default_value_t = 8)]
        atoms: usize,
        /// Output JSON path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model config JSON
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for output files
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Number of grid points
    #[arg(long, default_value_t = 2048)]
    pub grid: usize,
    /// Grid start (defaults to just below the support)
    #[arg(long, allow_negative_numbers = true)]
    pub xmin: Option<f64>,
    /// Grid end (defaults to just above the support)
    #[arg(long, allow_negative_numbers = true)]
    pub xmax: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Number of rows N
    #[arg(long = "N", default_value_t = 1000)]
    pub n_rows: usize,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of independent trials
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Distribution of the matrix entries
    #[arg(long, value_enum, default_value_t = EntryLaw::Gaussian)]
    pub entry_law: EntryLaw,
    /// Upper bound on N
    #[arg(long, default_value_t = montecarlo::DEFAULT_MAX_ROWS)]
    pub max_rows: usize,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Numerical(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if is_numerical(&e) {
            Failure::Numerical(e)
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

/// Errors that indicate a numerical breakdown rather than bad input.
pub fn is_numerical(e: &Error) -> bool {
    matches!(
        e,
        Error::PoleHit
            | Error::NoConvergence { .. }
            | Error::PathNoConvergence { .. }
            | Error::InconsistentScan { .. }
            | Error::NoSignChange
            | Error::DegenerateEdge { .. }
            | Error::OffBranch(_)
            | Error::CoverageGap { .. }
    )
}

/// Pretty-printed JSON form of a model. Parsing this text and printing it
/// again reproduces it byte for byte.
pub fn canonical_json(model: &ModelSpec) -> String {
    let mut s = serde_json::to_string_pretty(model).expect("model serializes");
    s.push('\n');
    s
}

pub fn parse_config(text: &str) -> Result<ModelSpec, String> {
    let model: ModelSpec = serde_json::from_str(text).map_err(|e| format!("config: {e}"))?;
    ModelSpec::new(model.c, model.nu, model.nu_tilde).map_err(|e| format!("config: {e}"))
}

fn load(path: &Path) -> Result<ModelSpec, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(Failure::Input)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Input(e.to_string()))?;
    s.push('\n');
    fs::write(dir.join(name), s)?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<fs::File, Failure> {
    Ok(fs::File::create(dir.join(name))?)
}

/// Grid bounds: explicit flags, or the support hull widened by 2%.
fn grid_bounds(report: &SupportReport, g: &GridArgs) -> Result<(f64, f64), Failure> {
    let (lo, hi) = report.hull().ok_or_else(|| Failure::Input("empty support".into()))?;
    let xmin = g.xmin.unwrap_or(if lo > 0.0 { lo * 0.98 } else { hi * 1e-4 });
    let xmax = g.xmax.unwrap_or(hi * 1.02);
    check_grid(xmin, xmax, g.grid)?;
    Ok((xmin, xmax))
}

fn check_grid(xmin: f64, xmax: f64, n: usize) -> Result<(), Failure> {
    if !(xmin > 0.0) {
        return Err(Failure::Input(format!(
            "--xmin {xmin}: the grid must lie in (0, ∞); the atom at 0 is reported separately"
        )));
    }
    if !(xmin < xmax) || !xmax.is_finite() {
        return Err(Failure::Input(format!("--xmin {xmin} must be below --xmax {xmax}")));
    }
    if n < 2 {
        return Err(Failure::Input("--grid must be at least 2".into()));
    }
    Ok(())
}

fn sim_config(model: &ModelSpec, s: &SimArgs) -> SimConfig {
    let mut cfg = SimConfig::new(model.clone(), s.n_rows, s.seed).trials(s.trials).law(s.entry_law);
    cfg.max_rows = s.max_rows;
    cfg.max_entries = cfg.max_entries.max(s.max_rows * s.max_rows);
    cfg
}

#[derive(Serialize)]
struct Report<'a> {
    config: &'a ModelSpec,
    support: &'a SupportReport,
    edges: &'a [EdgeInfo],
    density: &'a DensityProfile,
    comparison: &'a ComparisonStats,
    simulation: SimSummary,
}

#[derive(Serialize)]
struct SimSummary {
    n_rows: usize,
    n_cols: usize,
    seed: u64,
    trials: usize,
    entry_law: EntryLaw,
    zeros_per_trial: Vec<usize>,
}

fn summary(cfg: &SimConfig, spec: &montecarlo::EmpiricalSpectrum) -> SimSummary {
    SimSummary {
        n_rows: cfg.n_rows,
        n_cols: cfg.n_cols(),
        seed: cfg.seed,
        trials: cfg.n_trials,
        entry_law: cfg.entry_law,
        zeros_per_trial: spec.zeros_per_trial(),
    }
}

fn execute(cmd: &Command) -> Result<(), Failure> {
    match cmd {
        Command::Support(c) => {
            let model = load(&c.config)?;
            let report = support::compute_support(&model)?;
            write_json(&c.out_dir, "support.json", &report)?;
            report.write_branches_csv(create(&c.out_dir, "branches.csv")?)?;
        }
        Command::Density { common, grid } => {
            let model = load(&common.config)?;
            let (xmin, xmax) = match (grid.xmin, grid.xmax) {
                (Some(a), Some(b)) => {
                    check_grid(a, b, grid.grid)?;
                    (a, b)
                }
                _ => grid_bounds(&support::compute_support(&model)?, grid)?,
            };
            let prof = density::density_grid(&model, xmin, xmax, grid.grid)?;
            prof.write_csv(create(&common.out_dir, "density.csv")?)?;
        }
        Command::Edges(c) => {
            let model = load(&c.config)?;
            let report = support::compute_support(&model)?;
            write_json(&c.out_dir, "edges.json", &report.edges)?;
        }
        Command::Simulate { common, sim } => {
            let model = load(&common.config)?;
            let cfg = sim_config(&model, sim);
            let spec = montecarlo::simulate(&cfg)?;
            spec.write_csv(create(&common.out_dir, "spectrum.csv")?)?;
            write_json(&common.out_dir, "simulation.json", &summary(&cfg, &spec))?;
        }
        Command::Report {
            common,
            grid,
            sim,
            dilation,
        } => {
            let model = load(&common.config)?;
            let dir = &common.out_dir;
            let report = support::compute_support(&model)?;
            write_json(dir, "support.json", &report)?;
            report.write_branches_csv(create(dir, "branches.csv")?)?;
            write_json(dir, "edges.json", &report.edges)?;
            let (xmin, xmax) = grid_bounds(&report, grid)?;
            let prof = density::density_grid(&model, xmin, xmax, grid.grid)?;
            prof.write_csv(create(dir, "density.csv")?)?;
            let cfg = sim_config(&model, sim);
            let spec = montecarlo::simulate(&cfg)?;
            spec.write_csv(create(dir, "spectrum.csv")?)?;
            let cmp = montecarlo::compare(&spec, &prof, &report, *dilation)?;
            write_json(
                dir,
                "report.json",
                &Report {
                    config: &model,
                    support: &report,
                    edges: &report.edges,
                    density: &prof,
                    comparison: &cmp,
                    simulation: summary(&cfg, &spec),
                },
            )?;
        }
        Command::Discretize { input, atoms, out } => {
            let text = fs::read_to_string(input).map_err(|e| Failure::Input(format!("{}: {e}", input.display())))?;
            let samples = text
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Failure::Input(format!("{t}: {e}"))))
                .collect::<Result<Vec<f64>, Failure>>()?;
            let m = AtomicMeasure::from_samples(&samples, *atoms)?;
            let mut s = serde_json::to_string_pretty(&m).map_err(|e| Failure::Input(e.to_string()))?;
            s.push('\n');
            match out {
                Some(p) => fs::write(p, s)?,
                None => std::io::stdout().write_all(s.as_bytes())?,
            }
        }
    }
    Ok(())
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Support(_) => "support",
        Command::Density { .. } => "density",
        Command::Edges(_) => "edges",
        Command::Simulate { .. } => "simulate",
        Command::Report { .. } => "report",
        Command::Discretize { .. } => "discretize",
    }
}

fn out_dir(cmd: &Command) -> Option<&Path> {
    match cmd {
        Command::Support(c) | Command::Edges(c) => Some(&c.out_dir),
        Command::Density { common, .. } | Command::Simulate { common, .. } | Command::Report { common, .. } => {
            Some(&common.out_dir)
        }
        Command::Discretize { .. } => None,
    }
}

#[derive(Serialize)]
struct FailureManifest<'a> {
    command: &'a str,
    error: String,
    detail: String,
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(dir) = out_dir(&cli.command) {
        if let Err(e) = fs::create_dir_all(dir) {
            eprintln!("error: {}: {e}", dir.display());
            return 1;
        }
    }
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Numerical(err)) => {
            eprintln!("numerical failure: {err}");
            if let Some(dir) = out_dir(&cli.command) {
                let manifest = FailureManifest {
                    command: command_name(&cli.command),
                    error: err.to_string(),
                    detail: format!("{err:?}"),
                };
                let _ = write_json(dir, "failure.json", &manifest);
            }
            2
        }
    }
}
