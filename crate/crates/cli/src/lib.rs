//! The `riskattr` command line.
//!
//! Exit codes: 0 on success, 1 when `--fail-on-violation` is set and an
//! audit report is violated, 2 on usage or input errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use riskattr::records::RateUnit;
use riskattr::{Error, Result};

mod commands;
pub mod inputs;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "riskattr",
    version,
    about = "Attribution and risk-axiom audits for asset-pricing models"
)]
pub struct Cli {
    /// Seed for data generation and training.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Unit of `r` in command-line vectors and grids [default: percent for
    /// option models, decimal otherwise].
    #[arg(long, global = true)]
    pub rates: Option<RateUnit>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a model at one point.
    Price(PriceArgs),
    /// Train an MLP surrogate on option records and write it as JSON.
    Train(TrainArgs),
    /// Attribute a price change between a baseline and an explicand.
    Attribute(AttributeArgs),
    /// Run axiom checks and write a report bundle.
    Audit(AuditArgs),
    /// Model-free volatility index from an option chain CSV.
    Vix(VixArgs),
    /// Fit a training domain to sample points and write it as JSON.
    Domain(DomainArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// bond, bsm-call, bsm-put, or the path of a surrogate JSON file.
    #[arg(long)]
    pub model: String,

    /// Model parameter NAME=VALUE, e.g. T=10 for the bond maturity.
    #[arg(long = "param")]
    pub params: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Comma-separated feature values in model order.
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Option-record CSV; synthetic BSM records are generated when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Option kind to train on (records of the other kind are dropped).
    #[arg(long, default_value = "call")]
    pub kind: String,

    /// Number of synthetic records.
    #[arg(long, default_value_t = 2000)]
    pub synthetic: usize,

    /// Hidden layer widths.
    #[arg(long, default_value = "32,16")]
    pub hidden: String,

    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,

    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,

    /// cg or gd.
    #[arg(long, default_value = "cg")]
    pub optimizer: String,

    /// Fraction of records used for training.
    #[arg(long, default_value_t = 0.75)]
    pub split: f64,

    /// Where to write the model JSON.
    #[arg(long)]
    pub out: PathBuf,

    /// Also write the training records as CSV.
    #[arg(long)]
    pub save_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Baseline vector; defaults to the first-date mean of `--data`.
    #[arg(long, allow_hyphen_values = true)]
    pub baseline: Option<String>,

    /// Explicand vector; alternatively `--data` with `--row`.
    #[arg(long, allow_hyphen_values = true)]
    pub explicand: Option<String>,

    /// Option-record CSV supplying the default baseline and `--row`.
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// 1-based data row to use as the explicand.
    #[arg(long)]
    pub row: Option<usize>,

    /// Integrated-gradients quadrature, RULE[:POINTS].
    #[arg(long, default_value = "trapezoid:256")]
    pub quadrature: String,

    /// Re-run IG at twice the node count and report the change.
    #[arg(long)]
    pub refine_check: bool,
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub pair: PairArgs,

    /// Comma-separated methods: bshap, ig.
    #[arg(long, default_value = "bshap,ig")]
    pub methods: String,

    /// Result JSON path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Plot-data CSV with columns method,feature,attribution.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub pair: PairArgs,

    /// Comma-separated axioms: aim, dim, dme, rdme, ime, fmd, gd, cg.
    #[arg(long)]
    pub axiom: String,

    /// Comma-separated methods: bshap, ig.
    #[arg(long, default_value = "bshap,ig")]
    pub method: String,

    /// Explicand grid NAME:LO:HI:COUNT or NAME=V1,V2,... (repeatable); the
    /// explicand supplies the other coordinates.
    #[arg(long = "grid")]
    pub grids: Vec<String>,

    /// DIM increments; consecutive grid values are compared when absent.
    #[arg(long)]
    pub deltas: Option<String>,

    #[arg(long, default_value_t = 1e-8)]
    pub tol_abs: f64,

    #[arg(long, default_value_t = 1e-6)]
    pub tol_rel: f64,

    /// Second model for FMD, with the same feature layout.
    #[arg(long)]
    pub compare_model: Option<String>,

    #[arg(long = "compare-param")]
    pub compare_params: Vec<String>,

    /// Feature tested by GD; a name the model lacks is appended as an
    /// ignored feature (vectors then carry one extra trailing value).
    #[arg(long)]
    pub dummy: Option<String>,

    /// Training-domain JSON for CG.
    #[arg(long)]
    pub domain: Option<PathBuf>,

    /// Report bundle path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Exit with status 1 if any report is violated.
    #[arg(long)]
    pub fail_on_violation: bool,
}

#[derive(Debug, Args)]
pub struct VixArgs {
    /// CSV with columns K, put, call; puts are used at or below the forward
    /// and calls above it.
    #[arg(long)]
    pub chain: PathBuf,

    #[arg(long)]
    pub forward: f64,

    /// Risk-free rate (decimal unless `--rates percent`).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub rate: f64,

    /// Horizon in years.
    #[arg(long, default_value_t = 30.0 / 365.0)]
    pub tau: f64,
}

#[derive(Debug, Args)]
pub struct DomainArgs {
    /// CSV of sample points (an option-record file or any numeric table).
    #[arg(long, conflicts_with = "leverage")]
    pub data: Option<PathBuf>,

    /// Generate this many leverage-effect points (S, sigma) instead.
    #[arg(long)]
    pub leverage: Option<usize>,

    #[arg(long, default_value = "700:1500")]
    pub s_range: String,

    #[arg(long, default_value = "0.15:0.9")]
    pub sigma_range: String,

    /// Spearman correlation of the generated points.
    #[arg(long, default_value_t = -0.9, allow_hyphen_values = true)]
    pub correlation: f64,

    /// Comma-separated columns to keep.
    #[arg(long)]
    pub columns: Option<String>,

    /// axis-box, hull2d or point-cloud.
    #[arg(long, default_value = "hull2d")]
    pub mode: String,

    /// Hull feature pair A,B [default: the first two columns].
    #[arg(long)]
    pub pair: Option<String>,

    /// Point-cloud membership radius in normalized units.
    #[arg(long, default_value_t = riskattr::audit::domain::DEFAULT_RADIUS)]
    pub radius: f64,

    /// Domain JSON path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs the command line with process stdout and stderr.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the command line, writing results to `out` and diagnostics to `err`.
pub fn run_cli_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match commands::dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}

pub(crate) fn io_err(e: std::io::Error) -> Error {
    Error::Io(e)
}

pub(crate) type CmdResult = Result<i32>;
