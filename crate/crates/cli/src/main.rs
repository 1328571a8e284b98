//! Command-line interface: simulate cohorts, evaluate predictive
//! accuracy metrics on a dataset, and compare approaches across
//! replicates against the censoring-free reference.

mod compare;
mod evaluate;
mod io;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use icpa_core::cohort::EvaluationWindow;
use icpa_core::model::ModelParameters;
use icpa_core::simulator::{DEFAULT_ADMIN_HORIZON, DEFAULT_CENSORING_RATE};

/// Errors carrying the process exit code: 2 for usage problems, 3 for
/// data problems.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self::Usage(message.into())
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::Data(message.into())
    }

    pub fn from_core(e: icpa_core::Error) -> Self {
        Self::Data(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Data(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Data(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "icpa",
    version,
    about = "Predictive accuracy metrics (AUC, Brier, EPCE) for interval-censored competing-risks data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate cohort replicates from the joint model.
    Simulate(SimulateArgs),
    /// Compute the accuracy metrics on one dataset.
    Evaluate(EvaluateArgs),
    /// Evaluate all replicates in a directory and summarize RMSE against
    /// the censoring-free reference.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Subjects per replicate.
    #[arg(long, default_value_t = 300)]
    n: usize,
    /// Number of replicates.
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    /// Biopsy schedule: pass, or u<lo>-<hi> (gaps uniform in years).
    #[arg(long, default_value = "pass")]
    schedule: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the CSVs and manifest.
    #[arg(long)]
    out: PathBuf,
    /// Dropout hazard per year (0 disables dropout).
    #[arg(long, default_value_t = DEFAULT_CENSORING_RATE)]
    censoring_rate: f64,
    /// Administrative end of follow-up in years.
    #[arg(long, default_value_t = DEFAULT_ADMIN_HORIZON)]
    admin_horizon: f64,
    /// Marker measurement spacing in years.
    #[arg(long, default_value_t = 0.25)]
    psa_interval: f64,
    /// Model parameters JSON (defaults to the built-in fitted values).
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Args)]
pub struct PredictorArgs {
    /// Risk predictor: joint (requires --profiles) or constant.
    #[arg(long, default_value = "joint")]
    predictor: String,
    /// Model parameters JSON for the joint predictor.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Progression hazard for the constant predictor.
    #[arg(long, default_value_t = 0.2)]
    rate_prg: f64,
    /// Treatment hazard for the constant predictor.
    #[arg(long, default_value_t = 0.1)]
    rate_trt: f64,
    /// Multiply both hazards by this factor (miscalibration probe).
    #[arg(long)]
    hazard_scale: Option<f64>,
    /// Zero out the density coefficients (omitted-covariate probe).
    #[arg(long, default_value_t = false)]
    zero_gamma: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    longitudinal: PathBuf,
    /// True event times CSV (needed for the reference approach).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Subject profiles CSV (needed for the joint predictor).
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Window start in years.
    #[arg(short = 't', long, default_value_t = 1.0)]
    t: f64,
    /// Window length in years.
    #[arg(long, default_value_t = 3.0)]
    dt: f64,
    /// Comma-separated subset of model,ipcw,naive,reference,epce.
    #[arg(long, default_value = "model,ipcw,naive")]
    approaches: String,
    #[command(flatten)]
    predictor: PredictorArgs,
    /// Output directory for metrics.json and the ROC CSVs.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Directory holding a manifest.json and its replicate files.
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(short = 't', long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 3.0)]
    dt: f64,
    /// Comma-separated subset of model,ipcw,naive,epce (the reference is
    /// always included).
    #[arg(long, default_value = "model,ipcw,naive")]
    approaches: String,
    #[command(flatten)]
    predictor: PredictorArgs,
    #[arg(long)]
    out: PathBuf,
}

fn load_params(path: &Option<PathBuf>) -> Result<ModelParameters, CliError> {
    match path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
            ModelParameters::from_json(&text).map_err(|e| CliError::data(e.to_string()))
        }
        None => Ok(ModelParameters::reference()),
    }
}

fn window_from(t: f64, dt: f64) -> Result<EvaluationWindow, CliError> {
    EvaluationWindow::new(t, dt)
        .map_err(|_| CliError::usage("invalid window: need t >= 0 and dt > 0"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let options = simulate::SimulateOptions {
                n_subjects: args.n,
                n_replicates: args.replicates,
                seed: args.seed,
                schedule: simulate::parse_schedule(&args.schedule)?,
                censoring_rate: args.censoring_rate,
                admin_horizon: args.admin_horizon,
                psa_interval: args.psa_interval,
                params: load_params(&args.params)?,
            };
            simulate::run(&options, &args.out)
        }
        Command::Evaluate(args) => {
            let window = window_from(args.t, args.dt)?;
            let approaches = evaluate::ApproachSet::parse(&args.approaches)?;
            let predictor = evaluate::resolve_predictor(&args.predictor)?;
            let dataset = io::load_dataset(
                &args.events,
                &args.longitudinal,
                args.truth.as_deref(),
                args.profiles.as_deref(),
            )?;
            evaluate::run(&dataset, window, &predictor, approaches, &args.out)
        }
        Command::Compare(args) => {
            let window = window_from(args.t, args.dt)?;
            let approaches = evaluate::ApproachSet::parse(&args.approaches)?;
            let predictor = evaluate::resolve_predictor(&args.predictor)?;
            compare::run(&args.data_dir, window, &predictor, approaches, &args.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
