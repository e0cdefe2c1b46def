//! Command-line front end: score series files, run experiments, synthesize
//! test data.
//!
//! Exit codes: 0 on success, 2 for validation and usage failures, 3 for
//! numeric failures (a degenerate ensemble row without `--skip-degenerate`).
//! All commands are pure functions of their inputs, flags, and seed; the
//! `--threads` flag changes wall time, never output bytes.

use crate::ensemble::{
    format_float, load_series, synthesize_series, write_series, VerificationSeries,
};
use crate::experiments::{
    run_m_dependence, run_nonnormal_bias, run_sigma_sweep, run_subsample_compare,
    ExperimentError, ExperimentResult, ExperimentSpec, FamilyKind, DEFAULT_M_GRID,
    DEFAULT_NONNORMAL_M_GRID, DEFAULT_REPLICATES, DEFAULT_SIGMA_GRID,
    DEFAULT_SUBSAMPLE_REPLICATES, DEFAULT_SWEEP_M_GRID,
};
use crate::scores::{
    ignorance_bias_corrected, ignorance_extrapolated, ignorance_population, ignorance_standard,
    mean_score, GaussianParams, ScoreError, Units,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};

#[derive(Debug)]
enum CliError {
    /// Bad flags, malformed input, invalid spec: exit 2.
    Usage(String),
    /// Scoring failed on otherwise valid data: exit 3.
    Numeric(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<crate::ensemble::SeriesError> for CliError {
    fn from(e: crate::ensemble::SeriesError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Score(inner) => inner.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<ScoreError> for CliError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::DegenerateEnsemble { .. } | ScoreError::NonFinite { .. } => {
                CliError::Numeric(e.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "ign",
    version,
    about = "Ignorance-score verification of ensemble forecasts",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for experiments (0 = all cores). Output-invariant.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score every time step of a series file and report the mean
    #[command(allow_negative_numbers = true)]
    Score(ScoreArgs),
    /// Run a Monte Carlo experiment, writing a CSV table and a JSON sidecar
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Generate a synthetic verification series
    #[command(allow_negative_numbers = true)]
    Synth(SynthArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum EstimatorArg {
    /// Fixed N(μ, σ²) forecast given by --mu/--sigma2
    Population,
    /// Plug-in estimator from the fitted ensemble
    Standard,
    /// Finite-ensemble bias-corrected estimator (m ≥ 4)
    Corrected,
    /// Score extrapolated to the ensemble size given by --target-m
    Extrapolated,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum UnitsArg {
    Nats,
    Bits,
    Bans,
}

impl UnitsArg {
    fn units(self) -> Units {
        match self {
            UnitsArg::Nats => Units::Nats,
            UnitsArg::Bits => Units::Bits,
            UnitsArg::Bans => Units::Bans,
        }
    }
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long, value_enum)]
    estimator: EstimatorArg,
    /// Series CSV to score ("-" for stdin)
    #[arg(long, default_value = "-")]
    input: String,
    /// Destination for the score table ("-" for stdout)
    #[arg(long, default_value = "-")]
    output: String,
    /// Output units; all internal arithmetic stays in nats
    #[arg(long, value_enum, default_value_t = UnitsArg::Nats)]
    units: UnitsArg,
    /// Forecast mean (population estimator only)
    #[arg(long)]
    mu: Option<f64>,
    /// Forecast variance (population estimator only)
    #[arg(long)]
    sigma2: Option<f64>,
    /// Ensemble size to extrapolate to (extrapolated estimator only)
    #[arg(long)]
    target_m: Option<usize>,
    /// Write NA for degenerate rows and exclude them from the mean instead
    /// of aborting
    #[arg(long)]
    skip_degenerate: bool,
}

#[derive(Args, Debug, Clone)]
struct CommonExperimentArgs {
    /// Monte Carlo replicates per grid point
    #[arg(long)]
    replicates: Option<usize>,
    /// Base seed; every grid point and replicate derives its own stream
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination CSV ("-" for stdout)
    #[arg(long, default_value = "-")]
    output: String,
    /// Sidecar JSON path (default: <output>.meta.json for file output)
    #[arg(long)]
    sidecar: Option<String>,
}

#[derive(Subcommand, Debug)]
enum ExperimentCmd {
    /// Expected standard score against ensemble size, calibrated Normal case
    MDependence {
        /// Ensemble sizes, comma separated
        #[arg(long = "m", value_delimiter = ',')]
        m_grid: Option<Vec<usize>>,
        #[command(flatten)]
        common: CommonExperimentArgs,
    },
    /// Score curves over forecast spread σ for N(0, σ²) vs N(0, 1)
    SigmaSweep {
        /// Spread grid, comma separated
        #[arg(long = "sigma", value_delimiter = ',')]
        sigma_grid: Option<Vec<f64>>,
        /// Ensemble sizes, comma separated
        #[arg(long = "m", value_delimiter = ',')]
        m_grid: Option<Vec<usize>>,
        #[command(flatten)]
        common: CommonExperimentArgs,
    },
    /// Paired comparison of two series under member subsampling
    Subsample {
        /// First series (tagged "a" in the output)
        #[arg(long)]
        input_a: String,
        /// Second series (tagged "b"); must share times and observations
        #[arg(long)]
        input_b: String,
        /// Subset sizes, comma separated
        #[arg(long = "subset", value_delimiter = ',')]
        subset_grid: Option<Vec<usize>>,
        #[command(flatten)]
        common: CommonExperimentArgs,
    },
    /// Estimator bias when the data come from a non-Normal family
    #[command(allow_negative_numbers = true)]
    Nonnormal {
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Shape parameters, comma separated
        #[arg(long = "theta", value_delimiter = ',')]
        theta_grid: Option<Vec<f64>>,
        /// Ensemble sizes, comma separated
        #[arg(long = "m", value_delimiter = ',')]
        m_grid: Option<Vec<usize>>,
        #[command(flatten)]
        common: CommonExperimentArgs,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FamilyArg {
    /// Rescaled Student-t with θ degrees of freedom
    T,
    /// Standardized shifted Gamma with shape θ
    Gamma,
    /// Symmetric Normal mixture with modes at ±θ
    Bimodal,
}

impl FamilyArg {
    fn kind(self) -> FamilyKind {
        match self {
            FamilyArg::T => FamilyKind::StudentT,
            FamilyArg::Gamma => FamilyKind::Gamma,
            FamilyArg::Bimodal => FamilyKind::Bimodal,
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Number of time steps
    #[arg(long)]
    n: usize,
    /// Ensemble size
    #[arg(long)]
    m: usize,
    /// Target correlation between ensemble mean and observations
    #[arg(long)]
    rho: f64,
    /// Member bias in climatological standard deviations
    #[arg(long, default_value_t = 0.0)]
    bias: f64,
    /// Linear trend per time step, shared by members and observations
    #[arg(long, default_value_t = 0.0)]
    trend: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination CSV ("-" for stdout)
    #[arg(long, default_value = "-")]
    output: String,
}

/// Parses `args` and runs the selected command, returning the process exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let body = || match cli.command {
        Command::Score(args) => cmd_score(args),
        Command::Experiment(cmd) => cmd_experiment(cmd),
        Command::Synth(args) => cmd_synth(args),
    };
    if cli.threads == 0 {
        body()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot build thread pool: {e}")))?;
        pool.install(body)
    }
}

fn read_series(path: &str) -> Result<VerificationSeries, CliError> {
    if path == "-" {
        Ok(load_series(io::stdin().lock())?)
    } else {
        let file = File::open(path)
            .map_err(|e| CliError::Usage(format!("cannot open {path}: {e}")))?;
        Ok(load_series(io::BufReader::new(file))?)
    }
}

fn open_output(path: &str) -> Result<Box<dyn Write>, CliError> {
    if path == "-" {
        Ok(Box::new(io::stdout().lock()))
    } else {
        let file = File::create(path)
            .map_err(|e| CliError::Usage(format!("cannot create {path}: {e}")))?;
        Ok(Box::new(io::BufWriter::new(file)))
    }
}

fn cmd_score(args: ScoreArgs) -> Result<(), CliError> {
    let population_params = match args.estimator {
        EstimatorArg::Population => {
            let (Some(mu), Some(sigma2)) = (args.mu, args.sigma2) else {
                return Err(CliError::Usage(
                    "the population estimator requires --mu and --sigma2".into(),
                ));
            };
            Some(GaussianParams::new(mu, sigma2)?)
        }
        _ => {
            if args.mu.is_some() || args.sigma2.is_some() {
                return Err(CliError::Usage(
                    "--mu/--sigma2 apply only to the population estimator".into(),
                ));
            }
            None
        }
    };
    let target_m = match args.estimator {
        EstimatorArg::Extrapolated => Some(args.target_m.ok_or_else(|| {
            CliError::Usage("the extrapolated estimator requires --target-m".into())
        })?),
        _ => {
            if args.target_m.is_some() {
                return Err(CliError::Usage(
                    "--target-m applies only to the extrapolated estimator".into(),
                ));
            }
            None
        }
    };

    let series = read_series(&args.input)?;
    let units = args.units.units();
    let mut rows: Vec<(String, Option<f64>)> = Vec::with_capacity(series.len());
    let mut scored = Vec::with_capacity(series.len());
    for t in 0..series.len() {
        let x = series.observations()[t];
        let members = &series.members()[t];
        let result = match args.estimator {
            EstimatorArg::Population => {
                ignorance_population(population_params.as_ref().expect("checked above"), x)
            }
            EstimatorArg::Standard => ignorance_standard(members, x),
            EstimatorArg::Corrected => ignorance_bias_corrected(members, x),
            EstimatorArg::Extrapolated => {
                ignorance_extrapolated(members, x, target_m.expect("checked above"))
            }
        };
        match result {
            Ok(score) => {
                scored.push(score.value());
                rows.push((series.times()[t].clone(), Some(score.value())));
            }
            Err(e @ ScoreError::DegenerateEnsemble { .. }) if args.skip_degenerate => {
                eprintln!("row {} (time {}): {e}; writing NA", t + 2, series.times()[t]);
                rows.push((series.times()[t].clone(), None));
            }
            Err(e) => {
                return Err(augment_row_context(e, t, series.times()));
            }
        }
    }

    let mut out = csv::Writer::from_writer(open_output(&args.output)?);
    out.write_record(["time", "score"]).map_err(csv_err)?;
    for (time, value) in &rows {
        let cell = match value {
            Some(v) => format_float(units.from_nats(*v)),
            None => "NA".to_string(),
        };
        out.write_record([time.as_str(), cell.as_str()]).map_err(csv_err)?;
    }
    out.write_record(["mean", &format_float(units.from_nats(mean_score(&scored)))])
        .map_err(csv_err)?;
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn augment_row_context(e: ScoreError, t: usize, times: &[String]) -> CliError {
    // Data rows start at line 2 of the file, below the header.
    let message = format!("row {} (time {}): {e}", t + 2, times[t]);
    match CliError::from(e) {
        CliError::Usage(_) => CliError::Usage(message),
        CliError::Numeric(_) => CliError::Numeric(message),
    }
}

fn cmd_experiment(cmd: ExperimentCmd) -> Result<(), CliError> {
    let (result, common) = match cmd {
        ExperimentCmd::MDependence { m_grid, common } => {
            let spec = ExperimentSpec::MDependence {
                m_grid: m_grid.unwrap_or_else(|| DEFAULT_M_GRID.to_vec()),
                replicates: common.replicates.unwrap_or(DEFAULT_REPLICATES),
                seed: common.seed,
            };
            (run_m_dependence(&spec)?, common)
        }
        ExperimentCmd::SigmaSweep { sigma_grid, m_grid, common } => {
            let spec = ExperimentSpec::SigmaSweep {
                sigma_grid: sigma_grid.unwrap_or_else(|| DEFAULT_SIGMA_GRID.to_vec()),
                m_grid: m_grid.unwrap_or_else(|| DEFAULT_SWEEP_M_GRID.to_vec()),
                replicates: common.replicates.unwrap_or(DEFAULT_REPLICATES),
                seed: common.seed,
            };
            (run_sigma_sweep(&spec)?, common)
        }
        ExperimentCmd::Subsample { input_a, input_b, subset_grid, common } => {
            if input_a == "-" && input_b == "-" {
                return Err(CliError::Usage(
                    "only one of --input-a/--input-b may read stdin".into(),
                ));
            }
            let series_a = read_series(&input_a)?;
            let series_b = read_series(&input_b)?;
            let spec = ExperimentSpec::SubsampleCompare {
                subset_grid: subset_grid.unwrap_or_else(|| (4..=29).collect()),
                replicates: common.replicates.unwrap_or(DEFAULT_SUBSAMPLE_REPLICATES),
                seed: common.seed,
            };
            (run_subsample_compare(&series_a, &series_b, &spec)?, common)
        }
        ExperimentCmd::Nonnormal { family, theta_grid, m_grid, common } => {
            let kind = family.kind();
            let spec = ExperimentSpec::NonNormalBias {
                theta_grid: theta_grid.unwrap_or_else(|| kind.default_thetas()),
                family: kind,
                m_grid: m_grid.unwrap_or_else(|| DEFAULT_NONNORMAL_M_GRID.to_vec()),
                replicates: common.replicates.unwrap_or(DEFAULT_REPLICATES),
                seed: common.seed,
            };
            (run_nonnormal_bias(&spec)?, common)
        }
    };
    write_experiment(&result, &common)
}

fn write_experiment(
    result: &ExperimentResult,
    common: &CommonExperimentArgs,
) -> Result<(), CliError> {
    let mut out = open_output(&common.output)?;
    result.write_csv(&mut out)?;
    out.flush()?;
    let sidecar_path = match (&common.sidecar, common.output.as_str()) {
        (Some(path), _) => Some(path.clone()),
        (None, "-") => None,
        (None, path) => Some(format!("{path}.meta.json")),
    };
    if let Some(path) = sidecar_path {
        let mut sidecar = open_output(&path)?;
        sidecar.write_all(result.sidecar_json().as_bytes())?;
        sidecar.flush()?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let series =
        synthesize_series(args.n, args.m, args.rho, args.bias, args.trend, args.seed)?;
    let mut out = open_output(&args.output)?;
    write_series(&series, &mut out)?;
    out.flush()?;
    Ok(())
}
