use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ebmt::analysis::{
    render, run_analysis, simulate_file, write_fixtures, AnalysisConfig, Inference, OutputFormat,
};
use ebmt::simulation::SplineSettings;
use ebmt::{Error, Result};

/// Entropy balancing for multivariate continuous treatments.
///
/// Set EBMT_WORKERS to bound the number of worker threads.
#[derive(Parser)]
#[command(name = "ebmt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for balancing weights and report balance before and after.
    Balance(DataArgs),
    /// Estimate a causal effect function from a CSV file.
    Estimate(EstimateArgs),
    /// Run a simulation scenario file.
    Simulate(SimulateArgs),
    /// Write synthetic CSV fixtures.
    Fixtures(FixturesArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Outcome column.
    #[arg(long)]
    outcome: String,
    /// Comma-separated treatment columns.
    #[arg(long, value_delimiter = ',', required = true)]
    treatments: Vec<String>,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',', required = true)]
    covariates: Vec<String>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// `table` or `json-lines`.
    #[arg(long, default_value = "table")]
    format: String,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Outcome model, e.g. `1 + t1 + t2 + t1:t2`.
    #[arg(long)]
    model: Option<String>,
    /// Spline settings `m=<int>,r=<int>`.
    #[arg(long)]
    spline: Option<String>,
    /// Bootstrap resamples `B=<int>`.
    #[arg(long)]
    bootstrap: Option<String>,
    /// `wald`, `bootstrap`, or `both`; defaults to `both` when --bootstrap is given.
    #[arg(long)]
    inference: Option<String>,
    /// Master seed for bootstrap resampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Confidence level for all intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Fit the outcome model in the original treatment units.
    #[arg(long)]
    original_units: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "table")]
    format: String,
    /// Per-replication json-lines log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct FixturesArgs {
    /// Directory to write into.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn key_values(raw: &str, keys: &[&str]) -> Result<Vec<usize>> {
    let mut values = vec![None; keys.len()];
    for part in raw.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("expected key=value in `{raw}`")))?;
        let slot = keys.iter().position(|k| *k == key.trim()).ok_or_else(|| {
            Error::InvalidConfig(format!("unknown key `{}` in `{raw}`", key.trim()))
        })?;
        let parsed = value.trim().parse::<usize>().map_err(|_| {
            Error::InvalidConfig(format!("`{}` is not a non-negative integer", value.trim()))
        })?;
        values[slot] = Some(parsed);
    }
    values
        .into_iter()
        .zip(keys)
        .map(|(v, k)| v.ok_or_else(|| Error::InvalidConfig(format!("missing `{k}` in `{raw}`"))))
        .collect()
}

fn analysis_config(args: &DataArgs) -> Result<AnalysisConfig> {
    let mut cfg = AnalysisConfig::new(&args.input, &args.outcome, &[], &[]);
    cfg.treatments = args
        .treatments
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    cfg.covariates = args
        .covariates
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    cfg.output = args.output.clone();
    cfg.format = args.format.parse()?;
    Ok(cfg)
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn balance(args: DataArgs) -> Result<()> {
    let cfg = analysis_config(&args)?;
    let report = run_analysis(&cfg)?;
    emit(&render(&report, cfg.format)?, cfg.output.as_deref())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let mut cfg = analysis_config(&args.data)?;
    if args.model.is_none() && args.spline.is_none() {
        return Err(Error::InvalidConfig(
            "estimate needs --model, --spline, or both".into(),
        ));
    }
    cfg.model = args.model;
    if let Some(raw) = &args.spline {
        let v = key_values(raw, &["m", "r"])?;
        cfg.spline = Some(SplineSettings {
            interior_knots: v[0],
            order: v[1],
        });
    }
    if let Some(raw) = &args.bootstrap {
        cfg.bootstrap_b = key_values(raw, &["B"])?[0];
    }
    cfg.inference = match &args.inference {
        Some(raw) => raw.parse()?,
        None if args.bootstrap.is_some() => Inference::Both,
        None => Inference::Wald,
    };
    cfg.seed = args.seed;
    cfg.level = args.level;
    cfg.original_units = args.original_units;
    let report = run_analysis(&cfg)?;
    emit(&render(&report, cfg.format)?, cfg.output.as_deref())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let format: OutputFormat = args.format.parse()?;
    let (text, log) = simulate_file(&args.config, format)?;
    if let Some(path) = &args.log {
        std::fs::write(path, log)?;
    }
    emit(&text, args.output.as_deref())
}

fn fixtures(args: FixturesArgs) -> Result<()> {
    for path in write_fixtures(&args.output, args.seed)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn configure_workers() -> Result<()> {
    let Ok(raw) = std::env::var("EBMT_WORKERS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t >= 1).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "EBMT_WORKERS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_workers().and_then(|()| match cli.command {
        Command::Balance(args) => balance(args),
        Command::Estimate(args) => estimate(args),
        Command::Simulate(args) => simulate(args),
        Command::Fixtures(args) => fixtures(args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
