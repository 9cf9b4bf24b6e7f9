//! `restrata`: measure and repair diversity loss in black-box samplers.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 on runtime errors
//! (with the failing module and step on stderr).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use restrata_harness::config::{
    load_tool_config, CalibrateConfig, EvaluateConfig, PlanConfig, SampleConfig, SelectConfig,
};
use restrata_harness::{commands, ExperimentConfig, Format, HarnessError};

#[derive(Parser)]
#[command(
    name = "restrata",
    version,
    about = "Diversity-loss measurement and stratified-rejection repair for black-box samplers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration file; paths inside are relative to it.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed(s).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = CliFormat::Csv)]
    format: CliFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliFormat {
    Csv,
    Json,
}

impl From<CliFormat> for Format {
    fn from(value: CliFormat) -> Self {
        match value {
            CliFormat::Csv => Format::Csv,
            CliFormat::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentId {
    Reweight,
    UserAssisted,
    QualityBias,
    DetrimentCensus,
}

impl ExperimentId {
    fn as_str(self) -> &'static str {
        match self {
            Self::Reweight => "reweight",
            Self::UserAssisted => "user_assisted",
            Self::QualityBias => "quality_bias",
            Self::DetrimentCensus => "detriment_census",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit strata on a feature CSV and estimate its stratum distribution.
    Calibrate(CommonArgs),
    /// Build a reweighting plan from target and model stratum files.
    Plan(CommonArgs),
    /// Run the stratified rejection loop around a synthetic sampler.
    Sample(CommonArgs),
    /// Diversity-loss report of observed frequencies against a target.
    Evaluate(CommonArgs),
    /// Subset selection over a candidate file.
    Select(CommonArgs),
    /// Run an experiment pipeline and write its report.
    Experiment {
        #[arg(value_enum)]
        id: ExperimentId,
        #[command(flatten)]
        args: CommonArgs,
        /// Also write binned diversity-loss counts (histogram.csv).
        #[arg(long)]
        emit_histogram: bool,
    },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Calibrate(args) => {
            let config: CalibrateConfig =
                load_tool_config(&args.config, |c: &mut CalibrateConfig| {
                    let mut paths = vec![&mut c.features_csv];
                    if let Some(disc) = c.discretizer.as_mut() {
                        paths.push(disc);
                    }
                    paths
                })?;
            commands::calibrate(&config, &args.out, args.format.into())
        }
        Command::Plan(args) => {
            let config: PlanConfig = load_tool_config(&args.config, |c: &mut PlanConfig| {
                vec![&mut c.target_probs, &mut c.model_probs]
            })?;
            commands::plan(&config, &args.out)
        }
        Command::Sample(args) => {
            let config: SampleConfig = load_tool_config(&args.config, |c: &mut SampleConfig| {
                vec![&mut c.population_spec, &mut c.discretizer, &mut c.plan]
            })?;
            commands::sample(&config, args.seed, &args.out)
        }
        Command::Evaluate(args) => {
            let config: EvaluateConfig =
                load_tool_config(&args.config, |c: &mut EvaluateConfig| {
                    vec![&mut c.target, &mut c.observed]
                })?;
            commands::evaluate(&config, &args.out, args.format.into())
        }
        Command::Select(args) => {
            let config: SelectConfig =
                load_tool_config(&args.config, |c: &mut SelectConfig| vec![&mut c.candidates])?;
            commands::select(&config, args.seed, &args.out, args.format.into())
        }
        Command::Experiment {
            id,
            args,
            emit_histogram,
        } => {
            let mut config = ExperimentConfig::load(&args.config)?;
            if config.id() != id.as_str() {
                return Err(HarnessError::config(format!(
                    "config is for experiment `{}`, requested `{}`",
                    config.id(),
                    id.as_str()
                )));
            }
            if let Some(seed) = args.seed {
                config.override_seed(seed);
            }
            let path = restrata_harness::run_experiment(
                &config,
                &args.out,
                args.format.into(),
                emit_histogram,
            )?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            let mut source = std::error::Error::source(&error);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            match error {
                HarnessError::Config(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
