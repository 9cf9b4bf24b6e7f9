//! Experiment harness for the restrata toolkit: desk-scale experiment
//! pipelines over synthetic populations, plus the file-based tools behind
//! the `restrata` CLI.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod problems;
pub mod report;

use std::path::Path;

pub use config::ExperimentConfig;
pub use error::HarnessError;
pub use report::Format;

/// Runs an experiment config and writes its report into `out_dir`.
/// Returns the written report path.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    format: Format,
    emit_histogram: bool,
) -> Result<std::path::PathBuf, HarnessError> {
    let path = match config {
        ExperimentConfig::Reweight(c) => {
            let rows = experiments::exp_reweight(c)?;
            report::check_reweight_consistency(&rows)?;
            if emit_histogram {
                report::write_text(out_dir, "histogram.csv", &report::histogram_csv(&rows))?;
            }
            report::write_rows(out_dir, "reweight", format, &rows, report::reweight_csv)?
        }
        ExperimentConfig::UserAssisted(c) => {
            let rows = experiments::exp_user_assisted(c)?;
            report::write_rows(
                out_dir,
                "user_assisted",
                format,
                &rows,
                report::selection_csv,
            )?
        }
        ExperimentConfig::QualityBias(c) => {
            let rows = experiments::exp_quality_bias(c)?;
            report::check_reweight_consistency(&rows)?;
            if emit_histogram {
                report::write_text(out_dir, "histogram.csv", &report::histogram_csv(&rows))?;
            }
            report::write_rows(out_dir, "quality_bias", format, &rows, report::reweight_csv)?
        }
        ExperimentConfig::DetrimentCensus(c) => {
            let rows = experiments::exp_detriment_census(c)?;
            report::write_rows(
                out_dir,
                "detriment_census",
                format,
                &rows,
                report::census_csv,
            )?
        }
    };
    Ok(path)
}
