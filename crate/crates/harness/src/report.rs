//! Machine-readable experiment reports: CSV first, JSON mirrors.
//!
//! Float columns are written with the shortest round-trip representation,
//! so identical runs produce byte-identical files.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::HarnessError;

/// One reweighting measurement: a context (baseline, model) and a strata
/// shape (d, arity), with the loss before/after repair.
#[derive(Debug, Clone, Serialize)]
pub struct ReweightRow {
    pub baseline: String,
    pub model: String,
    pub d: usize,
    pub arity: usize,
    pub seed: u64,
    pub dl_before: f64,
    pub dl_after: f64,
    /// `100 * dl_after / dl_before`; absent when there was no loss to
    /// repair.
    pub remaining_pct: Option<f64>,
}

/// One user-assisted measurement: how often the oracle user found the
/// desired class among the presented candidates.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionRow {
    pub algorithm: String,
    pub selector: String,
    pub seed: u64,
    pub success_pct: f64,
}

/// Census of detriment conditions over random instances, one row per seed.
#[derive(Debug, Clone, Serialize)]
pub struct CensusRow {
    pub seed: u64,
    pub instances: usize,
    pub strata: usize,
    /// Fraction of instances where reweighting increased the class's loss
    /// term.
    pub detrimental_fraction: f64,
    /// Fraction where both sign conditions held simultaneously.
    pub conditions_cooccur_fraction: f64,
    /// Instances violating (prob_after < prob_before) <=> shift > 0 on
    /// non-tied instances; must be 0.
    pub equivalence_violations: usize,
    /// Instances where the loss-term identity missed 1e-12; must be 0.
    pub identity_violations: usize,
    pub mean_dl_term_change: f64,
    pub min_dl_term_change: f64,
    pub max_dl_term_change: f64,
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Emission-time self-consistency: the remaining percentage of every row
/// must be recomputable from its own loss columns.
pub fn check_reweight_consistency(rows: &[ReweightRow]) -> Result<(), HarnessError> {
    for (i, r) in rows.iter().enumerate() {
        let consistent = match r.remaining_pct {
            Some(pct) => {
                r.dl_before > 0.0 && (pct - 100.0 * r.dl_after / r.dl_before).abs() <= 1e-9
            }
            None => r.dl_before == 0.0,
        };
        if !consistent {
            return Err(HarnessError::config(format!(
                "internal: row {i} remaining_pct inconsistent with its loss columns"
            )));
        }
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let mut file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    file.write_all(contents.as_bytes())
        .map_err(|e| HarnessError::io(path, e))
}

pub fn reweight_csv(rows: &[ReweightRow]) -> String {
    let mut out = String::from("baseline,model,d,M,seed,dl_before,dl_after,remaining_pct\n");
    for r in rows {
        let remaining = r.remaining_pct.map(fmt_f64).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.baseline,
            r.model,
            r.d,
            r.arity,
            r.seed,
            fmt_f64(r.dl_before),
            fmt_f64(r.dl_after),
            remaining
        ));
    }
    out
}

pub fn selection_csv(rows: &[SelectionRow]) -> String {
    let mut out = String::from("algorithm,selector,seed,success_pct\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.algorithm,
            r.selector,
            r.seed,
            fmt_f64(r.success_pct)
        ));
    }
    out
}

pub fn census_csv(rows: &[CensusRow]) -> String {
    let mut out = String::from(
        "seed,instances,strata,detrimental_fraction,conditions_cooccur_fraction,\
         equivalence_violations,identity_violations,mean_dl_term_change,\
         min_dl_term_change,max_dl_term_change\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.seed,
            r.instances,
            r.strata,
            fmt_f64(r.detrimental_fraction),
            fmt_f64(r.conditions_cooccur_fraction),
            r.equivalence_violations,
            r.identity_violations,
            fmt_f64(r.mean_dl_term_change),
            fmt_f64(r.min_dl_term_change),
            fmt_f64(r.max_dl_term_change)
        ));
    }
    out
}

/// Report output format; CSV is the primary form, JSON the mirror.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

pub fn write_rows<T: Serialize>(
    out_dir: &Path,
    stem: &str,
    format: Format,
    rows: &[T],
    to_csv: impl Fn(&[T]) -> String,
) -> Result<std::path::PathBuf, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let path = match format {
        Format::Csv => {
            let path = out_dir.join(format!("{stem}.csv"));
            write_file(&path, &to_csv(rows))?;
            path
        }
        Format::Json => {
            let path = out_dir.join(format!("{stem}.json"));
            let json = serde_json::to_string_pretty(rows)
                .map_err(|e| HarnessError::config(format!("serializing {stem}: {e}")))?;
            write_file(&path, &json)?;
            path
        }
    };
    Ok(path)
}

/// Binned counts of diversity losses across rows (20 bins over [0, 1]),
/// for external plotting.
pub fn histogram_csv(rows: &[ReweightRow]) -> String {
    const BINS: usize = 20;
    let mut before = [0usize; BINS];
    let mut after = [0usize; BINS];
    let bin_of = |v: f64| -> usize { ((v * BINS as f64) as usize).min(BINS - 1) };
    for r in rows {
        before[bin_of(r.dl_before)] += 1;
        after[bin_of(r.dl_after)] += 1;
    }
    let mut out = String::from("bin_low,bin_high,count_before,count_after\n");
    for b in 0..BINS {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(b as f64 / BINS as f64),
            fmt_f64((b + 1) as f64 / BINS as f64),
            before[b],
            after[b]
        ));
    }
    out
}

pub fn write_text(out_dir: &Path, name: &str, text: &str) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    write_file(&out_dir.join(name), text)
}
