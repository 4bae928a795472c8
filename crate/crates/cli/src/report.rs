//! Aggregation of scenario summaries into a comparison table.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::scenario::{fmt_float, ScenarioSummary};
use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub file: String,
    pub name: String,
    pub seed: u64,
    pub n_paths: usize,
    pub mean_gamma_final: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub additive_condition_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub additive_certified_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub additive_final_above_one: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplicative_condition_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplicative_final_above_one: Option<f64>,
}

/// Pooled statistics across all input summaries (per-path counts combined).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PooledStats {
    pub n_paths: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub additive_condition_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub additive_certified_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplicative_condition_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateReport {
    pub scenarios: Vec<ScenarioRow>,
    pub pooled: PooledStats,
}

/// Merge ensemble statistics from several summary files.
pub fn aggregate(files: &[PathBuf]) -> Result<AggregateReport, CliError> {
    if files.is_empty() {
        return Err(CliError::Validation(
            "report needs at least one summary file".into(),
        ));
    }
    let mut rows = Vec::with_capacity(files.len());
    let mut pooled_paths = 0usize;
    let mut add_cond: Option<usize> = None;
    let mut add_cert: Option<usize> = None;
    let mut mult_cond: Option<usize> = None;

    for file in files {
        let text = std::fs::read_to_string(file).map_err(|e| {
            CliError::Validation(format!("cannot read summary {}: {e}", file.display()))
        })?;
        let summary: ScenarioSummary = serde_json::from_str(&text).map_err(|e| {
            CliError::Validation(format!("malformed summary {}: {e}", file.display()))
        })?;

        let n = summary.n_paths.max(1);
        let mean_gamma =
            summary.per_path.iter().map(|p| p.gamma_final).sum::<f64>() / n as f64;
        let add = summary.outperformance_additive.as_ref();
        let mult = summary.outperformance_multiplicative.as_ref();

        if let Some(r) = add {
            *add_cond.get_or_insert(0) += r.n_condition_met;
            *add_cert.get_or_insert(0) += r.n_certified;
        }
        if let Some(r) = mult {
            *mult_cond.get_or_insert(0) += r.n_condition_met;
        }
        pooled_paths += summary.n_paths;

        rows.push(ScenarioRow {
            file: file.display().to_string(),
            name: summary.scenario.name.clone(),
            seed: summary.seed,
            n_paths: summary.n_paths,
            mean_gamma_final: mean_gamma,
            additive_condition_fraction: add
                .map(|r| r.n_condition_met as f64 / r.n_paths as f64),
            additive_certified_fraction: add.map(|r| r.n_certified as f64 / r.n_paths as f64),
            additive_final_above_one: add.map(|r| r.fraction_final_above_one),
            multiplicative_condition_fraction: mult
                .map(|r| r.n_condition_met as f64 / r.n_paths as f64),
            multiplicative_final_above_one: mult.map(|r| r.fraction_final_above_one),
        });
    }

    let frac = |count: Option<usize>| count.map(|c| c as f64 / pooled_paths as f64);
    Ok(AggregateReport {
        scenarios: rows,
        pooled: PooledStats {
            n_paths: pooled_paths,
            additive_condition_fraction: frac(add_cond),
            additive_certified_fraction: frac(add_cert),
            multiplicative_condition_fraction: frac(mult_cond),
        },
    })
}

/// Flat CSV rendering of the comparison table.
pub fn to_csv(report: &AggregateReport) -> String {
    let mut out = String::from(
        "file,name,seed,n_paths,mean_gamma_final,additive_condition_fraction,\
         additive_certified_fraction,additive_final_above_one,\
         multiplicative_condition_fraction,multiplicative_final_above_one\n",
    );
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), fmt_float);
    for row in &report.scenarios {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            row.file,
            row.name,
            row.seed,
            row.n_paths,
            fmt_float(row.mean_gamma_final),
            opt(row.additive_condition_fraction),
            opt(row.additive_certified_fraction),
            opt(row.additive_final_above_one),
            opt(row.multiplicative_condition_fraction),
            opt(row.multiplicative_final_above_one),
        ));
    }
    out
}

/// Write the aggregate report as JSON (and optionally CSV).
pub fn write_report(
    report: &AggregateReport,
    json_out: Option<&Path>,
    csv_out: Option<&Path>,
) -> Result<(), CliError> {
    if let Some(path) = csv_out {
        std::fs::write(path, to_csv(report)).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    match json_out {
        Some(path) => std::fs::write(path, text + "\n")
            .map_err(|e| CliError::Runtime(e.to_string()))?,
        None => println!("{text}"),
    }
    Ok(())
}
