//! Scenario execution: simulate the ensemble, build the generated strategies,
//! collect identity residuals and diagnostics, and emit artifacts.
//!
//! Per-path CSV files carry `t, mu_1..mu_d, gamma, v_additive,
//! v_multiplicative` plus optional holdings and portfolio-weight columns;
//! every number is printed with 17 significant digits so reruns are
//! byte-identical.  The JSON summary embeds the fully resolved configuration
//! and seed.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sptsim_core::{
    additive_generate, check_additive_outperformance, check_multiplicative_outperformance,
    gamma_by_definition, left_riemann_integral, multiplicative_generate, normalize,
    portfolio_weights, simulate_ensemble, supermartingale_mc_test, MarketPath,
    OutperformanceReport, SupermartingaleReport,
};

use crate::config::ScenarioConfig;
use crate::CliError;

/// Worst-case identity residuals across the ensemble.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// max |V − ⟨holdings, μ⟩|.
    pub max_value_definition: f64,
    /// max |V(t) − V(0) − gains integral|.
    pub max_self_financing: f64,
    /// max |V − (G + Γ)| for the additive leg.
    pub max_additive_decomposition: f64,
    /// max |V − G·K|/V for the multiplicative leg.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_master_relative: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathDigest {
    pub path_index: usize,
    pub gamma_final: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_additive_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_multiplicative_final: Option<f64>,
}

/// Everything a scenario run produces besides the CSV files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: ScenarioConfig,
    pub seed: u64,
    pub n_paths: usize,
    pub identity_residuals: IdentityResiduals,
    pub per_path: Vec<PathDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outperformance_additive: Option<OutperformanceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outperformance_multiplicative: Option<OutperformanceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub supermartingale: Option<SupermartingaleReport>,
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// 17 significant digits, locale-independent.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

struct PathColumns<'a> {
    path: &'a MarketPath,
    gamma: &'a [f64],
    v_additive: Option<&'a [f64]>,
    v_multiplicative: Option<&'a [f64]>,
    phi: Option<&'a [Vec<f64>]>,
    psi: Option<&'a [Vec<f64>]>,
    pi: Option<&'a [Vec<f64>]>,
}

fn write_path_csv(file_path: &Path, cols: &PathColumns) -> Result<(), CliError> {
    let d = cols.path.dim();
    let mut out = String::new();
    out.push('t');
    for i in 1..=d {
        out.push_str(&format!(",mu_{i}"));
    }
    out.push_str(",gamma,v_additive,v_multiplicative");
    for (tag, present) in [("phi", cols.phi.is_some()), ("psi", cols.psi.is_some()), ("pi", cols.pi.is_some())] {
        if present {
            for i in 1..=d {
                out.push_str(&format!(",{tag}_{i}"));
            }
        }
    }
    out.push('\n');

    for n in 0..cols.path.len() {
        out.push_str(&fmt_float(cols.path.times()[n]));
        for i in 0..d {
            out.push(',');
            out.push_str(&fmt_float(cols.path.weights_at(n)[i]));
        }
        out.push(',');
        out.push_str(&fmt_float(cols.gamma[n]));
        out.push(',');
        out.push_str(&fmt_float(cols.v_additive.map_or(f64::NAN, |v| v[n])));
        out.push(',');
        out.push_str(&fmt_float(cols.v_multiplicative.map_or(f64::NAN, |v| v[n])));
        for block in [cols.phi, cols.psi, cols.pi].into_iter().flatten() {
            for i in 0..d {
                out.push(',');
                out.push_str(&fmt_float(block[n][i]));
            }
        }
        out.push('\n');
    }

    let mut f = fs::File::create(file_path).map_err(runtime)?;
    f.write_all(out.as_bytes()).map_err(runtime)?;
    Ok(())
}

/// Run one scenario end to end; artifacts land in `out_dir/<name>/`.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<ScenarioSummary, CliError> {
    config.validate()?;
    let scenario_dir = out_dir.join(&config.name);
    fs::create_dir_all(&scenario_dir).map_err(runtime)?;

    let paths = simulate_ensemble(&config.model, &config.sim).map_err(runtime)?;
    let mu0 = paths[0].weights_at(0).to_vec();
    let base = config.generator.build()?;
    let generator = if config.normalize {
        normalize(base, &mu0).map_err(runtime)?
    } else {
        base
    };

    let mut residuals = IdentityResiduals::default();
    let mut per_path = Vec::with_capacity(paths.len());
    let mut csv_written = 0usize;

    for (idx, path) in paths.iter().enumerate() {
        let gamma = gamma_by_definition(&generator, path).map_err(runtime)?;

        let additive = if config.mode.additive() {
            Some(additive_generate(&generator, path).map_err(runtime)?)
        } else {
            None
        };
        let multiplicative = if config.mode.multiplicative() {
            Some(multiplicative_generate(&generator, path).map_err(runtime)?)
        } else {
            None
        };

        for series in [
            additive.as_ref().map(|s| &s.series),
            multiplicative.as_ref().map(|s| &s.series),
        ]
        .into_iter()
        .flatten()
        {
            let gains =
                left_riemann_integral(&series.holdings, path.weights()).map_err(runtime)?;
            for n in 0..path.len() {
                let dot: f64 = series.holdings[n]
                    .iter()
                    .zip(path.weights_at(n))
                    .map(|(h, m)| h * m)
                    .sum();
                residuals.max_value_definition =
                    residuals.max_value_definition.max((dot - series.value[n]).abs());
                residuals.max_self_financing = residuals
                    .max_self_financing
                    .max((series.value[n] - series.value[0] - gains[n]).abs());
            }
        }
        if let Some(add) = &additive {
            for n in 0..path.len() {
                let expected = generator.value(path.weights_at(n)) + add.gamma.values[n];
                residuals.max_additive_decomposition = residuals
                    .max_additive_decomposition
                    .max((add.series.value[n] - expected).abs());
            }
        }
        if let Some(mult) = &multiplicative {
            let worst = mult
                .master_residual
                .iter()
                .zip(&mult.series.value)
                .map(|(r, v)| (r / v).abs())
                .fold(0.0, f64::max);
            residuals.max_master_relative =
                Some(residuals.max_master_relative.unwrap_or(0.0).max(worst));
        }

        per_path.push(PathDigest {
            path_index: idx,
            gamma_final: gamma.total(),
            v_additive_final: additive.as_ref().map(|s| s.series.final_value()),
            v_multiplicative_final: multiplicative.as_ref().map(|s| s.series.final_value()),
        });

        if config.outputs.paths_csv && csv_written < config.outputs.max_csv_paths {
            let pi_source = additive
                .as_ref()
                .map(|s| &s.series)
                .or(multiplicative.as_ref().map(|s| &s.series));
            let pi = if config.outputs.weights {
                match pi_source {
                    Some(series) => Some(portfolio_weights(series, path).map_err(runtime)?.weights),
                    None => None,
                }
            } else {
                None
            };
            let cols = PathColumns {
                path,
                gamma: &gamma.values,
                v_additive: additive.as_ref().map(|s| s.series.value.as_slice()),
                v_multiplicative: multiplicative.as_ref().map(|s| s.series.value.as_slice()),
                phi: config
                    .outputs
                    .holdings
                    .then(|| additive.as_ref().map(|s| s.series.holdings.as_slice()))
                    .flatten(),
                psi: config
                    .outputs
                    .holdings
                    .then(|| multiplicative.as_ref().map(|s| s.series.holdings.as_slice()))
                    .flatten(),
                pi: pi.as_deref(),
            };
            write_path_csv(&scenario_dir.join(format!("path_{idx:04}.csv")), &cols)?;
            csv_written += 1;
        }
    }

    let mut outperformance_additive = None;
    let mut outperformance_multiplicative = None;
    let mut supermartingale = None;
    if let Some(op) = &config.diagnostics.outperformance {
        if config.mode.additive() {
            outperformance_additive =
                Some(check_additive_outperformance(&generator, &paths, op.t_star).map_err(runtime)?);
        }
        if config.mode.multiplicative() {
            outperformance_multiplicative = Some(
                check_multiplicative_outperformance(&generator, &paths, op.t_star, op.epsilon)
                    .map_err(runtime)?,
            );
        }
    }
    if let Some(sm) = &config.diagnostics.supermartingale {
        supermartingale = Some(
            supermartingale_mc_test(&generator, &config.model, &config.sim, &sm.checkpoints)
                .map_err(runtime)?,
        );
    }

    let summary = ScenarioSummary {
        scenario: config.clone(),
        seed: config.sim.seed,
        n_paths: paths.len(),
        identity_residuals: residuals,
        per_path,
        outperformance_additive,
        outperformance_multiplicative,
        supermartingale,
    };
    write_summary(&summary, &scenario_dir.join("summary.json"))?;
    Ok(summary)
}

pub fn write_summary(summary: &ScenarioSummary, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(summary).map_err(runtime)?;
    fs::write(path, text + "\n").map_err(runtime)?;
    Ok(())
}

/// Simulation-only run: per-path CSVs with capitalizations and weights, plus
/// an absorption digest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub scenario: ScenarioConfig,
    pub seed: u64,
    pub n_paths: usize,
    pub n_paths_with_vanished_weight: usize,
    pub n_paths_fully_concentrated: usize,
}

pub fn run_simulate(config: &ScenarioConfig, out_dir: &Path) -> Result<SimulateSummary, CliError> {
    config.validate()?;
    let scenario_dir = out_dir.join(&config.name);
    fs::create_dir_all(&scenario_dir).map_err(runtime)?;
    let paths = simulate_ensemble(&config.model, &config.sim).map_err(runtime)?;

    let mut vanished = 0;
    let mut concentrated = 0;
    for (idx, path) in paths.iter().enumerate() {
        let a = sptsim_core::absorption_times(path, 0.0);
        if a.first_zero_any.is_finite() {
            vanished += 1;
        }
        if a.first_concentration.is_finite() {
            concentrated += 1;
        }
        if config.outputs.paths_csv && idx < config.outputs.max_csv_paths {
            let d = path.dim();
            let mut out = String::from("t");
            for i in 1..=d {
                out.push_str(&format!(",s_{i}"));
            }
            for i in 1..=d {
                out.push_str(&format!(",mu_{i}"));
            }
            out.push('\n');
            for n in 0..path.len() {
                out.push_str(&fmt_float(path.times()[n]));
                for i in 0..d {
                    out.push(',');
                    out.push_str(&fmt_float(path.caps()[n][i]));
                }
                for i in 0..d {
                    out.push(',');
                    out.push_str(&fmt_float(path.weights_at(n)[i]));
                }
                out.push('\n');
            }
            fs::write(scenario_dir.join(format!("path_{idx:04}.csv")), out).map_err(runtime)?;
        }
    }

    let summary = SimulateSummary {
        scenario: config.clone(),
        seed: config.sim.seed,
        n_paths: paths.len(),
        n_paths_with_vanished_weight: vanished,
        n_paths_fully_concentrated: concentrated,
    };
    let text = serde_json::to_string_pretty(&summary).map_err(runtime)?;
    fs::write(scenario_dir.join("summary.json"), text + "\n").map_err(runtime)?;
    Ok(summary)
}

/// Resolve the output directory: explicit flag, then environment, then `./out`.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("SPTSIM_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips_exactly() {
        for x in [
            0.0,
            0.5,
            1.0 / 3.0,
            2.0_f64.ln(),
            1.234567890123456e-12,
            -9.87654321e17,
            f64::MIN_POSITIVE,
        ] {
            let printed = fmt_float(x);
            assert!(!printed.contains(','));
            let parsed: f64 = printed.parse().unwrap();
            assert_eq!(parsed.to_bits(), x.to_bits(), "{printed}");
        }
        assert_eq!(fmt_float(0.5), "5.0000000000000000e-1");
        assert!(fmt_float(f64::NAN).contains("NaN"));
    }
}
