//! `sptsim` — scenario runner for functionally generated trading strategies.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sptsim_cli::{
    aggregate, load_config, resolve_out_dir, run_scenario, run_simulate, write_report, CliError,
};
use sptsim_core::variation_divergence_report;

#[derive(Parser)]
#[command(
    name = "sptsim",
    about = "Simulate market-weight paths and verify functionally generated trading strategies",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: $SPTSIM_OUT_DIR, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the configured base seed.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Worker threads for ensemble evaluation (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured ensemble and write path CSVs.
    Simulate(ScenarioArgs),
    /// Run the full scenario: strategies, residuals, diagnostics, artifacts.
    Generate(ScenarioArgs),
    /// Run only the outperformance diagnostics of the scenario.
    Outperform(ScenarioArgs),
    /// Tabulate the oscillator counterexample and the sqrt-QV refinement scan.
    Counterexample {
        /// Comma-separated, increasing truncation depths.
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
        n_max: Vec<usize>,
        /// Seed for the absorbed-Brownian refinement scan.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate scenario summaries into a comparison table.
    Report {
        /// summary.json files produced by `generate` or `outperform`.
        files: Vec<PathBuf>,
        /// Write aggregated JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a flat CSV table.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Validation("threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn load_scenario(args: &ScenarioArgs) -> Result<(sptsim_cli::ScenarioConfig, PathBuf), CliError> {
    init_threads(args.threads)?;
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed_override {
        config.sim.seed = seed;
    }
    Ok((config, resolve_out_dir(args.out.clone())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let (config, out_dir) = load_scenario(&args)?;
            let summary = run_simulate(&config, &out_dir)?;
            println!(
                "simulated {} paths of `{}` (seed {}); {} saw a weight vanish",
                summary.n_paths,
                summary.scenario.name,
                summary.seed,
                summary.n_paths_with_vanished_weight
            );
        }
        Command::Generate(args) => {
            let (config, out_dir) = load_scenario(&args)?;
            let summary = run_scenario(&config, &out_dir)?;
            let res = &summary.identity_residuals;
            println!(
                "ran `{}`: {} paths (seed {}); residuals: value {:.2e}, self-financing {:.2e}, \
                 decomposition {:.2e}{}",
                summary.scenario.name,
                summary.n_paths,
                summary.seed,
                res.max_value_definition,
                res.max_self_financing,
                res.max_additive_decomposition,
                res.max_master_relative
                    .map_or(String::new(), |m| format!(", master {m:.2e}")),
            );
        }
        Command::Outperform(args) => {
            let (config, out_dir) = load_scenario(&args)?;
            if config.diagnostics.outperformance.is_none() {
                return Err(CliError::Validation(
                    "outperform needs a diagnostics.outperformance section in the config".into(),
                ));
            }
            let summary = run_scenario(&config, &out_dir)?;
            for report in [
                summary.outperformance_additive.as_ref(),
                summary.outperformance_multiplicative.as_ref(),
            ]
            .into_iter()
            .flatten()
            {
                println!(
                    "{:?} T*={}: condition met on {}/{} paths, certified {}, final V>1 on {:.1}%",
                    report.mode,
                    report.t_star,
                    report.n_condition_met,
                    report.n_paths,
                    report.n_certified,
                    100.0 * report.fraction_final_above_one
                );
            }
        }
        Command::Counterexample { n_max, seed, out } => {
            let report = variation_divergence_report(&n_max, seed)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let out_dir = resolve_out_dir(out);
            std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Runtime(e.to_string()))?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            std::fs::write(out_dir.join("counterexample.json"), json + "\n")
                .map_err(|e| CliError::Runtime(e.to_string()))?;

            let mut csv = String::from(
                "n_max,tv_x,tv_x_series_bound,tv_sqrt_x,tv_sqrt_lower_bound,tv_sqrt_series\n",
            );
            for row in &report.rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    row.n_max,
                    sptsim_cli::scenario::fmt_float(row.tv_x),
                    sptsim_cli::scenario::fmt_float(row.tv_x_series_bound),
                    sptsim_cli::scenario::fmt_float(row.tv_sqrt_x),
                    sptsim_cli::scenario::fmt_float(row.tv_sqrt_lower_bound),
                    sptsim_cli::scenario::fmt_float(row.tv_sqrt_series),
                ));
            }
            std::fs::write(out_dir.join("counterexample.csv"), csv)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            for row in &report.rows {
                println!(
                    "n_max {:>6}: TV(X) = {:.4} (bound {:.4}), TV(sqrt X) = {:.4}",
                    row.n_max, row.tv_x, row.tv_x_series_bound, row.tv_sqrt_x
                );
            }
            println!(
                "sqrt-QV refinement: grew on {:.1}% of {} paths",
                100.0 * report.sqrt_qv.fraction_grew,
                report.sqrt_qv.n_paths
            );
        }
        Command::Report { files, out, csv } => {
            let report = aggregate(&files)?;
            write_report(&report, out.as_deref(), csv.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
