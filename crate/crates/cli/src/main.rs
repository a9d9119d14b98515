//! Experiment runner: configure a scenario from JSON (plus flag
//! overrides), execute the Monte-Carlo trials, and emit CSV results and
//! a run manifest.

use clap::{Args, Parser, Subcommand};
use fbmc_mimo::scenario::{run_scenario, sweep, ScenarioConfig};
use fbmc_mimo::Error;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "fbmc-mimo",
    version,
    about = "Link-level downlink simulator for FBMC-OQAM massive MIMO (co-located and cell-free)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario config file (JSON); defaults apply for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for CSV results and the run manifest.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,

    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one scenario.
    Run(CommonArgs),
    /// Execute the scenario once per value of one numeric config axis.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Config field to sweep (e.g. num_antennas, ap_threshold_db).
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Parse and cross-check a config, print the normalized form.
    Validate(CommonArgs),
}

fn load_config(common: &CommonArgs) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            ScenarioConfig::from_json(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.trials = trials;
    }
    Ok(cfg)
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        // Ignore failure: the global pool may already exist in tests.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(common) => {
            init_threads(common.threads);
            let cfg = load_config(&common)?;
            cfg.validate()?;
            let summary = run_scenario(&cfg, common.out.as_deref())?;
            println!("{:<12} {:>14} {:>14} {:>10}", "lane", "mean SINR dB", "mean SIR dB", "trials");
            for (lane, report) in &summary.lanes {
                println!(
                    "{:<12} {:>14.3} {:>14.3} {:>10}",
                    lane.label(),
                    report.mean_sinr_db(),
                    report.mean_sir_db(),
                    report.trials()
                );
            }
            if let Some(out) = &common.out {
                println!("results written to {}", out.display());
            }
            Ok(())
        }
        Command::Sweep { common, axis, values } => {
            init_threads(common.threads);
            let cfg = load_config(&common)?;
            cfg.validate()?;
            let summary = sweep(&cfg, &axis, &values, common.out.as_deref())?;
            print!("{}", fbmc_mimo::scenario::sweep_csv(&summary));
            if let Some(out) = &common.out {
                println!("results written to {}", out.display());
            }
            Ok(())
        }
        Command::Validate(common) => {
            let cfg = load_config(&common)?;
            cfg.validate()?;
            println!("{}", cfg.to_json());
            eprintln!("configuration ok");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::InvalidParameter(_) => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::from(EXIT_NUMERICAL),
            }
        }
    }
}
