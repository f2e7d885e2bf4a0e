use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsa_cli::commands::{cmd_density, cmd_fit, cmd_replicate, cmd_simulate, cmd_tau};
use dsa_cli::config::ScenarioSection;
use dsa_cli::{CliError, Overrides, RunConfig};
use dsa_core::Variant;

/// Dynamical survival analysis for stochastic epidemic models.
#[derive(Parser)]
#[command(name = "dsa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// TOML config file, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config file).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a data set from the [scenario] section.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the model to observed data.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Count CSV (overrides data.counts).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Initial susceptibles when the data file does not declare N.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Simulate-and-fit replication study with coverage report.
    Replicate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
    },
    /// Infection-time density curve for the [scenario] parameters or the
    /// values given as flags.
    Density {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<Variant>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Final-size fraction tau for given R0 and rho.
    Tau {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        r0: f64,
        #[arg(long)]
        rho: f64,
    },
}

fn load(common: &Common, overrides: Overrides) -> Result<RunConfig, CliError> {
    let cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.with_overrides(&Overrides { seed: common.seed, out: common.out.clone(), ..overrides })
}

fn report(paths: Vec<PathBuf>) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common } => report(cmd_simulate(&load(&common, Overrides::default())?)?),
        Command::Fit { common, data, n, draws, burn_in, chains } => {
            let cfg = load(&common, Overrides { counts: data, n, draws, burn_in, chains, ..Default::default() })?;
            report(cmd_fit(&cfg)?);
            let summary = std::fs::read_to_string(cfg.out_dir()?.join("summary.txt")).unwrap_or_default();
            print!("{summary}");
        }
        Command::Replicate { common, replicates, draws, burn_in } => {
            let cfg = load(&common, Overrides { replicates, draws, burn_in, ..Default::default() })?;
            report(cmd_replicate(&cfg)?);
            let table = std::fs::read_to_string(cfg.out_dir()?.join("coverage.txt")).unwrap_or_default();
            print!("{table}");
        }
        Command::Density { common, model, beta, gamma, rho, nu, t_end } => {
            let mut cfg = load(&common, Overrides::default())?;
            if let Some(m) = model {
                cfg.model = m;
            }
            let sc = match cfg.scenario.take() {
                Some(sc) => sc,
                None => match (beta, gamma, rho) {
                    (Some(beta), Some(gamma), Some(rho)) => ScenarioSection::new(beta, gamma, rho, 0),
                    _ => {
                        return Err(CliError::Config(
                            "density needs a [scenario] section or --beta, --gamma and --rho".into(),
                        ))
                    }
                },
            };
            cfg.scenario = Some(ScenarioSection {
                beta: beta.unwrap_or(sc.beta),
                gamma: gamma.unwrap_or(sc.gamma),
                rho: rho.unwrap_or(sc.rho),
                nu: nu.unwrap_or(sc.nu),
                t_end: t_end.unwrap_or(sc.t_end),
                ..sc
            });
            report(cmd_density(&cfg)?);
        }
        Command::Tau { r0, rho, .. } => println!("{}", cmd_tau(r0, rho)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
