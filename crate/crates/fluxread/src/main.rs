use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fluxread::commands::{self, CalibrationInputs, Context};
use fluxread::{CliError, Config, Result, WORKERS_ENV};

#[derive(Parser)]
#[command(
    name = "fluxread",
    version,
    about = "Flux-pulse-assisted fluxonium readout simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML config; the paper device is used when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    shots: Option<usize>,
    /// Also write SVG plots
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Transition frequencies against flux
    Spectrum,
    /// Dispersive shift and dressed resonator frequencies against flux
    Chi,
    /// SNR and assignment error against integration time, FPA and sweet spot
    Readout,
    /// Efficiency and photon number from measured curves
    Calibrate {
        #[arg(long)]
        snr_csv: Option<PathBuf>,
        #[arg(long)]
        coherence_csv: Option<PathBuf>,
        #[arg(long)]
        ramsey_csv: Option<PathBuf>,
        #[arg(long)]
        linewidth_csv: Option<PathBuf>,
    },
    /// Assignment error over a (delta_flux, n_bar) grid
    Sweep,
}

fn init_workers() -> Result<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "{WORKERS_ENV} must be a positive integer, got {v:?}"
        ))
    })?;
    // fails only if a pool already exists
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    init_workers()?;
    let mut cfg = match &cli.common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.common.seed {
        cfg.shots.seed = s;
    }
    if let Some(n) = cli.common.shots {
        cfg.shots.n_shots = n;
    }
    let out = cli
        .common
        .out
        .clone()
        .unwrap_or_else(|| cfg.output.dir.clone());
    let ctx = Context {
        cfg,
        out,
        svg: cli.common.svg,
    };
    match cli.command {
        Command::Spectrum => commands::spectrum(&ctx),
        Command::Chi => commands::chi(&ctx),
        Command::Readout => commands::readout(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Calibrate {
            snr_csv,
            coherence_csv,
            ramsey_csv,
            linewidth_csv,
        } => {
            let inputs = CalibrationInputs {
                snr: snr_csv,
                coherence: coherence_csv,
                ramsey: ramsey_csv,
                linewidth: linewidth_csv,
            };
            commands::calibrate(&ctx, &inputs)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
