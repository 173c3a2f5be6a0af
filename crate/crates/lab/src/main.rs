use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use wcsee_core::experiments::{load_config, run, ExperimentSpec, Mode, Sweep};

/// Runs WCSEE experiments and writes CSV results.
#[derive(Parser, Debug)]
#[command(name = "wcsee-lab", version)]
struct Cli {
    /// train-sac, train-ddpg, sca-benchmark, eval or sweep
    mode: String,
    /// key = value configuration file
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated seeds, one job per seed and sweep point
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,
    /// Sweep as axis=v1,v2,... with axis one of p_max (dBm), m, nu, batch
    #[arg(long)]
    sweep: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| {
        let mode = Mode::parse(&cli.mode)?;
        let config = load_config(&cli.config)?;
        let sweep = cli.sweep.as_deref().map(Sweep::parse).transpose()?;
        let spec = ExperimentSpec::new(mode, config, cli.seeds.clone(), cli.out.clone(), sweep)?;
        run(&spec)
    })();
    match result {
        Ok(report) => {
            println!("wrote {} files to {}", report.files.len(), cli.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("wcsee-lab: {e}");
            ExitCode::FAILURE
        }
    }
}
