use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;
use maten_lab::config::{ConfigFile, Experiment, ExperimentConfig, Overrides};

/// Noise characterization experiments for single-layer QAOA circuits.
#[derive(Parser, Debug)]
#[command(name = "maten-lab", version)]
struct Cli {
    experiment: Experiment,
    /// JSON configuration; omitted fields take per-experiment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Full-size runs instead of the quick defaults.
    #[arg(long)]
    full: bool,
    /// Keep all local fields at zero in the sweeps that otherwise add them.
    #[arg(long)]
    keep_symmetric: bool,
    /// Measured-data CSV to characterize instead of simulating.
    #[arg(long)]
    ingest: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let ov = Overrides { seed: cli.seed, full: cli.full, keep_symmetric: cli.keep_symmetric, ingest: cli.ingest.clone() };
    let cfg = ExperimentConfig::resolve(cli.experiment, file, &ov)?;
    for path in maten_lab::run(&cfg, &cli.out)? {
        println!("{}", path.display());
    }
    Ok(())
}
