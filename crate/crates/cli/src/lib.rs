//! Experiment harness around `maten-core`: configuration, sweep runners and
//! artifact writers behind the `maten-lab` binary.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;

use config::{Experiment, ExperimentConfig};
use experiments::*;

/// Runs the configured experiment and writes its artifacts into `out_dir`.
/// Returns the paths written.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let name = cfg.experiment.name();
    let csv_path = cfg.output.clone().unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    let csv_path = out_dir.join(csv_path);
    log::info!("running {name} (seed {})", cfg.seed);
    let written = match cfg.experiment {
        Experiment::LocalRecovery => {
            let rows = run_local_recovery(cfg)?;
            let summary = summarize_local_recovery(&rows);
            vec![
                output::write_rows(&csv_path, cfg, &rows)?,
                output::write_rows(&out_dir.join(format!("{name}-summary.csv")), cfg, &summary)?,
            ]
        }
        Experiment::NonlocalSweep => vec![output::write_rows(&csv_path, cfg, &run_nonlocal_sweep(cfg)?)?],
        Experiment::ShotSweep => vec![output::write_rows(&csv_path, cfg, &run_shot_sweep(cfg)?)?],
        Experiment::OverrotationSweep => vec![output::write_rows(&csv_path, cfg, &run_overrotation_sweep(cfg)?)?],
        Experiment::FidelitySweep => vec![output::write_rows(&csv_path, cfg, &run_fidelity_sweep(cfg)?)?],
        Experiment::LowerBound => vec![output::write_rows(&csv_path, cfg, &run_lower_bound(cfg)?)?],
        Experiment::Characterize => {
            let reports = run_characterize(cfg)?;
            #[derive(Serialize)]
            struct Body<'a> {
                scenarios: &'a [ScenarioReport],
            }
            let mut paths = vec![output::write_json(&out_dir.join(format!("{name}.json")), cfg, &Body { scenarios: &reports })?];
            let (header, rows) = correlation_table(&reports);
            paths.push(output::write_table(&out_dir.join(format!("{name}-correlations.csv")), cfg, &header, &rows)?);
            for r in &reports {
                if let Some(data) = &r.data {
                    let path = out_dir.join(format!("{name}-{}-data.csv", r.name));
                    data.export(&path)?;
                    paths.push(path);
                }
            }
            paths
        }
    };
    Ok(written)
}
