//! Experiment configuration: the JSON file form, in which every field is
//! optional, and the resolved form with all defaults filled in.

use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use maten_core::channels::BuiltinChannel;
use maten_core::maten::{SamplingMode, Shots};
use maten_core::metrics::ChannelKind;
use maten_core::QuboProblem;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    LocalRecovery,
    NonlocalSweep,
    ShotSweep,
    OverrotationSweep,
    FidelitySweep,
    LowerBound,
    Characterize,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::LocalRecovery => "local-recovery",
            Experiment::NonlocalSweep => "nonlocal-sweep",
            Experiment::ShotSweep => "shot-sweep",
            Experiment::OverrotationSweep => "overrotation-sweep",
            Experiment::FidelitySweep => "fidelity-sweep",
            Experiment::LowerBound => "lower-bound",
            Experiment::Characterize => "characterize",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Line,
    Ring,
    Complete,
    /// Fields and all-to-all couplings drawn uniformly from `[0, 1)`.
    Random,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Line => "line",
            Family::Ring => "ring",
            Family::Complete => "complete",
            Family::Random => "random",
        }
    }
}

/// Problem description: either a named family with uniform weights or an
/// explicit list of fields and couplings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default)]
    pub family: Option<Family>,
    /// Uniform local field for named families.
    #[serde(default)]
    pub h: Option<f64>,
    /// Uniform coupling for named families.
    #[serde(default)]
    pub j: Option<f64>,
    /// Explicit per-qubit fields; overrides `family`.
    #[serde(default)]
    pub fields: Option<Vec<f64>>,
    /// Explicit `(i, j, weight)` couplings, used with `fields`.
    #[serde(default)]
    pub couplings: Option<Vec<(usize, usize, f64)>>,
}

impl ProblemSpec {
    pub fn family(family: Family, h: f64, j: f64) -> Self {
        ProblemSpec { family: Some(family), h: Some(h), j: Some(j), fields: None, couplings: None }
    }

    /// Expands the description for `n` qubits; random families draw from `rng`.
    pub fn build<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<QuboProblem> {
        if let Some(fields) = &self.fields {
            ensure!(fields.len() == n, "problem has {} fields but n_qubits = {n}", fields.len());
            return Ok(QuboProblem::new(fields.clone(), self.couplings.clone().unwrap_or_default())?);
        }
        let h = self.h.unwrap_or(0.0);
        let j = self.j.unwrap_or(1.0);
        let p = match self.family.unwrap_or(Family::Complete) {
            Family::Line => QuboProblem::line(n, h, j)?,
            Family::Ring => QuboProblem::ring(n, h, j)?,
            Family::Complete => QuboProblem::complete(n, h, j)?,
            Family::Random => QuboProblem::random(n, rng)?,
        };
        Ok(p)
    }

    fn with_default_field(mut self, h: f64) -> Self {
        if self.fields.is_none() && self.h.is_none() {
            self.h = Some(h);
        }
        self
    }
}

/// Where the local single-qubit channels come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LocalNoise {
    /// A fresh random valid channel per trial (and per qubit where the
    /// experiment varies it).
    Random,
    Builtin { channel: BuiltinChannel },
}

/// One column of the characterization correlation table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Replaces the experiment-level problem for this scenario.
    #[serde(default)]
    pub problem: Option<ProblemSpec>,
    /// Measured data for this scenario; simulated when absent.
    #[serde(default)]
    pub ingest: Option<PathBuf>,
}

/// Configuration as read from disk. Absent fields take per-experiment
/// defaults, which depend on `--full`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<Experiment>,
    pub n_qubits: Option<usize>,
    pub n_qubits_grid: Option<Vec<usize>>,
    pub problem: Option<ProblemSpec>,
    pub families: Option<Vec<Family>>,
    pub n_settings: Option<usize>,
    pub settings_grid: Option<Vec<usize>>,
    pub testing_settings: Option<usize>,
    pub shots: Option<Shots>,
    pub shots_grid: Option<Vec<Shots>>,
    pub sampling_mode: Option<SamplingMode>,
    pub local_noise: Option<LocalNoise>,
    pub c_grid: Option<Vec<f64>>,
    pub omega_grid: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub kind: Option<ChannelKind>,
    pub samples: Option<usize>,
    pub chi00_grid: Option<Vec<f64>>,
    pub restarts: Option<usize>,
    pub scenarios: Option<Vec<Scenario>>,
    pub project: Option<bool>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Fully resolved configuration; this is what every output echoes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub full: bool,
    pub n_qubits: usize,
    pub n_qubits_grid: Vec<usize>,
    pub problem: ProblemSpec,
    pub families: Vec<Family>,
    pub n_settings: usize,
    pub settings_grid: Vec<usize>,
    pub testing_settings: usize,
    pub shots: Shots,
    pub shots_grid: Vec<Shots>,
    pub sampling_mode: SamplingMode,
    pub local_noise: LocalNoise,
    pub c_grid: Vec<f64>,
    pub omega_grid: Vec<f64>,
    pub trials: usize,
    pub kind: ChannelKind,
    pub samples: usize,
    pub chi00_grid: Vec<f64>,
    pub restarts: usize,
    pub scenarios: Vec<Scenario>,
    pub project: bool,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

/// Command-line adjustments applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub full: bool,
    pub keep_symmetric: bool,
    pub ingest: Option<PathBuf>,
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn round(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

impl ExperimentConfig {
    pub fn resolve(experiment: Experiment, file: ConfigFile, ov: &Overrides) -> Result<Self> {
        if let Some(e) = file.experiment {
            ensure!(e == experiment, "config is for {} but {} was requested", e.name(), experiment.name());
        }
        let full = ov.full;
        let trials_default = if full { 100 } else { 20 };
        let symmetric_field = if ov.keep_symmetric { 0.0 } else { 1.0 };
        use Experiment::*;
        let n_default = match experiment {
            LocalRecovery | NonlocalSweep | ShotSweep => 2,
            OverrotationSweep => {
                if full {
                    10
                } else {
                    6
                }
            }
            FidelitySweep => 2,
            LowerBound => 2,
            Characterize => 6,
        };
        let problem_default = match experiment {
            LocalRecovery => ProblemSpec { family: Some(Family::Random), h: None, j: None, fields: None, couplings: None },
            NonlocalSweep | ShotSweep => ProblemSpec::family(Family::Complete, symmetric_field, 1.0),
            OverrotationSweep => ProblemSpec::family(Family::Ring, symmetric_field, 1.0),
            Characterize => ProblemSpec::family(Family::Line, 1.0, 1.0),
            FidelitySweep | LowerBound => ProblemSpec::family(Family::Complete, 0.0, 1.0),
        };
        let mut problem = file.problem.unwrap_or(problem_default);
        if matches!(experiment, NonlocalSweep | ShotSweep | OverrotationSweep) {
            problem = problem.with_default_field(symmetric_field);
            if ov.keep_symmetric {
                problem.h = Some(0.0);
            }
        }
        let n_settings_default = match experiment {
            LocalRecovery => 16,
            Characterize => 100,
            _ => 50,
        };
        let n_settings = file.n_settings.unwrap_or(n_settings_default);
        let shots_default = match experiment {
            LocalRecovery | ShotSweep => Shots::Count(if full { 1_000_000 } else { 100_000 }),
            _ => Shots::Exact,
        };
        let shots_grid_default = match experiment {
            LocalRecovery => {
                let mut g: Vec<Shots> = [1_000u64, 10_000, 100_000, 1_000_000].map(Shots::Count).to_vec();
                if !full {
                    g.retain(|s| matches!(s, Shots::Count(n) if *n <= 100_000));
                }
                g.push(Shots::Exact);
                g
            }
            ShotSweep => {
                let mut g: Vec<Shots> = [100u64, 1_000, 10_000, 100_000, 1_000_000].map(Shots::Count).to_vec();
                g.push(Shots::Exact);
                g
            }
            _ => vec![file.shots.unwrap_or(shots_default)],
        };
        let mut scenarios = file.scenarios.unwrap_or_default();
        if let Some(path) = &ov.ingest {
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "ingested".into());
            scenarios = vec![Scenario { name, problem: None, ingest: Some(path.clone()) }];
        }
        if scenarios.is_empty() {
            scenarios.push(Scenario { name: "simulated".into(), problem: None, ingest: None });
        }

        let cfg = ExperimentConfig {
            experiment,
            full,
            n_qubits: file.n_qubits.unwrap_or(n_default),
            n_qubits_grid: file.n_qubits_grid.unwrap_or_else(|| match experiment {
                LowerBound => vec![2, 3],
                _ => vec![file.n_qubits.unwrap_or(n_default)],
            }),
            problem,
            families: file.families.unwrap_or_else(|| vec![Family::Ring, Family::Complete]),
            n_settings,
            settings_grid: file.settings_grid.unwrap_or_else(|| match experiment {
                LocalRecovery => vec![4, 8, 16, 32, 64],
                _ => vec![n_settings],
            }),
            testing_settings: file.testing_settings.unwrap_or(n_settings),
            shots: file.shots.unwrap_or(shots_default),
            shots_grid: file.shots_grid.unwrap_or(shots_grid_default),
            sampling_mode: file.sampling_mode.unwrap_or(match experiment {
                ShotSweep => SamplingMode::GaussianPerturbation,
                _ => SamplingMode::Multinomial,
            }),
            local_noise: file.local_noise.unwrap_or(LocalNoise::Random),
            c_grid: file.c_grid.unwrap_or_else(|| match experiment {
                ShotSweep => vec![0.0],
                _ => grid(0.0, 1.0, 11).into_iter().map(round).collect(),
            }),
            omega_grid: file.omega_grid.unwrap_or_else(|| {
                let mut g: Vec<f64> = (0..=5).map(|k| round(0.01 * k as f64)).collect();
                g.extend([0.1, 0.2, 0.3, 0.4, 0.5]);
                g
            }),
            trials: file.trials.unwrap_or(match experiment {
                OverrotationSweep if !full => 5,
                _ => trials_default,
            }),
            kind: file.kind.unwrap_or(ChannelKind::Pauli),
            samples: file.samples.unwrap_or(if full { 10_000 } else { 1_000 }),
            chi00_grid: file.chi00_grid.unwrap_or_else(|| grid(0.0, 1.0, 21).into_iter().map(round).collect()),
            restarts: file.restarts.unwrap_or(maten_core::metrics::DEFAULT_RESTARTS),
            scenarios,
            project: file.project.unwrap_or(false),
            seed: ov.seed.or(file.seed).unwrap_or(0),
            output: file.output,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults only, as if the config file were empty.
    pub fn defaults(experiment: Experiment) -> Result<Self> {
        Self::resolve(experiment, ConfigFile::default(), &Overrides::default())
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.trials >= 1, "trials must be at least 1");
        ensure!(self.n_qubits >= 1, "n_qubits must be at least 1");
        ensure!(!self.settings_grid.is_empty(), "settings_grid is empty");
        ensure!(!self.shots_grid.is_empty(), "shots_grid is empty");
        ensure!(!self.c_grid.is_empty(), "c_grid is empty");
        ensure!(!self.omega_grid.is_empty(), "omega_grid is empty");
        ensure!(!self.families.is_empty(), "families is empty");
        ensure!(!self.chi00_grid.is_empty(), "chi00_grid is empty");
        ensure!(!self.n_qubits_grid.is_empty(), "n_qubits_grid is empty");
        ensure!(self.samples >= 1, "samples must be at least 1");
        ensure!(self.restarts >= 1, "restarts must be at least 1");
        ensure!(self.testing_settings == 0 || self.testing_settings >= 2, "testing_settings must be 0 or at least 2");
        for &s in self.settings_grid.iter().chain([&self.n_settings]) {
            ensure!(s >= maten_core::maten::MIN_SETTINGS, "|S| = {s} is below the minimum of 4");
        }
        for &c in &self.c_grid {
            ensure!((0.0..=1.0).contains(&c), "c = {c} outside [0, 1]");
        }
        for &w in &self.omega_grid {
            ensure!((0.0..=1.0).contains(&w), "omega = {w} outside [0, 1]");
        }
        for &x in &self.chi00_grid {
            ensure!((0.0..=1.0).contains(&x), "chi00 = {x} outside [0, 1]");
        }
        match self.experiment {
            Experiment::NonlocalSweep | Experiment::ShotSweep if !(1..=5).contains(&self.n_qubits) => {
                bail!("nonlocal channels support 1..=5 qubits")
            }
            Experiment::NonlocalSweep | Experiment::ShotSweep | Experiment::OverrotationSweep
                if self.testing_settings == 0 =>
            {
                bail!("{} reports testing correlations, so testing_settings must be positive", self.experiment.name())
            }
            _ => {}
        }
        Ok(())
    }

    /// One-line JSON echo used as the header comment of every output.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_for_every_experiment() {
        for e in [
            Experiment::LocalRecovery,
            Experiment::NonlocalSweep,
            Experiment::ShotSweep,
            Experiment::OverrotationSweep,
            Experiment::FidelitySweep,
            Experiment::LowerBound,
            Experiment::Characterize,
        ] {
            let cfg = ExperimentConfig::defaults(e).unwrap();
            assert_eq!(cfg.experiment, e);
            let back: ExperimentConfig = serde_json::from_str(&cfg.echo()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn symmetry_flag_controls_fields() {
        let broken = ExperimentConfig::defaults(Experiment::NonlocalSweep).unwrap();
        assert_eq!(broken.problem.h, Some(1.0));
        let ov = Overrides { keep_symmetric: true, ..Default::default() };
        let sym = ExperimentConfig::resolve(Experiment::NonlocalSweep, ConfigFile::default(), &ov).unwrap();
        assert_eq!(sym.problem.h, Some(0.0));
    }

    #[test]
    fn full_flag_scales_up() {
        let ov = Overrides { full: true, ..Default::default() };
        let cfg = ExperimentConfig::resolve(Experiment::OverrotationSweep, ConfigFile::default(), &ov).unwrap();
        assert_eq!(cfg.n_qubits, 10);
        assert_eq!(cfg.trials, 100);
        let fs = ExperimentConfig::resolve(Experiment::FidelitySweep, ConfigFile::default(), &ov).unwrap();
        assert_eq!(fs.samples, 10_000);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad: ConfigFile = serde_json::from_str(r#"{"trials": 0}"#).unwrap();
        assert!(ExperimentConfig::resolve(Experiment::NonlocalSweep, bad, &Overrides::default()).is_err());
        let bad: ConfigFile = serde_json::from_str(r#"{"c_grid": []}"#).unwrap();
        assert!(ExperimentConfig::resolve(Experiment::NonlocalSweep, bad, &Overrides::default()).is_err());
        assert!(serde_json::from_str::<ConfigFile>(r#"{"tirals": 3}"#).is_err());
        let wrong: ConfigFile = serde_json::from_str(r#"{"experiment": "lower-bound"}"#).unwrap();
        assert!(ExperimentConfig::resolve(Experiment::ShotSweep, wrong, &Overrides::default()).is_err());
    }
}
