//! Experiment runners. Each returns typed rows in a deterministic order; the
//! trial index fixes every random draw through a derived seed, so results do
//! not depend on thread scheduling.

use anyhow::{bail, ensure, Context, Result};
use maten_core::channels::{
    builtin, mix, random_channel, random_local_chi, Channel, ChiMatrix, NoiseSpec,
};
use maten_core::maten::{
    characterize, generate_settings, ingest_expectations, noisy_expectations, predict_two_qubit,
    CharacterizationResult, ExpectationTable, Shots, DEFAULT_BETA_RANGE, DEFAULT_GAMMA_RANGE,
};
use maten_core::metrics::{
    choi_fidelity, fidelity_sweep, l2_chi, minimize_ma_fidelity, pearson, state_fidelity, FidelityRecord,
    LowerBoundPoint,
};
use maten_core::qsim::{build_qaoa_state, evolve_noisy_qaoa, two_qubit_expectation, Basis, ParamSetting};
use maten_core::{seeds, QuboProblem};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Family, LocalNoise, Scenario};

// Stream tags keep the random draws of different experiments independent.
const TAG_LOCAL: u64 = 1;
const TAG_NONLOCAL: u64 = 2;
const TAG_SHOTS: u64 = 3;
const TAG_OVERROT: u64 = 4;
const TAG_CHARACTERIZE: u64 = 5;
const TAG_TRAIN: u64 = 10;
const TAG_TEST: u64 = 11;
const TAG_SAMPLING: u64 = 12;

fn shots_key(s: Shots) -> u64 {
    match s {
        Shots::Exact => u64::MAX,
        Shots::Count(n) => n,
    }
}

fn local_channel(noise: &LocalNoise, rng: &mut ChaCha8Rng) -> Result<ChiMatrix> {
    Ok(match noise {
        LocalNoise::Random => random_local_chi(rng).chi,
        LocalNoise::Builtin { channel } => builtin(channel)?.to_chi(),
    })
}

fn settings_for(count: usize, seed: u64, path: &[u64]) -> Result<Vec<ParamSetting>> {
    Ok(generate_settings(count, seeds::derive(seed, path), DEFAULT_GAMMA_RANGE, DEFAULT_BETA_RANGE)?.settings)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalRecoveryRow {
    pub n_settings: usize,
    pub shots: Shots,
    pub trial: usize,
    /// Mean over qubits of the Frobenius distance between true and fitted χ.
    pub l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalRecoverySummary {
    pub n_settings: usize,
    pub shots: Shots,
    pub trials: usize,
    pub mean_l2: f64,
    pub std_l2: f64,
    pub median_l2: f64,
}

/// Identical random local channel on every qubit of a random QUBO instance;
/// distance between the injected and recovered χ over a grid of `|S|` and
/// shot counts.
pub fn run_local_recovery(cfg: &ExperimentConfig) -> Result<Vec<LocalRecoveryRow>> {
    let n = cfg.n_qubits;
    let jobs: Vec<(usize, Shots, usize)> = cfg
        .settings_grid
        .iter()
        .flat_map(|&s| cfg.shots_grid.iter().flat_map(move |&sh| (0..cfg.trials).map(move |t| (s, sh, t))))
        .collect();
    let mut rows: Vec<LocalRecoveryRow> = jobs
        .par_iter()
        .map(|&(n_settings, shots, trial)| {
            let mut rng = seeds::rng(cfg.seed, &[TAG_LOCAL, trial as u64]);
            let problem = cfg.problem.build(n, &mut rng)?;
            let chi_in = local_channel(&cfg.local_noise, &mut rng)?;
            let settings = settings_for(n_settings, cfg.seed, &[TAG_LOCAL, TAG_TRAIN, trial as u64, n_settings as u64])?;
            let noise = NoiseSpec::uniform_local(&Channel::Chi(chi_in.clone()), n)?;
            let sample_seed = seeds::derive(cfg.seed, &[TAG_LOCAL, TAG_SAMPLING, trial as u64, n_settings as u64, shots_key(shots)]);
            let noisy = noisy_expectations(&problem, &settings, &noise, shots, cfg.sampling_mode, sample_seed)?;
            let res = characterize(&problem, &settings, &noisy, None, false)?;
            let total: f64 = res.qubits.iter().map(|q| l2_chi(&chi_in, &q.chi)).sum::<maten_core::Result<f64>>()?;
            Ok(LocalRecoveryRow { n_settings, shots, trial, l2: total / n as f64 })
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|r| (r.n_settings, shots_key(r.shots), r.trial));
    Ok(rows)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

pub fn summarize_local_recovery(rows: &[LocalRecoveryRow]) -> Vec<LocalRecoverySummary> {
    let mut keys: Vec<(usize, Shots)> = rows.iter().map(|r| (r.n_settings, r.shots)).collect();
    keys.dedup();
    keys.into_iter()
        .map(|(s, sh)| {
            let xs: Vec<f64> = rows.iter().filter(|r| r.n_settings == s && r.shots == sh).map(|r| r.l2).collect();
            let (mean, std) = mean_std(&xs);
            LocalRecoverySummary { n_settings: s, shots: sh, trials: xs.len(), mean_l2: mean, std_l2: std, median_l2: median(&xs) }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonlocalRow {
    pub c: f64,
    pub trial: usize,
    pub avg_corr_test: Option<f64>,
    pub choi_fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShotSweepRow {
    pub shots: Shots,
    pub trial: usize,
    pub avg_corr_test: Option<f64>,
    pub choi_fidelity: f64,
}

struct MixedNoiseTrial {
    problem: QuboProblem,
    local: Channel,
    nonlocal: Channel,
    train: Vec<ParamSetting>,
    test: Vec<ParamSetting>,
}

fn mixed_noise_trial(cfg: &ExperimentConfig, tag: u64, trial: usize) -> Result<MixedNoiseTrial> {
    let n = cfg.n_qubits;
    let mut rng = seeds::rng(cfg.seed, &[tag, trial as u64]);
    let problem = cfg.problem.build(n, &mut rng)?;
    let factors = (0..n)
        .map(|_| local_channel(&cfg.local_noise, &mut rng).map(Channel::Chi))
        .collect::<Result<Vec<_>>>()?;
    let local = Channel::product(factors)?;
    let nonlocal = Channel::Chi(random_channel(n, &mut rng)?);
    let train = settings_for(cfg.n_settings, cfg.seed, &[tag, TAG_TRAIN, trial as u64])?;
    let test = settings_for(cfg.testing_settings, cfg.seed, &[tag, TAG_TEST, trial as u64])?;
    Ok(MixedNoiseTrial { problem, local, nonlocal, train, test })
}

/// Testing correlation and Choi fidelity of the fitted marginal model for the
/// global channel `(1 - c) local + c nonlocal`.
fn evaluate_mixture(
    cfg: &ExperimentConfig,
    t: &MixedNoiseTrial,
    c: f64,
    shots: Shots,
    sample_seed: u64,
) -> Result<(Option<f64>, f64)> {
    let channel = mix(c, &t.local, &t.nonlocal)?;
    // Kraus form once, instead of once per simulated setting
    let noise = NoiseSpec::global(Channel::Kraus(channel.to_kraus()?));
    let train = noisy_expectations(&t.problem, &t.train, &noise, shots, cfg.sampling_mode, sample_seed)?;
    let test = noisy_expectations(&t.problem, &t.test, &noise, shots, cfg.sampling_mode, seeds::mix64(sample_seed))?;
    let res = characterize(&t.problem, &t.train, &train, Some(&test), cfg.project)?;
    let fid = choi_fidelity(&channel, &res.maten_channel()?)?;
    Ok((res.test_correlation, fid.fidelity))
}

pub fn run_nonlocal_sweep(cfg: &ExperimentConfig) -> Result<Vec<NonlocalRow>> {
    let rows: Vec<Vec<NonlocalRow>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let t = mixed_noise_trial(cfg, TAG_NONLOCAL, trial)?;
            cfg.c_grid
                .iter()
                .enumerate()
                .map(|(ci, &c)| {
                    let seed = seeds::derive(cfg.seed, &[TAG_NONLOCAL, TAG_SAMPLING, trial as u64, ci as u64]);
                    let (corr, fid) = evaluate_mixture(cfg, &t, c, cfg.shots, seed)?;
                    Ok(NonlocalRow { c, trial, avg_corr_test: corr, choi_fidelity: fid })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<NonlocalRow> = rows.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.c.total_cmp(&b.c).then(a.trial.cmp(&b.trial)));
    Ok(rows)
}

/// Same model as the nonlocal sweep at the first `c` of the grid, varying the
/// shot count instead.
pub fn run_shot_sweep(cfg: &ExperimentConfig) -> Result<Vec<ShotSweepRow>> {
    let c = cfg.c_grid[0];
    let rows: Vec<Vec<ShotSweepRow>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let t = mixed_noise_trial(cfg, TAG_SHOTS, trial)?;
            cfg.shots_grid
                .iter()
                .map(|&shots| {
                    let seed = seeds::derive(cfg.seed, &[TAG_SHOTS, TAG_SAMPLING, trial as u64, shots_key(shots)]);
                    let (corr, fid) = evaluate_mixture(cfg, &t, c, shots, seed)?;
                    Ok(ShotSweepRow { shots, trial, avg_corr_test: corr, choi_fidelity: fid })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<ShotSweepRow> = rows.into_iter().flatten().collect();
    rows.sort_by_key(|r| (shots_key(r.shots), r.trial));
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverrotationRow {
    pub family: &'static str,
    pub omega: f64,
    pub trial: usize,
    pub corr_1q: Option<f64>,
    pub corr_2q: Option<f64>,
    pub state_fidelity: f64,
}

/// Two-qubit correlations and state fidelity of the fitted model on the
/// testing settings, against the exact noisy density matrices.
fn two_qubit_scores(
    problem: &QuboProblem,
    test: &[ParamSetting],
    noise: &NoiseSpec,
    res: &CharacterizationResult,
) -> Result<(Option<f64>, f64)> {
    let n = problem.n_qubits();
    let coeffs = res.coeffs();
    let model = res.maten_channel()?;
    let targets: Vec<usize> = (0..n).collect();
    let mut pred = vec![Vec::new(); 9];
    let mut obs = vec![Vec::new(); 9];
    let mut fid_sum = 0.0;
    for &s in test {
        let psi = build_qaoa_state(problem, s);
        let truth = evolve_noisy_qaoa(problem, s, noise)?;
        for i in 0..n {
            for j in i + 1..n {
                for (k, (a, b)) in Basis::ALL.iter().flat_map(|a| Basis::ALL.iter().map(move |b| (*a, *b))).enumerate() {
                    let (pa, pb) = (a.pauli(), b.pauli());
                    pred[k].push(predict_two_qubit(&psi, i, pa, &coeffs[i], j, pb, &coeffs[j]));
                    obs[k].push(two_qubit_expectation(&truth, i, pa, j, pb));
                }
            }
        }
        let predicted = maten_core::channels::apply(&model, &psi.to_density(), &targets)?;
        let mut m = predicted.into_matrix();
        let tr = m.trace();
        m /= tr;
        fid_sum += state_fidelity(truth.matrix(), &m)?;
    }
    let rs: Vec<f64> = pred.iter().zip(&obs).filter_map(|(p, o)| pearson(p, o).ok()).collect();
    let corr = if rs.is_empty() { None } else { Some(rs.iter().sum::<f64>() / rs.len() as f64) };
    Ok((corr, fid_sum / test.len() as f64))
}

pub fn run_overrotation_sweep(cfg: &ExperimentConfig) -> Result<Vec<OverrotationRow>> {
    let n = cfg.n_qubits;
    ensure!(n >= 2, "overrotation sweep needs at least two qubits");
    let jobs: Vec<(Family, usize, usize)> = cfg
        .families
        .iter()
        .flat_map(|&f| (0..cfg.omega_grid.len()).flat_map(move |w| (0..cfg.trials).map(move |t| (f, w, t))))
        .collect();
    let mut rows: Vec<OverrotationRow> = jobs
        .par_iter()
        .map(|&(family, wi, trial)| {
            let omega = cfg.omega_grid[wi];
            let mut spec = cfg.problem.clone();
            spec.family = Some(family);
            spec.fields = None;
            let mut rng = seeds::rng(cfg.seed, &[TAG_OVERROT, trial as u64]);
            let problem = spec.build(n, &mut rng)?;
            let train = settings_for(cfg.n_settings, cfg.seed, &[TAG_OVERROT, TAG_TRAIN, trial as u64])?;
            let test = settings_for(cfg.testing_settings, cfg.seed, &[TAG_OVERROT, TAG_TEST, trial as u64])?;
            let noise = NoiseSpec::InterleavedOverrotation { omega };
            let seed = seeds::derive(cfg.seed, &[TAG_OVERROT, TAG_SAMPLING, trial as u64, wi as u64]);
            let noisy = noisy_expectations(&problem, &train, &noise, cfg.shots, cfg.sampling_mode, seed)?;
            let noisy_test =
                noisy_expectations(&problem, &test, &noise, cfg.shots, cfg.sampling_mode, seeds::mix64(seed))?;
            let res = characterize(&problem, &train, &noisy, Some(&noisy_test), cfg.project)?;
            let (corr_2q, fid) = two_qubit_scores(&problem, &test, &noise, &res)?;
            Ok(OverrotationRow {
                family: family.name(),
                omega,
                trial,
                corr_1q: res.test_correlation,
                corr_2q,
                state_fidelity: fid,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.family.cmp(b.family).then(a.omega.total_cmp(&b.omega)).then(a.trial.cmp(&b.trial)));
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidelityRow {
    pub kind: &'static str,
    pub n_qubits: usize,
    pub sample_index: usize,
    pub chi00: f64,
    pub fidelity: f64,
}

impl From<FidelityRecord> for FidelityRow {
    fn from(r: FidelityRecord) -> Self {
        FidelityRow { kind: r.kind.as_str(), n_qubits: r.n_qubits, sample_index: r.sample_index, chi00: r.chi00, fidelity: r.fidelity }
    }
}

pub fn run_fidelity_sweep(cfg: &ExperimentConfig) -> Result<Vec<FidelityRow>> {
    let mut rows = Vec::new();
    for &n in &cfg.n_qubits_grid {
        rows.extend(fidelity_sweep(cfg.kind, n, cfg.samples, cfg.seed)?.into_iter().map(FidelityRow::from));
    }
    Ok(rows)
}

pub fn run_lower_bound(cfg: &ExperimentConfig) -> Result<Vec<LowerBoundPoint>> {
    let mut rows = Vec::new();
    for &n in &cfg.n_qubits_grid {
        rows.extend(minimize_ma_fidelity(n, &cfg.chi00_grid, cfg.restarts, cfg.seed)?);
    }
    Ok(rows)
}

/// Outcome of one characterization scenario.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    /// `simulated` or the ingested file path.
    pub source: String,
    pub problem: QuboProblem,
    /// Injected per-qubit channels, known only for simulated data.
    pub true_chi: Option<Vec<ChiMatrix>>,
    pub result: CharacterizationResult,
    /// Simulated training data, for export.
    #[serde(skip)]
    pub data: Option<ExpectationTable>,
}

pub fn run_characterize(cfg: &ExperimentConfig) -> Result<Vec<ScenarioReport>> {
    cfg.scenarios
        .iter()
        .enumerate()
        .map(|(si, sc)| characterize_scenario(cfg, si, sc).with_context(|| format!("scenario `{}`", sc.name)))
        .collect()
}

fn characterize_scenario(cfg: &ExperimentConfig, si: usize, sc: &Scenario) -> Result<ScenarioReport> {
    let n = cfg.n_qubits;
    let spec = sc.problem.as_ref().unwrap_or(&cfg.problem);
    let mut rng = seeds::rng(cfg.seed, &[TAG_CHARACTERIZE, si as u64]);
    let problem = spec.build(n, &mut rng)?;
    if let Some(path) = &sc.ingest {
        let table = ingest_expectations(path).with_context(|| format!("ingesting {}", path.display()))?;
        if table.n_qubits() != n {
            bail!("{} holds data for {} qubits but n_qubits = {n}", path.display(), table.n_qubits());
        }
        let settings = table.settings()?;
        let result = characterize(&problem, &settings, &table, None, cfg.project)?;
        return Ok(ScenarioReport {
            name: sc.name.clone(),
            source: path.display().to_string(),
            problem,
            true_chi: None,
            result,
            data: None,
        });
    }
    let chis = (0..n).map(|_| local_channel(&cfg.local_noise, &mut rng)).collect::<Result<Vec<_>>>()?;
    let noise = NoiseSpec::EndOfCircuit(
        chis.iter()
            .enumerate()
            .map(|(q, chi)| maten_core::channels::NoiseSite::new(Channel::Chi(chi.clone()), vec![q]))
            .collect::<maten_core::Result<Vec<_>>>()?,
    );
    let train = settings_for(cfg.n_settings, cfg.seed, &[TAG_CHARACTERIZE, TAG_TRAIN, si as u64])?;
    let seed = seeds::derive(cfg.seed, &[TAG_CHARACTERIZE, TAG_SAMPLING, si as u64]);
    let noisy = noisy_expectations(&problem, &train, &noise, cfg.shots, cfg.sampling_mode, seed)?;
    let testing = if cfg.testing_settings > 0 {
        let test = settings_for(cfg.testing_settings, cfg.seed, &[TAG_CHARACTERIZE, TAG_TEST, si as u64])?;
        Some(noisy_expectations(&problem, &test, &noise, cfg.shots, cfg.sampling_mode, seeds::mix64(seed))?)
    } else {
        None
    };
    let result = characterize(&problem, &train, &noisy, testing.as_ref(), cfg.project)?;
    Ok(ScenarioReport {
        name: sc.name.clone(),
        source: "simulated".into(),
        problem,
        true_chi: Some(chis),
        result,
        data: Some(noisy),
    })
}

/// Per-qubit correlation table with one column per scenario: the testing
/// correlation where a testing set exists, otherwise the training one.
pub fn correlation_table(reports: &[ScenarioReport]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["qubit".to_string()];
    header.extend(reports.iter().map(|r| r.name.clone()));
    let n = reports.iter().map(|r| r.result.n_qubits).max().unwrap_or(0);
    let rows = (0..n)
        .map(|q| {
            let mut row = vec![q.to_string()];
            for r in reports {
                let cell = r.result.qubits.get(q).and_then(|x| x.test_correlation.or(x.train_correlation));
                row.push(cell.map(|v| format!("{v:.4}")).unwrap_or_default());
            }
            row
        })
        .collect();
    (header, rows)
}
