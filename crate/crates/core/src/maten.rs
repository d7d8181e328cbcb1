//! Marginal noise characterization: draw parameter settings, collect noisy
//! single-qubit expectations, regress them against ideal values, and rebuild
//! a per-qubit χ matrix from the fitted coefficients.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channels::{chi_from_params_raw, validate_cptp, Channel, ChiMatrix, ChiVec12, CptpReport, NoiseSpec};
use crate::dualmap::{chi_from_coeffs, CoeffVec};
use crate::error::{Error, Result};
use crate::linalg::{c, eigh, frobenius, CMatrix};
use crate::metrics::avg_xyz_correlation;
use crate::qsim::{
    build_qaoa_state, evolve_noisy_batch, sample_basis, single_qubit_expectation, Basis, ParamSetting, Pauli,
    QuantumState, QuboProblem, StateVector,
};
use crate::seeds;

pub const DEFAULT_GAMMA_RANGE: (f64, f64) = (0.0, 2.0 * std::f64::consts::PI);
pub const DEFAULT_BETA_RANGE: (f64, f64) = (0.0, std::f64::consts::PI);
pub const MIN_SETTINGS: usize = 4;
pub const RECOMMENDED_SETTINGS: usize = 16;
/// Design matrices with a larger condition number are treated as rank deficient.
pub const CONDITION_THRESHOLD: f64 = 1e8;
const VALUE_SLACK: f64 = 1e-9;
const CSV_HEADER: [&str; 7] = ["qubit", "setting_index", "gamma", "beta", "basis", "value", "shots"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingSet {
    pub settings: Vec<ParamSetting>,
    pub seed: u64,
}

impl SettingSet {
    pub fn len(&self) -> usize {
        self.settings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.settings.is_empty()
    }
}

/// Draws `count` settings i.i.d. uniform from `[lo, hi)` in each angle.
pub fn generate_settings(
    count: usize,
    seed: u64,
    gamma_range: (f64, f64),
    beta_range: (f64, f64),
) -> Result<SettingSet> {
    if count < MIN_SETTINGS {
        return Err(Error::InvalidParameter(format!(
            "{count} settings cannot determine a four-parameter fit; need at least {MIN_SETTINGS}"
        )));
    }
    for (name, (lo, hi)) in [("gamma", gamma_range), ("beta", beta_range)] {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!("empty {name} range [{lo}, {hi})")));
        }
    }
    if count < RECOMMENDED_SETTINGS {
        log::warn!("only {count} settings; fits with fewer than {RECOMMENDED_SETTINGS} are fragile");
    }
    let mut rng = seeds::rng(seed, &[0x5e77]);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng, (lo, hi): (f64, f64)| {
        let x = lo + (hi - lo) * rng.random::<f64>();
        if x < hi {
            x
        } else {
            lo
        }
    };
    let settings = (0..count)
        .map(|_| {
            let gamma = draw(&mut rng, gamma_range);
            let beta = draw(&mut rng, beta_range);
            ParamSetting::new(gamma, beta)
        })
        .collect();
    Ok(SettingSet { settings, seed })
}

/// Shot count attached to a measured value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shots {
    Exact,
    Count(u64),
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Exact => f.write_str("exact"),
            Shots::Count(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Shots {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("exact") {
            return Ok(Shots::Exact);
        }
        match s.parse::<u64>() {
            Ok(0) => Err("shots must be at least 1".into()),
            Ok(n) => Ok(Shots::Count(n)),
            Err(_) => Err(format!("shots must be a positive integer or `exact`, got `{s}`")),
        }
    }
}

impl Serialize for Shots {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Exact => s.serialize_str("exact"),
            Shots::Count(n) => s.serialize_u64(*n),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(0) => Err(serde::de::Error::custom("shots must be at least 1")),
            Raw::N(n) => Ok(Shots::Count(n)),
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Outcomes drawn from the exact measurement distribution.
    #[default]
    Multinomial,
    /// Exact value plus `N(0, 1/sqrt(shots))`, clipped to `[-1, 1]`.
    GaussianPerturbation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpectationRow {
    pub qubit: usize,
    pub setting_index: usize,
    pub gamma: f64,
    pub beta: f64,
    pub basis: Basis,
    pub value: f64,
    pub shots: Shots,
}

impl ExpectationRow {
    fn key(&self) -> (usize, usize, usize) {
        (self.setting_index, self.qubit, self.basis.index())
    }
}

/// Single-qubit expectation values keyed by `(qubit, setting, basis)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectationTable {
    rows: Vec<ExpectationRow>,
    index: BTreeMap<(usize, usize, usize), usize>,
}

impl ExpectationTable {
    /// Validates and sorts rows by setting, then qubit, then basis. Errors
    /// carry the 1-based position of the offending row.
    pub fn new(rows: Vec<ExpectationRow>) -> Result<Self> {
        Self::with_line_offset(rows, 1)
    }

    fn with_line_offset(mut rows: Vec<ExpectationRow>, first_line: usize) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (i, r) in rows.iter().enumerate() {
            let line = first_line + i;
            if !r.value.is_finite() || r.value.abs() > 1.0 + VALUE_SLACK {
                return Err(Error::ValueOutOfRange { line, value: r.value });
            }
            if !(r.gamma.is_finite() && r.beta.is_finite()) {
                return Err(Error::MalformedRow { line, message: "non-finite angle".into() });
            }
            if !seen.insert(r.key()) {
                return Err(Error::DuplicateRow {
                    line,
                    qubit: r.qubit,
                    setting: r.setting_index,
                    basis: r.basis.to_char(),
                });
            }
        }
        rows.sort_by_key(|r| r.key());
        let index = rows.iter().enumerate().map(|(i, r)| (r.key(), i)).collect();
        Ok(ExpectationTable { rows, index })
    }

    pub fn rows(&self) -> &[ExpectationRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// One more than the largest qubit index present.
    pub fn n_qubits(&self) -> usize {
        self.rows.iter().map(|r| r.qubit + 1).max().unwrap_or(0)
    }

    /// One more than the largest setting index present.
    pub fn n_settings(&self) -> usize {
        self.rows.iter().map(|r| r.setting_index + 1).max().unwrap_or(0)
    }

    pub fn get(&self, qubit: usize, setting: usize, basis: Basis) -> Option<f64> {
        self.index.get(&(setting, qubit, basis.index())).map(|&i| self.rows[i].value)
    }

    /// Angles per setting index; every row of a setting must agree.
    pub fn settings(&self) -> Result<Vec<ParamSetting>> {
        let mut out: Vec<Option<ParamSetting>> = vec![None; self.n_settings()];
        for r in &self.rows {
            match out[r.setting_index] {
                None => out[r.setting_index] = Some(ParamSetting::new(r.gamma, r.beta)),
                Some(s) if s.gamma == r.gamma && s.beta == r.beta => {}
                Some(_) => {
                    return Err(Error::InconsistentTables(format!(
                        "setting {} has conflicting angles",
                        r.setting_index
                    )))
                }
            }
        }
        out.into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| Error::MissingRows(vec![format!("setting={i}")])))
            .collect()
    }

    /// Errors with every absent `(qubit, setting, basis)` key.
    pub fn require_complete(&self, n_qubits: usize, n_settings: usize) -> Result<()> {
        let mut missing = Vec::new();
        for s in 0..n_settings {
            for q in 0..n_qubits {
                for b in Basis::ALL {
                    if self.get(q, s, b).is_none() {
                        missing.push(format!("qubit={q} setting={s} basis={}", b.to_char()));
                    }
                }
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingRows(missing))
        }
    }

    /// Rows for one qubit only.
    pub fn restrict_to_qubit(&self, qubit: usize) -> Result<ExpectationTable> {
        ExpectationTable::new(self.rows.iter().filter(|r| r.qubit == qubit).copied().collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(CSV_HEADER)?;
        for r in &self.rows {
            wtr.write_record([
                r.qubit.to_string(),
                r.setting_index.to_string(),
                r.gamma.to_string(),
                r.beta.to_string(),
                r.basis.to_char().to_string(),
                r.value.to_string(),
                r.shots.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
        let header = rdr.headers()?.clone();
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(Error::MalformedRow { line: 1, message: format!("expected header `{}`", CSV_HEADER.join(",")) });
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::MalformedRow { line, message: e.to_string() })?;
            rows.push(parse_row(&rec, line)?);
        }
        ExpectationTable::with_line_offset(rows, 2)
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

fn parse_row(rec: &csv::StringRecord, line: usize) -> Result<ExpectationRow> {
    let bad = |message: String| Error::MalformedRow { line, message };
    if rec.len() != CSV_HEADER.len() {
        return Err(bad(format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len())));
    }
    let uint = |k: usize| rec[k].parse::<usize>().map_err(|_| bad(format!("{} `{}` is not an index", CSV_HEADER[k], &rec[k])));
    let real = |k: usize| {
        rec[k].parse::<f64>().map_err(|_| bad(format!("{} `{}` is not a number", CSV_HEADER[k], &rec[k])))
    };
    let basis = {
        let mut chars = rec[4].chars();
        match (chars.next().and_then(Basis::from_char), chars.next()) {
            (Some(b), None) => b,
            _ => return Err(bad(format!("basis `{}` is not one of X, Y, Z", &rec[4]))),
        }
    };
    Ok(ExpectationRow {
        qubit: uint(0)?,
        setting_index: uint(1)?,
        gamma: real(2)?,
        beta: real(3)?,
        basis,
        value: real(5)?,
        shots: rec[6].parse().map_err(bad)?,
    })
}

/// Reads a measured-data CSV file.
pub fn ingest_expectations(path: impl AsRef<Path>) -> Result<ExpectationTable> {
    ExpectationTable::read_csv(std::fs::File::open(path)?)
}

fn exact_rows<S: QuantumState + ?Sized>(state: &S, s: usize, setting: ParamSetting) -> Vec<ExpectationRow> {
    let mut rows = Vec::with_capacity(3 * state.n_qubits());
    for q in 0..state.n_qubits() {
        for b in Basis::ALL {
            rows.push(ExpectationRow {
                qubit: q,
                setting_index: s,
                gamma: setting.gamma,
                beta: setting.beta,
                basis: b,
                value: single_qubit_expectation(state, q, b.pauli()),
                shots: Shots::Exact,
            });
        }
    }
    rows
}

/// Noise-free `<X>, <Y>, <Z>` on every qubit for every setting.
pub fn ideal_expectations(problem: &QuboProblem, settings: &[ParamSetting]) -> ExpectationTable {
    let rows: Vec<ExpectationRow> = settings
        .par_iter()
        .enumerate()
        .flat_map_iter(|(s, &setting)| exact_rows(&build_qaoa_state(problem, setting), s, setting))
        .collect();
    ExpectationTable::new(rows).expect("simulated rows are unique and in range")
}

/// Simulated noisy expectations. Each setting draws from its own stream
/// derived from `seed`, so results do not depend on thread scheduling.
pub fn noisy_expectations(
    problem: &QuboProblem,
    settings: &[ParamSetting],
    noise: &NoiseSpec,
    shots: Shots,
    mode: SamplingMode,
    seed: u64,
) -> Result<ExpectationTable> {
    let states = evolve_noisy_batch(problem, settings, noise)?;
    let per_setting: Vec<Vec<ExpectationRow>> = settings
        .par_iter()
        .zip(states.par_iter())
        .enumerate()
        .map(|(s, (&setting, rho))| -> Result<Vec<ExpectationRow>> {
            let mut rows = exact_rows(rho, s, setting);
            let Shots::Count(n) = shots else {
                return Ok(rows);
            };
            match mode {
                SamplingMode::Multinomial => {
                    for b in Basis::ALL {
                        let mut rng = seeds::rng(seed, &[s as u64, b.index() as u64]);
                        let sample = sample_basis(rho, b, n, &mut rng)?;
                        for r in rows.iter_mut().filter(|r| r.basis == b) {
                            r.value = sample.per_qubit_means[r.qubit];
                        }
                    }
                }
                SamplingMode::GaussianPerturbation => {
                    let mut rng = seeds::rng(seed, &[s as u64]);
                    let sd = 1.0 / (n as f64).sqrt();
                    for r in rows.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        r.value = (r.value + sd * z).clamp(-1.0, 1.0);
                    }
                }
            }
            for r in rows.iter_mut() {
                r.shots = shots;
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    ExpectationTable::new(per_setting.into_iter().flatten().collect())
}

/// Regression diagnostics for one qubit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Ratio of extreme singular values of the `[1, <X>, <Y>, <Z>]` design.
    pub condition_number: f64,
    pub rank_deficient: bool,
    /// Design columns left out of the fit; their coefficients are zero.
    pub flagged_columns: Vec<char>,
    /// Root-mean-square residual for the X, Y and Z regressions.
    pub residuals: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct QubitFit {
    pub qubit: usize,
    pub coeffs: CoeffVec,
    pub diagnostics: FitDiagnostics,
}

fn check_same_settings(ideal: &ExpectationTable, noisy: &ExpectationTable) -> Result<Vec<ParamSetting>> {
    let a = ideal.settings()?;
    let b = noisy.settings()?;
    if a.len() != b.len() {
        return Err(Error::InconsistentTables(format!("{} ideal settings vs {} noisy settings", a.len(), b.len())));
    }
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        if (x.gamma - y.gamma).abs() > 1e-12 || (x.beta - y.beta).abs() > 1e-12 {
            return Err(Error::InconsistentTables(format!("setting {i} angles differ")));
        }
    }
    Ok(a)
}

/// Columns kept by a pivoted Gram-Schmidt pass; a column is dropped once its
/// component orthogonal to the kept ones is negligible.
fn independent_columns(design: &DMatrix<f64>) -> Vec<usize> {
    let norms: Vec<f64> = (0..design.ncols()).map(|j| design.column(j).norm()).collect();
    let scale = norms.iter().cloned().fold(0.0, f64::max);
    let tol = scale / CONDITION_THRESHOLD;
    let mut work = design.clone();
    let mut remaining: Vec<usize> = (0..design.ncols()).collect();
    let mut kept = Vec::new();
    while !remaining.is_empty() {
        let (pos, &best) = remaining
            .iter()
            .enumerate()
            .max_by(|a, b| work.column(*a.1).norm().total_cmp(&work.column(*b.1).norm()))
            .expect("non-empty");
        let norm = work.column(best).norm();
        if norm <= tol {
            break;
        }
        remaining.remove(pos);
        kept.push(best);
        let u = work.column(best) / norm;
        for &j in &remaining {
            let proj = u.dot(&work.column(j));
            let col = work.column(j) - &u * proj;
            work.set_column(j, &col);
        }
    }
    kept.sort_unstable();
    kept
}

/// Per-basis ordinary least squares of noisy against ideal expectations for
/// one qubit.
pub fn fit_coeffs(ideal: &ExpectationTable, noisy: &ExpectationTable, qubit: usize) -> Result<QubitFit> {
    let settings = check_same_settings(ideal, noisy)?;
    let s = settings.len();
    let mut missing = Vec::new();
    for t in 0..s {
        for b in Basis::ALL {
            for (name, table) in [("ideal", ideal), ("noisy", noisy)] {
                if table.get(qubit, t, b).is_none() {
                    missing.push(format!("{name} qubit={qubit} setting={t} basis={}", b.to_char()));
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingRows(missing));
    }
    let value = |table: &ExpectationTable, t: usize, b: Basis| table.get(qubit, t, b).expect("checked above");
    let design = DMatrix::from_fn(s, 4, |t, j| match j {
        0 => 1.0,
        _ => value(ideal, t, Basis::ALL[j - 1]),
    });
    let sv = design.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let kept = if s >= 4 && condition_number <= CONDITION_THRESHOLD { vec![0, 1, 2, 3] } else { independent_columns(&design) };
    let reduced = DMatrix::from_fn(s, kept.len(), |t, j| design[(t, kept[j])]);
    let svd = reduced.clone().svd(true, true);

    let mut coeffs = CoeffVec([0.0; 12]);
    let mut residuals = [0.0; 3];
    for (bi, b) in Basis::ALL.iter().enumerate() {
        let target = DVector::from_fn(s, |t, _| value(noisy, t, *b));
        let sol = if kept.is_empty() {
            DVector::zeros(0)
        } else {
            svd.solve(&target, 0.0).map_err(|e| Error::InvalidParameter(e.to_string()))?
        };
        let mut row = [0.0; 4];
        for (j, &col) in kept.iter().enumerate() {
            row[col] = sol[j];
        }
        coeffs.set_row(b.pauli(), row);
        let fitted = &reduced * &sol;
        let resid = if kept.is_empty() { target.clone() } else { &target - fitted };
        residuals[bi] = (resid.norm_squared() / s as f64).sqrt();
    }
    let flagged_columns: Vec<char> =
        (0..4).filter(|j| !kept.contains(j)).map(|j| Pauli::from_index(j).to_char()).collect();
    Ok(QubitFit {
        qubit,
        coeffs,
        diagnostics: FitDiagnostics {
            condition_number,
            rank_deficient: !flagged_columns.is_empty(),
            flagged_columns,
            residuals,
        },
    })
}

/// Clips negative eigenvalues of χ and renormalizes to unit trace. Returns the
/// projected matrix and the Frobenius distance moved.
pub fn project_cptp(chi: &ChiMatrix) -> (ChiMatrix, f64) {
    let p = project_with_spectrum(chi);
    (p.chi, p.distance)
}

/// Projection result together with its eigendecomposition.
pub(crate) struct SpectralProjection {
    pub chi: ChiMatrix,
    pub distance: f64,
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub(crate) fn project_with_spectrum(chi: &ChiMatrix) -> SpectralProjection {
    let (vals, vecs) = eigh(chi.entries());
    let tr: f64 = vals.iter().sum();
    if vals.iter().all(|&v| v >= -1e-14) && (tr - 1.0).abs() <= 1e-14 {
        return SpectralProjection { chi: chi.clone(), distance: 0.0, values: vals, vectors: vecs };
    }
    let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let d = clipped.len();
    let weights: Vec<f64> = if total > 0.0 { clipped.iter().map(|v| v / total).collect() } else { vec![1.0 / d as f64; d] };
    let mut m = CMatrix::zeros(d, d);
    for (k, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let v = vecs.column(k);
        m += (v * v.adjoint()) * c(*w, 0.0);
    }
    let projected = ChiMatrix::from_parts(chi.n_qubits(), m);
    let distance = frobenius(&(projected.entries() - chi.entries()));
    SpectralProjection { chi: projected, distance, values: weights, vectors: vecs }
}

/// Projected χ and the distance it moved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub chi: ChiMatrix,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitCharacterization {
    pub qubit: usize,
    pub chi_vec: ChiVec12,
    pub coeffs: CoeffVec,
    /// Raw reconstruction; may fail positivity when data are noisy.
    pub chi: ChiMatrix,
    pub fit: FitDiagnostics,
    pub train_correlation: Option<f64>,
    pub test_correlation: Option<f64>,
    pub validity: CptpReport,
    pub projection: Option<Projection>,
}

impl QubitCharacterization {
    /// χ usable as a channel: the projection when one was computed or the raw
    /// matrix fails positivity, otherwise the raw matrix.
    pub fn usable_chi(&self) -> ChiMatrix {
        match (&self.projection, self.validity.is_cp) {
            (Some(p), _) => p.chi.clone(),
            (None, true) => self.chi.clone(),
            (None, false) => project_cptp(&self.chi).0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationResult {
    pub n_qubits: usize,
    pub n_settings: usize,
    pub qubits: Vec<QubitCharacterization>,
    /// Average X/Y/Z correlation over all qubits on the training table.
    pub train_correlation: Option<f64>,
    /// Same on the testing table; absent when none was supplied.
    pub test_correlation: Option<f64>,
    pub has_testing_set: bool,
}

impl CharacterizationResult {
    /// Product of the per-qubit reconstructions, projected where needed.
    pub fn maten_channel(&self) -> Result<Channel> {
        Channel::product(self.qubits.iter().map(|q| Channel::Chi(q.usable_chi())).collect())
    }

    pub fn coeffs(&self) -> Vec<CoeffVec> {
        self.qubits.iter().map(|q| q.coeffs).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Forward model: `<A~>_s = row_A · [1, <X>_s, <Y>_s, <Z>_s]` per qubit.
pub fn predict_expectations(ideal: &ExpectationTable, coeffs: &[CoeffVec]) -> Result<ExpectationTable> {
    let mut rows = Vec::with_capacity(ideal.len());
    for r in ideal.rows() {
        let cv = coeffs.get(r.qubit).ok_or(Error::QubitOutOfRange { index: r.qubit, n_qubits: coeffs.len() })?;
        let ideal_vals = [1.0]
            .into_iter()
            .chain(Basis::ALL.iter().map(|b| ideal.get(r.qubit, r.setting_index, *b).unwrap_or(0.0)));
        let row = cv.row(r.basis.pauli());
        let value: f64 = row.iter().zip(ideal_vals).map(|(a, b)| a * b).sum();
        rows.push(ExpectationRow { value: value.clamp(-1.0, 1.0), shots: Shots::Exact, ..*r });
    }
    ExpectationTable::new(rows)
}

/// Forward-model two-qubit correlator `<A_i B_j>` under independent per-qubit
/// noise, from the ideal state and two fitted coefficient sets.
pub fn predict_two_qubit(
    state: &StateVector,
    i: usize,
    a: Pauli,
    ci: &CoeffVec,
    j: usize,
    b: Pauli,
    cj: &CoeffVec,
) -> f64 {
    let ra = ci.row(a);
    let rb = cj.row(b);
    let mut total = 0.0;
    for (k, wa) in ra.iter().enumerate() {
        for (l, wb) in rb.iter().enumerate() {
            if *wa == 0.0 || *wb == 0.0 {
                continue;
            }
            let v = crate::qsim::two_qubit_expectation(state, i, Pauli::from_index(k), j, Pauli::from_index(l));
            total += wa * wb * v;
        }
    }
    total
}

fn correlation_or_none(pred: &ExpectationTable, obs: &ExpectationTable) -> Option<f64> {
    match avg_xyz_correlation(pred, obs) {
        Ok(r) => Some(r),
        Err(e) => {
            log::debug!("correlation unavailable: {e}");
            None
        }
    }
}

/// Full pipeline: ideal values, per-qubit fit, χ reconstruction, validity
/// checks and correlations on the training and optional testing tables.
pub fn characterize(
    problem: &QuboProblem,
    settings: &[ParamSetting],
    noisy: &ExpectationTable,
    testing: Option<&ExpectationTable>,
    project: bool,
) -> Result<CharacterizationResult> {
    let n = problem.n_qubits();
    noisy.require_complete(n, settings.len())?;
    let ideal = ideal_expectations(problem, settings);
    check_same_settings(&ideal, noisy)?;

    let fits: Vec<QubitFit> = (0..n).into_par_iter().map(|q| fit_coeffs(&ideal, noisy, q)).collect::<Result<_>>()?;
    let coeffs: Vec<CoeffVec> = fits.iter().map(|f| f.coeffs).collect();
    let predicted = predict_expectations(&ideal, &coeffs)?;

    let (test_pred, testing) = match testing {
        Some(t) => {
            let test_settings = t.settings()?;
            t.require_complete(n, test_settings.len())?;
            let test_ideal = ideal_expectations(problem, &test_settings);
            (Some(predict_expectations(&test_ideal, &coeffs)?), Some(t))
        }
        None => (None, None),
    };

    let qubits = fits
        .into_iter()
        .map(|fit| -> Result<QubitCharacterization> {
            let q = fit.qubit;
            let chi_vec = chi_from_coeffs(&fit.coeffs);
            let chi = chi_from_params_raw(&chi_vec);
            let validity = validate_cptp(&Channel::Chi(chi.clone()));
            let projection = project.then(|| {
                let (p, d) = project_cptp(&chi);
                Projection { chi: p, distance: d }
            });
            let train = correlation_or_none(&predicted.restrict_to_qubit(q)?, &noisy.restrict_to_qubit(q)?);
            let test = match (&test_pred, testing) {
                (Some(p), Some(t)) => correlation_or_none(&p.restrict_to_qubit(q)?, &t.restrict_to_qubit(q)?),
                _ => None,
            };
            Ok(QubitCharacterization {
                qubit: q,
                chi_vec,
                coeffs: fit.coeffs,
                chi,
                fit: fit.diagnostics,
                train_correlation: train,
                test_correlation: test,
                validity,
                projection,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let train_correlation = correlation_or_none(&predicted, noisy);
    let test_correlation = match (&test_pred, testing) {
        (Some(p), Some(t)) => correlation_or_none(p, t),
        _ => None,
    };
    Ok(CharacterizationResult {
        n_qubits: n,
        n_settings: settings.len(),
        qubits,
        train_correlation,
        test_correlation,
        has_testing_set: testing.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{builtin, random_local_chi, BuiltinChannel};
    use crate::dualmap::noisy_pauli_coeffs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn settings(n: usize, seed: u64) -> Vec<ParamSetting> {
        generate_settings(n, seed, DEFAULT_GAMMA_RANGE, DEFAULT_BETA_RANGE).unwrap().settings
    }

    #[test]
    fn settings_are_deterministic_and_in_range() {
        let a = generate_settings(16, 7, DEFAULT_GAMMA_RANGE, DEFAULT_BETA_RANGE).unwrap();
        let b = generate_settings(16, 7, DEFAULT_GAMMA_RANGE, DEFAULT_BETA_RANGE).unwrap();
        assert_eq!(a, b);
        let big = generate_settings(100, 1, DEFAULT_GAMMA_RANGE, DEFAULT_BETA_RANGE).unwrap();
        for s in &big.settings {
            assert!((0.0..2.0 * std::f64::consts::PI).contains(&s.gamma));
            assert!((0.0..std::f64::consts::PI).contains(&s.beta));
        }
        assert!(generate_settings(3, 1, DEFAULT_GAMMA_RANGE, DEFAULT_BETA_RANGE).is_err());
        assert!(generate_settings(8, 1, (1.0, 1.0), DEFAULT_BETA_RANGE).is_err());
    }

    #[test]
    fn ideal_plus_state_at_zero_angles() {
        let p = QuboProblem::ring(3, 0.7, 1.0).unwrap();
        let t = ideal_expectations(&p, &[ParamSetting::new(0.0, 0.0)]);
        for q in 0..3 {
            assert!((t.get(q, 0, Basis::X).unwrap() - 1.0).abs() < 1e-14);
            assert!(t.get(q, 0, Basis::Y).unwrap().abs() < 1e-14);
            assert!(t.get(q, 0, Basis::Z).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn exact_noiseless_equals_ideal() {
        let p = QuboProblem::line(3, 0.4, 0.9).unwrap();
        let s = settings(10, 3);
        let ideal = ideal_expectations(&p, &s);
        let noisy = noisy_expectations(&p, &s, &NoiseSpec::Noiseless, Shots::Exact, SamplingMode::Multinomial, 0).unwrap();
        for (a, b) in ideal.rows().iter().zip(noisy.rows()) {
            assert!((a.value - b.value).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_recovers_identity_and_known_channel() {
        let p = QuboProblem::complete(3, 0.8, 1.0).unwrap();
        let s = settings(16, 11);
        let ideal = ideal_expectations(&p, &s);
        let fit = fit_coeffs(&ideal, &ideal, 1).unwrap();
        for (a, b) in fit.coeffs.0.iter().zip(CoeffVec::identity().0) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(fit.diagnostics.residuals.iter().all(|r| *r < 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let chi = random_local_chi(&mut rng).chi;
        let noise = NoiseSpec::uniform_local(&Channel::Chi(chi.clone()), 3).unwrap();
        let noisy = noisy_expectations(&p, &s, &noise, Shots::Exact, SamplingMode::Multinomial, 0).unwrap();
        let fit = fit_coeffs(&ideal, &noisy, 2).unwrap();
        let want = noisy_pauli_coeffs(&chi).unwrap();
        for (a, b) in fit.coeffs.0.iter().zip(want.0) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!(fit.diagnostics.residuals.iter().all(|r| *r < 1e-10));
    }

    #[test]
    fn symmetric_problem_flags_columns() {
        let p = QuboProblem::complete(3, 0.0, 1.0).unwrap();
        let s = settings(16, 2);
        let ideal = ideal_expectations(&p, &s);
        let fit = fit_coeffs(&ideal, &ideal, 0).unwrap();
        assert!(fit.diagnostics.rank_deficient);
        assert_eq!(fit.diagnostics.flagged_columns, vec!['Y', 'Z']);
        assert!((fit.coeffs.get(Pauli::X, Pauli::X) - 1.0).abs() < 1e-10);
        assert_eq!(fit.coeffs.get(Pauli::Y, Pauli::Y), 0.0);
    }

    #[test]
    fn depolarizing_reconstruction() {
        let p = QuboProblem::ring(3, 0.6, 1.0).unwrap();
        let s = settings(20, 9);
        let dep = builtin(&BuiltinChannel::Depolarizing { p: 0.2 }).unwrap();
        let noise = NoiseSpec::uniform_local(&dep, 3).unwrap();
        let noisy = noisy_expectations(&p, &s, &noise, Shots::Exact, SamplingMode::Multinomial, 0).unwrap();
        let res = characterize(&p, &s, &noisy, None, false).unwrap();
        for q in &res.qubits {
            let e = q.chi.entries();
            assert!((e[(0, 0)].re - 0.4).abs() < 1e-10);
            for k in 1..4 {
                assert!((e[(k, k)].re - 0.2).abs() < 1e-10);
            }
            assert!(q.validity.is_cp);
            assert!((q.train_correlation.unwrap() - 1.0).abs() < 1e-9);
        }
        assert!(!res.has_testing_set && res.test_correlation.is_none());
    }

    #[test]
    fn gaussian_perturbation_has_requested_spread() {
        let p = QuboProblem::ring(2, 0.5, 1.0).unwrap();
        let s = settings(50, 4);
        let exact = noisy_expectations(&p, &s, &NoiseSpec::Noiseless, Shots::Exact, SamplingMode::Multinomial, 0).unwrap();
        let noisy =
            noisy_expectations(&p, &s, &NoiseSpec::Noiseless, Shots::Count(10_000), SamplingMode::GaussianPerturbation, 8)
                .unwrap();
        let diffs: Vec<f64> = exact
            .rows()
            .iter()
            .zip(noisy.rows())
            .filter(|(a, _)| a.value.abs() < 0.95)
            .map(|(a, b)| b.value - a.value)
            .collect();
        assert!(diffs.len() >= 200);
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64).sqrt();
        assert!((sd / 0.01 - 1.0).abs() < 0.2, "sd {sd}");
    }

    #[test]
    fn csv_roundtrip_and_errors() {
        let p = QuboProblem::ring(2, 0.5, 1.0).unwrap();
        let s = settings(5, 4);
        let t = noisy_expectations(&p, &s, &NoiseSpec::Noiseless, Shots::Count(100), SamplingMode::Multinomial, 1).unwrap();
        let text = t.to_csv_string().unwrap();
        let back = ExpectationTable::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_csv_string().unwrap(), text);

        let bad = "qubit,setting_index,gamma,beta,basis,value,shots\n0,0,0.1,0.2,X,1.7,exact\n";
        assert!(matches!(ExpectationTable::read_csv(bad.as_bytes()), Err(Error::ValueOutOfRange { line: 2, .. })));
        let dup = "qubit,setting_index,gamma,beta,basis,value,shots\n0,0,0.1,0.2,X,0.5,exact\n0,0,0.1,0.2,X,0.5,exact\n";
        assert!(matches!(ExpectationTable::read_csv(dup.as_bytes()), Err(Error::DuplicateRow { line: 3, .. })));
        let junk = "qubit,setting_index,gamma,beta,basis,value,shots\n0,0,0.1,0.2,W,0.5,exact\n";
        assert!(matches!(ExpectationTable::read_csv(junk.as_bytes()), Err(Error::MalformedRow { line: 2, .. })));
    }

    #[test]
    fn projection_behaviour() {
        let id = ChiMatrix::identity(1);
        let (same, d) = project_cptp(&id);
        assert_eq!(same, id);
        assert_eq!(d, 0.0);

        let v = ChiVec12 { p1: 0.01, p2: 0.0, p3: 0.0, t01: 0.0, t02: 0.0, t03: 0.0, t12: 0.0, t13: 0.0, t23: 0.0, v01: 0.0, v02: 0.0, v03: 0.0 };
        let mut m = v.to_matrix();
        m[(1, 1)] = c(-0.01, 0.0);
        m[(0, 0)] = c(1.01, 0.0);
        let raw = ChiMatrix::from_hermitian(1, m).unwrap();
        let (proj, d) = project_cptp(&raw);
        assert!(proj.min_eigenvalue() >= -1e-15);
        assert!((proj.trace().re - 1.0).abs() < 1e-12);
        assert!(d <= 0.02);
        let (again, d2) = project_cptp(&proj);
        assert!(frobenius(&(again.entries() - proj.entries())) < 1e-12 && d2 < 1e-12);
    }
}
