//! Exact state-vector and density-matrix simulation of single-layer QAOA
//! circuits, Pauli expectation values and shot sampling.
//!
//! Conventions used throughout the crate: qubit 0 is the leftmost tensor
//! factor, so in a basis index it is the most significant bit. A bit value of
//! 0 is the `+1` eigenstate of `Z`.

pub mod ops;
pub mod pauli;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::channels::{apply, builtin, BuiltinChannel, Channel, KrausSet, NoiseSite, NoiseSpec};
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_deviation, hermitize, trace, CMatrix, C64, ONE, ZERO};
pub use pauli::{Observable, Pauli, PauliMask, PauliString};

/// Cost function `H = sum_i h_i Z_i + sum_{i<j} J_ij Z_i Z_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuboProblem {
    n_qubits: usize,
    h: Vec<f64>,
    /// Couplings keyed by `(i, j)` with `i < j`.
    #[serde(with = "coupling_list")]
    j: BTreeMap<(usize, usize), f64>,
}

mod coupling_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(j: &BTreeMap<(usize, usize), f64>, s: S) -> Result<S::Ok, S::Error> {
        let list: Vec<(usize, usize, f64)> = j.iter().map(|(&(a, b), &w)| (a, b, w)).collect();
        list.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(usize, usize), f64>, D::Error> {
        let list: Vec<(usize, usize, f64)> = Vec::deserialize(d)?;
        Ok(list.into_iter().map(|(a, b, w)| ((a.min(b), a.max(b)), w)).collect())
    }
}

impl QuboProblem {
    /// Builds a problem from local fields and a list of `(i, j, J_ij)` couplings.
    /// Repeated pairs are summed; `(i, j)` and `(j, i)` denote the same coupling.
    pub fn new(h: Vec<f64>, couplings: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let n = h.len();
        if n == 0 {
            return Err(Error::InvalidParameter("a QUBO problem needs at least one qubit".into()));
        }
        let mut j = BTreeMap::new();
        for (a, b, w) in couplings {
            if a == b {
                return Err(Error::InvalidParameter(format!("diagonal coupling J[{a}][{a}]")));
            }
            if a >= n || b >= n {
                return Err(Error::QubitOutOfRange { index: a.max(b), n_qubits: n });
            }
            if w != 0.0 {
                *j.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
            }
        }
        Ok(QuboProblem { n_qubits: n, h, j })
    }

    /// All pairs coupled with weight `j`, all fields `h`.
    pub fn complete(n: usize, h: f64, j: f64) -> Result<Self> {
        let pairs = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b, j)));
        QuboProblem::new(vec![h; n], pairs.collect::<Vec<_>>())
    }

    /// Nearest-neighbour chain `J_{i,i+1} = j`.
    pub fn line(n: usize, h: f64, j: f64) -> Result<Self> {
        QuboProblem::new(vec![h; n], (0..n.saturating_sub(1)).map(|a| (a, a + 1, j)).collect::<Vec<_>>())
    }

    /// Closed chain; for `n = 2` this is a single edge.
    pub fn ring(n: usize, h: f64, j: f64) -> Result<Self> {
        let mut edges: Vec<(usize, usize, f64)> = (0..n.saturating_sub(1)).map(|a| (a, a + 1, j)).collect();
        if n > 2 {
            edges.push((0, n - 1, j));
        }
        QuboProblem::new(vec![h; n], edges)
    }

    /// Fields and all pairwise couplings drawn uniformly from `[0, 1)`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let h: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                edges.push((a, b, rng.random::<f64>()));
            }
        }
        QuboProblem::new(h, edges)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn with_fields(&self, h: f64) -> QuboProblem {
        QuboProblem { n_qubits: self.n_qubits, h: vec![h; self.n_qubits], j: self.j.clone() }
    }

    /// Symmetric access to `J_ij`; zero on the diagonal.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.j.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0)
    }

    /// Nonzero couplings as `(i, j, J_ij)` with `i < j`.
    pub fn couplings(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.j.iter().map(|(&(a, b), &w)| (a, b, w))
    }

    /// Classical energy of basis state `index`.
    pub fn energy(&self, index: usize) -> f64 {
        let n = self.n_qubits;
        let z = |q: usize| if (index >> (n - 1 - q)) & 1 == 0 { 1.0 } else { -1.0 };
        let local: f64 = self.h.iter().enumerate().map(|(q, h)| h * z(q)).sum();
        let pair: f64 = self.j.iter().map(|(&(a, b), w)| w * z(a) * z(b)).sum();
        local + pair
    }

    /// One-body part `H_1 = sum_i h_i Z_i`.
    pub fn h1(&self) -> Observable {
        let mut o = Observable::zero(self.n_qubits);
        for (q, &h) in self.h.iter().enumerate() {
            o = o.plus(&Observable::single(self.n_qubits, q, Pauli::Z, h));
        }
        o
    }

    /// Two-body part `H_2 = sum_{i<j} J_ij Z_i Z_j`.
    pub fn h2(&self) -> Observable {
        let mut o = Observable::zero(self.n_qubits);
        for (a, b, w) in self.couplings() {
            o = o.plus(&Observable::pair(self.n_qubits, a, Pauli::Z, b, Pauli::Z, w));
        }
        o
    }

    pub fn hamiltonian(&self) -> Observable {
        self.h1().plus(&self.h2())
    }
}

/// Phasing angle `gamma` and mixing angle `beta` of a one-layer circuit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSetting {
    pub gamma: f64,
    pub beta: f64,
}

impl ParamSetting {
    pub fn new(gamma: f64, beta: f64) -> Self {
        ParamSetting { gamma, beta }
    }
}

/// Measurement basis for shot sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    pub fn pauli(self) -> Pauli {
        match self {
            Basis::X => Pauli::X,
            Basis::Y => Pauli::Y,
            Basis::Z => Pauli::Z,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn to_char(self) -> char {
        self.pauli().to_char()
    }

    pub fn from_char(ch: char) -> Option<Basis> {
        match ch.to_ascii_uppercase() {
            'X' => Some(Basis::X),
            'Y' => Some(Basis::Y),
            'Z' => Some(Basis::Z),
            _ => None,
        }
    }

    /// Single-qubit unitary mapping this basis' `+1` / `-1` eigenvectors to `|0>` / `|1>`.
    pub fn rotation(self) -> CMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Basis::Z => CMatrix::identity(2, 2),
            Basis::X => CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]),
            // H S^dagger
            Basis::Y => CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(0.0, -s), c(s, 0.0), c(0.0, s)]),
        }
    }
}

/// Normalized pure state on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let d = amplitudes.len();
        if d == 0 || !d.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("state length {d} is not a power of two")));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("state norm {norm} differs from 1")));
        }
        Ok(StateVector { n_qubits: d.trailing_zeros() as usize, amplitudes })
    }

    pub fn basis_state(n_qubits: usize, index: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[index] = ONE;
        StateVector { n_qubits, amplitudes }
    }

    /// `|+>^{⊗n}`.
    pub fn plus(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        let a = c(1.0 / (d as f64).sqrt(), 0.0);
        StateVector { n_qubits, amplitudes: vec![a; d] }
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply(&mut self, op: &CMatrix, targets: &[usize]) {
        ops::apply_to_vector(op, targets, self.n_qubits, &mut self.amplitudes);
    }

    pub fn to_density(&self) -> DensityMatrix {
        let d = self.amplitudes.len();
        let m = CMatrix::from_fn(d, d, |i, j| self.amplitudes[i] * self.amplitudes[j].conj());
        DensityMatrix { n_qubits: self.n_qubits, matrix: m }
    }

    pub(crate) fn from_raw(n_qubits: usize, amplitudes: Vec<C64>) -> Self {
        StateVector { n_qubits, amplitudes }
    }
}

/// Density operator on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity and trace to `1e-12` and the spectrum against
    /// the `-1e-10` floor.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let rho = DensityMatrix::from_matrix_unchecked(matrix)?;
        let dev = hermitian_deviation(&rho.matrix);
        if dev > 1e-12 {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let tr = trace(&rho.matrix);
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("density matrix trace {tr}")));
        }
        let min = crate::linalg::min_eigenvalue(&rho.matrix);
        if min < -1e-10 {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
        }
        Ok(rho)
    }

    /// Shape checks only.
    pub fn from_matrix_unchecked(matrix: CMatrix) -> Result<Self> {
        let d = matrix.nrows();
        if d != matrix.ncols() || d == 0 || !d.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("density matrix shape {}x{}", d, matrix.ncols())));
        }
        Ok(DensityMatrix { n_qubits: d.trailing_zeros() as usize, matrix })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        DensityMatrix { n_qubits, matrix: CMatrix::identity(d, d).scale(1.0 / d as f64) }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn conjugate(&mut self, op: &CMatrix, targets: &[usize]) {
        self.matrix = ops::conjugate(op, targets, self.n_qubits, &self.matrix);
    }
}

/// Operations shared by pure and mixed states.
pub trait QuantumState {
    fn n_qubits(&self) -> usize;

    /// `Tr[P rho]` for a Pauli mask (complex before the Hermiticity check).
    fn pauli_expectation(&self, mask: &PauliMask) -> C64;

    /// Outcome distribution after rotating every qubit into `basis`.
    fn basis_probabilities(&self, basis: Basis) -> Vec<f64>;
}

impl QuantumState for StateVector {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn pauli_expectation(&self, mask: &PauliMask) -> C64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(j, a)| self.amplitudes[j ^ mask.x].conj() * mask.phase(j) * a)
            .sum()
    }

    fn basis_probabilities(&self, basis: Basis) -> Vec<f64> {
        let mut rotated = self.clone();
        if basis != Basis::Z {
            let u = basis.rotation();
            for q in 0..self.n_qubits {
                rotated.apply(&u, &[q]);
            }
        }
        rotated.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

impl QuantumState for DensityMatrix {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn pauli_expectation(&self, mask: &PauliMask) -> C64 {
        // Tr[P rho] = sum_k phase(k) rho[k][k ^ x]
        (0..self.matrix.nrows()).map(|k| mask.phase(k) * self.matrix[(k, k ^ mask.x)]).sum()
    }

    fn basis_probabilities(&self, basis: Basis) -> Vec<f64> {
        let mut rotated = self.clone();
        if basis != Basis::Z {
            let u = basis.rotation();
            for q in 0..self.n_qubits {
                rotated.conjugate(&u, &[q]);
            }
        }
        rotated.matrix.diagonal().iter().map(|z| z.re.max(0.0)).collect()
    }
}

/// Phase separator `e^{-i gamma H}` as a diagonal.
fn phase_diagonal(problem: &QuboProblem, gamma: f64) -> Vec<C64> {
    (0..1usize << problem.n_qubits())
        .map(|k| {
            let e = problem.energy(k);
            c((gamma * e).cos(), -(gamma * e).sin())
        })
        .collect()
}

/// `e^{-i beta X}`.
pub fn mixer_rotation(beta: f64) -> CMatrix {
    let (s, co) = beta.sin_cos();
    CMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)])
}

/// `e^{-i beta B} e^{-i gamma H} |+>^{⊗N}` with `B = sum_i X_i`.
pub fn build_qaoa_state(problem: &QuboProblem, setting: ParamSetting) -> StateVector {
    let n = problem.n_qubits();
    let mut psi = StateVector::plus(n);
    for (a, ph) in psi.amplitudes.iter_mut().zip(phase_diagonal(problem, setting.gamma)) {
        *a *= ph;
    }
    let mixer = mixer_rotation(setting.beta);
    for q in 0..n {
        psi.apply(&mixer, &[q]);
    }
    psi
}

/// `sum_terms coeff * Tr[P rho]`, checked to be real within `1e-10`.
pub fn expect<S: QuantumState + ?Sized>(state: &S, obs: &Observable) -> Result<f64> {
    if state.n_qubits() != obs.n_qubits() {
        return Err(Error::DimensionMismatch { expected: state.n_qubits(), actual: obs.n_qubits() });
    }
    let mut total = ZERO;
    for (letters, coeff) in obs.raw_terms() {
        total += state.pauli_expectation(&PauliMask::new(letters)) * *coeff;
    }
    if total.im.abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("expectation has imaginary part {:.3e}", total.im)));
    }
    Ok(total.re)
}

/// `<P_q>` for a single-qubit Pauli on `qubit`.
pub fn single_qubit_expectation<S: QuantumState + ?Sized>(state: &S, qubit: usize, p: Pauli) -> f64 {
    let mut letters = vec![Pauli::I; state.n_qubits()];
    letters[qubit] = p;
    state.pauli_expectation(&PauliMask::new(&letters)).re
}

/// `<P_i Q_j>` for a two-site Pauli product.
pub fn two_qubit_expectation<S: QuantumState + ?Sized>(state: &S, i: usize, p: Pauli, j: usize, q: Pauli) -> f64 {
    let mut letters = vec![Pauli::I; state.n_qubits()];
    letters[i] = p;
    letters[j] = q;
    state.pauli_expectation(&PauliMask::new(&letters)).re
}

/// Result of measuring every qubit in one basis.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisSample {
    /// `(n_plus - n_minus) / shots` per qubit.
    pub per_qubit_means: Vec<f64>,
    /// Bitstring histogram, qubit 0 first; only observed outcomes appear.
    pub counts: BTreeMap<String, u64>,
}

/// Draws `shots` outcomes from the exact distribution in `basis`.
pub fn sample_basis<S, R>(state: &S, basis: Basis, shots: u64, rng: &mut R) -> Result<BasisSample>
where
    S: QuantumState + ?Sized,
    R: Rng + ?Sized,
{
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    let n = state.n_qubits();
    let probs = state.basis_probabilities(basis);
    let total: f64 = probs.iter().sum();
    // multinomial via a chain of conditional binomials
    let mut remaining = shots;
    let mut mass = total;
    let mut counts_by_index = vec![0u64; probs.len()];
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let count = if k + 1 == probs.len() || mass <= 0.0 {
            remaining
        } else {
            let frac = (p / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, frac)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(rng)
        };
        counts_by_index[k] = count;
        remaining -= count;
        mass -= p;
    }
    let mut sums = vec![0i64; n];
    let mut counts = BTreeMap::new();
    for (k, &cnt) in counts_by_index.iter().enumerate() {
        if cnt == 0 {
            continue;
        }
        let label: String = (0..n).map(|q| if (k >> (n - 1 - q)) & 1 == 0 { '0' } else { '1' }).collect();
        counts.insert(label, cnt);
        for (q, s) in sums.iter_mut().enumerate() {
            if (k >> (n - 1 - q)) & 1 == 0 {
                *s += cnt as i64;
            } else {
                *s -= cnt as i64;
            }
        }
    }
    let per_qubit_means = sums.iter().map(|&s| s as f64 / shots as f64).collect();
    Ok(BasisSample { per_qubit_means, counts })
}

/// Largest register for which a full-width channel is compiled to a dense
/// superoperator (`4^n x 4^n` entries).
const SUPEROP_MAX_QUBITS: usize = 5;

enum Stage {
    /// Acts on `vec(rho)` in column-major order.
    Superop(CMatrix),
    Kraus(KrausSet, Vec<usize>),
}

/// End-of-circuit noise converted once into forms that are cheap to apply to
/// many states: Kraus sets per factor, or a dense superoperator when a
/// non-product channel covers a small register in natural order.
pub struct CompiledNoise {
    n_qubits: usize,
    stages: Vec<Stage>,
}

impl CompiledNoise {
    pub fn new(sites: &[NoiseSite], n_qubits: usize) -> Result<Self> {
        let mut stages = Vec::new();
        for site in sites {
            for &t in &site.targets {
                if t >= n_qubits {
                    return Err(Error::QubitOutOfRange { index: t, n_qubits });
                }
            }
            if site.channel.n_qubits() != site.targets.len() {
                return Err(Error::ArityMismatch { channel: site.channel.n_qubits(), targets: site.targets.len() });
            }
            push_stages(&site.channel, &site.targets, n_qubits, &mut stages)?;
        }
        Ok(CompiledNoise { n_qubits, stages })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, actual: rho.n_qubits() });
        }
        let mut rho = rho.clone();
        for stage in &self.stages {
            rho = match stage {
                Stage::Superop(s) => {
                    let d = rho.matrix.nrows();
                    let v = s * nalgebra::DVector::from_column_slice(rho.matrix.as_slice());
                    let m = CMatrix::from_column_slice(d, d, v.as_slice());
                    DensityMatrix::from_matrix_unchecked(hermitize(&m))?
                }
                Stage::Kraus(k, targets) => k.apply_to(&rho, targets)?,
            };
        }
        Ok(rho)
    }
}

fn push_stages(ch: &Channel, targets: &[usize], n: usize, out: &mut Vec<Stage>) -> Result<()> {
    if let Channel::Product(factors) = ch {
        let mut offset = 0;
        for f in factors {
            let m = f.n_qubits();
            push_stages(f, &targets[offset..offset + m], n, out)?;
            offset += m;
        }
        return Ok(());
    }
    let kraus = ch.to_kraus()?;
    let natural = targets.len() == n && targets.iter().enumerate().all(|(i, &t)| i == t);
    if natural && (2..=SUPEROP_MAX_QUBITS).contains(&n) {
        let d = 1usize << n;
        let mut s = CMatrix::zeros(d * d, d * d);
        for k in kraus.operators() {
            s += k.conjugate().kronecker(k);
        }
        out.push(Stage::Superop(s));
    } else {
        out.push(Stage::Kraus(kraus, targets.to_vec()));
    }
    Ok(())
}

/// Noisy output states for many settings, compiling end-of-circuit noise once.
pub fn evolve_noisy_batch(
    problem: &QuboProblem,
    settings: &[ParamSetting],
    noise: &NoiseSpec,
) -> Result<Vec<DensityMatrix>> {
    use rayon::prelude::*;
    match noise {
        NoiseSpec::EndOfCircuit(sites) => {
            let compiled = CompiledNoise::new(sites, problem.n_qubits())?;
            settings.par_iter().map(|&s| compiled.apply(&build_qaoa_state(problem, s).to_density())).collect()
        }
        _ => settings.par_iter().map(|&s| evolve_noisy_qaoa(problem, s, noise)).collect(),
    }
}

/// Density matrix of the noisy one-layer circuit.
pub fn evolve_noisy_qaoa(problem: &QuboProblem, setting: ParamSetting, noise: &NoiseSpec) -> Result<DensityMatrix> {
    let n = problem.n_qubits();
    match noise {
        NoiseSpec::Noiseless => Ok(build_qaoa_state(problem, setting).to_density()),
        NoiseSpec::EndOfCircuit(sites) => {
            let mut rho = build_qaoa_state(problem, setting).to_density();
            for site in sites {
                for &t in &site.targets {
                    if t >= n {
                        return Err(Error::QubitOutOfRange { index: t, n_qubits: n });
                    }
                }
                rho = apply(&site.channel, &rho, &site.targets)?;
            }
            Ok(rho)
        }
        NoiseSpec::InterleavedOverrotation { omega } => {
            let zz = builtin(&BuiltinChannel::ZzOverrotation { omega: *omega })?.to_kraus()?;
            let xx = builtin(&BuiltinChannel::XOverrotation { omega: *omega })?.to_kraus()?;
            let mut rho = StateVector::plus(n).to_density();
            let diag = phase_diagonal(problem, setting.gamma);
            let d = diag.len();
            for a in 0..d {
                for b in 0..d {
                    rho.matrix[(a, b)] *= diag[a] * diag[b].conj();
                }
            }
            let pairs: Vec<(usize, usize)> = problem.couplings().map(|(a, b, _)| (a, b)).collect();
            for (a, b) in pairs {
                rho = zz.apply_to(&rho, &[a, b])?;
            }
            let mixer = mixer_rotation(setting.beta);
            for q in 0..n {
                rho.conjugate(&mixer, &[q]);
            }
            for q in 0..n {
                rho = xx.apply_to(&rho, &[q])?;
            }
            Ok(rho)
        }
    }
}
