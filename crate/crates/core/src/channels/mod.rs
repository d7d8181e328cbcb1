//! CPTP channels in process-matrix (χ), Kraus, mixture and site-wise product
//! form.
//!
//! The process matrix is expanded in unnormalized tensor-Pauli strings with
//! letter order `I, X, Y, Z`; the multi-index of an `n`-qubit string is read
//! as a base-4 number with qubit 0 as the most significant digit, which
//! matches Kronecker-product ordering.

mod builtin;
mod random;
mod serial;

use std::collections::HashMap;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c, eigh, hermitian_deviation, hermitize, max_abs, min_eigenvalue, partial_trace_keep, trace, CMatrix, C64, ZERO,
};
use crate::qsim::ops;
use crate::qsim::pauli::{mul_strings, Pauli, PauliMask};
use crate::qsim::DensityMatrix;

pub use builtin::{bessel_ratio_i2_i0, builtin, BuiltinChannel};
pub use random::{random_channel, random_local_chi, random_pauli_chi, random_pauli_probs, LocalChiSample};

pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues down to `-PSD_FLOOR` count as zero.
pub const PSD_FLOOR: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const TP_TOL: f64 = 1e-10;
/// χ eigenvalues below this are dropped when building Kraus operators.
pub const KRAUS_CUTOFF: f64 = 1e-12;

/// Pauli letters of multi-index `k` on `n` qubits.
pub fn pauli_letters(n_qubits: usize, k: usize) -> Vec<Pauli> {
    (0..n_qubits).map(|q| Pauli::from_index(k >> (2 * (n_qubits - 1 - q)))).collect()
}

/// Inverse of [`pauli_letters`].
pub fn pauli_index(letters: &[Pauli]) -> usize {
    letters.iter().fold(0, |acc, p| acc * 4 + p.index())
}

fn pauli_basis(n_qubits: usize) -> Vec<Vec<Pauli>> {
    (0..1usize << (2 * n_qubits)).map(|k| pauli_letters(n_qubits, k)).collect()
}

/// `Tr[P K]` for the Pauli string with the given mask.
fn pauli_trace(mask: &PauliMask, k: &CMatrix) -> C64 {
    (0..k.nrows()).map(|i| mask.phase(i) * k[(i, i ^ mask.x)]).sum()
}

fn check_square(m: &CMatrix, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: m.nrows().max(m.ncols()) });
    }
    Ok(())
}

/// Process matrix of an `n`-qubit channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiMatrix {
    n_qubits: usize,
    entries: CMatrix,
}

impl ChiMatrix {
    /// Validates shape, Hermiticity, positivity and unit trace.
    pub fn new(n_qubits: usize, entries: CMatrix) -> Result<Self> {
        let chi = ChiMatrix::from_hermitian(n_qubits, entries)?;
        let min = min_eigenvalue(&chi.entries);
        if min < -PSD_FLOOR {
            return Err(Error::NotCompletelyPositive { min_eigenvalue: min });
        }
        let tr = trace(&chi.entries);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidParameter(format!("process matrix trace {tr} differs from 1")));
        }
        Ok(chi)
    }

    /// Shape and Hermiticity only. Used for raw reconstructions that may
    /// fail positivity; their validity is reported separately.
    pub fn from_hermitian(n_qubits: usize, entries: CMatrix) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidParameter("process matrix needs at least one qubit".into()));
        }
        check_square(&entries, 1 << (2 * n_qubits))?;
        let dev = hermitian_deviation(&entries);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(ChiMatrix { n_qubits, entries: hermitize(&entries) })
    }

    /// Internal constructor for matrices that are valid by construction up to
    /// rounding; symmetrizes away the rounding.
    pub(crate) fn from_parts(n_qubits: usize, entries: CMatrix) -> Self {
        ChiMatrix { n_qubits, entries: hermitize(&entries) }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let d = 1usize << (2 * n_qubits);
        let mut entries = CMatrix::zeros(d, d);
        entries[(0, 0)] = c(1.0, 0.0);
        ChiMatrix { n_qubits, entries }
    }

    /// Pauli channel with the given probabilities over multi-indices.
    pub fn pauli_diagonal(n_qubits: usize, probs: &[f64]) -> Result<Self> {
        let d = 1usize << (2 * n_qubits);
        if probs.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: probs.len() });
        }
        let entries = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d, probs.iter().map(|&p| c(p, 0.0))));
        ChiMatrix::new(n_qubits, entries)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    /// Weight of the identity string.
    pub fn chi00(&self) -> f64 {
        self.entries[(0, 0)].re
    }

    pub fn trace(&self) -> C64 {
        trace(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.entries)
    }

    /// `self ⊗ other`; `self` occupies the leading qubits.
    pub fn tensor(&self, other: &ChiMatrix) -> ChiMatrix {
        ChiMatrix { n_qubits: self.n_qubits + other.n_qubits, entries: self.entries.kronecker(&other.entries) }
    }

    pub fn scaled_sum(&self, a: f64, other: &ChiMatrix, b: f64) -> Result<ChiMatrix> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, actual: other.n_qubits });
        }
        Ok(ChiMatrix { n_qubits: self.n_qubits, entries: self.entries.scale(a) + other.entries.scale(b) })
    }
}

/// The twelve real parameters of a single-qubit trace-preserving χ matrix.
/// `p0` is implied by `1 - p1 - p2 - p3`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChiVec12 {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub t01: f64,
    pub t02: f64,
    pub t03: f64,
    pub t12: f64,
    pub t13: f64,
    pub t23: f64,
    pub v01: f64,
    pub v02: f64,
    pub v03: f64,
}

impl ChiVec12 {
    pub fn p0(&self) -> f64 {
        1.0 - self.p1 - self.p2 - self.p3
    }

    pub fn to_array(&self) -> [f64; 12] {
        [
            self.p1, self.p2, self.p3, self.t01, self.t02, self.t03, self.t12, self.t13, self.t23, self.v01, self.v02,
            self.v03,
        ]
    }

    pub fn from_array(a: [f64; 12]) -> Self {
        ChiVec12 {
            p1: a[0],
            p2: a[1],
            p3: a[2],
            t01: a[3],
            t02: a[4],
            t03: a[5],
            t12: a[6],
            t13: a[7],
            t23: a[8],
            v01: a[9],
            v02: a[10],
            v03: a[11],
        }
    }

    /// The 4×4 layout. The imaginary parts among the X/Y/Z block are fixed
    /// by trace preservation.
    pub fn to_matrix(&self) -> CMatrix {
        let p0 = self.p0();
        #[rustfmt::skip]
        let m = [
            c(p0, 0.0),                c(self.t01, self.v01),       c(self.t02, self.v02),       c(self.t03, self.v03),
            c(self.t01, -self.v01),    c(self.p1, 0.0),             c(self.t12, -self.t03),      c(self.t13, self.t02),
            c(self.t02, -self.v02),    c(self.t12, self.t03),       c(self.p2, 0.0),             c(self.t23, -self.t01),
            c(self.t03, -self.v03),    c(self.t13, -self.t02),      c(self.t23, self.t01),       c(self.p3, 0.0),
        ];
        CMatrix::from_row_slice(4, 4, &m)
    }

    /// Reads the parameters back from a single-qubit χ (diagonal and
    /// upper-triangle entries).
    pub fn from_chi(chi: &ChiMatrix) -> Result<Self> {
        if chi.n_qubits != 1 {
            return Err(Error::DimensionMismatch { expected: 1, actual: chi.n_qubits });
        }
        let e = &chi.entries;
        Ok(ChiVec12 {
            p1: e[(1, 1)].re,
            p2: e[(2, 2)].re,
            p3: e[(3, 3)].re,
            t01: e[(0, 1)].re,
            t02: e[(0, 2)].re,
            t03: e[(0, 3)].re,
            t12: e[(1, 2)].re,
            t13: e[(1, 3)].re,
            t23: e[(2, 3)].re,
            v01: e[(0, 1)].im,
            v02: e[(0, 2)].im,
            v03: e[(0, 3)].im,
        })
    }
}

/// Builds a single-qubit χ from its twelve parameters; rejects non-CP input.
pub fn chi_from_params(v: &ChiVec12) -> Result<ChiMatrix> {
    let m = v.to_matrix();
    let min = min_eigenvalue(&m);
    if min < -PSD_FLOOR {
        return Err(Error::NotCompletelyPositive { min_eigenvalue: min });
    }
    Ok(ChiMatrix { n_qubits: 1, entries: m })
}

/// Same layout without the positivity check.
pub fn chi_from_params_raw(v: &ChiVec12) -> ChiMatrix {
    ChiMatrix { n_qubits: 1, entries: v.to_matrix() }
}

/// Kraus operators `A_i` with `sum_i A_i† A_i = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    n_qubits: usize,
    operators: Vec<CMatrix>,
}

impl KrausSet {
    pub fn new(n_qubits: usize, operators: Vec<CMatrix>) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::InvalidParameter("empty Kraus set".into()));
        }
        let d = 1usize << n_qubits;
        for k in &operators {
            check_square(k, d)?;
        }
        let set = KrausSet { n_qubits, operators };
        let residual = set.tp_residual();
        if residual > TP_TOL {
            return Err(Error::NotTracePreserving { residual });
        }
        Ok(set)
    }

    pub fn identity(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        KrausSet { n_qubits, operators: vec![CMatrix::identity(d, d)] }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    /// `max |sum_i A_i† A_i - I|`.
    pub fn tp_residual(&self) -> f64 {
        let d = 1usize << self.n_qubits;
        let mut acc = -CMatrix::identity(d, d);
        for k in &self.operators {
            acc += k.adjoint() * k;
        }
        max_abs(&acc)
    }

    pub fn tensor(&self, other: &KrausSet) -> KrausSet {
        let mut operators = Vec::with_capacity(self.operators.len() * other.operators.len());
        for a in &self.operators {
            for b in &other.operators {
                operators.push(a.kronecker(b));
            }
        }
        KrausSet { n_qubits: self.n_qubits + other.n_qubits, operators }
    }

    /// `sum_i A_i rho A_i†` on the given target qubits.
    pub fn apply_to(&self, rho: &DensityMatrix, targets: &[usize]) -> Result<DensityMatrix> {
        use crate::qsim::QuantumState;
        check_targets(self.n_qubits, targets, rho.n_qubits())?;
        let n = rho.n_qubits();
        let d = rho.matrix().nrows();
        let mut out = CMatrix::zeros(d, d);
        for k in &self.operators {
            out += ops::conjugate(k, targets, n, rho.matrix());
        }
        DensityMatrix::from_matrix_unchecked(hermitize(&out))
    }
}

fn check_targets(arity: usize, targets: &[usize], n_qubits: usize) -> Result<()> {
    if targets.len() != arity {
        return Err(Error::ArityMismatch { channel: arity, targets: targets.len() });
    }
    for (i, &t) in targets.iter().enumerate() {
        if t >= n_qubits {
            return Err(Error::QubitOutOfRange { index: t, n_qubits });
        }
        if targets[..i].contains(&t) {
            return Err(Error::InvalidParameter(format!("target qubit {t} repeated")));
        }
    }
    Ok(())
}

/// A channel in one of several equivalent representations.
#[derive(Clone, Debug, PartialEq)]
pub enum Channel {
    Chi(ChiMatrix),
    Kraus(KrausSet),
    /// Convex combination; weights are non-negative and sum to one.
    Mixture(Vec<(f64, Channel)>),
    /// Site-wise tensor product; factor `k` acts on the next `arity(k)`
    /// targets in order.
    Product(Vec<Channel>),
}

impl Channel {
    pub fn identity(n_qubits: usize) -> Self {
        Channel::Chi(ChiMatrix::identity(n_qubits))
    }

    pub fn mixture(components: Vec<(f64, Channel)>) -> Result<Self> {
        let first = components.first().ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        let n = first.1.n_qubits();
        let mut total = 0.0;
        for (w, ch) in &components {
            if *w < 0.0 || !w.is_finite() {
                return Err(Error::InvalidParameter(format!("mixture weight {w} is negative")));
            }
            if ch.n_qubits() != n {
                return Err(Error::ArityMismatch { channel: n, targets: ch.n_qubits() });
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {total}")));
        }
        Ok(Channel::Mixture(components))
    }

    pub fn product(factors: Vec<Channel>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter("empty product".into()));
        }
        Ok(Channel::Product(factors))
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            Channel::Chi(chi) => chi.n_qubits,
            Channel::Kraus(k) => k.n_qubits,
            Channel::Mixture(parts) => parts.first().map_or(0, |(_, ch)| ch.n_qubits()),
            Channel::Product(factors) => factors.iter().map(Channel::n_qubits).sum(),
        }
    }

    /// Flattens to a single process matrix.
    pub fn to_chi(&self) -> ChiMatrix {
        match self {
            Channel::Chi(chi) => chi.clone(),
            Channel::Kraus(k) => chi_from_kraus(k),
            Channel::Mixture(parts) => {
                let d = 1usize << (2 * self.n_qubits());
                let mut m = CMatrix::zeros(d, d);
                for (w, ch) in parts {
                    m += ch.to_chi().entries.scale(*w);
                }
                ChiMatrix::from_parts(self.n_qubits(), m)
            }
            Channel::Product(factors) => {
                let mut it = factors.iter().map(Channel::to_chi);
                let first = it.next().expect("product has factors");
                it.fold(first, |acc, f| acc.tensor(&f))
            }
        }
    }

    pub fn to_kraus(&self) -> Result<KrausSet> {
        match self {
            Channel::Kraus(k) => Ok(k.clone()),
            Channel::Chi(chi) => kraus_from_chi(chi),
            Channel::Mixture(_) => kraus_from_chi(&self.to_chi()),
            Channel::Product(factors) => {
                let mut it = factors.iter();
                let mut acc = it.next().expect("product has factors").to_kraus()?;
                for f in it {
                    acc = acc.tensor(&f.to_kraus()?);
                }
                Ok(acc)
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serial::to_json(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serial::from_json(s)
    }
}

/// A channel together with the qubits it acts on.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSite {
    pub channel: Channel,
    pub targets: Vec<usize>,
}

impl NoiseSite {
    pub fn new(channel: Channel, targets: Vec<usize>) -> Result<Self> {
        if channel.n_qubits() != targets.len() {
            return Err(Error::ArityMismatch { channel: channel.n_qubits(), targets: targets.len() });
        }
        Ok(NoiseSite { channel, targets })
    }
}

/// Where noise enters a one-layer circuit.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseSpec {
    Noiseless,
    /// Channels applied in order to the ideal output state.
    EndOfCircuit(Vec<NoiseSite>),
    /// `ZZ` overrotation after every coupled pair's phase gate and `X`
    /// overrotation on every qubit after the mixer, both with strength `omega`.
    InterleavedOverrotation { omega: f64 },
}

impl NoiseSpec {
    /// The same channel on every qubit at the end of the circuit.
    pub fn uniform_local(channel: &Channel, n_qubits: usize) -> Result<Self> {
        let sites = (0..n_qubits).map(|q| NoiseSite::new(channel.clone(), vec![q])).collect::<Result<Vec<_>>>()?;
        Ok(NoiseSpec::EndOfCircuit(sites))
    }

    /// One channel on all qubits at the end of the circuit.
    pub fn global(channel: Channel) -> Self {
        let targets = (0..channel.n_qubits()).collect();
        NoiseSpec::EndOfCircuit(vec![NoiseSite { channel, targets }])
    }
}

/// Outcome of [`validate_cptp`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CptpReport {
    pub is_cp: bool,
    pub is_tp: bool,
    pub min_eigenvalue: f64,
    pub tp_residual: f64,
}

/// `max |sum_kl χ_kl P_l† P_k - I|`.
pub fn tp_residual(chi: &ChiMatrix) -> f64 {
    let n = chi.n_qubits;
    let basis = pauli_basis(n);
    let mut sum: HashMap<usize, C64> = HashMap::new();
    for (k, pk) in basis.iter().enumerate() {
        for (l, pl) in basis.iter().enumerate() {
            let w = chi.entries[(k, l)];
            if w == ZERO {
                continue;
            }
            let (phase, letters) = mul_strings(pl, pk);
            *sum.entry(pauli_index(&letters)).or_insert(ZERO) += w * phase;
        }
    }
    let d = 1usize << n;
    let mut m = -CMatrix::identity(d, d);
    for (idx, w) in sum {
        let mask = PauliMask::new(&basis[idx]);
        for j in 0..d {
            m[(j ^ mask.x, j)] += mask.phase(j) * w;
        }
    }
    max_abs(&m)
}

pub fn validate_cptp(ch: &Channel) -> CptpReport {
    let chi = ch.to_chi();
    let min = chi.min_eigenvalue();
    let residual = tp_residual(&chi);
    CptpReport { is_cp: min >= -PSD_FLOOR, is_tp: residual <= TP_TOL, min_eigenvalue: min, tp_residual: residual }
}

pub fn chi_from_kraus(k: &KrausSet) -> ChiMatrix {
    let n = k.n_qubits;
    let d = 1usize << n;
    let basis: Vec<PauliMask> = pauli_basis(n).iter().map(|l| PauliMask::new(l)).collect();
    let m = basis.len();
    let mut chi = CMatrix::zeros(m, m);
    for op in &k.operators {
        // K = sum_k c_k P_k with c_k = Tr[P_k K] / d
        let coeffs: Vec<C64> = basis.iter().map(|mask| pauli_trace(mask, op) / d as f64).collect();
        for a in 0..m {
            if coeffs[a] == ZERO {
                continue;
            }
            for b in 0..m {
                chi[(a, b)] += coeffs[a] * coeffs[b].conj();
            }
        }
    }
    ChiMatrix::from_parts(n, chi)
}

/// Kraus form from the eigendecomposition of χ; eigenvalues below
/// [`KRAUS_CUTOFF`] are dropped.
pub fn kraus_from_chi(chi: &ChiMatrix) -> Result<KrausSet> {
    let (values, vectors) = eigh(&chi.entries);
    if let Some(&min) = values.first() {
        if min < -PSD_FLOOR {
            return Err(Error::NotCompletelyPositive { min_eigenvalue: min });
        }
    }
    let n = chi.n_qubits;
    let d = 1usize << n;
    let basis: Vec<PauliMask> = pauli_basis(n).iter().map(|l| PauliMask::new(l)).collect();
    let mut operators = Vec::new();
    for (e, &lam) in values.iter().enumerate() {
        if lam < KRAUS_CUTOFF {
            continue;
        }
        let s = lam.sqrt();
        let mut op = CMatrix::zeros(d, d);
        for (k, mask) in basis.iter().enumerate() {
            let u = vectors[(k, e)] * s;
            if u == ZERO {
                continue;
            }
            for j in 0..d {
                op[(j ^ mask.x, j)] += mask.phase(j) * u;
            }
        }
        operators.push(op);
    }
    debug!("kraus_from_chi: kept {} of {} eigenvalues", operators.len(), values.len());
    Ok(KrausSet { n_qubits: n, operators })
}

/// Applies `ch` to `rho` on `targets`. Product channels are applied factor by
/// factor; everything else goes through a single Kraus set.
pub fn apply(ch: &Channel, rho: &DensityMatrix, targets: &[usize]) -> Result<DensityMatrix> {
    use crate::qsim::QuantumState;
    check_targets(ch.n_qubits(), targets, rho.n_qubits())?;
    match ch {
        Channel::Product(factors) => {
            let mut out = rho.clone();
            let mut offset = 0;
            for f in factors {
                let m = f.n_qubits();
                out = apply(f, &out, &targets[offset..offset + m])?;
                offset += m;
            }
            Ok(out)
        }
        _ => ch.to_kraus()?.apply_to(rho, targets),
    }
}

/// Normalized Choi state `(1/d) sum_kl χ_kl |P_k>><<P_l|`, system factor first.
pub fn choi_from_chi(chi: &ChiMatrix) -> CMatrix {
    let n = chi.n_qubits;
    let d = 1usize << n;
    let basis = pauli_basis(n);
    let m = basis.len();
    let inv = 1.0 / (d as f64).sqrt();
    // columns are vec(P_k) / sqrt(d) with vec index a*d + i for entry (a, i)
    let mut v = CMatrix::zeros(d * d, m);
    for (k, letters) in basis.iter().enumerate() {
        let mask = PauliMask::new(letters);
        for i in 0..d {
            let a = i ^ mask.x;
            v[(a * d + i, k)] = mask.phase(i) * inv;
        }
    }
    hermitize(&(&v * &chi.entries * v.adjoint()))
}

pub fn choi(ch: &Channel) -> CMatrix {
    choi_from_chi(&ch.to_chi())
}

/// Single-qubit marginal: partial trace of χ over all other four-dimensional
/// factors.
pub fn marginal_chi(chi: &ChiMatrix, keep: usize) -> Result<ChiMatrix> {
    if keep >= chi.n_qubits {
        return Err(Error::QubitOutOfRange { index: keep, n_qubits: chi.n_qubits });
    }
    Ok(ChiMatrix::from_parts(1, partial_trace_keep(&chi.entries, 4, chi.n_qubits, keep)))
}

/// Tensor product of all single-qubit marginals.
pub fn maten_of(chi: &ChiMatrix) -> Result<Channel> {
    let factors = (0..chi.n_qubits).map(|q| marginal_chi(chi, q).map(Channel::Chi)).collect::<Result<Vec<_>>>()?;
    Channel::product(factors)
}

/// `(1 - c) local + c nonlocal`.
pub fn mix(weight: f64, local: &Channel, nonlocal: &Channel) -> Result<Channel> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::InvalidParameter(format!("mixing weight {weight} outside [0, 1]")));
    }
    if local.n_qubits() != nonlocal.n_qubits() {
        return Err(Error::ArityMismatch { channel: local.n_qubits(), targets: nonlocal.n_qubits() });
    }
    Channel::mixture(vec![(1.0 - weight, local.clone()), (weight, nonlocal.clone())])
}

/// Projector onto `(1/2) sum_i |i i ... i>` over `n` four-dimensional factors.
pub fn max_entangled_chi(n_qubits: usize) -> Result<ChiMatrix> {
    if n_qubits < 2 {
        return Err(Error::InvalidParameter("maximally entangled χ needs at least two qubits".into()));
    }
    let d = 1usize << (2 * n_qubits);
    let step: usize = (0..n_qubits).map(|q| 1usize << (2 * q)).sum();
    let mut m = CMatrix::zeros(d, d);
    for a in 0..4 {
        for b in 0..4 {
            m[(a * step, b * step)] = c(0.25, 0.0);
        }
    }
    Ok(ChiMatrix { n_qubits, entries: m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, kron};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_rho(n: usize, seed: u64) -> DensityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // a random channel applied to |0..0> gives a generic mixed state
        let chi = random_channel(n, &mut rng).unwrap();
        let zero = crate::qsim::StateVector::basis_state(n, 0).to_density();
        let targets: Vec<usize> = (0..n).collect();
        apply(&Channel::Chi(chi), &zero, &targets).unwrap()
    }

    #[test]
    fn zero_params_give_identity() {
        let chi = chi_from_params(&ChiVec12::default()).unwrap();
        assert_eq!(chi, ChiMatrix::identity(1));
    }

    #[test]
    fn depolarizing_params() {
        let p = 0.6;
        let q = (1.0 - p) / 4.0;
        let chi = chi_from_params(&ChiVec12 { p1: q, p2: q, p3: q, ..Default::default() }).unwrap();
        assert!((chi.chi00() - (1.0 + 3.0 * p) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn large_coherence_is_not_cp() {
        let r = chi_from_params(&ChiVec12 { t01: 0.9, ..Default::default() });
        assert!(matches!(r, Err(Error::NotCompletelyPositive { .. })));
    }

    #[test]
    fn params_roundtrip_through_matrix() {
        let v = ChiVec12 { p1: 0.1, p2: 0.05, p3: 0.08, t01: 0.01, t02: -0.02, t03: 0.015, t12: 0.004, v01: 0.03, ..Default::default() };
        let back = ChiVec12::from_chi(&chi_from_params_raw(&v)).unwrap();
        for (a, b) in v.to_array().iter().zip(back.to_array()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_report() {
        let r = validate_cptp(&Channel::identity(2));
        assert!(r.is_cp && r.is_tp);
        assert!(r.tp_residual < 1e-15 && r.min_eigenvalue.abs() < 1e-15);
    }

    #[test]
    fn short_trace_is_not_tp() {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = c(0.9, 0.0);
        let ch = Channel::Chi(ChiMatrix::from_hermitian(1, m).unwrap());
        let r = validate_cptp(&ch);
        assert!(r.is_cp && !r.is_tp);
        assert!((r.tp_residual - 0.1).abs() < 1e-12);
    }

    #[test]
    fn kraus_identity_gives_identity_chi() {
        assert_eq!(chi_from_kraus(&KrausSet::identity(1)).entries(), ChiMatrix::identity(1).entries());
    }

    #[test]
    fn kraus_roundtrip_preserves_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=2 {
            let chi = random_channel(n, &mut rng).unwrap();
            let k = kraus_from_chi(&chi).unwrap();
            assert!(k.tp_residual() < 1e-10);
            let back = chi_from_kraus(&k);
            assert!(frobenius(&(back.entries() - chi.entries())) < 1e-10);
            let rho = random_rho(n, 9);
            let targets: Vec<usize> = (0..n).collect();
            let a = apply(&Channel::Chi(chi.clone()), &rho, &targets).unwrap();
            let b = apply(&Channel::Kraus(k), &rho, &targets).unwrap();
            assert!(frobenius(&(a.matrix() - b.matrix())) < 1e-10);
        }
    }

    #[test]
    fn depolarizing_zero_maximally_mixes() {
        let ch = builtin(&BuiltinChannel::Depolarizing { p: 0.0 }).unwrap();
        let rho = random_rho(2, 4);
        let out = apply(&ch, &rho, &[1]).unwrap();
        // qubit 1 becomes I/2 while qubit 0 keeps its reduced state
        let reduced0 = partial_trace_keep(rho.matrix(), 2, 2, 0);
        let expect = kron(&reduced0, &CMatrix::identity(2, 2).scale(0.5));
        assert!(frobenius(&(out.matrix() - expect)) < 1e-12);
    }

    #[test]
    fn arity_is_checked() {
        let rho = random_rho(2, 5);
        let ch = Channel::identity(2);
        assert!(matches!(apply(&ch, &rho, &[0]), Err(Error::ArityMismatch { .. })));
        assert!(apply(&Channel::identity(1), &rho, &[2]).is_err());
    }

    #[test]
    fn choi_of_identity_and_full_depolarizer() {
        let id = choi(&Channel::identity(1));
        // |Ω><Ω| with |Ω> = (|00> + |11>)/sqrt 2
        assert!((id[(0, 0)].re - 0.5).abs() < 1e-15 && (id[(0, 3)].re - 0.5).abs() < 1e-15);
        assert!((id[(1, 1)].norm()) < 1e-15);
        let dep = choi(&builtin(&BuiltinChannel::Depolarizing { p: 0.0 }).unwrap());
        assert!(frobenius(&(dep - CMatrix::identity(4, 4).scale(0.25))) < 1e-15);
    }

    #[test]
    fn choi_matches_direct_construction() {
        // (E ⊗ id)(|Ω><Ω|) built from Kraus operators as an oracle
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let chi = random_channel(1, &mut rng).unwrap();
        let k = kraus_from_chi(&chi).unwrap();
        let mut omega = nalgebra::DVector::<C64>::zeros(4);
        omega[0] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        omega[3] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let proj = &omega * omega.adjoint();
        let mut direct = CMatrix::zeros(4, 4);
        for a in k.operators() {
            let big = kron(a, &CMatrix::identity(2, 2));
            direct += &big * &proj * big.adjoint();
        }
        assert!(frobenius(&(direct - choi_from_chi(&chi))) < 1e-12);
    }

    #[test]
    fn product_marginals_recover_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_local_chi(&mut rng).chi;
        let b = random_local_chi(&mut rng).chi;
        let ab = a.tensor(&b);
        assert!(frobenius(&(marginal_chi(&ab, 0).unwrap().entries() - a.entries())) < 1e-12);
        assert!(frobenius(&(marginal_chi(&ab, 1).unwrap().entries() - b.entries())) < 1e-12);
        assert!(marginal_chi(&ab, 2).is_err());
    }

    #[test]
    fn maximally_entangled_marginals_are_flat() {
        for n in [2, 3] {
            let chi = max_entangled_chi(n).unwrap();
            assert!((chi.trace().re - 1.0).abs() < 1e-15);
            for q in 0..n {
                let m = marginal_chi(&chi, q).unwrap();
                assert!(frobenius(&(m.entries() - CMatrix::identity(4, 4).scale(0.25))) < 1e-15);
            }
        }
        assert!(validate_cptp(&Channel::Chi(max_entangled_chi(2).unwrap())).is_tp);
    }

    #[test]
    fn mixing_endpoints_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let local = Channel::Chi(random_local_chi(&mut rng).chi.tensor(&random_local_chi(&mut rng).chi));
        let nonlocal = Channel::Chi(random_channel(2, &mut rng).unwrap());
        assert_eq!(mix(0.0, &local, &nonlocal).unwrap().to_chi().entries(), local.to_chi().entries());
        assert!(frobenius(&(mix(1.0, &local, &nonlocal).unwrap().to_chi().entries() - nonlocal.to_chi().entries())) < 1e-15);
        let w = 0.35;
        let lhs = choi(&mix(w, &local, &nonlocal).unwrap());
        let rhs = choi(&local).scale(1.0 - w) + choi(&nonlocal).scale(w);
        assert!(frobenius(&(lhs - rhs)) < 1e-12);
        assert!(mix(1.5, &local, &nonlocal).is_err());
    }
}
