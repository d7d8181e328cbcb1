//! Pauli letters, Pauli strings and real-weighted Pauli sums.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, C64, I, ONE, ZERO};

/// Coefficients smaller than this are dropped from canonical observables.
pub const COEFF_EPS: f64 = 1e-14;

/// Single-qubit Pauli operator. The derived order `I < X < Y < Z` is the
/// basis order used by every process matrix in this crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(k: usize) -> Pauli {
        Pauli::ALL[k & 3]
    }

    pub fn from_char(ch: char) -> Option<Pauli> {
        match ch.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        ['I', 'X', 'Y', 'Z'][self.index()]
    }

    /// Symplectic bits `(x, z)` with `Y = i X Z`.
    fn xz(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    /// `self * other = phase * result`.
    pub fn compose(self, other: Pauli) -> (C64, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (ONE, p),
            (a, b) if a == b => (ONE, I),
            (X, Y) => (I_UNIT, Z),
            (Y, Z) => (I_UNIT, X),
            (Z, X) => (I_UNIT, Y),
            (Y, X) => (-I_UNIT, Z),
            (Z, Y) => (-I_UNIT, X),
            (X, Z) => (-I_UNIT, Y),
            _ => unreachable!(),
        }
    }

    pub fn matrix(self) -> CMatrix {
        let m = match self {
            Pauli::I => [ONE, ZERO, ZERO, ONE],
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, -I, I, ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, c(-1.0, 0.0)],
        };
        CMatrix::from_row_slice(2, 2, &m)
    }
}

const I_UNIT: C64 = I;

/// Bit-mask form of a Pauli string on `n` qubits: `P|j> = phase(j) |j ^ x>`.
/// Qubit 0 is the most significant bit of the basis index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PauliMask {
    pub x: usize,
    pub z: usize,
    pub n_y: u32,
}

impl PauliMask {
    pub fn new(letters: &[Pauli]) -> PauliMask {
        let n = letters.len();
        let mut mask = PauliMask { x: 0, z: 0, n_y: 0 };
        for (q, p) in letters.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            let (x, z) = p.xz();
            if x {
                mask.x |= bit;
            }
            if z {
                mask.z |= bit;
            }
            if *p == Pauli::Y {
                mask.n_y += 1;
            }
        }
        mask
    }

    /// Phase picked up by basis state `j`: `i^{n_y} (-1)^{|j & z|}`.
    #[inline]
    pub fn phase(&self, j: usize) -> C64 {
        let sign = if (j & self.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        match self.n_y % 4 {
            0 => c(sign, 0.0),
            1 => c(0.0, sign),
            2 => c(-sign, 0.0),
            _ => c(0.0, -sign),
        }
    }

    pub fn to_matrix(&self, n_qubits: usize) -> CMatrix {
        let d = 1usize << n_qubits;
        let mut m = CMatrix::zeros(d, d);
        for j in 0..d {
            m[(j ^ self.x, j)] = self.phase(j);
        }
        m
    }
}

/// Product of two Pauli strings of equal length.
pub fn mul_strings(a: &[Pauli], b: &[Pauli]) -> (C64, Vec<Pauli>) {
    let mut phase = ONE;
    let letters = a
        .iter()
        .zip(b)
        .map(|(&p, &q)| {
            let (ph, r) = p.compose(q);
            phase *= ph;
            r
        })
        .collect();
    (phase, letters)
}

/// Pauli string with a real coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliString {
    pub letters: Vec<Pauli>,
    pub coefficient: f64,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>, coefficient: f64) -> Self {
        PauliString { letters, coefficient }
    }

    pub fn parse(s: &str, coefficient: f64) -> Result<Self> {
        let letters = s
            .chars()
            .map(|ch| Pauli::from_char(ch).ok_or_else(|| Error::InvalidParameter(format!("bad Pauli letter {ch:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliString { letters, coefficient })
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&p| p != Pauli::I).count()
    }

    pub fn count(&self, p: Pauli) -> usize {
        self.letters.iter().filter(|&&q| q == p).count()
    }

    pub fn mask(&self) -> PauliMask {
        PauliMask::new(&self.letters)
    }

    pub fn label(&self) -> String {
        self.letters.iter().map(|p| p.to_char()).collect()
    }
}

/// Real-weighted sum of Pauli strings, kept in canonical form: strings are
/// unique, sorted lexicographically, and near-zero coefficients are dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    n_qubits: usize,
    terms: BTreeMap<Vec<Pauli>, f64>,
}

impl Observable {
    pub fn zero(n_qubits: usize) -> Self {
        Observable { n_qubits, terms: BTreeMap::new() }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let mut o = Observable::zero(n_qubits);
        o.add_term(vec![Pauli::I; n_qubits], 1.0);
        o
    }

    /// Single-site operator `coefficient * p_qubit`.
    pub fn single(n_qubits: usize, qubit: usize, p: Pauli, coefficient: f64) -> Self {
        let mut letters = vec![Pauli::I; n_qubits];
        letters[qubit] = p;
        let mut o = Observable::zero(n_qubits);
        o.add_term(letters, coefficient);
        o
    }

    /// Two-site operator `coefficient * p_i q_j` (`i != j`).
    pub fn pair(n_qubits: usize, i: usize, p: Pauli, j: usize, q: Pauli, coefficient: f64) -> Self {
        let mut letters = vec![Pauli::I; n_qubits];
        letters[i] = p;
        letters[j] = q;
        let mut o = Observable::zero(n_qubits);
        o.add_term(letters, coefficient);
        o
    }

    pub fn from_terms(n_qubits: usize, terms: impl IntoIterator<Item = PauliString>) -> Result<Self> {
        let mut o = Observable::zero(n_qubits);
        for t in terms {
            if t.len() != n_qubits {
                return Err(Error::DimensionMismatch { expected: n_qubits, actual: t.len() });
            }
            o.add_term(t.letters, t.coefficient);
        }
        Ok(o)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn add_term(&mut self, letters: Vec<Pauli>, coefficient: f64) {
        debug_assert_eq!(letters.len(), self.n_qubits);
        let v = self.terms.get(&letters).copied().unwrap_or(0.0) + coefficient;
        if v.abs() < COEFF_EPS {
            self.terms.remove(&letters);
        } else {
            self.terms.insert(letters, v);
        }
    }

    pub fn coefficient(&self, letters: &[Pauli]) -> f64 {
        self.terms.get(letters).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = PauliString> + '_ {
        self.terms.iter().map(|(k, &v)| PauliString::new(k.clone(), v))
    }

    pub fn raw_terms(&self) -> &BTreeMap<Vec<Pauli>, f64> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, s: f64) -> Observable {
        let mut o = Observable::zero(self.n_qubits);
        for (k, &v) in &self.terms {
            o.add_term(k.clone(), v * s);
        }
        o
    }

    pub fn plus(&self, other: &Observable) -> Observable {
        assert_eq!(self.n_qubits, other.n_qubits, "observable sizes differ");
        let mut o = self.clone();
        for (k, &v) in &other.terms {
            o.add_term(k.clone(), v);
        }
        o
    }

    /// Largest absolute coefficient difference between two observables.
    pub fn max_difference(&self, other: &Observable) -> f64 {
        let mut keys: Vec<&Vec<Pauli>> = self.terms.keys().collect();
        keys.extend(other.terms.keys());
        keys.into_iter()
            .map(|k| (self.coefficient(k) - other.coefficient(k)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_matrix(&self) -> CMatrix {
        let d = 1usize << self.n_qubits;
        let mut m = CMatrix::zeros(d, d);
        for (k, &v) in &self.terms {
            let mask = PauliMask::new(k);
            for j in 0..d {
                m[(j ^ mask.x, j)] += mask.phase(j) * v;
            }
        }
        m
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(k, v)| format!("{v:+.6}*{}", k.iter().map(|p| p.to_char()).collect::<String>()))
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Complex-weighted Pauli sum used for intermediate dual-map algebra.
#[derive(Clone, Debug, Default)]
pub(crate) struct PauliSum {
    pub terms: BTreeMap<Vec<Pauli>, C64>,
}

impl PauliSum {
    pub fn add(&mut self, letters: Vec<Pauli>, coeff: C64) {
        *self.terms.entry(letters).or_insert(ZERO) += coeff;
    }

    /// Drops the imaginary parts after checking they vanish to `tol`.
    pub fn into_observable(self, n_qubits: usize, tol: f64) -> Result<Observable> {
        let mut o = Observable::zero(n_qubits);
        for (k, v) in self.terms {
            if v.im.abs() > tol {
                return Err(Error::InvalidParameter(format!(
                    "non-Hermitian result: imaginary coefficient {:.3e} on {}",
                    v.im,
                    k.iter().map(|p| p.to_char()).collect::<String>()
                )));
            }
            o.add_term(k, v.re);
        }
        Ok(o)
    }
}
