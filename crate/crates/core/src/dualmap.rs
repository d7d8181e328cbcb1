//! Dual (Heisenberg-picture) channel algebra.
//!
//! `E#(O) = sum_kl χ_kl P_l† O P_k` satisfies `Tr[O E(ρ)] = Tr[E#(O) ρ]`.
//! For a single qubit the dual is fixed by twelve numbers `P_AB`, the
//! coefficients of `E#(A) = sum_B P_AB B` for `A ∈ {X, Y, Z}`; these are an
//! affine function of the twelve free χ parameters.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channels::{pauli_index, pauli_letters, Channel, ChiMatrix, ChiVec12};
use crate::error::{Error, Result};
use crate::linalg::{c, C64, ZERO};
use crate::qsim::pauli::{mul_strings, Observable, Pauli, PauliSum};
use crate::qsim::{QuboProblem, StateVector};

/// Imaginary parts of dual coefficients larger than this are an error.
const REALITY_TOL: f64 = 1e-10;

/// `E#(P)` for a single Pauli string on the channel's own qubits.
fn dual_of_string(chi: &ChiMatrix, letters: &[Pauli]) -> PauliSum {
    let n = chi.n_qubits();
    let m = 1usize << (2 * n);
    let basis: Vec<Vec<Pauli>> = (0..m).map(|k| pauli_letters(n, k)).collect();
    let e = chi.entries();
    let mut acc: HashMap<usize, C64> = HashMap::new();
    for (k, pk) in basis.iter().enumerate() {
        let (ph1, op_pk) = mul_strings(letters, pk);
        for (l, pl) in basis.iter().enumerate() {
            let w = e[(k, l)];
            if w == ZERO {
                continue;
            }
            let (ph2, out) = mul_strings(pl, &op_pk);
            *acc.entry(pauli_index(&out)).or_insert(ZERO) += w * ph1 * ph2;
        }
    }
    let mut sum = PauliSum::default();
    for (idx, v) in acc {
        sum.add(basis[idx].clone(), v);
    }
    sum
}

/// `E#(O)` for a channel acting on all qubits of `obs`.
pub fn dual_apply(ch: &Channel, obs: &Observable) -> Result<Observable> {
    let targets: Vec<usize> = (0..obs.n_qubits()).collect();
    dual_apply_on(ch, obs, &targets)
}

/// `E#(O)` with the channel acting on `targets` and identity elsewhere.
/// Product channels are dualized factor by factor.
pub fn dual_apply_on(ch: &Channel, obs: &Observable, targets: &[usize]) -> Result<Observable> {
    let n = obs.n_qubits();
    if ch.n_qubits() != targets.len() {
        return Err(Error::ArityMismatch { channel: ch.n_qubits(), targets: targets.len() });
    }
    for (i, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(Error::QubitOutOfRange { index: t, n_qubits: n });
        }
        if targets[..i].contains(&t) {
            return Err(Error::InvalidParameter(format!("target qubit {t} repeated")));
        }
    }
    if let Channel::Product(factors) = ch {
        let mut out = obs.clone();
        let mut offset = 0;
        for f in factors {
            let m = f.n_qubits();
            out = dual_apply_on(f, &out, &targets[offset..offset + m])?;
            offset += m;
        }
        return Ok(out);
    }
    let chi = ch.to_chi();
    let mut memo: HashMap<Vec<Pauli>, PauliSum> = HashMap::new();
    let mut total = PauliSum::default();
    for (letters, &coeff) in obs.raw_terms() {
        let local: Vec<Pauli> = targets.iter().map(|&t| letters[t]).collect();
        let image = memo.entry(local.clone()).or_insert_with(|| dual_of_string(&chi, &local));
        for (img, v) in &image.terms {
            let mut full = letters.clone();
            for (&t, &p) in targets.iter().zip(img) {
                full[t] = p;
            }
            total.add(full, v * coeff);
        }
    }
    total.into_observable(n, REALITY_TOL)
}

/// The twelve coefficients `P_AB`, ordered
/// `(P_XI, P_XX, P_XY, P_XZ, P_YI, ..., P_ZZ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffVec(pub [f64; 12]);

impl CoeffVec {
    /// Coefficients of the identity channel.
    pub fn identity() -> Self {
        let mut v = [0.0; 12];
        v[1] = 1.0;
        v[6] = 1.0;
        v[11] = 1.0;
        CoeffVec(v)
    }

    fn slot(row: Pauli, col: Pauli) -> usize {
        assert!(row != Pauli::I, "the identity row is fixed by unitality");
        (row.index() - 1) * 4 + col.index()
    }

    pub fn get(&self, row: Pauli, col: Pauli) -> f64 {
        self.0[Self::slot(row, col)]
    }

    pub fn set(&mut self, row: Pauli, col: Pauli, value: f64) {
        self.0[Self::slot(row, col)] = value;
    }

    /// `[P_AI, P_AX, P_AY, P_AZ]` for measured operator `row`.
    pub fn row(&self, row: Pauli) -> [f64; 4] {
        let s = Self::slot(row, Pauli::I);
        [self.0[s], self.0[s + 1], self.0[s + 2], self.0[s + 3]]
    }

    pub fn set_row(&mut self, row: Pauli, values: [f64; 4]) {
        let s = Self::slot(row, Pauli::I);
        self.0[s..s + 4].copy_from_slice(&values);
    }

    /// Single-qubit channel dual as an observable map on one site:
    /// `E#(A) = sum_B P_AB B`, `E#(I) = I`.
    pub fn image(&self, p: Pauli) -> [f64; 4] {
        match p {
            Pauli::I => [1.0, 0.0, 0.0, 0.0],
            _ => self.row(p),
        }
    }
}

/// Noisy-Pauli coefficients of a single-qubit χ:
///
/// ```text
/// X ↦ (p0+p1-p2-p3) X + 4 t01 I + 2(t12 - v03) Y + 2(t13 + v02) Z
/// Y ↦ (p0+p2-p1-p3) Y + 4 t02 I + 2(t23 - v01) Z + 2(t12 + v03) X
/// Z ↦ (p0+p3-p1-p2) Z + 4 t03 I + 2(t13 - v02) X + 2(t23 + v01) Y
/// ```
pub fn noisy_pauli_coeffs(chi: &ChiMatrix) -> Result<CoeffVec> {
    let v = ChiVec12::from_chi(chi)?;
    let p0 = chi.chi00();
    let mut out = CoeffVec([0.0; 12]);
    out.set_row(Pauli::X, [4.0 * v.t01, p0 + v.p1 - v.p2 - v.p3, 2.0 * (v.t12 - v.v03), 2.0 * (v.t13 + v.v02)]);
    out.set_row(Pauli::Y, [4.0 * v.t02, 2.0 * (v.t12 + v.v03), p0 + v.p2 - v.p1 - v.p3, 2.0 * (v.t23 - v.v01)]);
    out.set_row(Pauli::Z, [4.0 * v.t03, 2.0 * (v.t13 - v.v02), 2.0 * (v.t23 + v.v01), p0 + v.p3 - v.p1 - v.p2]);
    Ok(out)
}

/// `P = A x + b` with `x` the [`ChiVec12`] array and `p0` eliminated through
/// the trace condition.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineCoeffMap {
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
    inverse: DMatrix<f64>,
}

impl AffineCoeffMap {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn condition_number(&self) -> f64 {
        let sv = self.matrix.singular_values();
        sv.max() / sv.min()
    }

    pub fn apply(&self, v: &ChiVec12) -> CoeffVec {
        let x = DVector::from_row_slice(&v.to_array());
        let p = &self.matrix * x + &self.offset;
        let mut out = [0.0; 12];
        out.copy_from_slice(p.as_slice());
        CoeffVec(out)
    }

    pub fn invert(&self, p: &CoeffVec) -> ChiVec12 {
        let rhs = DVector::from_row_slice(&p.0) - &self.offset;
        let x = &self.inverse * rhs;
        let mut out = [0.0; 12];
        out.copy_from_slice(x.as_slice());
        ChiVec12::from_array(out)
    }
}

pub fn coeff_map() -> AffineCoeffMap {
    // columns: p1 p2 p3 t01 t02 t03 t12 t13 t23 v01 v02 v03
    #[rustfmt::skip]
    let rows: [[f64; 12]; 12] = [
        [0., 0., 0., 4., 0., 0., 0., 0., 0., 0., 0., 0.],   // XI
        [0., -2., -2., 0., 0., 0., 0., 0., 0., 0., 0., 0.], // XX
        [0., 0., 0., 0., 0., 0., 2., 0., 0., 0., 0., -2.],  // XY
        [0., 0., 0., 0., 0., 0., 0., 2., 0., 0., 2., 0.],   // XZ
        [0., 0., 0., 0., 4., 0., 0., 0., 0., 0., 0., 0.],   // YI
        [0., 0., 0., 0., 0., 0., 2., 0., 0., 0., 0., 2.],   // YX
        [-2., 0., -2., 0., 0., 0., 0., 0., 0., 0., 0., 0.], // YY
        [0., 0., 0., 0., 0., 0., 0., 0., 2., -2., 0., 0.],  // YZ
        [0., 0., 0., 0., 0., 4., 0., 0., 0., 0., 0., 0.],   // ZI
        [0., 0., 0., 0., 0., 0., 0., 2., 0., 0., -2., 0.],  // ZX
        [0., 0., 0., 0., 0., 0., 0., 0., 2., 2., 0., 0.],   // ZY
        [-2., -2., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0.], // ZZ
    ];
    let matrix = DMatrix::from_fn(12, 12, |i, j| rows[i][j]);
    let offset = DVector::from_row_slice(&CoeffVec::identity().0);
    let inverse = matrix.clone().try_inverse().expect("coefficient map is invertible");
    AffineCoeffMap { matrix, offset, inverse }
}

/// Inverts the coefficient map.
pub fn chi_from_coeffs(p: &CoeffVec) -> ChiVec12 {
    coeff_map().invert(p)
}

/// Closed-form transformed cost functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DualKind {
    Depolarizing { p: f64 },
    AmplitudeDamping { gamma: f64 },
    /// Dual acting as `Z ↦ p_z Z + p_y Y + p_x X + p_i I` on every qubit.
    Generic { p_i: f64, p_x: f64, p_y: f64, p_z: f64 },
    Pauli { probs: [f64; 4] },
    PhaseDamping { gamma: f64 },
    /// Every qubit rotated by `e^{-i δβ X}` after the mixer.
    AveragedMixerOverrotation { delta_beta: f64 },
}

impl DualKind {
    /// Builds a kind from its name and positional parameters.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let need = |k: usize| {
            if params.len() == k {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} takes {k} parameters, got {}", params.len())))
            }
        };
        match name {
            "depolarizing" => need(1).map(|_| DualKind::Depolarizing { p: params[0] }),
            "amplitude_damping" => need(1).map(|_| DualKind::AmplitudeDamping { gamma: params[0] }),
            "generic" => need(4).map(|_| DualKind::Generic {
                p_i: params[0],
                p_x: params[1],
                p_y: params[2],
                p_z: params[3],
            }),
            "pauli" => need(4).map(|_| DualKind::Pauli { probs: [params[0], params[1], params[2], params[3]] }),
            "phase_damping" => need(1).map(|_| DualKind::PhaseDamping { gamma: params[0] }),
            "averaged_mixer_overrotation" => {
                need(1).map(|_| DualKind::AveragedMixerOverrotation { delta_beta: params[0] })
            }
            other => Err(Error::UnsupportedKind(other.to_string())),
        }
    }

    /// The `Z` row of a generic channel's dual.
    pub fn generic_from_chi(chi: &ChiMatrix) -> Result<Self> {
        let [p_i, p_x, p_y, p_z] = noisy_pauli_coeffs(chi)?.row(Pauli::Z);
        Ok(DualKind::Generic { p_i, p_x, p_y, p_z })
    }
}

/// `sum_i h_i f(Z_i) + sum_{i<j} J_ij f(Z_i) f(Z_j)` with the site map
/// `f(Z) = w[0] I + w[1] X + w[2] Y + w[3] Z`.
fn substitute_z(problem: &QuboProblem, w: [f64; 4]) -> Observable {
    let n = problem.n_qubits();
    let mut out = Observable::zero(n);
    for (q, &h) in problem.h().iter().enumerate() {
        for p in Pauli::ALL {
            let mut letters = vec![Pauli::I; n];
            letters[q] = p;
            out.add_term(letters, h * w[p.index()]);
        }
    }
    for (i, j, jij) in problem.couplings() {
        for a in Pauli::ALL {
            for b in Pauli::ALL {
                let mut letters = vec![Pauli::I; n];
                letters[i] = a;
                letters[j] = b;
                out.add_term(letters, jij * w[a.index()] * w[b.index()]);
            }
        }
    }
    out
}

pub fn analytic_h_prime(kind: &DualKind, problem: &QuboProblem) -> Result<Observable> {
    let n = problem.n_qubits();
    let h1 = problem.h1();
    let h2 = problem.h2();
    let sum_h: f64 = problem.h().iter().sum();
    let sum_j: f64 = problem.couplings().map(|(_, _, w)| w).sum();
    Ok(match *kind {
        DualKind::Depolarizing { p } => h1.scale(p).plus(&h2.scale(p * p)),
        DualKind::AmplitudeDamping { gamma: g } => {
            let mut cross = Observable::zero(n);
            for (i, j, w) in problem.couplings() {
                cross = cross
                    .plus(&Observable::single(n, i, Pauli::Z, w))
                    .plus(&Observable::single(n, j, Pauli::Z, w));
            }
            h1.scale(1.0 - g)
                .plus(&Observable::identity(n).scale(g * sum_h + g * g * sum_j))
                .plus(&h2.scale((1.0 - g) * (1.0 - g)))
                .plus(&cross.scale(g * (1.0 - g)))
        }
        DualKind::Generic { p_i, p_x, p_y, p_z } => substitute_z(problem, [p_i, p_x, p_y, p_z]),
        DualKind::Pauli { probs } => {
            let p = probs[0] + probs[3] - probs[1] - probs[2];
            h1.scale(p).plus(&h2.scale(p * p))
        }
        DualKind::PhaseDamping { .. } => problem.hamiltonian(),
        DualKind::AveragedMixerOverrotation { delta_beta } => {
            let (s, co) = (2.0 * delta_beta).sin_cos();
            let mut zy = Observable::zero(n);
            let mut yy = Observable::zero(n);
            let mut hy = Observable::zero(n);
            for (i, j, w) in problem.couplings() {
                zy = zy
                    .plus(&Observable::pair(n, i, Pauli::Z, j, Pauli::Y, w))
                    .plus(&Observable::pair(n, i, Pauli::Y, j, Pauli::Z, w));
                yy = yy.plus(&Observable::pair(n, i, Pauli::Y, j, Pauli::Y, w));
            }
            for (q, &h) in problem.h().iter().enumerate() {
                hy = hy.plus(&Observable::single(n, q, Pauli::Y, h));
            }
            h2.scale(co * co)
                .plus(&zy.scale((4.0 * delta_beta).sin() / 2.0))
                .plus(&yy.scale(s * s))
                .plus(&h1.scale(co))
                .plus(&hy.scale(s))
        }
    })
}

/// Drops Pauli strings with an odd number of `Y` and `Z` letters; their
/// expectations vanish on `Z₂`-symmetric QAOA states.
pub fn drop_odd_yz(obs: &Observable) -> Observable {
    let mut out = Observable::zero(obs.n_qubits());
    for (letters, &v) in obs.raw_terms() {
        let odd = letters.iter().filter(|&&p| p == Pauli::Y || p == Pauli::Z).count() % 2 == 1;
        if !odd {
            out.add_term(letters.clone(), v);
        }
    }
    out
}

/// Low-noise form of the generic result for field-free problems: keeps
/// `p_z² H` and the `p_z p_y Z_i Y_j` cross terms, dropping everything that
/// is odd in `Y`/`Z` or second order in `p_x, p_y, p_i`.
pub fn low_noise_generic_h_prime(problem: &QuboProblem, p_z: f64, p_y: f64) -> Observable {
    let n = problem.n_qubits();
    let mut out = problem.h2().scale(p_z * p_z);
    for (i, j, w) in problem.couplings() {
        out = out
            .plus(&Observable::pair(n, i, Pauli::Z, j, Pauli::Y, w * p_z * p_y))
            .plus(&Observable::pair(n, i, Pauli::Y, j, Pauli::Z, w * p_z * p_y));
    }
    out
}

/// `(|m> - i ε sum_k X_k |m>) / sqrt(1 + N ε²)`: a computational basis state
/// perturbed to first order by a uniform mixer overrotation.
pub fn overrotated_basis_state(n_qubits: usize, m: usize, eps: f64) -> StateVector {
    let d = 1usize << n_qubits;
    let norm = 1.0 / (1.0 + n_qubits as f64 * eps * eps).sqrt();
    let mut amps = vec![ZERO; d];
    amps[m] = c(norm, 0.0);
    for k in 0..n_qubits {
        amps[m ^ (1 << (n_qubits - 1 - k))] = c(0.0, -eps * norm);
    }
    StateVector::from_raw(n_qubits, amps)
}

/// Series `1 - 4ε² + 4Nε⁴` for the eigenvalue flattening factor.
pub fn eigenvalue_scale_series(n_qubits: usize, eps: f64) -> f64 {
    let e2 = eps * eps;
    1.0 - 4.0 * e2 + 4.0 * n_qubits as f64 * e2 * e2
}

/// Closed form `(1 + (N-4)ε²) / (1 + Nε²)` of the same factor.
pub fn eigenvalue_scale_exact(n_qubits: usize, eps: f64) -> f64 {
    let e2 = eps * eps;
    let n = n_qubits as f64;
    (1.0 + (n - 4.0) * e2) / (1.0 + n * e2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{apply, builtin, random_local_chi, BuiltinChannel};
    use crate::qsim::{build_qaoa_state, expect, ParamSetting};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z(n: usize, q: usize) -> Observable {
        Observable::single(n, q, Pauli::Z, 1.0)
    }

    #[test]
    fn depolarizing_dual_scales_z() {
        let ch = builtin(&BuiltinChannel::Depolarizing { p: 0.7 }).unwrap();
        let out = dual_apply(&ch, &z(1, 0)).unwrap();
        assert!(out.max_difference(&z(1, 0).scale(0.7)) < 1e-14);
    }

    #[test]
    fn amplitude_damping_zz() {
        let g = 0.3;
        let ad = builtin(&BuiltinChannel::AmplitudeDamping { gamma: g }).unwrap();
        let both = Channel::product(vec![ad.clone(), ad]).unwrap();
        let zz = Observable::pair(2, 0, Pauli::Z, 1, Pauli::Z, 1.0);
        let out = dual_apply(&both, &zz).unwrap();
        let expect = zz
            .scale((1.0 - g) * (1.0 - g))
            .plus(&z(2, 0).plus(&z(2, 1)).scale(g * (1.0 - g)))
            .plus(&Observable::identity(2).scale(g * g));
        assert!(out.max_difference(&expect) < 1e-14);
    }

    #[test]
    fn duals_are_unital() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = Channel::Chi(crate::channels::random_channel(2, &mut rng).unwrap());
        let out = dual_apply(&ch, &Observable::identity(2)).unwrap();
        assert!(out.max_difference(&Observable::identity(2)) < 1e-12);
    }

    #[test]
    fn coefficients_match_numeric_dual() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let chi = random_local_chi(&mut rng).chi;
            let coeffs = noisy_pauli_coeffs(&chi).unwrap();
            let ch = Channel::Chi(chi);
            for a in [Pauli::X, Pauli::Y, Pauli::Z] {
                let img = dual_apply(&ch, &Observable::single(1, 0, a, 1.0)).unwrap();
                for b in Pauli::ALL {
                    assert!((img.coefficient(&[b]) - coeffs.get(a, b)).abs() < 1e-12);
                }
            }
            for v in coeffs.0 {
                assert!(v.abs() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn identity_and_depolarizing_coefficients() {
        assert_eq!(noisy_pauli_coeffs(&ChiMatrix::identity(1)).unwrap(), CoeffVec::identity());
        let p = 0.42;
        let coeffs = noisy_pauli_coeffs(&builtin(&BuiltinChannel::Depolarizing { p }).unwrap().to_chi()).unwrap();
        let mut expect = [0.0; 12];
        expect[1] = p;
        expect[6] = p;
        expect[11] = p;
        for (a, b) in coeffs.0.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let back = chi_from_coeffs(&coeffs);
        let q = (1.0 - p) / 4.0;
        assert!((back.p1 - q).abs() < 1e-15 && (back.p2 - q).abs() < 1e-15 && (back.p3 - q).abs() < 1e-15);
    }

    #[test]
    fn coeff_map_agrees_with_direct_formulas() {
        let map = coeff_map();
        assert!(map.condition_number().is_finite());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let s = random_local_chi(&mut rng);
            let direct = noisy_pauli_coeffs(&s.chi).unwrap();
            let via_map = map.apply(&s.params);
            for (a, b) in direct.0.iter().zip(via_map.0) {
                assert!((a - b).abs() < 1e-12);
            }
            let back = map.invert(&via_map);
            for (a, b) in back.to_array().iter().zip(s.params.to_array()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert_eq!(chi_from_coeffs(&CoeffVec::identity()), ChiVec12::default());
    }

    #[test]
    fn unknown_kind_is_rejected() {
        assert!(matches!(DualKind::from_name("bogus", &[]), Err(Error::UnsupportedKind(_))));
        assert!(DualKind::from_name("depolarizing", &[0.1, 0.2]).is_err());
        assert_eq!(DualKind::from_name("depolarizing", &[0.5]).unwrap(), DualKind::Depolarizing { p: 0.5 });
    }

    #[test]
    fn maxcut_depolarizing_rescales_by_p_squared() {
        let problem = QuboProblem::complete(4, 0.0, 1.0).unwrap();
        let out = analytic_h_prime(&DualKind::Depolarizing { p: 0.8 }, &problem).unwrap();
        assert!(out.max_difference(&problem.hamiltonian().scale(0.64)) < 1e-14);
    }

    #[test]
    fn amplitude_damping_colorable_case() {
        // sum_{j != i} J_ij = -h_i collapses the cross term into the shift
        let n = 4;
        let problem = QuboProblem::new(vec![-3.0; n], (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b, 1.0))).collect::<Vec<_>>()).unwrap();
        let g = 0.2;
        let out = analytic_h_prime(&DualKind::AmplitudeDamping { gamma: g }, &problem).unwrap();
        let sum_h: f64 = problem.h().iter().sum();
        let sum_j: f64 = problem.couplings().map(|(_, _, w)| w).sum();
        let expect = problem.hamiltonian().scale((1.0 - g) * (1.0 - g)).plus(&Observable::identity(n).scale(g * sum_h + g * g * sum_j));
        assert!(out.max_difference(&expect) < 1e-13);
    }

    #[test]
    fn amplitude_damping_cross_term_on_regular_graphs() {
        // constant h, J on a d-regular graph: cross term = (J d / h) H1
        let g = 0.25;
        for (problem, degree) in [
            (QuboProblem::complete(5, 0.7, 1.3).unwrap(), 4.0),
            (QuboProblem::ring(6, 0.7, 1.3).unwrap(), 2.0),
        ] {
            let full = analytic_h_prime(&DualKind::AmplitudeDamping { gamma: g }, &problem).unwrap();
            let n = problem.n_qubits();
            let sum_h: f64 = problem.h().iter().sum();
            let sum_j: f64 = problem.couplings().map(|(_, _, w)| w).sum();
            let rest = problem
                .h1()
                .scale(1.0 - g)
                .plus(&Observable::identity(n).scale(g * sum_h + g * g * sum_j))
                .plus(&problem.h2().scale((1.0 - g) * (1.0 - g)));
            let cross = full.plus(&rest.scale(-1.0));
            let a = 1.3 * degree / 0.7;
            assert!(cross.max_difference(&problem.h1().scale(a * g * (1.0 - g))) < 1e-12);
        }
    }

    #[test]
    fn overrotation_matches_explicit_formula() {
        let problem = QuboProblem::complete(3, 0.0, 1.0).unwrap();
        let db: f64 = 0.13;
        let got = analytic_h_prime(&DualKind::AveragedMixerOverrotation { delta_beta: db }, &problem).unwrap();
        // cos²(2δβ) H + sin(4δβ)/2 sum_{i≠j} J Z_i Y_j + sin²(2δβ) sum_{i<j} J Y_i Y_j
        let mut expect = problem.hamiltonian().scale((2.0 * db).cos().powi(2));
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    expect = expect.plus(&Observable::pair(3, i, Pauli::Z, j, Pauli::Y, (4.0 * db).sin() / 2.0));
                }
                if i < j {
                    expect = expect.plus(&Observable::pair(3, i, Pauli::Y, j, Pauli::Y, (2.0 * db).sin().powi(2)));
                }
            }
        }
        assert!(got.max_difference(&expect) < 1e-14);
    }

    #[test]
    fn generic_matches_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let problem = QuboProblem::random(3, &mut rng).unwrap();
            let chi = random_local_chi(&mut rng).chi;
            let kind = DualKind::generic_from_chi(&chi).unwrap();
            let h_prime = analytic_h_prime(&kind, &problem).unwrap();
            let ch = Channel::product(vec![Channel::Chi(chi); 3]).unwrap();
            let s = ParamSetting::new(rng.random::<f64>() * 6.0, rng.random::<f64>() * 3.0);
            let psi = build_qaoa_state(&problem, s);
            let rho = apply(&ch, &psi.to_density(), &[0, 1, 2]).unwrap();
            let a = expect(&psi, &h_prime).unwrap();
            let b = expect(&rho, &problem.hamiltonian()).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn low_noise_reduction_is_the_generic_limit() {
        let problem = QuboProblem::complete(3, 0.0, 1.0).unwrap();
        let (p_z, p_y) = (0.9, 1e-4);
        let full = analytic_h_prime(&DualKind::Generic { p_i: 0.0, p_x: 0.0, p_y, p_z }, &problem).unwrap();
        let approx = low_noise_generic_h_prime(&problem, p_z, p_y);
        assert!(drop_odd_yz(&full).max_difference(&approx) < 2.0 * p_y * p_y);
    }

    #[test]
    fn eigenvalue_scaling_is_sixth_order() {
        for n in [3usize, 4] {
            let problem = QuboProblem::complete(n, 0.0, 1.0).unwrap();
            for eps in [0.01, 0.05] {
                for m in [0usize, 3, 5] {
                    let e_m = problem.energy(m);
                    let psi = overrotated_basis_state(n, m, eps);
                    let measured = expect(&psi, &problem.hamiltonian()).unwrap();
                    assert!((measured - e_m * eigenvalue_scale_exact(n, eps)).abs() < 1e-12);
                    // the series is off by 4N² ε⁶ at leading order
                    let resid = (measured / e_m - eigenvalue_scale_series(n, eps)).abs();
                    let lead = 4.0 * (n * n) as f64 * eps.powi(6);
                    assert!((resid - lead).abs() < 0.2 * lead + 1e-13, "n={n} eps={eps}: {resid} vs {lead}");
                }
            }
        }
    }
}
