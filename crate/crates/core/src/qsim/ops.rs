//! Applying small operators to selected qubits of a register.

use crate::linalg::{CMatrix, C64, ZERO};

/// Basis-index offsets for every local index of `targets` (target 0 is the
/// most significant local bit, qubit 0 the most significant global bit).
pub(crate) fn target_offsets(targets: &[usize], n_qubits: usize) -> Vec<usize> {
    let m = targets.len();
    (0..1usize << m)
        .map(|a| {
            targets
                .iter()
                .enumerate()
                .filter(|(k, _)| (a >> (m - 1 - k)) & 1 == 1)
                .map(|(_, &t)| 1usize << (n_qubits - 1 - t))
                .sum()
        })
        .collect()
}

/// Global indices whose target bits are all zero.
pub(crate) fn rest_indices(targets: &[usize], n_qubits: usize) -> Vec<usize> {
    let tmask: usize = targets.iter().map(|&t| 1usize << (n_qubits - 1 - t)).sum();
    (0..1usize << n_qubits).filter(|i| i & tmask == 0).collect()
}

/// `amps <- (op on targets) amps`.
pub fn apply_to_vector(op: &CMatrix, targets: &[usize], n_qubits: usize, amps: &mut [C64]) {
    let offsets = target_offsets(targets, n_qubits);
    let local = offsets.len();
    let mut buf = vec![ZERO; local];
    for base in rest_indices(targets, n_qubits) {
        for (a, off) in offsets.iter().enumerate() {
            buf[a] = amps[base + off];
        }
        for (r, off) in offsets.iter().enumerate() {
            let mut acc = ZERO;
            for (a, v) in buf.iter().enumerate() {
                acc += op[(r, a)] * v;
            }
            amps[base + off] = acc;
        }
    }
}

/// `(op on targets) * m`, acting on the row index.
pub fn apply_left(op: &CMatrix, targets: &[usize], n_qubits: usize, m: &CMatrix) -> CMatrix {
    let offsets = target_offsets(targets, n_qubits);
    let local = offsets.len();
    let bases = rest_indices(targets, n_qubits);
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    let mut buf = vec![ZERO; local];
    for col in 0..m.ncols() {
        for &base in &bases {
            for (a, off) in offsets.iter().enumerate() {
                buf[a] = m[(base + off, col)];
            }
            for (r, off) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (a, v) in buf.iter().enumerate() {
                    acc += op[(r, a)] * v;
                }
                out[(base + off, col)] = acc;
            }
        }
    }
    out
}

/// `op rho op†` with `op` acting on `targets`.
pub fn conjugate(op: &CMatrix, targets: &[usize], n_qubits: usize, rho: &CMatrix) -> CMatrix {
    let left = apply_left(op, targets, n_qubits, rho);
    apply_left(op, targets, n_qubits, &left.adjoint()).adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, frobenius};
    use crate::qsim::pauli::Pauli;

    #[test]
    fn single_target_matches_kronecker() {
        let x = Pauli::X.matrix();
        let id = CMatrix::identity(2, 2);
        let full = id.kronecker(&x).kronecker(&id);
        let rho = CMatrix::from_fn(8, 8, |i, j| c((i * 8 + j) as f64, (i as f64) - (j as f64)));
        let expect = &full * &rho * full.adjoint();
        let got = conjugate(&x, &[1], 3, &rho);
        assert!(frobenius(&(expect - got)) < 1e-12);
    }

    #[test]
    fn reversed_targets_permute_local_order() {
        // CNOT with control on qubit 2, target qubit 0
        let cnot = CMatrix::from_row_slice(
            4,
            4,
            &[
                c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.),
                c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.),
                c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.),
                c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.),
            ],
        );
        let mut amps = vec![ZERO; 8];
        amps[0b001] = c(1.0, 0.0); // qubit 2 set
        apply_to_vector(&cnot, &[2, 0], 3, &mut amps);
        assert!((amps[0b101].re - 1.0).abs() < 1e-15);
    }
}
