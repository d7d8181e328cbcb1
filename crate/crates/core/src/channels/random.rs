//! Random channel generation.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use super::{chi_from_kraus, ChiMatrix, ChiVec12, KrausSet};
use crate::error::{Error, Result};
use crate::linalg::{c, min_eigenvalue, CMatrix};

/// A random single-qubit χ together with the number of rejection rounds it took.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalChiSample {
    pub chi: ChiMatrix,
    pub params: ChiVec12,
    pub attempts: u64,
}

/// Random valid single-qubit channel.
///
/// The diagonal `p0..p3` is drawn uniformly from `[0, 1]^4` and normalized to
/// sum to one. Off-diagonal parameters are then drawn uniformly and the draw
/// is rejected until χ is positive semidefinite. Each parameter is drawn from
/// the largest interval compatible with the 2×2 minors of χ rather than from
/// `[-1, 1]`; this is the same conditional distribution, reached with far
/// fewer rejections.
pub fn random_local_chi<R: Rng + ?Sized>(rng: &mut R) -> LocalChiSample {
    let mut p = [0.0f64; 4];
    for x in p.iter_mut() {
        *x = rng.random::<f64>();
    }
    let total: f64 = p.iter().sum();
    for x in p.iter_mut() {
        *x /= total;
    }
    let g = |a: usize, b: usize| (p[a] * p[b]).sqrt();
    let bound = [
        g(0, 1).min(g(2, 3)), // t01 also sits in χ23
        g(0, 2).min(g(1, 3)),
        g(0, 3).min(g(1, 2)),
        g(1, 2),
        g(1, 3),
        g(2, 3),
        g(0, 1),
        g(0, 2),
        g(0, 3),
    ];
    let mut attempts = 0u64;
    loop {
        attempts += 1;
        let mut draw = [0.0f64; 9];
        for (x, b) in draw.iter_mut().zip(bound) {
            *x = b * (2.0 * rng.random::<f64>() - 1.0);
        }
        let params = ChiVec12 {
            p1: p[1],
            p2: p[2],
            p3: p[3],
            t01: draw[0],
            t02: draw[1],
            t03: draw[2],
            t12: draw[3],
            t13: draw[4],
            t23: draw[5],
            v01: draw[6],
            v02: draw[7],
            v03: draw[8],
        };
        let m = params.to_matrix();
        if min_eigenvalue(&m) >= 0.0 {
            // p0 is restored from the normalized draw so the trace is exactly the sum
            let mut entries = m;
            entries[(0, 0)] = c(p[0], 0.0);
            return LocalChiSample { chi: ChiMatrix::from_parts(1, entries), params, attempts };
        }
    }
}

/// Random full-rank `n`-qubit channel from a Haar-like Stinespring isometry
/// with environment dimension `4^n`.
pub fn random_channel<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<ChiMatrix> {
    if !(1..=5).contains(&n_qubits) {
        return Err(Error::InvalidParameter(format!("random channels support 1..=5 qubits, got {n_qubits}")));
    }
    let d = 1usize << n_qubits;
    let env = d * d;
    let g: CMatrix = DMatrix::from_fn(d * env, d, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    });
    let q = g.qr().q();
    let operators = (0..env).map(|e| q.rows(e * d, d).into_owned()).collect();
    let kraus = KrausSet { n_qubits, operators };
    Ok(chi_from_kraus(&kraus))
}

/// Random probability vector over the `4^n` Pauli strings. With `chi00`
/// given, the identity weight is pinned and the rest is flat-Dirichlet
/// distributed over the remaining mass; otherwise the whole vector is
/// flat-Dirichlet.
pub fn random_pauli_probs<R: Rng + ?Sized>(n_qubits: usize, chi00: Option<f64>, rng: &mut R) -> Result<Vec<f64>> {
    let m = 1usize << (2 * n_qubits);
    let (start, mass) = match chi00 {
        Some(x) if (0.0..=1.0).contains(&x) => (1, 1.0 - x),
        Some(x) => return Err(Error::InvalidParameter(format!("chi00 = {x} outside [0, 1]"))),
        None => (0, 1.0),
    };
    let mut probs = vec![0.0; m];
    let draws: Vec<f64> = (start..m).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    for (p, e) in probs[start..].iter_mut().zip(&draws) {
        *p = mass * e / total;
    }
    if let Some(x) = chi00 {
        probs[0] = x;
    }
    Ok(probs)
}

pub fn random_pauli_chi<R: Rng + ?Sized>(n_qubits: usize, chi00: Option<f64>, rng: &mut R) -> Result<ChiMatrix> {
    ChiMatrix::pauli_diagonal(n_qubits, &random_pauli_probs(n_qubits, chi00, rng)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{validate_cptp, Channel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn local_samples_are_valid_and_deterministic() {
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let s = random_local_chi(&mut a);
            let t = random_local_chi(&mut b);
            assert_eq!(s, t);
            assert!(s.attempts >= 1);
            let r = validate_cptp(&Channel::Chi(s.chi.clone()));
            assert!(r.is_cp && r.is_tp, "{r:?}");
            assert!((s.chi.trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stinespring_channels_are_cptp_and_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=3 {
            let chi = random_channel(n, &mut rng).unwrap();
            let r = validate_cptp(&Channel::Chi(chi.clone()));
            assert!(r.is_cp && r.is_tp, "n={n}: {r:?}");
            assert!(chi.min_eigenvalue() > 1e-8);
        }
        assert!(random_channel(0, &mut rng).is_err());
        assert!(random_channel(6, &mut rng).is_err());
    }

    #[test]
    fn pinned_pauli_probs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_pauli_probs(2, Some(0.9), &mut rng).unwrap();
        assert_eq!(p[0], 0.9);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(random_pauli_probs(1, Some(1.5), &mut rng).is_err());
    }
}
