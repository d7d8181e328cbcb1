//! Named channel families.

use serde::{Deserialize, Serialize};

use super::{Channel, ChiMatrix, KrausSet};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, ZERO};
use crate::qsim::pauli::Pauli;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuiltinChannel {
    /// `ρ ↦ pρ + (1-p) I/2`.
    Depolarizing { p: f64 },
    AmplitudeDamping { gamma: f64 },
    PhaseDamping { gamma: f64 },
    /// Probabilities of `I, X, Y, Z`.
    Pauli { probs: [f64; 4] },
    /// Two-qubit: `√(1-ω) I`, `√ω Z⊗Z`.
    ZzOverrotation { omega: f64 },
    /// One-qubit: `√(1-ω) I`, `√ω X`.
    XOverrotation { omega: f64 },
    /// Mixer rotation by `β` with von Mises distributed angle noise.
    VonMisesMixer { beta: f64, kappa: f64 },
    /// `ZZ` phase gate at angle `γ J` (`J = ±1`) with von Mises noise.
    VonMisesPhase { gamma: f64, coupling: f64, kappa: f64 },
}

fn unit_interval(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("{name} = {x} outside [0, 1]")));
    }
    Ok(())
}

fn diag2(a: f64, b: f64) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(a, 0.0), ZERO, ZERO, c(b, 0.0)])
}

pub fn builtin(kind: &BuiltinChannel) -> Result<Channel> {
    match *kind {
        BuiltinChannel::Depolarizing { p } => {
            if !(-1.0 / 3.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("depolarizing p = {p} outside [-1/3, 1]")));
            }
            let q = (1.0 - p) / 4.0;
            pauli_channel([(1.0 + 3.0 * p) / 4.0, q, q, q])
        }
        BuiltinChannel::AmplitudeDamping { gamma } => {
            unit_interval("gamma", gamma)?;
            let a1 = diag2(1.0, (1.0 - gamma).sqrt());
            let a2 = CMatrix::from_row_slice(2, 2, &[ZERO, c(gamma.sqrt(), 0.0), ZERO, ZERO]);
            Ok(Channel::Kraus(KrausSet::new(1, vec![a1, a2])?))
        }
        BuiltinChannel::PhaseDamping { gamma } => {
            unit_interval("gamma", gamma)?;
            let a1 = diag2(1.0, (1.0 - gamma).sqrt());
            let a2 = diag2(0.0, gamma.sqrt());
            Ok(Channel::Kraus(KrausSet::new(1, vec![a1, a2])?))
        }
        BuiltinChannel::Pauli { probs } => {
            let total: f64 = probs.iter().sum();
            if probs.iter().any(|&p| p < -1e-12) || (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("Pauli probabilities {probs:?} not on the simplex")));
            }
            pauli_channel(probs)
        }
        BuiltinChannel::ZzOverrotation { omega } => {
            unit_interval("omega", omega)?;
            let zz = Pauli::Z.matrix().kronecker(&Pauli::Z.matrix());
            let ops = vec![CMatrix::identity(4, 4).scale((1.0 - omega).sqrt()), zz.scale(omega.sqrt())];
            Ok(Channel::Kraus(KrausSet::new(2, ops)?))
        }
        BuiltinChannel::XOverrotation { omega } => {
            unit_interval("omega", omega)?;
            let ops = vec![CMatrix::identity(2, 2).scale((1.0 - omega).sqrt()), Pauli::X.matrix().scale(omega.sqrt())];
            Ok(Channel::Kraus(KrausSet::new(1, ops)?))
        }
        BuiltinChannel::VonMisesMixer { beta, kappa } => {
            let r = bessel_ratio_i2_i0(kappa)?;
            let (s2, c2) = (2.0 * beta).sin_cos();
            let s = r * s2 / 2.0;
            // ρ ↦ a ρ + b XρX - i s [X, ρ]
            let mut m = CMatrix::zeros(4, 4);
            m[(0, 0)] = c(0.5 * (1.0 + r * c2), 0.0);
            m[(1, 1)] = c(0.5 * (1.0 - r * c2), 0.0);
            m[(0, 1)] = c(0.0, s);
            m[(1, 0)] = c(0.0, -s);
            Ok(Channel::Chi(ChiMatrix::new(1, m)?))
        }
        BuiltinChannel::VonMisesPhase { gamma, coupling, kappa } => {
            if coupling != 1.0 && coupling != -1.0 {
                return Err(Error::InvalidParameter(format!("von Mises phase coupling {coupling} must be ±1")));
            }
            let r = bessel_ratio_i2_i0(kappa)?;
            let ph = c((2.0 * gamma * coupling).cos(), (2.0 * gamma * coupling).sin());
            let one = c(1.0, 0.0);
            let diag = |sign: f64, w: f64| {
                let w = w.sqrt();
                CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                    one * w,
                    ph * sign * w,
                    ph * sign * w,
                    one * w,
                ]))
            };
            let ops = vec![diag(-1.0, 0.5 * (1.0 - r)), diag(1.0, 0.5 * (1.0 + r))];
            Ok(Channel::Kraus(KrausSet::new(2, ops)?))
        }
    }
}

fn pauli_channel(probs: [f64; 4]) -> Result<Channel> {
    Ok(Channel::Chi(ChiMatrix::pauli_diagonal(1, &probs)?))
}

/// `I₂(κ)/I₀(κ)`, the mean of `cos 2ε` under a von Mises distribution with
/// concentration `κ`. Evaluated as a product of the ratios `I₁/I₀` and
/// `I₂/I₁` from the backward continued-fraction recurrence
/// `r_ν = 1 / (2(ν+1)/κ + r_{ν+1})`.
pub fn bessel_ratio_i2_i0(kappa: f64) -> Result<f64> {
    if kappa.is_nan() || kappa < 0.0 {
        return Err(Error::InvalidParameter(format!("kappa = {kappa} must be non-negative")));
    }
    if kappa == 0.0 {
        return Ok(0.0);
    }
    if kappa.is_infinite() {
        return Ok(1.0);
    }
    let depth = (kappa + 12.0 * kappa.sqrt() + 60.0).min(1e8) as usize;
    let mut r = 0.0;
    let mut r1 = 0.0;
    for nu in (0..depth).rev() {
        r = 1.0 / (2.0 * (nu as f64 + 1.0) / kappa + r);
        if nu == 1 {
            r1 = r;
        }
    }
    Ok(r * r1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{validate_cptp, ChiVec12};
    use crate::linalg::frobenius;

    /// Direct power series, usable while the terms stay finite.
    fn series_ratio(kappa: f64) -> f64 {
        let q = kappa * kappa / 4.0;
        let (mut t0, mut t2) = (1.0f64, q / 2.0);
        let (mut s0, mut s2) = (0.0, 0.0);
        for k in 0..5000 {
            s0 += t0;
            s2 += t2;
            let kf = k as f64;
            t0 *= q / ((kf + 1.0) * (kf + 1.0));
            t2 *= q / ((kf + 1.0) * (kf + 3.0));
            if t0 < 1e-18 * s0 && kf > q.sqrt() {
                break;
            }
        }
        s2 / s0
    }

    #[test]
    fn bessel_ratio_matches_series() {
        for &k in &[1e-4, 0.01, 0.3, 1.0, 2.5, 10.0, 47.0, 150.0, 400.0] {
            let a = bessel_ratio_i2_i0(k).unwrap();
            let b = series_ratio(k);
            assert!((a - b).abs() < 1e-12, "kappa {k}: {a} vs {b}");
        }
        assert_eq!(bessel_ratio_i2_i0(0.0).unwrap(), 0.0);
        assert_eq!(bessel_ratio_i2_i0(f64::INFINITY).unwrap(), 1.0);
        assert!(bessel_ratio_i2_i0(-1.0).is_err());
        // large-argument asymptote 1 - 2/κ
        let k = 1e5;
        assert!((bessel_ratio_i2_i0(k).unwrap() - (1.0 - 2.0 / k + 1.0 / (k * k))).abs() < 1e-9);
    }

    #[test]
    fn depolarizing_one_is_identity() {
        let ch = builtin(&BuiltinChannel::Depolarizing { p: 1.0 }).unwrap();
        assert_eq!(ch.to_chi(), ChiMatrix::identity(1));
    }

    #[test]
    fn pauli_reduces_to_depolarizing() {
        let p = 0.37;
        let q = (1.0 - p) / 4.0;
        let a = builtin(&BuiltinChannel::Pauli { probs: [(1.0 + 3.0 * p) / 4.0, q, q, q] }).unwrap();
        let b = builtin(&BuiltinChannel::Depolarizing { p }).unwrap();
        assert!(frobenius(&(a.to_chi().entries() - b.to_chi().entries())) < 1e-15);
    }

    #[test]
    fn all_builtins_are_cptp() {
        let kinds = [
            BuiltinChannel::Depolarizing { p: -1.0 / 3.0 },
            BuiltinChannel::Depolarizing { p: 0.4 },
            BuiltinChannel::AmplitudeDamping { gamma: 0.3 },
            BuiltinChannel::PhaseDamping { gamma: 0.7 },
            BuiltinChannel::Pauli { probs: [0.7, 0.1, 0.15, 0.05] },
            BuiltinChannel::ZzOverrotation { omega: 0.2 },
            BuiltinChannel::XOverrotation { omega: 0.5 },
            BuiltinChannel::VonMisesMixer { beta: 0.4, kappa: 3.0 },
            BuiltinChannel::VonMisesPhase { gamma: 0.9, coupling: -1.0, kappa: 0.5 },
        ];
        for k in &kinds {
            let r = validate_cptp(&builtin(k).unwrap());
            assert!(r.is_cp && r.is_tp, "{k:?}: {r:?}");
        }
    }

    #[test]
    fn parameter_ranges_are_enforced() {
        assert!(builtin(&BuiltinChannel::Depolarizing { p: -0.5 }).is_err());
        assert!(builtin(&BuiltinChannel::AmplitudeDamping { gamma: 1.2 }).is_err());
        assert!(builtin(&BuiltinChannel::XOverrotation { omega: -0.1 }).is_err());
        assert!(builtin(&BuiltinChannel::Pauli { probs: [0.5, 0.5, 0.5, -0.5] }).is_err());
        assert!(builtin(&BuiltinChannel::VonMisesPhase { gamma: 0.1, coupling: 0.5, kappa: 1.0 }).is_err());
    }

    #[test]
    fn sharp_mixer_is_a_pure_rotation() {
        // κ → ∞ leaves only the rotation by β; at β = 0 the channel is trivial
        let ch = builtin(&BuiltinChannel::VonMisesMixer { beta: 0.0, kappa: f64::INFINITY }).unwrap();
        assert_eq!(ch.to_chi(), ChiMatrix::identity(1));
        let ch = builtin(&BuiltinChannel::VonMisesMixer { beta: 0.3, kappa: f64::INFINITY }).unwrap();
        let chi = ch.to_chi();
        assert!(chi.min_eigenvalue().abs() < 1e-12);
        // rank one: e^{-iβX} = cos β I - i sin β X
        assert!((chi.chi00() - 0.3f64.cos().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn mixer_matches_numerical_average() {
        // average e^{-i(β+ε)X} ρ e^{i(β+ε)X} over a von Mises density by quadrature
        let (beta, kappa) = (0.35, 2.0);
        let n = 4000;
        let mut chi = CMatrix::zeros(4, 4);
        let mut norm = 0.0;
        for i in 0..n {
            let e = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
            let w = (kappa * e.cos()).exp();
            norm += w;
            let th = beta + e;
            let u = [c(th.cos(), 0.0), c(0.0, -th.sin())];
            for a in 0..2 {
                for b in 0..2 {
                    chi[(a, b)] += u[a] * u[b].conj() * w;
                }
            }
        }
        chi.scale_mut(1.0 / norm);
        let ch = builtin(&BuiltinChannel::VonMisesMixer { beta, kappa }).unwrap();
        assert!(frobenius(&(ch.to_chi().entries() - chi)) < 1e-10);
        let _ = ChiVec12::from_chi(&ch.to_chi()).unwrap();
    }
}
