//! Distances, fidelities and correlations, plus the marginal-approximation
//! fidelity analysis over Pauli channels.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{maten_of, random_channel, random_pauli_probs, Channel, ChiMatrix};
use crate::error::{Error, Result};
use crate::linalg::{c, eigh, frobenius, hermitian_deviation, trace, CMatrix};
use crate::maten::{project_with_spectrum, ExpectationTable};
use crate::qsim::Basis;
use crate::seeds;

/// Eigenvalues more negative than this make an input not a state.
pub const PSD_FLOOR: f64 = 1e-8;
const TRACE_TOL: f64 = 1e-9;
const SUPPORT_CUTOFF: f64 = 1e-13;
pub const DEFAULT_RESTARTS: usize = 32;

/// Frobenius distance between two process matrices.
pub fn l2_chi(a: &ChiMatrix, b: &ChiMatrix) -> Result<f64> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::DimensionMismatch { expected: a.entries().nrows(), actual: b.entries().nrows() });
    }
    Ok(frobenius(&(a.entries() - b.entries())))
}

fn check_state(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let dev = hermitian_deviation(m);
    if dev > 1e-10 {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let tr = trace(m).re;
    if (tr - 1.0).abs() > TRACE_TOL {
        return Err(Error::InvalidParameter(format!("trace {tr} differs from 1")));
    }
    let (vals, vecs) = eigh(m);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -PSD_FLOOR {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
    }
    Ok((vals, vecs))
}

fn is_diagonal(m: &CMatrix) -> bool {
    let d = m.nrows();
    (0..d).all(|i| (0..d).all(|j| i == j || m[(i, j)].norm() == 0.0))
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(a) b sqrt(a)))^2`.
///
/// The square root is taken on the support of the lower-rank argument, which
/// keeps pure-state inputs exact instead of amplifying round-off in `sqrt(0)`.
pub fn state_fidelity(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), actual: b.nrows() });
    }
    let (va, ua) = check_state(a)?;
    let (vb, ub) = check_state(b)?;
    if is_diagonal(a) && is_diagonal(b) {
        let s: f64 = (0..a.nrows()).map(|i| (a[(i, i)].re.max(0.0) * b[(i, i)].re.max(0.0)).sqrt()).sum();
        return Ok(s * s);
    }
    Ok(spectral_fidelity((&va, &ua, a), (&vb, &ub, b)))
}

/// Fidelity from eigendecompositions of both arguments.
fn spectral_fidelity(a: (&[f64], &CMatrix, &CMatrix), b: (&[f64], &CMatrix, &CMatrix)) -> f64 {
    let rank = |v: &[f64]| v.iter().filter(|&&x| x > SUPPORT_CUTOFF).count();
    let ((vals, vecs, _), (_, _, other)) = if rank(a.0) <= rank(b.0) { (a, b) } else { (b, a) };
    let support: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > SUPPORT_CUTOFF).collect();
    let k = support.len();
    let mut w = CMatrix::zeros(other.nrows(), k);
    for (col, &idx) in support.iter().enumerate() {
        w.set_column(col, &(vecs.column(idx) * c(vals[idx].sqrt(), 0.0)));
    }
    let m = w.adjoint() * other * &w;
    let (mu, _) = eigh(&crate::linalg::hermitize(&m));
    // sqrt of round-off-sized eigenvalues can push the sum slightly past 1
    let s: f64 = mu.iter().map(|x| x.max(0.0).sqrt()).sum();
    (s * s).min(1.0)
}

/// Fidelity between Choi states, with the Frobenius distance each input was
/// moved by positivity projection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiFidelity {
    pub fidelity: f64,
    pub projection_distance: [f64; 2],
}

pub fn choi_fidelity(a: &Channel, b: &Channel) -> Result<ChoiFidelity> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::ArityMismatch { channel: a.n_qubits(), targets: b.n_qubits() });
    }
    // The Choi state is χ written in the orthonormal basis of normalized
    // vectorized Paulis, and fidelity is unitarily invariant, so χ suffices.
    let pa = project_with_spectrum(&a.to_chi());
    let pb = project_with_spectrum(&b.to_chi());
    let fidelity = spectral_fidelity(
        (&pa.values, &pa.vectors, pa.chi.entries()),
        (&pb.values, &pb.vectors, pb.chi.entries()),
    );
    Ok(ChoiFidelity { fidelity, projection_distance: [pa.distance, pb.distance] })
}

/// Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), actual: ys.len() });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidParameter("correlation needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let spread = |v: &[f64], m: f64| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo <= 1e-12 * m.abs().max(1.0)
    };
    if spread(xs, mx) || spread(ys, my) {
        return Err(Error::UndefinedCorrelation);
    }
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation, ties sharing their average rank.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    pearson(&ranks(xs), &ranks(ys))
}

/// Per-basis correlations pooled over all qubits and settings of `predicted`.
/// Entries are `None` where the correlation is undefined.
pub fn xyz_correlations(predicted: &ExpectationTable, observed: &ExpectationTable) -> Result<[Option<f64>; 3]> {
    let mut out = [None; 3];
    for (bi, b) in Basis::ALL.iter().enumerate() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for r in predicted.rows().iter().filter(|r| r.basis == *b) {
            let y = observed.get(r.qubit, r.setting_index, *b).ok_or_else(|| {
                Error::InconsistentTables(format!(
                    "observed table lacks qubit={} setting={} basis={}",
                    r.qubit,
                    r.setting_index,
                    b.to_char()
                ))
            })?;
            xs.push(r.value);
            ys.push(y);
        }
        out[bi] = match pearson(&xs, &ys) {
            Ok(r) => Some(r),
            Err(Error::UndefinedCorrelation) => {
                log::warn!("{} correlation undefined (constant values); excluded from average", b.to_char());
                None
            }
            Err(e) => return Err(e),
        };
    }
    Ok(out)
}

/// Mean of the defined X, Y and Z correlations.
pub fn avg_xyz_correlation(predicted: &ExpectationTable, observed: &ExpectationTable) -> Result<f64> {
    let rs: Vec<f64> = xyz_correlations(predicted, observed)?.into_iter().flatten().collect();
    if rs.is_empty() {
        return Err(Error::UndefinedCorrelation);
    }
    Ok(rs.iter().sum::<f64>() / rs.len() as f64)
}

/// Maps `m` angles to a probability vector of length `m + 1`:
/// `p[0] = cos²θ[m-1]`, `p[1] = cos²θ[m-2] sin²θ[m-1]`, ..., and the last
/// entry is the product of all `sin²`.
pub fn hurwitz_probs(thetas: &[f64]) -> Vec<f64> {
    let m = thetas.len();
    let mut p = vec![0.0; m + 1];
    let mut tail = 1.0;
    for (k, slot) in p.iter_mut().take(m).enumerate() {
        let t = thetas[m - 1 - k];
        *slot = tail * t.cos().powi(2);
        tail *= t.sin().powi(2);
    }
    p[m] = tail;
    p
}

/// Inverse of [`hurwitz_probs`], with angles in `[0, π/2]`.
pub fn hurwitz_angles(probs: &[f64]) -> Vec<f64> {
    let m = probs.len().saturating_sub(1);
    let mut thetas = vec![0.0; m];
    for k in 0..m {
        let rest: f64 = probs[k..].iter().sum();
        let ratio = if rest > 0.0 { (probs[k] / rest).clamp(0.0, 1.0) } else { 1.0 };
        thetas[m - 1 - k] = ratio.sqrt().acos();
    }
    thetas
}

/// Fidelity between a Pauli channel and the product of its marginals, from
/// the probability vector alone.
pub fn pauli_ma_fidelity(n_qubits: usize, probs: &[f64]) -> f64 {
    let digit = |k: usize, q: usize| (k >> (2 * (n_qubits - 1 - q))) & 3;
    let mut marg = vec![[0.0f64; 4]; n_qubits];
    for (k, &p) in probs.iter().enumerate() {
        for (q, m) in marg.iter_mut().enumerate() {
            m[digit(k, q)] += p;
        }
    }
    let s: f64 = probs
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let q: f64 = (0..n_qubits).map(|i| marg[i][digit(k, i)]).product();
            (p.max(0.0) * q.max(0.0)).sqrt()
        })
        .sum();
    s * s
}

/// `F(χ, MATEN(χ))`.
pub fn ma_fidelity(chi: &ChiMatrix) -> Result<f64> {
    let ma = maten_of(chi)?.to_chi();
    state_fidelity(chi.entries(), ma.entries())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Full,
    Pauli,
}

impl ChannelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::Full => "full",
            ChannelKind::Pauli => "pauli",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityRecord {
    pub kind: ChannelKind,
    pub n_qubits: usize,
    pub sample_index: usize,
    pub chi00: f64,
    pub fidelity: f64,
}

/// Random channels and their MA fidelities. Pauli samples draw `χ00`
/// uniformly on `[0, 1]` and spread the remainder flat-Dirichlet over the
/// other Pauli strings, so the whole `χ00` axis is populated.
pub fn fidelity_sweep(kind: ChannelKind, n_qubits: usize, samples: usize, seed: u64) -> Result<Vec<FidelityRecord>> {
    let allowed = match kind {
        ChannelKind::Full => 2..=4,
        ChannelKind::Pauli => 2..=5,
    };
    if !allowed.contains(&n_qubits) {
        return Err(Error::InvalidParameter(format!("{} sweep does not support {n_qubits} qubits", kind.as_str())));
    }
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds::rng(seed, &[kind as u64, n_qubits as u64, i as u64]);
            let (chi00, fidelity) = match kind {
                ChannelKind::Full => {
                    let chi = random_channel(n_qubits, &mut rng)?;
                    (chi.chi00(), ma_fidelity(&chi)?)
                }
                ChannelKind::Pauli => {
                    let x: f64 = rng.random();
                    let p = random_pauli_probs(n_qubits, Some(x), &mut rng)?;
                    (x, pauli_ma_fidelity(n_qubits, &p))
                }
            };
            Ok(FidelityRecord { kind, n_qubits, sample_index: i, chi00, fidelity })
        })
        .collect()
}

fn gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + h;
            let fp = f(&xp);
            xp[i] = orig - h;
            let fm = f(&xp);
            xp[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Quasi-Newton descent with central-difference gradients and a backtracking
/// line search. Returns the best point found and its value.
pub fn bfgs(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], max_iter: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    if n == 0 {
        return (vec![], fx);
    }
    let mut g = DVector::from_vec(gradient(f, x.as_slice()));
    let mut hinv = DMatrix::<f64>::identity(n, n);
    for _ in 0..max_iter {
        if g.norm() < 1e-10 {
            break;
        }
        let mut dir = -(&hinv * &g);
        let mut slope = g.dot(&dir);
        if slope >= 0.0 {
            hinv = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = g.dot(&dir);
        }
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-12 {
            let trial = &x + &dir * step;
            let ft = f(trial.as_slice());
            if ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew)) = accepted else { break };
        let gn = DVector::from_vec(gradient(f, xn.as_slice()));
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-14 {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - (&s * y.transpose()) * rho;
            let right = &eye - (&y * s.transpose()) * rho;
            hinv = &left * &hinv * &right + (&s * s.transpose()) * rho;
        }
        let improvement = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        if improvement.abs() < 1e-15 {
            break;
        }
    }
    (x.as_slice().to_vec(), fx)
}

/// Lowest MA fidelity found for one pinned `χ00`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundPoint {
    pub n_qubits: usize,
    pub chi00: f64,
    pub min_fidelity: f64,
    pub restarts_used: usize,
}

/// Minimizes the MA fidelity over Pauli channels with fixed identity weight.
/// The outermost Hurwitz angle is pinned so that `cos²` of it equals `χ00`;
/// the remaining angles are free. Each restart starts from a random pinned
/// Pauli channel.
pub fn minimize_ma_fidelity(n_qubits: usize, chi00_grid: &[f64], restarts: usize, seed: u64) -> Result<Vec<LowerBoundPoint>> {
    if !(2..=3).contains(&n_qubits) {
        return Err(Error::InvalidParameter(format!("lower-bound search supports 2 or 3 qubits, got {n_qubits}")));
    }
    if restarts == 0 {
        return Err(Error::InvalidParameter("at least one restart is needed".into()));
    }
    let m = (1usize << (2 * n_qubits)) - 1;
    chi00_grid
        .par_iter()
        .enumerate()
        .map(|(gi, &x)| {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidParameter(format!("chi00 = {x} outside [0, 1]")));
            }
            let pinned = x.sqrt().acos();
            let objective = |free: &[f64]| {
                let mut thetas = free.to_vec();
                thetas.push(pinned);
                pauli_ma_fidelity(n_qubits, &hurwitz_probs(&thetas))
            };
            let mut best = f64::INFINITY;
            for r in 0..restarts {
                let mut rng = seeds::rng(seed, &[n_qubits as u64, gi as u64, r as u64]);
                let start = random_pauli_probs(n_qubits, Some(x), &mut rng)?;
                let mut angles = hurwitz_angles(&start);
                angles.truncate(m - 1);
                let (_, f) = bfgs(&objective, &angles, 400);
                best = best.min(f);
            }
            Ok(LowerBoundPoint { n_qubits, chi00: x, min_fidelity: best, restarts_used: restarts })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{builtin, max_entangled_chi, random_local_chi, BuiltinChannel};
    use crate::qsim::StateVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn l2_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_local_chi(&mut rng).chi;
        let b = random_local_chi(&mut rng).chi;
        assert_eq!(l2_chi(&a, &a).unwrap(), 0.0);
        assert_eq!(l2_chi(&a, &b).unwrap(), l2_chi(&b, &a).unwrap());
        assert!(l2_chi(&a, &ChiMatrix::identity(2)).is_err());
    }

    #[test]
    fn fidelity_of_pure_and_mixed() {
        let psi = StateVector::plus(2).to_density().into_matrix();
        assert!((state_fidelity(&psi, &psi).unwrap() - 1.0).abs() < 1e-12);
        let mixed = CMatrix::identity(4, 4) * c(0.25, 0.0);
        assert!((state_fidelity(&psi, &mixed).unwrap() - 0.25).abs() < 1e-12);
        let mut bad = mixed.clone();
        bad[(0, 0)] = c(-0.1, 0.0);
        bad[(1, 1)] = c(0.6, 0.0);
        assert!(matches!(state_fidelity(&bad, &mixed), Err(Error::NotPositiveSemidefinite { .. })));
    }

    #[test]
    fn entangled_chi_sits_at_the_floor() {
        for n in [2usize, 3] {
            let chi = max_entangled_chi(n).unwrap();
            let f = ma_fidelity(&chi).unwrap();
            assert!((f - 0.25f64.powi(n as i32)).abs() < 1e-12, "n={n}: {f}");
        }
    }

    #[test]
    fn choi_identity_vs_depolarizing() {
        let id = Channel::identity(1);
        let dep = builtin(&BuiltinChannel::Depolarizing { p: 0.0 }).unwrap();
        let f = choi_fidelity(&id, &dep).unwrap();
        assert!((f.fidelity - 0.25).abs() < 1e-12);
        assert!((choi_fidelity(&dep, &dep).unwrap().fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn choi_fidelity_matches_explicit_choi_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_channel(2, &mut rng).unwrap();
        let b = random_channel(2, &mut rng).unwrap();
        let ja = crate::channels::choi_from_chi(&a);
        let jb = crate::channels::choi_from_chi(&b);
        let direct = state_fidelity(&ja, &jb).unwrap();
        let f = choi_fidelity(&Channel::Chi(a), &Channel::Chi(b)).unwrap();
        assert!((f.fidelity - direct).abs() < 1e-10, "{} vs {direct}", f.fidelity);
    }

    #[test]
    fn pearson_signs_and_constants() {
        let xs = [0.1, 0.5, -0.3, 0.9];
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &xs).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&xs, &[2.0; 4]), Err(Error::UndefinedCorrelation)));
        assert!((spearman(&xs, &[1.0, 5.0, -3.0, 90.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hurwitz_edges_and_inverse() {
        assert_eq!(hurwitz_probs(&[0.0; 3]), vec![1.0, 0.0, 0.0, 0.0]);
        let p = hurwitz_probs(&[std::f64::consts::FRAC_PI_2; 3]);
        assert!(p[..3].iter().all(|x| x.abs() < 1e-30) && (p[3] - 1.0).abs() < 1e-15);
        let q = [0.4, 0.1, 0.3, 0.2];
        let back = hurwitz_probs(&hurwitz_angles(&q));
        for (a, b) in q.iter().zip(back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn pauli_vector_fidelity_matches_matrix_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = random_pauli_probs(2, None, &mut rng).unwrap();
        let chi = ChiMatrix::pauli_diagonal(2, &p).unwrap();
        assert!((pauli_ma_fidelity(2, &p) - ma_fidelity(&chi).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn bfgs_finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2) + x[0] * x[1];
        let (x, fx) = bfgs(&f, &[0.0, 0.0], 200);
        // stationary point of the quadratic
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 6.0]);
        let b = DVector::from_column_slice(&[2.0, -12.0]);
        let want = a.lu().solve(&b).unwrap();
        assert!((x[0] - want[0]).abs() < 1e-5 && (x[1] - want[1]).abs() < 1e-5);
        assert!(fx <= f(&[want[0], want[1]]) + 1e-9);
    }

    #[test]
    fn lower_bound_at_identity_is_one() {
        let pts = minimize_ma_fidelity(2, &[1.0], 2, 0).unwrap();
        assert!((pts[0].min_fidelity - 1.0).abs() < 1e-12);
        assert!(minimize_ma_fidelity(4, &[0.5], 2, 0).is_err());
    }
}
