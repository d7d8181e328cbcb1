//! Small dense linear-algebra helpers shared by the simulator and the channel code.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = Complex { re: 0.0, im: 0.0 };
pub const ONE: C64 = Complex { re: 1.0, im: 0.0 };
pub const I: C64 = Complex { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Largest entrywise deviation of `m` from its conjugate transpose.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Replaces `m` by `(m + m†) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues are returned in
/// ascending order together with the matching eigenvector columns.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = hermitize(m).symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigvalsh(m).first().copied().unwrap_or(0.0)
}

/// `V diag(f(λ)) V†` for Hermitian `m`.
pub fn hermitian_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = eigh(m);
    let n = m.nrows();
    let mut scaled = vectors.clone();
    for (k, &lam) in values.iter().enumerate() {
        let s = f(lam);
        for r in 0..n {
            scaled[(r, k)] *= s;
        }
    }
    scaled * vectors.adjoint()
}

/// Principal square root of a PSD matrix. Negative eigenvalues down to
/// `-floor` are clipped to zero; anything below raises an error.
pub fn sqrt_psd(m: &CMatrix, floor: f64) -> Result<CMatrix> {
    let min = min_eigenvalue(m);
    if min < -floor {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
    }
    Ok(hermitian_map(m, |x| x.max(0.0).sqrt()))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Partial trace over all tensor factors except `keep`, for a matrix acting on
/// `n_factors` subsystems of equal dimension `dim` (factor 0 leftmost).
pub fn partial_trace_keep(m: &CMatrix, dim: usize, n_factors: usize, keep: usize) -> CMatrix {
    let mut out = CMatrix::zeros(dim, dim);
    let total = m.nrows();
    let stride = dim.pow((n_factors - 1 - keep) as u32);
    let rest = total / dim;
    for r in 0..rest {
        // insert the kept digit into the "rest" index
        let high = r / stride;
        let low = r % stride;
        let base = high * stride * dim + low;
        for a in 0..dim {
            let ia = base + a * stride;
            for b in 0..dim {
                let ib = base + b * stride;
                out[(a, b)] += m[(ia, ib)];
            }
        }
    }
    out
}
