//! Dense complex matrix kernels shared by every module.
//!
//! Products go through `matrixmultiply`'s complex GEMM, which is several times
//! faster than nalgebra's generic product for `Complex<f64>`.

use matrixmultiply::CGemmOption;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Default backward-error target of [`expm`].
pub const DEFAULT_EXPM_TOL: f64 = 1e-12;

fn gemm(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "inner dimensions differ in matrix product");
    let mut c = CMatrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: nalgebra stores DMatrix<Complex<f64>> contiguously in column-major
    // order and Complex<f64> is repr(C) {re, im}, i.e. layout-compatible with
    // [f64; 2]. The strides describe exactly those buffers, and `c` is a
    // distinct, freshly allocated m x n buffer.
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

/// `a * b`
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    gemm(a, b)
}

/// `a * b†`
pub fn matmul_adj(a: &CMatrix, b: &CMatrix) -> CMatrix {
    // The kernel has no conjugate-transpose mode; an explicit adjoint is O(n²).
    gemm(a, &b.adjoint())
}

/// `a† * b`
pub fn adj_matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    gemm(&a.adjoint(), b)
}

/// `u * m * u†`
pub fn conjugate(u: &CMatrix, m: &CMatrix) -> CMatrix {
    matmul_adj(&matmul(u, m), u)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Max-norm difference restricted to the leading `levels x levels` block.
pub fn leading_block_max_diff(a: &CMatrix, b: &CMatrix, levels: usize) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let k = levels.min(a.nrows()).min(a.ncols());
    let mut worst = 0.0f64;
    for j in 0..k {
        for i in 0..k {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

/// Maximum absolute column sum.
pub fn one_norm(m: &CMatrix) -> f64 {
    m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest deviation from Hermiticity, `max |m - m†|`.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `max |u† u - 1|`
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let g = adj_matmul(u, u);
    max_abs_diff(&g, &CMatrix::identity(u.nrows(), u.ncols()))
}

/// Whether a Hermitian matrix has no eigenvalue below `-tol`.
///
/// Decided by a Cholesky factorization of `m + tol I`, which succeeds exactly
/// when the shifted matrix is positive definite. Only the lower triangle is
/// read. This avoids the dense eigensolver, which loses accuracy on density
/// matrices whose entries span hundreds of orders of magnitude.
pub fn is_positive_semidefinite(m: &CMatrix, tol: f64) -> bool {
    // nalgebra's complex Cholesky accepts negative pivots (complex sqrt never
    // fails), so the pivots are checked by hand.
    let n = m.nrows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)].re + tol;
        for k in 0..j {
            pivot -= l[(j, k)].norm_sqr();
        }
        if !(pivot > 0.0) {
            return false;
        }
        let d = pivot.sqrt();
        l[(j, j)] = C64::new(d, 0.0);
        for i in j + 1..n {
            let mut v = m[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / d;
        }
    }
    true
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
///
/// The series is summed until its terms fall below unit roundoff relative to
/// the partial sum, so the backward error stays at the rounding level for any
/// `tol >= 4 * f64::EPSILON`. Smaller tolerances cannot be honoured in double
/// precision and are rejected.
pub fn expm(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    if !is_finite(m) {
        return Err(Error::NonFinite("matrix exponential input"));
    }
    if !(tol >= 4.0 * f64::EPSILON) {
        return Err(Error::InvalidParameter(format!(
            "expm tolerance {tol:e} is below what double precision can deliver"
        )));
    }
    let n = m.nrows();
    let norm = one_norm(m);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = m * C64::new(0.5f64.powi(squarings), 0.0);

    let mut sum = CMatrix::identity(n, n);
    let mut term = CMatrix::identity(n, n);
    for k in 1..=40 {
        term = matmul(&term, &scaled) * C64::new(1.0 / k as f64, 0.0);
        sum += &term;
        if one_norm(&term) <= f64::EPSILON * one_norm(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = matmul(&sum, &sum);
    }
    Ok(sum)
}
