//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Relative threshold used for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Unitary inverse-DFT matrix, entry `(k, m) = e^{+j2πkm/M}/√M`.
pub fn idft_matrix(m: usize) -> CMat {
    let scale = 1.0 / (m as f64).sqrt();
    CMat::from_fn(m, m, |k, n| {
        // reduce the exponent first so large M keeps full phase accuracy
        let r = ((k * n) % m) as f64;
        Complex64::from_polar(scale, 2.0 * std::f64::consts::PI * r / m as f64)
    })
}

/// Unitary DFT matrix, the conjugate of [`idft_matrix`].
pub fn dft_matrix(m: usize) -> CMat {
    idft_matrix(m).map(|z| z.conj())
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    a.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Number of singular values above `tol · σ_max`.
pub fn numerical_rank(a: &CMat, tol: f64) -> usize {
    let s = singular_values(a);
    let smax = s.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > tol * smax).count()
}

/// Orthonormal basis of the null space of `a`, one basis vector per column.
///
/// Wide inputs are zero-padded to square so the SVD returns a complete set
/// of right singular vectors.
pub fn null_space(a: &CMat, tol: f64) -> CMat {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return CMat::zeros(0, 0);
    }
    let padded = if rows < cols {
        let mut p = CMat::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..cols)
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= tol * smax)
        .collect();
    let mut basis = CMat::zeros(cols, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        for r in 0..cols {
            basis[(r, j)] = v_t[(i, r)].conj();
        }
    }
    basis
}

/// Principal square root of a Hermitian positive semidefinite matrix.
///
/// Tiny negative eigenvalues produced by round-off are clamped to zero.
pub fn hermitian_sqrt(a: &CMat) -> CMat {
    let n = a.nrows();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let sym = (a + a.adjoint()).map(|z| z * 0.5);
    let eig = sym.symmetric_eigen();
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for j in 0..n {
        for z in scaled.column_mut(j).iter_mut() {
            *z *= root[j];
        }
    }
    &scaled * u.adjoint()
}

pub fn frob_norm_sqr(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn vec_norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dft_is_unitary() {
        let w = dft_matrix(16);
        let eye = CMat::identity(16, 16);
        assert!(max_abs_diff(&(&w * w.adjoint()), &eye) < 1e-13);
        assert!(max_abs_diff(&w.adjoint(), &idft_matrix(16)) < 1e-15);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let a = CMat::from_row_slice(1, 3, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let n = null_space(&a, RANK_TOL);
        assert_eq!(n.ncols(), 2);
        assert!(max_abs(&(&a * &n)) < 1e-14);
        assert!(max_abs_diff(&(n.adjoint() * &n), &CMat::identity(2, 2)) < 1e-14);
    }

    #[test]
    fn sqrt_squares_back() {
        let b = CMat::from_fn(4, 4, |i, j| c((i + 2 * j) as f64 * 0.3, (i as f64) - (j as f64)));
        let a = &b * b.adjoint();
        let r = hermitian_sqrt(&a);
        assert!(max_abs_diff(&(&r * &r), &a) < 1e-10 * max_abs(&a));
        assert!(max_abs_diff(&r, &r.adjoint()) < 1e-12);
    }
}
