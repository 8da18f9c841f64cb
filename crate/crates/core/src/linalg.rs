//! Complex linear-algebra aliases and the handful of Hermitian helpers the
//! optimizers share.

use nalgebra::{DMatrix, DVector, RowDVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type CRow = RowDVector<C64>;

/// Relative Hermitian-asymmetry above which a matrix is rejected.
pub const HERMITIAN_TOL: f64 = 1e-9;

#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// `‖X − Xᴴ‖_F / ‖X‖_F`, zero for the zero matrix.
pub fn hermitian_asymmetry(x: &CMat) -> f64 {
    let norm = x.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (x - x.adjoint()).norm() / norm
}

/// Returns `(X + Xᴴ)/2` if `X` is Hermitian within [`HERMITIAN_TOL`].
pub fn symmetrize_hermitian(x: &CMat) -> Option<CMat> {
    if !x.is_square() || hermitian_asymmetry(x) > HERMITIAN_TOL {
        return None;
    }
    Some((x + x.adjoint()).scale(0.5))
}

/// Real trace of `A·B` for Hermitian arguments.
pub fn trace_product(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// Real part of `rowᴴ-style` quadratic form `r · X · rᴴ` for a row vector `r`.
pub fn row_quadratic(row: &CRow, x: &CMat) -> f64 {
    (row * x * row.adjoint())[(0, 0)].re
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(x: &CMat) -> (DVector<f64>, CMat) {
    let sym = (x + x.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(x: &CMat) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    hermitian_eigen(x).0[0]
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_eigenvalue_real(x: &DMatrix<f64>) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let sym = (x + x.transpose()).scale(0.5);
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Square factor `W` with `X = W Wᴴ` for Hermitian PSD `X`; the
/// negative part of the spectrum (numerical noise) is clipped.
pub fn psd_factor(x: &CMat) -> CMat {
    let (values, vectors) = hermitian_eigen(x);
    let mut w = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        for i in 0..w.nrows() {
            w[(i, j)] *= s;
        }
    }
    w
}
