//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

/// Symmetric part `(A + Aᵀ) / 2`. Exactly symmetric in floating point.
pub fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)]) * 0.5)
}

/// Largest `|A - Aᵀ|` entry relative to `max |A|` (0 for the zero matrix).
pub fn relative_asymmetry(a: &DMatrix<f64>) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let scale = a.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in i + 1..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(sym(a))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest eigenvalue of the symmetric part (`+∞` for an empty matrix).
pub fn min_sym_eig(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a).first().copied().unwrap_or(f64::INFINITY)
}

/// Counts of (positive, zero, negative) eigenvalues of the symmetric part,
/// with `|λ| <= tol` counted as zero.
pub fn inertia(a: &DMatrix<f64>, tol: f64) -> (usize, usize, usize) {
    let mut out = (0, 0, 0);
    for l in sym_eigenvalues(a) {
        if l > tol {
            out.0 += 1;
        } else if l < -tol {
            out.2 += 1;
        } else {
            out.1 += 1;
        }
    }
    out
}

/// Applies `f` to the eigenvalues of a symmetric matrix.
pub fn sym_matrix_function(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(sym(a));
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    let m = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    sym(&m)
}

/// Smallest singular value.
pub fn min_singular_value(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Numerical rank with relative threshold `rtol` on singular values.
pub fn rank(a: &DMatrix<f64>, rtol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().singular_values();
    let smax = sv.max();
    sv.iter().filter(|&&s| s > rtol * smax).count()
}

/// Inverse with a relative singularity threshold on the smallest singular
/// value. Returns `None` when the matrix is numerically singular.
pub fn checked_inverse(a: &DMatrix<f64>, rtol: f64) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return None;
    }
    if n == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let sv = a.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smax > 0.0) || smin <= rtol * smax {
        return None;
    }
    a.clone().lu().try_inverse()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
