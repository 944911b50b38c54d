//! Weighted Voigt encoding of symmetric 3x3 tensors.
//!
//! The ordering is `(a11, a22, a33, √2·a23, √2·a13, √2·a12)`; with the √2
//! weights the Euclidean dot product of two encodings equals the Frobenius
//! product of the tensors, so 6x6 material blocks act on plain vectors.

use nalgebra::{Matrix3, Matrix6, Vector6};
use std::f64::consts::SQRT_2;

use crate::error::{invalid, Result};

/// `(row, col)` pairs in encoding order.
pub const VOIGT_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

const SYMMETRY_TOL: f64 = 1e-12;

pub fn voigt_encode(a: &Matrix3<f64>) -> Result<Vector6<f64>> {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    for &(i, j) in &VOIGT_PAIRS[3..] {
        if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_TOL * scale {
            return Err(invalid(format!(
                "matrix is not symmetric: a[{i}][{j}]={} vs a[{j}][{i}]={}",
                a[(i, j)],
                a[(j, i)]
            )));
        }
    }
    Ok(Vector6::new(
        a[(0, 0)],
        a[(1, 1)],
        a[(2, 2)],
        SQRT_2 * a[(1, 2)],
        SQRT_2 * a[(0, 2)],
        SQRT_2 * a[(0, 1)],
    ))
}

pub fn voigt_decode(v: &Vector6<f64>) -> Matrix3<f64> {
    let mut a = Matrix3::zeros();
    for (k, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
        let x = if k < 3 { v[k] } else { v[k] / SQRT_2 };
        a[(i, j)] = x;
        a[(j, i)] = x;
    }
    a
}

/// Weights mapping unweighted (engineering) Voigt stress components to the
/// weighted convention: `diag(1, 1, 1, √2, √2, √2)`.
pub fn engineering_weights() -> Vector6<f64> {
    Vector6::new(1.0, 1.0, 1.0, SQRT_2, SQRT_2, SQRT_2)
}

/// Converts an engineering-notation stiffness (stress = C · engineering strain,
/// shear strains doubled) to the weighted convention: `W C W`.
pub fn stiffness_from_engineering(c: &Matrix6<f64>) -> Matrix6<f64> {
    let w = Matrix6::from_diagonal(&engineering_weights());
    w * c * w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_encodes_to_unit_diagonal() {
        let v = voigt_encode(&Matrix3::identity()).unwrap();
        assert_eq!(v, Vector6::new(1.0, 1.0, 1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn off_diagonal_gets_sqrt2_weight() {
        let mut a = Matrix3::zeros();
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        let v = voigt_encode(&a).unwrap();
        assert_eq!(v, Vector6::new(0.0, 0.0, 0.0, 0.0, 0.0, SQRT_2));
    }

    #[test]
    fn asymmetric_input_rejected() {
        let mut a = Matrix3::identity();
        a[(0, 2)] = 1e-3;
        assert!(voigt_encode(&a).is_err());
    }

    #[test]
    fn engineering_conversion_preserves_energy() {
        // ½ σ:ε is the same number in both conventions.
        let c_eng = Matrix6::from_fn(|i, j| if i == j { 2.0 + i as f64 } else { 0.3 });
        let c_w = stiffness_from_engineering(&c_eng);
        let mut eps = Matrix3::new(0.1, 0.2, -0.3, 0.2, 0.5, 0.4, -0.3, 0.4, -0.7);
        eps = (eps + eps.transpose()) * 0.5;
        let eng = Vector6::new(
            eps[(0, 0)],
            eps[(1, 1)],
            eps[(2, 2)],
            2.0 * eps[(1, 2)],
            2.0 * eps[(0, 2)],
            2.0 * eps[(0, 1)],
        );
        let w = voigt_encode(&eps).unwrap();
        let e1 = eng.dot(&(c_eng * eng));
        let e2 = w.dot(&(c_w * w));
        assert!((e1 - e2).abs() < 1e-12 * e1.abs());
    }
}
