//! Algebra of `J_n(a, b)`, the `n×n` matrix with `a` on the diagonal and `b`
//! everywhere else. Its eigenvalues are `a − b` (multiplicity `n − 1`) and
//! `a + (n − 1)b`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn det(n: usize, a: f64, b: f64) -> f64 {
    (a - b).powi(n as i32 - 1) * (a + (n as f64 - 1.0) * b)
}

/// Coefficients `(a', b')` with `J_n(a, b)⁻¹ = J_n(a', b')`.
pub fn inverse(n: usize, a: f64, b: f64) -> Result<(f64, f64)> {
    let nf = n as f64;
    let d = (a - b) * (a + (nf - 1.0) * b);
    if a == b || a + (nf - 1.0) * b == 0.0 || !d.is_finite() {
        return Err(Error::Singular(format!("J_{n}({a}, {b}) is not invertible")));
    }
    Ok(((a + (nf - 2.0) * b) / d, -b / d))
}

pub fn is_psd(n: usize, a: f64, b: f64) -> bool {
    -a / (n as f64 - 1.0) <= b && b <= a
}

pub fn dense(n: usize, a: f64, b: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { a } else { b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn det_examples() {
        assert_eq!(det(3, 1.0, 0.0), 1.0);
        assert_eq!(det(2, 1.0, 1.0), 0.0);
        assert!((det(4, 2.0, 0.5) - 11.8125).abs() < 1e-12);
        assert!((dense(4, 2.0, 0.5).determinant() - 11.8125).abs() < 1e-12);
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(inverse(2, 1.0, 0.0).unwrap(), (1.0, 0.0));
        let (a, b) = inverse(3, 2.0, 1.0).unwrap();
        assert!((a - 0.75).abs() < 1e-15 && (b + 0.25).abs() < 1e-15);
        let dense_inv = dense(3, 2.0, 1.0).try_inverse().unwrap();
        assert!((dense_inv - dense(3, a, b)).amax() < 1e-12);
        assert!(matches!(inverse(2, 1.0, 1.0), Err(Error::Singular(_))));
    }

    #[test]
    fn psd_examples() {
        assert!(is_psd(3, 1.0, 1.0));
        assert!(is_psd(3, 1.0, -0.5));
        assert!(!is_psd(3, 1.0, -0.6));
        let min_eig = dense(3, 1.0, -0.6).symmetric_eigenvalues().min();
        assert!(min_eig < 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn algebra_matches_dense(n in 2usize..=6, a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let m = dense(n, a, b);
            let d = det(n, a, b);
            let dd = m.determinant();
            prop_assert!((d - dd).abs() <= 1e-10 * d.abs().max(1.0));

            let nf = n as f64;
            // Keep away from singular pairs so the identity check is well conditioned.
            if (a - b).abs() > 1e-2 && (a + (nf - 1.0) * b).abs() > 1e-2 {
                let (ia, ib) = inverse(n, a, b).unwrap();
                let prod = &m * dense(n, ia, ib);
                prop_assert!((prod - DMatrix::<f64>::identity(n, n)).amax() < 1e-10);
            }

            let min_eig = m.symmetric_eigenvalues().min();
            let margin = (b - (-a / (nf - 1.0))).min(a - b).abs();
            if margin > 1e-9 {
                prop_assert_eq!(is_psd(n, a, b), min_eig >= 0.0);
            }
        }
    }
}
