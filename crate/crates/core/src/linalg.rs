//! Small dense symmetric positive-definite helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector};

/// `lambda_min / lambda_max` of a symmetric matrix; 0 for non-PD input.
pub fn spd_rcond(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let eig = m.clone().symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo <= 0.0 || hi <= 0.0 {
        0.0
    } else {
        lo / hi
    }
}

pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(m.clone()).map(|c| c.inverse())
}

/// Solve `m x = b` for SPD `m`.
pub fn spd_solve(m: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    Cholesky::new(m).map(|c| c.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rcond_of_identity_and_singular() {
        assert_eq!(spd_rcond(&DMatrix::identity(3, 3)), 1.0);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(spd_rcond(&singular) < 1e-12);
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        assert!((spd_rcond(&m) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn solve_and_inverse_agree() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let x = spd_solve(m.clone(), &b).unwrap();
        let y = spd_inverse(&m).unwrap() * &b;
        assert!((x - y).norm() < 1e-12);
    }
}
