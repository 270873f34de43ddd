//! Dense nonsymmetric eigenvalue helper: balancing followed by the real
//! Schur decomposition. The matrices here are small (mode matrices are
//! `(N+1) x (N+1)`, discretized operators a few hundred rows), so a dense
//! solve is always appropriate.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const SCHUR_MAX_ITER: usize = 20_000;

/// All eigenvalues of a real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    assert_eq!(m.nrows(), m.ncols(), "eigenvalues of a non-square matrix");
    let n = m.nrows();
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![Complex64::new(m[(0, 0)], 0.0)]),
        _ => {}
    }
    let balanced = balance(m);
    let schur = nalgebra::Schur::try_new(balanced, f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(Error::EigenFailure)?;
    let eig = schur.complex_eigenvalues();
    Ok(eig.iter().map(|c| Complex64::new(c.re, c.im)).collect())
}

/// Largest real part among `eigs`; `-inf` for an empty slice.
pub fn max_real_part(eigs: &[Complex64]) -> f64 {
    eigs.iter().fold(f64::NEG_INFINITY, |m, e| m.max(e.re))
}

/// The eigenvalue attaining the largest real part (ties broken towards the
/// larger |Im| so conjugate pairs report their oscillation).
pub fn dominant(eigs: &[Complex64]) -> Option<Complex64> {
    eigs.iter()
        .copied()
        .max_by(|a, b| {
            (a.re, a.im.abs())
                .partial_cmp(&(b.re, b.im.abs()))
                .expect("non-finite eigenvalue")
        })
}

/// Hausdorff distance between two finite sets of complex numbers.
pub fn hausdorff(a: &[Complex64], b: &[Complex64]) -> f64 {
    fn one_sided(from: &[Complex64], to: &[Complex64]) -> f64 {
        from.iter().fold(0.0f64, |worst, p| {
            let nearest = to
                .iter()
                .map(|q| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
            worst.max(nearest)
        })
    }
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => one_sided(a, b).max(one_sided(b, a)),
    }
}

/// Parlett-Reinsch balancing: a diagonal similarity with power-of-two
/// scales that equalizes row and column norms. Leaves the spectrum exactly
/// unchanged and improves the accuracy of the QR iteration on badly scaled
/// matrices (the mode matrices mix O(alpha) and O(chi u* mu) entries).
fn balance(m: &DMatrix<f64>) -> DMatrix<f64> {
    const RADIX: f64 = 2.0;
    let n = m.nrows();
    let mut a = m.clone();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c: f64 = (0..n).filter(|&j| j != i).map(|j| a[(j, i)].abs()).sum();
            let r: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            while c < r / RADIX {
                c *= RADIX * RADIX;
                f *= RADIX;
            }
            while c >= r * RADIX {
                c /= RADIX * RADIX;
                f /= RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        v
    }

    #[test]
    fn known_2x2_spectrum() {
        // [[-1,1],[1,-2]] has eigenvalues (-3 +- sqrt(5)) / 2.
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -2.0]);
        let eig = sorted_re(eigenvalues(&m).unwrap());
        let lo = (-3.0 - 5.0f64.sqrt()) / 2.0;
        let hi = (-3.0 + 5.0f64.sqrt()) / 2.0;
        assert!((eig[0].re - lo).abs() < 1e-12 && eig[0].im.abs() < 1e-12);
        assert!((eig[1].re - hi).abs() < 1e-12 && eig[1].im.abs() < 1e-12);
    }

    #[test]
    fn complex_pair() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let eig = eigenvalues(&m).unwrap();
        assert!(eig.iter().all(|e| e.re.abs() < 1e-12));
        let mut ims: Vec<f64> = eig.iter().map(|e| e.im).collect();
        ims.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ims[0] + 1.0).abs() < 1e-12 && (ims[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn balancing_preserves_spectrum() {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[1e6, 2e3, 0.0, 1e-4, -3.0, 5.0, 0.5, 1e-5, 2.0],
        );
        let b = balance(&m);
        let ea = sorted_re(eigenvalues(&m).unwrap());
        let eb = sorted_re(eigenvalues(&b).unwrap());
        for (x, y) in ea.iter().zip(&eb) {
            assert!((x - y).norm() < 1e-7 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn hausdorff_basics() {
        let a = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let b = [Complex64::new(0.0, 0.1), Complex64::new(1.0, 0.0)];
        assert!((hausdorff(&a, &b) - 0.1).abs() < 1e-15);
        assert_eq!(hausdorff(&a, &a), 0.0);
    }

    #[test]
    fn zero_row_matrix() {
        // First row zero, like the mu = 0 mode matrix: one exact-zero eigenvalue.
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, -2.0]);
        let eig = eigenvalues(&m).unwrap();
        assert!(eig.iter().any(|e| e.norm() < 1e-14));
        assert!(eig.iter().any(|e| (e.re + 2.0).abs() < 1e-14));
    }
}
