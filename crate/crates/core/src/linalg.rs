//! Dense helpers for the small `d x d` systems the estimators need.
//!
//! Matrices are row-major `Vec<f64>` of length `d * d`.

use crate::{Error, Result};

/// Solve `M y = b` for symmetric positive-definite `M` by Cholesky factorization.
pub fn cholesky_solve(m: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let d = b.len();
    debug_assert_eq!(m.len(), d * d);
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = m[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::Numerical {
                        what: "cholesky factorization",
                        residual: s,
                    });
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    let mut y = b.to_vec();
    for i in 0..d {
        for k in 0..i {
            y[i] -= l[i * d + k] * y[k];
        }
        y[i] /= l[i * d + i];
    }
    for i in (0..d).rev() {
        for k in i + 1..d {
            y[i] -= l[k * d + i] * y[k];
        }
        y[i] /= l[i * d + i];
    }
    Ok(y)
}

/// Smallest eigenvalue of a symmetric matrix (cyclic Jacobi rotations).
pub fn symmetric_min_eigenvalue(m: &[f64], d: usize) -> f64 {
    let mut a = m.to_vec();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..d {
            for j in i + 1..d {
                off += a[i * d + j] * a[i * d + j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..d).map(|i| a[i * d + i]).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let m = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let x = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| m[i * 3 + j] * x[j]).sum()).collect();
        let y = cholesky_solve(&m, &b).unwrap();
        for i in 0..3 {
            assert!((y[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let m = [1.0, 2.0, 2.0, 1.0];
        assert!(cholesky_solve(&m, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn min_eigenvalue_of_known_matrix() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let m = [2.0, 1.0, 1.0, 2.0];
        assert!((symmetric_min_eigenvalue(&m, 2) - 1.0).abs() < 1e-12);
        let diag = [0.75, 0.0, 0.0, 0.25];
        assert!((symmetric_min_eigenvalue(&diag, 2) - 0.25).abs() < 1e-15);
    }
}
