//! Dense linear-algebra kernels used by estimation and decomposition code.
//!
//! Everything here operates on `ndarray` types and is written for the modest
//! matrix sizes this library sees (N up to a few hundred): Cholesky
//! factorization, symmetric eigendecomposition by cyclic Jacobi rotations,
//! and a spectral-radius estimator based on repeated squaring.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// (A + Aᵀ) / 2, absorbing round-off from serialization or accumulation.
pub fn symmetrize(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    out
}

pub fn frobenius_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
///
/// Fails when a pivot drops below `rel_tol` times the largest diagonal entry,
/// which signals the matrix is singular or indefinite at working precision.
pub fn cholesky_lower(a: &Array2<f64>, rel_tol: f64) -> Result<Array2<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Numerical("cholesky: matrix not square".into()));
    }
    let max_diag = (0..n)
        .fold(0.0f64, |m, i| m.max(a[[i, i]].abs()))
        .max(f64::MIN_POSITIVE);
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut pivot = a[[j, j]];
        for k in 0..j {
            pivot -= l[[j, k]] * l[[j, k]];
        }
        if !pivot.is_finite() || pivot <= rel_tol * max_diag {
            return Err(Error::Numerical(format!(
                "cholesky: non-positive pivot {pivot:.3e} at column {j} (matrix not positive definite)"
            )));
        }
        let root = pivot.sqrt();
        l[[j, j]] = root;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / root;
        }
    }
    Ok(l)
}

/// Solve A x = b for symmetric positive-definite A given its Cholesky factor L.
pub fn cholesky_solve_vec(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = b.clone();
    // forward: L y = b
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    // backward: Lᵀ x = y
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

/// ln det A for symmetric positive-definite A.
pub fn log_det_spd(a: &Array2<f64>) -> Result<f64> {
    let l = cholesky_lower(a, 1e-300)?;
    Ok((0..a.nrows()).map(|i| 2.0 * l[[i, i]].ln()).sum())
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns (eigenvalues, eigenvectors) with A = V diag(λ) Vᵀ; eigenvalues are
/// sorted ascending and columns of V follow the same order.
pub fn jacobi_eigh(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Numerical("eigh: matrix not square".into()));
    }
    let mut m = symmetrize(a);
    let mut v = Array2::<f64>::eye(n);
    let scale = frobenius_norm(&m).max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                m[[p, p]] = app - t * apq;
                m[[q, q]] = aqq + t * apq;
                m[[p, q]] = 0.0;
                m[[q, p]] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = m[[k, p]];
                        let akq = m[[k, q]];
                        m[[k, p]] = c * akp - s * akq;
                        m[[p, k]] = m[[k, p]];
                        m[[k, q]] = s * akp + c * akq;
                        m[[q, k]] = m[[k, q]];
                    }
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap());
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, new_col]] = v[[k, old_col]];
        }
    }
    Ok((eigenvalues, vectors))
}

/// Nearest (in the eigenvalue sense) symmetric positive-semidefinite matrix:
/// symmetrize, then clip negative eigenvalues at zero and reconstruct.
pub fn psd_project(a: &Array2<f64>) -> Result<Array2<f64>> {
    let (vals, vecs) = jacobi_eigh(a)?;
    let n = a.nrows();
    if vals.iter().all(|&x| x >= 0.0) {
        return Ok(symmetrize(a));
    }
    let mut out = Array2::<f64>::zeros((n, n));
    for (idx, &lambda) in vals.iter().enumerate() {
        let lam = lambda.max(0.0);
        if lam == 0.0 {
            continue;
        }
        for i in 0..n {
            let vi = vecs[[i, idx]] * lam;
            for j in 0..n {
                out[[i, j]] += vi * vecs[[j, idx]];
            }
        }
    }
    Ok(symmetrize(&out))
}

/// Spectral radius of a general square matrix.
///
/// Uses repeated squaring with Frobenius normalization: after J doublings the
/// estimate ‖A^(2^J)‖^(1/2^J) brackets the radius to near machine precision,
/// including complex eigenvalue pairs and nilpotent matrices (radius 0).
pub fn spectral_radius(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    if n == 0 {
        return 0.0;
    }
    if a.iter().any(|x| !x.is_finite()) {
        return f64::NAN;
    }
    let mut d = a.clone();
    let mut log_scale = 0.0f64; // A^(2^j) = exp(log_scale) * d
    let mut estimate = f64::INFINITY;
    for j in 1..=60u32 {
        let norm = frobenius_norm(&d);
        if norm == 0.0 {
            return 0.0;
        }
        d.mapv_inplace(|x| x / norm);
        log_scale = 2.0 * (log_scale + norm.ln());
        d = d.dot(&d);
        let next_norm = frobenius_norm(&d);
        if next_norm == 0.0 {
            return 0.0;
        }
        let current = ((log_scale + next_norm.ln()) / 2f64.powi(j as i32)).exp();
        if (current - estimate).abs() <= 1e-13 * current.max(1.0) {
            return current;
        }
        estimate = current;
    }
    estimate
}
