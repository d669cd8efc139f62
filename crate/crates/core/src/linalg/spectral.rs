//! Largest singular value via block subspace iteration, symmetric Jacobi
//! eigendecomposition, and Cholesky solves.

use super::{dot, norm2, svd, LinalgError, Matrix};

/// Largest singular value σ₁(a).
///
/// Small matrices go through the Jacobi SVD; larger ones use block subspace
/// iteration on the Gram operator with Rayleigh–Ritz extraction, iterated to
/// a 1e-14 relative stall so the value agrees with the SVD route to well
/// below 1e-9 relative.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    let k = a.rows().min(a.cols());
    if k <= 48 {
        if let Ok(d) = svd(a) {
            return d.singular_values[0];
        }
    }
    subspace_top_singular(a)
}

fn subspace_top_singular(a: &Matrix) -> f64 {
    // Work on the smaller Gram side: v ↦ GᵀG v with G the tall orientation.
    let tall_owned;
    let tall: &Matrix = if a.rows() >= a.cols() {
        a
    } else {
        tall_owned = a.transpose();
        &tall_owned
    };
    let tall_t = tall.transpose();
    let n = tall.cols();
    let b = 8.min(n);

    // Deterministic pseudo-random start block (independent of any user RNG).
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut v = Matrix::from_fn(n, b, |_, _| {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    });
    orthonormalize_columns(&mut v);

    let scale = a.max_abs();
    let mut prev = 0.0f64;
    let mut stall = 0usize;
    let mut best = 0.0f64;
    for _ in 0..20_000 {
        let av = tall.matmul(&v); // m×b
        let w = tall_t.matmul(&av); // n×b, = GᵀG V
        let g = symmetric_part(&v.transpose().matmul(&w));
        let (mut evals, _) = jacobi_symmetric(&g, false).expect("b×b Jacobi");
        let top = evals.drain(..).fold(0.0f64, f64::max).max(0.0);
        let sigma = top.sqrt();
        best = sigma;
        if (sigma - prev).abs() <= 1e-14 * sigma.max(1e-300 * scale) {
            stall += 1;
            if stall >= 3 {
                return sigma;
            }
        } else {
            stall = 0;
        }
        prev = sigma;
        v = w;
        orthonormalize_columns(&mut v);
    }
    best
}

fn symmetric_part(a: &Matrix) -> Matrix {
    let n = a.rows();
    Matrix::from_fn(n, n, |i, j| 0.5 * (a.get(i, j) + a.get(j, i)))
}

/// Modified Gram–Schmidt on the columns; degenerate columns are replaced by
/// deterministic unit vectors.
fn orthonormalize_columns(v: &mut Matrix) {
    let (n, b) = (v.rows(), v.cols());
    let mut cols: Vec<Vec<f64>> = (0..b).map(|j| v.col(j)).collect();
    for j in 0..b {
        for _pass in 0..2 {
            for i in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let c = dot(&done[i], &rest[0]);
                for (r, d) in rest[0].iter_mut().zip(&done[i]) {
                    *r -= c * d;
                }
            }
        }
        let nrm = norm2(&cols[j]);
        if nrm > 1e-300 {
            for x in &mut cols[j] {
                *x /= nrm;
            }
        } else {
            for (i, x) in cols[j].iter_mut().enumerate() {
                *x = if i == j % n { 1.0 } else { 0.0 };
            }
        }
    }
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            v.set(i, j, col[i]);
        }
    }
}

/// Eigenvalues of a symmetric matrix, non-increasing.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>, LinalgError> {
    jacobi_symmetric(a, false).map(|(vals, _)| vals)
}

/// Eigenvalues (non-increasing) and matching orthonormal eigenvectors
/// (as matrix columns) of a symmetric matrix.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix), LinalgError> {
    jacobi_symmetric(a, true).map(|(vals, vecs)| (vals, vecs.unwrap()))
}

fn jacobi_symmetric(
    a: &Matrix,
    with_vectors: bool,
) -> Result<(Vec<f64>, Option<Matrix>), LinalgError> {
    assert_eq!(a.rows(), a.cols(), "symmetric eigen needs a square matrix");
    let n = a.rows();
    let mut m = a.clone();
    let mut vecs = if with_vectors {
        Some(Matrix::identity(n))
    } else {
        None
    };
    if n == 1 {
        return Ok((vec![m.get(0, 0)], vecs));
    }

    let scale = m.max_abs().max(1e-300);
    const MAX_SWEEPS: usize = 100;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m.get(p, q).abs());
            }
        }
        if off <= 1e-14 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= 1e-16 * scale {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // Update rows/columns p and q.
                for i in 0..n {
                    if i != p && i != q {
                        let aip = m.get(i, p);
                        let aiq = m.get(i, q);
                        m.set(i, p, c * aip - s * aiq);
                        m.set(p, i, c * aip - s * aiq);
                        m.set(i, q, s * aip + c * aiq);
                        m.set(q, i, s * aip + c * aiq);
                    }
                }
                m.set(p, p, app - t * apq);
                m.set(q, q, aqq + t * apq);
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);
                if let Some(v) = vecs.as_mut() {
                    for i in 0..n {
                        let vip = v.get(i, p);
                        let viq = v.get(i, q);
                        v.set(i, p, c * vip - s * viq);
                        v.set(i, q, s * vip + c * viq);
                    }
                }
            }
        }
    }
    if !converged {
        return Err(LinalgError::NonConvergence {
            algorithm: "Jacobi symmetric eigendecomposition",
            iterations: MAX_SWEEPS,
        });
    }

    let mut vals: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap().then(i.cmp(&j)));
    let sorted_vecs = vecs.map(|v| {
        let mut s = Matrix::zeros(n, n);
        for (slot, &j) in order.iter().enumerate() {
            for i in 0..n {
                s.set(i, slot, v.get(i, j));
            }
        }
        s
    });
    vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let _ = order;
    Ok((vals, sorted_vecs))
}

/// Solve (SPD) a·x = b for each column of b via Cholesky.
pub fn cholesky_solve(a: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    assert_eq!(a.rows(), a.cols());
    assert_eq!(a.rows(), b.rows());
    let n = a.rows();
    // Lower-triangular factor.
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(LinalgError::NotPositiveDefinite {
                        pivot: sum,
                        index: i,
                    });
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut x = Matrix::zeros(n, b.cols());
    for c in 0..b.cols() {
        // forward solve L y = b
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = b.get(i, c);
            for k in 0..i {
                sum -= l[i * n + k] * y[k];
            }
            y[i] = sum / l[i * n + i];
        }
        // back solve Lᵀ x = y
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in (i + 1)..n {
                sum -= l[k * n + i] * x.get(k, c);
            }
            x.set(i, c, sum / l[i * n + i]);
        }
    }
    Ok(x)
}
