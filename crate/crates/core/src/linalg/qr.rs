//! Householder QR for tall matrices (m ≥ n), thin form.

use super::{norm2, Matrix};
use rayon::prelude::*;

pub struct QrThin {
    /// m×n with orthonormal columns.
    pub q: Matrix,
    /// n×n upper triangular.
    pub r: Matrix,
}

/// Thin QR factorization A = Q·R via Householder reflectors. Requires
/// rows ≥ cols. Deterministic; no pivoting.
pub fn qr_thin(a: &Matrix) -> QrThin {
    let (m, n) = (a.rows(), a.cols());
    assert!(m >= n, "qr_thin requires rows >= cols");

    // Work on columns for locality.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    // Reflectors v_k (unit-free with v[0] = 1 convention) and their tau.
    let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n);
    let mut rdiag = vec![0.0; n];
    let mut r = Matrix::zeros(n, n);

    for k in 0..n {
        let x = &cols[k][k..];
        let xnorm = norm2(x);
        if xnorm == 0.0 {
            reflectors.push((vec![0.0; m - k], 0.0));
            rdiag[k] = 0.0;
            continue;
        }
        let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
        let mut v: Vec<f64> = x.to_vec();
        v[0] -= alpha;
        let vnorm_sq = super::dot(&v, &v);
        let tau = if vnorm_sq == 0.0 { 0.0 } else { 2.0 / vnorm_sq };
        rdiag[k] = alpha;

        // Apply H = I - tau v vᵀ to the trailing columns.
        let apply = |col: &mut Vec<f64>| {
            let tail = &mut col[k..];
            let c = tau * super::dot(&v, tail);
            for (t, vv) in tail.iter_mut().zip(&v) {
                *t -= c * vv;
            }
        };
        let (_, trailing) = cols.split_at_mut(k + 1);
        if trailing.len() * (m - k) >= 65_536 {
            trailing.par_iter_mut().for_each(|col| apply(col));
        } else {
            trailing.iter_mut().for_each(|col| apply(col));
        }
        // R entries for this row.
        for j in (k + 1)..n {
            r.set(k, j, cols[j][k]);
        }
        reflectors.push((v, tau));
    }
    for k in 0..n {
        r.set(k, k, rdiag[k]);
    }

    // Accumulate Q by applying reflectors in reverse to the first n columns
    // of the identity.
    let mut qcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            e
        })
        .collect();
    for k in (0..n).rev() {
        let (v, tau) = &reflectors[k];
        if *tau == 0.0 {
            continue;
        }
        let apply = |col: &mut Vec<f64>| {
            let tail = &mut col[k..];
            let c = tau * super::dot(v, tail);
            for (t, vv) in tail.iter_mut().zip(v) {
                *t -= c * vv;
            }
        };
        if qcols.len() * (m - k) >= 65_536 {
            qcols.par_iter_mut().for_each(|col| apply(col));
        } else {
            qcols.iter_mut().for_each(|col| apply(col));
        }
    }

    let mut q = Matrix::zeros(m, n);
    for (j, col) in qcols.iter().enumerate() {
        for i in 0..m {
            q.set(i, j, col[i]);
        }
    }
    QrThin { q, r }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sample_gaussian_matrix;
    use crate::SeedRng;

    #[test]
    fn reconstructs_and_orthonormal() {
        let mut rng = SeedRng::new(3);
        for (m, n) in [(6, 6), (10, 4), (50, 50), (33, 7)] {
            let a = sample_gaussian_matrix(&mut rng, m, n, 1.0);
            let QrThin { q, r } = qr_thin(&a);
            let qr = q.matmul(&r);
            assert!(qr.sub(&a).max_abs() < 1e-10, "reconstruction {m}x{n}");
            let qtq = q.transpose().matmul(&q);
            assert!(
                qtq.sub(&Matrix::identity(n)).max_abs() < 1e-12,
                "orthonormality {m}x{n}"
            );
            // upper triangular
            for i in 0..n {
                for j in 0..i {
                    assert_eq!(r.get(i, j), 0.0);
                }
            }
        }
    }
}
