//! Singular value decomposition via one-sided Jacobi rotations.
//!
//! One-sided Jacobi orthogonalizes the columns of A by plane rotations,
//! accumulating them into V; at convergence the column norms are the
//! singular values and the normalized columns form U. It is slower than
//! bidiagonalization schemes but delivers high relative accuracy and is
//! entirely adequate for the matrix sizes in scope.

use super::{dot, norm2, LinalgError, Matrix};

/// Thin SVD: `a = u · diag(singular_values) · vᵀ`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// rows × k with orthonormal columns, k = min(rows, cols).
    pub u: Matrix,
    /// Non-increasing, non-negative, length k.
    pub singular_values: Vec<f64>,
    /// cols × k with orthonormal columns.
    pub v: Matrix,
}

impl Svd {
    /// U · diag(σ) · Vᵀ.
    pub fn reconstruct(&self) -> Matrix {
        let k = self.singular_values.len();
        let mut us = self.u.clone();
        for j in 0..k {
            for i in 0..us.rows() {
                let v = us.get(i, j) * self.singular_values[j];
                us.set(i, j, v);
            }
        }
        us.matmul_transb(&self.v)
    }
}

const PAIR_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// One-sided Jacobi SVD. Deterministic. Fails only if the rotation sweep
/// has not converged after [`MAX_SWEEPS`] passes.
pub fn svd(a: &Matrix) -> Result<Svd, LinalgError> {
    if a.rows() >= a.cols() {
        svd_tall(a)
    } else {
        let t = svd_tall(&a.transpose())?;
        Ok(Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        })
    }
}

fn svd_tall(a: &Matrix) -> Result<Svd, LinalgError> {
    let (m, n) = (a.rows(), a.cols());
    debug_assert!(m >= n);

    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (head, tail) = cols.split_at_mut(q);
                let cp = &mut head[p];
                let cq = &mut tail[0];
                let app = dot(cp, cp);
                let aqq = dot(cq, cq);
                let apq = dot(cp, cq);
                if apq.abs() <= PAIR_TOL * (app * aqq).sqrt() || app == 0.0 || aqq == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(cp, cq, c, s);
                let (vhead, vtail) = vcols.split_at_mut(q);
                rotate_pair(&mut vhead[p], &mut vtail[0], c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NonConvergence {
            algorithm: "one-sided Jacobi SVD",
            iterations: MAX_SWEEPS,
        });
    }

    let mut sigma: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap().then(i.cmp(&j)));

    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    let mut nonzero_u: Vec<Vec<f64>> = Vec::new();
    let mut zero_slots: Vec<usize> = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        let s = sigma[j];
        if s > 0.0 {
            let uc: Vec<f64> = cols[j].iter().map(|x| x / s).collect();
            for i in 0..m {
                u.set(i, slot, uc[i]);
            }
            nonzero_u.push(uc);
        } else {
            zero_slots.push(slot);
        }
        for i in 0..n {
            v.set(i, slot, vcols[j][i]);
        }
    }
    sigma.sort_by(|x, y| y.partial_cmp(x).unwrap());

    // Exactly-zero singular values leave U columns undefined; fill them with
    // an orthonormal completion so UᵀU = I holds for the thin factor too.
    for &slot in &zero_slots {
        let fill = orthonormal_completion(m, &nonzero_u);
        for i in 0..m {
            u.set(i, slot, fill[i]);
        }
        nonzero_u.push(fill);
    }

    Ok(Svd {
        u,
        singular_values: sigma,
        v,
    })
}

#[inline]
fn rotate_pair(cp: &mut [f64], cq: &mut [f64], c: f64, s: f64) {
    for i in 0..cp.len() {
        let x = cp[i];
        let y = cq[i];
        cp[i] = c * x - s * y;
        cq[i] = s * x + c * y;
    }
}

/// A unit vector orthogonal to every column in `basis` (|basis| < m).
fn orthonormal_completion(m: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for j in 0..m {
        let mut r = vec![0.0; m];
        r[j] = 1.0;
        // two Gram-Schmidt passes
        for _ in 0..2 {
            for b in basis {
                let c = dot(&r, b);
                for (ri, bi) in r.iter_mut().zip(b) {
                    *ri -= c * bi;
                }
            }
        }
        let nrm = norm2(&r);
        if nrm > 0.5 {
            for x in &mut r {
                *x /= nrm;
            }
            return r;
        }
        if best.as_ref().map_or(true, |(bn, _)| nrm > *bn) {
            best = Some((nrm, r));
        }
    }
    let (nrm, mut r) = best.expect("m > 0");
    assert!(nrm > 0.0, "no completion direction found");
    for x in &mut r {
        *x /= nrm;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_norm, sample_gaussian_matrix, sample_haar_orthogonal};
    use crate::SeedRng;

    fn check_invariants(a: &Matrix, d: &Svd) {
        let k = a.rows().min(a.cols());
        assert_eq!(d.singular_values.len(), k);
        for w in d.singular_values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(d.singular_values.iter().all(|&s| s >= 0.0));
        let utu = d.u.transpose().matmul(&d.u);
        assert!(utu.sub(&Matrix::identity(k)).max_abs() <= 1e-10);
        let vtv = d.v.transpose().matmul(&d.v);
        assert!(vtv.sub(&Matrix::identity(k)).max_abs() <= 1e-10);
        let resid = d.reconstruct().sub(a);
        assert!(frobenius_norm(&resid) <= 1e-8 * frobenius_norm(a).max(1e-30));
    }

    #[test]
    fn diagonal_matrix() {
        let a = Matrix::diag(&[5.0, 2.0]);
        let d = svd(&a).unwrap();
        assert!((d.singular_values[0] - 5.0).abs() < 1e-12);
        assert!((d.singular_values[1] - 2.0).abs() < 1e-12);
        check_invariants(&a, &d);
    }

    #[test]
    fn orthogonal_matrix_has_unit_spectrum() {
        let q = sample_haar_orthogonal(&mut SeedRng::new(31), 12);
        let d = svd(&q).unwrap();
        for s in &d.singular_values {
            assert!((s - 1.0).abs() < 1e-10);
        }
        check_invariants(&q, &d);
    }

    #[test]
    fn random_rectangular_both_orientations() {
        let mut rng = SeedRng::new(32);
        for (m, n) in [(4, 3), (3, 4), (20, 7), (7, 20), (1, 5), (5, 1)] {
            let a = sample_gaussian_matrix(&mut rng, m, n, 1.0);
            let d = svd(&a).unwrap();
            check_invariants(&a, &d);
        }
    }

    #[test]
    fn rank_deficient_and_zero() {
        let z = Matrix::zeros(4, 3);
        let d = svd(&z).unwrap();
        assert!(d.singular_values.iter().all(|&s| s == 0.0));
        check_invariants(&z, &d);

        // rank-one 5x4
        let a = Matrix::from_fn(5, 4, |i, j| (i as f64 + 1.0) * (j as f64 - 1.5));
        let d = svd(&a).unwrap();
        assert!(d.singular_values[1] <= 1e-10 * d.singular_values[0]);
        check_invariants(&a, &d);
    }

    #[test]
    fn deterministic() {
        let a = sample_gaussian_matrix(&mut SeedRng::new(33), 9, 6, 1.0);
        let d1 = svd(&a).unwrap();
        let d2 = svd(&a).unwrap();
        assert_eq!(d1.singular_values, d2.singular_values);
        assert_eq!(d1.u, d2.u);
        assert_eq!(d1.v, d2.v);
    }

    #[test]
    fn nilpotent_two_by_two() {
        let a = Matrix::from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]);
        let d = svd(&a).unwrap();
        assert!((d.singular_values[0] - 2.0).abs() < 1e-12);
        assert!(d.singular_values[1].abs() < 1e-12);
        check_invariants(&a, &d);
    }
}
