//! Random matrix generators: i.i.d. Gaussian matrices, Haar-orthogonal
//! matrices and frames, uniform sphere points.

use super::{norm2, qr_thin, Matrix, QrThin};
use crate::rng::SeedRng;

/// Matrix with i.i.d. N(0, std²) entries.
pub fn sample_gaussian_matrix(rng: &mut SeedRng, rows: usize, cols: usize, std: f64) -> Matrix {
    assert!(std > 0.0, "std must be positive");
    let mut m = Matrix::zeros(rows, cols);
    rng.fill_normal(m.data_mut(), std);
    m
}

/// Haar-uniform orthogonal matrix on O(n).
///
/// QR of an i.i.d. Gaussian matrix, with the sign correction
/// Q ← Q·diag(sign(diag R)). Without the correction the factorization's
/// sign convention biases the distribution away from Haar (Stewart 1980,
/// Mezzadri 2007).
pub fn sample_haar_orthogonal(rng: &mut SeedRng, n: usize) -> Matrix {
    sample_haar_frame(rng, n, n)
}

/// First `k` columns of a Haar-orthogonal matrix on O(n), i.e. a uniform
/// point on the Stiefel manifold V_k(Rⁿ). Costs O(n·k²) instead of O(n³).
pub fn sample_haar_frame(rng: &mut SeedRng, n: usize, k: usize) -> Matrix {
    assert!(n >= 1 && k >= 1 && k <= n);
    let g = sample_gaussian_matrix(rng, n, k, 1.0);
    let QrThin { mut q, r } = qr_thin(&g);
    for j in 0..k {
        if r.get(j, j) < 0.0 {
            for i in 0..n {
                let v = q.get(i, j);
                q.set(i, j, -v);
            }
        }
    }
    q
}

/// Uniform point on the sphere of the given radius in Rⁿ.
pub fn sample_unit_sphere(rng: &mut SeedRng, n: usize, radius: f64) -> Vec<f64> {
    loop {
        let mut v = vec![0.0; n];
        rng.fill_normal(&mut v, 1.0);
        let norm = norm2(&v);
        if norm > 1e-200 {
            let c = radius / norm;
            for x in &mut v {
                *x *= c;
            }
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    #[test]
    fn gaussian_moments_large_sample() {
        let mut rng = SeedRng::new(101);
        let m = sample_gaussian_matrix(&mut rng, 1000, 1000, 1.0);
        let n = m.data().len() as f64;
        let mean = m.data().iter().sum::<f64>() / n;
        let var = m.data().iter().map(|v| v * v).sum::<f64>() / n - mean * mean;
        assert!(mean.abs() < 4e-3, "mean = {mean}");
        assert!((var - 1.0).abs() < 0.01, "var = {var}");
    }

    #[test]
    fn gaussian_deterministic_given_seed() {
        let a = sample_gaussian_matrix(&mut SeedRng::new(5), 6, 7, 0.3);
        let b = sample_gaussian_matrix(&mut SeedRng::new(5), 6, 7, 0.3);
        assert_eq!(a, b);
    }

    #[test]
    #[should_panic(expected = "std must be positive")]
    fn gaussian_rejects_zero_std() {
        sample_gaussian_matrix(&mut SeedRng::new(1), 2, 2, 0.0);
    }

    #[test]
    fn haar_is_orthogonal() {
        let mut rng = SeedRng::new(20);
        for n in [1, 2, 5, 40] {
            let q = sample_haar_orthogonal(&mut rng, n);
            let qtq = q.transpose().matmul(&q);
            assert!(
                qtq.sub(&Matrix::identity(n)).max_abs() <= 1e-10,
                "QᵀQ deviation at n={n}"
            );
        }
    }

    #[test]
    fn haar_dimension_one_is_symmetric_sign() {
        let mut rng = SeedRng::new(21);
        let mut plus = 0usize;
        let draws = 4000;
        for _ in 0..draws {
            let q = sample_haar_orthogonal(&mut rng, 1);
            let v = q.get(0, 0);
            assert!((v.abs() - 1.0).abs() < 1e-14);
            if v > 0.0 {
                plus += 1;
            }
        }
        // 4 sigma band around p = 1/2
        let se = 0.5 / (draws as f64).sqrt();
        assert!((plus as f64 / draws as f64 - 0.5).abs() < 4.0 * se);
    }

    #[test]
    fn haar_entry_second_moment() {
        // E[Q₁₁²] = 1/n for Haar O(n).
        let mut rng = SeedRng::new(22);
        let n = 50;
        let draws = 10_000;
        let samples: Vec<f64> = (0..draws)
            .map(|_| {
                let q = sample_haar_orthogonal(&mut rng, n);
                q.get(0, 0) * q.get(0, 0)
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / draws as f64;
        let se = (var / draws as f64).sqrt();
        assert!(
            (mean - 1.0 / n as f64).abs() <= 3.0 * se,
            "E[Q11^2] = {mean}, expected {} ± {}",
            1.0 / n as f64,
            3.0 * se
        );
    }

    #[test]
    fn haar_mixed_fourth_moment() {
        // Same-row different-column fourth moment: E[Q₁₁²Q₁₂²] = 1/(n(n+2)).
        let mut rng = SeedRng::new(23);
        let n = 3;
        let draws = 10_000;
        let samples: Vec<f64> = (0..draws)
            .map(|_| {
                let q = sample_haar_orthogonal(&mut rng, n);
                let a = q.get(0, 0);
                let b = q.get(0, 1);
                a * a * b * b
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / draws as f64;
        let se = (var / draws as f64).sqrt();
        let expected = 1.0 / (n as f64 * (n as f64 + 2.0)); // = 1/15
        assert!(
            (mean - expected).abs() <= 3.0 * se,
            "E[Q11^2 Q12^2] = {mean}, expected {expected} ± {}",
            3.0 * se
        );
    }

    #[test]
    fn haar_left_invariance_first_two_moments() {
        // For fixed orthogonal P, entries of P·Q match the distribution of Q
        // (rotation invariance); compare first two moments of an entry.
        let n = 8;
        let p = sample_haar_orthogonal(&mut SeedRng::new(999), n);
        let draws = 20_000;
        let mut q_m1 = 0.0;
        let mut q_m2 = 0.0;
        let mut pq_m1 = 0.0;
        let mut pq_m2 = 0.0;
        let mut rng = SeedRng::new(24);
        for _ in 0..draws {
            let q = sample_haar_orthogonal(&mut rng, n);
            let e = q.get(1, 2);
            q_m1 += e;
            q_m2 += e * e;
            let pq = p.matmul(&q);
            let e2 = pq.get(1, 2);
            pq_m1 += e2;
            pq_m2 += e2 * e2;
        }
        let d = draws as f64;
        // Var of a single entry is ~1/n; SE of the mean estimate follows.
        let se1 = (1.0 / n as f64 / d).sqrt();
        // Second moment has variance ≈ 2/n² for these nearly-Gaussian entries.
        let se2 = (2.0 / (n as f64 * n as f64) / d).sqrt();
        assert!((q_m1 / d - pq_m1 / d).abs() < 3.0 * se1 * 1.5);
        assert!((q_m2 / d - pq_m2 / d).abs() < 3.0 * se2 * 1.5);
    }

    #[test]
    fn frame_matches_gram_of_full_columns() {
        let mut rng = SeedRng::new(25);
        let f = sample_haar_frame(&mut rng, 30, 4);
        let ftf = f.transpose().matmul(&f);
        assert!(ftf.sub(&Matrix::identity(4)).max_abs() < 1e-12);
    }

    #[test]
    fn sphere_sample_has_given_radius() {
        let mut rng = SeedRng::new(26);
        let v = sample_unit_sphere(&mut rng, 17, 2.5);
        assert!((dot(&v, &v).sqrt() - 2.5).abs() < 1e-12);
    }
}
