//! Spectrum-renormalizing projection onto the stable-rank / spectral-norm
//! constraint set.
//!
//! Given W with singular values σ₁ ≥ σ₂ ≥ …, the projected matrix keeps W's
//! singular vectors, sets the top value to s_t, and rescales the tail by the
//! unique factor giving Σσ′ᵢ² = r_t·s_t². Tail values that the rescale would
//! push above s_t are clipped to s_t and the factor re-solved (at most k
//! rounds). The map is deterministic and idempotent.
//!
//! Small matrices go through the full Jacobi SVD. Large ones (training-time
//! projections of wide layers) extract only the leading singular triples and
//! rescale the untouched remainder implicitly:
//!
//!   W′ = Σ_top σ′ⱼ uⱼvⱼᵀ + λ·(W − Σ_top σⱼ uⱼvⱼᵀ).
//!
//! The remainder shares no singular directions with the extracted triples,
//! so this is the same operator as the SVD route; the tests compare the two
//! paths directly.

use super::{SamplerError, SpectrumSpec};
use crate::linalg::{dot, norm2, svd, Matrix};

const SVD_PATH_MAX_DIM: usize = 200;

/// Warm-start state for repeated projections of a slowly-moving matrix
/// (one SGD step apart). Holds the right singular vectors found last time.
#[derive(Clone, Debug, Default)]
pub struct ProjectionCache {
    right_vectors: Vec<Vec<f64>>,
}

/// Project onto the constraint set {srank = r_t, ‖·‖₂ = s_t}, preserving
/// singular vectors.
pub fn project_stable_rank(w: &Matrix, spec: &SpectrumSpec) -> Result<Matrix, SamplerError> {
    let mut cache = ProjectionCache::default();
    project_stable_rank_cached(w, spec, &mut cache)
}

/// Same map, reusing `cache` to warm-start the iterative spectral solves.
pub fn project_stable_rank_cached(
    w: &Matrix,
    spec: &SpectrumSpec,
    cache: &mut ProjectionCache,
) -> Result<Matrix, SamplerError> {
    let m = w.rows().min(w.cols());
    spec.validate(m)?;
    if w.is_zero() {
        return Err(SamplerError::InfeasibleProjection {
            rank: 0,
            needed: spec.stable_rank_target.ceil() as usize,
        });
    }
    if m <= SVD_PATH_MAX_DIM {
        project_via_svd(w, spec)
    } else {
        project_via_deflation(w, spec, cache)
    }
}

fn project_via_svd(w: &Matrix, spec: &SpectrumSpec) -> Result<Matrix, SamplerError> {
    let d = svd(w)?;
    let new_sigma = renormalize_spectrum(&d.singular_values, spec)?;
    let mut us = d.u;
    for j in 0..new_sigma.len() {
        for i in 0..us.rows() {
            let v = us.get(i, j) * new_sigma[j];
            us.set(i, j, v);
        }
    }
    Ok(us.matmul_transb(&d.v))
}

/// The clipped tail rescale on an explicit non-increasing spectrum.
pub(crate) fn renormalize_spectrum(
    sigma: &[f64],
    spec: &SpectrumSpec,
) -> Result<Vec<f64>, SamplerError> {
    let k = sigma.len();
    let s_t = spec.spectral_norm_target;
    let r_t = spec.stable_rank_target;
    let needed = r_t.ceil() as usize;
    // numerical rank: roundoff-level singular values cannot legitimately
    // carry constraint-set energy
    let rank_tol = sigma.first().copied().unwrap_or(0.0) * 1e-12;
    let sigma: Vec<f64> = sigma
        .iter()
        .map(|&s| if s > rank_tol { s } else { 0.0 })
        .collect();
    let rank = sigma.iter().filter(|&&s| s > 0.0).count();
    if rank < needed.max(1) {
        return Err(SamplerError::InfeasibleProjection { rank, needed });
    }

    let mut out = vec![0.0; k];
    out[0] = s_t;
    let mut target = (r_t - 1.0) * s_t * s_t;
    let mut idx = 1usize;
    while target > 1e-14 * s_t * s_t {
        let pool_energy: f64 = sigma[idx..].iter().map(|s| s * s).sum();
        if pool_energy == 0.0 {
            return Err(SamplerError::InfeasibleProjection { rank, needed });
        }
        let lambda = (target / pool_energy).sqrt();
        if lambda * sigma[idx] <= s_t * (1.0 + 1e-12) {
            for j in idx..k {
                out[j] = lambda * sigma[j];
            }
            return Ok(out);
        }
        out[idx] = s_t;
        target -= s_t * s_t;
        idx += 1;
        if idx == k {
            return Err(SamplerError::InfeasibleProjection { rank, needed });
        }
    }
    Ok(out)
}

fn project_via_deflation(
    w: &Matrix,
    spec: &SpectrumSpec,
    cache: &mut ProjectionCache,
) -> Result<Matrix, SamplerError> {
    let s_t = spec.spectral_norm_target;
    let r_t = spec.stable_rank_target;
    let needed = r_t.ceil() as usize;
    let frob_sq = crate::linalg::dot(w.data(), w.data());

    let mut deflated = w.clone();
    let mut triples: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut extracted_energy = 0.0f64;

    for round in 0..64usize {
        let warm = cache.right_vectors.get(round).map(|v| v.as_slice());
        let (sigma, u, v) = warm_top_singular(&deflated, warm);
        if round >= cache.right_vectors.len() {
            cache.right_vectors.push(v.clone());
        } else {
            cache.right_vectors[round] = v.clone();
        }
        if sigma <= 1e-13 * s_t.max(frob_sq.sqrt()) {
            return Err(SamplerError::InfeasibleProjection {
                rank: triples.len(),
                needed,
            });
        }
        subtract_outer(&mut deflated, sigma, &u, &v);
        triples.push((sigma, u, v));
        extracted_energy += sigma * sigma;
        let remainder_energy = (frob_sq - extracted_energy).max(0.0);

        // Try to close the rescale with the spectrum explored so far. The
        // remainder's top value is bounded by the last extracted σ, which is
        // enough to certify λ·σ_next ≤ s_t when λ·σ_last ≤ s_t.
        let t = triples.len();
        let mut new_vals = vec![s_t];
        let mut target = (r_t - 1.0) * s_t * s_t;
        let mut idx = 1usize;
        let solved = loop {
            if target <= 1e-14 * s_t * s_t {
                for _ in idx..t {
                    new_vals.push(0.0);
                }
                break Some(0.0);
            }
            let pool_energy: f64 = triples[idx..].iter().map(|(s, _, _)| s * s).sum::<f64>()
                + remainder_energy;
            if pool_energy <= 0.0 {
                return Err(SamplerError::InfeasibleProjection {
                    rank: triples.len(),
                    needed,
                });
            }
            let lambda = (target / pool_energy).sqrt();
            let pool_top = if idx < t {
                triples[idx].0
            } else {
                triples[t - 1].0 // upper bound on the remainder's top
            };
            if lambda * pool_top <= s_t * (1.0 + 1e-12) {
                for (s, _, _) in &triples[idx..] {
                    new_vals.push(lambda * s);
                }
                break Some(lambda);
            }
            if idx >= t {
                break None; // clip frontier beyond the explored prefix
            }
            new_vals.push(s_t);
            target -= s_t * s_t;
            idx += 1;
        };

        if let Some(lambda) = solved {
            let mut out = deflated.scaled(lambda);
            for ((_, u, v), nv) in triples.iter().zip(&new_vals) {
                add_outer(&mut out, *nv, u, v);
            }
            return Ok(out);
        }
    }
    Err(SamplerError::Linalg(
        crate::linalg::LinalgError::NonConvergence {
            algorithm: "projection deflation",
            iterations: 64,
        },
    ))
}

fn subtract_outer(m: &mut Matrix, c: f64, u: &[f64], v: &[f64]) {
    let cols = m.cols();
    for i in 0..m.rows() {
        let ci = c * u[i];
        let row = m.row_mut(i);
        for j in 0..cols {
            row[j] -= ci * v[j];
        }
    }
}

fn add_outer(m: &mut Matrix, c: f64, u: &[f64], v: &[f64]) {
    let cols = m.cols();
    for i in 0..m.rows() {
        let ci = c * u[i];
        let row = m.row_mut(i);
        for j in 0..cols {
            row[j] += ci * v[j];
        }
    }
}

/// Top singular triple (σ, u, v) by power iteration on the Gram operator,
/// optionally warm-started from a previous right vector, iterated to the
/// projection-grade eigen-residual.
pub(crate) fn warm_top_singular(a: &Matrix, warm: Option<&[f64]>) -> (f64, Vec<f64>, Vec<f64>) {
    warm_top_singular_tol(a, warm, 3e-11)
}

/// As [`warm_top_singular`] with an explicit relative eigen-residual target
/// (history bookkeeping can afford a looser one than the projection).
pub(crate) fn warm_top_singular_tol(
    a: &Matrix,
    warm: Option<&[f64]>,
    tol: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let n = a.cols();
    let mut v: Vec<f64> = match warm {
        Some(w) if w.len() == n && norm2(w) > 0.0 => w.to_vec(),
        _ => {
            let mut state = 0x51a5_c0de_u64;
            (0..n)
                .map(|_| {
                    state = state
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
                })
                .collect()
        }
    };
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    // Iterate v ← AᵀA·v. The Rayleigh value converges twice as fast as the
    // vector, so stopping must watch the eigen-residual ‖AᵀAv − ρv‖, which
    // certifies the vector itself (the downstream rank-one corrections need
    // accurate directions, not just an accurate value).
    for _ in 0..200_000 {
        let av = a.matvec(&v);
        if norm2(&av) == 0.0 {
            return (0.0, vec![0.0; a.rows()], v);
        }
        let atav = a.matvec_t(&av);
        let rho = dot(&atav, &v);
        let resid_sq: f64 = atav
            .iter()
            .zip(&v)
            .map(|(w, x)| (w - rho * x) * (w - rho * x))
            .sum();
        let nrm = norm2(&atav);
        v = atav.iter().map(|x| x / nrm).collect();
        if resid_sq.sqrt() <= tol * rho.abs().max(1e-300) {
            break;
        }
    }
    let av = a.matvec(&v);
    let s = norm2(&av);
    let u: Vec<f64> = if s > 0.0 {
        av.iter().map(|x| x / s).collect()
    } else {
        vec![0.0; a.rows()]
    };
    (s, u, v)
}
