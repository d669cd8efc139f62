//! Weight sampling under stable-rank and spectral-norm constraints.
//!
//! A weight matrix with prescribed stable rank r_t and spectral norm s_t is
//! assembled as W = U·Σ·Vᵀ with U, V Haar-orthogonal and Σ a diagonal
//! spectrum drawn from the constraint set
//!
//!   { d ∈ R₊^m : max dᵢ = s_t, Σdᵢ²/s_t² = r_t }.
//!
//! Two interchangeable spectrum samplers are registered by name:
//!
//! * `sphere` — rejection sampling that normalizes half-normal draws onto
//!   the sphere of radius s_t·√(r_t−1) and accepts when the point also lies
//!   in the cube [0, s_t]^{m−1}; accepted samples are uniform w.r.t. surface
//!   measure on that intersection.
//! * `cube` — draws uniformly in the cube and rescales onto the sphere,
//!   accepting when the rescale factor is ≤ 1. Hits the same constraint set
//!   but not with uniform surface measure.
//!
//! The module also provides the acceptance-probability lower bound for the
//! sphere sampler and the spectrum-renormalizing projection used by
//! constrained training.

mod project;

pub use project::{project_stable_rank, project_stable_rank_cached, ProjectionCache};
pub(crate) use project::warm_top_singular_tol;

use crate::linalg::{sample_haar_frame, Matrix};
use crate::rng::SeedRng;
use crate::special::normal_tail;
use thiserror::Error;

/// Rejection attempts allowed before the sampler gives up. Acceptance decays
/// rapidly as r_t approaches min(N_l, N_{l−1}), and failing loudly beats
/// spinning forever.
pub const DEFAULT_REJECTION_BUDGET: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid spectrum spec: {0}")]
    InvalidSpec(String),
    #[error(
        "rejection budget exhausted after {attempts} attempts \
         (stable-rank target too close to the min dimension?)"
    )]
    BudgetExhausted { attempts: u64 },
    #[error("projection infeasible: matrix rank {rank} is below ⌈r_t⌉ = {needed}")]
    InfeasibleProjection { rank: usize, needed: usize },
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}

/// Target stable rank and spectral norm for one layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumSpec {
    pub stable_rank_target: f64,
    pub spectral_norm_target: f64,
}

impl SpectrumSpec {
    pub fn new(stable_rank_target: f64, spectral_norm_target: f64) -> Self {
        SpectrumSpec {
            stable_rank_target,
            spectral_norm_target,
        }
    }

    /// Validity for a layer whose min dimension is `m`: 1 ≤ r_t ≤ m, s_t > 0.
    pub fn validate(&self, m: usize) -> Result<(), SamplerError> {
        let r = self.stable_rank_target;
        let s = self.spectral_norm_target;
        if !(s > 0.0) || !s.is_finite() {
            return Err(SamplerError::InvalidSpec(format!(
                "spectral norm target must be positive and finite, got {s}"
            )));
        }
        if !r.is_finite() || r < 1.0 || r > m as f64 {
            return Err(SamplerError::InvalidSpec(format!(
                "stable rank target {r} outside [1, {m}]"
            )));
        }
        Ok(())
    }
}

/// One accepted spectrum draw.
#[derive(Clone, Debug)]
pub struct SpectrumDraw {
    /// Diagonal values, length min(n_out, n_in); `values[0]` equals the
    /// spectral norm target exactly and is the maximum.
    pub values: Vec<f64>,
    /// Rejection rounds consumed, including the accepting one.
    pub attempts: u64,
}

/// A spectrum-sampling strategy. Implementations draw the diagonal of Σ for
/// the layer shape (n_out, n_in).
pub trait SpectrumSampler: Sync + Send {
    fn name(&self) -> &'static str;

    fn sample_spectrum(
        &self,
        rng: &mut SeedRng,
        spec: &SpectrumSpec,
        n_out: usize,
        n_in: usize,
        budget: u64,
    ) -> Result<SpectrumDraw, SamplerError>;
}

/// Rejection sampler: uniform on sphere ∩ cube in spectral space.
pub struct SphereSampler;

impl SpectrumSampler for SphereSampler {
    fn name(&self) -> &'static str {
        "sphere"
    }

    fn sample_spectrum(
        &self,
        rng: &mut SeedRng,
        spec: &SpectrumSpec,
        n_out: usize,
        n_in: usize,
        budget: u64,
    ) -> Result<SpectrumDraw, SamplerError> {
        let m = n_out.min(n_in);
        spec.validate(m)?;
        let s_t = spec.spectral_norm_target;
        let r_t = spec.stable_rank_target;
        if let Some(draw) = degenerate_draw(r_t, s_t, m) {
            return Ok(draw);
        }

        let mut tail = vec![0.0f64; m - 1];
        for attempts in 1..=budget {
            let mut sum_sq = 0.0;
            for v in tail.iter_mut() {
                *v = rng.normal().abs();
                sum_sq += *v * *v;
            }
            if sum_sq == 0.0 {
                continue;
            }
            let scale = (r_t - 1.0).sqrt() / sum_sq.sqrt();
            let mut max_tail = 0.0f64;
            for v in tail.iter_mut() {
                *v *= scale;
                max_tail = max_tail.max(*v);
            }
            // s₁ = 1 must remain the maximum.
            if 1.0 >= max_tail {
                let mut values = Vec::with_capacity(m);
                values.push(s_t);
                values.extend(tail.iter().map(|v| s_t * v));
                return Ok(SpectrumDraw { values, attempts });
            }
        }
        Err(SamplerError::BudgetExhausted { attempts: budget })
    }
}

/// Cube sampler: uniform in [0,1]^{m−1}, rescaled onto the sphere, accepted
/// when the rescale factor is ≤ 1.
pub struct CubeSampler;

impl SpectrumSampler for CubeSampler {
    fn name(&self) -> &'static str {
        "cube"
    }

    fn sample_spectrum(
        &self,
        rng: &mut SeedRng,
        spec: &SpectrumSpec,
        n_out: usize,
        n_in: usize,
        budget: u64,
    ) -> Result<SpectrumDraw, SamplerError> {
        let m = n_out.min(n_in);
        spec.validate(m)?;
        let s_t = spec.spectral_norm_target;
        let r_t = spec.stable_rank_target;
        if let Some(draw) = degenerate_draw(r_t, s_t, m) {
            return Ok(draw);
        }

        let mut tail = vec![0.0f64; m - 1];
        for attempts in 1..=budget {
            let mut sum_sq = 0.0;
            for v in tail.iter_mut() {
                *v = rng.uniform();
                sum_sq += *v * *v;
            }
            if sum_sq == 0.0 {
                continue;
            }
            let scale = (r_t - 1.0).sqrt() / sum_sq.sqrt();
            if scale <= 1.0 {
                let mut values = Vec::with_capacity(m);
                values.push(s_t);
                values.extend(tail.iter().map(|v| s_t * scale * v));
                return Ok(SpectrumDraw { values, attempts });
            }
        }
        Err(SamplerError::BudgetExhausted { attempts: budget })
    }
}

// r_t = 1 makes the tail scaling factor zero and the draw deterministic;
// m = 1 only admits r_t = 1.
fn degenerate_draw(r_t: f64, s_t: f64, m: usize) -> Option<SpectrumDraw> {
    if r_t == 1.0 || m == 1 {
        let mut values = vec![0.0; m];
        values[0] = s_t;
        Some(SpectrumDraw { values, attempts: 1 })
    } else {
        None
    }
}

pub static SPHERE: SphereSampler = SphereSampler;
pub static CUBE: CubeSampler = CubeSampler;

/// All registered spectrum samplers.
pub static REGISTRY: [&'static dyn SpectrumSampler; 2] = [&SPHERE, &CUBE];

/// Resolve a spectrum sampler by its registry name.
pub fn lookup(name: &str) -> Option<&'static dyn SpectrumSampler> {
    REGISTRY.iter().copied().find(|s| s.name() == name)
}

/// Draw a full weight matrix W = U·Σ·Vᵀ with U ~ Haar O(n_out), V ~ Haar
/// O(n_in) and Σ the sampled spectrum embedded as the leading diagonal
/// block. Only the leading min-dimension columns of U and V enter the
/// product, so Haar frames of that width are drawn instead of full square
/// factors.
pub fn assemble_weight(
    rng: &mut SeedRng,
    spec: &SpectrumSpec,
    n_out: usize,
    n_in: usize,
    method: &dyn SpectrumSampler,
) -> Result<Matrix, SamplerError> {
    let draw = method.sample_spectrum(rng, spec, n_out, n_in, DEFAULT_REJECTION_BUDGET)?;
    Ok(assemble_from_spectrum(rng, &draw.values, n_out, n_in))
}

/// U·diag(values)·Vᵀ over fresh Haar factors for a fixed spectrum.
pub fn assemble_from_spectrum(
    rng: &mut SeedRng,
    values: &[f64],
    n_out: usize,
    n_in: usize,
) -> Matrix {
    let m = n_out.min(n_in);
    assert_eq!(values.len(), m);
    let u = sample_haar_frame(rng, n_out, m);
    let v = sample_haar_frame(rng, n_in, m);
    let mut scaled = u;
    for j in 0..m {
        for i in 0..n_out {
            let val = scaled.get(i, j) * values[j];
            scaled.set(i, j, val);
        }
    }
    scaled.matmul_transb(&v)
}

/// Inputs to the sphere sampler's acceptance probability lower bound.
#[derive(Clone, Copy, Debug)]
pub struct AcceptanceBoundInput {
    /// Min dimension, ≥ 2.
    pub m: usize,
    pub r_t: f64,
    /// Free parameter of the bound; must be ≥ √((r_t−1)/(m−1)).
    pub eta: f64,
}

/// Lower bound on the sphere sampler's per-attempt acceptance probability:
///
///   1 − (z·e^{1−z})^{(m−1)/2} − (m−1)·P[|N(0,1)| > 1/η],
///   z = (r_t−1)/(η²(m−1)) ∈ [0, 1].
///
/// The first subtracted term is a chi-squared lower-tail bound on the event
/// Σsᵢ² < (r_t−1)/η²; the second is a union bound over the per-coordinate
/// events |sᵢ| > 1/η. The tail factor is written 1 − 2·erf(1/η) under the
/// convention erf(x) = Φ(x) − ½, which makes it exactly the two-sided
/// normal tail 2·Q(1/η). The bound may be negative (vacuous) and is
/// returned as-is.
pub fn acceptance_lower_bound(inp: &AcceptanceBoundInput) -> Result<f64, SamplerError> {
    if inp.m < 2 {
        return Err(SamplerError::InvalidSpec(format!(
            "bound needs m ≥ 2, got {}",
            inp.m
        )));
    }
    if inp.r_t < 1.0 {
        return Err(SamplerError::InvalidSpec(format!(
            "bound needs r_t ≥ 1, got {}",
            inp.r_t
        )));
    }
    let mf = (inp.m - 1) as f64;
    let threshold = ((inp.r_t - 1.0) / mf).sqrt();
    if !(inp.eta > 0.0) || inp.eta < threshold {
        return Err(SamplerError::InvalidSpec(format!(
            "eta = {} violates eta ≥ √((r_t−1)/(m−1)) = {threshold}",
            inp.eta
        )));
    }
    let z = (inp.r_t - 1.0) / (inp.eta * inp.eta * mf);
    let chi_term = if z == 0.0 {
        0.0
    } else {
        (z * (1.0 - z).exp()).powf(mf / 2.0)
    };
    let tail_term = mf * 2.0 * normal_tail(1.0 / inp.eta);
    Ok(1.0 - chi_term - tail_term)
}

/// Maximize the acceptance bound over an η grid between the precondition
/// threshold and `eta_max`. Returns (best_eta, best_bound).
pub fn best_acceptance_bound(m: usize, r_t: f64, eta_max: f64, grid: usize) -> (f64, f64) {
    let threshold = ((r_t - 1.0) / (m - 1) as f64).sqrt();
    let lo = threshold.max(1e-6);
    let mut best = (lo, f64::NEG_INFINITY);
    for i in 0..=grid {
        let eta = lo + (eta_max - lo) * i as f64 / grid as f64;
        if let Ok(b) = acceptance_lower_bound(&AcceptanceBoundInput { m, r_t, eta }) {
            if b > best.1 {
                best = (eta, b);
            }
        }
    }
    best
}
