//! Expressivity geometry: propagation of squared lengths and correlations
//! through depth, the length fixed point q*, the curvature recursion, and
//! discrete measurement of curves pushed through finite networks.
//!
//! One layer maps the pre-activation length state through
//!
//!   q ↦ (r·s²/N_l)·E_z[φ(√q·z)²] + σ_b²,
//!
//! and the pair state through the matching bivariate expectation. With the
//! substitution r·s²/N_l ↦ σ_w² this is exactly the classic Gaussian-init
//! length recursion, which the tests implement independently as an oracle.
//! The curvature recursion runs at the fixed point q*:
//!
//!   g ↦ χ₁·g,   κ² ↦ 3χ₂/χ₁² + κ²/χ₁,
//!   χ₁ = (s²r/(N_l·N_{l−1}))·E[φ′(√q*·z)²],
//!   χ₂ = (s²r/(N_l·N_{l−1}))·E[φ″(√q*·z)²].
//!
//! The two prefactor conventions (per-fan-out for lengths, per-product for
//! curvature) are kept verbatim and exposed through [`LengthLayerParams`]
//! rather than silently reconciled.

use crate::kernels::ActivationMoments;
use crate::linalg::{dot, norm2, Matrix};
use crate::network::{forward, Mlp};
use crate::quadrature::QuadratureError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("fixed point iteration did not converge in {iterations} iterations (last iterate {last})")]
    FixedPointNoConvergence { last: f64, iterations: usize },
    #[error("degenerate metric: χ₁ = {chi1} is not positive")]
    DegenerateMetric { chi1: f64 },
    #[error("activation '{0}' has no pointwise second derivative; curvature recursion refused")]
    CurvatureUnsupported(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Squared lengths and cross moment of a pair of pre-activation vectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LengthState {
    pub q11: f64,
    pub q22: f64,
    pub q12: f64,
}

impl LengthState {
    pub fn new(q11: f64, q22: f64, q12: f64) -> Self {
        let s = LengthState { q11, q22, q12 };
        s.assert_valid();
        s
    }

    pub fn assert_valid(&self) {
        assert!(self.q11 >= 0.0 && self.q22 >= 0.0, "lengths must be ≥ 0");
        let c = self.correlation();
        assert!(c.abs() <= 1.0 + 1e-9, "correlation {c} out of range");
    }

    /// c₁₂ = q₁₂/√(q₁₁q₂₂); 0 when either length vanishes.
    pub fn correlation(&self) -> f64 {
        let d = (self.q11 * self.q22).sqrt();
        if d == 0.0 {
            0.0
        } else {
            self.q12 / d
        }
    }
}

/// Layer data for the length/curvature recursions. `sigma_b` defaults to 0
/// for the constrained-spectrum form; setting r·s²/n_out = σ_w² and a
/// nonzero σ_b expresses the Gaussian-baseline recursion.
#[derive(Clone, Copy, Debug)]
pub struct LengthLayerParams {
    /// Fan-in N_{l−1}.
    pub n_in: usize,
    /// Fan-out N_l.
    pub n_out: usize,
    pub r: f64,
    pub s: f64,
    pub sigma_b: f64,
}

impl LengthLayerParams {
    /// r·s²/N_l (length recursion).
    pub fn length_coefficient(&self) -> f64 {
        self.r * self.s * self.s / self.n_out as f64
    }

    /// r·s²/(N_l·N_{l−1}) (curvature recursion).
    pub fn curvature_coefficient(&self) -> f64 {
        self.r * self.s * self.s / (self.n_in as f64 * self.n_out as f64)
    }

    /// Layer expressed directly through the Gaussian-baseline coefficient
    /// σ_w² (so r·s²/N_l = σ_w²).
    pub fn gaussian_baseline(sigma_w: f64, sigma_b: f64) -> Self {
        LengthLayerParams {
            n_in: 1,
            n_out: 1,
            r: 1.0,
            s: sigma_w,
            sigma_b,
        }
    }
}

/// One layer of the length/correlation recursion.
pub fn propagate_length(
    state: &LengthState,
    layer: &LengthLayerParams,
    moments: &ActivationMoments,
) -> Result<LengthState, GeometryError> {
    state.assert_valid();
    let coef = layer.length_coefficient();
    let bias = layer.sigma_b * layer.sigma_b;
    let q11 = coef * moments.e_phi_sq(state.q11)? + bias;
    let q22 = coef * moments.e_phi_sq(state.q22)? + bias;
    let q12 = coef * moments.e_phi_phi(state.q11, state.q22, state.q12)? + bias;
    Ok(LengthState { q11, q22, q12 })
}

/// Fixed point of the length map Φ(q) = coef·E[φ(√q·z)²] + σ_b².
#[derive(Clone, Copy, Debug)]
pub struct FixedPoint {
    pub q_star: f64,
    pub iterations: usize,
    /// Numerical Φ′(q*).
    pub derivative: f64,
    /// Set when |Φ′(q*)| is within 1e-6 of 1 (every point is near-fixed; the
    /// returned value is the initial guess's basin representative).
    pub marginal: bool,
}

pub const FIXED_POINT_MAX_ITERATIONS: usize = 10_000;

/// Damped fixed-point iteration q ← (1−β)q + β·Φ(q) with β = 1/2 from
/// q₀ = 1, stopping at |q − Φ(q)| ≤ tol.
pub fn fixed_point_q(
    layer: &LengthLayerParams,
    moments: &ActivationMoments,
    tol: f64,
) -> Result<FixedPoint, GeometryError> {
    let phi = |q: f64| -> Result<f64, GeometryError> {
        Ok(layer.length_coefficient() * moments.e_phi_sq(q)? + layer.sigma_b * layer.sigma_b)
    };
    let mut q = 1.0f64;
    let beta = 0.5;
    let mut iterations = 0;
    loop {
        let image = phi(q)?;
        if (q - image).abs() <= tol {
            let h = (q.abs() * 1e-5).max(1e-7);
            let up = phi(q + h)?;
            let down = phi((q - h).max(0.0))?;
            let derivative = (up - down) / (h + h.min(q));
            return Ok(FixedPoint {
                q_star: q,
                iterations,
                derivative,
                marginal: (derivative.abs() - 1.0).abs() < 1e-6,
            });
        }
        q = (1.0 - beta) * q + beta * image;
        iterations += 1;
        if iterations >= FIXED_POINT_MAX_ITERATIONS {
            return Err(GeometryError::FixedPointNoConvergence {
                last: q,
                iterations,
            });
        }
    }
}

/// Metric element, squared curvature and the fixed point they live at.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveGeometry {
    pub g: f64,
    pub kappa_sq: f64,
    pub q_star: f64,
}

/// One layer of the curvature recursion (χ factors evaluated at q*).
pub fn propagate_curvature(
    geo: &CurveGeometry,
    layer: &LengthLayerParams,
    moments: &ActivationMoments,
) -> Result<CurveGeometry, GeometryError> {
    assert!(geo.g > 0.0 && geo.kappa_sq >= 0.0);
    let act = moments.activation();
    if !act.supports_curvature() {
        return Err(GeometryError::CurvatureUnsupported(act.name().to_string()));
    }
    let coef = layer.curvature_coefficient();
    let chi1 = coef * moments.e_dphi_sq(geo.q_star)?;
    let chi2 = coef * moments.e_ddphi_sq(geo.q_star)?;
    if chi1 <= 0.0 {
        return Err(GeometryError::DegenerateMetric { chi1 });
    }
    Ok(CurveGeometry {
        g: chi1 * geo.g,
        kappa_sq: 3.0 * chi2 / (chi1 * chi1) + geo.kappa_sq / chi1,
        q_star: geo.q_star,
    })
}

/// A polyline in R^d (rows are points), optionally closed.
#[derive(Clone, Debug)]
pub struct DiscreteCurve {
    pub points: Matrix,
    pub closed: bool,
}

impl DiscreteCurve {
    /// Curvature estimation needs a reasonable sampling density; 16 points
    /// is the floor.
    pub fn new(points: Matrix, closed: bool) -> Self {
        assert!(
            points.rows() >= 16,
            "curve needs ≥ 16 points, got {}",
            points.rows()
        );
        DiscreteCurve { points, closed }
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }
}

/// A planar circle of the given radius embedded in R^dim, spanned by the
/// first two coordinate axes.
pub fn circle_curve(n_points: usize, radius: f64, dim: usize) -> DiscreteCurve {
    assert!(dim >= 2);
    let mut m = Matrix::zeros(n_points, dim);
    for i in 0..n_points {
        let t = 2.0 * std::f64::consts::PI * i as f64 / n_points as f64;
        m.set(i, 0, radius * t.cos());
        m.set(i, 1, radius * t.sin());
    }
    DiscreteCurve::new(m, true)
}

/// Total polygonal length and per-point curvature estimates.
///
/// Curvature at a point is the inverse circumradius of it and its two
/// neighbors (κ = 2‖u×v‖/(‖u‖‖v‖‖u+v‖)); collinear triples give 0, not an
/// error. Open curves report interior points only.
pub struct CurveMeasurement {
    pub length: f64,
    pub curvatures: Vec<f64>,
}

pub fn measure_curve(curve: &DiscreteCurve) -> CurveMeasurement {
    let n = curve.len();
    let p = &curve.points;
    let seg = |i: usize, j: usize| -> Vec<f64> {
        p.row(j).iter().zip(p.row(i)).map(|(a, b)| a - b).collect()
    };
    let mut length = 0.0;
    let last = if curve.closed { n } else { n - 1 };
    for i in 0..last {
        length += norm2(&seg(i, (i + 1) % n));
    }

    let mut curvatures = Vec::new();
    let idx: Vec<usize> = if curve.closed {
        (0..n).collect()
    } else {
        (1..n - 1).collect()
    };
    for &i in &idx {
        let prev = (i + n - 1) % n;
        let next = (i + 1) % n;
        let u = seg(prev, i);
        let v = seg(i, next);
        let w = seg(prev, next);
        let (a, b, c) = (norm2(&u), norm2(&v), norm2(&w));
        if a == 0.0 || b == 0.0 || c == 0.0 {
            curvatures.push(0.0);
            continue;
        }
        // ‖u×v‖ in any ambient dimension; the subtraction cancels to
        // rounding noise for collinear triples, which must report 0
        let uu = dot(&u, &u);
        let vv = dot(&v, &v);
        let uv = dot(&u, &v);
        let cross_sq = uu * vv - uv * uv;
        // the cancellation noise floor of the subtraction is ~ε·uu·vv, so
        // angles below ~1e-7 rad are indistinguishable from straight
        if cross_sq <= 1e-14 * uu * vv {
            curvatures.push(0.0);
        } else {
            curvatures.push(2.0 * cross_sq.sqrt() / (a * b * c));
        }
    }
    CurveMeasurement { length, curvatures }
}

/// Push a curve through every layer of a finite network; the l-th returned
/// curve is the image in pre-activation space after layer l.
pub fn propagate_curve(net: &Mlp, curve: &DiscreteCurve) -> Result<Vec<DiscreteCurve>, GeometryError> {
    if curve.dim() != net.input_dim() {
        return Err(GeometryError::ShapeMismatch(format!(
            "curve lives in R^{} but the network expects R^{}",
            curve.dim(),
            net.input_dim()
        )));
    }
    let (_, trace) = forward(net, &curve.points);
    Ok(trace
        .pre_activations
        .into_iter()
        .map(|m| DiscreteCurve {
            points: m,
            closed: curve.closed,
        })
        .collect())
}
