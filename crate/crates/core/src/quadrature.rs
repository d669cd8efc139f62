//! Quadrature for expectations under Gaussian measure.
//!
//! Bivariate expectations whiten through
//!
//!   z₁ = √q₁₁·u₁,  z₂ = √q₂₂·(c·u₁ + √(1−c²)·u₂),  c = q₁₂/√(q₁₁q₂₂),
//!
//! and tensorize a 1-D rule over (u₁, u₂). The 1-D rule integrates
//! f(z)·N(0,1)(z) over [−12, 12] with composite 8-point Gauss–Legendre
//! panels. Two refinements keep the error at machine precision for every
//! activation in scope:
//!
//! * the panel count grows like √q with the variance, so saturating
//!   activations squeezed hard against their transition (the poles of tanh
//!   sit at π/(2√q) off the real axis) stay resolved;
//! * panel boundaries are aligned to the activation's kink positions, so
//!   piecewise members (relu, hardtanh) integrate piecewise-smoothly.
//!
//! A plain Hermite rule needs order in the many hundreds to reach 1e-8 for
//! tanh at q ≈ 4 and degrades further with q; this scheme holds ~1e-12 at
//! the default order across the experiment range, and doubling the order is
//! a no-op well below the 1e-8 contract.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error(
        "covariance [[{q11}, {q12}], [{q12}, {q22}]] is not positive semi-definite \
         (min eigenvalue {eigmin})"
    )]
    NotPsd {
        q11: f64,
        q22: f64,
        q12: f64,
        eigmin: f64,
    },
    #[error("negative variance {0}")]
    NegativeVariance(f64),
}

/// Integration half-width in standard deviations; the discarded Gaussian
/// tail mass is ~3.6e-33.
const HALF_WIDTH: f64 = 12.0;

// 8-point Gauss–Legendre rule on [−1, 1].
const GL_NODES: [f64; 4] = [
    0.1834346424956498,
    0.5255324099163290,
    0.7966664774136267,
    0.9602898564975363,
];
const GL_WEIGHTS: [f64; 4] = [
    0.3626837833783620,
    0.3137066458778873,
    0.2223810344533745,
    0.1012285362903763,
];

#[inline]
fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// A quadrature rule for N(0,1) expectations. `order` is the base panel
/// count over the truncated axis.
#[derive(Clone, Debug)]
pub struct GaussQuadrature {
    order: usize,
}

impl GaussQuadrature {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be at least 1");
        GaussQuadrature { order }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// ∫ f(z)·pdf(z) dz over the segment partition induced by `breaks`
    /// (sorted, inside the truncated domain), with `panels` total panels
    /// distributed proportionally to segment length.
    fn integrate(&self, breaks: &[f64], panels: usize, f: &mut dyn FnMut(f64) -> f64) -> f64 {
        let mut bounds = Vec::with_capacity(breaks.len() + 2);
        bounds.push(-HALF_WIDTH);
        for &b in breaks {
            if b > -HALF_WIDTH && b < HALF_WIDTH {
                bounds.push(b);
            }
        }
        bounds.push(HALF_WIDTH);
        let per_unit = panels as f64 / (2.0 * HALF_WIDTH);
        let mut total = 0.0;
        for pair in bounds.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b <= a {
                continue;
            }
            let n = ((b - a) * per_unit).ceil().max(1.0) as usize;
            let h = (b - a) / n as f64;
            for p in 0..n {
                let mid = a + (p as f64 + 0.5) * h;
                let half = 0.5 * h;
                for i in 0..4 {
                    let zp = mid + half * GL_NODES[i];
                    let zm = mid - half * GL_NODES[i];
                    total += GL_WEIGHTS[i]
                        * half
                        * (f(zp) * normal_pdf(zp) + f(zm) * normal_pdf(zm));
                }
            }
        }
        total
    }

    /// Panel budget for an effective variance: grows like √q so transition
    /// regions of squashed activations stay resolved. The floor keeps even
    /// the minimum admissible order accurate for plain moments.
    fn panels_for(&self, q: f64) -> usize {
        let mult = (q.max(1.0).sqrt() / 2.0).ceil().max(1.0) as usize;
        (self.order * mult).max(24)
    }

    /// E[f(Z)], Z ~ N(0,1).
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.integrate(&[], self.order.max(24), &mut f)
    }

    /// E[h(√q·Z)], Z ~ N(0,1); `kinks` are the positions in the argument of
    /// `h` where it loses smoothness.
    pub fn scaled_expectation_with_kinks(
        &self,
        q: f64,
        kinks: &[f64],
        h: impl Fn(f64) -> f64,
    ) -> Result<f64, QuadratureError> {
        if q < -1e-12 {
            return Err(QuadratureError::NegativeVariance(q));
        }
        let s = q.max(0.0).sqrt();
        if s == 0.0 {
            return Ok(h(0.0));
        }
        let mut breaks: Vec<f64> = kinks.iter().map(|k| k / s).collect();
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut f = |z: f64| h(s * z);
        Ok(self.integrate(&breaks, self.panels_for(q), &mut f))
    }

    /// E[h(√q·Z)] for smooth h.
    pub fn scaled_expectation(
        &self,
        q: f64,
        h: impl Fn(f64) -> f64,
    ) -> Result<f64, QuadratureError> {
        self.scaled_expectation_with_kinks(q, &[], h)
    }

    /// E[g(z₁)·g(z₂)] for a centered bivariate Gaussian with covariance
    /// [[q11, q12], [q12, q22]].
    ///
    /// Mildly indefinite covariances (rounding debris from kernel
    /// recursions, min eigenvalue down to −1e-6 of the scale) are repaired
    /// by clamping the correlation; anything worse is an error.
    pub fn pair_expectation_with_kinks(
        &self,
        q11: f64,
        q22: f64,
        q12: f64,
        kinks: &[f64],
        g: impl Fn(f64) -> f64,
    ) -> Result<f64, QuadratureError> {
        let scale = q11.abs().max(q22.abs()).max(q12.abs()).max(1e-300);
        let eigmin = {
            let tr = q11 + q22;
            let disc = ((q11 - q22) * (q11 - q22) + 4.0 * q12 * q12).sqrt();
            0.5 * (tr - disc)
        };
        if eigmin < -1e-6 * scale {
            return Err(QuadratureError::NotPsd {
                q11,
                q22,
                q12,
                eigmin,
            });
        }
        if q11 < -1e-6 * scale || q22 < -1e-6 * scale {
            return Err(QuadratureError::NegativeVariance(q11.min(q22)));
        }
        let s1 = q11.max(0.0).sqrt();
        let s2 = q22.max(0.0).sqrt();
        let denom = s1 * s2;
        let c = if denom > 0.0 {
            (q12 / denom).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        let root = (1.0 - c * c).max(0.0).sqrt();
        let panels = self.panels_for(q11.max(q22));

        if s1 == 0.0 {
            let g0 = g(0.0);
            return Ok(g0 * self.scaled_expectation_with_kinks(q22, kinks, &g)?);
        }

        // outer variable u₁: kinks of g(s1·u₁)
        let mut outer_breaks: Vec<f64> = kinks.iter().map(|k| k / s1).collect();
        outer_breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let mut outer = |u1: f64| -> f64 {
            let g1 = g(s1 * u1);
            if g1 == 0.0 {
                return 0.0;
            }
            if root == 0.0 || s2 == 0.0 {
                // perfectly correlated or degenerate second coordinate
                return g1 * g(s2 * c * u1);
            }
            // inner variable u₂: z₂ = s2·(c·u1 + root·u₂); kinks of g at k
            // sit at u₂ = (k/s2 − c·u1)/root
            let mut inner_breaks: Vec<f64> = kinks
                .iter()
                .map(|k| (k / s2 - c * u1) / root)
                .collect();
            inner_breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut inner = |u2: f64| g(s2 * (c * u1 + root * u2));
            g1 * self.integrate(&inner_breaks, panels, &mut inner)
        };
        Ok(self.integrate(&outer_breaks.clone(), panels, &mut outer))
    }

    /// E[g(z₁)·g(z₂)] for smooth g.
    pub fn pair_expectation(
        &self,
        q11: f64,
        q22: f64,
        q12: f64,
        g: impl Fn(f64) -> f64,
    ) -> Result<f64, QuadratureError> {
        self.pair_expectation_with_kinks(q11, q22, q12, &[], g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_standard_normal() {
        for order in [8, 20, 40, 80] {
            let gq = GaussQuadrature::new(order);
            assert!((gq.expect(|_| 1.0) - 1.0).abs() < 1e-13, "total weight");
            assert!(gq.expect(|z| z).abs() < 1e-13);
            assert!((gq.expect(|z| z * z) - 1.0).abs() < 1e-12);
            assert!((gq.expect(|z| z.powi(4)) - 3.0).abs() < 1e-11);
            assert!((gq.expect(|z| z.powi(6)) - 15.0).abs() < 1e-10);
        }
    }

    #[test]
    fn pair_expectation_identity_recovers_covariance() {
        let gq = GaussQuadrature::new(40);
        for (q11, q22, q12) in [(1.0, 1.0, 0.3), (2.0, 0.5, -0.7), (1.5, 1.5, 1.5)] {
            let got = gq.pair_expectation(q11, q22, q12, |z| z).unwrap();
            assert!((got - q12).abs() < 1e-12, "({q11},{q22},{q12}) → {got}");
        }
    }

    #[test]
    fn independent_odd_function_vanishes() {
        let gq = GaussQuadrature::new(40);
        let got = gq.pair_expectation(1.3, 0.8, 0.0, |z| z.tanh()).unwrap();
        assert!(got.abs() < 1e-12);
    }

    #[test]
    fn hard_error_on_badly_indefinite_covariance() {
        let gq = GaussQuadrature::new(16);
        let err = gq.pair_expectation(1.0, 1.0, 2.0, |z| z).unwrap_err();
        assert!(matches!(err, QuadratureError::NotPsd { .. }));
        // slight violation is repaired
        let ok = gq
            .pair_expectation(1.0, 1.0, 1.0 + 1e-9, |z| z * z)
            .unwrap();
        assert!(ok.is_finite());
    }

    #[test]
    fn gaussian_expectation_of_tanh_matches_high_order() {
        // doubling the order leaves smooth-activation results unchanged far
        // below the 1e-8 kernel-level contract
        let g40 = GaussQuadrature::new(40);
        let g80 = GaussQuadrature::new(80);
        for q in [0.25, 1.0, 4.0, 9.0] {
            let a = g40.scaled_expectation(q, |z| z.tanh() * z.tanh()).unwrap();
            let b = g80.scaled_expectation(q, |z| z.tanh() * z.tanh()).unwrap();
            assert!((a - b).abs() < 5e-11, "q={q}: {a} vs {b}");
        }
    }

    #[test]
    fn kink_alignment_matches_hardtanh_closed_form() {
        // E[clamp(√q·z, −1, 1)²] = q·[(2Φ(a)−1) − 2a·φ(a)] + 2(1−Φ(a)),
        // a = 1/√q
        let gq = GaussQuadrature::new(40);
        for q in [0.25f64, 1.0, 2.3, 6.0] {
            let f = |z: f64| z.clamp(-1.0, 1.0).powi(2);
            let aligned = gq
                .scaled_expectation_with_kinks(q, &[-1.0, 1.0], f)
                .unwrap();
            let a = 1.0 / q.sqrt();
            let inside = 2.0 * crate::special::normal_cdf(a) - 1.0
                - 2.0 * a * crate::special::normal_pdf(a);
            let want = q * inside + 2.0 * crate::special::normal_tail(a);
            assert!(
                (aligned - want).abs() < 1e-12,
                "q={q}: {aligned} vs {want}"
            );
        }
    }

    #[test]
    fn large_variance_tanh_stays_accurate() {
        // saturation limit: E[tanh(√q·z)²] → 1 as q → ∞
        let gq = GaussQuadrature::new(40);
        let a = gq.scaled_expectation(190.0, |z| z.tanh() * z.tanh()).unwrap();
        let b = GaussQuadrature::new(80)
            .scaled_expectation(190.0, |z| z.tanh() * z.tanh())
            .unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        assert!(a < 1.0 && a > 0.9);
    }
}
