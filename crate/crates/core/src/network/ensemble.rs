//! Ensemble tools that draw random networks and evaluate them on a small,
//! fixed batch without materializing any weight matrix.
//!
//! Applying a Haar-orthogonal Q to k fixed vectors only exposes Q's action
//! on their span: if C = B·R is a thin QR, then Q·C = (Q·B)·R and Q·B is a
//! Haar-uniform orthonormal frame independent of R. Sampling that frame
//! directly gives the images in O(width·k²) instead of the O(width³) a full
//! Haar draw would cost, with exactly the same joint distribution. The same
//! trick covers i.i.d. Gaussian weights (W·B has i.i.d. Gaussian entries by
//! rotational invariance). These identities let width-2000 ensembles with
//! hundreds of members run in seconds, and the tests check the shortcut
//! against materialized networks.

use super::{InitScheme, LayerSpec, NetworkError};
use crate::activation::Activation;
use crate::linalg::{norm2, qr_thin, sample_haar_frame, sample_unit_sphere, Matrix};
use crate::rng::SeedRng;
use crate::sampler::{self, SpectrumSpec, SpectrumSampler, DEFAULT_REJECTION_BUDGET};

/// Image of the k column vectors of `c` (dim×k) under a fresh Haar
/// orthogonal matrix of matching dimension.
fn apply_fresh_haar(rng: &mut SeedRng, c: &Matrix) -> Matrix {
    let qr = qr_thin(c);
    let frame = sample_haar_frame(rng, c.rows(), c.cols());
    frame.matmul(&qr.r)
}

/// One freshly drawn network evaluated on the batch `x` (rows are inputs).
/// Returns the per-layer pre-activations, exactly distributed as a
/// materialized draw from the same specs. Batch size must not exceed any
/// layer width.
pub fn stable_rank_batch_forward(
    rng: &mut SeedRng,
    specs: &[LayerSpec],
    activation: &dyn Activation,
    x: &Matrix,
) -> Result<Vec<Matrix>, NetworkError> {
    let k = x.rows();
    for spec in specs {
        assert!(
            k <= spec.n_in && k <= spec.n_out,
            "batch size {k} exceeds a layer dimension ({}×{})",
            spec.n_out,
            spec.n_in
        );
    }
    let mut pre_layers = Vec::with_capacity(specs.len());
    let mut post = x.clone(); // k × n_{l-1}, rows are vectors
    for spec in specs {
        let m = spec.n_in.min(spec.n_out);
        let c = post.transpose(); // n_in × k
        // y = W·αᵀ for the scheme's W, computed through frames
        let y: Matrix = match &spec.init {
            InitScheme::Gaussian { sigma_w, .. } => {
                // W·C = (W·B)·R with W·B fresh i.i.d. Gaussian (n_out × k)
                let qr = qr_thin(&c);
                let std = sigma_w / (spec.n_in as f64).sqrt();
                let g = crate::linalg::sample_gaussian_matrix(rng, spec.n_out, k, std);
                g.matmul(&qr.r)
            }
            InitScheme::StableRank {
                spec: sspec,
                method,
                ..
            } => {
                let sampler = sampler::lookup(method)
                    .ok_or_else(|| NetworkError::UnknownSampler(method.clone()))?;
                let draw =
                    sampler.sample_spectrum(rng, sspec, spec.n_out, spec.n_in, DEFAULT_REJECTION_BUDGET)?;
                spectrum_apply(rng, &c, &draw.values, spec.n_out, m)
            }
            InitScheme::ScaledOrthogonal { scale, .. } => {
                let values = vec![*scale; m];
                spectrum_apply(rng, &c, &values, spec.n_out, m)
            }
        };
        // pre = γ·yᵀ + bias
        let gamma = spec.gamma_mode.gamma(spec.n_in);
        let mut pre = y.transpose();
        if gamma != 1.0 {
            pre.scale_in_place(gamma);
        }
        if spec.include_bias {
            let sigma_b = spec.init.sigma_b();
            let mut bias = vec![0.0; spec.n_out];
            if sigma_b > 0.0 {
                rng.fill_normal(&mut bias, sigma_b);
            }
            for i in 0..pre.rows() {
                for (v, b) in pre.row_mut(i).iter_mut().zip(&bias) {
                    *v += b;
                }
            }
        }
        post = pre.clone();
        for v in post.data_mut() {
            *v = activation.phi(*v);
        }
        pre_layers.push(pre);
    }
    Ok(pre_layers)
}

/// (U·Σ·Vᵀ)·C for fresh Haar U, V and the given diagonal values:
/// T = Vᵀ·C (frame trick), scale the leading m rows by the values, zero-pad
/// to n_out, then apply U (frame trick again).
fn spectrum_apply(
    rng: &mut SeedRng,
    c: &Matrix,
    values: &[f64],
    n_out: usize,
    m: usize,
) -> Matrix {
    let k = c.cols();
    // Vᵀ·C = F·R for a fresh frame F (n_in × k); only the top m rows matter.
    let qr = qr_thin(c);
    let f = sample_haar_frame(rng, c.rows(), k);
    let mut z = Matrix::zeros(n_out, k);
    for a in 0..m {
        for j in 0..k {
            let mut t_aj = 0.0;
            for l in 0..k {
                t_aj += f.get(a, l) * qr.r.get(l, j);
            }
            z.set(a, j, values[a] * t_aj);
        }
    }
    apply_fresh_haar(rng, &z)
}

/// Which factors of W = U·Σ·Vᵀ a single-layer output ensemble holds fixed
/// across draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SingleLayerRegime {
    /// Condition on U and Σ; resample V (the fan-in side mixes).
    ConditionLeft,
    /// Condition on V and Σ; resample U (the fan-out side mixes).
    ConditionRight,
    /// Resample everything.
    Simultaneous,
}

/// Output samples of one coordinate of f(x) = W·x + b over independent
/// layer draws, together with the exact variance of the sampled
/// distribution for the chosen conditioning.
pub struct SingleLayerDraws {
    pub samples: Vec<f64>,
    pub variance: f64,
}

/// Draw `draws` independent realizations of f_k(x) for a stable-rank layer
/// W = U·Σ·Vᵀ (n_out × n_in).
///
/// Only the k-th row of U (uniform on the sphere) and t = Vᵀx (uniform on
/// the sphere of radius ‖x‖) enter f_k(x) = Σ_a U_ka·d_a·t_a + b_k, so the
/// draws sample those marginals directly instead of factorizing matrices.
pub fn sample_single_layer_outputs(
    rng: &mut SeedRng,
    n_out: usize,
    n_in: usize,
    spec: &SpectrumSpec,
    method: &dyn SpectrumSampler,
    sigma_b: f64,
    x: &[f64],
    regime: SingleLayerRegime,
    draws: usize,
) -> Result<SingleLayerDraws, sampler::SamplerError> {
    assert_eq!(x.len(), n_in);
    let m = n_out.min(n_in);
    let x_norm = norm2(x);

    let fixed_spectrum = method
        .sample_spectrum(rng, spec, n_out, n_in, DEFAULT_REJECTION_BUDGET)?
        .values;
    let fixed_u = sample_unit_sphere(rng, n_out, 1.0);
    let fixed_t = sample_unit_sphere(rng, n_in, x_norm);

    let variance = match regime {
        SingleLayerRegime::ConditionLeft => {
            // Var = ‖x‖²/n_in · Σ_a (U_ka d_a)² + σ_b²
            let s: f64 = (0..m)
                .map(|a| (fixed_u[a] * fixed_spectrum[a]).powi(2))
                .sum();
            x_norm * x_norm / n_in as f64 * s + sigma_b * sigma_b
        }
        SingleLayerRegime::ConditionRight => {
            // Var = (1/n_out) · Σ_a (d_a t_a)² + σ_b²
            let s: f64 = (0..m).map(|a| (fixed_spectrum[a] * fixed_t[a]).powi(2)).sum();
            s / n_out as f64 + sigma_b * sigma_b
        }
        SingleLayerRegime::Simultaneous => {
            let s = spec.spectral_norm_target;
            let r = spec.stable_rank_target;
            s * s * r * x_norm * x_norm / (n_in as f64 * n_out as f64) + sigma_b * sigma_b
        }
    };

    let mut samples = Vec::with_capacity(draws);
    for _ in 0..draws {
        let spectrum_holder;
        let spectrum: &[f64] = match regime {
            SingleLayerRegime::Simultaneous => {
                spectrum_holder = method
                    .sample_spectrum(rng, spec, n_out, n_in, DEFAULT_REJECTION_BUDGET)?
                    .values;
                &spectrum_holder
            }
            _ => &fixed_spectrum,
        };
        let u_holder;
        let u: &[f64] = match regime {
            SingleLayerRegime::ConditionLeft => &fixed_u,
            _ => {
                u_holder = sample_unit_sphere(rng, n_out, 1.0);
                &u_holder
            }
        };
        let t_holder;
        let t: &[f64] = match regime {
            SingleLayerRegime::ConditionRight => &fixed_t,
            _ => {
                t_holder = sample_unit_sphere(rng, n_in, x_norm);
                &t_holder
            }
        };
        let mut f = 0.0;
        for a in 0..m {
            f += u[a] * spectrum[a] * t[a];
        }
        if sigma_b > 0.0 {
            f += sigma_b * rng.normal();
        }
        samples.push(f);
    }
    Ok(SingleLayerDraws { samples, variance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::TANH;
    use crate::network::{forward, init_network, GammaMode};
    use crate::sampler::SPHERE;

    /// The frame-based restricted forward must match materialized networks
    /// in distribution; compare low-order moments over many draws.
    #[test]
    fn restricted_forward_matches_materialized_moments() {
        let width = 48;
        let spec = SpectrumSpec::new(6.0, (width as f64) / 6.0f64.sqrt());
        let mk_specs = || {
            vec![
                LayerSpec::new(
                    8,
                    width,
                    InitScheme::StableRank {
                        spec,
                        sigma_b: 0.1,
                        method: "sphere".into(),
                    },
                    GammaMode::One,
                ),
                LayerSpec {
                    n_in: width,
                    n_out: width,
                    init: InitScheme::StableRank {
                        spec,
                        sigma_b: 0.1,
                        method: "sphere".into(),
                    },
                    gamma_mode: GammaMode::InvSqrtFanIn,
                    include_bias: true,
                },
            ]
        };
        let x = Matrix::from_rows(&[
            vec![1.0, -0.5, 0.3, 0.0, 0.7, -0.2, 0.1, 0.4],
            vec![0.2, 0.8, -0.3, 0.5, 0.0, 0.1, -0.6, 0.9],
        ]);

        let reps = 3000;
        let mut rng = SeedRng::new(501);
        let (mut m_cov, mut m_var1, mut m_var2) = (0.0, 0.0, 0.0);
        for _ in 0..reps {
            let net = init_network(&mut rng, &mk_specs(), &TANH).unwrap();
            let (out, _) = forward(&net, &x);
            for kk in 0..width {
                m_cov += out.get(0, kk) * out.get(1, kk);
                m_var1 += out.get(0, kk) * out.get(0, kk);
                m_var2 += out.get(1, kk) * out.get(1, kk);
            }
        }
        let mut rng2 = SeedRng::new(502);
        let (mut f_cov, mut f_var1, mut f_var2) = (0.0, 0.0, 0.0);
        for _ in 0..reps {
            let pres = stable_rank_batch_forward(&mut rng2, &mk_specs(), &TANH, &x).unwrap();
            let out = pres.last().unwrap();
            for kk in 0..width {
                f_cov += out.get(0, kk) * out.get(1, kk);
                f_var1 += out.get(0, kk) * out.get(0, kk);
                f_var2 += out.get(1, kk) * out.get(1, kk);
            }
        }
        let n = (reps * width) as f64;
        for (a, b, label) in [
            (m_cov / n, f_cov / n, "cov"),
            (m_var1 / n, f_var1 / n, "var1"),
            (m_var2 / n, f_var2 / n, "var2"),
        ] {
            // generous band: both estimators fluctuate at the ensemble level
            let tol = 6.0 * (a.abs().max(b.abs()).max(0.05)) / (reps as f64).sqrt() * 3.0;
            assert!(
                (a - b).abs() < tol,
                "{label}: materialized {a} vs restricted {b} (tol {tol})"
            );
        }
    }

    #[test]
    fn single_layer_sampler_matches_materialized_second_moment() {
        let (n_out, n_in) = (24, 16);
        let spec = SpectrumSpec::new(4.0, 2.0);
        let mut rng = SeedRng::new(503);
        let x: Vec<f64> = (0..n_in).map(|i| (i as f64 * 0.37).sin()).collect();
        let draws = 20_000;
        let got = sample_single_layer_outputs(
            &mut rng,
            n_out,
            n_in,
            &spec,
            &SPHERE,
            0.0,
            &x,
            SingleLayerRegime::Simultaneous,
            draws,
        )
        .unwrap();
        let m2 = got.samples.iter().map(|v| v * v).sum::<f64>() / draws as f64;
        // exact second moment: s²r‖x‖²/(n_in·n_out)
        assert!((got.variance - m2).abs() < 6.0 * got.variance / (draws as f64).sqrt());

        // and against actually assembled weights
        let mut rng2 = SeedRng::new(504);
        let mut m2_mat = 0.0;
        let reps = 4000;
        for _ in 0..reps {
            let w = sampler::assemble_weight(&mut rng2, &spec, n_out, n_in, &SPHERE).unwrap();
            let fx: f64 = w.row(0).iter().zip(&x).map(|(a, b)| a * b).sum();
            m2_mat += fx * fx;
        }
        m2_mat /= reps as f64;
        assert!(
            (m2_mat - got.variance).abs() < 6.0 * got.variance / (reps as f64).sqrt(),
            "materialized {m2_mat} vs exact {}",
            got.variance
        );
    }
}
