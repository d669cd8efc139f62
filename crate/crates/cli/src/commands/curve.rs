//! Circle propagation through random deep networks: measured lengths and
//! curvatures per layer across stable-rank targets, alongside the
//! fixed-point theory table.
//!
//! Layers use γ = 1 with a shared spectral norm, so the per-layer length
//! coefficient is r·s²/width and grows linearly in the rank target. The
//! r = width sweep endpoint uses the scaled-orthogonal init (the rejection
//! samplers have measure-zero acceptance exactly there).

use super::{write_csv, write_json, Command, RunContext};
use crate::config::{parse_params, CurveParams};
use crate::CliError;
use rayon::prelude::*;
use srnet_core::activation;
use srnet_core::geometry::{
    fixed_point_q, measure_curve, propagate_curvature, propagate_curve, CurveGeometry,
    DiscreteCurve, LengthLayerParams,
};
use srnet_core::kernels::ActivationMoments;
use srnet_core::linalg::Matrix;
use srnet_core::network::{init_network, GammaMode, InitScheme, LayerSpec};
use srnet_core::sampler::SpectrumSpec;
use srnet_core::SeedRng;

pub const LENGTHS_HEADER: &str = "r,seed,layer,length,mean_curvature";
pub const THEORY_HEADER: &str = "r,layer,q_star,chi1,chi2,g,kappa_sq";

pub struct CurveCommand;

pub fn curve_layer_specs(
    width: usize,
    depth: usize,
    r: f64,
    s: f64,
) -> Vec<LayerSpec> {
    (0..depth)
        .map(|_| {
            let init = if r >= width as f64 {
                InitScheme::ScaledOrthogonal {
                    scale: s,
                    sigma_b: 0.0,
                }
            } else {
                InitScheme::StableRank {
                    spec: SpectrumSpec::new(r, s),
                    sigma_b: 0.0,
                    method: "sphere".into(),
                }
            };
            LayerSpec {
                n_in: width,
                n_out: width,
                init,
                gamma_mode: GammaMode::One,
                include_bias: false,
            }
        })
        .collect()
}

pub fn input_circle(n_points: usize, width: usize, q0: f64) -> DiscreteCurve {
    srnet_core::geometry::circle_curve(n_points, (q0 * width as f64).sqrt(), width)
}

/// Measured per-layer (length, mean curvature) of one propagated circle.
pub fn propagate_and_measure(
    seed: u64,
    specs: &[LayerSpec],
    act: &'static dyn activation::Activation,
    curve: &DiscreteCurve,
) -> Result<Vec<(f64, f64)>, CliError> {
    let mut rng = SeedRng::new(seed);
    let net = init_network(&mut rng, specs, act)?;
    let images = propagate_curve(&net, curve)?;
    Ok(images
        .iter()
        .map(|c| {
            let m = measure_curve(c);
            let mean_k = m.curvatures.iter().sum::<f64>() / m.curvatures.len() as f64;
            (m.length, mean_k)
        })
        .collect())
}

impl Command for CurveCommand {
    fn name(&self) -> &'static str {
        "curve"
    }

    fn about(&self) -> &'static str {
        "circle propagation: lengths/curvatures per layer across rank targets"
    }

    fn run(&self, ctx: &RunContext, params: &serde_json::Value) -> Result<(), CliError> {
        let p: CurveParams = parse_params(params)?;
        let act = activation::lookup(&p.activation)
            .ok_or_else(|| CliError::Config(format!("unknown activation '{}'", p.activation)))?;
        let s = p.spectral_norm.unwrap_or((p.width as f64).sqrt());
        let curve = input_circle(p.n_points, p.width, p.input_q);
        let base = measure_curve(&curve);
        let base_curv = base.curvatures.iter().sum::<f64>() / base.curvatures.len() as f64;

        let mut rows = Vec::new();
        let mut summary = Vec::new();
        for &r in &p.stable_ranks {
            let specs = curve_layer_specs(p.width, p.depth, r, s);
            let measured: Vec<Vec<(f64, f64)>> = (0..p.seeds)
                .into_par_iter()
                .map(|seed| {
                    propagate_and_measure(
                        ctx.seed
                            .wrapping_add((r as u64) << 20)
                            .wrapping_add(seed as u64),
                        &specs,
                        act,
                        &curve,
                    )
                    .expect("propagation")
                })
                .collect();
            for (seed, layers) in measured.iter().enumerate() {
                rows.push(format!("{r},{seed},0,{},{}", base.length, base_curv));
                for (l, (len, curv)) in layers.iter().enumerate() {
                    rows.push(format!("{r},{seed},{},{len},{curv}", l + 1));
                }
            }
            let mean_final: f64 = measured
                .iter()
                .map(|layers| layers.last().unwrap().0)
                .sum::<f64>()
                / p.seeds as f64;
            summary.push(serde_json::json!({
                "r": r,
                "mean_final_length": mean_final,
                "seeds": p.seeds,
            }));

            // per-layer snapshot of one seed per rank for external plotting
            {
                let snap_seed = ctx
                    .seed
                    .wrapping_add((r as u64) << 20)
                    .wrapping_add(p.snapshot_seed);
                let mut rng = SeedRng::new(snap_seed);
                let net = init_network(&mut rng, &specs, act)?;
                let images = propagate_curve(&net, &curve)?;
                let mut lines = Vec::new();
                let mut push_curve = |layer: usize, c: &Matrix| {
                    for i in 0..c.rows() {
                        let coords = c
                            .row(i)
                            .iter()
                            .map(|v| format!("{v}"))
                            .collect::<Vec<_>>()
                            .join(",");
                        lines.push(format!("{layer},{i},{coords}"));
                    }
                };
                push_curve(0, &curve.points);
                for (l, img) in images.iter().enumerate() {
                    push_curve(l + 1, &img.points);
                }
                let coord_header: String = (0..p.width)
                    .map(|j| format!("x{j}"))
                    .collect::<Vec<_>>()
                    .join(",");
                write_csv(
                    &ctx.path(&format!("curve_snapshot_r{}.csv", r as usize)),
                    &format!("layer,point_index,{coord_header}"),
                    &lines,
                )?;
            }
        }
        write_csv(&ctx.path("curve_lengths.csv"), LENGTHS_HEADER, &rows)?;

        // theory table at the fixed point (skipped for activations without a
        // pointwise second derivative)
        let mut theory_rows = Vec::new();
        if act.supports_curvature() {
            let moments = ActivationMoments::with_default_order(act);
            for &r in &p.stable_ranks {
                // n_in = 1 expresses the γ = 1 convention: both the length
                // and curvature coefficients become r·s²/width
                let layer = LengthLayerParams {
                    n_in: 1,
                    n_out: p.width,
                    r,
                    s,
                    sigma_b: 0.0,
                };
                let fp = fixed_point_q(&layer, &moments, 1e-10)?;
                let mut geo = CurveGeometry {
                    g: 1.0,
                    kappa_sq: 1.0 / fp.q_star.max(1e-12),
                    q_star: fp.q_star,
                };
                let coef = layer.curvature_coefficient();
                let chi1 = coef * moments.e_dphi_sq(fp.q_star).map_err(srnet_core::geometry::GeometryError::from)?;
                let chi2 = coef * moments.e_ddphi_sq(fp.q_star).map_err(srnet_core::geometry::GeometryError::from)?;
                theory_rows.push(format!(
                    "{r},0,{},{chi1},{chi2},{},{}",
                    fp.q_star, geo.g, geo.kappa_sq
                ));
                for l in 1..=p.depth {
                    geo = propagate_curvature(&geo, &layer, &moments)?;
                    theory_rows.push(format!(
                        "{r},{l},{},{chi1},{chi2},{},{}",
                        fp.q_star, geo.g, geo.kappa_sq
                    ));
                }
            }
        }
        write_csv(&ctx.path("curve_theory.csv"), THEORY_HEADER, &theory_rows)?;
        write_json(
            &ctx.path("curve_summary.json"),
            &serde_json::json!({
                "spectral_norm": s,
                "input_length": base.length,
                "per_rank": summary,
            }),
        )?;
        Ok(())
    }
}
