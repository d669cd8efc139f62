//! Single-layer output normality: QQ data and Kolmogorov–Smirnov statistics
//! against the variance-matched normal, in the three conditioning regimes
//! (fan-in side mixing, fan-out side mixing, both), plus the small-width
//! vs large-width convergence comparison.

use super::{write_csv, write_json, Command, RunContext};
use crate::config::{parse_params, NormalityParams};
use crate::stats::{ks_against_normal, qq_pairs, StatReport};
use crate::CliError;
use rayon::prelude::*;
use srnet_core::linalg::sample_unit_sphere;
use srnet_core::network::{
    default_stable_rank_sigma_b, sample_single_layer_outputs, SingleLayerRegime,
};
use srnet_core::sampler::{self, SpectrumSpec};
use srnet_core::SeedRng;

pub const SUMMARY_HEADER: &str =
    "regime,width_out,width_in,draws,variance,ks_statistic,p_value,status";
pub const QQ_HEADER: &str = "index,sample_quantile,normal_quantile";
pub const COMPARISON_HEADER: &str = "seed,width,ks_statistic";

pub struct NormalityCommand;

fn regime_tag(r: SingleLayerRegime) -> &'static str {
    match r {
        SingleLayerRegime::ConditionLeft => "left",
        SingleLayerRegime::ConditionRight => "right",
        SingleLayerRegime::Simultaneous => "simultaneous",
    }
}

impl Command for NormalityCommand {
    fn name(&self) -> &'static str {
        "normality"
    }

    fn about(&self) -> &'static str {
        "single-layer output normality: KS tests and QQ data per regime"
    }

    fn run(&self, ctx: &RunContext, params: &serde_json::Value) -> Result<(), CliError> {
        let p: NormalityParams = parse_params(params)?;
        let method = sampler::lookup(&p.method)
            .ok_or_else(|| CliError::Config(format!("unknown sampler '{}'", p.method)))?;
        let spec = SpectrumSpec::new(p.stable_rank, p.spectral_norm);
        let sigma_b = p
            .sigma_b
            .unwrap_or_else(|| default_stable_rank_sigma_b(&spec, p.width, p.width));

        let mut summary = Vec::new();
        let mut reports = Vec::new();

        let degenerate = p.input_norm_scale == 0.0 && sigma_b == 0.0;
        if degenerate {
            for regime in [
                SingleLayerRegime::ConditionLeft,
                SingleLayerRegime::ConditionRight,
                SingleLayerRegime::Simultaneous,
            ] {
                summary.push(format!(
                    "{},{},{},{},0,NaN,NaN,skipped_degenerate_zero_output",
                    regime_tag(regime),
                    p.width,
                    p.width,
                    p.draws
                ));
            }
            write_csv(&ctx.path("normality_summary.csv"), SUMMARY_HEADER, &summary)?;
            write_json(
                &ctx.path("normality_summary.json"),
                &serde_json::json!({ "status": "skipped: x = 0 and sigma_b = 0 make every output exactly 0" }),
            )?;
            return Ok(());
        }

        let mut x_rng = SeedRng::substream(ctx.seed, 1);
        let x = sample_unit_sphere(
            &mut x_rng,
            p.width,
            p.input_norm_scale * (p.width as f64).sqrt(),
        );

        for (ri, regime) in [
            SingleLayerRegime::ConditionLeft,
            SingleLayerRegime::ConditionRight,
            SingleLayerRegime::Simultaneous,
        ]
        .into_iter()
        .enumerate()
        {
            let mut rng = SeedRng::substream(ctx.seed, 10 + ri as u64);
            let draws = sample_single_layer_outputs(
                &mut rng, p.width, p.width, &spec, method, sigma_b, &x, regime, p.draws,
            )?;
            let (stat, p_value) = ks_against_normal(&draws.samples, draws.variance);
            summary.push(format!(
                "{},{},{},{},{},{},{},ok",
                regime_tag(regime),
                p.width,
                p.width,
                p.draws,
                draws.variance,
                stat,
                p_value
            ));
            reports.push(StatReport {
                name: format!("ks_normality_{}", regime_tag(regime)),
                statistic: stat,
                p_value: Some(p_value),
                bound: None,
                pass: p_value > 0.01,
                sample_size: p.draws,
            });
            let qq: Vec<String> = qq_pairs(&draws.samples, draws.variance)
                .into_iter()
                .enumerate()
                .map(|(i, (s, q))| format!("{i},{s},{q}"))
                .collect();
            write_csv(
                &ctx.path(&format!("normality_qq_{}.csv", regime_tag(regime))),
                QQ_HEADER,
                &qq,
            )?;
        }

        // convergence direction: KS statistic at the small width should
        // exceed the large-width one, averaged over seeds
        let comparisons: Vec<(usize, usize, f64)> = (0..p.comparison_seeds)
            .into_par_iter()
            .flat_map(|s| {
                [p.width_small, p.width]
                    .into_iter()
                    .map(|w| {
                        let mut rng = SeedRng::substream(ctx.seed, 100 + s as u64);
                        let mut x_rng = SeedRng::substream(ctx.seed, 200 + s as u64);
                        let x = sample_unit_sphere(
                            &mut x_rng,
                            w,
                            p.input_norm_scale * (w as f64).sqrt(),
                        );
                        let sb = p.sigma_b.unwrap_or_else(|| {
                            default_stable_rank_sigma_b(&spec, w, w)
                        });
                        let draws = sample_single_layer_outputs(
                            &mut rng,
                            w,
                            w,
                            &spec,
                            method,
                            sb,
                            &x,
                            SingleLayerRegime::Simultaneous,
                            p.draws,
                        )
                        .expect("sampling");
                        let (stat, _) = ks_against_normal(&draws.samples, draws.variance);
                        (s, w, stat)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let comparison_lines: Vec<String> = comparisons
            .iter()
            .map(|(s, w, stat)| format!("{s},{w},{stat}"))
            .collect();
        write_csv(
            &ctx.path("normality_width_comparison.csv"),
            COMPARISON_HEADER,
            &comparison_lines,
        )?;
        let mean_small: f64 = comparisons
            .iter()
            .filter(|(_, w, _)| *w == p.width_small)
            .map(|(_, _, s)| s)
            .sum::<f64>()
            / p.comparison_seeds as f64;
        let mean_large: f64 = comparisons
            .iter()
            .filter(|(_, w, _)| *w == p.width)
            .map(|(_, _, s)| s)
            .sum::<f64>()
            / p.comparison_seeds as f64;
        reports.push(StatReport {
            name: format!(
                "ks_width_{}_exceeds_width_{}",
                p.width_small, p.width
            ),
            statistic: mean_small - mean_large,
            p_value: None,
            bound: Some(0.0),
            pass: mean_small > mean_large,
            sample_size: p.comparison_seeds,
        });

        write_csv(&ctx.path("normality_summary.csv"), SUMMARY_HEADER, &summary)?;
        write_json(&ctx.path("normality_summary.json"), &reports)?;
        Ok(())
    }
}
