//! Dump constrained weight matrices to disk, with measured stable rank and
//! spectral norm alongside.

use super::{write_json, Command, RunContext};
use crate::config::{parse_params, SampleParams};
use crate::CliError;
use srnet_core::linalg::{spectral_norm, stable_rank, write_matrix, write_matrix_csv};
use srnet_core::sampler::{self, assemble_weight, SpectrumSpec};
use srnet_core::SeedRng;

pub struct SampleCommand;

impl Command for SampleCommand {
    fn name(&self) -> &'static str {
        "sample"
    }

    fn about(&self) -> &'static str {
        "dump constrained weight matrices (binary and/or CSV)"
    }

    fn run(&self, ctx: &RunContext, params: &serde_json::Value) -> Result<(), CliError> {
        let p: SampleParams = parse_params(params)?;
        let method = sampler::lookup(&p.method)
            .ok_or_else(|| CliError::Config(format!("unknown sampler '{}'", p.method)))?;
        if !["binary", "csv", "both"].contains(&p.format.as_str()) {
            return Err(CliError::Config(format!("unknown format '{}'", p.format)));
        }
        let spec = SpectrumSpec::new(p.stable_rank, p.spectral_norm);
        let mut manifest = Vec::new();
        for i in 0..p.count {
            let mut rng = SeedRng::substream(ctx.seed, i as u64);
            let w = assemble_weight(&mut rng, &spec, p.n_out, p.n_in, method)?;
            let stem = format!("weight_{i:03}");
            if p.format == "binary" || p.format == "both" {
                write_matrix(&ctx.path(&format!("{stem}.bin")), &w)?;
            }
            if p.format == "csv" || p.format == "both" {
                write_matrix_csv(&ctx.path(&format!("{stem}.csv")), &w)?;
            }
            manifest.push(serde_json::json!({
                "file": stem,
                "rows": p.n_out,
                "cols": p.n_in,
                "stable_rank": stable_rank(&w)?,
                "spectral_norm": spectral_norm(&w),
            }));
        }
        write_json(&ctx.path("sample_manifest.json"), &manifest)?;
        Ok(())
    }
}
