//! Experiment configuration: one JSON object per run, unknown keys are
//! errors. Every command has a complete default so a config file is only
//! needed to override something.

use crate::CliError;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the invoked subcommand.
    pub experiment: String,
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<String>,
    /// Command-specific parameters; omitted fields take their defaults.
    #[serde(default)]
    pub params: serde_json::Value,
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn parse_params<T: for<'de> Deserialize<'de> + Default>(
    params: &serde_json::Value,
) -> Result<T, CliError> {
    if params.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(params.clone()).map_err(|e| CliError::Config(format!("params: {e}")))
}

// ── srank-gaussian ────────────────────────────────────────────────────────

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SizePoint {
    pub n: usize,
    pub alpha: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SrankGaussianParams {
    pub sizes: Vec<SizePoint>,
    pub draws: usize,
}

impl Default for SrankGaussianParams {
    fn default() -> Self {
        SrankGaussianParams {
            sizes: vec![
                SizePoint { n: 2000, alpha: 1.0 },
                SizePoint { n: 2000, alpha: 0.25 },
                SizePoint { n: 500, alpha: 1.0 },
                SizePoint { n: 500, alpha: 0.5 },
                SizePoint { n: 50, alpha: 1.0 },
            ],
            draws: 10,
        }
    }
}

// ── normality ─────────────────────────────────────────────────────────────

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalityParams {
    pub width: usize,
    pub width_small: usize,
    pub stable_rank: f64,
    pub spectral_norm: f64,
    /// σ_b; `null` applies the default rule σ_b² = 0.01·s²r/(n_in·n_out).
    pub sigma_b: Option<f64>,
    pub draws: usize,
    /// Seeds for the small-vs-large width KS comparison.
    pub comparison_seeds: usize,
    /// Input norm as a multiple of √n_in; 0 makes the run degenerate and
    /// the tests are skipped with a flag.
    pub input_norm_scale: f64,
    pub method: String,
}

impl Default for NormalityParams {
    fn default() -> Self {
        NormalityParams {
            width: 2000,
            width_small: 32,
            stable_rank: 10.0,
            spectral_norm: 1.0,
            sigma_b: None,
            draws: 10_000,
            comparison_seeds: 5,
            input_norm_scale: 1.0,
            method: "sphere".into(),
        }
    }
}

// ── gp-ntk ────────────────────────────────────────────────────────────────

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpSection {
    pub width: usize,
    pub n0: usize,
    pub ensembles: usize,
    pub stable_rank: f64,
    /// Deep-layer coefficient s²r/(n_in·n_out).
    pub coefficient: f64,
    pub sigma_b: f64,
}

impl Default for GpSection {
    fn default() -> Self {
        GpSection {
            width: 2000,
            n0: 12,
            ensembles: 200,
            stable_rank: 10.0,
            coefficient: 1.2,
            sigma_b: 0.3,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct NtkSection {
    pub width: usize,
    pub n0: usize,
    pub outputs: usize,
    pub inits: usize,
    pub stable_rank_mid: f64,
    pub sigma_b: f64,
}

impl Default for NtkSection {
    fn default() -> Self {
        NtkSection {
            width: 1000,
            n0: 8,
            outputs: 10,
            inits: 8,
            stable_rank_mid: 10.0,
            sigma_b: 1.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftSection {
    pub width_large: usize,
    pub width_small: usize,
    pub outputs: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub seeds: usize,
    pub checkpoint_every: usize,
}

impl Default for DriftSection {
    fn default() -> Self {
        DriftSection {
            width_large: 1000,
            width_small: 50,
            outputs: 4,
            steps: 500,
            learning_rate: 0.02,
            seeds: 5,
            checkpoint_every: 100,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpNtkParams {
    pub gp: GpSection,
    pub ntk: NtkSection,
    pub drift: DriftSection,
}

// ── curve ─────────────────────────────────────────────────────────────────

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveParams {
    pub width: usize,
    pub depth: usize,
    pub n_points: usize,
    pub stable_ranks: Vec<f64>,
    /// Shared spectral norm; `null` picks s = √width so the r = width run
    /// sits at unit forward gain.
    pub spectral_norm: Option<f64>,
    pub seeds: usize,
    pub activation: String,
    /// Input length scale q⁰ = ‖x‖²/N₀.
    pub input_q: f64,
    /// Which seed's per-layer curve snapshots are written out.
    pub snapshot_seed: u64,
}

impl Default for CurveParams {
    fn default() -> Self {
        CurveParams {
            width: 200,
            depth: 5,
            n_points: 256,
            stable_ranks: vec![5.0, 50.0, 200.0],
            spectral_norm: None,
            seeds: 10,
            activation: "tanh".into(),
            input_q: 1.0,
            snapshot_seed: 0,
        }
    }
}

// ── toy-training ──────────────────────────────────────────────────────────

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyTrainingParams {
    pub x_diag: Vec<f64>,
    pub y_diag: Vec<f64>,
    /// Initial diagonal; the default differs from the optimum along a
    /// single curvature eigendirection and already satisfies the
    /// constraints, which is the regime where the unconstrained descent
    /// path is a straight line.
    pub w0_diag: Vec<f64>,
    pub learning_rate: f64,
    pub steps: usize,
}

impl Default for ToyTrainingParams {
    fn default() -> Self {
        ToyTrainingParams {
            x_diag: vec![1.0, 2.0, 3.0],
            y_diag: vec![3.0, 2.0, 1.0],
            w0_diag: vec![3.0, 1.0, -1.0 / 3.0],
            learning_rate: 1e-3,
            steps: 8000,
        }
    }
}

// ── mnist ─────────────────────────────────────────────────────────────────

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseFitSection {
    pub srank_targets: Vec<f64>,
    pub shuffle_fractions: Vec<f64>,
    pub seeds: usize,
    pub epochs: usize,
}

impl Default for NoiseFitSection {
    fn default() -> Self {
        NoiseFitSection {
            srank_targets: vec![20.0, 75.0, 187.0],
            shuffle_fractions: vec![0.0, 1.0],
            seeds: 5,
            epochs: 15,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularizationSection {
    pub l1_grid: Vec<f64>,
    pub l2_grid: Vec<f64>,
    pub srank_grid: Vec<f64>,
    pub models_per_point: usize,
    pub epochs: usize,
    pub test_size: usize,
}

impl Default for RegularizationSection {
    fn default() -> Self {
        RegularizationSection {
            l1_grid: vec![1e-6, 1e-5, 1e-4, 1e-3],
            l2_grid: vec![1e-5, 1e-4, 1e-3, 1e-2],
            srank_grid: vec![5.0, 10.0, 40.0, 187.0],
            models_per_point: 20,
            epochs: 1,
            test_size: 1000,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct MnistParams {
    /// IDX file paths; when absent a synthetic two-class Gaussian-blob set
    /// substitutes.
    pub images: Option<String>,
    pub labels: Option<String>,
    /// "noise-fit", "regularization" or "both".
    pub mode: String,
    pub subset: usize,
    pub hidden: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub spectral_norm: f64,
    pub noise: NoiseFitSection,
    pub regularization: RegularizationSection,
    pub blob_dim: usize,
    pub blob_separation: f64,
    /// Spectrum sampler for the constrained inits. The default is `cube`:
    /// the sphere sampler's acceptance collapses (≈1e-15) once the rank
    /// target passes ~m/10 of a wide layer, while the cube sampler accepts
    /// almost surely up to ~m/3.
    pub method: String,
}

impl Default for MnistParams {
    fn default() -> Self {
        MnistParams {
            images: None,
            labels: None,
            mode: "noise-fit".into(),
            subset: 1000,
            hidden: 750,
            batch_size: 64,
            learning_rate: 0.5,
            spectral_norm: 2.0,
            noise: NoiseFitSection::default(),
            regularization: RegularizationSection::default(),
            blob_dim: 784,
            blob_separation: 4.0,
            method: "cube".into(),
        }
    }
}

// ── sample ────────────────────────────────────────────────────────────────

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleParams {
    pub n_out: usize,
    pub n_in: usize,
    pub stable_rank: f64,
    pub spectral_norm: f64,
    pub method: String,
    pub count: usize,
    /// "binary", "csv" or "both".
    pub format: String,
}

impl Default for SampleParams {
    fn default() -> Self {
        SampleParams {
            n_out: 64,
            n_in: 64,
            stable_rank: 8.0,
            spectral_norm: 2.0,
            method: "sphere".into(),
            count: 4,
            format: "both".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = serde_json::json!({
            "experiment": "sample",
            "seed": 1,
            "typo_key": true
        });
        let res: Result<ExperimentConfig, _> = serde_json::from_value(bad);
        assert!(res.is_err());

        let bad_params = serde_json::json!({"draws": 3, "sises": []});
        assert!(parse_params::<SrankGaussianParams>(&bad_params).is_err());
    }

    #[test]
    fn partial_params_take_defaults() {
        let p: SrankGaussianParams =
            parse_params(&serde_json::json!({"draws": 3})).unwrap();
        assert_eq!(p.draws, 3);
        assert_eq!(p.sizes.len(), SrankGaussianParams::default().sizes.len());
        let p: MnistParams = parse_params(&serde_json::Value::Null).unwrap();
        assert_eq!(p.mode, "noise-fit");
    }
}
