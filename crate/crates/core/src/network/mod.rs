//! Finite-width fully connected feed-forward networks.
//!
//! A network is a stack of layers α̃ˡ(x) = γˡ·Wˡ·αˡ⁻¹(x) + bˡ with the
//! activation applied coordinate-wise between layers and never after the
//! final one: the network output is the last pre-activation. Layers are
//! initialized from i.i.d. Gaussian entries, from the stable-rank
//! constrained sampler, or (the stable-rank = min-dimension endpoint, where
//! rejection sampling has measure-zero acceptance) as a scaled Haar
//! orthogonal matrix.

mod checkpoint;
mod ensemble;
mod train;

pub use checkpoint::{load_network, save_network, write_history_csv, HISTORY_CSV_HEADER};
pub use ensemble::{
    sample_single_layer_outputs, stable_rank_batch_forward, SingleLayerDraws, SingleLayerRegime,
};
pub use train::{
    gradient, loss_value, train, Gradients, LayerStats, Loss, Projection, StepRecord, TrainConfig,
    TrainHistory,
};

use crate::activation::Activation;
use crate::linalg::{sample_gaussian_matrix, sample_haar_frame, spectral_norm, stable_rank, Matrix};
use crate::rng::SeedRng;
use crate::sampler::{self, SpectrumSpec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("layer {index}: n_in = {n_in} does not chain with previous n_out = {prev_out}")]
    DimensionMismatch {
        index: usize,
        n_in: usize,
        prev_out: usize,
    },
    #[error("unknown spectrum sampler '{0}'")]
    UnknownSampler(String),
    #[error("unknown activation '{0}'")]
    UnknownActivation(String),
    #[error("training diverged: non-finite loss at step {step}")]
    Diverged { step: usize },
    #[error("batch shape mismatch: {0}")]
    BatchShape(String),
    #[error(transparent)]
    Sampler(#[from] sampler::SamplerError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}

/// Per-layer weight initialization scheme.
#[derive(Clone, Debug)]
pub enum InitScheme {
    /// W entries i.i.d. N(0, σ_w²/n_in), biases N(0, σ_b²).
    Gaussian { sigma_w: f64, sigma_b: f64 },
    /// W = U·Σ·Vᵀ with prescribed stable rank and spectral norm; `method`
    /// names a registered spectrum sampler (`sphere` or `cube`).
    StableRank {
        spec: SpectrumSpec,
        sigma_b: f64,
        method: String,
    },
    /// W = scale·Q for Haar-orthogonal Q (square layers): the unique point
    /// of the constraint set when the stable-rank target equals the min
    /// dimension, where the rejection samplers cannot accept.
    ScaledOrthogonal { scale: f64, sigma_b: f64 },
}

impl InitScheme {
    pub fn sigma_b(&self) -> f64 {
        match self {
            InitScheme::Gaussian { sigma_b, .. } => *sigma_b,
            InitScheme::StableRank { sigma_b, .. } => *sigma_b,
            InitScheme::ScaledOrthogonal { sigma_b, .. } => *sigma_b,
        }
    }
}

/// Default bias scale for a stable-rank layer: σ_b² = 0.01·s²r/(n_in·n_out),
/// a hundredth of the per-entry weight variance scale, satisfying the
/// non-exploding-variance condition at any width.
pub fn default_stable_rank_sigma_b(spec: &SpectrumSpec, n_out: usize, n_in: usize) -> f64 {
    let s = spec.spectral_norm_target;
    let r = spec.stable_rank_target;
    (0.01 * s * s * r / (n_in as f64 * n_out as f64)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaMode {
    /// γ = 1.
    One,
    /// γ = 1/√n_in, the width-compensating normalization.
    InvSqrtFanIn,
}

impl GammaMode {
    pub fn gamma(&self, n_in: usize) -> f64 {
        match self {
            GammaMode::One => 1.0,
            GammaMode::InvSqrtFanIn => 1.0 / (n_in as f64).sqrt(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GammaMode::One => "one",
            GammaMode::InvSqrtFanIn => "inv_sqrt_fanin",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "one" => Some(GammaMode::One),
            "inv_sqrt_fanin" => Some(GammaMode::InvSqrtFanIn),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LayerSpec {
    pub n_in: usize,
    pub n_out: usize,
    pub init: InitScheme,
    pub gamma_mode: GammaMode,
    /// When false the layer has no bias parameter at all (for bias-free
    /// linear models); when true the bias is trainable, drawn N(0, σ_b²).
    pub include_bias: bool,
}

impl LayerSpec {
    pub fn new(n_in: usize, n_out: usize, init: InitScheme, gamma_mode: GammaMode) -> Self {
        LayerSpec {
            n_in,
            n_out,
            init,
            gamma_mode,
            include_bias: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Layer {
    pub weight: Matrix, // n_out × n_in
    pub bias: Option<Vec<f64>>,
    pub gamma: f64,
}

/// Multi-layer perceptron with a shared coordinate-wise activation.
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub activation: &'static dyn Activation,
}

impl Clone for Mlp {
    fn clone(&self) -> Self {
        Mlp {
            layers: self.layers.clone(),
            activation: self.activation,
        }
    }
}

impl std::fmt::Debug for Mlp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let dims: Vec<String> = self
            .layers
            .iter()
            .map(|l| format!("{}×{}", l.weight.rows(), l.weight.cols()))
            .collect();
        f.debug_struct("Mlp")
            .field("layers", &dims)
            .field("activation", &self.activation.name())
            .finish()
    }
}

impl Mlp {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.rows()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.rows() * l.weight.cols() + l.bias.as_ref().map_or(0, |b| b.len()))
            .sum()
    }
}

/// All intermediate states of one forward pass: pre- and post-activations
/// per layer, each batch × width.
pub struct ForwardTrace {
    pub pre_activations: Vec<Matrix>,
    pub post_activations: Vec<Matrix>,
}

/// Build a network from layer specs. Weights are drawn per each layer's
/// scheme; reproducible from the RNG seed.
pub fn init_network(
    rng: &mut SeedRng,
    specs: &[LayerSpec],
    activation: &'static dyn Activation,
) -> Result<Mlp, NetworkError> {
    assert!(!specs.is_empty(), "network needs at least one layer");
    for (i, pair) in specs.windows(2).enumerate() {
        if pair[1].n_in != pair[0].n_out {
            return Err(NetworkError::DimensionMismatch {
                index: i + 1,
                n_in: pair[1].n_in,
                prev_out: pair[0].n_out,
            });
        }
    }
    let mut layers = Vec::with_capacity(specs.len());
    for spec in specs {
        let weight = match &spec.init {
            InitScheme::Gaussian { sigma_w, .. } => {
                let std = sigma_w / (spec.n_in as f64).sqrt();
                sample_gaussian_matrix(rng, spec.n_out, spec.n_in, std)
            }
            InitScheme::StableRank {
                spec: sspec,
                method,
                ..
            } => {
                let sampler = sampler::lookup(method)
                    .ok_or_else(|| NetworkError::UnknownSampler(method.clone()))?;
                sampler::assemble_weight(rng, sspec, spec.n_out, spec.n_in, sampler)?
            }
            InitScheme::ScaledOrthogonal { scale, .. } => {
                let m = spec.n_out.min(spec.n_in);
                let values = vec![*scale; m];
                sampler::assemble_from_spectrum(rng, &values, spec.n_out, spec.n_in)
            }
        };
        let bias = if spec.include_bias {
            let sigma_b = spec.init.sigma_b();
            let mut b = vec![0.0; spec.n_out];
            if sigma_b > 0.0 {
                rng.fill_normal(&mut b, sigma_b);
            }
            Some(b)
        } else {
            None
        };
        layers.push(Layer {
            weight,
            bias,
            gamma: spec.gamma_mode.gamma(spec.n_in),
        });
    }
    Ok(Mlp { layers, activation })
}

/// Forward pass on a batch (rows are inputs). Returns the network output
/// (the final pre-activation) and the full trace.
pub fn forward(net: &Mlp, x: &Matrix) -> (Matrix, ForwardTrace) {
    assert_eq!(
        x.cols(),
        net.input_dim(),
        "input dimension does not match the first layer"
    );
    let depth = net.depth();
    let mut pre_activations = Vec::with_capacity(depth);
    let mut post_activations = Vec::with_capacity(depth);
    let mut current = x.clone();
    for (l, layer) in net.layers.iter().enumerate() {
        let mut pre = current.matmul_transb(&layer.weight);
        if layer.gamma != 1.0 {
            pre.scale_in_place(layer.gamma);
        }
        if let Some(b) = &layer.bias {
            for i in 0..pre.rows() {
                let row = pre.row_mut(i);
                for (v, bv) in row.iter_mut().zip(b) {
                    *v += bv;
                }
            }
        }
        let post = {
            let mut p = pre.clone();
            for v in p.data_mut() {
                *v = net.activation.phi(*v);
            }
            p
        };
        if l + 1 < depth {
            current = post.clone();
        }
        pre_activations.push(pre);
        post_activations.push(post);
    }
    let output = pre_activations.last().unwrap().clone();
    (
        output,
        ForwardTrace {
            pre_activations,
            post_activations,
        },
    )
}

/// Capacity proxy ∏ₗ ‖Wˡ‖₂² · Σₗ srank(Wˡ). Errors on an all-zero layer,
/// whose stable rank is undefined.
pub fn capacity_proxy(net: &Mlp) -> Result<f64, NetworkError> {
    let mut prod = 1.0;
    let mut sum = 0.0;
    for layer in &net.layers {
        let s = spectral_norm(&layer.weight);
        prod *= s * s;
        sum += stable_rank(&layer.weight)?;
    }
    Ok(prod * sum)
}

/// Large-width limit of srank(W)/n_out for an i.i.d. Gaussian n_out×n_in
/// matrix with aspect ratio α = n_in/n_out ∈ (0, 1]: α/(1+√α)².
pub fn gaussian_srank_ratio(n_out: usize, n_in: usize) -> f64 {
    assert!(
        n_in <= n_out && n_in >= 1,
        "aspect ratio must satisfy n_in ≤ n_out"
    );
    let alpha = n_in as f64 / n_out as f64;
    alpha / (1.0 + alpha.sqrt()).powi(2)
}

/// Convenience: a scaled-orthogonal layer is what the stable-rank samplers
/// degenerate to at r_t = min dimension; `scale` plays the role of s_t.
pub fn orthogonal_layer(rng: &mut SeedRng, n: usize, scale: f64) -> Matrix {
    let q = sample_haar_frame(rng, n, n);
    q.scaled(scale)
}
