//! Losses, reverse-mode gradients and SGD training with optional per-step
//! stable-rank projection.

use super::{forward, ForwardTrace, Mlp, NetworkError};
use crate::linalg::{dot, frobenius_norm, Matrix};
use crate::rng::SeedRng;
use crate::sampler::{project_stable_rank_cached, ProjectionCache, SpectrumSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    SquaredError,
    SoftmaxCrossEntropy,
}

#[derive(Clone, Debug)]
pub enum Projection {
    None,
    /// Project each layer after every step; `None` entries skip that layer.
    StableRank(Vec<Option<SpectrumSpec>>),
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub projection: Projection,
    pub loss: Loss,
    pub seed: u64,
    /// Reshuffle the sample order every epoch (seeded). Irrelevant for
    /// full-batch runs.
    pub shuffle: bool,
    /// L1 penalty coefficient on the weights (0 disables the penalty path
    /// entirely, leaving plain SGD bit-identical).
    pub l1: f64,
    /// L2 penalty coefficient on the weights.
    pub l2: f64,
    /// Measure per-layer srank/spectral norm every this many steps (1 =
    /// every step); intermediate records carry the last measured values.
    pub stats_every: usize,
}

impl TrainConfig {
    pub fn full_batch(learning_rate: f64, steps: usize, loss: Loss, seed: u64) -> Self {
        TrainConfig {
            learning_rate,
            steps,
            batch_size: usize::MAX,
            projection: Projection::None,
            loss,
            seed,
            shuffle: false,
            l1: 0.0,
            l2: 0.0,
            stats_every: 1,
        }
    }
}

/// Mean loss over the batch: squared error sums over output coordinates and
/// averages over rows; cross entropy applies a row-wise stabilized softmax
/// against one-hot (or soft) targets.
pub fn loss_value(output: &Matrix, targets: &Matrix, loss: Loss) -> f64 {
    assert_eq!(output.rows(), targets.rows());
    assert_eq!(output.cols(), targets.cols());
    let batch = output.rows() as f64;
    match loss {
        Loss::SquaredError => {
            let mut total = 0.0;
            for i in 0..output.rows() {
                for (o, t) in output.row(i).iter().zip(targets.row(i)) {
                    total += (o - t) * (o - t);
                }
            }
            total / batch
        }
        Loss::SoftmaxCrossEntropy => {
            let mut total = 0.0;
            for i in 0..output.rows() {
                let row = output.row(i);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                for (o, t) in row.iter().zip(targets.row(i)) {
                    if *t != 0.0 {
                        total -= t * (o - lse);
                    }
                }
            }
            total / batch
        }
    }
}

/// ∂(mean loss)/∂output.
fn loss_output_gradient(output: &Matrix, targets: &Matrix, loss: Loss) -> Matrix {
    let batch = output.rows() as f64;
    match loss {
        Loss::SquaredError => Matrix::from_fn(output.rows(), output.cols(), |i, j| {
            2.0 * (output.get(i, j) - targets.get(i, j)) / batch
        }),
        Loss::SoftmaxCrossEntropy => {
            let mut g = Matrix::zeros(output.rows(), output.cols());
            for i in 0..output.rows() {
                let row = output.row(i);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let denom: f64 = row.iter().map(|v| (v - max).exp()).sum();
                for j in 0..output.cols() {
                    let p = (output.get(i, j) - max).exp() / denom;
                    g.set(i, j, (p - targets.get(i, j)) / batch);
                }
            }
            g
        }
    }
}

/// Exact reverse-accumulation gradients of the mean loss over the batch.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Option<Vec<f64>>>,
}

pub fn gradient(net: &Mlp, x: &Matrix, targets: &Matrix, loss: Loss) -> Gradients {
    let (output, trace) = forward(net, x);
    gradient_from_trace(net, x, &trace, &loss_output_gradient(&output, targets, loss))
}

/// Backpropagate a given ∂L/∂output through a recorded trace.
pub(crate) fn gradient_from_trace(
    net: &Mlp,
    x: &Matrix,
    trace: &ForwardTrace,
    output_grad: &Matrix,
) -> Gradients {
    let depth = net.depth();
    let mut weights = vec![Matrix::zeros(1, 1); depth];
    let mut biases: Vec<Option<Vec<f64>>> = vec![None; depth];

    // delta = ∂L/∂(pre-activation of layer l), batch × n_l
    let mut delta = output_grad.clone();
    for l in (0..depth).rev() {
        let layer = &net.layers[l];
        let below: &Matrix = if l == 0 {
            x
        } else {
            &trace.post_activations[l - 1]
        };
        // ∂L/∂W = γ · deltaᵀ · below
        let mut wgrad = delta.transpose().matmul(below);
        if layer.gamma != 1.0 {
            wgrad.scale_in_place(layer.gamma);
        }
        weights[l] = wgrad;
        if layer.bias.is_some() {
            let mut b = vec![0.0; delta.cols()];
            for i in 0..delta.rows() {
                for (bv, dv) in b.iter_mut().zip(delta.row(i)) {
                    *bv += dv;
                }
            }
            biases[l] = Some(b);
        }
        if l > 0 {
            // delta_{l-1} = γ·(delta · W) ∘ φ'(pre_{l-1})
            let mut back = delta.matmul(&layer.weight);
            if layer.gamma != 1.0 {
                back.scale_in_place(layer.gamma);
            }
            let pre_below = &trace.pre_activations[l - 1];
            for i in 0..back.rows() {
                let row = back.row_mut(i);
                for (j, v) in row.iter_mut().enumerate() {
                    *v *= net.activation.d_phi(pre_below.get(i, j));
                }
            }
            delta = back;
        }
    }
    Gradients { weights, biases }
}

#[derive(Clone, Copy, Debug)]
pub struct LayerStats {
    pub srank: f64,
    pub spectral_norm: f64,
}

#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: usize,
    /// Minibatch loss at the gradient evaluation (before the update).
    pub loss: f64,
    /// Per-layer stats measured after the update (and projection, if any).
    pub layers: Vec<LayerStats>,
    /// Cumulative parameter-space path length Σ‖θ_{t+1} − θ_t‖ up to and
    /// including this step, projection movement included.
    pub path_length: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainHistory {
    pub records: Vec<StepRecord>,
}

impl TrainHistory {
    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    pub fn total_path_length(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.path_length)
    }
}

/// Plain SGD (no momentum). With stable-rank projection enabled, every
/// affected weight is re-projected after every step, so the recorded
/// constraints hold at each recorded state. Loss turning non-finite aborts
/// with the offending step index.
pub fn train(
    net: &mut Mlp,
    inputs: &Matrix,
    targets: &Matrix,
    cfg: &TrainConfig,
) -> Result<TrainHistory, NetworkError> {
    if inputs.rows() != targets.rows() {
        return Err(NetworkError::BatchShape(format!(
            "{} input rows vs {} target rows",
            inputs.rows(),
            targets.rows()
        )));
    }
    if let Projection::StableRank(specs) = &cfg.projection {
        if specs.len() != net.depth() {
            return Err(NetworkError::BatchShape(format!(
                "projection spec list has {} entries for {} layers",
                specs.len(),
                net.depth()
            )));
        }
    }
    let n = inputs.rows();
    let batch_size = cfg.batch_size.min(n).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = SeedRng::substream(cfg.seed, 0xb47c);
    let mut cursor = 0usize;

    let mut history = TrainHistory::default();
    let mut path_length = 0.0f64;
    let mut proj_caches: Vec<ProjectionCache> = vec![ProjectionCache::default(); net.depth()];
    let mut stat_caches: Vec<Option<Vec<f64>>> = vec![None; net.depth()];
    let mut last_stats: Option<Vec<LayerStats>> = None;

    // initial projection so step-0 stats already satisfy the constraints
    if let Projection::StableRank(specs) = &cfg.projection {
        for (l, spec) in specs.iter().enumerate() {
            if let Some(spec) = spec {
                net.layers[l].weight =
                    project_stable_rank_cached(&net.layers[l].weight, spec, &mut proj_caches[l])?;
            }
        }
    }

    for step in 0..cfg.steps {
        // assemble the minibatch
        let (bx, by) = if batch_size == n {
            (inputs.clone(), targets.clone())
        } else {
            if cursor + batch_size > n {
                cursor = 0;
                if cfg.shuffle {
                    shuffle_rng.shuffle(&mut order);
                }
            }
            let rows: Vec<usize> = (cursor..cursor + batch_size).map(|i| order[i]).collect();
            cursor += batch_size;
            let bx = Matrix::from_fn(rows.len(), inputs.cols(), |i, j| inputs.get(rows[i], j));
            let by = Matrix::from_fn(rows.len(), targets.cols(), |i, j| targets.get(rows[i], j));
            (bx, by)
        };

        let (output, trace) = forward(net, &bx);
        let loss = loss_value(&output, &by, cfg.loss);
        if !loss.is_finite() {
            return Err(NetworkError::Diverged { step });
        }
        let grads = gradient_from_trace(
            net,
            &bx,
            &trace,
            &loss_output_gradient(&output, &by, cfg.loss),
        );

        // snapshot for the path-length increment
        let mut step_sq = 0.0f64;
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let old = layer.weight.clone();
            let g = &grads.weights[l];
            for (w, gv) in layer.weight.data_mut().iter_mut().zip(g.data()) {
                *w -= cfg.learning_rate * gv;
            }
            if cfg.l1 != 0.0 || cfg.l2 != 0.0 {
                // penalty gradients evaluated at the pre-update weights
                let lr = cfg.learning_rate;
                for (w, ow) in layer.weight.data_mut().iter_mut().zip(old.data()) {
                    let sign = if *ow > 0.0 {
                        1.0
                    } else if *ow < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    *w -= lr * (2.0 * cfg.l2 * ow + cfg.l1 * sign);
                }
            }
            if let Projection::StableRank(specs) = &cfg.projection {
                if let Some(spec) = &specs[l] {
                    layer.weight =
                        project_stable_rank_cached(&layer.weight, spec, &mut proj_caches[l])?;
                }
            }
            let diff = layer.weight.sub(&old);
            step_sq += dot(diff.data(), diff.data());
            if let (Some(b), Some(gb)) = (layer.bias.as_mut(), grads.biases[l].as_ref()) {
                for (bv, gv) in b.iter_mut().zip(gb) {
                    let upd = cfg.learning_rate * gv;
                    *bv -= upd;
                    step_sq += upd * upd;
                }
            }
        }
        path_length += step_sq.sqrt();

        let measure_now =
            (step + 1) % cfg.stats_every.max(1) == 0 || step + 1 == cfg.steps;
        let layer_stats = if measure_now {
            let stats: Vec<LayerStats> = net
                .layers
                .iter()
                .enumerate()
                .map(|(l, layer)| measure_layer(&layer.weight, &mut stat_caches[l]))
                .collect();
            last_stats = Some(stats.clone());
            stats
        } else {
            last_stats.clone().unwrap_or_else(|| {
                let stats: Vec<LayerStats> = net
                    .layers
                    .iter()
                    .enumerate()
                    .map(|(l, layer)| measure_layer(&layer.weight, &mut stat_caches[l]))
                    .collect();
                last_stats = Some(stats.clone());
                stats
            })
        };
        history.records.push(StepRecord {
            step,
            loss,
            layers: layer_stats,
            path_length,
        });
    }
    Ok(history)
}

/// Layer stats via a warm-started top-singular solve; the Frobenius part is
/// exact and cheap, so srank inherits the spectral accuracy.
fn measure_layer(w: &Matrix, cache: &mut Option<Vec<f64>>) -> LayerStats {
    if w.is_zero() {
        return LayerStats {
            srank: f64::NAN,
            spectral_norm: 0.0,
        };
    }
    let (sigma, _u, v) = crate::sampler::warm_top_singular_tol(w, cache.as_deref(), 1e-9);
    *cache = Some(v);
    let f = frobenius_norm(w);
    LayerStats {
        srank: (f / sigma) * (f / sigma),
        spectral_norm: sigma,
    }
}
