//! Empirical NTK of a finite network and its drift along training.

use super::KernelError;
use crate::linalg::{dot, frobenius_norm, Matrix};
use crate::network::{forward, train, Mlp, TrainConfig, TrainHistory};

/// Empirical tangent kernel over `n` points and `k` outputs, stored dense
/// with row index i·k_outputs + output.
#[derive(Clone, Debug)]
pub struct EmpiricalNtk {
    pub matrix: Matrix,
    pub n_points: usize,
    pub n_outputs: usize,
}

impl EmpiricalNtk {
    #[inline]
    pub fn entry(&self, i: usize, k: usize, j: usize, kp: usize) -> f64 {
        self.matrix
            .get(i * self.n_outputs + k, j * self.n_outputs + kp)
    }
}

/// Θ_{(i,k),(j,k′)} = Σ_p ∂f_k(x_i)/∂θ_p · ∂f_{k′}(x_j)/∂θ_p with exact
/// reverse-mode output gradients.
///
/// The parameter sum factorizes per layer: with δ the sensitivity of an
/// output to the layer's pre-activation and α the activations below, the
/// layer contributes ⟨δ, δ′⟩·(γ²⟨α, α′⟩ + [has bias]). The kernel is
/// assembled from those per-layer Gram products, never materializing a
/// Jacobian.
pub fn empirical_ntk(net: &Mlp, points: &Matrix) -> EmpiricalNtk {
    let n = points.rows();
    let k_out = net.output_dim();
    let depth = net.depth();
    let (_, trace) = forward(net, points);

    // activation grams per layer: γ²·⟨below_i, below_j⟩ + bias flag
    let mut act_grams: Vec<Matrix> = Vec::with_capacity(depth);
    for l in 0..depth {
        let below: &Matrix = if l == 0 {
            points
        } else {
            &trace.post_activations[l - 1]
        };
        let gamma = net.layers[l].gamma;
        let bias_term = if net.layers[l].bias.is_some() { 1.0 } else { 0.0 };
        let mut g = below.matmul_transb(below);
        for v in g.data_mut() {
            *v = gamma * gamma * *v + bias_term;
        }
        act_grams.push(g);
    }

    // sensitivities per output coordinate: deltas[k][l] is n × N_l
    let mut deltas: Vec<Vec<Matrix>> = Vec::with_capacity(k_out);
    for k in 0..k_out {
        let mut per_layer = vec![Matrix::zeros(1, 1); depth];
        let mut delta = Matrix::from_fn(n, k_out, |_i, j| if j == k { 1.0 } else { 0.0 });
        per_layer[depth - 1] = delta.clone();
        for l in (1..depth).rev() {
            let layer = &net.layers[l];
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
            per_layer[l - 1] = back.clone();
            delta = back;
        }
        deltas.push(per_layer);
    }

    let dim = n * k_out;
    let mut theta = Matrix::zeros(dim, dim);
    for l in 0..depth {
        for k in 0..k_out {
            for kp in k..k_out {
                // Gram of sensitivities over points
                let dk = &deltas[k][l];
                let dkp = &deltas[kp][l];
                for i in 0..n {
                    let j_start = if k == kp { i } else { 0 };
                    for j in j_start..n {
                        let contrib = dot(dk.row(i), dkp.row(j)) * act_grams[l].get(i, j);
                        let r = i * k_out + k;
                        let c = j * k_out + kp;
                        let v = theta.get(r, c) + contrib;
                        theta.set(r, c, v);
                        if r != c {
                            theta.set(c, r, v);
                        }
                    }
                }
            }
        }
    }
    EmpiricalNtk {
        matrix: theta,
        n_points: n,
        n_outputs: k_out,
    }
}

/// Scalar kernel: average of the diagonal output blocks,
/// (1/K)·Σ_k Θ_{(i,k),(j,k)}.
pub fn empirical_ntk_scalar(net: &Mlp, points: &Matrix) -> Matrix {
    let ntk = empirical_ntk(net, points);
    let n = ntk.n_points;
    let k_out = ntk.n_outputs;
    Matrix::from_fn(n, n, |i, j| {
        (0..k_out).map(|k| ntk.entry(i, k, j, k)).sum::<f64>() / k_out as f64
    })
}

/// Frobenius mass of the diagonal output blocks and of everything else.
/// In the large-width limit the kernel tends to Θ_∞ ⊗ Id, so the
/// off-diagonal share tends to zero.
pub fn ntk_block_masses(ntk: &EmpiricalNtk) -> (f64, f64) {
    let mut diag_sq = 0.0;
    let mut off_sq = 0.0;
    for i in 0..ntk.n_points {
        for k in 0..ntk.n_outputs {
            for j in 0..ntk.n_points {
                for kp in 0..ntk.n_outputs {
                    let v = ntk.entry(i, k, j, kp);
                    if k == kp {
                        diag_sq += v * v;
                    } else {
                        off_sq += v * v;
                    }
                }
            }
        }
    }
    (diag_sq.sqrt(), off_sq.sqrt())
}

/// Train (plain or projected per the config) while recording the relative
/// Frobenius drift ‖Θ_t − Θ_0‖_F / ‖Θ_0‖_F of the empirical NTK at every
/// checkpoint. Returns (step, drift) pairs, plus the underlying history.
pub fn ntk_training_drift(
    net: &mut Mlp,
    inputs: &Matrix,
    targets: &Matrix,
    cfg: &TrainConfig,
    checkpoint_every: usize,
) -> Result<(Vec<(usize, f64)>, TrainHistory), KernelError> {
    assert!(checkpoint_every >= 1);
    let theta0 = empirical_ntk(net, inputs).matrix;
    let norm0 = frobenius_norm(&theta0).max(1e-300);
    let mut drifts = vec![(0usize, 0.0f64)];
    let mut history = TrainHistory::default();
    let mut done = 0usize;
    while done < cfg.steps {
        let chunk = checkpoint_every.min(cfg.steps - done);
        let mut sub = cfg.clone();
        sub.steps = chunk;
        sub.seed = cfg.seed.wrapping_add(done as u64);
        let path_offset = history.total_path_length();
        let mut h = train(net, inputs, targets, &sub)?;
        for rec in &mut h.records {
            rec.step += done;
            rec.path_length += path_offset;
        }
        history.records.extend(h.records);
        done += chunk;
        let theta_t = empirical_ntk(net, inputs).matrix;
        let drift = frobenius_norm(&theta_t.sub(&theta0)) / norm0;
        drifts.push((done, drift));
    }
    Ok((drifts, history))
}
