//! Large-width limit kernels: the GP covariance recursion, the NTK
//! recursion, kernel ridge regression and eigenspectrum analysis.
//!
//! For layers with target spectra (r_l, s_l) the covariance of the limiting
//! centered Gaussian process obeys
//!
//!   Σ¹(x,x′) = s₁²r₁/(N₀N₁)·⟨x,x′⟩ + σ_b²,
//!   Σˡ(x,x′) = s_l²r_l/(N_{l−1}N_l)·E_{f∼N(0,Σˡ⁻¹)}[φ(f(x))φ(f(x′))] + σ_b²,
//!
//! and the limiting tangent kernel obeys
//!
//!   Θ¹(x,x′) = (γ¹)²⟨x,x′⟩ + c_b,
//!   Θˡ(x,x′) = (γˡ)²·(r_l s_l²/N_l)·Θˡ⁻¹(x,x′)·Σ̇ˡ(x,x′) + Σˡ(x,x′),
//!
//! with Σ̇ the pair expectation of φ′ and c_b the bias contribution of the
//! first layer (1 by default). Both recursions are implemented exactly as
//! stated; the per-layer geometry carries widths and γ explicitly so either
//! normalization convention can be expressed, and the finite-width
//! comparisons in the test suites pin the convention empirically.

mod empirical;

pub use empirical::{
    empirical_ntk, empirical_ntk_scalar, ntk_block_masses, ntk_training_drift, EmpiricalNtk,
};

use crate::activation::Activation;
use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::quadrature::{GaussQuadrature, QuadratureError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("covariance lost positive semi-definiteness at layer {layer} (min eigenvalue {min_eig})")]
    PsdViolation { layer: usize, min_eig: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
}

/// Width and spectrum data for one layer of the limit recursions.
#[derive(Clone, Copy, Debug)]
pub struct LayerGeom {
    /// Fan-in N_{l−1}.
    pub n_in: usize,
    /// Fan-out N_l.
    pub n_out: usize,
    /// Stable-rank target r_l.
    pub r: f64,
    /// Spectral-norm target s_l.
    pub s: f64,
    /// Normalization γ_l (enters the NTK recursion only).
    pub gamma: f64,
    /// Bias scale σ_b of this layer.
    pub sigma_b: f64,
}

impl LayerGeom {
    /// s²r/(N_{l−1}·N_l), the covariance-recursion prefactor.
    pub fn sigma_prefactor(&self) -> f64 {
        self.s * self.s * self.r / (self.n_in as f64 * self.n_out as f64)
    }

    /// (γ_l)²·r·s²/N_l, the NTK propagation prefactor.
    pub fn theta_prefactor(&self) -> f64 {
        self.gamma * self.gamma * self.r * self.s * self.s / self.n_out as f64
    }
}

/// Gaussian pair moments of one activation at a fixed quadrature order.
pub struct ActivationMoments {
    activation: &'static dyn Activation,
    quad: GaussQuadrature,
}

/// Which function of the activation a pair expectation integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairFn {
    Phi,
    DPhi,
}

pub const DEFAULT_QUADRATURE_ORDER: usize = 40;

impl ActivationMoments {
    pub fn new(activation: &'static dyn Activation, order: usize) -> Self {
        assert!(order >= 8, "quadrature order must be at least 8");
        ActivationMoments {
            activation,
            quad: GaussQuadrature::new(order),
        }
    }

    pub fn with_default_order(activation: &'static dyn Activation) -> Self {
        Self::new(activation, DEFAULT_QUADRATURE_ORDER)
    }

    pub fn activation(&self) -> &'static dyn Activation {
        self.activation
    }

    pub fn order(&self) -> usize {
        self.quad.order()
    }

    /// E[φ(z₁)φ(z₂)] under N(0, [[q11,q12],[q12,q22]]).
    pub fn e_phi_phi(&self, q11: f64, q22: f64, q12: f64) -> Result<f64, QuadratureError> {
        self.quad
            .pair_expectation_with_kinks(q11, q22, q12, self.activation.kinks(), |z| {
                self.activation.phi(z)
            })
    }

    /// E[φ′(z₁)φ′(z₂)].
    pub fn e_dphi_dphi(&self, q11: f64, q22: f64, q12: f64) -> Result<f64, QuadratureError> {
        self.quad
            .pair_expectation_with_kinks(q11, q22, q12, self.activation.kinks(), |z| {
                self.activation.d_phi(z)
            })
    }

    /// E[φ(√q·z)²].
    pub fn e_phi_sq(&self, q: f64) -> Result<f64, QuadratureError> {
        self.quad
            .scaled_expectation_with_kinks(q, self.activation.kinks(), |z| {
                let p = self.activation.phi(z);
                p * p
            })
    }

    /// E[φ′(√q·z)²].
    pub fn e_dphi_sq(&self, q: f64) -> Result<f64, QuadratureError> {
        self.quad
            .scaled_expectation_with_kinks(q, self.activation.kinks(), |z| {
                let p = self.activation.d_phi(z);
                p * p
            })
    }

    /// E[φ″(√q·z)²].
    pub fn e_ddphi_sq(&self, q: f64) -> Result<f64, QuadratureError> {
        self.quad
            .scaled_expectation_with_kinks(q, self.activation.kinks(), |z| {
                let p = self.activation.dd_phi(z);
                p * p
            })
    }
}

/// E[g(z₁)g(z₂)] for g = φ or φ′ of the moments' activation, under the
/// covariance [[q11,q12],[q12,q22]].
pub fn gaussian_pair_expectation(
    q11: f64,
    q22: f64,
    q12: f64,
    g: PairFn,
    moments: &ActivationMoments,
) -> Result<f64, KernelError> {
    let v = match g {
        PairFn::Phi => moments.e_phi_phi(q11, q22, q12)?,
        PairFn::DPhi => moments.e_dphi_dphi(q11, q22, q12)?,
    };
    Ok(v)
}

/// Kernel values over a fixed point set after some number of layers.
#[derive(Clone, Debug)]
pub struct KernelState {
    pub inputs: Matrix,
    /// Σ at this depth, n×n.
    pub sigma: Matrix,
    /// Θ at this depth when the NTK recursion produced this state.
    pub theta: Option<Matrix>,
    /// 1-based layer index.
    pub layer_index: usize,
}

impl KernelState {
    /// Symmetry to 1e-12 and PSD of Σ to eigenvalue tolerance −1e-9·scale.
    pub fn validate(&self) -> Result<(), KernelError> {
        check_symmetric_psd(&self.sigma, self.layer_index)?;
        if let Some(theta) = &self.theta {
            check_symmetric_psd(theta, self.layer_index)?;
        }
        Ok(())
    }
}

fn check_symmetric_psd(m: &Matrix, layer: usize) -> Result<(), KernelError> {
    let scale = m.max_abs().max(1e-300);
    for i in 0..m.rows() {
        for j in (i + 1)..m.cols() {
            if (m.get(i, j) - m.get(j, i)).abs() > 1e-12 * scale {
                return Err(KernelError::ShapeMismatch(format!(
                    "kernel not symmetric at ({i},{j}) in layer {layer}"
                )));
            }
        }
    }
    let evals = symmetric_eigenvalues(m)?;
    let min_eig = evals.last().copied().unwrap_or(0.0);
    if min_eig < -1e-9 * scale {
        return Err(KernelError::PsdViolation { layer, min_eig });
    }
    Ok(())
}

/// Gram matrix of the rows of `points`.
fn gram(points: &Matrix) -> Matrix {
    points.matmul_transb(points)
}

/// Run the covariance recursion over all layers, returning one state per
/// layer (layer_index 1..=L).
pub fn gp_covariance_recursion(
    points: &Matrix,
    geometry: &[LayerGeom],
    moments: &ActivationMoments,
) -> Result<Vec<KernelState>, KernelError> {
    assert!(!geometry.is_empty(), "need at least one layer");
    if geometry[0].n_in != points.cols() {
        return Err(KernelError::ShapeMismatch(format!(
            "points live in R^{} but the first layer has fan-in {}",
            points.cols(),
            geometry[0].n_in
        )));
    }
    let n = points.rows();
    let g0 = gram(points);
    let mut states: Vec<KernelState> = Vec::with_capacity(geometry.len());

    for (idx, layer) in geometry.iter().enumerate() {
        let sigma = if idx == 0 {
            let pref = layer.sigma_prefactor();
            Matrix::from_fn(n, n, |i, j| {
                pref * g0.get(i, j) + layer.sigma_b * layer.sigma_b
            })
        } else {
            let prev = &states[idx - 1].sigma;
            let pref = layer.sigma_prefactor();
            let mut sigma = Matrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let e =
                        moments.e_phi_phi(prev.get(i, i), prev.get(j, j), prev.get(i, j))?;
                    let v = pref * e + layer.sigma_b * layer.sigma_b;
                    sigma.set(i, j, v);
                    sigma.set(j, i, v);
                }
            }
            sigma
        };
        let state = KernelState {
            inputs: points.clone(),
            sigma,
            theta: None,
            layer_index: idx + 1,
        };
        state.validate().map_err(|e| match e {
            KernelError::PsdViolation { min_eig, .. } => KernelError::PsdViolation {
                layer: idx + 1,
                min_eig,
            },
            other => other,
        })?;
        states.push(state);
    }
    Ok(states)
}

/// NTK recursion with the default first-layer bias contribution of 1.
pub fn ntk_recursion(
    points: &Matrix,
    geometry: &[LayerGeom],
    moments: &ActivationMoments,
) -> Result<KernelState, KernelError> {
    ntk_recursion_with_bias(points, geometry, moments, 1.0)
}

/// NTK recursion; `bias_term` is the additive constant of the depth-1 base
/// case (the covariance recursion keeps its own σ_b²).
pub fn ntk_recursion_with_bias(
    points: &Matrix,
    geometry: &[LayerGeom],
    moments: &ActivationMoments,
    bias_term: f64,
) -> Result<KernelState, KernelError> {
    let mut states = ntk_recursion_states(points, geometry, moments, bias_term)?;
    Ok(states.pop().expect("geometry is nonempty"))
}

/// Per-layer states of the NTK recursion, each carrying both Σ and Θ.
pub fn ntk_recursion_states(
    points: &Matrix,
    geometry: &[LayerGeom],
    moments: &ActivationMoments,
    bias_term: f64,
) -> Result<Vec<KernelState>, KernelError> {
    let mut states = gp_covariance_recursion(points, geometry, moments)?;
    let n = points.rows();
    let g0 = gram(points);
    let gamma1 = geometry[0].gamma;
    let mut theta = Matrix::from_fn(n, n, |i, j| gamma1 * gamma1 * g0.get(i, j) + bias_term);
    states[0].theta = Some(theta.clone());

    for (idx, layer) in geometry.iter().enumerate().skip(1) {
        let prev_sigma = states[idx - 1].sigma.clone();
        let this_sigma = &states[idx].sigma;
        let pref = layer.theta_prefactor();
        let mut next = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let sdot = moments.e_dphi_dphi(
                    prev_sigma.get(i, i),
                    prev_sigma.get(j, j),
                    prev_sigma.get(i, j),
                )?;
                let v = pref * theta.get(i, j) * sdot + this_sigma.get(i, j);
                next.set(i, j, v);
                next.set(j, i, v);
            }
        }
        theta = next;
        states[idx].theta = Some(theta.clone());
    }
    for state in &states {
        state.validate()?;
    }
    Ok(states)
}

/// Kernel ridge regression through the NTK.
#[derive(Clone, Debug)]
pub struct NtkRegression {
    pub predictions: Matrix,
    /// λ_max/λ_min of the regularized train kernel.
    pub condition_estimate: f64,
    /// Set when the system is ill-conditioned beyond 1e12.
    pub warning: Option<String>,
}

pub const DEFAULT_RIDGE: f64 = 1e-8;

/// predictions = Θ_cross · (Θ_train + λI)⁻¹ · y_train.
pub fn ntk_regression(
    theta_train: &Matrix,
    theta_cross: &Matrix,
    y_train: &Matrix,
    ridge: f64,
) -> Result<NtkRegression, KernelError> {
    let n = theta_train.rows();
    if theta_train.cols() != n {
        return Err(KernelError::ShapeMismatch(
            "train kernel must be square".into(),
        ));
    }
    if theta_cross.cols() != n || y_train.rows() != n {
        return Err(KernelError::ShapeMismatch(format!(
            "cross kernel {}×{} / labels {}×{} incompatible with n = {n}",
            theta_cross.rows(),
            theta_cross.cols(),
            y_train.rows(),
            y_train.cols()
        )));
    }
    let mut reg = theta_train.clone();
    for i in 0..n {
        let v = reg.get(i, i) + ridge;
        reg.set(i, i, v);
    }
    let evals = symmetric_eigenvalues(&reg)?;
    let max = evals.first().copied().unwrap_or(0.0);
    let min = evals.last().copied().unwrap_or(0.0);
    let condition_estimate = if min > 0.0 { max / min } else { f64::INFINITY };
    let warning = (condition_estimate > 1e12).then(|| {
        format!("train kernel condition estimate {condition_estimate:.3e} exceeds 1e12")
    });
    let alpha = crate::linalg::cholesky_solve(&reg, y_train)?;
    Ok(NtkRegression {
        predictions: theta_cross.matmul(&alpha),
        condition_estimate,
        warning,
    })
}

/// Eigenvalues of a kernel matrix, non-increasing.
pub fn ntk_eigenspectrum(theta: &Matrix) -> Result<Vec<f64>, KernelError> {
    if theta.rows() != theta.cols() {
        return Err(KernelError::ShapeMismatch(
            "eigenspectrum needs a square kernel".into(),
        ));
    }
    Ok(symmetric_eigenvalues(theta)?)
}

#[cfg(test)]
mod tests;
