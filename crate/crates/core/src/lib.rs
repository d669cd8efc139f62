//! Numerical core for stable-rank constrained random deep networks.
//!
//! The crate is organized around a handful of strategy families, each behind
//! a trait with a by-name registry so experiment configs can select variants
//! at runtime:
//!
//! * [`sampler`] — singular-spectrum samplers (`sphere`, `cube`) that draw
//!   diagonal spectra with prescribed stable rank and spectral norm, plus
//!   full weight assembly `W = U Σ Vᵀ` over Haar-orthogonal factors and the
//!   spectrum-renormalizing projection used in constrained training.
//! * [`activation`] — activation functions (`identity`, `relu`, `tanh`,
//!   `erf`, `hardtanh`) with first and second derivatives.
//! * [`network`] — finite-width MLPs: initialization schemes, forward pass,
//!   reverse-mode gradients, SGD training with optional per-step stable-rank
//!   projection.
//! * [`kernels`] — the large-width limit objects: GP covariance recursion,
//!   NTK recursion, empirical NTK of a finite net, kernel ridge regression
//!   and eigenspectrum analysis.
//! * [`geometry`] — propagation of lengths, correlations and curvature of
//!   curves through deep layers, and discrete curve measurement.
//!
//! Everything is built on [`linalg`] (dense f64 matrices, QR, one-sided
//! Jacobi SVD, subspace iteration) and [`quadrature`] (Gauss–Hermite rules
//! for Gaussian expectations). All randomness flows through [`rng::SeedRng`];
//! there is no global RNG state anywhere.

pub mod activation;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod network;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod special;

pub use linalg::Matrix;
pub use rng::SeedRng;
