//! Activation functions behind a common trait, registered by name.
//!
//! Config files and checkpoints refer to activations by their registry name;
//! [`lookup`] resolves the name to a `&'static dyn Activation`.

use crate::special::erf;

pub trait Activation: Sync + Send {
    fn name(&self) -> &'static str;
    fn phi(&self, x: f64) -> f64;
    /// φ′, pointwise (a.e. for the piecewise-linear members).
    fn d_phi(&self, x: f64) -> f64;
    /// φ″, pointwise a.e.
    fn dd_phi(&self, x: f64) -> f64;
    /// Whether the curvature recursion accepts this activation. ReLU is
    /// excluded: its second derivative is a point mass, not a function.
    fn supports_curvature(&self) -> bool {
        true
    }
    /// Argument positions where φ or its derivatives lose smoothness;
    /// quadrature aligns panel boundaries to these.
    fn kinks(&self) -> &'static [f64] {
        &[]
    }
    fn is_odd(&self) -> bool;
}

pub struct Identity;
pub struct Relu;
pub struct TanhAct;
pub struct ErfAct;
pub struct HardTanh;

impl Activation for Identity {
    fn name(&self) -> &'static str {
        "identity"
    }
    fn phi(&self, x: f64) -> f64 {
        x
    }
    fn d_phi(&self, _x: f64) -> f64 {
        1.0
    }
    fn dd_phi(&self, _x: f64) -> f64 {
        0.0
    }
    fn is_odd(&self) -> bool {
        true
    }
}

impl Activation for Relu {
    fn name(&self) -> &'static str {
        "relu"
    }
    fn phi(&self, x: f64) -> f64 {
        x.max(0.0)
    }
    fn d_phi(&self, x: f64) -> f64 {
        if x > 0.0 {
            1.0
        } else {
            0.0
        }
    }
    fn dd_phi(&self, _x: f64) -> f64 {
        0.0
    }
    fn supports_curvature(&self) -> bool {
        false
    }
    fn kinks(&self) -> &'static [f64] {
        &[0.0]
    }
    fn is_odd(&self) -> bool {
        false
    }
}

impl Activation for TanhAct {
    fn name(&self) -> &'static str {
        "tanh"
    }
    fn phi(&self, x: f64) -> f64 {
        x.tanh()
    }
    fn d_phi(&self, x: f64) -> f64 {
        let t = x.tanh();
        1.0 - t * t
    }
    fn dd_phi(&self, x: f64) -> f64 {
        let t = x.tanh();
        -2.0 * t * (1.0 - t * t)
    }
    fn is_odd(&self) -> bool {
        true
    }
}

/// φ(x) = erf(x/√2): a smooth bounded sigmoid whose Gaussian pair moments
/// have arcsine closed forms, which the tests use as oracles.
impl Activation for ErfAct {
    fn name(&self) -> &'static str {
        "erf"
    }
    fn phi(&self, x: f64) -> f64 {
        erf(x / std::f64::consts::SQRT_2)
    }
    fn d_phi(&self, x: f64) -> f64 {
        (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * x * x).exp()
    }
    fn dd_phi(&self, x: f64) -> f64 {
        -x * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * x * x).exp()
    }
    fn is_odd(&self) -> bool {
        true
    }
}

impl Activation for HardTanh {
    fn name(&self) -> &'static str {
        "hardtanh"
    }
    fn phi(&self, x: f64) -> f64 {
        x.clamp(-1.0, 1.0)
    }
    fn d_phi(&self, x: f64) -> f64 {
        if x.abs() < 1.0 {
            1.0
        } else {
            0.0
        }
    }
    fn dd_phi(&self, _x: f64) -> f64 {
        0.0
    }
    fn kinks(&self) -> &'static [f64] {
        &[-1.0, 1.0]
    }
    fn is_odd(&self) -> bool {
        true
    }
}

pub static IDENTITY: Identity = Identity;
pub static RELU: Relu = Relu;
pub static TANH: TanhAct = TanhAct;
pub static ERF: ErfAct = ErfAct;
pub static HARDTANH: HardTanh = HardTanh;

/// All registered activations.
pub static REGISTRY: [&'static dyn Activation; 5] = [&IDENTITY, &RELU, &TANH, &ERF, &HARDTANH];

/// Resolve an activation by its registry name.
pub fn lookup(name: &str) -> Option<&'static dyn Activation> {
    REGISTRY.iter().copied().find(|a| a.name() == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lookup() {
        for name in ["identity", "relu", "tanh", "erf", "hardtanh"] {
            assert_eq!(lookup(name).unwrap().name(), name);
        }
        assert!(lookup("swish").is_none());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for act in REGISTRY {
            for &x in &[-2.3f64, -0.4, 0.2, 1.7] {
                // skip kink neighborhoods of the piecewise members
                if !act.supports_curvature() || act.name() == "hardtanh" {
                    if (x.abs() - 1.0).abs() < 0.1 || x.abs() < 0.1 {
                        continue;
                    }
                }
                let num_d = (act.phi(x + h) - act.phi(x - h)) / (2.0 * h);
                assert!(
                    (num_d - act.d_phi(x)).abs() < 1e-6,
                    "{} φ' at {x}",
                    act.name()
                );
                let num_dd = (act.d_phi(x + h) - act.d_phi(x - h)) / (2.0 * h);
                assert!(
                    (num_dd - act.dd_phi(x)).abs() < 1e-5,
                    "{} φ'' at {x}",
                    act.name()
                );
            }
        }
    }

    #[test]
    fn oddness_flags() {
        for act in REGISTRY {
            if act.is_odd() {
                for &x in &[0.3, 1.2, 2.5] {
                    assert!((act.phi(-x) + act.phi(x)).abs() < 1e-15, "{}", act.name());
                }
            }
        }
        assert!(!RELU.is_odd());
    }
}
