use super::*;
use crate::activation::{ERF, IDENTITY, TANH};
use crate::linalg::sample_gaussian_matrix;
use crate::network::{forward, GammaMode, InitScheme, LayerSpec, Mlp};
use crate::SeedRng;

fn geom(n_in: usize, n_out: usize, r: f64, s: f64, gamma: f64, sigma_b: f64) -> LayerGeom {
    LayerGeom {
        n_in,
        n_out,
        r,
        s,
        gamma,
        sigma_b,
    }
}

#[test]
fn pair_expectation_identity_is_covariance() {
    let m = ActivationMoments::with_default_order(&IDENTITY);
    let v = gaussian_pair_expectation(1.7, 0.9, -0.4, PairFn::Phi, &m).unwrap();
    assert!((v - (-0.4)).abs() < 1e-12);
}

#[test]
fn erf_pair_matches_arcsine_closed_form() {
    // For φ(z) = erf(z/√2): E[φ(z₁)φ(z₂)] = (2/π)·asin(q12/√((1+q11)(1+q22)))
    let m = ActivationMoments::with_default_order(&ERF);
    for (q11, q22, q12) in [
        (1.0, 1.0, 0.5),
        (0.5, 2.0, -0.3),
        (3.0, 3.0, 2.9),
        (1.2, 0.8, 0.0),
    ] {
        let got = gaussian_pair_expectation(q11, q22, q12, PairFn::Phi, &m).unwrap();
        let want =
            2.0 / std::f64::consts::PI * (q12 / ((1.0 + q11) * (1.0 + q22)).sqrt()).asin();
        assert!((got - want).abs() < 1e-6, "({q11},{q22},{q12}): {got} vs {want}");
    }
}

#[test]
fn erf_derivative_pair_matches_closed_form() {
    // E[φ′(z₁)φ′(z₂)] = (2/π)/√((1+q11)(1+q22) − q12²)
    let m = ActivationMoments::with_default_order(&ERF);
    for (q11, q22, q12) in [(1.0, 1.0, 0.4), (2.0, 0.7, -0.6)] {
        let got = gaussian_pair_expectation(q11, q22, q12, PairFn::DPhi, &m).unwrap();
        let want = 2.0 / std::f64::consts::PI
            / ((1.0 + q11) * (1.0 + q22) - q12 * q12).sqrt();
        assert!((got - want).abs() < 1e-6);
    }
}

#[test]
fn odd_activation_with_zero_correlation_vanishes() {
    let m = ActivationMoments::with_default_order(&TANH);
    let v = gaussian_pair_expectation(1.3, 0.6, 0.0, PairFn::Phi, &m).unwrap();
    assert!(v.abs() < 1e-12);
}

fn three_points() -> Matrix {
    Matrix::from_rows(&[
        vec![1.0, 0.5, -0.2, 0.8],
        vec![0.3, -0.9, 0.4, 0.1],
        vec![-0.5, 0.2, 0.7, -0.3],
    ])
}

#[test]
fn gp_zero_inputs_give_bias_variance() {
    let points = Matrix::zeros(2, 4);
    let g = vec![geom(4, 50, 3.0, 2.0, 1.0, 0.7)];
    let m = ActivationMoments::with_default_order(&ERF);
    let states = gp_covariance_recursion(&points, &g, &m).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!((states[0].sigma.get(i, j) - 0.49).abs() < 1e-14);
        }
    }
}

#[test]
fn gp_identity_activation_is_geometric() {
    // identity activation, σ_b = 0: Σˡ = (∏ prefactors)·⟨x,x′⟩ exactly
    let points = three_points();
    let g = vec![
        geom(4, 30, 3.0, 2.0, 1.0, 0.0),
        geom(30, 40, 5.0, 1.5, 1.0, 0.0),
        geom(40, 20, 2.0, 3.0, 1.0, 0.0),
    ];
    let m = ActivationMoments::with_default_order(&IDENTITY);
    let states = gp_covariance_recursion(&points, &g, &m).unwrap();
    let pref: f64 = g.iter().map(|l| l.sigma_prefactor()).product();
    let gram = points.matmul_transb(&points);
    for i in 0..3 {
        for j in 0..3 {
            let want = pref * gram.get(i, j);
            let got = states[2].sigma.get(i, j);
            assert!((got - want).abs() < 1e-10 * want.abs().max(1e-3));
        }
    }
}

#[test]
fn gp_diagonal_dominates_bias_and_is_symmetric() {
    let points = three_points();
    let g = vec![
        geom(4, 64, 4.0, 3.0, 1.0, 0.3),
        geom(64, 64, 6.0, 40.0, 1.0, 0.3),
        geom(64, 64, 6.0, 40.0, 1.0, 0.3),
    ];
    let m = ActivationMoments::with_default_order(&TANH);
    let states = gp_covariance_recursion(&points, &g, &m).unwrap();
    for st in &states {
        for i in 0..3 {
            assert!(st.sigma.get(i, i) >= 0.09 - 1e-12);
            for j in 0..3 {
                assert_eq!(st.sigma.get(i, j), st.sigma.get(j, i));
            }
        }
    }
}

#[test]
fn gp_linear_in_rs_squared_at_the_scaled_layer() {
    let points = three_points();
    let m = ActivationMoments::with_default_order(&TANH);
    let base = vec![
        geom(4, 64, 4.0, 3.0, 1.0, 0.25),
        geom(64, 64, 6.0, 10.0, 1.0, 0.25),
    ];
    let states = gp_covariance_recursion(&points, &base, &m).unwrap();
    let c = 2.75;
    let mut scaled = base.clone();
    scaled[1].r *= c;
    let states_c = gp_covariance_recursion(&points, &scaled, &m).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let lhs = states_c[1].sigma.get(i, j) - 0.0625;
            let rhs = c * (states[1].sigma.get(i, j) - 0.0625);
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
        }
    }
}

#[test]
fn quadrature_order_doubling_is_converged() {
    let points = three_points();
    let g = vec![
        geom(4, 64, 4.0, 6.0, 1.0 / 2.0, 0.3),
        geom(64, 64, 8.0, 25.0, 1.0 / 8.0, 0.3),
        geom(64, 64, 8.0, 25.0, 1.0 / 8.0, 0.3),
    ];
    for act in [&TANH as &'static dyn crate::activation::Activation, &ERF] {
        let m40 = ActivationMoments::new(act, DEFAULT_QUADRATURE_ORDER);
        let m80 = ActivationMoments::new(act, 2 * DEFAULT_QUADRATURE_ORDER);
        let a = ntk_recursion(&points, &g, &m40).unwrap();
        let b = ntk_recursion(&points, &g, &m80).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (a.sigma.get(i, j) - b.sigma.get(i, j)).abs() <= 1e-8,
                    "{} sigma", act.name()
                );
                let ta = a.theta.as_ref().unwrap().get(i, j);
                let tb = b.theta.as_ref().unwrap().get(i, j);
                assert!((ta - tb).abs() <= 1e-8, "{} theta", act.name());
            }
        }
    }
}

#[test]
fn ntk_depth_one_formula() {
    let points = three_points();
    let g = vec![geom(4, 16, 2.0, 1.0, 0.45, 0.9)];
    let m = ActivationMoments::with_default_order(&ERF);
    let state = ntk_recursion(&points, &g, &m).unwrap();
    let gram = points.matmul_transb(&points);
    let theta = state.theta.unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let want = 0.45 * 0.45 * gram.get(i, j) + 1.0;
            assert!((theta.get(i, j) - want).abs() < 1e-13);
        }
    }
}

#[test]
fn ntk_identity_activation_matches_affine_closed_form() {
    // identity activation: Σ̇ = 1, so Θˡ = pθˡ·Θˡ⁻¹ + Σˡ with
    // Σˡ = pσˡ·Σˡ⁻¹ + σ_b² — iterate both by hand.
    let points = three_points();
    let g = vec![
        geom(4, 32, 3.0, 2.0, 0.7, 0.4),
        geom(32, 24, 5.0, 1.2, 0.3, 0.1),
        geom(24, 48, 2.5, 2.2, 0.9, 0.2),
    ];
    let m = ActivationMoments::with_default_order(&IDENTITY);
    let state = ntk_recursion(&points, &g, &m).unwrap();
    let gram = points.matmul_transb(&points);
    for i in 0..3 {
        for j in 0..3 {
            let mut sigma = g[0].sigma_prefactor() * gram.get(i, j) + g[0].sigma_b * g[0].sigma_b;
            let mut theta = g[0].gamma * g[0].gamma * gram.get(i, j) + 1.0;
            for l in 1..3 {
                theta = g[l].theta_prefactor() * theta
                    + (g[l].sigma_prefactor() * sigma + g[l].sigma_b * g[l].sigma_b);
                sigma = g[l].sigma_prefactor() * sigma + g[l].sigma_b * g[l].sigma_b;
            }
            assert!((state.sigma.get(i, j) - sigma).abs() < 1e-10 * sigma.abs().max(1.0));
            let got = state.theta.as_ref().unwrap().get(i, j);
            assert!((got - theta).abs() < 1e-10 * theta.abs().max(1.0));
        }
    }
}

#[test]
fn ntk_first_term_scales_with_rs_squared() {
    let points = three_points();
    let m = ActivationMoments::with_default_order(&TANH);
    let mk = |r2: f64| {
        vec![
            geom(4, 64, 4.0, 3.0, 1.0, 0.2),
            geom(64, 64, r2, 10.0, 0.125, 0.2),
        ]
    };
    let a = ntk_recursion(&points, &mk(4.0), &m).unwrap();
    let b = ntk_recursion(&points, &mk(10.0), &m).unwrap();
    // Θ² − Σ² = pref·Θ¹·Σ̇², and pref is linear in r
    for i in 0..3 {
        for j in 0..3 {
            let ta = a.theta.as_ref().unwrap().get(i, j) - a.sigma.get(i, j);
            let tb = b.theta.as_ref().unwrap().get(i, j) - b.sigma.get(i, j);
            assert!((tb - ta * 10.0 / 4.0).abs() < 1e-10 * tb.abs().max(1.0));
        }
    }
}

#[test]
fn eigenspectrum_basics_and_capacity_sweep() {
    // Θ = I → all ones; scaling scales eigenvalues
    let eye = Matrix::identity(4);
    let e = ntk_eigenspectrum(&eye).unwrap();
    assert!(e.iter().all(|v| (v - 1.0).abs() < 1e-12));
    let e2 = ntk_eigenspectrum(&eye.scaled(3.5)).unwrap();
    assert!(e2.iter().all(|v| (v - 3.5).abs() < 1e-12));

    // shrink s²r = C·N_l/γ² through C: the top NTK eigenvalue shrinks with it
    let points = three_points();
    let m = ActivationMoments::with_default_order(&ERF);
    let n = 256usize;
    let mut prev = f64::INFINITY;
    for c in [1.0, 0.5, 0.1, 0.01] {
        // γ = 1/√n ⇒ s²r = C·n², split as r = 8, s = √(C·n²/8)
        let s_mid = (c * (n * n) as f64 / 8.0).sqrt();
        let g = vec![
            geom(4, n, 4.0, (c * (4 * n) as f64 / 4.0).sqrt(), 1.0, 0.1),
            geom(n, n, 8.0, s_mid, 1.0 / (n as f64).sqrt(), 0.1),
            geom(n, n, 8.0, s_mid, 1.0 / (n as f64).sqrt(), 0.1),
        ];
        let st = ntk_recursion(&points, &g, &m).unwrap();
        let top = ntk_eigenspectrum(st.theta.as_ref().unwrap()).unwrap()[0];
        assert!(top < prev, "top eigenvalue must shrink with C (C={c}: {top} vs {prev})");
        prev = top;
    }
}

#[test]
fn regression_interpolates_training_points() {
    let mut rng = SeedRng::new(700);
    let g = sample_gaussian_matrix(&mut rng, 5, 5, 1.0);
    let mut kernel = g.matmul_transb(&g); // PSD
    for i in 0..5 {
        let v = kernel.get(i, i) + 1.0;
        kernel.set(i, i, v);
    }
    let y = sample_gaussian_matrix(&mut rng, 5, 2, 1.0);
    let out = ntk_regression(&kernel, &kernel, &y, 1e-12).unwrap();
    assert!(out.predictions.sub(&y).max_abs() < 1e-6);

    // Θ = I: predictions at train points are y/(1+λ)
    let eye = Matrix::identity(5);
    let lam = 0.25;
    let out2 = ntk_regression(&eye, &eye, &y, lam).unwrap();
    assert!(out2.predictions.sub(&y.scaled(1.0 / (1.0 + lam))).max_abs() < 1e-12);
    assert!(out2.warning.is_none());
}

#[test]
fn empirical_ntk_single_linear_layer_closed_form() {
    // one linear layer with bias: Θ_{(i,k),(j,k′)} = δ_{kk′}(γ²⟨xᵢ,xⱼ⟩ + 1)
    let mut rng = SeedRng::new(701);
    let w = sample_gaussian_matrix(&mut rng, 3, 5, 1.0);
    let gamma = 0.6;
    let net = Mlp {
        layers: vec![crate::network::Layer {
            weight: w,
            bias: Some(vec![0.1, -0.2, 0.3]),
            gamma,
        }],
        activation: &IDENTITY,
    };
    let x = sample_gaussian_matrix(&mut rng, 4, 5, 1.0);
    let ntk = empirical_ntk(&net, &x);
    let gram = x.matmul_transb(&x);
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..3 {
                for kp in 0..3 {
                    let want = if k == kp {
                        gamma * gamma * gram.get(i, j) + 1.0
                    } else {
                        0.0
                    };
                    assert!(
                        (ntk.entry(i, k, j, kp) - want).abs() < 1e-10,
                        "entry ({i},{k},{j},{kp})"
                    );
                }
            }
        }
    }
}

#[test]
fn empirical_ntk_matches_finite_difference_jacobian() {
    // independent oracle: Θ = J·Jᵀ with J from central differences of the outputs
    let mut rng = SeedRng::new(702);
    let specs = vec![
        LayerSpec::new(
            3,
            6,
            InitScheme::Gaussian {
                sigma_w: 1.1,
                sigma_b: 0.2,
            },
            GammaMode::InvSqrtFanIn,
        ),
        LayerSpec::new(
            6,
            2,
            InitScheme::Gaussian {
                sigma_w: 0.9,
                sigma_b: 0.1,
            },
            GammaMode::One,
        ),
    ];
    let net = crate::network::init_network(&mut rng, &specs, &TANH).unwrap();
    let x = sample_gaussian_matrix(&mut rng, 3, 3, 1.0);
    let ntk = empirical_ntk(&net, &x);

    // flatten parameters, perturb one at a time
    let h = 1e-5;
    let mut probe = net.clone();
    let n_points = 3;
    let k_out = 2;
    let mut jac: Vec<Vec<f64>> = vec![Vec::new(); n_points * k_out];
    for l in 0..probe.depth() {
        for idx in 0..probe.layers[l].weight.data().len() {
            let orig = probe.layers[l].weight.data()[idx];
            probe.layers[l].weight.data_mut()[idx] = orig + h;
            let (up, _) = forward(&probe, &x);
            probe.layers[l].weight.data_mut()[idx] = orig - h;
            let (down, _) = forward(&probe, &x);
            probe.layers[l].weight.data_mut()[idx] = orig;
            for i in 0..n_points {
                for k in 0..k_out {
                    jac[i * k_out + k].push((up.get(i, k) - down.get(i, k)) / (2.0 * h));
                }
            }
        }
        if probe.layers[l].bias.is_some() {
            for bi in 0..probe.layers[l].bias.as_ref().unwrap().len() {
                let orig = probe.layers[l].bias.as_ref().unwrap()[bi];
                probe.layers[l].bias.as_mut().unwrap()[bi] = orig + h;
                let (up, _) = forward(&probe, &x);
                probe.layers[l].bias.as_mut().unwrap()[bi] = orig - h;
                let (down, _) = forward(&probe, &x);
                probe.layers[l].bias.as_mut().unwrap()[bi] = orig;
                for i in 0..n_points {
                    for k in 0..k_out {
                        jac[i * k_out + k].push((up.get(i, k) - down.get(i, k)) / (2.0 * h));
                    }
                }
            }
        }
    }
    for a in 0..n_points * k_out {
        for b in 0..n_points * k_out {
            let want: f64 = jac[a].iter().zip(&jac[b]).map(|(x, y)| x * y).sum();
            let got = ntk.matrix.get(a, b);
            assert!(
                (got - want).abs() < 1e-5 * want.abs().max(1.0),
                "({a},{b}): {got} vs {want}"
            );
        }
    }
}

#[test]
fn empirical_ntk_is_psd() {
    let mut rng = SeedRng::new(703);
    let specs = vec![
        LayerSpec::new(
            4,
            20,
            InitScheme::Gaussian {
                sigma_w: 1.0,
                sigma_b: 0.1,
            },
            GammaMode::InvSqrtFanIn,
        ),
        LayerSpec::new(
            20,
            3,
            InitScheme::Gaussian {
                sigma_w: 1.0,
                sigma_b: 0.1,
            },
            GammaMode::InvSqrtFanIn,
        ),
    ];
    let net = crate::network::init_network(&mut rng, &specs, &ERF).unwrap();
    let x = sample_gaussian_matrix(&mut rng, 5, 4, 1.0);
    let ntk = empirical_ntk(&net, &x);
    let evals = crate::linalg::symmetric_eigenvalues(&ntk.matrix).unwrap();
    let top = evals[0];
    assert!(evals.last().unwrap() >= &(-1e-9 * top));
}

#[test]
fn drift_with_zero_steps_is_zero() {
    let mut rng = SeedRng::new(704);
    let specs = vec![LayerSpec::new(
        3,
        4,
        InitScheme::Gaussian {
            sigma_w: 1.0,
            sigma_b: 0.1,
        },
        GammaMode::One,
    )];
    let mut net = crate::network::init_network(&mut rng, &specs, &TANH).unwrap();
    let x = sample_gaussian_matrix(&mut rng, 4, 3, 1.0);
    let y = sample_gaussian_matrix(&mut rng, 4, 4, 1.0);
    let cfg = crate::network::TrainConfig::full_batch(0.01, 0, crate::network::Loss::SquaredError, 1);
    let (drifts, _) = ntk_training_drift(&mut net, &x, &y, &cfg, 10).unwrap();
    assert_eq!(drifts, vec![(0, 0.0)]);
}

#[test]
fn psd_violation_is_reported_with_layer() {
    // a hand-built indefinite "covariance" must be rejected by validate
    let bad = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
    let state = KernelState {
        inputs: Matrix::zeros(2, 2),
        sigma: bad,
        theta: None,
        layer_index: 3,
    };
    match state.validate() {
        Err(KernelError::PsdViolation { layer, .. }) => assert_eq!(layer, 3),
        other => panic!("expected PSD violation, got {other:?}"),
    }
}
