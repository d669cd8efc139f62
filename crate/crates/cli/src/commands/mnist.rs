//! Classification experiments: noise-fitting across stable-rank targets
//! (clean vs shuffled labels under constrained training) and the
//! regularization comparison (L1 / L2 penalties vs stable-rank
//! initialization).
//!
//! When no IDX paths are configured, a synthetic two-class Gaussian-blob
//! set stands in so the harness stays runnable offline; the summary records
//! which source was used.

use super::{write_csv, write_json, Command, RunContext};
use crate::config::{parse_params, MnistParams};
use crate::data::{accuracy, gaussian_blobs, subset, ClassificationSet};
use crate::idx::{load_idx, shuffle_labels};
use crate::stats::mean_and_se;
use crate::CliError;
use rayon::prelude::*;
use srnet_core::activation::RELU;
use srnet_core::linalg::Matrix;
use srnet_core::network::{
    default_stable_rank_sigma_b, forward, init_network, loss_value, train, GammaMode,
    InitScheme, LayerSpec, Loss, Projection, TrainConfig,
};
use srnet_core::sampler::SpectrumSpec;
use srnet_core::SeedRng;

pub const NOISE_HEADER: &str =
    "srank_target,shuffle_fraction,seed,final_train_accuracy,final_train_loss";
pub const REGULARIZATION_HEADER: &str =
    "scheme,hyperparameter,model,test_loss,test_accuracy";

pub struct MnistCommand;

pub struct LoadedData {
    pub train: ClassificationSet,
    pub test: ClassificationSet,
    pub source: String,
}

pub fn load_data(p: &MnistParams, seed: u64) -> Result<LoadedData, CliError> {
    match (&p.images, &p.labels) {
        (Some(images), Some(labels)) => {
            let ds = load_idx(std::path::Path::new(images), std::path::Path::new(labels))?;
            if ds.labels.len() < p.subset + p.regularization.test_size {
                return Err(CliError::Data(format!(
                    "dataset has {} examples but subset {} + test {} are requested",
                    ds.labels.len(),
                    p.subset,
                    p.regularization.test_size
                )));
            }
            let both = subset(
                &ds,
                p.subset + p.regularization.test_size,
                seed,
                10,
            );
            let train = ClassificationSet {
                inputs: Matrix::from_fn(p.subset, both.inputs.cols(), |i, j| {
                    both.inputs.get(i, j)
                }),
                labels: both.labels[..p.subset].to_vec(),
                n_classes: 10,
            };
            let test = ClassificationSet {
                inputs: Matrix::from_fn(p.regularization.test_size, both.inputs.cols(), |i, j| {
                    both.inputs.get(p.subset + i, j)
                }),
                labels: both.labels[p.subset..].to_vec(),
                n_classes: 10,
            };
            Ok(LoadedData {
                train,
                test,
                source: "idx".into(),
            })
        }
        (None, None) => Ok(LoadedData {
            train: gaussian_blobs(p.subset, p.blob_dim, p.blob_separation, seed),
            test: gaussian_blobs(
                p.regularization.test_size,
                p.blob_dim,
                p.blob_separation,
                seed.wrapping_add(1),
            ),
            source: "synthetic-blobs".into(),
        }),
        _ => Err(CliError::Config(
            "both images and labels paths must be given, or neither".into(),
        )),
    }
}

fn steps_for(epochs: usize, n: usize, batch: usize) -> usize {
    epochs * (n / batch.max(1)).max(1)
}

/// One constrained training run; returns (final train accuracy, final loss).
#[allow(clippy::too_many_arguments)]
pub fn noise_fit_run(
    data: &ClassificationSet,
    hidden: usize,
    srank_target: f64,
    spectral_norm: f64,
    shuffle_fraction: f64,
    seed: u64,
    learning_rate: f64,
    batch_size: usize,
    epochs: usize,
    method: &str,
) -> Result<(f64, f64), CliError> {
    let dim = data.inputs.cols();
    let n_classes = data.n_classes;
    let spec = SpectrumSpec::new(srank_target, spectral_norm);
    let sigma_b = default_stable_rank_sigma_b(&spec, hidden, dim);
    let layer_specs = vec![
        LayerSpec::new(
            dim,
            hidden,
            InitScheme::StableRank {
                spec,
                sigma_b,
                method: method.to_string(),
            },
            GammaMode::One,
        ),
        LayerSpec::new(
            hidden,
            n_classes,
            InitScheme::Gaussian {
                sigma_w: 1.0,
                sigma_b: 0.0,
            },
            GammaMode::One,
        ),
    ];
    let mut rng = SeedRng::substream(seed, 0);
    let mut net = init_network(&mut rng, &layer_specs, &RELU)?;

    let mut labels = data.labels.clone();
    shuffle_labels(&mut labels, shuffle_fraction, seed.wrapping_add(17));
    let used = ClassificationSet {
        inputs: data.inputs.clone(),
        labels,
        n_classes,
    };
    let targets = used.one_hot_targets();

    let cfg = TrainConfig {
        learning_rate,
        steps: steps_for(epochs, used.len(), batch_size),
        batch_size,
        // constrain the wide hidden layer; the class-head min dimension is
        // below the sweep targets
        projection: Projection::StableRank(vec![Some(spec), None]),
        loss: Loss::SoftmaxCrossEntropy,
        seed,
        shuffle: true,
        l1: 0.0,
        l2: 0.0,
        stats_every: 1,
    };
    train(&mut net, &used.inputs, &targets, &cfg)?;
    let (out, _) = forward(&net, &used.inputs);
    Ok((
        accuracy(&out, &used.labels),
        loss_value(&out, &targets, Loss::SoftmaxCrossEntropy),
    ))
}

#[allow(clippy::too_many_arguments)]
fn regularization_run(
    data: &ClassificationSet,
    test: &ClassificationSet,
    hidden: usize,
    scheme: &str,
    hyper: f64,
    spectral_norm: f64,
    seed: u64,
    learning_rate: f64,
    batch_size: usize,
    epochs: usize,
    method: &str,
) -> Result<(f64, f64), CliError> {
    let dim = data.inputs.cols();
    let n_classes = data.n_classes;
    let gaussian = InitScheme::Gaussian {
        sigma_w: 1.0,
        sigma_b: 0.0,
    };
    let hidden_init = if scheme == "srank-init" {
        let spec = SpectrumSpec::new(hyper, spectral_norm);
        InitScheme::StableRank {
            spec,
            sigma_b: default_stable_rank_sigma_b(&spec, hidden, dim),
            method: method.to_string(),
        }
    } else {
        gaussian.clone()
    };
    let hidden_init_2 = if scheme == "srank-init" {
        let spec = SpectrumSpec::new(hyper.min(hidden as f64 - 1.0), spectral_norm);
        InitScheme::StableRank {
            spec,
            sigma_b: default_stable_rank_sigma_b(&spec, hidden, hidden),
            method: method.to_string(),
        }
    } else {
        gaussian.clone()
    };
    let layer_specs = vec![
        LayerSpec::new(dim, hidden, hidden_init, GammaMode::One),
        LayerSpec::new(hidden, hidden, hidden_init_2, GammaMode::One),
        LayerSpec::new(hidden, n_classes, gaussian, GammaMode::One),
    ];
    let mut rng = SeedRng::substream(seed, 0);
    let mut net = init_network(&mut rng, &layer_specs, &RELU)?;
    let targets = data.one_hot_targets();
    let cfg = TrainConfig {
        learning_rate,
        steps: steps_for(epochs, data.len(), batch_size),
        batch_size,
        projection: Projection::None,
        loss: Loss::SoftmaxCrossEntropy,
        seed,
        shuffle: true,
        l1: if scheme == "l1" { hyper } else { 0.0 },
        l2: if scheme == "l2" { hyper } else { 0.0 },
        stats_every: 1,
    };
    train(&mut net, &data.inputs, &targets, &cfg)?;
    let (out, _) = forward(&net, &test.inputs);
    Ok((
        loss_value(&out, &test.one_hot_targets(), Loss::SoftmaxCrossEntropy),
        accuracy(&out, &test.labels),
    ))
}

impl Command for MnistCommand {
    fn name(&self) -> &'static str {
        "mnist"
    }

    fn about(&self) -> &'static str {
        "noise-fitting sweep and regularization comparison (IDX data or synthetic fallback)"
    }

    fn run(&self, ctx: &RunContext, params: &serde_json::Value) -> Result<(), CliError> {
        let p: MnistParams = parse_params(params)?;
        if !["noise-fit", "regularization", "both"].contains(&p.mode.as_str()) {
            return Err(CliError::Config(format!("unknown mode '{}'", p.mode)));
        }
        let data = load_data(&p, ctx.seed)?;
        let mut summary = serde_json::Map::new();
        summary.insert("data_source".into(), data.source.clone().into());

        if p.mode == "noise-fit" || p.mode == "both" {
            let mut jobs = Vec::new();
            for &r in &p.noise.srank_targets {
                for &f in &p.noise.shuffle_fractions {
                    for s in 0..p.noise.seeds {
                        jobs.push((r, f, s));
                    }
                }
            }
            let results: Result<Vec<_>, CliError> = jobs
                .par_iter()
                .map(|&(r, f, s)| {
                    let (acc, loss) = noise_fit_run(
                        &data.train,
                        p.hidden,
                        r,
                        p.spectral_norm,
                        f,
                        ctx.seed
                            .wrapping_add((r as u64) << 32)
                            .wrapping_add((f * 1000.0) as u64)
                            .wrapping_add(s as u64),
                        p.learning_rate,
                        p.batch_size,
                        p.noise.epochs,
                        &p.method,
                    )?;
                    Ok((r, f, s, acc, loss))
                })
                .collect();
            let results = results?;
            let rows: Vec<String> = results
                .iter()
                .map(|(r, f, s, acc, loss)| format!("{r},{f},{s},{acc},{loss}"))
                .collect();
            write_csv(&ctx.path("mnist_noise_fit.csv"), NOISE_HEADER, &rows)?;

            let mut noise_summary = Vec::new();
            for &r in &p.noise.srank_targets {
                for &f in &p.noise.shuffle_fractions {
                    let accs: Vec<f64> = results
                        .iter()
                        .filter(|(rr, ff, ..)| *rr == r && *ff == f)
                        .map(|(.., acc, _)| *acc)
                        .collect();
                    let (mean, se) = mean_and_se(&accs);
                    noise_summary.push(serde_json::json!({
                        "srank_target": r,
                        "shuffle_fraction": f,
                        "mean_train_accuracy": mean,
                        "standard_error": se,
                    }));
                }
            }
            summary.insert("noise_fit".into(), serde_json::Value::Array(noise_summary));
        }

        if p.mode == "regularization" || p.mode == "both" {
            let mut jobs = Vec::new();
            for &h in &p.regularization.l1_grid {
                for m in 0..p.regularization.models_per_point {
                    jobs.push(("l1", h, m));
                }
            }
            for &h in &p.regularization.l2_grid {
                for m in 0..p.regularization.models_per_point {
                    jobs.push(("l2", h, m));
                }
            }
            for &h in &p.regularization.srank_grid {
                for m in 0..p.regularization.models_per_point {
                    jobs.push(("srank-init", h, m));
                }
            }
            let results: Result<Vec<_>, CliError> = jobs
                .par_iter()
                .enumerate()
                .map(|(idx, &(scheme, h, m))| {
                    let (loss, acc) = regularization_run(
                        &data.train,
                        &data.test,
                        p.hidden,
                        scheme,
                        h,
                        p.spectral_norm,
                        ctx.seed.wrapping_add(0x9000).wrapping_add(idx as u64),
                        p.learning_rate,
                        p.batch_size,
                        p.regularization.epochs,
                        &p.method,
                    )?;
                    Ok((scheme, h, m, loss, acc))
                })
                .collect();
            let results = results?;
            let rows: Vec<String> = results
                .iter()
                .map(|(scheme, h, m, loss, acc)| format!("{scheme},{h},{m},{loss},{acc}"))
                .collect();
            write_csv(
                &ctx.path("mnist_regularization.csv"),
                REGULARIZATION_HEADER,
                &rows,
            )?;
            let mut reg_summary = Vec::new();
            for scheme in ["l1", "l2", "srank-init"] {
                let grid = match scheme {
                    "l1" => &p.regularization.l1_grid,
                    "l2" => &p.regularization.l2_grid,
                    _ => &p.regularization.srank_grid,
                };
                for &h in grid {
                    let losses: Vec<f64> = results
                        .iter()
                        .filter(|(sc, hh, ..)| *sc == scheme && *hh == h)
                        .map(|(.., loss, _)| *loss)
                        .collect();
                    let accs: Vec<f64> = results
                        .iter()
                        .filter(|(sc, hh, ..)| *sc == scheme && *hh == h)
                        .map(|(.., acc)| *acc)
                        .collect();
                    let (ml, sl) = mean_and_se(&losses);
                    let (ma, sa) = mean_and_se(&accs);
                    reg_summary.push(serde_json::json!({
                        "scheme": scheme,
                        "hyperparameter": h,
                        "mean_test_loss": ml,
                        "loss_standard_error": sl,
                        "mean_test_accuracy": ma,
                        "accuracy_standard_error": sa,
                    }));
                }
            }
            summary.insert(
                "regularization".into(),
                serde_json::Value::Array(reg_summary),
            );
        }

        write_json(
            &ctx.path("mnist_summary.json"),
            &serde_json::Value::Object(summary),
        )?;
        Ok(())
    }
}
