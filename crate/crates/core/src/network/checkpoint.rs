//! Network checkpoints and training-history export.
//!
//! Checkpoint layout: 8-byte magic, layer count (u64 LE), activation name
//! (u8 length + bytes), then per layer: gamma (f64 LE), a has-bias flag
//! byte, the weight as an embedded matrix blob, and the bias entries (f64
//! LE ×n_out) when present.

use super::{Mlp, NetworkError, TrainHistory};
use crate::activation;
use crate::linalg::{read_matrix_from, write_matrix_to, LinalgError};
use std::io::{Read, Write};
use std::path::Path;

const NET_MAGIC: &[u8; 8] = b"SRNNET01";

pub fn save_network(path: &Path, net: &Mlp) -> Result<(), NetworkError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(LinalgError::from)?);
    f.write_all(NET_MAGIC).map_err(LinalgError::from)?;
    f.write_all(&(net.layers.len() as u64).to_le_bytes())
        .map_err(LinalgError::from)?;
    let name = net.activation.name().as_bytes();
    f.write_all(&[name.len() as u8]).map_err(LinalgError::from)?;
    f.write_all(name).map_err(LinalgError::from)?;
    for layer in &net.layers {
        f.write_all(&layer.gamma.to_le_bytes())
            .map_err(LinalgError::from)?;
        f.write_all(&[layer.bias.is_some() as u8])
            .map_err(LinalgError::from)?;
        write_matrix_to(&mut f, &layer.weight)?;
        if let Some(b) = &layer.bias {
            for v in b {
                f.write_all(&v.to_le_bytes()).map_err(LinalgError::from)?;
            }
        }
    }
    f.flush().map_err(LinalgError::from)?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<Mlp, NetworkError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path).map_err(LinalgError::from)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)
        .map_err(|_| LinalgError::BadFormat("checkpoint shorter than magic".into()))?;
    if &magic != NET_MAGIC {
        return Err(NetworkError::Linalg(LinalgError::BadFormat(format!(
            "checkpoint magic mismatch: expected {NET_MAGIC:?}, found {magic:?}"
        ))));
    }
    let mut buf8 = [0u8; 8];
    f.read_exact(&mut buf8)
        .map_err(|_| LinalgError::BadFormat("truncated layer count".into()))?;
    let layer_count = u64::from_le_bytes(buf8) as usize;
    let mut len1 = [0u8; 1];
    f.read_exact(&mut len1)
        .map_err(|_| LinalgError::BadFormat("truncated activation name".into()))?;
    let mut name = vec![0u8; len1[0] as usize];
    f.read_exact(&mut name)
        .map_err(|_| LinalgError::BadFormat("truncated activation name".into()))?;
    let name = String::from_utf8(name)
        .map_err(|_| LinalgError::BadFormat("activation name is not utf-8".into()))?;
    let act = activation::lookup(&name).ok_or(NetworkError::UnknownActivation(name))?;

    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        f.read_exact(&mut buf8)
            .map_err(|_| LinalgError::BadFormat("truncated gamma".into()))?;
        let gamma = f64::from_le_bytes(buf8);
        f.read_exact(&mut len1)
            .map_err(|_| LinalgError::BadFormat("truncated bias flag".into()))?;
        let weight = read_matrix_from(&mut f)?;
        let bias = if len1[0] != 0 {
            let mut b = vec![0.0; weight.rows()];
            for v in b.iter_mut() {
                f.read_exact(&mut buf8)
                    .map_err(|_| LinalgError::BadFormat("truncated bias entries".into()))?;
                *v = f64::from_le_bytes(buf8);
            }
            Some(b)
        } else {
            None
        };
        layers.push(super::Layer {
            weight,
            bias,
            gamma,
        });
    }
    Ok(Mlp {
        layers,
        activation: act,
    })
}

pub const HISTORY_CSV_HEADER: &str = "step,loss,layer,srank,spectral_norm,path_length";

/// One row per (step, layer).
pub fn write_history_csv(path: &Path, history: &TrainHistory) -> Result<(), NetworkError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(LinalgError::from)?);
    writeln!(f, "{HISTORY_CSV_HEADER}").map_err(LinalgError::from)?;
    for rec in &history.records {
        for (l, stats) in rec.layers.iter().enumerate() {
            writeln!(
                f,
                "{},{},{},{},{},{}",
                rec.step, rec.loss, l, stats.srank, stats.spectral_norm, rec.path_length
            )
            .map_err(LinalgError::from)?;
        }
    }
    f.flush().map_err(LinalgError::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::TANH;
    use crate::network::{init_network, GammaMode, InitScheme, LayerSpec};
    use crate::SeedRng;

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = SeedRng::new(601);
        let specs = vec![
            LayerSpec::new(
                5,
                7,
                InitScheme::Gaussian {
                    sigma_w: 1.0,
                    sigma_b: 0.1,
                },
                GammaMode::InvSqrtFanIn,
            ),
            LayerSpec {
                n_in: 7,
                n_out: 3,
                init: InitScheme::Gaussian {
                    sigma_w: 1.0,
                    sigma_b: 0.0,
                },
                gamma_mode: GammaMode::One,
                include_bias: false,
            },
        ];
        let net = init_network(&mut rng, &specs, &TANH).unwrap();
        let dir = std::env::temp_dir().join("srnet_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.bin");
        save_network(&path, &net).unwrap();
        let back = load_network(&path).unwrap();
        assert_eq!(back.layers.len(), 2);
        assert_eq!(back.activation.name(), "tanh");
        for (a, b) in net.layers.iter().zip(&back.layers) {
            assert_eq!(a.weight, b.weight);
            assert_eq!(a.bias, b.bias);
            assert_eq!(a.gamma, b.gamma);
        }
        // outputs identical
        let x = crate::linalg::sample_gaussian_matrix(&mut rng, 4, 5, 1.0);
        let (y1, _) = crate::network::forward(&net, &x);
        let (y2, _) = crate::network::forward(&back, &x);
        assert_eq!(y1, y2);
    }
}
