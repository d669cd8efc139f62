//! IDX binary dataset parsing (the MNIST file format) and seeded label
//! noise.
//!
//! IDX files are big-endian: a 4-byte magic (0x00000803 for 3-dimensional
//! image files, 0x00000801 for 1-dimensional label files), one u32 per
//! dimension, then raw bytes. Parse errors carry the byte offset.

use crate::CliError;
use srnet_core::linalg::Matrix;
use srnet_core::rng::SeedRng;
use std::path::Path;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// A loaded image/label set. Pixels are scaled to [0, 1].
#[derive(Clone, Debug)]
pub struct IdxDataset {
    pub images: Matrix,
    pub labels: Vec<u8>,
}

fn read_u32_be(bytes: &[u8], offset: usize, what: &str) -> Result<u32, CliError> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(CliError::Data(format!(
            "truncated {what} at byte offset {offset}: file has {} bytes",
            bytes.len()
        )));
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<IdxDataset, CliError> {
    let img_bytes = std::fs::read(images_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", images_path.display())))?;
    let magic = read_u32_be(&img_bytes, 0, "image magic")?;
    if magic != IMAGES_MAGIC {
        return Err(CliError::Data(format!(
            "image magic mismatch at byte offset 0: expected {IMAGES_MAGIC:#010x}, found {magic:#010x}"
        )));
    }
    let count = read_u32_be(&img_bytes, 4, "image count")? as usize;
    let rows = read_u32_be(&img_bytes, 8, "image rows")? as usize;
    let cols = read_u32_be(&img_bytes, 12, "image cols")? as usize;
    let pixel_bytes = count * rows * cols;
    if img_bytes.len() < 16 + pixel_bytes {
        return Err(CliError::Data(format!(
            "truncated pixel data at byte offset {}: need {} bytes, file has {}",
            img_bytes.len(),
            16 + pixel_bytes,
            img_bytes.len()
        )));
    }

    let lbl_bytes = std::fs::read(labels_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", labels_path.display())))?;
    let magic = read_u32_be(&lbl_bytes, 0, "label magic")?;
    if magic != LABELS_MAGIC {
        return Err(CliError::Data(format!(
            "label magic mismatch at byte offset 0: expected {LABELS_MAGIC:#010x}, found {magic:#010x}"
        )));
    }
    let lbl_count = read_u32_be(&lbl_bytes, 4, "label count")? as usize;
    if lbl_bytes.len() < 8 + lbl_count {
        return Err(CliError::Data(format!(
            "truncated label data at byte offset {}: need {} bytes, file has {}",
            lbl_bytes.len(),
            8 + lbl_count,
            lbl_bytes.len()
        )));
    }
    if lbl_count != count {
        return Err(CliError::Data(format!(
            "label file has {lbl_count} entries but image file has {count}"
        )));
    }

    let dim = rows * cols;
    let mut images = Matrix::zeros(count.max(1), dim.max(1));
    for i in 0..count {
        for j in 0..dim {
            images.set(i, j, img_bytes[16 + i * dim + j] as f64 / 255.0);
        }
    }
    let labels = lbl_bytes[8..8 + lbl_count].to_vec();
    Ok(IdxDataset { images, labels })
}

/// Outcome of applying label noise; keeping the touched indices makes the
/// permutation invertible.
#[derive(Clone, Debug)]
pub struct LabelShuffle {
    /// Indices whose labels were cyclically permuted, in cycle order.
    pub indices: Vec<usize>,
}

/// Permute the labels of exactly ⌊fraction·n⌋ seeded-chosen samples by one
/// cyclic shift among themselves.
pub fn shuffle_labels(labels: &mut [u8], fraction: f64, seed: u64) -> LabelShuffle {
    assert!((0.0..=1.0).contains(&fraction));
    let n = labels.len();
    let k = (fraction * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = SeedRng::substream(seed, 0x1abe1);
    rng.shuffle(&mut order);
    let indices: Vec<usize> = order.into_iter().take(k).collect();
    if k >= 2 {
        let first = labels[indices[0]];
        for w in 0..k - 1 {
            labels[indices[w]] = labels[indices[w + 1]];
        }
        labels[indices[k - 1]] = first;
    }
    LabelShuffle { indices }
}

/// Undo [`shuffle_labels`] given its record.
pub fn unshuffle_labels(labels: &mut [u8], record: &LabelShuffle) {
    let k = record.indices.len();
    if k >= 2 {
        let last = labels[record.indices[k - 1]];
        for w in (0..k - 1).rev() {
            labels[record.indices[w + 1]] = labels[record.indices[w]];
        }
        labels[record.indices[0]] = last;
    }
}
