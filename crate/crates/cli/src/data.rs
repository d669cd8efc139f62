//! Training-set assembly: subsetting, one-hot targets, and the synthetic
//! two-class Gaussian-blob fallback used when no IDX files are configured.

use crate::idx::IdxDataset;
use srnet_core::linalg::Matrix;
use srnet_core::rng::SeedRng;

/// A classification set ready for training.
#[derive(Clone, Debug)]
pub struct ClassificationSet {
    pub inputs: Matrix,
    pub labels: Vec<u8>,
    pub n_classes: usize,
}

impl ClassificationSet {
    pub fn one_hot_targets(&self) -> Matrix {
        let mut y = Matrix::zeros(self.labels.len(), self.n_classes);
        for (i, &l) in self.labels.iter().enumerate() {
            y.set(i, l as usize, 1.0);
        }
        y
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Seeded subset of an IDX dataset (without replacement).
pub fn subset(ds: &IdxDataset, size: usize, seed: u64, n_classes: usize) -> ClassificationSet {
    let n = ds.labels.len();
    let size = size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = SeedRng::substream(seed, 0x5b5e7);
    rng.shuffle(&mut order);
    let picks = &order[..size];
    let inputs = Matrix::from_fn(size, ds.images.cols(), |i, j| ds.images.get(picks[i], j));
    let labels = picks.iter().map(|&i| ds.labels[i]).collect();
    ClassificationSet {
        inputs,
        labels,
        n_classes,
    }
}

/// Two Gaussian blobs in the given input dimension: class means at ±μ along
/// a random unit direction, unit isotropic noise. Linearly separable at the
/// default separation, which is the point — clean labels are easy to fit,
/// shuffled ones are not.
pub fn gaussian_blobs(
    n: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> ClassificationSet {
    let mut rng = SeedRng::substream(seed, 0xb10b5);
    let direction = srnet_core::linalg::sample_unit_sphere(&mut rng, dim, 1.0);
    let mut inputs = Matrix::zeros(n, dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = (i % 2) as u8;
        let sign = if class == 0 { -1.0 } else { 1.0 };
        for j in 0..dim {
            let v = sign * separation / 2.0 * direction[j] + rng.normal();
            inputs.set(i, j, v);
        }
        labels.push(class);
    }
    ClassificationSet {
        inputs,
        labels,
        n_classes: 2,
    }
}

/// Fraction of rows whose argmax output matches the label.
pub fn accuracy(outputs: &Matrix, labels: &[u8]) -> f64 {
    assert_eq!(outputs.rows(), labels.len());
    let mut hits = 0usize;
    for (i, &l) in labels.iter().enumerate() {
        let row = outputs.row(i);
        let mut best = 0usize;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        if best == l as usize {
            hits += 1;
        }
    }
    hits as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_balanced_and_deterministic() {
        let a = gaussian_blobs(100, 16, 4.0, 7);
        let b = gaussian_blobs(100, 16, 4.0, 7);
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.labels.iter().filter(|&&l| l == 0).count(), 50);
    }

    #[test]
    fn accuracy_counts_argmax_hits() {
        let out = Matrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8], vec![0.6, 0.4]]);
        assert!((accuracy(&out, &[0, 1, 1]) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn one_hot_shape() {
        let set = gaussian_blobs(10, 4, 2.0, 1);
        let y = set.one_hot_targets();
        assert_eq!(y.rows(), 10);
        assert_eq!(y.cols(), 2);
        for i in 0..10 {
            assert_eq!(y.row(i).iter().sum::<f64>(), 1.0);
        }
    }
}
