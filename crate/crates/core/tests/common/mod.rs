//! Fixtures and straight-line reference computations shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use ceirm::env::{write_idx, IdxData};
use ceirm::harness::{MNIST_IMAGES, MNIST_LABELS};
use ceirm::grad::{Activation, Classifier, MlpSpec};
use ceirm::Tensor;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, seed: u64) -> Tensor {
    let mut r = rng(seed);
    Array2::from_shape_fn((rows, cols), |_| r.random_range(-scale..scale))
}

pub fn random_labels(n: usize, classes: usize, seed: u64) -> Vec<usize> {
    let mut r = rng(seed ^ 0x9e37_79b9);
    (0..n).map(|_| r.random_range(0..classes)).collect()
}

/// `widths` runs input → hidden... → classes; `Z` is post-relu.
pub fn classifier(widths: &[usize], seed: u64) -> Classifier {
    Classifier::build(&MlpSpec::new(widths.to_vec(), Activation::Relu, seed), true).unwrap()
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// Mean of `logsumexp(z) − z_y` over rows.
pub fn plain_cross_entropy(logits: &Tensor, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &y) in logits.rows().into_iter().zip(labels) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        total += m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln() - row[y];
    }
    total / labels.len() as f64
}

/// `(mean_n (p_n − onehot_n)·z_n)²`.
pub fn plain_irm_penalty(logits: &Tensor, labels: &[usize]) -> f64 {
    let mut slope = 0.0;
    for (row, &y) in logits.rows().into_iter().zip(labels) {
        let z = row.to_vec();
        let p = softmax(&z);
        let dot: f64 = z.iter().zip(&p).map(|(a, b)| a * b).sum();
        slope += dot - z[y];
    }
    slope /= labels.len() as f64;
    slope * slope
}

/// Write a 28×28 IDX image/label pair with `n` blob "digits" under `dir`.
pub fn write_synthetic_mnist(dir: &Path, n: usize, seed: u64) {
    let mut r = rng(seed);
    let (rows, cols) = (28, 28);
    let mut pixels = vec![0u8; n * rows * cols];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let digit: u8 = r.random_range(0..10);
        labels.push(digit);
        // Blob position tracks the digit so the shape is learnable.
        let (cy, cx) = (6 + (digit as usize % 5) * 4, 8 + (digit as usize / 5) * 10);
        let img = &mut pixels[i * rows * cols..(i + 1) * rows * cols];
        for y in 0..rows {
            for x in 0..cols {
                let d2 = (y as f64 - cy as f64).powi(2) + (x as f64 - cx as f64).powi(2);
                let v = 255.0 * (-d2 / 18.0).exp() + r.random_range(0.0..20.0);
                img[y * cols + x] = v.min(255.0) as u8;
            }
        }
    }
    std::fs::write(dir.join(MNIST_IMAGES), write_idx(&IdxData::Images { n, rows, cols, pixels })).unwrap();
    std::fs::write(dir.join(MNIST_LABELS), write_idx(&IdxData::Labels(labels))).unwrap();
}

/// Spearman rank correlation (no ties expected).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// Density of `a·U + b·G` (U unit-variance uniform, G standard normal) by direct
/// numerical convolution, then `−∫ p ln p` by the trapezoid rule.
pub fn convolution_entropy(a: f64, b: f64) -> f64 {
    let half = a * 3f64.sqrt();
    let reach = half + 10.0 * b;
    let xs = 4001;
    let dx = 2.0 * reach / (xs - 1) as f64;
    // Inner integral over the uniform's support.
    let us = 4001;
    let du = 2.0 * half / (us - 1) as f64;
    let gauss = |t: f64| (-(t * t) / (2.0 * b * b)).exp() / (b * (2.0 * std::f64::consts::PI).sqrt());
    let mut total = 0.0;
    for i in 0..xs {
        let x = -reach + i as f64 * dx;
        let mut p = 0.0;
        for j in 0..us {
            let u = -half + j as f64 * du;
            let w = if j == 0 || j == us - 1 { 0.5 } else { 1.0 };
            p += w * gauss(x - u) / (2.0 * half) * du;
        }
        let f = if p > 0.0 { -p * p.ln() } else { 0.0 };
        let w = if i == 0 || i == xs - 1 { 0.5 } else { 1.0 };
        total += w * f * dx;
    }
    total
}

/// Smallest `|pre-activation|` over every relu unit of the feature network on `x`.
pub fn kink_distance(model: &Classifier, x: &Tensor) -> f64 {
    let mut h = x.clone();
    let mut closest = f64::INFINITY;
    for layer in &model.features.layers {
        h = h.dot(&layer.weight) + &layer.bias;
        closest = h.iter().fold(closest, |c, v| c.min(v.abs()));
        h.mapv_inplace(|v| v.max(0.0));
    }
    closest
}

/// A batch whose relu pre-activations all stay at least `margin` away from 0.
pub fn kink_free_batch(model: &Classifier, rows: usize, cols: usize, margin: f64, seed: u64) -> Tensor {
    (0..)
        .map(|attempt| random_matrix(rows, cols, 1.5, seed.wrapping_mul(7919).wrapping_add(attempt)))
        .find(|x| kink_distance(model, x) >= margin)
        .expect("unbounded search")
}
