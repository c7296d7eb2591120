#![allow(dead_code)]

use clab_core::{EmbeddingSet, Labeling};
use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Haar-ish orthogonal matrix from Gram-Schmidt on a Gaussian matrix.
pub fn random_orthogonal(d: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    let mut q = Array2::<f64>::from_shape_simple_fn((d, d), || r.sample(StandardNormal));
    for i in 0..d {
        for j in 0..i {
            let proj = q.row(i).dot(&q.row(j));
            let qj = q.row(j).to_owned();
            q.row_mut(i).scaled_add(-proj, &qj);
        }
        let n = q.row(i).dot(&q.row(i)).sqrt();
        q.row_mut(i).mapv_inplace(|x| x / n);
    }
    q
}

/// Every class present once `n >= c`; the rest uniform.
pub fn random_labels(n: usize, c: usize, seed: u64) -> Vec<usize> {
    let mut r = rng(seed ^ 0x5eed);
    let mut y: Vec<usize> = (0..n)
        .map(|i| if i < c { i } else { r.random_range(0..c) })
        .collect();
    y.shuffle(&mut r);
    y
}

/// Gaussian clusters around random centers; `spread` scales the noise.
pub fn clustered(
    n: usize,
    k: usize,
    d: usize,
    c: usize,
    spread: f64,
    seed: u64,
) -> (EmbeddingSet, Labeling) {
    let mut r = rng(seed);
    let centers = Array2::<f64>::from_shape_simple_fn((c, d), || r.sample(StandardNormal));
    let y = random_labels(n, c, seed);
    let data = Array3::from_shape_fn((n, k, d), |(i, _, t)| {
        centers[[y[i], t]] + spread * r.sample::<f64, _>(StandardNormal)
    });
    let lab = Labeling::new(y, c).unwrap();
    let set = EmbeddingSet::new(data).unwrap();
    (set, lab)
}

/// Applies `x ↦ Qx + shift` to every embedding.
pub fn rigid(set: &EmbeddingSet, q: &Array2<f64>, shift: &[f64]) -> EmbeddingSet {
    let (n, k, d) = set.data().dim();
    let mut out = Array3::<f64>::zeros((n, k, d));
    for i in 0..n {
        for l in 0..k {
            let v = set.data().slice(ndarray::s![i, l, ..]);
            for a in 0..d {
                let mut acc = shift[a];
                for b in 0..d {
                    acc += q[[a, b]] * v[b];
                }
                out[[i, l, a]] = acc;
            }
        }
    }
    set.with_data(out).unwrap()
}

pub fn max_abs(a: &Array3<f64>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}
