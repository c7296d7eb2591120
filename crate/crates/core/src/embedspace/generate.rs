use ndarray::{Array2, Array3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::EmbeddingSet;
use crate::error::{Error, Result};
use crate::rng;

/// Class-conditional Gaussians with additive Gaussian augmentation noise.
///
/// Sample `s` of class `c` has latent `mean_c + latent_sigma·ξ`; each of its
/// `n_augs` views adds an independent `aug_sigma·η`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianTaskSpec {
    /// One row per class.
    pub class_means: Vec<Vec<f64>>,
    pub latent_sigma: f64,
    pub aug_sigma: f64,
    pub per_class: usize,
    pub n_augs: usize,
    pub seed: u64,
}

impl GaussianTaskSpec {
    pub fn n_classes(&self) -> usize {
        self.class_means.len()
    }

    pub fn dim(&self) -> usize {
        self.class_means.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        let c = self.n_classes();
        let d = self.dim();
        if c == 0 || d == 0 || self.per_class == 0 || self.n_augs == 0 {
            return Err(Error::InvalidShape(format!(
                "need C, d, n, K >= 1; got C={c}, d={d}, n={}, K={}",
                self.per_class, self.n_augs
            )));
        }
        if self.class_means.iter().any(|m| m.len() != d) {
            return Err(Error::InvalidShape("class means differ in length".into()));
        }
        if !(self.latent_sigma >= 0.0 && self.aug_sigma >= 0.0) {
            return Err(Error::Domain("noise scales must be nonnegative".into()));
        }
        if self.latent_sigma == 0.0 {
            for i in 0..c {
                for j in i + 1..c {
                    if self.class_means[i] == self.class_means[j] {
                        return Err(Error::DegenerateTask(format!(
                            "class means {i} and {j} coincide with zero latent noise"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Draws a labeled set from `spec`; class `c` owns samples `c·n .. (c+1)·n`.
pub fn generate_gaussian_classes(spec: &GaussianTaskSpec) -> Result<EmbeddingSet> {
    spec.validate()?;
    let (c, d, n, k) = (spec.n_classes(), spec.dim(), spec.per_class, spec.n_augs);
    let mut rng = rng::seeded(spec.seed);
    let mut data = Array3::<f64>::zeros((c * n, k, d));
    let mut latent = vec![0.0; d];
    for (class, mean) in spec.class_means.iter().enumerate() {
        for s in 0..n {
            let i = class * n + s;
            for (x, &mu) in latent.iter_mut().zip(mean) {
                let xi: f64 = rng.sample(StandardNormal);
                *x = mu + spec.latent_sigma * xi;
            }
            for l in 0..k {
                for (t, &x) in latent.iter().enumerate() {
                    let eta: f64 = rng.sample(StandardNormal);
                    data[[i, l, t]] = x + spec.aug_sigma * eta;
                }
            }
        }
    }
    let labels = (0..c).flat_map(|y| std::iter::repeat_n(y, n)).collect();
    EmbeddingSet::with_labels(data, labels, c)
}

/// I.i.d. uniform directions on the unit sphere, unlabeled.
pub fn generate_random_unit(
    n_samples: usize,
    n_augs: usize,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingSet> {
    if n_samples < 2 || n_augs == 0 || dim == 0 {
        return Err(Error::InvalidShape(format!(
            "need N >= 2, K >= 1, d >= 1; got N={n_samples}, K={n_augs}, d={dim}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut data = Array3::<f64>::zeros((n_samples, n_augs, dim));
    for mut v in data.lanes_mut(ndarray::Axis(2)) {
        loop {
            v.map_inplace(|x| *x = rng.sample(StandardNormal));
            let norm = v.dot(&v).sqrt();
            if norm > 1e-6 {
                v /= norm;
                break;
            }
        }
    }
    EmbeddingSet::new(data)
}

/// `C` unit vectors in `R^d` forming a simplex ETF (sum zero, pairwise
/// inner product `-1/(C-1)`). Requires `C >= 2` and `d >= C - 1`.
///
/// The vertices `e_c - 1/C` of the standard simplex are expressed in the
/// Helmert basis of the sum-zero hyperplane, which fits in `C - 1` coordinates.
pub fn simplex_etf(n_classes: usize, dim: usize) -> Result<Array2<f64>> {
    let c = n_classes;
    if c < 2 || dim + 1 < c {
        return Err(Error::Domain(format!(
            "simplex ETF needs C >= 2 and d >= C-1; got C={c}, d={dim}"
        )));
    }
    let mut out = Array2::<f64>::zeros((c, dim));
    for v in 0..c {
        // coordinate k (1-based) pairs with h_k = (1,..,1,-k,0,..)/sqrt(k(k+1))
        for k in 1..c {
            let scale = 1.0 / ((k * (k + 1)) as f64).sqrt();
            let hv = if v < k {
                scale
            } else if v == k {
                -(k as f64) * scale
            } else {
                0.0
            };
            // <e_v - 1/C, h_k> = h_k[v] since h_k sums to zero
            out[[v, k - 1]] = hv;
        }
    }
    for mut row in out.rows_mut() {
        let norm = row.dot(&row).sqrt();
        row /= norm;
    }
    Ok(out)
}

/// The collapsed configuration: every view of every class-`c` sample equals
/// vertex `c` of [`simplex_etf`]. Labels are blockwise.
pub fn collapsed_simplex_set(
    n_classes: usize,
    per_class: usize,
    n_augs: usize,
    dim: usize,
) -> Result<EmbeddingSet> {
    let etf = simplex_etf(n_classes, dim)?;
    let n = n_classes * per_class;
    let data = Array3::from_shape_fn((n, n_augs, dim), |(i, _, t)| etf[[i / per_class, t]]);
    let labels = (0..n).map(|i| i / per_class).collect();
    EmbeddingSet::with_labels(data, labels, n_classes)
}
