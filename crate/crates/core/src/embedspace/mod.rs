//! Embedding sets: `N` samples, `K` augmented views each, `d` coordinates.
//!
//! Embeddings are stored raw. Anything that needs cosine geometry normalizes on
//! the fly, so the same set can be fed to unit-sphere and norm-bounded code.

mod bundle;
mod generate;

pub use bundle::{load_bundle, read_bundle, read_csv, save_bundle, write_bundle, write_csv, MAGIC};
pub use generate::{
    collapsed_simplex_set, generate_gaussian_classes, generate_random_unit, simplex_etf,
    GaussianTaskSpec,
};

use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::rng;

/// Smallest admissible embedding norm.
pub const MIN_NORM: f64 = 1e-12;

/// `N × K × d` embeddings with optional 0-based class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    data: Array3<f64>,
    labels: Option<Vec<usize>>,
    n_classes: Option<usize>,
}

impl EmbeddingSet {
    /// Unlabeled set. Fails on `N < 2`, empty axes, or a vector below [`MIN_NORM`].
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let data = data.as_standard_layout().into_owned();
        let (n, k, d) = data.dim();
        if n < 2 || k == 0 || d == 0 {
            return Err(Error::InvalidShape(format!(
                "need N >= 2, K >= 1, d >= 1; got N={n}, K={k}, d={d}"
            )));
        }
        for i in 0..n {
            for l in 0..k {
                let norm = data
                    .slice(ndarray::s![i, l, ..])
                    .iter()
                    .map(|x| x * x)
                    .sum::<f64>()
                    .sqrt();
                if norm.is_nan() || norm < MIN_NORM {
                    return Err(Error::ZeroNorm {
                        sample: i,
                        aug: l,
                        norm,
                    });
                }
            }
        }
        Ok(Self {
            data,
            labels: None,
            n_classes: None,
        })
    }

    /// Labeled set; every label must lie in `[0, n_classes)`.
    pub fn with_labels(data: Array3<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        Self::new(data)?.relabel(labels, n_classes)
    }

    /// Same embeddings under a different labeling.
    pub fn relabel(mut self, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        check_labels(&labels, n_classes, self.n_samples())?;
        self.labels = Some(labels);
        self.n_classes = Some(n_classes);
        Ok(self)
    }

    /// Replaces the tensor, keeping labels. Shape must match.
    pub fn with_data(&self, data: Array3<f64>) -> Result<Self> {
        if data.dim() != self.data.dim() {
            return Err(Error::InvalidShape(format!(
                "replacement tensor {:?} differs from {:?}",
                data.dim(),
                self.data.dim()
            )));
        }
        let mut out = Self::new(data)?;
        out.labels = self.labels.clone();
        out.n_classes = self.n_classes;
        Ok(out)
    }

    pub fn n_samples(&self) -> usize {
        self.data.dim().0
    }

    pub fn n_augs(&self) -> usize {
        self.data.dim().1
    }

    pub fn dim(&self) -> usize {
        self.data.dim().2
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.n_classes
    }

    /// The stored labels as a [`Labeling`].
    pub fn labeling(&self) -> Result<Labeling> {
        match (&self.labels, self.n_classes) {
            (Some(labels), Some(c)) => Labeling::new(labels.clone(), c),
            _ => Err(Error::MissingLabels),
        }
    }

    /// `(N·K) × d` view; row `i·K + l` is view `l` of sample `i`.
    pub fn flat(&self) -> ArrayView2<'_, f64> {
        let (n, k, d) = self.data.dim();
        self.data
            .view()
            .into_shape_with_order((n * k, d))
            .expect("standard layout")
    }

    /// Rows of [`flat`](Self::flat) scaled to unit norm.
    pub fn normalized(&self) -> Array2<f64> {
        let mut u = self.flat().to_owned();
        for mut row in u.axis_iter_mut(Axis(0)) {
            let norm = row.dot(&row).sqrt();
            row /= norm;
        }
        u
    }
}

fn check_labels(labels: &[usize], n_classes: usize, n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::InvalidShape(format!(
            "{} labels for {n} samples",
            labels.len()
        )));
    }
    if n_classes == 0 {
        return Err(Error::InvalidShape("n_classes must be positive".into()));
    }
    for (i, &y) in labels.iter().enumerate() {
        if y >= n_classes {
            return Err(Error::InvalidLabel {
                sample: i,
                label: y as i64,
                n_classes,
            });
        }
    }
    Ok(())
}

/// Class assignment with derived counts.
///
/// Construction requires `n_max < N`: at least one sample lies outside the
/// largest class, so every anchor has a negative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labeling {
    labels: Vec<usize>,
    n_classes: usize,
    class_counts: Vec<usize>,
    n_max: usize,
}

impl Labeling {
    pub fn new(labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        check_labels(&labels, n_classes, labels.len())?;
        let mut class_counts = vec![0usize; n_classes];
        for &y in &labels {
            class_counts[y] += 1;
        }
        let n_max = class_counts.iter().copied().max().unwrap_or(0);
        if n_max >= labels.len() {
            return Err(Error::NoNegatives);
        }
        Ok(Self {
            labels,
            n_classes,
            class_counts,
            n_max,
        })
    }

    /// Class `c` owns samples `c·n .. (c+1)·n`.
    pub fn blockwise(n_classes: usize, per_class: usize) -> Result<Self> {
        let labels = (0..n_classes)
            .flat_map(|c| std::iter::repeat_n(c, per_class))
            .collect();
        Self::new(labels, n_classes)
    }

    /// A uniformly shuffled balanced labeling.
    pub fn random_balanced(n_classes: usize, per_class: usize, seed: u64) -> Result<Self> {
        use rand::seq::SliceRandom;
        let mut labels: Vec<usize> = (0..n_classes)
            .flat_map(|c| std::iter::repeat_n(c, per_class))
            .collect();
        labels.shuffle(&mut rng::seeded(seed));
        Self::new(labels, n_classes)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn is_balanced(&self) -> bool {
        self.class_counts.windows(2).all(|w| w[0] == w[1])
    }

    /// Sample indices of class `c`, ascending.
    pub fn members(&self, c: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == c)
            .map(|(i, _)| i)
            .collect()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.labels.len() != n {
            return Err(Error::InvalidShape(format!(
                "labeling covers {} samples, set has {n}",
                self.labels.len()
            )));
        }
        Ok(())
    }
}
