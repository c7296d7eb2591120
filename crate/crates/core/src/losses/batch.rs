//! Mini-batch contrastive losses and their Monte-Carlo estimates.
//!
//! One trial draws an anchor sample `i` uniformly, pairs view 0 of `i` with
//! view 1 of `i`, and draws a batch with replacement from the pool. Every
//! batch member `j` contributes view 0 and one view drawn uniformly from
//! `1..K`, so the denominator holds twice the batch size in terms:
//!
//! ```text
//! ℓ = -sim(z_i, z'_i) + log Σ_{j ∈ batch} [exp(sim(z_i, z_j)) + exp(sim(z_i, z'_j))]
//! ```
//!
//! Trial `t` of kind `k` uses ChaCha stream `(k << 32) | t` of `BatchSpec::seed`,
//! so a longer run reproduces every trial of a shorter one.

use std::f64::consts::E;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedspace::{EmbeddingSet, Labeling};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub batch_size: usize,
    pub epsilon: f64,
    pub n_trials: usize,
    pub seed: u64,
}

impl BatchSpec {
    /// `⌈B(1 − 1/C − ε)⌉`, the negatives-only batch size.
    pub fn b_bar(&self, n_classes: usize) -> Result<usize> {
        Ok(batch_gap_bound(self.batch_size, n_classes, self.epsilon)?.b_bar)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BatchLossKind {
    /// Batches of `B` from the whole set.
    ClB,
    /// Batches of `B̄` from samples outside the anchor's class.
    NsclBbar,
}

impl BatchLossKind {
    fn stream_id(self) -> u32 {
        match self {
            BatchLossKind::ClB => 0,
            BatchLossKind::NsclBbar => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BatchEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_trials: usize,
}

impl BatchEstimate {
    fn from_trials(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / n).sqrt(),
            n_trials: values.len(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BatchGapBound {
    pub lower: f64,
    pub upper: f64,
    pub b_bar: usize,
}

/// Interval for `L^CL_B − L^NSCL_B̄`:
///
/// ```text
/// upper = e²(1 + εC)/(C(1 − ε) − 1) + 2(log 2B + 2)·exp(−2Bε²)
/// lower = −2(log 2B + 2)·exp(−2Bε²)
/// ```
pub fn batch_gap_bound(batch: usize, n_classes: usize, epsilon: f64) -> Result<BatchGapBound> {
    let (b, c) = (batch as f64, n_classes as f64);
    if batch == 0 || n_classes < 2 {
        return Err(Error::Domain(format!(
            "need B >= 1 and C >= 2; got B={batch}, C={n_classes}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0 - 1.0 / c) {
        return Err(Error::Domain(format!(
            "epsilon {epsilon} outside (0, 1 - 1/C) for C={n_classes}"
        )));
    }
    let denom = c * (1.0 - epsilon) - 1.0;
    if denom <= 0.0 {
        return Err(Error::Domain(format!(
            "C(1 - eps) - 1 = {denom} must be positive"
        )));
    }
    let x = b * (1.0 - 1.0 / c - epsilon);
    // an exact integer product must not round up through float noise
    let nearest = x.round();
    let b_bar = if (x - nearest).abs() <= 1e-9 * x.max(1.0) {
        nearest
    } else {
        x.ceil()
    } as usize;
    let tail = 2.0 * ((2.0 * b).ln() + 2.0) * (-2.0 * b * epsilon * epsilon).exp();
    Ok(BatchGapBound {
        lower: -tail,
        upper: E * E * (1.0 + epsilon * c) / denom + tail,
        b_bar: b_bar.max(1),
    })
}

/// Per-trial loss values, trial order.
pub fn batch_loss_trials(
    set: &EmbeddingSet,
    kind: BatchLossKind,
    labeling: &Labeling,
    spec: &BatchSpec,
) -> Result<Vec<f64>> {
    labeling.check_len(set.n_samples())?;
    let (n, k, _) = set.data().dim();
    if k < 2 {
        return Err(Error::NoPositivePair);
    }
    if spec.n_trials == 0 {
        return Err(Error::Domain("n_trials must be positive".into()));
    }
    let size = match kind {
        BatchLossKind::ClB => {
            if spec.batch_size == 0 {
                return Err(Error::Domain("batch size must be positive".into()));
            }
            spec.batch_size
        }
        BatchLossKind::NsclBbar => spec.b_bar(labeling.n_classes())?,
    };
    let y = labeling.labels();
    // complement pools per class; empty when a class holds every sample
    let pools: Vec<Vec<usize>> = match kind {
        BatchLossKind::ClB => vec![(0..n).collect()],
        BatchLossKind::NsclBbar => (0..labeling.n_classes())
            .map(|c| (0..n).filter(|&j| y[j] != c).collect())
            .collect(),
    };
    let u = set.normalized();
    let sim = |a: usize, b: usize| -> f64 { u.row(a).dot(&u.row(b)) };

    let mut out = Vec::with_capacity(spec.n_trials);
    for trial in 0..spec.n_trials {
        let mut rng = rng::stream2(spec.seed, kind.stream_id(), trial as u32);
        let i = rng.random_range(0..n);
        let pool = match kind {
            BatchLossKind::ClB => &pools[0],
            BatchLossKind::NsclBbar => &pools[y[i]],
        };
        if pool.is_empty() {
            return Err(Error::EmptyPool(format!(
                "no samples outside class {} for anchor {i}",
                y[i]
            )));
        }
        let anchor = i * k;
        let mut terms = Vec::with_capacity(2 * size);
        for _ in 0..size {
            let j = pool[rng.random_range(0..pool.len())];
            let view = rng.random_range(1..k);
            terms.push(sim(anchor, j * k));
            terms.push(sim(anchor, j * k + view));
        }
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + terms.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        out.push(lse - sim(anchor, anchor + 1));
    }
    Ok(out)
}

/// Monte-Carlo mean and standard error of one batch loss.
pub fn batch_loss_estimate(
    set: &EmbeddingSet,
    kind: BatchLossKind,
    labeling: &Labeling,
    spec: &BatchSpec,
) -> Result<BatchEstimate> {
    Ok(BatchEstimate::from_trials(&batch_loss_trials(
        set, kind, labeling, spec,
    )?))
}

/// `L^CL_B − L^NSCL_B̄` from two independent estimates; the standard errors
/// combine in quadrature.
pub fn batch_gap_estimate(
    set: &EmbeddingSet,
    labeling: &Labeling,
    spec: &BatchSpec,
) -> Result<BatchEstimate> {
    let cl = batch_loss_estimate(set, BatchLossKind::ClB, labeling, spec)?;
    let nscl = batch_loss_estimate(set, BatchLossKind::NsclBbar, labeling, spec)?;
    Ok(BatchEstimate {
        mean: cl.mean - nscl.mean,
        std_error: cl.std_error.hypot(nscl.std_error),
        n_trials: spec.n_trials,
    })
}
