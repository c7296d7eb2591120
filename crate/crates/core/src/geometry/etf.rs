use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::embedspace::{EmbeddingSet, Labeling};
use crate::error::{Error, Result};

/// Collapse diagnostics on the unit-normalized embeddings.
///
/// The cosine objectives ignore embedding norms, so class means are taken
/// over `z/‖z‖`. Every mean cosine is computed exactly from per-sample and
/// per-class sums of unit vectors, which costs `O(N·K·d)` rather than a pass
/// over all pairs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EtfReport {
    /// Mean of `‖μ_c‖`.
    pub norm_mean: f64,
    /// `max ‖μ_c‖ − min ‖μ_c‖`.
    pub norm_spread: f64,
    /// `max_{c≠c′} |⟨μ_c, μ_c′⟩ + m²/(C − 1)|`, with `m²` the mean of `‖μ_c‖²`.
    pub gram_deviation: f64,
    /// `‖Σ_c μ_c‖`.
    pub mean_sum_norm: f64,
    /// Mean cosine over pairs of distinct views of the same sample; `None`
    /// when `K = 1`.
    pub aug_cos_same: Option<f64>,
    /// Mean cosine over view pairs from different samples.
    pub aug_cos_diff: f64,
    /// Mean cosine over view pairs from distinct samples of the same class;
    /// `None` when every class is a singleton.
    pub within_class_cos: Option<f64>,
}

fn clamp_cos(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

pub fn etf_report(set: &EmbeddingSet, labeling: &Labeling) -> Result<EtfReport> {
    labeling.check_len(set.n_samples())?;
    let c = labeling.n_classes();
    if c < 2 {
        return Err(Error::Domain("ETF diagnostics need C >= 2".into()));
    }
    let (n, k, d) = set.data().dim();
    let u = set.normalized();
    let y = labeling.labels();

    // s_i = Σ_l u_il
    let mut sample_sums = Array2::<f64>::zeros((n, d));
    for (r, row) in u.rows().into_iter().enumerate() {
        let mut s = sample_sums.row_mut(r / k);
        s += &row;
    }
    let self_sq: Vec<f64> = sample_sums.rows().into_iter().map(|s| s.dot(&s)).collect();

    let mut class_sums = Array2::<f64>::zeros((c, d));
    for (i, s) in sample_sums.rows().into_iter().enumerate() {
        let mut cs = class_sums.row_mut(y[i]);
        cs += &s;
    }
    let total: Array1<f64> = sample_sums.sum_axis(ndarray::Axis(0));

    let counts = labeling.class_counts();
    let mut means = class_sums.clone();
    for (mut m, &nc) in means.rows_mut().into_iter().zip(counts) {
        if nc > 0 {
            m /= (nc * k) as f64;
        }
    }
    let present: Vec<usize> = (0..c).filter(|&cl| counts[cl] > 0).collect();
    let norms: Vec<f64> = present
        .iter()
        .map(|&cl| means.row(cl).dot(&means.row(cl)).sqrt())
        .collect();
    let norm_mean = norms.iter().sum::<f64>() / norms.len() as f64;
    let norm_max = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm_min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let sq_mean = norms.iter().map(|x| x * x).sum::<f64>() / norms.len() as f64;

    let target = -sq_mean / (c as f64 - 1.0);
    let mut gram_deviation: f64 = 0.0;
    for (a, &ca) in present.iter().enumerate() {
        for &cb in &present[a + 1..] {
            let g = means.row(ca).dot(&means.row(cb));
            gram_deviation = gram_deviation.max((g - target).abs());
        }
    }
    let mean_sum = means.sum_axis(ndarray::Axis(0));

    let total_self: f64 = self_sq.iter().sum();
    let (nf, kf) = (n as f64, k as f64);
    let aug_cos_same = (k > 1).then(|| clamp_cos((total_self - nf * kf) / (nf * kf * (kf - 1.0))));
    let aug_cos_diff = clamp_cos((total.dot(&total) - total_self) / (nf * (nf - 1.0) * kf * kf));

    let mut within_num = 0.0;
    let mut within_pairs = 0.0;
    let mut class_self = vec![0.0; c];
    for (i, &sq) in self_sq.iter().enumerate() {
        class_self[y[i]] += sq;
    }
    for cl in 0..c {
        let nc = counts[cl] as f64;
        if counts[cl] >= 2 {
            let cs = class_sums.row(cl);
            within_num += cs.dot(&cs) - class_self[cl];
            within_pairs += nc * (nc - 1.0) * kf * kf;
        }
    }
    let within_class_cos = (within_pairs > 0.0).then(|| clamp_cos(within_num / within_pairs));

    Ok(EtfReport {
        norm_mean,
        norm_spread: norm_max - norm_min,
        gram_deviation,
        mean_sum_norm: mean_sum.dot(&mean_sum).sqrt(),
        aug_cos_same,
        aug_cos_diff,
        within_class_cos,
    })
}
