//! Class statistics, CDNV variants, collapse diagnostics and representation
//! similarity.
//!
//! All augmented views are pooled into their sample's class, and variances use
//! the population (divide-by-count) convention.

mod etf;
mod similarity;

pub use etf::{etf_report, EtfReport};
pub use similarity::{cka, rsa};

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::embedspace::{EmbeddingSet, Labeling};
use crate::error::{Error, Result};

/// Per-class moments of the raw embeddings.
#[derive(Clone, Debug, Serialize)]
pub struct ClassStats {
    /// `C × d`, row `c` is the class mean `μ_c`.
    #[serde(skip)]
    pub means: Array2<f64>,
    /// Trace variance `E‖x − μ_c‖²`.
    pub variances: Vec<f64>,
    /// `‖μ_i − μ_j‖`.
    pub pair_dists: Vec<Vec<f64>>,
    /// `Var⟨x − μ_i, u_ij⟩` over class `i`, with `u_ij` the unit vector from
    /// `μ_j` to `μ_i`. Zero where the means coincide.
    pub dir_vars: Vec<Vec<f64>>,
    /// Some pair of class means coincides.
    pub degenerate: bool,
}

impl ClassStats {
    pub fn n_classes(&self) -> usize {
        self.variances.len()
    }
}

/// Averages over ordered class pairs `i ≠ j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DispersionSummary {
    /// `Avg σ_i² / ‖μ_i − μ_j‖²`.
    pub cdnv_avg: f64,
    /// `Avg (σ_i² + σ_j²) / ‖μ_i − μ_j‖²`; this is the CDNV the error bounds use.
    pub cdnv_sym_avg: f64,
    /// `Avg σ_ij² / ‖μ_i − μ_j‖²`.
    pub dir_cdnv_avg: f64,
    /// `Avg sqrt((σ_i² + σ_j²) / ‖μ_i − μ_j‖²)`.
    pub sqrt_cdnv_avg: f64,
}

pub fn class_stats(set: &EmbeddingSet, labeling: &Labeling) -> Result<ClassStats> {
    labeling.check_len(set.n_samples())?;
    let c = labeling.n_classes();
    if c < 2 {
        return Err(Error::Domain("class statistics need C >= 2".into()));
    }
    if let Some(empty) = labeling.class_counts().iter().position(|&n| n == 0) {
        return Err(Error::InsufficientSamples {
            class: empty,
            have: 0,
            need: 1,
        });
    }
    let (_, k, d) = set.data().dim();
    let flat = set.flat();
    let y = labeling.labels();
    let row_class = |r: usize| y[r / k];
    let counts: Vec<f64> = labeling
        .class_counts()
        .iter()
        .map(|&n| (n * k) as f64)
        .collect();

    let mut means = Array2::<f64>::zeros((c, d));
    for (r, row) in flat.rows().into_iter().enumerate() {
        let mut m = means.row_mut(row_class(r));
        m += &row;
    }
    for (mut m, &n) in means.rows_mut().into_iter().zip(&counts) {
        m /= n;
    }

    let mut variances = vec![0.0; c];
    for (r, row) in flat.rows().into_iter().enumerate() {
        let cls = row_class(r);
        let diff = &row - &means.row(cls);
        variances[cls] += diff.dot(&diff);
    }
    for (v, &n) in variances.iter_mut().zip(&counts) {
        *v /= n;
    }

    let mut pair_dists = vec![vec![0.0; c]; c];
    let mut dirs: Vec<Vec<Option<Array1<f64>>>> = vec![vec![None; c]; c];
    let mut degenerate = false;
    for i in 0..c {
        for j in 0..c {
            if i == j {
                continue;
            }
            let diff = &means.row(i) - &means.row(j);
            let dist = diff.dot(&diff).sqrt();
            pair_dists[i][j] = dist;
            if dist > 0.0 {
                dirs[i][j] = Some(diff / dist);
            } else {
                degenerate = true;
            }
        }
    }

    let mut dir_vars = vec![vec![0.0; c]; c];
    for (r, row) in flat.rows().into_iter().enumerate() {
        let i = row_class(r);
        let centered = &row - &means.row(i);
        for j in 0..c {
            if let Some(u) = &dirs[i][j] {
                dir_vars[i][j] += centered.dot(u).powi(2);
            }
        }
    }
    for (row, &n) in dir_vars.iter_mut().zip(&counts) {
        row.iter_mut().for_each(|v| *v /= n);
    }

    Ok(ClassStats {
        means,
        variances,
        pair_dists,
        dir_vars,
        degenerate,
    })
}

pub fn dispersion(stats: &ClassStats) -> Result<DispersionSummary> {
    let c = stats.n_classes();
    let mut acc = [0.0f64; 4];
    for i in 0..c {
        for j in 0..c {
            if i == j {
                continue;
            }
            let d2 = stats.pair_dists[i][j].powi(2);
            if d2 <= 0.0 {
                return Err(Error::UndefinedCdnv { i, j });
            }
            let sym = (stats.variances[i] + stats.variances[j]) / d2;
            acc[0] += stats.variances[i] / d2;
            acc[1] += sym;
            acc[2] += stats.dir_vars[i][j] / d2;
            acc[3] += sym.sqrt();
        }
    }
    let pairs = (c * (c - 1)) as f64;
    Ok(DispersionSummary {
        cdnv_avg: acc[0] / pairs,
        cdnv_sym_avg: acc[1] / pairs,
        dir_cdnv_avg: acc[2] / pairs,
        sqrt_cdnv_avg: acc[3] / pairs,
    })
}
