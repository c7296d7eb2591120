use std::f64::consts::E;

use serde::Serialize;

use super::{contrastive_loss, LossKind};
use crate::embedspace::{EmbeddingSet, Labeling};
use crate::error::{Error, Result};

/// CL, DCL and NSCL values on one labeled set, with the DCL–NSCL gap computed
/// two ways.
#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub dcl: f64,
    pub nscl: f64,
    pub cl: f64,
    /// `dcl - nscl`.
    pub gap_dcl_nscl: f64,
    /// Mean over anchor views of `log(1 + Z_pos\self / Z_neg)`.
    pub gap_identity: f64,
    /// `Z_pos\self / Z_neg` per anchor view, row order `i·K + l`.
    pub per_anchor_ratio: Vec<f64>,
    pub thm1_bound: f64,
}

/// Evaluates all three losses and the per-anchor same-class/negative ratios.
///
/// The ratios use their own similarity loop, independent of the loss code, so
/// `gap_identity` cross-checks `gap_dcl_nscl`.
pub fn loss_gap(set: &EmbeddingSet, labeling: &Labeling) -> Result<GapReport> {
    labeling.check_len(set.n_samples())?;
    let dcl = contrastive_loss(set, LossKind::Dcl, Some(labeling))?;
    let nscl = contrastive_loss(set, LossKind::Nscl, Some(labeling))?;
    let cl = contrastive_loss(set, LossKind::Cl, Some(labeling))?;

    let (n, k, _) = set.data().dim();
    let y = labeling.labels();
    let u = set.normalized();
    let mut per_anchor_ratio = Vec::with_capacity(n * k);
    let mut log_sum = 0.0;
    for i in 0..n {
        for l1 in 0..k {
            let anchor = u.row(i * k + l1);
            let (mut pos, mut neg) = (0.0, 0.0);
            for j in 0..n {
                if j == i {
                    continue;
                }
                for l3 in 0..k {
                    let s: f64 = anchor
                        .iter()
                        .zip(u.row(j * k + l3))
                        .map(|(a, b)| a * b)
                        .sum();
                    if y[j] == y[i] {
                        pos += s.exp();
                    } else {
                        neg += s.exp();
                    }
                }
            }
            let ratio = pos / neg;
            log_sum += ratio.ln_1p();
            per_anchor_ratio.push(ratio);
        }
    }
    Ok(GapReport {
        dcl,
        nscl,
        cl,
        gap_dcl_nscl: dcl - nscl,
        gap_identity: log_sum / (n * k) as f64,
        per_anchor_ratio,
        thm1_bound: thm1_gap_bound(n, labeling.n_max())?,
    })
}

fn check_counts(n_total: usize, n_max: usize) -> Result<()> {
    if n_max == 0 || n_max >= n_total {
        return Err(Error::Domain(format!(
            "gap bound needs 1 <= n_max < N; got n_max={n_max}, N={n_total}"
        )));
    }
    Ok(())
}

/// `log(1 + n_max·e²/(N − n_max))`, the uniform bound on `L_CL − L_NSCL`
/// (and hence on `L_DCL − L_NSCL`).
pub fn thm1_gap_bound(n_total: usize, n_max: usize) -> Result<f64> {
    Ok(thm1_gap_bound_linear(n_total, n_max)?.ln_1p())
}

/// The looser `n_max·e²/(N − n_max)`.
pub fn thm1_gap_bound_linear(n_total: usize, n_max: usize) -> Result<f64> {
    check_counts(n_total, n_max)?;
    Ok(n_max as f64 * E * E / (n_total - n_max) as f64)
}
