//! Global contrastive losses over an embedding set.
//!
//! For anchor view `(i, l1)` and positive view `(i, l2)` the per-pair term is
//!
//! ```text
//! -sim(z_i^l1, z_i^l2) + log Σ_{(j, l3) ∈ D(i)} exp(sim(z_i^l1, z_j^l3))
//! ```
//!
//! averaged over all `N·K²` triples `(i, l1, l2)`. The denominator set `D(i)`
//! is what separates the variants:
//!
//! * [`LossKind::Cl`]: every sample, the anchor's own views included;
//! * [`LossKind::Dcl`]: every sample except `i`;
//! * [`LossKind::Nscl`]: samples whose label differs from `y_i`.
//!
//! `sim` is cosine similarity on the raw embeddings.

mod batch;
mod check;
mod gap;

pub use batch::{
    batch_gap_bound, batch_gap_estimate, batch_loss_estimate, batch_loss_trials, BatchEstimate,
    BatchGapBound, BatchLossKind, BatchSpec,
};
pub use check::{central_difference_gradient, max_relative_error};
pub use gap::{loss_gap, thm1_gap_bound, thm1_gap_bound_linear, GapReport};

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3, Zip};
use serde::{Deserialize, Serialize};

use crate::embedspace::{EmbeddingSet, Labeling};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LossKind {
    Cl,
    Dcl,
    Nscl,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Cl, LossKind::Dcl, LossKind::Nscl];

    pub fn needs_labels(self) -> bool {
        self == LossKind::Nscl
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Cl => "CL",
            LossKind::Dcl => "DCL",
            LossKind::Nscl => "NSCL",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CL" => Ok(LossKind::Cl),
            "DCL" => Ok(LossKind::Dcl),
            "NSCL" => Ok(LossKind::Nscl),
            other => Err(Error::Domain(format!("unknown loss kind {other:?}"))),
        }
    }
}

/// A loss variant with an inverse temperature multiplying every similarity.
///
/// The default inverse temperature is 1, which is the plain cosine objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective {
    pub kind: LossKind,
    pub inverse_temperature: f64,
}

impl Objective {
    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            inverse_temperature: 1.0,
        }
    }

    pub fn with_inverse_temperature(mut self, t: f64) -> Self {
        self.inverse_temperature = t;
        self
    }

    pub fn value(&self, set: &EmbeddingSet, labeling: Option<&Labeling>) -> Result<f64> {
        Ok(self.evaluate(set, labeling, false)?.0)
    }

    /// Gradient with respect to every raw embedding, shaped like `set.data()`.
    pub fn gradient(&self, set: &EmbeddingSet, labeling: Option<&Labeling>) -> Result<Array3<f64>> {
        Ok(self.evaluate(set, labeling, true)?.1.unwrap())
    }

    pub fn value_and_gradient(
        &self,
        set: &EmbeddingSet,
        labeling: Option<&Labeling>,
    ) -> Result<(f64, Array3<f64>)> {
        let (v, g) = self.evaluate(set, labeling, true)?;
        Ok((v, g.unwrap()))
    }

    fn evaluate(
        &self,
        set: &EmbeddingSet,
        labeling: Option<&Labeling>,
        want_grad: bool,
    ) -> Result<(f64, Option<Array3<f64>>)> {
        let t = self.inverse_temperature;
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::Domain(format!(
                "inverse temperature {t} must be positive"
            )));
        }
        let labels = match (self.kind, labeling) {
            (LossKind::Nscl, None) => return Err(Error::MissingLabels),
            (LossKind::Nscl, Some(l)) => {
                l.check_len(set.n_samples())?;
                Some(l.labels())
            }
            _ => None,
        };
        let (n, k, d) = set.data().dim();
        let m = n * k;
        let u = set.normalized();
        let mut logits = u.dot(&u.t());
        logits.mapv_inplace(|s| t * s);

        let in_denominator = |i: usize, j: usize| match self.kind {
            LossKind::Cl => true,
            LossKind::Dcl => j != i,
            LossKind::Nscl => {
                let y = labels.unwrap();
                y[j] != y[i]
            }
        };

        let scale = 1.0 / (k * k * n) as f64;
        let mut total = 0.0;
        // softmax weights over the denominator, only kept for the gradient
        let mut weights = want_grad.then(|| Array2::<f64>::zeros((m, m)));
        for i in 0..n {
            for l1 in 0..k {
                let r = i * k + l1;
                let row = logits.row(r);
                let mut max = f64::NEG_INFINITY;
                for (c, &x) in row.iter().enumerate() {
                    if in_denominator(i, c / k) && x > max {
                        max = x;
                    }
                }
                if max == f64::NEG_INFINITY {
                    return Err(Error::NoNegatives);
                }
                let mut sum = 0.0;
                for (c, &x) in row.iter().enumerate() {
                    if in_denominator(i, c / k) {
                        sum += (x - max).exp();
                    }
                }
                let log_z = max + sum.ln();
                let mut term = 0.0;
                for l2 in 0..k {
                    term += log_z - row[i * k + l2];
                }
                total += term;

                if let Some(w) = weights.as_mut() {
                    let mut wrow = w.row_mut(r);
                    for (c, &x) in row.iter().enumerate() {
                        if in_denominator(i, c / k) {
                            wrow[c] = k as f64 * (x - log_z).exp();
                        }
                    }
                    for l2 in 0..k {
                        wrow[i * k + l2] -= 1.0;
                    }
                }
            }
        }
        let value = total * scale;

        let Some(w) = weights else {
            return Ok((value, None));
        };
        // dL/dS = t·scale·W and S = U Uᵀ, so dL/dU = t·scale·(W + Wᵀ) U
        let mut g = w.dot(&u);
        g += &w.t().dot(&u);
        g.mapv_inplace(|x| x * t * scale);

        // through z ↦ z/‖z‖: project out the radial part and divide by ‖z‖
        let flat = set.flat();
        Zip::from(g.rows_mut())
            .and(u.rows())
            .and(flat.rows())
            .for_each(|mut gr, ur, zr| {
                let radial = gr.dot(&ur);
                let norm = zr.dot(&zr).sqrt();
                Zip::from(&mut gr).and(&ur).for_each(|gv, &uv| {
                    *gv = (*gv - radial * uv) / norm;
                });
            });
        let grad = g
            .into_shape_with_order((n, k, d))
            .expect("contiguous gradient");
        Ok((value, Some(grad)))
    }
}

/// Exact global loss of the given kind at unit inverse temperature.
pub fn contrastive_loss(
    set: &EmbeddingSet,
    kind: LossKind,
    labeling: Option<&Labeling>,
) -> Result<f64> {
    Objective::new(kind).value(set, labeling)
}

/// Analytic gradient of [`contrastive_loss`] with respect to the raw embeddings.
pub fn loss_gradient(
    set: &EmbeddingSet,
    kind: LossKind,
    labeling: Option<&Labeling>,
) -> Result<Array3<f64>> {
    Objective::new(kind).gradient(set, labeling)
}
