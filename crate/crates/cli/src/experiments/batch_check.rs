use std::path::PathBuf;

use clab_core::embedspace::{generate_random_unit, load_bundle};
use clab_core::losses::{batch_gap_bound, batch_gap_estimate, BatchGapBound, BatchSpec};
use clab_core::Labeling;
use serde::{Deserialize, Serialize};

use super::{Outcome, Runner};
use crate::error::{CliError, Result};
use crate::output::{sig9, OutputDir};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchCheckParams {
    /// Labeled EMB1 bundle; `None` draws random unit embeddings with blockwise labels.
    pub bundle: Option<PathBuf>,
    pub n_samples: usize,
    pub n_augs: usize,
    pub dim: usize,
    pub n_classes: usize,
    pub batch_sizes: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub n_trials: usize,
}

impl Default for BatchCheckParams {
    fn default() -> Self {
        Self {
            bundle: None,
            n_samples: 2000,
            n_augs: 2,
            dim: 32,
            n_classes: 20,
            batch_sizes: vec![256, 1024],
            epsilons: vec![0.02, 0.05],
            n_trials: 2000,
        }
    }
}

#[derive(Serialize)]
struct Row {
    batch_size: usize,
    epsilon: f64,
    bound: BatchGapBound,
    gap_estimate: f64,
    std_error: f64,
    within: bool,
}

#[derive(Serialize)]
struct Rejected {
    batch_size: usize,
    epsilon: f64,
    reason: String,
}

#[derive(Serialize)]
struct Summary {
    n_classes: usize,
    rows: Vec<Row>,
    rejected: Vec<Rejected>,
    all_within: bool,
    passed: bool,
}

/// Grid points whose bound is defined, and the rest with the reason.
fn split_grid(
    p: &BatchCheckParams,
    n_classes: usize,
) -> (Vec<(usize, f64, BatchGapBound)>, Vec<Rejected>) {
    let mut ok = Vec::new();
    let mut rejected = Vec::new();
    for &b in &p.batch_sizes {
        for &eps in &p.epsilons {
            match batch_gap_bound(b, n_classes, eps) {
                Ok(bound) => ok.push((b, eps, bound)),
                Err(e) => rejected.push(Rejected {
                    batch_size: b,
                    epsilon: eps,
                    reason: e.to_string(),
                }),
            }
        }
    }
    (ok, rejected)
}

pub(super) struct BatchCheck;

impl Runner for BatchCheck {
    type Params = BatchCheckParams;

    fn validate(p: &BatchCheckParams) -> Result<()> {
        if p.n_trials < 2 {
            return Err(CliError::config(
                "n_trials must be >= 2 for a standard error",
            ));
        }
        if p.bundle.is_some() {
            return Ok(());
        }
        if p.n_classes < 2 || !p.n_samples.is_multiple_of(p.n_classes) {
            return Err(CliError::config(format!(
                "n_samples={} must split evenly into n_classes={} >= 2",
                p.n_samples, p.n_classes
            )));
        }
        if split_grid(p, p.n_classes).0.is_empty() {
            return Err(CliError::config(
                "every (batch size, epsilon) pair is outside the bound's domain",
            ));
        }
        Ok(())
    }

    fn execute(p: &BatchCheckParams, seed: u64, out: &OutputDir) -> Result<Outcome> {
        let (set, lab) = match &p.bundle {
            Some(path) => {
                let set = load_bundle(path)?;
                let lab = set.labeling()?;
                (set, lab)
            }
            None => (
                generate_random_unit(p.n_samples, p.n_augs, p.dim, seed)?,
                Labeling::blockwise(p.n_classes, p.n_samples / p.n_classes)?,
            ),
        };
        let (grid, rejected) = split_grid(p, lab.n_classes());
        for r in &rejected {
            eprintln!(
                "warning: B={} eps={} rejected: {}",
                r.batch_size, r.epsilon, r.reason
            );
        }
        let mut rows = Vec::new();
        for (b, eps, bound) in grid {
            let spec = BatchSpec {
                batch_size: b,
                epsilon: eps,
                n_trials: p.n_trials,
                seed,
            };
            let est = batch_gap_estimate(&set, &lab, &spec)?;
            let slack = 3.0 * est.std_error;
            rows.push(Row {
                batch_size: b,
                epsilon: eps,
                bound,
                gap_estimate: est.mean,
                std_error: est.std_error,
                within: est.mean >= bound.lower - slack && est.mean <= bound.upper + slack,
            });
        }
        let table = rows.iter().map(|r| {
            vec![
                r.batch_size.to_string(),
                sig9(r.epsilon),
                r.bound.b_bar.to_string(),
                sig9(r.gap_estimate),
                sig9(r.std_error),
                sig9(r.bound.lower),
                sig9(r.bound.upper),
            ]
        });
        out.write_csv(
            "batch_check.csv",
            &[
                "B",
                "epsilon",
                "b_bar",
                "gap_estimate",
                "se",
                "lower",
                "upper",
            ],
            table,
        )?;
        let all_within = rows.iter().all(|r| r.within);
        let outside = rows.iter().filter(|r| !r.within).count();
        let summary = Summary {
            n_classes: lab.n_classes(),
            rows,
            rejected,
            all_within,
            passed: all_within,
        };
        out.write_json("summary.json", &summary)?;
        Ok(Outcome {
            passed: all_within,
            headline: format!(
                "{} rows, {outside} outside the bound, {} rejected",
                summary.rows.len(),
                summary.rejected.len()
            ),
        })
    }
}
