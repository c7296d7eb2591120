use clab_core::embedspace::save_bundle;
use clab_core::losses::LossKind;
use clab_core::ufm::{ufm_train, Optimizer, Renorm, UfmConfig};
use serde::{Deserialize, Serialize};

use super::{invalid, Outcome, Runner};
use crate::error::Result;
use crate::output::{sig9, OutputDir};

/// Pass thresholds for the collapse diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Allowed distance of the final loss from the attainable minimum.
    pub loss_tolerance: f64,
    pub gram_deviation: f64,
    pub mean_sum_norm: f64,
    pub norm_spread: f64,
    /// Lower limit for the same-sample and same-class mean cosines.
    pub min_cosine: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            loss_tolerance: 1e-3,
            gram_deviation: 1e-2,
            mean_sum_norm: 1e-2,
            norm_spread: 1e-2,
            min_cosine: 0.999,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UfmRunParams {
    pub n_classes: usize,
    pub per_class: usize,
    pub n_augs: usize,
    pub dim: usize,
    pub loss_kind: LossKind,
    pub steps: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub init_scale: f64,
    pub renorm: Renorm,
    pub thresholds: Thresholds,
}

impl Default for UfmRunParams {
    fn default() -> Self {
        let base = UfmConfig::new(5, 20, 2, 8, LossKind::Nscl);
        Self {
            n_classes: base.n_classes,
            per_class: base.per_class,
            n_augs: base.n_augs,
            dim: base.dim,
            loss_kind: base.loss_kind,
            steps: base.steps,
            learning_rate: base.learning_rate,
            optimizer: base.optimizer,
            init_scale: base.init_scale,
            renorm: base.renorm,
            thresholds: Thresholds::default(),
        }
    }
}

impl UfmRunParams {
    fn to_config(&self, seed: u64) -> UfmConfig {
        UfmConfig {
            steps: self.steps,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            init_scale: self.init_scale,
            seed,
            renorm: self.renorm,
            ..UfmConfig::new(
                self.n_classes,
                self.per_class,
                self.n_augs,
                self.dim,
                self.loss_kind,
            )
        }
    }
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    threshold: f64,
    passed: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    fn at_least(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            value,
            threshold,
            passed: value >= threshold,
        }
    }
}

#[derive(Serialize)]
struct Summary {
    loss_kind: LossKind,
    steps: usize,
    final_loss: f64,
    final_grad_norm: f64,
    target_loss: Option<f64>,
    attainable_minimum: Option<f64>,
    /// Collapse diagnostics; empty for losses other than NSCL.
    checks: Vec<Check>,
    passed: bool,
}

pub(super) struct UfmRun;

impl Runner for UfmRun {
    type Params = UfmRunParams;

    fn validate(p: &UfmRunParams) -> Result<()> {
        p.to_config(0).validate().map_err(invalid)
    }

    fn notes(p: &UfmRunParams) -> Vec<String> {
        if p.loss_kind != LossKind::Nscl {
            return vec!["collapse diagnostics apply to NSCL runs only; none are checked".into()];
        }
        vec![
            "the loss check targets log(K n (C-1)) - 1 - 1/(C-1), the minimum for K views; target_loss in the summary is the single-view value".into(),
        ]
    }

    fn execute(p: &UfmRunParams, seed: u64, out: &OutputDir) -> Result<Outcome> {
        let (set, trace) = ufm_train(&p.to_config(seed))?;
        save_bundle(&set, out.path("embeddings.emb1"))?;
        out.write_json("trace.json", &trace)?;
        out.write_json("etf.json", &trace.etf)?;
        let rows = trace
            .loss_per_step
            .iter()
            .zip(&trace.grad_norm_per_step)
            .enumerate()
            .map(|(s, (l, g))| vec![s.to_string(), sig9(*l), sig9(*g)]);
        out.write_csv("loss.csv", &["step", "loss", "grad_norm"], rows)?;

        let t = &p.thresholds;
        let etf = &trace.etf;
        let checks = match trace.attainable_minimum {
            Some(min) => vec![
                Check::at_most(
                    "loss_distance",
                    (trace.final_loss - min).abs(),
                    t.loss_tolerance,
                ),
                Check::at_most("gram_deviation", etf.gram_deviation, t.gram_deviation),
                Check::at_most("mean_sum_norm", etf.mean_sum_norm, t.mean_sum_norm),
                Check::at_most("norm_spread", etf.norm_spread, t.norm_spread),
                // a single view has no same-sample pairs to compare
                Check::at_least(
                    "aug_cos_same",
                    etf.aug_cos_same.unwrap_or(1.0),
                    t.min_cosine,
                ),
                Check::at_least(
                    "within_class_cos",
                    etf.within_class_cos.unwrap_or(1.0),
                    t.min_cosine,
                ),
            ],
            None => Vec::new(),
        };
        let passed = checks.iter().all(|c| c.passed);
        let failing: Vec<&str> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect();
        let summary = Summary {
            loss_kind: p.loss_kind,
            steps: p.steps,
            final_loss: trace.final_loss,
            final_grad_norm: trace.final_grad_norm,
            target_loss: trace.target_loss,
            attainable_minimum: trace.attainable_minimum,
            checks,
            passed,
        };
        out.write_json("summary.json", &summary)?;
        let headline = if passed {
            format!(
                "final loss {}, all diagnostics pass",
                sig9(trace.final_loss)
            )
        } else {
            format!(
                "final loss {}, failing: {}",
                sig9(trace.final_loss),
                failing.join(", ")
            )
        };
        Ok(Outcome { passed, headline })
    }
}
