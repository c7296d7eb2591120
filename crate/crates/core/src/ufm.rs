//! Unconstrained-features training: every view of every sample is a free
//! vector in `R^d`, optimized directly against a contrastive loss.
//!
//! Labels are blockwise (class `c` owns samples `c·n .. (c+1)·n`). Parameters
//! start i.i.d. `Normal(0, init_scale²/d)`.

use ndarray::Array3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embedspace::{EmbeddingSet, Labeling};
use crate::error::{Error, Result};
use crate::geometry::{etf_report, EtfReport};
use crate::losses::{LossKind, Objective};
use crate::rng;

/// Gradients above this norm are rescaled to it before the update.
pub const GRAD_CLIP: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Gd,
    /// Bias-corrected Adam with `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`.
    AdaptiveMoment,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Renorm {
    None,
    /// Project every vector back to the unit sphere after each update.
    PerStepUnit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UfmConfig {
    pub n_classes: usize,
    pub per_class: usize,
    pub n_augs: usize,
    pub dim: usize,
    pub loss_kind: LossKind,
    #[serde(default = "defaults::steps")]
    pub steps: usize,
    #[serde(default = "defaults::learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "defaults::optimizer")]
    pub optimizer: Optimizer,
    #[serde(default = "defaults::init_scale")]
    pub init_scale: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::renorm")]
    pub renorm: Renorm,
}

mod defaults {
    use super::{Optimizer, Renorm};

    pub fn steps() -> usize {
        5000
    }
    pub fn learning_rate() -> f64 {
        0.1
    }
    pub fn optimizer() -> Optimizer {
        Optimizer::AdaptiveMoment
    }
    pub fn init_scale() -> f64 {
        1.0
    }
    pub fn renorm() -> Renorm {
        Renorm::None
    }
}

impl UfmConfig {
    pub fn new(
        n_classes: usize,
        per_class: usize,
        n_augs: usize,
        dim: usize,
        loss_kind: LossKind,
    ) -> Self {
        Self {
            n_classes,
            per_class,
            n_augs,
            dim,
            loss_kind,
            steps: defaults::steps(),
            learning_rate: defaults::learning_rate(),
            optimizer: defaults::optimizer(),
            init_scale: defaults::init_scale(),
            seed: 0,
            renorm: defaults::renorm(),
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_classes * self.per_class
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 || self.per_class == 0 || self.n_augs == 0 {
            return Err(Error::Domain(format!(
                "need C >= 2, n >= 1, K >= 1; got C={}, n={}, K={}",
                self.n_classes, self.per_class, self.n_augs
            )));
        }
        if self.dim + 1 < self.n_classes {
            return Err(Error::Domain(format!(
                "need d >= C - 1; got d={}, C={}",
                self.dim, self.n_classes
            )));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("init_scale", self.init_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `log(n(C − 1)) − 1 − 1/(C − 1)`, the single-view NSCL minimum.
pub fn ufm_target_loss(n_classes: usize, per_class: usize) -> Result<f64> {
    if n_classes < 2 || per_class == 0 {
        return Err(Error::Domain(format!(
            "need C >= 2 and n >= 1; got C={n_classes}, n={per_class}"
        )));
    }
    let cm1 = (n_classes - 1) as f64;
    Ok((per_class as f64 * cm1).ln() - 1.0 - 1.0 / cm1)
}

/// `log(K·n(C − 1)) − 1 − 1/(C − 1)`: the NSCL value at the collapsed simplex
/// when each sample has `K` views, each of which counts as a negative.
/// Equals [`ufm_target_loss`] for `K = 1`.
pub fn ufm_nscl_minimum(n_classes: usize, per_class: usize, n_augs: usize) -> Result<f64> {
    if n_augs == 0 {
        return Err(Error::Domain("need K >= 1".into()));
    }
    Ok(ufm_target_loss(n_classes, per_class)? + (n_augs as f64).ln())
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainTrace {
    /// Loss before each update.
    pub loss_per_step: Vec<f64>,
    /// Unclipped gradient norm before each update.
    pub grad_norm_per_step: Vec<f64>,
    pub final_loss: f64,
    pub final_grad_norm: f64,
    /// NSCL runs only: [`ufm_target_loss`].
    pub target_loss: Option<f64>,
    /// NSCL runs only: [`ufm_nscl_minimum`] for the run's `K`.
    pub attainable_minimum: Option<f64>,
    pub etf: EtfReport,
}

/// Step-wise trainer; [`ufm_train`] drives it to completion.
pub struct UfmTrainer {
    cfg: UfmConfig,
    labeling: Labeling,
    objective: Objective,
    params: Array3<f64>,
    first_moment: Array3<f64>,
    second_moment: Array3<f64>,
    steps_taken: usize,
    losses: Vec<f64>,
    grad_norms: Vec<f64>,
}

impl UfmTrainer {
    pub fn new(cfg: UfmConfig) -> Result<Self> {
        cfg.validate()?;
        let labeling = Labeling::blockwise(cfg.n_classes, cfg.per_class)?;
        let shape = (cfg.n_samples(), cfg.n_augs, cfg.dim);
        let std = cfg.init_scale / (cfg.dim as f64).sqrt();
        let mut r = rng::seeded(cfg.seed);
        let params =
            Array3::from_shape_simple_fn(shape, || std * r.sample::<f64, _>(StandardNormal));
        Ok(Self {
            objective: Objective::new(cfg.loss_kind),
            labeling,
            first_moment: Array3::zeros(shape),
            second_moment: Array3::zeros(shape),
            params,
            steps_taken: 0,
            losses: Vec::with_capacity(cfg.steps),
            grad_norms: Vec::with_capacity(cfg.steps),
            cfg,
        })
    }

    pub fn config(&self) -> &UfmConfig {
        &self.cfg
    }

    pub fn labeling(&self) -> &Labeling {
        &self.labeling
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// The current parameters as a labeled set.
    pub fn current_set(&self) -> Result<EmbeddingSet> {
        EmbeddingSet::with_labels(
            self.params.clone(),
            self.labeling.labels().to_vec(),
            self.cfg.n_classes,
        )
    }

    fn loss_and_grad(&self) -> Result<(f64, Array3<f64>)> {
        let set = self.current_set()?;
        self.objective
            .value_and_gradient(&set, Some(&self.labeling))
    }

    /// One update. Returns the loss evaluated before the update.
    pub fn step(&mut self) -> Result<f64> {
        let (loss, mut grad) = self.loss_and_grad()?;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                step: self.steps_taken,
                last_loss: self.losses.last().copied().unwrap_or(f64::NAN),
            });
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        self.losses.push(loss);
        self.grad_norms.push(norm);
        if norm > GRAD_CLIP {
            grad *= GRAD_CLIP / norm;
        }

        let lr = self.cfg.learning_rate;
        match self.cfg.optimizer {
            Optimizer::Gd => self.params.scaled_add(-lr, &grad),
            Optimizer::AdaptiveMoment => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                const EPS: f64 = 1e-8;
                let t = (self.steps_taken + 1) as i32;
                let c1 = 1.0 - B1.powi(t);
                let c2 = 1.0 - B2.powi(t);
                ndarray::Zip::from(&mut self.params)
                    .and(&mut self.first_moment)
                    .and(&mut self.second_moment)
                    .and(&grad)
                    .for_each(|p, m, v, &g| {
                        *m = B1 * *m + (1.0 - B1) * g;
                        *v = B2 * *v + (1.0 - B2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
                    });
            }
        }
        if self.cfg.renorm == Renorm::PerStepUnit {
            for mut row in self.params.rows_mut() {
                let n = row.dot(&row).sqrt();
                if n > 0.0 {
                    row /= n;
                }
            }
        }
        self.steps_taken += 1;
        Ok(loss)
    }

    /// Runs the remaining configured steps. `observer` sees the state after
    /// every `every`-th step and after the last one.
    pub fn run_with<F>(&mut self, every: usize, mut observer: F) -> Result<()>
    where
        F: FnMut(usize, &EmbeddingSet) -> Result<()>,
    {
        while self.steps_taken < self.cfg.steps {
            self.step()?;
            let done = self.steps_taken == self.cfg.steps;
            if done || (every > 0 && self.steps_taken.is_multiple_of(every)) {
                observer(self.steps_taken, &self.current_set()?)?;
            }
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_with(0, |_, _| Ok(()))
    }

    pub fn finish(self) -> Result<(EmbeddingSet, TrainTrace)> {
        let set = self.current_set()?;
        let (final_loss, grad) = self.loss_and_grad()?;
        if !final_loss.is_finite() {
            return Err(Error::Divergence {
                step: self.steps_taken,
                last_loss: final_loss,
            });
        }
        let final_grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let (target_loss, attainable_minimum) = if self.cfg.loss_kind == LossKind::Nscl {
            (
                Some(ufm_target_loss(self.cfg.n_classes, self.cfg.per_class)?),
                Some(ufm_nscl_minimum(
                    self.cfg.n_classes,
                    self.cfg.per_class,
                    self.cfg.n_augs,
                )?),
            )
        } else {
            (None, None)
        };
        let etf = etf_report(&set, &self.labeling)?;
        Ok((
            set,
            TrainTrace {
                loss_per_step: self.losses,
                grad_norm_per_step: self.grad_norms,
                final_loss,
                final_grad_norm,
                target_loss,
                attainable_minimum,
                etf,
            },
        ))
    }
}

pub fn ufm_train(cfg: &UfmConfig) -> Result<(EmbeddingSet, TrainTrace)> {
    let mut trainer = UfmTrainer::new(cfg.clone())?;
    trainer.run()?;
    trainer.finish()
}
