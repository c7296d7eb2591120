use clab_core::embedspace::generate_random_unit;
use clab_core::losses::{loss_gap, LossKind};
use clab_core::rng::stream2;
use clab_core::ufm::{UfmConfig, UfmTrainer};
use clab_core::{EmbeddingSet, Labeling};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{invalid, pearson, Outcome, Runner};
use crate::error::{CliError, Result};
use crate::output::{sig9, OutputDir};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingSource {
    /// Free embeddings trained on the DCL objective.
    UfmDcl,
    /// Uniform on the sphere, labels assigned in blocks.
    RandomUnit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapSweepParams {
    pub classes: Vec<usize>,
    pub per_class: usize,
    pub n_augs: usize,
    /// Embedding dimension; `None` uses `d = C`.
    pub dim: Option<usize>,
    pub source: EmbeddingSource,
    pub repeats: usize,
    /// UFM source only.
    pub steps: usize,
    pub learning_rate: f64,
}

impl Default for GapSweepParams {
    fn default() -> Self {
        Self {
            classes: vec![4, 16, 64],
            per_class: 20,
            n_augs: 2,
            dim: None,
            source: EmbeddingSource::UfmDcl,
            repeats: 5,
            steps: 100,
            learning_rate: 0.1,
        }
    }
}

impl GapSweepParams {
    fn ufm_config(&self, c: usize, seed: u64) -> UfmConfig {
        let mut cfg = UfmConfig::new(
            c,
            self.per_class,
            self.n_augs,
            self.dim.unwrap_or(c),
            LossKind::Dcl,
        );
        cfg.steps = self.steps;
        cfg.learning_rate = self.learning_rate;
        cfg.seed = seed;
        cfg
    }

    fn build(&self, c: usize, seed: u64) -> Result<(EmbeddingSet, Labeling)> {
        match self.source {
            EmbeddingSource::UfmDcl => {
                let mut trainer = UfmTrainer::new(self.ufm_config(c, seed))?;
                trainer.run()?;
                let lab = trainer.labeling().clone();
                Ok((trainer.finish()?.0, lab))
            }
            EmbeddingSource::RandomUnit => {
                let d = self.dim.unwrap_or(c);
                let set = generate_random_unit(c * self.per_class, self.n_augs, d, seed)?;
                Ok((set, Labeling::blockwise(c, self.per_class)?))
            }
        }
    }
}

#[derive(Serialize)]
struct ClassSummary {
    n_classes: usize,
    mean_gap: f64,
    bound: f64,
}

#[derive(Serialize)]
struct Summary {
    rows: usize,
    pearson_gap_bound: Option<f64>,
    per_class_count: Vec<ClassSummary>,
    all_within_bound: bool,
    all_nonnegative: bool,
    bound_strictly_decreasing: bool,
    passed: bool,
}

pub(super) struct GapSweep;

impl Runner for GapSweep {
    type Params = GapSweepParams;

    fn validate(p: &GapSweepParams) -> Result<()> {
        if p.classes.is_empty() || p.repeats == 0 {
            return Err(CliError::config("classes and repeats must be non-empty"));
        }
        for &c in &p.classes {
            if c < 2 {
                return Err(CliError::config(format!(
                    "every class count must be >= 2, got {c}"
                )));
            }
            if p.source == EmbeddingSource::UfmDcl {
                p.ufm_config(c, 0).validate().map_err(invalid)?;
            } else if p.per_class == 0 || p.n_augs == 0 || p.dim == Some(0) {
                return Err(CliError::config(
                    "per_class, n_augs and dim must be positive",
                ));
            }
        }
        Ok(())
    }

    fn notes(p: &GapSweepParams) -> Vec<String> {
        vec![format!(
            "each class count is averaged over {} seeded embedding draws rather than random class subsets of a fixed dataset",
            p.repeats
        )]
    }

    fn execute(p: &GapSweepParams, seed: u64, out: &OutputDir) -> Result<Outcome> {
        let mut rows = Vec::new();
        let (mut gaps, mut bounds) = (Vec::new(), Vec::new());
        let mut per_c = Vec::new();
        for &c in &p.classes {
            let mut sum = 0.0;
            let mut bound = f64::NAN;
            for rep in 0..p.repeats {
                let run_seed = stream2(seed, c as u32, rep as u32).next_u64();
                let (set, lab) = p.build(c, run_seed)?;
                let g = loss_gap(&set, &lab)?;
                rows.push(vec![
                    c.to_string(),
                    rep.to_string(),
                    sig9(g.dcl),
                    sig9(g.nscl),
                    sig9(g.gap_dcl_nscl),
                    sig9(g.thm1_bound),
                ]);
                gaps.push(g.gap_dcl_nscl);
                bounds.push(g.thm1_bound);
                sum += g.gap_dcl_nscl;
                bound = g.thm1_bound;
            }
            per_c.push(ClassSummary {
                n_classes: c,
                mean_gap: sum / p.repeats as f64,
                bound,
            });
        }
        out.write_csv(
            "gap_sweep.csv",
            &["C", "repeat", "dcl", "nscl", "gap", "bound"],
            rows,
        )?;

        let all_within_bound = gaps.iter().zip(&bounds).all(|(g, b)| *g <= *b);
        let all_nonnegative = gaps.iter().all(|&g| g >= 0.0);
        let mut by_c: Vec<(usize, f64)> = per_c.iter().map(|s| (s.n_classes, s.bound)).collect();
        by_c.sort_by_key(|&(c, _)| c);
        by_c.dedup_by_key(|&mut (c, _)| c);
        let bound_strictly_decreasing = by_c.windows(2).all(|w| w[1].1 < w[0].1);
        let summary = Summary {
            rows: gaps.len(),
            pearson_gap_bound: pearson(&gaps, &bounds),
            per_class_count: per_c,
            all_within_bound,
            all_nonnegative,
            bound_strictly_decreasing,
            passed: all_within_bound && all_nonnegative,
        };
        out.write_json("summary.json", &summary)?;
        Ok(Outcome {
            passed: summary.passed,
            headline: format!(
                "{} rows, gaps within bound: {all_within_bound}, nonnegative: {all_nonnegative}",
                summary.rows
            ),
        })
    }
}
