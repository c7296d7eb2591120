use std::path::PathBuf;

use clab_core::bounds::{
    baseline_bound, cor1_bound, prop1_bound, BoundInputs, CorSolution, MIN_SHOTS,
};
use clab_core::embedspace::{generate_gaussian_classes, load_bundle, GaussianTaskSpec};
use clab_core::fewshot::{estimate_mshot_error, Classifier, FewShotConfig, FewShotResult};
use clab_core::geometry::{class_stats, dispersion};
use clab_core::EmbeddingSet;
use serde::{Deserialize, Serialize};

use super::{invalid, Outcome, Runner};
use crate::error::{CliError, Result};
use crate::output::{sig9, OutputDir};

/// Gaussian classes with means `(separation/√2)·e_c`, so every pair of class
/// centers sits `separation` apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianSource {
    pub n_classes: usize,
    pub dim: usize,
    pub separation: f64,
    pub sigma: f64,
    pub per_class: usize,
}

impl Default for GaussianSource {
    fn default() -> Self {
        Self {
            n_classes: 10,
            dim: 16,
            separation: 2.0,
            sigma: 0.2,
            per_class: 600,
        }
    }
}

impl GaussianSource {
    fn spec(&self, seed: u64) -> GaussianTaskSpec {
        let r = self.separation / 2f64.sqrt();
        GaussianTaskSpec {
            class_means: (0..self.n_classes)
                .map(|c| {
                    (0..self.dim)
                        .map(|t| if t == c { r } else { 0.0 })
                        .collect()
                })
                .collect(),
            latent_sigma: self.sigma,
            aug_sigma: 0.0,
            per_class: self.per_class,
            n_augs: 1,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskSource {
    Gaussian(GaussianSource),
    /// A labeled EMB1 bundle.
    Bundle {
        path: PathBuf,
    },
}

/// Fixed bound inputs in place of the dispersion measured on the source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionOverride {
    pub dir_cdnv: f64,
    pub cdnv: f64,
    pub sqrt_cdnv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundCheckParams {
    pub source: TaskSource,
    pub shots: Vec<usize>,
    pub classifiers: Vec<Classifier>,
    pub n_way: usize,
    pub n_tasks: usize,
    pub n_support_draws: usize,
    pub dispersion: Option<DispersionOverride>,
}

impl Default for BoundCheckParams {
    fn default() -> Self {
        Self {
            source: TaskSource::Gaussian(GaussianSource::default()),
            shots: vec![10, 100, 500],
            classifiers: vec![Classifier::Ncc, Classifier::LinearProbe],
            n_way: 2,
            n_tasks: 10,
            n_support_draws: 5,
            dispersion: None,
        }
    }
}

#[derive(Serialize)]
struct Row {
    m: usize,
    ncc: Option<FewShotResult>,
    linear_probe: Option<FewShotResult>,
    prop1: f64,
    baseline: f64,
    cor1: CorSolution,
    violation: bool,
}

#[derive(Serialize)]
struct Summary {
    bound_inputs: DispersionOverride,
    rows: Vec<Row>,
    warnings: Vec<String>,
    violation_count: usize,
    bound_nonincreasing: bool,
    passed: bool,
}

pub(super) struct BoundCheck;

impl Runner for BoundCheck {
    type Params = BoundCheckParams;

    fn validate(p: &BoundCheckParams) -> Result<()> {
        if p.classifiers.is_empty() || p.n_tasks == 0 || p.n_support_draws == 0 {
            return Err(CliError::config(
                "classifiers, n_tasks and n_support_draws must be non-empty",
            ));
        }
        if !p.shots.iter().any(|&m| m >= MIN_SHOTS) {
            return Err(CliError::config(format!(
                "no shot count reaches the minimum of {MIN_SHOTS}"
            )));
        }
        if let TaskSource::Gaussian(g) = &p.source {
            if g.dim < g.n_classes {
                return Err(CliError::config("gaussian source needs dim >= n_classes"));
            }
            if let Some(&m) = p.shots.iter().find(|&&m| m + 1 > g.per_class) {
                return Err(CliError::config(format!(
                    "m={m} leaves no query points with per_class={}",
                    g.per_class
                )));
            }
        }
        if let Some(d) = &p.dispersion {
            inputs(p.n_way, MIN_SHOTS, d).validate().map_err(invalid)?;
        } else if p.n_way < 2 {
            return Err(CliError::config("n_way must be >= 2"));
        }
        Ok(())
    }

    fn execute(p: &BoundCheckParams, seed: u64, out: &OutputDir) -> Result<Outcome> {
        let set: EmbeddingSet = match &p.source {
            TaskSource::Gaussian(g) => generate_gaussian_classes(&g.spec(seed))?,
            TaskSource::Bundle { path } => load_bundle(path)?,
        };
        let lab = set.labeling()?;
        let disp = match &p.dispersion {
            Some(d) => d.clone(),
            None => {
                let d = dispersion(&class_stats(&set, &lab)?)?;
                DispersionOverride {
                    dir_cdnv: d.dir_cdnv_avg,
                    cdnv: d.cdnv_sym_avg,
                    sqrt_cdnv: d.sqrt_cdnv_avg,
                }
            }
        };

        let mut warnings = Vec::new();
        let mut rows = Vec::new();
        let mut trials = Vec::new();
        for &m in &p.shots {
            if m < MIN_SHOTS {
                let w = format!("m={m} skipped: the bounds need m >= {MIN_SHOTS}");
                eprintln!("warning: {w}");
                warnings.push(w);
                continue;
            }
            let bi = inputs(p.n_way, m, &disp);
            let mut row = Row {
                m,
                ncc: None,
                linear_probe: None,
                prop1: prop1_bound(&bi)?,
                baseline: baseline_bound(&bi)?,
                cor1: cor1_bound(&bi)?,
                violation: false,
            };
            for &classifier in &p.classifiers {
                let cfg = FewShotConfig {
                    n_support_draws: p.n_support_draws,
                    n_tasks: Some(p.n_tasks),
                    ..FewShotConfig::new(m, p.n_way, classifier, seed)
                };
                let r = estimate_mshot_error(&set, &lab, &cfg, None)?;
                row.violation |= r.mean_error - 3.0 * r.std > row.cor1.bound;
                for (idx, e) in r.per_trial.iter().enumerate() {
                    trials.push(vec![
                        (idx / p.n_support_draws).to_string(),
                        (idx % p.n_support_draws).to_string(),
                        classifier_name(classifier).to_string(),
                        m.to_string(),
                        sig9(*e),
                    ]);
                }
                match classifier {
                    Classifier::Ncc => row.ncc = Some(r),
                    Classifier::LinearProbe => row.linear_probe = Some(r),
                }
            }
            rows.push(row);
        }

        let cell = |r: &Option<FewShotResult>, f: fn(&FewShotResult) -> f64| {
            r.as_ref().map_or(String::new(), |r| sig9(f(r)))
        };
        let table = rows.iter().map(|r| {
            vec![
                r.m.to_string(),
                cell(&r.ncc, |x| x.mean_error),
                cell(&r.linear_probe, |x| x.mean_error),
                sig9(r.prop1),
                sig9(r.cor1.bound),
                sig9(r.baseline),
                cell(&r.ncc, |x| x.std),
                cell(&r.linear_probe, |x| x.std),
            ]
        });
        out.write_csv(
            "bound_check.csv",
            &[
                "m",
                "ncc_error",
                "lp_error",
                "prop1",
                "cor1",
                "baseline",
                "ncc_std",
                "lp_std",
            ],
            table,
        )?;
        out.write_csv(
            "fewshot_trials.csv",
            &["task_id", "draw_id", "classifier", "m", "error"],
            trials,
        )?;

        let violation_count = rows.iter().filter(|r| r.violation).count();
        let mut by_m: Vec<(usize, f64)> = rows.iter().map(|r| (r.m, r.cor1.bound)).collect();
        by_m.sort_by_key(|&(m, _)| m);
        let bound_nonincreasing = by_m.windows(2).all(|w| w[1].1 <= w[0].1);
        let summary = Summary {
            bound_inputs: disp,
            rows,
            warnings,
            violation_count,
            bound_nonincreasing,
            passed: violation_count == 0,
        };
        out.write_json("summary.json", &summary)?;
        Ok(Outcome {
            passed: summary.passed,
            headline: format!(
                "{} rows, {violation_count} bound violations",
                summary.rows.len()
            ),
        })
    }
}

fn inputs(n_way: usize, shots: usize, d: &DispersionOverride) -> BoundInputs {
    BoundInputs {
        n_way,
        shots,
        dir_cdnv: d.dir_cdnv,
        cdnv: d.cdnv,
        sqrt_cdnv: d.sqrt_cdnv,
    }
}

fn classifier_name(c: Classifier) -> &'static str {
    match c {
        Classifier::Ncc => "ncc",
        Classifier::LinearProbe => "linear_probe",
    }
}
