//! The five experiments. Each validates its parameters before touching the
//! output directory, so a config error never leaves partial outputs behind.

mod batch_check;
mod bound_check;
mod gap_sweep;
mod report;
mod ufm_run;

use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::config::{Experiment, ExperimentConfig, Manifest};
use crate::error::{CliError, Result};
use crate::output::OutputDir;

pub use batch_check::BatchCheckParams;
pub use bound_check::{BoundCheckParams, DispersionOverride, GaussianSource, TaskSource};
pub use gap_sweep::{EmbeddingSource, GapSweepParams};
pub use report::ReportParams;
pub use ufm_run::{Thresholds, UfmRunParams};

/// What a finished run reports back to the caller.
#[derive(Clone, Debug)]
pub struct Outcome {
    /// False when a bound or diagnostic check failed; maps to exit code 1.
    pub passed: bool,
    pub headline: String,
}

trait Runner {
    type Params: Serialize + DeserializeOwned;

    fn validate(params: &Self::Params) -> Result<()>;

    fn notes(_params: &Self::Params) -> Vec<String> {
        Vec::new()
    }

    fn execute(params: &Self::Params, seed: u64, out: &OutputDir) -> Result<Outcome>;
}

/// Runs a resolved configuration end to end.
pub fn run(cfg: ExperimentConfig) -> Result<Outcome> {
    match cfg.experiment {
        Experiment::GapSweep => drive::<gap_sweep::GapSweep>(cfg),
        Experiment::UfmRun => drive::<ufm_run::UfmRun>(cfg),
        Experiment::BoundCheck => drive::<bound_check::BoundCheck>(cfg),
        Experiment::BatchCheck => drive::<batch_check::BatchCheck>(cfg),
        Experiment::Report => drive::<report::Report>(cfg),
    }
}

fn drive<R: Runner>(mut cfg: ExperimentConfig) -> Result<Outcome> {
    let params: R::Params = cfg.params()?;
    R::validate(&params)?;
    // echo the parameters with every default filled in
    cfg.parameters = match serde_json::to_value(&params)? {
        Value::Object(map) => map,
        other => {
            return Err(CliError::config(format!(
                "parameters must be an object, got {other}"
            )))
        }
    };
    let out = OutputDir::acquire(&cfg.output_dir)?;
    let manifest = Manifest {
        notes: R::notes(&params),
        config: cfg.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix_secs: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    out.write_json("manifest.json", &manifest)?;
    R::execute(&params, cfg.seed, &out)
}

/// Reclassifies a core error raised while checking parameters.
fn invalid(e: clab_core::Error) -> CliError {
    CliError::config(e.to_string())
}

/// Pearson correlation, `None` when either side is constant.
fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::pearson;

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 1.0]), None);
    }
}
