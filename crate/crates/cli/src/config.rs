//! Run configuration: a JSON document, optionally overridden from the command line.
//!
//! Parameter keys are snake_case in JSON and kebab-case on the command line, so
//! `"per_class": 20` and `--per-class 20` set the same value. Each experiment
//! parses its parameter map with unknown keys rejected.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GapSweep,
    UfmRun,
    BoundCheck,
    BatchCheck,
    Report,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::GapSweep => "gap-sweep",
            Experiment::UfmRun => "ufm-run",
            Experiment::BoundCheck => "bound-check",
            Experiment::BatchCheck => "batch-check",
            Experiment::Report => "report",
        })
    }
}

/// A fully resolved run, as echoed into `manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub parameters: Map<String, Value>,
}

impl ExperimentConfig {
    /// Parses the parameter map into an experiment's typed parameters.
    pub fn params<P: DeserializeOwned>(&self) -> Result<P> {
        serde_json::from_value(Value::Object(self.parameters.clone()))
            .map_err(|e| CliError::config(format!("{} parameters: {e}", self.experiment)))
    }
}

/// What a config file may contain. Every field is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub parameters: Map<String, Value>,
}

/// Written next to every run's outputs. Feeding it back through `--config`
/// repeats the run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub tool_version: String,
    pub created_unix_secs: u64,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Reads either a plain config document or a previously written manifest.
pub fn load_config_file(path: &Path) -> Result<ConfigFile> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| CliError::config(format!("{}: {e}", path.display()));
    if value.get("config").is_some() {
        let m: Manifest = serde_json::from_value(value).map_err(bad)?;
        return Ok(ConfigFile {
            experiment: Some(m.config.experiment),
            seed: Some(m.config.seed),
            output_dir: Some(m.config.output_dir),
            parameters: m.config.parameters,
        });
    }
    serde_json::from_value(value).map_err(bad)
}

/// Splits `--key value`, `--key=value` and bare `--flag` tokens into
/// snake_case keys with JSON values. Values that do not parse as JSON are
/// taken as strings.
pub fn parse_overrides(tokens: &[String]) -> Result<Vec<(String, Value)>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        let Some(body) = tok.strip_prefix("--").filter(|b| !b.is_empty()) else {
            return Err(CliError::config(format!(
                "expected a --key override, found {tok:?}"
            )));
        };
        let (key, raw) = match body.split_once('=') {
            Some((k, v)) => (k, Some(v.to_string())),
            None => match tokens.get(i + 1) {
                Some(next) if !next.starts_with("--") => {
                    i += 1;
                    (body, Some(next.clone()))
                }
                _ => (body, None),
            },
        };
        if key.contains('_') {
            return Err(CliError::config(format!(
                "override flags are kebab-case: use --{}",
                key.replace('_', "-")
            )));
        }
        let value = match raw {
            None => Value::Bool(true),
            Some(r) => serde_json::from_str(&r).unwrap_or(Value::String(r)),
        };
        out.push((key.replace('-', "_"), value));
        i += 1;
    }
    Ok(out)
}

/// Merges file, explicit flags and overrides, in increasing precedence.
pub fn resolve(
    experiment: Experiment,
    file: Option<ConfigFile>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    overrides: &[String],
) -> Result<ExperimentConfig> {
    let file = file.unwrap_or_default();
    if let Some(e) = file.experiment {
        if e != experiment {
            return Err(CliError::config(format!(
                "config is for {e}, but {experiment} was requested"
            )));
        }
    }
    let mut parameters = file.parameters;
    let mut seed_override = None;
    let mut out_override = None;
    for (key, value) in parse_overrides(overrides)? {
        match key.as_str() {
            "seed" => {
                let s = value.as_u64().ok_or_else(|| {
                    CliError::config(format!("seed must be an integer, got {value}"))
                })?;
                seed_override = Some(s);
            }
            "output_dir" => {
                let p = value
                    .as_str()
                    .ok_or_else(|| CliError::config("output-dir must be a path"))?;
                out_override = Some(PathBuf::from(p));
            }
            _ => {
                parameters.insert(key, value);
            }
        }
    }
    Ok(ExperimentConfig {
        experiment,
        seed: seed.or(seed_override).or(file.seed).unwrap_or(0),
        output_dir: out
            .or(out_override)
            .or(file.output_dir)
            .unwrap_or_else(|| PathBuf::from("runs").join(experiment.to_string())),
        parameters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn overrides_parse_json_then_string() {
        let got = parse_overrides(&toks(
            "--per-class 20 --classes [4,16] --source=random-unit --verbose",
        ))
        .unwrap();
        assert_eq!(got[0], ("per_class".into(), Value::from(20)));
        assert_eq!(got[1], ("classes".into(), serde_json::json!([4, 16])));
        assert_eq!(got[2], ("source".into(), Value::from("random-unit")));
        assert_eq!(got[3], ("verbose".into(), Value::Bool(true)));
    }

    #[test]
    fn snake_case_flags_are_rejected() {
        assert!(parse_overrides(&toks("--per_class 3")).is_err());
        assert!(parse_overrides(&toks("stray")).is_err());
    }

    #[test]
    fn flags_beat_overrides_beat_file() {
        let file = ConfigFile {
            seed: Some(1),
            parameters: Map::from_iter([("steps".to_string(), Value::from(10))]),
            ..Default::default()
        };
        let cfg = resolve(
            Experiment::UfmRun,
            Some(file.clone()),
            None,
            None,
            &toks("--seed 2 --steps 3"),
        )
        .unwrap();
        assert_eq!(cfg.seed, 2);
        assert_eq!(cfg.parameters["steps"], Value::from(3));
        let cfg = resolve(
            Experiment::UfmRun,
            Some(file),
            Some(7),
            None,
            &toks("--seed 2"),
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn experiment_mismatch_is_a_config_error() {
        let file = ConfigFile {
            experiment: Some(Experiment::GapSweep),
            ..Default::default()
        };
        let err = resolve(Experiment::UfmRun, Some(file), None, None, &[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
