use std::path::PathBuf;

use clab_core::embedspace::load_bundle;
use clab_core::geometry::{
    cka, class_stats, dispersion, etf_report, rsa, DispersionSummary, EtfReport,
};
use clab_core::losses::loss_gap;
use serde::{Deserialize, Serialize};

use super::{Outcome, Runner};
use crate::error::{CliError, Result};
use crate::output::{sig9, OutputDir};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportParams {
    /// Labeled EMB1 bundle to describe.
    pub bundle: Option<PathBuf>,
    /// Second bundle of the same shape for CKA and RSA.
    pub compare: Option<PathBuf>,
}

#[derive(Serialize)]
struct Losses {
    dcl: f64,
    nscl: f64,
    cl: f64,
    gap_dcl_nscl: f64,
    gap_identity: f64,
    thm1_bound: f64,
}

#[derive(Serialize)]
struct Similarity {
    cka: f64,
    rsa: f64,
}

#[derive(Serialize)]
struct Summary {
    n_samples: usize,
    n_augs: usize,
    dim: usize,
    n_classes: usize,
    losses: Losses,
    dispersion: Option<DispersionSummary>,
    dispersion_error: Option<String>,
    etf: EtfReport,
    similarity: Option<Similarity>,
    gap_within_bound: bool,
}

pub(super) struct Report;

impl Runner for Report {
    type Params = ReportParams;

    fn validate(p: &ReportParams) -> Result<()> {
        match &p.bundle {
            Some(_) => Ok(()),
            None => Err(CliError::config(
                "report needs a bundle path (--bundle PATH)",
            )),
        }
    }

    fn execute(p: &ReportParams, _seed: u64, out: &OutputDir) -> Result<Outcome> {
        let path = p.bundle.as_ref().expect("validated");
        let set = load_bundle(path)?;
        let lab = set.labeling()?;
        let gap = loss_gap(&set, &lab)?;
        let stats = class_stats(&set, &lab)?;
        // coinciding class means leave the CDNV undefined; report, don't abort
        let (disp, dispersion_error) = match dispersion(&stats) {
            Ok(d) => (Some(d), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let similarity = match &p.compare {
            Some(other) => {
                let other = load_bundle(other)?;
                Some(Similarity {
                    cka: cka(&set, &other)?,
                    rsa: rsa(&set, &other)?,
                })
            }
            None => None,
        };

        let k = set.n_augs();
        out.write_csv(
            "anchors.csv",
            &["sample", "aug", "ratio"],
            gap.per_anchor_ratio
                .iter()
                .enumerate()
                .map(|(r, x)| vec![(r / k).to_string(), (r % k).to_string(), sig9(*x)]),
        )?;
        out.write_csv(
            "classes.csv",
            &["class", "count", "variance"],
            stats
                .variances
                .iter()
                .enumerate()
                .map(|(c, v)| vec![c.to_string(), lab.class_counts()[c].to_string(), sig9(*v)]),
        )?;

        let gap_within_bound = gap.gap_dcl_nscl >= 0.0 && gap.gap_dcl_nscl <= gap.thm1_bound;
        let summary = Summary {
            n_samples: set.n_samples(),
            n_augs: k,
            dim: set.dim(),
            n_classes: lab.n_classes(),
            losses: Losses {
                dcl: gap.dcl,
                nscl: gap.nscl,
                cl: gap.cl,
                gap_dcl_nscl: gap.gap_dcl_nscl,
                gap_identity: gap.gap_identity,
                thm1_bound: gap.thm1_bound,
            },
            dispersion: disp,
            dispersion_error,
            etf: etf_report(&set, &lab)?,
            similarity,
            gap_within_bound,
        };
        out.write_json("summary.json", &summary)?;
        Ok(Outcome {
            passed: gap_within_bound,
            headline: format!(
                "gap {} against bound {}",
                sig9(gap.gap_dcl_nscl),
                sig9(gap.thm1_bound)
            ),
        })
    }
}
