//! Few-shot evaluation of a frozen representation.
//!
//! A trial picks a `C′`-class task, draws `m` support samples per class
//! without replacement, fits a classifier on every view of the support
//! samples, and measures the error on every view of the remaining samples of
//! those classes.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::{index, SliceRandom};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::embedspace::{EmbeddingSet, Labeling};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classifier {
    Ncc,
    LinearProbe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FewShotConfig {
    pub shots: usize,
    pub n_way: usize,
    pub n_support_draws: usize,
    /// Defaults to 10 for a strict subset of the classes and 1 when the task
    /// uses every class.
    pub n_tasks: Option<usize>,
    pub classifier: Classifier,
    pub seed: u64,
}

impl FewShotConfig {
    pub fn new(shots: usize, n_way: usize, classifier: Classifier, seed: u64) -> Self {
        Self {
            shots,
            n_way,
            n_support_draws: 5,
            n_tasks: None,
            classifier,
            seed,
        }
    }

    pub fn tasks_for(&self, n_classes: usize) -> usize {
        self.n_tasks
            .unwrap_or(if self.n_way < n_classes { 10 } else { 1 })
    }
}

/// Cross-entropy probe trained by mini-batch SGD with momentum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub epochs: usize,
    /// `None` means `min(support rows, 256)`.
    pub batch_size: Option<usize>,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub momentum: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: None,
            learning_rate: 3e-4,
            weight_decay: 5e-4,
            momentum: 0.9,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("weight_decay", self.weight_decay),
            ("momentum", self.momentum),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.epochs == 0 || self.batch_size == Some(0) {
            return Err(Error::Domain(
                "epochs and batch size must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FewShotResult {
    pub mean_error: f64,
    /// Sample standard deviation over trials, 0 for a single trial.
    pub std: f64,
    /// Row-major over `(task, draw)`.
    pub per_trial: Vec<f64>,
}

/// Index of the nearest center; ties go to the lowest index.
pub fn ncc_predict(centers: ArrayView2<f64>, query: ArrayView1<f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.rows().into_iter().enumerate() {
        let d2: f64 = center
            .iter()
            .zip(query.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d2 < best.1 {
            best = (c, d2);
        }
    }
    best.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProbe {
    /// `C′ × d`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearProbe {
    pub fn logits(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.weights.dot(&x) + &self.bias
    }

    /// Argmax of the logits, lowest index on ties.
    pub fn predict(&self, x: ArrayView1<f64>) -> usize {
        let z = self.logits(x);
        let mut best = 0;
        for (c, &v) in z.iter().enumerate() {
            if v > z[best] {
                best = c;
            }
        }
        best
    }
}

/// Trains a zero-initialized multinomial logistic regression on the rows of
/// `x` with labels in `0..n_classes`.
pub fn train_linear_probe(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    cfg: &ProbeConfig,
    seed: u64,
) -> Result<LinearProbe> {
    cfg.validate()?;
    let (n, d) = x.dim();
    if n == 0 || y.len() != n {
        return Err(Error::InvalidShape(format!(
            "support has {n} rows and {} labels",
            y.len()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidLabel {
            sample: y.iter().position(|&c| c == bad).unwrap(),
            label: bad as i64,
            n_classes,
        });
    }
    let mut present = vec![false; n_classes];
    y.iter().for_each(|&c| present[c] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::DegenerateTask(
            "probe support must contain at least two classes".into(),
        ));
    }

    let batch = cfg.batch_size.unwrap_or(256).min(n);
    let mut w = Array2::<f64>::zeros((n_classes, d));
    let mut b = Array1::<f64>::zeros(n_classes);
    let mut vw = Array2::<f64>::zeros((n_classes, d));
    let mut vb = Array1::<f64>::zeros(n_classes);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::seeded(seed);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let mut gw = Array2::<f64>::zeros((n_classes, d));
            let mut gb = Array1::<f64>::zeros(n_classes);
            for &r in chunk {
                let row = x.row(r);
                let mut z = w.dot(&row) + &b;
                let max = z.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                z.mapv_inplace(|v| (v - max).exp());
                let total = z.sum();
                z /= total;
                z[y[r]] -= 1.0;
                for c in 0..n_classes {
                    let coef = z[c];
                    gw.row_mut(c).scaled_add(coef, &row);
                }
                gb += &z;
            }
            let inv = 1.0 / chunk.len() as f64;
            gw *= inv;
            gb *= inv;
            gw.scaled_add(cfg.weight_decay, &w);
            gb.scaled_add(cfg.weight_decay, &b);
            vw *= cfg.momentum;
            vw += &gw;
            vb *= cfg.momentum;
            vb += &gb;
            w.scaled_add(-cfg.learning_rate, &vw);
            b.scaled_add(-cfg.learning_rate, &vb);
        }
    }
    Ok(LinearProbe {
        weights: w,
        bias: b,
    })
}

fn std_dev(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Monte-Carlo estimate of the expected `m`-shot error.
///
/// Seeds are derived per task and per `(task, draw)`, so NCC and the probe
/// see identical tasks and supports for the same `cfg.seed`.
pub fn estimate_mshot_error(
    set: &EmbeddingSet,
    labeling: &Labeling,
    cfg: &FewShotConfig,
    probe_cfg: Option<&ProbeConfig>,
) -> Result<FewShotResult> {
    labeling.check_len(set.n_samples())?;
    let c_total = labeling.n_classes();
    if cfg.shots == 0 {
        return Err(Error::Domain("shots must be >= 1".into()));
    }
    if cfg.n_way < 2 || cfg.n_way > c_total {
        return Err(Error::Domain(format!(
            "n_way must be in 2..={c_total}, got {}",
            cfg.n_way
        )));
    }
    if cfg.n_support_draws == 0 {
        return Err(Error::Domain("n_support_draws must be positive".into()));
    }
    let default_probe = ProbeConfig::default();
    let probe_cfg = probe_cfg.unwrap_or(&default_probe);
    if cfg.classifier == Classifier::LinearProbe {
        probe_cfg.validate()?;
    }

    let members: Vec<Vec<usize>> = (0..c_total).map(|c| labeling.members(c)).collect();
    let n_tasks = cfg.tasks_for(c_total);
    if n_tasks == 0 {
        return Err(Error::Domain("n_tasks must be positive".into()));
    }
    let (_, k, d) = set.data().dim();
    let data = set.data();

    let mut per_trial = Vec::with_capacity(n_tasks * cfg.n_support_draws);
    for task in 0..n_tasks {
        let classes: Vec<usize> = if cfg.n_way == c_total {
            (0..c_total).collect()
        } else {
            let mut r = rng::stream2(cfg.seed, 0, task as u32);
            let mut picked = index::sample(&mut r, c_total, cfg.n_way).into_vec();
            picked.sort_unstable();
            picked
        };
        for &c in &classes {
            let have = members[c].len();
            if have < cfg.shots + 1 {
                return Err(Error::InsufficientSamples {
                    class: c,
                    have,
                    need: cfg.shots + 1,
                });
            }
        }

        for draw in 0..cfg.n_support_draws {
            let trial = (task * cfg.n_support_draws + draw) as u32;
            let mut r = rng::stream2(cfg.seed, 1, trial);
            let mut support_rows = Vec::new();
            let mut support_y = Vec::new();
            let mut eval = Vec::new();
            for (t, &c) in classes.iter().enumerate() {
                let pool = &members[c];
                let mut chosen = vec![false; pool.len()];
                for p in index::sample(&mut r, pool.len(), cfg.shots) {
                    chosen[p] = true;
                }
                for (p, &i) in pool.iter().enumerate() {
                    if chosen[p] {
                        support_rows.extend((0..k).map(|l| (i, l)));
                        support_y.extend(std::iter::repeat_n(t, k));
                    } else {
                        eval.extend((0..k).map(|l| (i, l, t)));
                    }
                }
            }

            let errors = match cfg.classifier {
                Classifier::Ncc => {
                    let mut centers = Array2::<f64>::zeros((classes.len(), d));
                    for (&(i, l), &t) in support_rows.iter().zip(&support_y) {
                        let mut row = centers.row_mut(t);
                        row += &data.slice(s![i, l, ..]);
                    }
                    centers /= (cfg.shots * k) as f64;
                    eval.iter()
                        .filter(|&&(i, l, t)| {
                            ncc_predict(centers.view(), data.slice(s![i, l, ..])) != t
                        })
                        .count()
                }
                Classifier::LinearProbe => {
                    let x = Array2::from_shape_fn((support_rows.len(), d), |(r, j)| {
                        let (i, l) = support_rows[r];
                        data[[i, l, j]]
                    });
                    let seed = rng::stream2(cfg.seed, 2, trial).next_u64();
                    let probe =
                        train_linear_probe(x.view(), &support_y, classes.len(), probe_cfg, seed)?;
                    eval.iter()
                        .filter(|&&(i, l, t)| probe.predict(data.slice(s![i, l, ..])) != t)
                        .count()
                }
            };
            per_trial.push(errors as f64 / eval.len() as f64);
        }
    }
    let mean_error = per_trial.iter().sum::<f64>() / per_trial.len() as f64;
    Ok(FewShotResult {
        mean_error,
        std: std_dev(&per_trial, mean_error),
        per_trial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array3};

    #[test]
    fn ncc_tie_goes_low() {
        let centers = array![[-1.0, 0.0], [1.0, 0.0]];
        assert_eq!(ncc_predict(centers.view(), array![0.9, 0.0].view()), 1);
        assert_eq!(ncc_predict(centers.view(), array![0.0, 0.0].view()), 0);
    }

    #[test]
    fn probe_separates_point_masses() {
        let x = array![[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [-1.0, 0.0]];
        let y = [0, 0, 1, 1];
        let cfg = ProbeConfig::default();
        let p = train_linear_probe(x.view(), &y, 2, &cfg, 3).unwrap();
        for (r, &t) in y.iter().enumerate() {
            assert_eq!(p.predict(x.row(r)), t);
        }
        let again = train_linear_probe(x.view(), &y, 2, &cfg, 3).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn probe_rejects_single_class() {
        let x = array![[1.0, 0.0], [2.0, 0.0]];
        let r = train_linear_probe(x.view(), &[1, 1], 2, &ProbeConfig::default(), 0);
        assert!(matches!(r, Err(Error::DegenerateTask(_))));
    }

    #[test]
    fn too_few_samples() {
        let data = Array3::from_elem((4, 1, 2), 1.0);
        let set = EmbeddingSet::new(data).unwrap();
        let lab = Labeling::new(vec![0, 0, 1, 1], 2).unwrap();
        let cfg = FewShotConfig::new(2, 2, Classifier::Ncc, 0);
        assert!(matches!(
            estimate_mshot_error(&set, &lab, &cfg, None),
            Err(Error::InsufficientSamples { need: 3, .. })
        ));
    }

    #[test]
    fn default_task_counts() {
        let cfg = FewShotConfig::new(1, 5, Classifier::Ncc, 0);
        assert_eq!(cfg.tasks_for(5), 1);
        assert_eq!(cfg.tasks_for(10), 10);
    }
}
