//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Tolerances are fixed in advance. A criterion that cannot hold
//! is still evaluated as stated and reported as FAIL with its measured values.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::E;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clab_core::bounds::{
    cor1_bound, general_bound, prop1_bound, solve_stationary_cubic, BoundInputs,
};
use clab_core::embedspace::{
    collapsed_simplex_set, generate_gaussian_classes, generate_random_unit, GaussianTaskSpec,
};
use clab_core::fewshot::{estimate_mshot_error, Classifier, FewShotConfig};
use clab_core::geometry::{cka, class_stats, dispersion, rsa};
use clab_core::losses::{
    batch_gap_bound, batch_gap_estimate, central_difference_gradient, loss_gap, max_relative_error,
    thm1_gap_bound, BatchSpec, LossKind, Objective,
};
use clab_core::ufm::{ufm_nscl_minimum, ufm_train, UfmConfig, UfmTrainer};
use clab_core::{Labeling, Result};
use rand::Rng;

use common::{clustered, random_orthogonal, rigid, rng};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn ordering() -> Result<Outcome> {
    let mut r = rng(1001);
    let mut worst = f64::NEG_INFINITY;
    let sets = 200;
    for s in 0..sets {
        let c = r.random_range(2..=32);
        let k = [1, 2, 4][r.random_range(0..3)];
        let d = r.random_range(2..=64);
        let n = r.random_range((c + 1).max(4)..=512);
        let spread = r.random_range(0.05..2.0);
        let (set, lab) = clustered(n, k, d, c, spread, 5000 + s);
        let g = loss_gap(&set, &lab)?;
        let bound = thm1_gap_bound(n, lab.n_max())?;
        let violation = [g.nscl - g.dcl, g.dcl - g.cl, g.cl - g.nscl - bound]
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(violation);
    }
    Ok(Outcome::new(
        worst <= 1e-9,
        format!("{sets} sets, largest violation {worst:.3e} (slack 1e-9)"),
    ))
}

fn label_agnostic() -> Result<Outcome> {
    let (c, per_class) = (5, 40);
    let (set, _) = clustered(c * per_class, 2, 16, c, 0.7, 77);
    let bound = (E * E / (c as f64 - 1.0)).ln_1p();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for s in 0..10 {
        let lab = Labeling::random_balanced(c, per_class, 900 + s)?;
        let g = loss_gap(&set, &lab)?;
        ok &= g.gap_dcl_nscl >= 0.0 && g.gap_dcl_nscl <= bound;
        worst = worst.max(g.gap_dcl_nscl);
    }
    Ok(Outcome::new(
        ok,
        format!("10 relabelings, max gap {worst:.6} within [0, {bound:.6}]"),
    ))
}

fn gap_trend() -> Result<Outcome> {
    let mut ok = true;
    let mut means = Vec::new();
    for c in [4usize, 16, 64] {
        let bound = (E * E / (c as f64 - 1.0)).ln_1p();
        let mut finals = Vec::new();
        for seed in 0..5 {
            let mut cfg = UfmConfig::new(c, 20, 2, c, LossKind::Dcl);
            cfg.steps = 100;
            cfg.seed = seed;
            let mut trainer = UfmTrainer::new(cfg)?;
            let lab = trainer.labeling().clone();
            let initial = loss_gap(&trainer.current_set()?, &lab)?.gap_dcl_nscl;
            ok &= (0.0..=bound).contains(&initial);
            let mut last = initial;
            trainer.run_with(25, |_, set| {
                last = loss_gap(set, &lab)?.gap_dcl_nscl;
                ok &= (0.0..=bound).contains(&last);
                Ok(())
            })?;
            finals.push(last);
        }
        means.push((c, finals.iter().sum::<f64>() / finals.len() as f64, bound));
    }
    let monotone = means.windows(2).all(|w| w[1].1 <= w[0].1);
    let cells: Vec<String> = means
        .iter()
        .map(|(c, g, b)| format!("C={c}: {g:.5} (bound {b:.5})"))
        .collect();
    Ok(Outcome::new(
        ok && monotone,
        format!(
            "seed-mean final gaps {}; contained={ok}, nonincreasing={monotone}",
            cells.join(", ")
        ),
    ))
}

fn collapse() -> Result<Outcome> {
    let stated = 80f64.ln() - 1.25;
    let cfg = UfmConfig::new(5, 20, 2, 8, LossKind::Nscl);
    let (_, trace) = ufm_train(&cfg)?;
    let etf = &trace.etf;
    let two_view = ufm_nscl_minimum(5, 20, 2)?;
    let loss_ok = (trace.final_loss - stated).abs() <= 1e-3;
    let geometry_ok = etf.gram_deviation <= 1e-2
        && etf.mean_sum_norm <= 1e-2
        && etf.norm_spread <= 1e-2
        && etf.aug_cos_same.unwrap_or(0.0) >= 0.999
        && etf.within_class_cos.unwrap_or(0.0) >= 0.999;
    Ok(Outcome::new(
        loss_ok && geometry_ok,
        format!(
            "final loss {:.6} vs stated {stated:.6} (|diff| {:.3e}, tol 1e-3): {}; \
             two-view minimum log(160)-1.25 = {two_view:.6}, |diff| {:.3e}; \
             gram_dev {:.2e}, mean_sum {:.2e}, norm_spread {:.2e}, aug_cos_same {:.6}, \
             within_class_cos {:.6}: {}",
            trace.final_loss,
            (trace.final_loss - stated).abs(),
            if loss_ok { "ok" } else { "FAILED" },
            (trace.final_loss - two_view).abs(),
            etf.gram_deviation,
            etf.mean_sum_norm,
            etf.norm_spread,
            etf.aug_cos_same.unwrap_or(f64::NAN),
            etf.within_class_cos.unwrap_or(f64::NAN),
            if geometry_ok { "ok" } else { "FAILED" },
        ),
    ))
}

fn gradients() -> Result<Outcome> {
    let mut r = rng(55);
    let mut worst: f64 = 0.0;
    for kind in LossKind::ALL {
        for inst in 0..20 {
            let c = r.random_range(2..=3);
            let n = r.random_range(c + 2..=9);
            let k = r.random_range(1..=3);
            let d = r.random_range(2..=5);
            let (set, lab) = clustered(n, k, d, c, r.random_range(0.2..1.5), 700 + inst);
            let obj = Objective::new(kind);
            let g = obj.gradient(&set, Some(&lab))?;
            let fd = central_difference_gradient(&obj, &set, Some(&lab), 1e-5)?;
            worst = worst.max(max_relative_error(&g, &fd));
        }
    }
    Ok(Outcome::new(
        worst <= 1e-5,
        format!("60 instances, max relative error {worst:.3e} (tol 1e-5)"),
    ))
}

fn cor1_machinery() -> Result<Outcome> {
    let mut r = rng(66);
    let mut worst_residual: f64 = 0.0;
    for _ in 0..10_000 {
        let f = r.random_range(0.0..1e4);
        let a = r.random_range(2.0..3.0);
        let y = solve_stationary_cubic(f, a)?;
        let res = (y.powi(3) - 8.0 * f * y - 16.0 * f * a).abs() / (16.0 * f * a).max(1.0);
        worst_residual = worst_residual.max(res);
    }
    let mut dominated = true;
    let mut prop_ok = true;
    for _ in 0..100 {
        let dir: f64 = r.random_range(0.0..1.0);
        let cdnv = dir + r.random_range(0.0..3.0);
        let inputs = BoundInputs {
            n_way: r.random_range(2..12),
            shots: r.random_range(10..1000),
            dir_cdnv: dir,
            cdnv,
            sqrt_cdnv: cdnv.sqrt(),
        };
        let best = cor1_bound(&inputs)?.bound;
        let mut a = 5.0;
        while a <= 1000.0 {
            dominated &= best <= general_bound(&inputs, a)?.value * (1.0 + 1e-12);
            a += 0.05;
        }
        prop_ok &= general_bound(&inputs, 16.0)?.value <= prop1_bound(&inputs)?;
    }
    let flat = BoundInputs {
        n_way: 3,
        shots: 40,
        dir_cdnv: 0.0173,
        cdnv: 0.0,
        sqrt_cdnv: 0.0,
    };
    let exact = cor1_bound(&flat)?.bound == 2.0 * 4.0 * 0.0173;
    Ok(Outcome::new(
        worst_residual <= 1e-6 && dominated && prop_ok && exact,
        format!(
            "max scaled residual {worst_residual:.3e}; cor1<=general on grid: {dominated}; \
             general(16)<=prop1: {prop_ok}; b_lin=0 exact: {exact}"
        ),
    ))
}

fn bound_vs_monte_carlo() -> Result<Outcome> {
    let d = 16;
    let mut ok = true;
    let mut rows = Vec::new();
    for sigma in [0.5, 0.2, 0.1] {
        // ten classes two units apart, 2-way tasks drawn from them
        let class_means: Vec<Vec<f64>> = (0..10)
            .map(|c| {
                (0..d)
                    .map(|t| if t == c { 2f64.sqrt() } else { 0.0 })
                    .collect()
            })
            .collect();
        let spec = GaussianTaskSpec {
            class_means,
            latent_sigma: sigma,
            aug_sigma: 0.0,
            per_class: 600,
            n_augs: 1,
            seed: 31,
        };
        let set = generate_gaussian_classes(&spec)?;
        let lab = set.labeling()?;
        let var = sigma * sigma;
        let v_sym = 2.0 * d as f64 * var / 4.0;
        let mut prev_bound = f64::INFINITY;
        for m in [10usize, 100, 500] {
            let bound = cor1_bound(&BoundInputs {
                n_way: 2,
                shots: m,
                dir_cdnv: var / 4.0,
                cdnv: v_sym,
                sqrt_cdnv: v_sym.sqrt(),
            })?
            .bound;
            ok &= bound <= prev_bound;
            prev_bound = bound;
            let mut cfg = FewShotConfig::new(m, 2, Classifier::Ncc, 8);
            cfg.n_tasks = Some(10);
            let ncc = estimate_mshot_error(&set, &lab, &cfg, None)?;
            cfg.classifier = Classifier::LinearProbe;
            let lp = estimate_mshot_error(&set, &lab, &cfg, None)?;
            ok &= ncc.mean_error <= bound + 3.0 * ncc.std;
            ok &= lp.mean_error <= bound + 3.0 * lp.std;
            rows.push(format!(
                "s={sigma},m={m}: ncc {:.4} lp {:.4} cor1 {bound:.4}",
                ncc.mean_error, lp.mean_error
            ));
        }
    }
    Ok(Outcome::new(ok, rows.join("; ")))
}

fn collapse_zero_error() -> Result<Outcome> {
    let set = collapsed_simplex_set(5, 10, 2, 8)?;
    let lab = set.labeling()?;
    let mut worst: f64 = 0.0;
    for classifier in [Classifier::Ncc, Classifier::LinearProbe] {
        for m in [1, 5] {
            for n_way in [2, 5] {
                let cfg = FewShotConfig::new(m, n_way, classifier, 4);
                worst = worst.max(estimate_mshot_error(&set, &lab, &cfg, None)?.mean_error);
            }
        }
    }
    Ok(Outcome::new(
        worst == 0.0,
        format!("max error over NCC/LP, m in {{1,5}}, 2- and 5-way: {worst}"),
    ))
}

fn batch_interval() -> Result<Outcome> {
    let set = generate_random_unit(2000, 2, 32, 404)?;
    let lab = Labeling::blockwise(20, 100)?;
    let mut ok = true;
    let mut rows = Vec::new();
    for b in [256usize, 1024] {
        for eps in [0.02, 0.05] {
            let bound = batch_gap_bound(b, 20, eps)?;
            let est = batch_gap_estimate(
                &set,
                &lab,
                &BatchSpec {
                    batch_size: b,
                    epsilon: eps,
                    n_trials: 2000,
                    seed: 17,
                },
            )?;
            let inside = est.mean >= bound.lower - 3.0 * est.std_error
                && est.mean <= bound.upper + 3.0 * est.std_error;
            ok &= inside;
            rows.push(format!(
                "B={b},eps={eps}: {:.4}+-{:.4} in [{:.4}, {:.4}]",
                est.mean, est.std_error, bound.lower, bound.upper
            ));
        }
    }
    Ok(Outcome::new(ok, rows.join("; ")))
}

fn similarity() -> Result<Outcome> {
    let (set, _) = clustered(150, 2, 12, 4, 0.6, 12);
    let rotated = rigid(&set, &random_orthogonal(12, 13), &[0.0; 12]);
    let devs = [
        (cka(&set, &set)? - 1.0).abs(),
        (rsa(&set, &set)? - 1.0).abs(),
        (cka(&set, &rotated)? - 1.0).abs(),
        (rsa(&set, &rotated)? - 1.0).abs(),
    ];
    let max_dev = devs.iter().copied().fold(0.0, f64::max);
    let mut ratios = Vec::new();
    for d in [4usize, 16] {
        let class_means: Vec<Vec<f64>> = (0..4)
            .map(|c| (0..d).map(|t| if t == c { 3.0 } else { 0.0 }).collect())
            .collect();
        let spec = GaussianTaskSpec {
            class_means,
            latent_sigma: 0.5,
            aug_sigma: 0.0,
            per_class: 2000,
            n_augs: 1,
            seed: 40 + d as u64,
        };
        let g = generate_gaussian_classes(&spec)?;
        let disp = dispersion(&class_stats(&g, &g.labeling()?)?)?;
        ratios.push((d, disp.dir_cdnv_avg / disp.cdnv_avg));
    }
    let ratio_ok = ratios
        .iter()
        .all(|&(d, r)| (r * d as f64 - 1.0).abs() <= 0.3);
    Ok(Outcome::new(
        max_dev <= 1e-9 && ratio_ok,
        format!(
            "max |index - 1| {max_dev:.2e}; dir/cdnv ratio d=4: {:.4} (1/4), d=16: {:.4} (1/16)",
            ratios[0].1, ratios[1].1
        ),
    ))
}

type Check = fn() -> Result<Outcome>;

fn main() -> ExitCode {
    let criteria: [(u32, &str, Check, u64); 10] = [
        (1, "loss ordering", ordering, 60),
        (2, "label-agnostic gap", label_agnostic, 10),
        (3, "gap-vs-C trend", gap_trend, 600),
        (4, "NSCL collapse", collapse, 300),
        (5, "gradient check", gradients, 60),
        (6, "optimized bound", cor1_machinery, 60),
        (7, "bound vs Monte-Carlo", bound_vs_monte_carlo, 900),
        (8, "collapse gives zero error", collapse_zero_error, 60),
        (9, "batch gap bound", batch_interval, 300),
        (10, "similarity indices", similarity, 60),
    ];
    let mut failed = 0;
    for (id, name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {}: {name}: {detail} [{:.1}s, budget {budget}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 criteria pass", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
