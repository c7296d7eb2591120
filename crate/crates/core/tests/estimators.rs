use clab_core::bounds::{cor1_bound, BoundInputs};
use clab_core::embedspace::{generate_gaussian_classes, generate_random_unit, GaussianTaskSpec};
use clab_core::fewshot::{estimate_mshot_error, Classifier, FewShotConfig};
use clab_core::geometry::{class_stats, dispersion};
use clab_core::losses::{batch_loss_estimate, BatchLossKind, BatchSpec};
use clab_core::Labeling;

fn spec(trials: usize) -> BatchSpec {
    BatchSpec {
        batch_size: 64,
        epsilon: 0.05,
        n_trials: trials,
        seed: 21,
    }
}

#[test]
fn standard_error_scales_with_root_trials() {
    let set = generate_random_unit(400, 2, 16, 8).unwrap();
    let lab = Labeling::blockwise(10, 40).unwrap();
    let se = |t| {
        batch_loss_estimate(&set, BatchLossKind::ClB, &lab, &spec(t))
            .unwrap()
            .std_error
    };
    let (s1, s2, s4) = (se(2000), se(4000), se(8000));
    // doubling the trials divides the error by √2, quadrupling halves it
    assert!((s1 / s2 / 2f64.sqrt() - 1.0).abs() <= 0.25, "{s1} {s2}");
    assert!((s1 / s4 / 2.0 - 1.0).abs() <= 0.25, "{s1} {s4}");
}

fn two_class_gaussian(sigma: f64, per_class: usize, seed: u64) -> GaussianTaskSpec {
    let d = 16;
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    a[0] = 1.0;
    b[0] = -1.0;
    GaussianTaskSpec {
        class_means: vec![a, b],
        latent_sigma: sigma,
        aug_sigma: 0.0,
        per_class,
        n_augs: 1,
        seed,
    }
}

#[test]
fn indistinguishable_classes_are_coin_flips() {
    let set = generate_random_unit(400, 1, 8, 3).unwrap();
    let lab = Labeling::blockwise(2, 200).unwrap();
    let mut cfg = FewShotConfig::new(5, 2, Classifier::Ncc, 2);
    cfg.n_support_draws = 20;
    let r = estimate_mshot_error(&set, &lab, &cfg, None).unwrap();
    assert!((r.mean_error - 0.5).abs() < 0.05, "{}", r.mean_error);
}

#[test]
fn probe_tracks_ncc_on_gaussian_task() {
    let set = generate_gaussian_classes(&two_class_gaussian(0.5, 300, 4)).unwrap();
    let lab = set.labeling().unwrap();
    let mut ncc = FewShotConfig::new(100, 2, Classifier::Ncc, 9);
    ncc.n_support_draws = 3;
    let lp = FewShotConfig {
        classifier: Classifier::LinearProbe,
        ..ncc.clone()
    };
    let e_ncc = estimate_mshot_error(&set, &lab, &ncc, None).unwrap();
    let e_lp = estimate_mshot_error(&set, &lab, &lp, None).unwrap();
    assert!(e_lp.mean_error <= e_ncc.mean_error + 0.02);
}

#[test]
fn ncc_error_below_cor1_on_true_dispersions() {
    let spec = two_class_gaussian(0.5, 700, 6);
    let set = generate_gaussian_classes(&spec).unwrap();
    let lab = set.labeling().unwrap();
    // population values: σ² = 16·0.25, centers 2 apart
    let inputs = |m| BoundInputs {
        n_way: 2,
        shots: m,
        dir_cdnv: 0.25 / 4.0,
        cdnv: 2.0,
        sqrt_cdnv: 2f64.sqrt(),
    };
    let mut prev = f64::INFINITY;
    for m in [10, 100, 500] {
        let bound = cor1_bound(&inputs(m)).unwrap().bound;
        let r = estimate_mshot_error(
            &set,
            &lab,
            &FewShotConfig::new(m, 2, Classifier::Ncc, 1),
            None,
        )
        .unwrap();
        assert!(r.mean_error <= bound, "m={m}: {} > {bound}", r.mean_error);
        assert!(r.mean_error <= prev + 2.0 * r.std + 1e-12);
        prev = r.mean_error;
    }
}

#[test]
fn gaussian_class_means_converge() {
    let spec = GaussianTaskSpec {
        class_means: vec![vec![1.0, -2.0, 0.5], vec![0.0, 0.0, 3.0]],
        latent_sigma: 0.7,
        aug_sigma: 0.3,
        per_class: 4000,
        n_augs: 2,
        seed: 12,
    };
    let set = generate_gaussian_classes(&spec).unwrap();
    let stats = class_stats(&set, &set.labeling().unwrap()).unwrap();
    // views share a latent, so the mean's standard error is at most that of
    // n independent draws of the full per-view noise
    let sd = (0.7f64.powi(2) + 0.3f64.powi(2) / 2.0).sqrt() / (4000f64).sqrt();
    for (c, mean) in spec.class_means.iter().enumerate() {
        for (t, &mu) in mean.iter().enumerate() {
            assert!((stats.means[[c, t]] - mu).abs() <= 3.0 * sd);
        }
    }
}

#[test]
fn directional_ratio_scales_inversely_with_dimension() {
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
            seed: d as u64,
        };
        let set = generate_gaussian_classes(&spec).unwrap();
        let disp = dispersion(&class_stats(&set, &set.labeling().unwrap()).unwrap()).unwrap();
        let ratio = disp.dir_cdnv_avg / disp.cdnv_avg;
        assert!((ratio * d as f64 - 1.0).abs() <= 0.3, "d={d}: {ratio}");
    }
}

#[test]
fn collapsed_tasks_have_zero_error() {
    let set = clab_core::embedspace::collapsed_simplex_set(4, 6, 2, 3).unwrap();
    let lab = set.labeling().unwrap();
    for classifier in [Classifier::Ncc, Classifier::LinearProbe] {
        for m in [1, 5] {
            let cfg = FewShotConfig::new(m, 2, classifier, 3);
            let r = estimate_mshot_error(&set, &lab, &cfg, None).unwrap();
            assert_eq!(r.mean_error, 0.0);
        }
    }
}
