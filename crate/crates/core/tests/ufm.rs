use clab_core::losses::{loss_gap, thm1_gap_bound, LossKind};
use clab_core::ufm::{ufm_train, Renorm, UfmConfig, UfmTrainer};

fn small(kind: LossKind) -> UfmConfig {
    let mut cfg = UfmConfig::new(4, 6, 2, 4, kind);
    cfg.steps = 1500;
    cfg.seed = 3;
    cfg
}

#[test]
fn nscl_run_collapses_to_the_simplex() {
    let (_, trace) = ufm_train(&small(LossKind::Nscl)).unwrap();
    let min = trace.attainable_minimum.unwrap();
    assert!(trace.final_loss >= min - 1e-9);
    assert!(
        trace.final_loss - min <= 1e-3,
        "{} vs {min}",
        trace.final_loss
    );
    assert!(trace.etf.gram_deviation <= 1e-2);
    assert!(trace.etf.within_class_cos.unwrap() >= 0.999);
    assert!(trace.etf.aug_cos_same.unwrap() >= 0.999);
}

#[test]
fn renormalization_reaches_the_same_loss() {
    let plain = ufm_train(&small(LossKind::Nscl)).unwrap().1.final_loss;
    let mut cfg = small(LossKind::Nscl);
    cfg.renorm = Renorm::PerStepUnit;
    cfg.learning_rate = 0.02;
    let unit = ufm_train(&cfg).unwrap().1.final_loss;
    assert!((plain - unit).abs() <= 1e-3, "{plain} vs {unit}");
}

#[test]
fn dcl_run_gap_stays_below_bound() {
    let mut cfg = UfmConfig::new(5, 20, 2, 8, LossKind::Dcl);
    cfg.steps = 300;
    let bound = thm1_gap_bound(100, 20).unwrap();
    let mut trainer = UfmTrainer::new(cfg).unwrap();
    let lab = trainer.labeling().clone();
    trainer
        .run_with(50, |_, set| {
            let r = loss_gap(set, &lab)?;
            assert!(r.gap_dcl_nscl >= 0.0 && r.gap_dcl_nscl <= bound);
            assert!(r.cl - r.nscl <= bound + 1e-9);
            Ok(())
        })
        .unwrap();
    let (_, trace) = trainer.finish().unwrap();
    assert_eq!(trace.loss_per_step.len(), 300);
}

#[test]
fn runs_are_deterministic() {
    let mut cfg = small(LossKind::Dcl);
    cfg.steps = 50;
    let (a, ta) = ufm_train(&cfg).unwrap();
    let (b, tb) = ufm_train(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta.loss_per_step, tb.loss_per_step);
}
