use dense_points::loss::LossKind;
use dense_points::sim::{
    divergence_sweep, lr_at, train, Model, Objective, Outcome, SyntheticTask, TaskParams,
    TrainConfig, Variant, Weighting,
};
use dense_points::weighting::BwsConfig;

fn configs() -> Vec<TrainConfig> {
    let dp = LossKind::dense_point(0.25).unwrap();
    let mut out = Vec::new();
    for loss in [dp, LossKind::SmoothL1] {
        for weighting in [
            Weighting::Static { k: 1.0 },
            Weighting::Static { k: 3.0 },
            Weighting::Bws(BwsConfig::new(1.0, true, true).unwrap()),
            Weighting::Bws(BwsConfig::new(2.0, false, true).unwrap()),
            Weighting::Bws(BwsConfig::new(1.0, false, false).unwrap()),
        ] {
            out.push(TrainConfig {
                loss,
                weighting,
                ..TrainConfig::default()
            });
        }
    }
    out
}

fn detached(w: &Weighting) -> bool {
    match w {
        Weighting::Static { .. } => true,
        Weighting::Bws(c) => c.detach_weights,
    }
}

/// Analytic parameter gradient at initialisation against central differences.
/// Detached weightings are differentiated with their multipliers frozen at
/// the initial point; attached ones through the full total.
#[test]
fn initial_gradient_matches_finite_differences() {
    let task = SyntheticTask::generate(&TaskParams::default()).unwrap();
    for cfg in configs() {
        let obj = Objective::new(&task, &cfg);
        let model = Model::init(&task, cfg.seed);
        let eval = obj.evaluate(&model).unwrap().unwrap();
        let frozen = eval.multipliers;
        let objective = |m: &Model| {
            let e = obj.evaluate(m).unwrap().unwrap();
            if detached(&cfg.weighting) {
                e.values.iter().zip(frozen).map(|(v, w)| v * w).sum::<f64>()
            } else {
                e.combined.total
            }
        };

        let scale = (0..model.len())
            .map(|i| eval.gradient.get(i).abs())
            .fold(0.0, f64::max);
        let mut worst = 0.0f64;
        let indices = (0..model.reg.len())
            .step_by(3)
            .chain(model.reg.len()..model.len());
        for i in indices {
            let h = 1e-6;
            let mut m = model.clone();
            m.set(i, model.get(i) + h);
            let up = objective(&m);
            m.set(i, model.get(i) - h);
            let down = objective(&m);
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((fd - eval.gradient.get(i)).abs() / scale);
        }
        assert!(
            worst < 1e-5,
            "{} {}: relative gradient error {worst:e}",
            cfg.loss.label(),
            cfg.weighting.label()
        );
    }
}

#[test]
fn clean_task_converges_for_both_losses() {
    let task = SyntheticTask::generate(&TaskParams {
        outlier_frac: 0.0,
        ..TaskParams::default()
    })
    .unwrap();
    for loss in [LossKind::dense_point(0.25).unwrap(), LossKind::SmoothL1] {
        let cfg = TrainConfig {
            base_lr: 1000.0,
            loss,
            ..TrainConfig::default()
        };
        let out = train(&task, &cfg).unwrap();
        assert_eq!(out.outcome, Outcome::Completed);
        let first = out.records.first().unwrap();
        let last = out.records.last().unwrap();
        assert!(
            last.total < 0.1 * first.total,
            "{}: {} -> {}",
            loss.label(),
            first.total,
            last.total
        );
        for j in 1..3 {
            assert!(last.losses[j] < 0.1 * first.losses[j]);
        }
    }
}

#[test]
fn training_is_bitwise_deterministic() {
    let task = SyntheticTask::generate(&TaskParams::default()).unwrap();
    let cfg = TrainConfig {
        base_lr: 1e4,
        weighting: Weighting::Bws(BwsConfig::default()),
        ..TrainConfig::default()
    };
    let a = train(&task, &cfg).unwrap();
    let b = train(&task, &cfg).unwrap();
    assert_eq!(a, b);
    let bits = |r: &dense_points::sim::TrainResult| {
        r.records
            .iter()
            .map(|x| x.total.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn recorded_rates_follow_schedule() {
    let task = SyntheticTask::generate(&TaskParams {
        n_samples: 4,
        n_points: 3,
        ..TaskParams::default()
    })
    .unwrap();
    let cfg = TrainConfig {
        base_lr: 0.01,
        ..TrainConfig::default()
    };
    let out = train(&task, &cfg).unwrap();
    for r in &out.records {
        assert_eq!(r.lr, lr_at(r.iter, &cfg));
    }
    assert_eq!(out.records[0].lr, 0.001);
    assert!((out.records[1999].lr - 1e-4).abs() < 1e-18);
}

#[test]
fn tiny_rate_grid_always_completes() {
    let task = SyntheticTask::generate(&TaskParams {
        n_samples: 8,
        n_points: 20,
        ..TaskParams::default()
    })
    .unwrap();
    let variants = [
        Variant::new("sl1", LossKind::SmoothL1, Weighting::Static { k: 1.0 }),
        Variant::new(
            "dp",
            LossKind::dense_point(0.5).unwrap(),
            Weighting::Bws(BwsConfig::default()),
        ),
    ];
    let base = TrainConfig {
        total_iters: 200,
        warmup_iters: 20,
        decay_points: vec![150, 180],
        ..TrainConfig::default()
    };
    let table = divergence_sweep(&task, &base, &[1e-3], &variants).unwrap();
    assert!(table.rows.iter().all(|r| r.outcome == Outcome::Completed));
    assert_eq!(table.lr_max_of("sl1"), Some(1e-3));
    assert_eq!(table.lr_max_of("dp"), Some(1e-3));
}

#[test]
fn huge_rate_diverges_and_stops_early() {
    let task = SyntheticTask::generate(&TaskParams::default()).unwrap();
    let cfg = TrainConfig {
        base_lr: 1e14,
        loss: LossKind::SmoothL1,
        ..TrainConfig::default()
    };
    let out = train(&task, &cfg).unwrap();
    let Outcome::Diverged { iter } = out.outcome else {
        panic!("expected divergence")
    };
    assert_eq!(out.records.len(), iter + 1);
    assert!(iter < cfg.total_iters);
}
