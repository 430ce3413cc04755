use camegrad::oracle::primal_maxmin_oracle;
use camegrad::toy::{
    conflict_landscape, train, train_problem, ProblemKind, QuadraticBowl, TrainConfig, TrainError,
};
use camegrad::{rectify, GradientSet, SeededRng, SolverSettings, Strategy};

#[test]
fn rectified_step_decreases_both_conflict_losses() {
    let mut rng = SeededRng::new(2024);
    let settings = SolverSettings::default();
    let mut checked = 0;
    while checked < 200 {
        let theta = [rng.uniform_range(-3.0, 3.0), rng.uniform_range(-3.0, 3.0)];
        let (losses, grads) = conflict_landscape(theta);
        let gs = GradientSet::from_rows(vec![grads[0].to_vec(), grads[1].to_vec()], vec![1.0, 1.0])
            .unwrap();
        if primal_maxmin_oracle(&gs, 0.5, 2000).unwrap().best_value <= 0.01 {
            continue;
        }
        checked += 1;
        let u = rectify(&gs, 0.5, &settings).unwrap().u_rect;
        let u = u.as_slice();
        let next = [theta[0] - 1e-4 * u[0], theta[1] - 1e-4 * u[1]];
        let (after, _) = conflict_landscape(next);
        assert!(
            after[0] < losses[0] && after[1] < losses[1],
            "theta {theta:?}"
        );
    }
}

#[test]
fn linear_descent_is_monotone_on_a_convex_bowl() {
    let bowl = QuadraticBowl::default();
    let limit = 2.0 / bowl.max_curvature();
    for frac in [0.1, 0.5, 0.9, 0.99] {
        for seed in 0..5 {
            let cfg = TrainConfig::new(
                ProblemKind::Quadratic,
                Strategy::Linear,
                frac * limit,
                200,
                seed,
            );
            let log = train_problem(&bowl, &cfg).unwrap();
            for w in log.records.windows(2) {
                assert!(
                    w[1].losses[0] <= w[0].losses[0],
                    "eta {} seed {seed} step {}",
                    cfg.eta,
                    w[1].step
                );
            }
        }
    }
}

#[test]
fn bowl_diverges_above_the_stability_limit() {
    let cfg = TrainConfig::new(ProblemKind::Quadratic, Strategy::Linear, 0.6, 5000, 1);
    assert!(matches!(train(&cfg), Err(TrainError::Diverged { .. })));
}

#[test]
fn identical_configs_give_identical_logs() {
    for problem in [
        ProblemKind::Conflict,
        ProblemKind::SharpFlat,
        ProblemKind::Mlp,
    ] {
        for strategy in [Strategy::Full, Strategy::S1SgldS3] {
            let cfg = TrainConfig::new(problem, strategy, 0.01, 150, 42);
            let a = train(&cfg).unwrap();
            let b = train(&cfg).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.to_csv(), b.to_csv());
        }
    }
}

#[test]
fn seeds_change_the_run() {
    let a = train(&TrainConfig::new(
        ProblemKind::Mlp,
        Strategy::Full,
        0.05,
        20,
        1,
    ))
    .unwrap();
    let b = train(&TrainConfig::new(
        ProblemKind::Mlp,
        Strategy::Full,
        0.05,
        20,
        2,
    ))
    .unwrap();
    assert_ne!(a.to_csv(), b.to_csv());
}

#[test]
fn gain_raises_the_update_noise_on_the_mlp() {
    for seed in 0..3 {
        let trace = |strategy| {
            let cfg = TrainConfig::new(ProblemKind::Mlp, strategy, 0.05, 3000, seed);
            train(&cfg).unwrap().trace_series.last().unwrap().1
        };
        let (full, s1) = (trace(Strategy::Full), trace(Strategy::S1Only));
        assert!(full > s1, "seed {seed}: full {full} s1 {s1}");
    }
}

#[test]
fn trace_series_starts_once_the_window_fills() {
    let mut cfg = TrainConfig::new(ProblemKind::Conflict, Strategy::Full, 0.01, 50, 3);
    cfg.trace_window = 10;
    let log = train(&cfg).unwrap();
    assert_eq!(log.trace_series.len(), 41);
    assert_eq!(log.trace_series[0].0, 9);
}

#[test]
fn every_ablation_variant_trains_on_the_conflict_fixture() {
    let mut finals = Vec::new();
    for strategy in Strategy::ABLATION_GRID {
        let log = train(&TrainConfig::new(
            ProblemKind::Conflict,
            strategy,
            0.01,
            2000,
            7,
        ))
        .unwrap();
        assert_eq!(log.records.len(), 2000);
        assert_eq!(log.file_name(), format!("conflict_{strategy}_7.csv"));
        finals.push(log.final_mean_loss().unwrap());
    }
    // Every variant ends at the minimiser of the summed losses, (-18/11, 0),
    // where the mean loss is 40/11.
    for f in finals {
        assert!((f - 40.0 / 11.0).abs() < 1e-9, "{f}");
    }
}

#[test]
fn conflict_ratio_is_tracked_per_step() {
    let log = train(&TrainConfig::new(
        ProblemKind::Conflict,
        Strategy::Linear,
        0.01,
        100,
        0,
    ))
    .unwrap();
    let last = log.records.last().unwrap();
    assert_eq!(log.conflict.count(), 100);
    assert_eq!(
        last.negative_ratio,
        Some(log.conflict.negative_ratio().unwrap())
    );
    for r in &log.records {
        let c = r.min_cosine.unwrap();
        assert!((-1.0..=1.0).contains(&c));
    }
}
