mod common;

use camegrad::dual::worst_case_improvement;
use camegrad::oracle::{dual_grid_oracle, primal_maxmin_oracle, sphere_directions};
use camegrad::{rectify, GradientSet, SeededRng, SolverSettings};

const RESOLUTION: usize = 2000;
const GRID_STEP: f64 = 1e-3;

fn instances(d: usize, tasks: usize, seed: u64) -> Vec<GradientSet> {
    let mut rng = SeededRng::new(seed);
    (0..100)
        .map(|_| common::uniform_set(&mut rng, d, tasks))
        .collect()
}

#[test]
fn solver_agrees_with_both_oracles() {
    let settings = SolverSettings::default();
    for d in [2, 3] {
        for aux in [1, 2] {
            for (n, gs) in instances(d, aux + 1, (10 * d + aux) as u64)
                .iter()
                .enumerate()
            {
                let rho = 0.5;
                let r = rectify(gs, rho, &settings).unwrap();
                let (_, grid) = dual_grid_oracle(gs, rho, GRID_STEP).unwrap();
                let primal = primal_maxmin_oracle(gs, rho, RESOLUTION).unwrap();
                let worst = worst_case_improvement(gs, &r.u_rect).unwrap();
                assert!(
                    (r.solution.dual_value - grid).abs() <= 1e-3,
                    "d {d} aux {aux} #{n}: solver {} grid {grid}",
                    r.solution.dual_value
                );
                assert!(
                    (worst - primal.best_value).abs() <= 2e-3,
                    "d {d} aux {aux} #{n}: primal {worst} oracle {}",
                    primal.best_value
                );
                // The grid only samples the simplex, so it can never beat the solver.
                assert!(r.solution.dual_value <= grid + 1e-12);
            }
        }
    }
}

#[test]
fn weak_and_strong_duality_between_oracles() {
    for (n, gs) in instances(2, 3, 99).iter().take(25).enumerate() {
        for rho in [0.2, 0.8] {
            let (_, grid) = dual_grid_oracle(gs, rho, GRID_STEP).unwrap();
            let primal = primal_maxmin_oracle(gs, rho, RESOLUTION).unwrap();
            assert!(grid >= primal.best_value - 1e-12, "#{n}");
            assert!(grid - primal.best_value <= 1e-3, "#{n}");
        }
    }
}

#[test]
fn oracle_is_monotone_in_resolution() {
    let mut rng = SeededRng::new(5);
    for d in 2..=4 {
        for _ in 0..20 {
            let gs = common::uniform_set(&mut rng, d, 3);
            let mut last = f64::NEG_INFINITY;
            for res in [100, 200, 400, 800, 1600] {
                let v = primal_maxmin_oracle(&gs, 0.5, res).unwrap().best_value;
                assert!(v >= last, "d {d} res {res}: {v} < {last}");
                last = v;
            }
        }
    }
}

#[test]
fn direction_sets_are_nested() {
    for d in 2..=4 {
        let small = sphere_directions(d, 100);
        let large = sphere_directions(d, 400);
        for v in &small {
            let found = large.iter().any(|w| common::max_abs_diff(v, w) < 1e-12);
            assert!(found, "d {d}: {v:?} missing from the refined set");
        }
        for v in &large {
            let n: f64 = v.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn rectification_tends_to_the_mean_as_rho_vanishes() {
    let mut rng = SeededRng::new(8);
    let settings = SolverSettings::default();
    for _ in 0..50 {
        let gs = common::uniform_set(&mut rng, 3, 3);
        let mu = gs.mean_gradient();
        let mut last = f64::INFINITY;
        for rho in [1e-1, 1e-2, 1e-3, 1e-4, 0.0] {
            let r = rectify(&gs, rho, &settings).unwrap();
            let dist = common::max_abs_diff(r.u_rect.as_slice(), mu.as_slice());
            assert!(dist <= rho * mu.norm() + 1e-15);
            assert!(dist <= last);
            last = dist;
        }
        assert_eq!(last, 0.0);
    }
}

#[test]
fn solver_converges_within_its_budget() {
    let settings = SolverSettings::default();
    let mut rng = SeededRng::new(21);
    for _ in 0..500 {
        let d = 2 + rng.index(4);
        let tasks = 2 + rng.index(3);
        let gs = common::uniform_set(&mut rng, d, tasks);
        let r = rectify(&gs, rng.uniform_range(0.05, 0.95), &settings).unwrap();
        assert!(r.solution.converged, "{} iterations", r.solution.iterations);
    }
}

#[test]
fn oracle_guards() {
    let gs = common::uniform_set(&mut SeededRng::new(0), 5, 2);
    assert!(primal_maxmin_oracle(&gs, 0.5, RESOLUTION).is_err());
    let gs = common::uniform_set(&mut SeededRng::new(0), 2, 4);
    assert!(dual_grid_oracle(&gs, 0.5, GRID_STEP).is_err());
    assert!(primal_maxmin_oracle(&gs, 0.5, 99).is_err());
}

#[test]
fn opposing_pair_is_degenerate_everywhere() {
    let gs = GradientSet::from_rows(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![1.0, 1.0]).unwrap();
    let r = rectify(&gs, 0.5, &SolverSettings::default()).unwrap();
    assert!(r.degenerate);
    let o = primal_maxmin_oracle(&gs, 0.5, RESOLUTION).unwrap();
    assert_eq!(o.best_value, 0.0);
    assert_eq!(o.best_u.as_slice(), &[0.0, 0.0]);
}
