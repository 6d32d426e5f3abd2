use super::*;
use crate::arm_models::LossFunction;

fn det_arms() -> Vec<ArmModel> {
    vec![
        ArmModel::deterministic(0.2, 1.0).unwrap(),
        ArmModel::deterministic(0.5, 1.0).unwrap(),
    ]
}

fn ctx(n: u64) -> BoundContext {
    BoundContext {
        n,
        num_arms: 2,
        delta: 0.1,
        support_bound: 1.0,
    }
}

fn trace_of(arms: &[usize]) -> EpisodeTrace {
    EpisodeTrace {
        seed: 0,
        steps: arms
            .iter()
            .enumerate()
            .map(|(i, &arm)| Step {
                t: i as u64 + 1,
                arm,
                cost: 0.0,
            })
            .collect(),
    }
}

#[test]
fn pull_count_examples() {
    assert_eq!(pull_counts(&trace_of(&[0, 1, 0, 0]), 2), vec![3, 1]);
    assert_eq!(pull_counts(&trace_of(&[]), 3), vec![0, 0, 0]);
}

#[test]
fn episode_starts_round_robin() {
    let spec = RiskSpec::mean(1.0).unwrap();
    let trace = run_episode(&canonical_arms(), &spec, 0.1, 2, 5).unwrap();
    assert_eq!(trace.choices().collect::<Vec<_>>(), vec![0, 1]);
    assert_eq!(trace.steps[1].t, 2);
    let arms3 = vec![
        ArmModel::uniform(0.0, 0.3, 1.0).unwrap(),
        ArmModel::uniform(0.2, 0.9, 1.0).unwrap(),
        ArmModel::uniform(0.1, 0.6, 1.0).unwrap(),
    ];
    let trace = run_episode(&arms3, &spec, 0.1, 3, 1).unwrap();
    assert_eq!(pull_counts(&trace, 3), vec![1, 1, 1]);
    assert!(run_episode(&arms3, &spec, 0.1, 2, 1).is_err());
}

#[test]
fn episodes_are_seed_deterministic() {
    let spec = RiskSpec::cvar(0.5, 1.0).unwrap().with_m_alpha(0.5).unwrap();
    let a = run_episode(&canonical_arms(), &spec, 0.1, 300, 42).unwrap();
    let b = run_episode(&canonical_arms(), &spec, 0.1, 300, 42).unwrap();
    let c = run_episode(&canonical_arms(), &spec, 0.1, 300, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.steps.iter().all(|s| (0.0..=1.0).contains(&s.cost)));
}

#[test]
fn deterministic_arms_follow_reference_simulation() {
    let spec = RiskSpec::mean(1.0).unwrap();
    let trace = run_episode(&det_arms(), &spec, 0.1, 100, 9).unwrap();

    // Reference: index c_k - sqrt(ln(4 n^2 K / delta) / (2 T_k)) at clock n.
    let costs = [0.2, 0.5];
    let mut pulls = [0u32; 2];
    let mut expected = Vec::new();
    for n in 0..100u32 {
        let arm = if n < 2 {
            n as usize
        } else {
            let l = (4.0 * f64::from(n * n) * 2.0 / 0.1).ln();
            let b: Vec<f64> = (0..2)
                .map(|k| costs[k] - (l / (2.0 * f64::from(pulls[k]))).sqrt())
                .collect();
            usize::from(b[1] < b[0])
        };
        pulls[arm] += 1;
        expected.push(arm);
    }
    assert_eq!(trace.choices().collect::<Vec<_>>(), expected);
    let counts = pull_counts(&trace, 2);
    assert!(counts[1] < 50, "{counts:?}");
}

#[test]
fn random_policy_regret_approaches_gap_average() {
    let spec = RiskSpec::mean(1.0).unwrap();
    let out = Experiment::new(det_arms(), spec, 0.1, vec![4000], 20, 3)
        .with_policy(PolicyKind::UniformRandom)
        .run()
        .unwrap();
    let (mean, se) = (out.curve.regret_mean[0], out.curve.regret_se[0]);
    assert!((mean - 0.15).abs() <= 3.0 * se + 1e-3, "{mean} +- {se}");
}

#[test]
fn always_optimal_policy_has_vanishing_regret() {
    let spec = RiskSpec::cvar(0.5, 1.0).unwrap();
    let out = Experiment::new(canonical_arms(), spec, 0.1, vec![500, 4000], 30, 8)
        .with_policy(PolicyKind::Fixed(1))
        .run()
        .unwrap();
    let (mean, se) = (out.curve.regret_mean[1], out.curve.regret_se[1]);
    assert!(mean.abs() <= 3.0 * se + 1e-3, "{mean} +- {se}");
}

#[test]
fn pseudo_regret_checks() {
    let spec = RiskSpec::mean(1.0).unwrap();
    let tie = vec![
        ArmModel::uniform(0.0, 0.5, 1.0).unwrap(),
        ArmModel::uniform(0.0, 0.5, 1.0).unwrap(),
    ];
    assert_eq!(
        pseudo_regret(&tie, &spec, 0.1, 10, 2, 0).unwrap_err(),
        Error::NonUniqueOptimum {
            first: 1,
            second: 2
        }
    );
    assert!(pseudo_regret(&canonical_arms(), &spec, 0.1, 10, 1, 0).is_err());
    let (mean, se) = pseudo_regret(&canonical_arms(), &spec, 0.1, 50, 4, 0).unwrap();
    assert!(mean.is_finite() && se >= 0.0);
}

#[test]
fn replication_results_ignore_thread_count() {
    let spec = RiskSpec::mean_deviation(1.0, 1.0, 1.0).unwrap();
    let exp = Experiment::new(canonical_arms(), spec, 0.1, vec![50, 200], 12, 77);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| exp.run().unwrap().curve)
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn replication_seeds_are_distinct() {
    let seeds: std::collections::HashSet<u64> = (0..1000).map(|r| replication_seed(5, r)).collect();
    assert_eq!(seeds.len(), 1000);
    assert_ne!(replication_seed(5, 0), replication_seed(6, 0));
}

// Bound values frozen from an independent evaluation of the closed forms.
#[test]
fn cvar_bound_values() {
    let gaps = [0.0, 0.25];
    let b4 = bound_cvar(ctx(10_000), 0.5, 1.0, &gaps).unwrap();
    let b3 = bound_cvar(ctx(1_000), 0.5, 1.0, &gaps).unwrap();
    assert!((b4 - 13.634590984935887).abs() < 1e-9, "{b4}");
    assert!((b3 - 107.65211795036112).abs() < 1e-9, "{b3}");
    assert!(b4 < b3);
    assert_eq!(
        bound_cvar(ctx(1), 0.5, 1.0, &gaps).unwrap_err(),
        Error::DegenerateGap { arm: 2 }
    );
}

#[test]
fn md_bound_values() {
    let gaps = [0.25, 0.0];
    let b = |n| bound_md(ctx(n), 1.0, 1.0, &gaps, &gaps).unwrap();
    assert!((b(10_000) - 3.9552238239611994).abs() < 1e-9);
    assert!((b(40_000) - 0.8511415770297012).abs() < 1e-9);
    assert!((b(1_000_000) - 0.04552745057902353).abs() < 1e-11);
    assert!(b(4_000_000) < b(1_000_000));
    assert_eq!(md_pull_factor(10.0, 1.0, 1.0), 1.0);
    assert_eq!(md_pull_factor(10.0, 1.0, 2.5), 1.0);
}

#[test]
fn shortfall_bound_values() {
    let c = ShortfallConstants {
        loss_bound: 1.0,
        derivative_floor: 1.0,
        sensitivity: 1.0,
    };
    let gaps = [0.0, 0.25];
    let t = shortfall_t_star(ctx(10_000), 1.0, 1.0, &gaps).unwrap();
    assert_eq!(t, 9270.0);
    let b1 = bound_shortfall(ctx(10_000), c, &gaps, t).unwrap();
    let b2 = bound_shortfall(ctx(10_000), c, &gaps, 2.0 * t).unwrap();
    assert!((b1 - 0.14311764859699785).abs() < 1e-12);
    assert!((b2 - 0.12257420180004985).abs() < 1e-12);
    // Without sub-optimal arms and with a huge t_star only delta M / n remains.
    let tail = bound_shortfall(ctx(10), c, &[0.0, 0.0], 1e300).unwrap();
    assert!((tail - 0.01).abs() < 1e-12);
    assert_eq!(shortfall_t_star(ctx(10), 1.0, 1.0, &gaps).unwrap(), 1.0);
}

#[test]
fn bounds_are_positive() {
    let spec = RiskSpec::shortfall(LossFunction::ExpMinusOne, 1.0).unwrap();
    let oracle = oracle_constants(&canonical_arms(), &spec).unwrap();
    let spec = oracle.complete_spec(&spec).unwrap();
    for n in [10, 1000, 100_000] {
        assert!(regret_bound(&spec, &oracle, 2, 0.1, n).unwrap() > 0.0);
    }
    let mean = RiskSpec::mean(1.0).unwrap();
    assert_eq!(regret_bound(&mean, &oracle, 2, 0.1, 100), None);
}

#[test]
fn decay_fits() {
    let grid = vec![100, 400, 1600, 6400];
    let on = |f: &dyn Fn(f64) -> f64| grid.iter().map(|&n| f(n as f64)).collect::<Vec<_>>();
    let fit = |v: Vec<f64>| fit_decay(&grid, &v).unwrap();
    assert!((fit(on(&|n| 3.0 / n.sqrt())) + 0.5).abs() < 1e-12);
    assert!((fit(on(&|n| 0.7 / n)) + 1.0).abs() < 1e-12);
    assert!(fit(on(&|_| 0.2)).abs() < 1e-12);
    assert_eq!(
        fit_decay(&grid, &[0.1, 0.0, 0.1, 0.1]).unwrap_err(),
        Error::NonPositiveRegret { n: 400 }
    );
    assert!(fit_decay(&grid[..2], &[0.1, 0.1]).is_err());
}
