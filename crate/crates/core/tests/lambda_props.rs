mod common;

use georepair::lambda::{
    objective_eval, solve_exact, solve_grid, solve_probabilistic, LambdaObjective, ObjectiveEvaluator,
};
use georepair::metrics::ThresholdGrid;
use georepair::repair::RepairPlan;
use georepair::synth::{sample, split, JointSpec};
use georepair::{MetricCombo, MetricKind, ScoredDataset};
use proptest::prelude::*;

fn objective(ds: &ScoredDataset, combo: MetricCombo) -> LambdaObjective {
    LambdaObjective::new(combo, 1.0, ThresholdGrid::uniform(ds.domain(), 101).unwrap()).unwrap()
}

fn combos() -> Vec<MetricCombo> {
    vec![
        MetricCombo::single(MetricKind::PR),
        MetricCombo::single(MetricKind::TPR),
        MetricCombo::single(MetricKind::FPR),
        "tpr:1,fpr:1".parse().unwrap(),
    ]
}

/// Two-group version of the bundled spec.
fn binary_spec() -> JointSpec {
    let mut s = JointSpec::fico_like();
    s.groups.retain(|g| g.name == "Black" || g.name == "White");
    let total: f64 = s.groups.iter().map(|g| g.proportion).sum();
    for g in &mut s.groups {
        g.proportion /= total;
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn objective_is_convex_in_lambda(seed in any::<u64>(), ties in any::<bool>()) {
        let ds = if ties { common::random_binary_tied(seed, 200, 800, 100) } else { common::random_binary(seed, 200, 800) };
        let plan = RepairPlan::fit(&ds).unwrap();
        for combo in combos() {
            let ev = ObjectiveEvaluator::new(&plan, &ds, &objective(&ds, combo)).unwrap();
            let f: Vec<f64> = (0..=100).map(|i| ev.eval(i as f64 / 100.0)).collect();
            for w in f.windows(3) {
                prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-6);
            }
        }
    }

    #[test]
    fn rates_move_toward_barycenter(seed in any::<u64>()) {
        let ds = common::random_binary(seed, 200, 600);
        let plan = RepairPlan::fit(&ds).unwrap();
        let scores = ds.group_scores();
        let cdf = |g: usize, t: f64| scores[g].iter().filter(|&&x| x <= t).count() as f64 / scores[g].len() as f64;
        let repaired: Vec<Vec<Vec<f64>>> = (0..=10)
            .map(|i| {
                let p = plan.clone().with_uniform_lambda(i as f64 / 10.0).unwrap();
                p.apply(&ds).unwrap().group_scores()
            })
            .collect();
        for j in 0..=20 {
            let tau = j as f64 / 20.0;
            for (g, h) in [(0, 1), (1, 0)] {
                if cdf(g, tau) <= cdf(h, tau) {
                    continue;
                }
                let tol = 1.0 / scores[g].len() as f64;
                let rate = |s: &Vec<f64>| s.iter().filter(|&&x| x >= tau).count() as f64 / s.len() as f64;
                for w in repaired.windows(2) {
                    prop_assert!(rate(&w[1][g]) >= rate(&w[0][g]) - tol);
                }
            }
        }
    }

    #[test]
    fn solvers_beat_endpoints(seed in any::<u64>()) {
        let ds = common::random_binary(seed, 200, 600);
        let plan = RepairPlan::fit(&ds).unwrap();
        for combo in combos() {
            let obj = objective(&ds, combo);
            let f0 = objective_eval(&plan, &ds, &obj, 0.0).unwrap();
            let f1 = objective_eval(&plan, &ds, &obj, 1.0).unwrap();
            let ex = solve_exact(&plan, &ds, &obj, 1e-6).unwrap();
            prop_assert!(ex.objective_value <= f0.min(f1) + 1e-6);
            let at = objective_eval(&plan, &ds, &obj, ex.lambda_star).unwrap();
            prop_assert_eq!(at, ex.objective_value);
            let gr = solve_grid(&plan, &ds, &obj, 101).unwrap();
            prop_assert!(gr.objective_value <= f0.min(f1));
            prop_assert!(ex.objective_value <= gr.objective_value + 1e-9);
        }
    }

    #[test]
    fn probabilistic_lambda_zeroes_mean_gap(seed in any::<u64>()) {
        let ds = common::random_binary(seed, 50, 300);
        let plan = RepairPlan::fit(&ds).unwrap();
        for kind in [MetricKind::PR, MetricKind::TPR, MetricKind::FNR] {
            let s = solve_probabilistic(&plan, &ds, kind).unwrap();
            if s.clamped {
                continue;
            }
            let repaired = plan.clone().with_uniform_lambda(s.lambda_star).unwrap().apply(&ds).unwrap();
            let gaps = georepair::metrics::probabilistic_parity_gap(&repaired, kind).unwrap();
            let width = ds.domain().width();
            prop_assert!(gaps[0].gap.abs() / width <= 1e-10, "gap {}", gaps[0].gap);
        }
    }
}

#[test]
fn exact_and_probabilistic_agree_on_synthetic_splits() {
    let ds = sample(&binary_spec(), 8000, 42).unwrap();
    for seed in 0..10 {
        let (labeled, _) = split(&ds, 0.5, seed).unwrap();
        let plan = RepairPlan::fit(&labeled).unwrap();
        let obj = objective(&labeled, MetricCombo::single(MetricKind::TPR));
        let ex = solve_exact(&plan, &labeled, &obj, 1e-6).unwrap();
        let pr = solve_probabilistic(&plan, &labeled, MetricKind::TPR).unwrap();
        let gr = solve_grid(&plan, &labeled, &obj, 10001).unwrap();
        assert!((ex.lambda_star - pr.lambda_star).abs() <= 0.15, "seed {seed}");
        let f0 = objective_eval(&plan, &labeled, &obj, 0.0).unwrap();
        let best = f0 - gr.objective_value;
        for v in [ex.objective_value, objective_eval(&plan, &labeled, &obj, pr.lambda_star).unwrap()] {
            assert!(f0 - v >= 0.8 * best, "seed {seed}");
        }
    }
}
