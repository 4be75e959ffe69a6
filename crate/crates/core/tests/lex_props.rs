mod common;

use georepair::lex::{build_problem, solve_lexicographic, solve_maxmin, top_k_sum, LexProblem};
use georepair::metrics::conditional_means;
use georepair::repair::RepairPlan;
use georepair::{MetricKind, ScoreDomain, ScoredDataset, ScoredRow};
use proptest::prelude::*;
use rand::Rng;

/// Three groups of at most 50 rows with scores near random centres.
fn small_instance(seed: u64, domain: ScoreDomain) -> ScoredDataset {
    let mut r = common::rng(seed);
    let mut rows = Vec::new();
    for g in 0..3 {
        let c: f64 = r.random_range(0.2..0.8);
        let n = r.random_range(10..=50);
        for i in 0..n {
            let u = (c + r.random_range(-0.2..0.2f64)).clamp(0.0, 1.0);
            // two rows of each label keep every conditional group usable
            let y = match i {
                0 | 1 => 1,
                2 | 3 => 0,
                _ => u8::from(r.random::<f64>() < u),
            };
            rows.push(ScoredRow::labeled(domain.denormalize(u), format!("g{g}"), y));
        }
    }
    ScoredDataset::validate(rows, domain).unwrap()
}

/// `true` when `a ⪯ b` lexicographically, treating entries within `tol` as equal.
fn lex_le(a: &[f64], b: &[f64], tol: f64) -> bool {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > tol {
            return x < y;
        }
    }
    true
}

/// Repeated 41-point-per-axis search, re-centred on the incumbent.
fn zoom_min(f: impl Fn(&[f64]) -> f64) -> f64 {
    let (mut lo, mut hi) = ([0.0f64; 3], [1.0f64; 3]);
    let mut best = ([0.0; 3], f64::INFINITY);
    for _ in 0..6 {
        let step: Vec<f64> = (0..3).map(|d| (hi[d] - lo[d]) / 40.0).collect();
        for i in 0..41 {
            for j in 0..41 {
                for k in 0..41 {
                    let l = [lo[0] + i as f64 * step[0], lo[1] + j as f64 * step[1], lo[2] + k as f64 * step[2]];
                    let v = f(&l);
                    if v < best.1 {
                        best = (l, v);
                    }
                }
            }
        }
        for d in 0..3 {
            lo[d] = (best.0[d] - 3.0 * step[d]).max(0.0);
            hi[d] = (best.0[d] + 3.0 * step[d]).min(1.0);
        }
    }
    best.1
}

fn problem(seed: u64, domain: ScoreDomain) -> (ScoredDataset, LexProblem) {
    let ds = small_instance(seed, domain);
    let plan = RepairPlan::fit(&ds).unwrap();
    let prob = build_problem(&plan, &ds, MetricKind::TPR).unwrap();
    (ds, prob)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn means_are_affine_in_lambda(seed in any::<u64>(), scale in prop_oneof![Just(1.0), Just(100.0)]) {
        let domain = ScoreDomain::new(0.0, scale).unwrap();
        let (ds, prob) = problem(seed, domain);
        let mut r = common::rng(seed ^ 0x5eed);
        for _ in 0..20 {
            let l: Vec<f64> = (0..3).map(|_| r.random_range(0.0..=1.0)).collect();
            let repaired = prob.plan().clone().with_lambdas(l.clone()).unwrap().apply(&ds).unwrap();
            let empirical = conditional_means(&repaired, MetricKind::TPR).unwrap();
            for (p, e) in prob.predicted_means(&l).iter().zip(&empirical) {
                prop_assert!((p - e).abs() <= 1e-10, "{p} vs {e}");
            }
        }
    }

    #[test]
    fn lex_dominates_maxmin_and_keeps_bounds(seed in any::<u64>()) {
        let (_, prob) = problem(seed, ScoreDomain::UNIT);
        let lex = solve_lexicographic(&prob).unwrap();
        let mm = solve_maxmin(&prob).unwrap();
        let tol = prob.alpha + 1e-9;
        prop_assert!(lex_le(&lex.sorted_losses(), &mm.sorted_losses(), tol));
        prop_assert!((lex.epsilons[0] - mm.epsilons[0]).abs() <= tol);
        for k in 1..=3 {
            prop_assert!(top_k_sum(&lex.losses, k) <= lex.epsilons[k - 1] + tol);
        }
        prop_assert!(lex.lambdas.iter().all(|l| (0.0..=1.0).contains(l)));
    }
}

#[test]
fn rounds_match_brute_force() {
    for seed in 0..4 {
        let (_, prob) = problem(seed, ScoreDomain::UNIT);
        let lex = solve_lexicographic(&prob).unwrap();
        for k in 1..=3 {
            let lp = top_k_sum(&prob.losses(&lex.rounds[k - 1].lambdas), k);
            let eps = &lex.epsilons;
            let brute = zoom_min(|l| {
                let ls = prob.losses(l);
                let viol: f64 = (1..k).map(|j| (top_k_sum(&ls, j) - eps[j - 1] - prob.alpha).max(0.0)).sum();
                top_k_sum(&ls, k) + 1e3 * viol
            });
            assert!((lp - brute).abs() <= 1e-3, "seed {seed} round {k}: {lp} vs {brute}");
        }
    }
}

#[test]
fn two_groups_collapse_to_maxmin() {
    let (ds, _) = problem(7, ScoreDomain::UNIT);
    let rows: Vec<ScoredRow> = ds.rows().iter().filter(|r| r.group != "g2").cloned().collect();
    let ds = ScoredDataset::validate(rows, ScoreDomain::UNIT).unwrap();
    let plan = RepairPlan::fit(&ds).unwrap();
    let prob = build_problem(&plan, &ds, MetricKind::TPR).unwrap();
    let lex = solve_lexicographic(&prob).unwrap();
    let mm = solve_maxmin(&prob).unwrap();
    assert!((lex.epsilons[0] - mm.epsilons[0]).abs() <= prob.alpha);
    // both groups see the same pairwise gap
    assert!((mm.losses[0] - mm.losses[1]).abs() < 1e-12);
}
