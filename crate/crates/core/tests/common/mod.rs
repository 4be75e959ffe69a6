#![allow(dead_code)]

use georepair::{ScoreDomain, ScoredDataset, ScoredRow};
use rand::{Rng, SeedableRng};
use rand_distr::{Beta, Distribution};

pub type TestRng = rand::rngs::StdRng;

pub fn rng(seed: u64) -> TestRng {
    TestRng::seed_from_u64(seed)
}

/// Continuous scores from a Beta(a, b) per group; `P(Y = 1 | s) = s`.
pub fn beta_groups(rng: &mut TestRng, shapes: &[(f64, f64)], sizes: &[usize], domain: ScoreDomain) -> ScoredDataset {
    let mut rows = Vec::new();
    for (g, (&(a, b), &n)) in shapes.iter().zip(sizes).enumerate() {
        let beta = Beta::new(a, b).unwrap();
        for _ in 0..n {
            let u: f64 = beta.sample(rng);
            let label = u8::from(rng.random::<f64>() < u);
            rows.push(ScoredRow::labeled(domain.denormalize(u), format!("g{g}"), label));
        }
    }
    ScoredDataset::validate(rows, domain).unwrap()
}

/// Random binary dataset with `lo..hi` rows per group and random Beta shapes.
pub fn random_binary(seed: u64, lo: usize, hi: usize) -> ScoredDataset {
    let mut r = rng(seed);
    let shapes = [(r.random_range(1.0..6.0), r.random_range(1.0..6.0)), (r.random_range(1.0..6.0), r.random_range(1.0..6.0))];
    let sizes = [r.random_range(lo..=hi), r.random_range(lo..=hi)];
    beta_groups(&mut r, &shapes, &sizes, ScoreDomain::UNIT)
}

/// Same as [`random_binary`] but scores rounded to `levels` values, so ties occur.
pub fn random_binary_tied(seed: u64, lo: usize, hi: usize, levels: u32) -> ScoredDataset {
    let ds = random_binary(seed, lo, hi);
    let k = levels as f64;
    let rows = ds
        .rows()
        .iter()
        .map(|r| ScoredRow::new((r.score * k).round() / k, r.group.clone(), r.label))
        .collect();
    ScoredDataset::validate(rows, ScoreDomain::UNIT).unwrap()
}

/// `k` groups with random Beta shapes.
pub fn random_groups(seed: u64, k: usize, lo: usize, hi: usize) -> ScoredDataset {
    let mut r = rng(seed);
    let shapes: Vec<(f64, f64)> = (0..k).map(|_| (r.random_range(1.0..6.0), r.random_range(1.0..6.0))).collect();
    let sizes: Vec<usize> = (0..k).map(|_| r.random_range(lo..=hi)).collect();
    beta_groups(&mut r, &shapes, &sizes, ScoreDomain::UNIT)
}
