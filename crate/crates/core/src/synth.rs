//! Seeded synthetic data from a discrete joint distribution of group, score
//! and label, plus seeded train/holdout splitting.
//!
//! Everything is driven by ChaCha8 seeded through `seed_from_u64`, with
//! uniforms built from the top 53 bits of `next_u64`. Each row consumes
//! three uniforms in the order group, score, label. Ports that follow the
//! same recipe reproduce datasets exactly.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ScoreDomain, ScoredDataset, ScoredRow};

pub const RNG_ALGORITHM: &str = "chacha8-seed_from_u64-u53";
const SUM_TOL: f64 = 1e-6;

/// The bundled four-group spec on a 0–100 score scale. Synthetic; it only
/// mimics lower score distributions for minority groups.
pub const FICO_LIKE_SPEC: &str = include_str!("../data/fico_like.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub proportion: f64,
    /// Mass on each support point.
    pub score_pmf: Vec<f64>,
    /// `P(Y = 1 | score)` on each support point.
    pub label1_prob: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub domain: ScoreDomain,
    pub score_support: Vec<f64>,
    pub groups: Vec<GroupSpec>,
}

/// Recorded next to generated data so it can be regenerated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub rng: String,
    pub seed: u64,
    pub rows: usize,
}

impl JointSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: JointSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn fico_like() -> Self {
        Self::from_json(FICO_LIKE_SPEC).expect("bundled spec is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        ScoreDomain::new(self.domain.lo, self.domain.hi)?;
        if self.score_support.is_empty() {
            return bad("empty score support".into());
        }
        if let Some(s) = self.score_support.iter().find(|s| !self.domain.contains(**s)) {
            return bad(format!("support point {s} outside the domain"));
        }
        if self.groups.is_empty() {
            return bad("no groups".into());
        }
        let total: f64 = self.groups.iter().map(|g| g.proportion).sum();
        if (total - 1.0).abs() > SUM_TOL {
            return bad(format!("group proportions sum to {total}"));
        }
        let mut names: Vec<&str> = self.groups.iter().map(|g| g.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate group names".into());
        }
        for g in &self.groups {
            if !(g.proportion >= 0.0) {
                return bad(format!("group {}: negative proportion", g.name));
            }
            let k = self.score_support.len();
            if g.score_pmf.len() != k || g.label1_prob.len() != k {
                return bad(format!("group {}: pmf and label probabilities need {k} entries", g.name));
            }
            if g.score_pmf.iter().any(|p| !(*p >= 0.0)) {
                return bad(format!("group {}: negative score mass", g.name));
            }
            let s: f64 = g.score_pmf.iter().sum();
            if (s - 1.0).abs() > SUM_TOL {
                return bad(format!("group {}: score pmf sums to {s}", g.name));
            }
            if g.label1_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return bad(format!("group {}: label probability outside [0, 1]", g.name));
            }
        }
        Ok(())
    }

    /// `E[score | Y = label, group]` implied by the spec, or `None` if the
    /// condition has zero mass.
    pub fn conditional_mean(&self, group: &str, label: Option<u8>) -> Option<f64> {
        let g = self.groups.iter().find(|g| g.name == group)?;
        let (mut mass, mut acc) = (0.0, 0.0);
        for ((s, p), q) in self.score_support.iter().zip(&g.score_pmf).zip(&g.label1_prob) {
            let w = match label {
                None => *p,
                Some(1) => p * q,
                Some(_) => p * (1.0 - q),
            };
            mass += w;
            acc += w * s;
        }
        (mass > 0.0).then(|| acc / mass)
    }
}

struct Uniforms(ChaCha8Rng);

impl Uniforms {
    fn new(seed: u64) -> Self {
        Uniforms(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform on `[0, 1)` with 53 bits.
    fn next(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n` by multiply-shift.
    fn index(&mut self, n: usize) -> usize {
        ((self.0.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

/// Index of the first cumulative mass exceeding `u`, skipping zero-mass cells.
fn pick(cum: &[f64], u: f64) -> usize {
    let i = cum.partition_point(|&c| c <= u);
    if i < cum.len() {
        i
    } else {
        // rounding left the total just below u; use the last cell with mass
        let last = cum[cum.len() - 1];
        cum.partition_point(|&c| c < last)
    }
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// Draws `n` rows from `spec`; identical inputs give identical rows.
pub fn sample(spec: &JointSpec, n: usize, seed: u64) -> Result<ScoredDataset> {
    spec.validate()?;
    let needed = 2 * spec.groups.len();
    if n < needed {
        return Err(Error::InvalidArgument(format!(
            "need at least {needed} rows for {} groups, got {n}",
            spec.groups.len()
        )));
    }
    let group_cum = cumulative(&spec.groups.iter().map(|g| g.proportion).collect::<Vec<_>>());
    let score_cum: Vec<Vec<f64>> = spec.groups.iter().map(|g| cumulative(&g.score_pmf)).collect();
    let mut rng = Uniforms::new(seed);
    let rows = (0..n)
        .map(|_| {
            let g = pick(&group_cum, rng.next());
            let s = pick(&score_cum[g], rng.next());
            let label = u8::from(rng.next() < spec.groups[g].label1_prob[s]);
            ScoredRow::labeled(spec.score_support[s], spec.groups[g].name.clone(), label)
        })
        .collect();
    ScoredDataset::validate(rows, spec.domain)
}

pub fn sample_meta(n: usize, seed: u64) -> SampleMeta {
    SampleMeta {
        rng: RNG_ALGORITHM.to_string(),
        seed,
        rows: n,
    }
}

/// Seeded random partition into `(labeled, holdout)`; both keep the
/// original row order. The labeled part gets `round(fraction · n)` rows.
pub fn split(ds: &ScoredDataset, fraction: f64, seed: u64) -> Result<(ScoredDataset, ScoredDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let n = ds.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = Uniforms::new(seed);
    for i in (1..n).rev() {
        let j = rng.index(i + 1);
        idx.swap(i, j);
    }
    let take = (fraction * n as f64).round() as usize;
    let mut in_first = vec![false; n];
    for &i in &idx[..take] {
        in_first[i] = true;
    }
    let (mut a, mut b) = (Vec::with_capacity(take), Vec::with_capacity(n - take));
    for (row, first) in ds.rows().iter().zip(&in_first) {
        if *first {
            a.push(row.clone());
        } else {
            b.push(row.clone());
        }
    }
    for part in [&a, &b] {
        if let Some(g) = ds.groups().iter().find(|g| !part.iter().any(|r| &r.group == *g)) {
            return Err(Error::InvalidArgument(format!("group {g} vanishes from one side of the split")));
        }
    }
    Ok((ScoredDataset::validate(a, ds.domain())?, ScoredDataset::validate(b, ds.domain())?))
}
