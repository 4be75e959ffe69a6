//! Closed-form optimal transport on the real line.
//!
//! All distributions here live on the unit interval (scores are normalized
//! before they reach this module). A distribution is stored as sorted,
//! de-duplicated atoms with positive weights and their running cumulative
//! mass, which makes the CDF a right-continuous step function and the
//! quantile function its left-continuous pseudo-inverse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when a probability level is compared against cumulative mass.
/// Cumulative sums of different distributions are computed independently, so
/// the same level (say 1/3) may differ by a few ulps between them.
const LEVEL_TOL: f64 = 1e-12;

/// A discrete probability measure on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct EmpiricalDistribution {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    cum: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawDistribution> for EmpiricalDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        EmpiricalDistribution::from_weighted(&raw.atoms, &raw.weights)
    }
}

impl From<EmpiricalDistribution> for RawDistribution {
    fn from(d: EmpiricalDistribution) -> Self {
        RawDistribution {
            atoms: d.atoms,
            weights: d.weights,
        }
    }
}

impl EmpiricalDistribution {
    /// Uniform-weight distribution of a sample; needs at least two points.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "need at least 2 samples, got {}",
                samples.len()
            )));
        }
        check_unit(samples)?;
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut atoms = Vec::with_capacity(sorted.len());
        let mut counts: Vec<usize> = Vec::with_capacity(sorted.len());
        for x in sorted {
            match atoms.last() {
                Some(&last) if last == x => *counts.last_mut().unwrap() += 1,
                _ => {
                    atoms.push(x);
                    counts.push(1);
                }
            }
        }
        let weights = counts.into_iter().map(|c| c as f64 / n).collect();
        Ok(Self::from_parts(atoms, weights))
    }

    /// Weighted distribution. Atoms need not be sorted or distinct; equal
    /// atoms are merged by adding their weights. Weights must be
    /// nonnegative and sum to one within `1e-9`; they are stored as given
    /// so a serialized distribution reloads bit-for-bit.
    pub fn from_weighted(atoms: &[f64], weights: &[f64]) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        check_unit(atoms)?;
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidDistribution("weights must be >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let mut pairs: Vec<(f64, f64)> = atoms
            .iter()
            .copied()
            .zip(weights.iter().copied())
            .filter(|&(_, w)| w > 0.0)
            .collect();
        if pairs.is_empty() {
            return Err(Error::InvalidDistribution("no atom has positive weight".into()));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged_atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut merged_weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match merged_atoms.last() {
                Some(&last) if last == a => *merged_weights.last_mut().unwrap() += w,
                _ => {
                    merged_atoms.push(a);
                    merged_weights.push(w);
                }
            }
        }
        Ok(Self::from_parts(merged_atoms, merged_weights))
    }

    /// Atoms must already be sorted and distinct. The final cumulative mass
    /// is pinned to exactly 1.
    fn from_parts(atoms: Vec<f64>, weights: Vec<f64>) -> Self {
        let mut cum = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cum.push(acc);
        }
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        EmpiricalDistribution { atoms, weights, cum }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cumulative mass at each atom: `cumulative()[i] = F(atoms()[i])`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max(&self) -> f64 {
        self.atoms[self.atoms.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// `F(x) = μ((-∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|&a| a <= x);
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1]
        }
    }

    /// `F⁻¹(a) = inf{τ : F(τ) ≥ a}`; level 0 maps to the smallest atom.
    pub fn quantile(&self, a: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidArgument(format!(
                "quantile level {a} outside [0, 1]"
            )));
        }
        Ok(self.quantile_at(a))
    }

    /// Quantile without range checking; levels are clamped into `[0, 1]`.
    pub(crate) fn quantile_at(&self, a: f64) -> f64 {
        let k = self.cum.partition_point(|&c| c < a - LEVEL_TOL);
        self.atoms[k.min(self.atoms.len() - 1)]
    }

    /// Image of the distribution under a nondecreasing map.
    pub fn push_forward(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let atoms: Vec<f64> = self.atoms.iter().map(|&a| f(a)).collect();
        Self::from_weighted(&atoms, &self.weights)
    }
}

fn check_unit(xs: &[f64]) -> Result<()> {
    match xs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        Some(x) => Err(Error::InvalidDistribution(format!(
            "atom {x} outside [0, 1]"
        ))),
        None => Ok(()),
    }
}

/// Anything with a quantile function on `[0, 1]`.
pub trait Quantile {
    fn quantile_at(&self, q: f64) -> f64;
}

impl Quantile for EmpiricalDistribution {
    fn quantile_at(&self, q: f64) -> f64 {
        EmpiricalDistribution::quantile_at(self, q)
    }
}

/// Weighted Wasserstein barycenter, represented lazily by its quantile
/// function `q ↦ Σ wᵢ F⁻¹ᵢ(q)`.
#[derive(Debug, Clone)]
pub struct Barycenter<'a> {
    dists: &'a [EmpiricalDistribution],
    weights: Vec<f64>,
}

impl<'a> Barycenter<'a> {
    pub fn new(dists: &'a [EmpiricalDistribution], weights: &[f64]) -> Result<Self> {
        if dists.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "barycenter needs at least 2 distributions, got {}",
                dists.len()
            )));
        }
        if dists.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} distributions but {} weights",
                dists.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("barycenter weights must be >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "barycenter weights sum to {total}, expected 1"
            )));
        }
        Ok(Barycenter {
            dists,
            weights: weights.to_vec(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Optimal transport of `x` from distribution `source` onto the barycenter.
    pub fn transport(&self, source: usize, x: f64) -> f64 {
        self.quantile_at(self.dists[source].cdf(x))
    }

    /// Materializes the barycenter as a distribution on the merged
    /// breakpoints of the inputs' cumulative masses.
    pub fn to_distribution(&self) -> Result<EmpiricalDistribution> {
        let mut levels: Vec<f64> = self
            .dists
            .iter()
            .flat_map(|d| d.cumulative().iter().copied())
            .collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let mut atoms = Vec::with_capacity(levels.len());
        let mut weights = Vec::with_capacity(levels.len());
        let mut prev = 0.0;
        for c in levels {
            if c > prev {
                let mid = 0.5 * (prev + c);
                let value = self
                    .dists
                    .iter()
                    .zip(&self.weights)
                    .map(|(d, w)| w * d.atoms()[d.cumulative().partition_point(|&k| k < mid)])
                    .sum::<f64>();
                atoms.push(value.clamp(0.0, 1.0));
                weights.push(c - prev);
                prev = c;
            }
        }
        EmpiricalDistribution::from_weighted(&atoms, &weights)
    }
}

impl Quantile for Barycenter<'_> {
    fn quantile_at(&self, q: f64) -> f64 {
        self.dists
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| w * d.quantile_at(q))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }
}

/// Monotone rearrangement `x ↦ F⁻¹_target(F_source(x))`.
#[derive(Debug, Clone)]
pub struct TransportMap<'a, T: Quantile> {
    pub source: &'a EmpiricalDistribution,
    pub target: T,
}

impl<'a, T: Quantile> TransportMap<'a, T> {
    pub fn new(source: &'a EmpiricalDistribution, target: T) -> Self {
        TransportMap { source, target }
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.target.quantile_at(self.source.cdf(x))
    }
}

pub fn cdf(d: &EmpiricalDistribution, x: f64) -> f64 {
    d.cdf(x)
}

pub fn quantile(d: &EmpiricalDistribution, a: f64) -> Result<f64> {
    d.quantile(a)
}

/// `W_p^p(d1, d2) = ∫₀¹ |F₁⁻¹(q) − F₂⁻¹(q)|^p dq`, integrated exactly over
/// the merged breakpoints of both quantile functions.
pub fn wasserstein(d1: &EmpiricalDistribution, d2: &EmpiricalDistribution, p: f64) -> f64 {
    debug_assert!(p >= 1.0);
    let (c1, c2) = (d1.cumulative(), d2.cumulative());
    let (a1, a2) = (d1.atoms(), d2.atoms());
    let (mut i, mut j) = (0, 0);
    let mut prev = 0.0;
    let mut acc = 0.0;
    while i < c1.len() && j < c2.len() {
        let next = c1[i].min(c2[j]);
        acc += (next - prev) * pow_abs(a1[i] - a2[j], p);
        prev = next;
        if c1[i] == next {
            i += 1;
        }
        if c2[j] == next {
            j += 1;
        }
    }
    acc
}

/// `W_p^p` between two uniformly weighted samples given in ascending order.
///
/// Sample sizes may differ; breakpoints `i/n` and `j/m` are merged with
/// integer arithmetic so shared levels are matched exactly.
pub fn wasserstein_sorted_samples(a: &[f64], b: &[f64], p: f64) -> f64 {
    debug_assert!(a.windows(2).all(|w| w[0] <= w[1]));
    debug_assert!(b.windows(2).all(|w| w[0] <= w[1]));
    let (n, m) = (a.len() as u64, b.len() as u64);
    if n == 0 || m == 0 {
        return 0.0;
    }
    if n == m {
        let sum: f64 = a.iter().zip(b).map(|(x, y)| pow_abs(x - y, p)).sum();
        return sum / n as f64;
    }
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = 0u64;
    let mut acc = 0.0;
    while (i as u64) < n && (j as u64) < m {
        let ei = (i as u64 + 1) * m;
        let ej = (j as u64 + 1) * n;
        let next = ei.min(ej);
        acc += (next - prev) as f64 * pow_abs(a[i] - b[j], p);
        prev = next;
        if ei == next {
            i += 1;
        }
        if ej == next {
            j += 1;
        }
    }
    acc / (n * m) as f64
}

/// `Σ wᵢ F⁻¹ᵢ(q)`.
pub fn barycenter_quantile(dists: &[EmpiricalDistribution], w: &[f64], q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!(
            "quantile level {q} outside [0, 1]"
        )));
    }
    Ok(Barycenter::new(dists, w)?.quantile_at(q))
}

/// `F⁻¹_β(F_source(x))` for the barycenter `β` of `dists` with weights `w`.
pub fn transport_to_barycenter(
    dists: &[EmpiricalDistribution],
    w: &[f64],
    source: usize,
    x: f64,
) -> Result<f64> {
    if source >= dists.len() {
        return Err(Error::InvalidArgument(format!(
            "source index {source} out of range"
        )));
    }
    Ok(Barycenter::new(dists, w)?.transport(source, x))
}

#[inline]
pub(crate) fn pow_abs(x: f64, p: f64) -> f64 {
    let x = x.abs();
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(xs: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::from_samples(xs).unwrap()
    }

    #[test]
    fn cdf_counts_atoms_at_or_below() {
        let dist = d(&[0.2, 0.4, 0.6, 0.8]);
        assert_eq!(dist.cdf(0.4), 0.5);
        assert_eq!(dist.cdf(0.1), 0.0);
        assert_eq!(dist.cdf(0.8), 1.0);
        assert_eq!(dist.cdf(0.79), 0.75);
    }

    #[test]
    fn quantile_is_pseudo_inverse() {
        let dist = d(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(dist.quantile(0.25).unwrap(), 0.1);
        assert_eq!(dist.quantile(0.26).unwrap(), 0.2);
        assert_eq!(dist.quantile(1.0).unwrap(), 0.4);
        assert_eq!(dist.quantile(0.0).unwrap(), 0.1);
        assert_eq!(d(&[0.2, 0.4, 0.6, 0.8]).quantile(0.5).unwrap(), 0.4);
        assert!(dist.quantile(1.5).is_err());
        assert!(dist.quantile(-0.1).is_err());
    }

    #[test]
    fn duplicates_are_merged() {
        let dist = d(&[0.3, 0.1, 0.3, 0.3]);
        assert_eq!(dist.atoms(), [0.1, 0.3]);
        assert_eq!(dist.weights(), [0.25, 0.75]);
        assert_eq!(dist.cdf(0.3), 1.0);
    }

    #[test]
    fn wasserstein_examples() {
        let a = d(&[0.2, 0.4, 0.6, 0.8]);
        let b = d(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(wasserstein(&a, &a, 1.0), 0.0);
        assert!((wasserstein(&a, &b, 1.0) - 0.25).abs() < 1e-15);
        let zero = d(&[0.0, 0.0]);
        let one = d(&[1.0, 1.0]);
        assert_eq!(wasserstein(&zero, &one, 1.0), 1.0);
        assert_eq!(wasserstein(&zero, &one, 3.0), 1.0);
    }

    #[test]
    fn sample_fast_path_matches_partition_integral() {
        let a = [0.05, 0.2, 0.2, 0.5, 0.9];
        let b = [0.1, 0.3, 0.35, 0.7, 0.75];
        let c = [0.0, 0.4, 0.8];
        for p in [1.0, 2.0, 1.5] {
            let exact = wasserstein(&d(&a), &d(&b), p);
            assert!((wasserstein_sorted_samples(&a, &b, p) - exact).abs() < 1e-12);
            let exact = wasserstein(&d(&a), &d(&c), p);
            assert!((wasserstein_sorted_samples(&a, &c, p) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn barycenter_quantile_examples() {
        let dists = [d(&[0.2, 0.4, 0.6, 0.8]), d(&[0.1, 0.2, 0.3, 0.4])];
        let q = barycenter_quantile(&dists, &[0.5, 0.5], 0.25).unwrap();
        assert!((q - 0.15).abs() < 1e-15);
        for level in [0.0, 0.3, 0.5, 0.99, 1.0] {
            assert_eq!(
                barycenter_quantile(&dists, &[1.0, 0.0], level).unwrap(),
                dists[0].quantile(level).unwrap()
            );
        }
        assert!(barycenter_quantile(&dists, &[0.5, 0.6], 0.3).is_err());
        assert!(barycenter_quantile(&dists[..1], &[1.0], 0.3).is_err());
    }

    #[test]
    fn transport_examples() {
        let dists = [d(&[0.2, 0.4, 0.6, 0.8]), d(&[0.1, 0.2, 0.3, 0.4])];
        let t = transport_to_barycenter(&dists, &[0.5, 0.5], 0, 0.2).unwrap();
        assert!((t - 0.15).abs() < 1e-15);
        for &a in dists[0].atoms() {
            assert_eq!(transport_to_barycenter(&dists, &[1.0, 0.0], 0, a).unwrap(), a);
        }
        let same = [dists[1].clone(), dists[1].clone()];
        for &a in same[0].atoms() {
            let t = transport_to_barycenter(&same, &[0.3, 0.7], 1, a).unwrap();
            assert!((t - a).abs() < 1e-15);
        }
    }

    #[test]
    fn barycenter_distribution_matches_quantiles() {
        let dists = [d(&[0.2, 0.4, 0.6, 0.8]), d(&[0.1, 0.3, 0.5])];
        let bary = Barycenter::new(&dists, &[0.25, 0.75]).unwrap();
        let mat = bary.to_distribution().unwrap();
        for k in 1..100 {
            let q = k as f64 / 100.0;
            assert!((mat.quantile_at(q) - bary.quantile_at(q)).abs() < 1e-12, "q={q}");
        }
    }

    #[test]
    fn serde_roundtrip_is_exact() {
        let dist = d(&[0.1, 1.0 / 3.0, 0.7, 0.7, 0.9, 0.11]);
        let json = serde_json::to_string(&dist).unwrap();
        let back: EmpiricalDistribution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, dist);
        assert!(serde_json::from_str::<EmpiricalDistribution>(
            r#"{"atoms":[0.1,0.2],"weights":[0.5,0.2]}"#
        )
        .is_err());
    }
}
