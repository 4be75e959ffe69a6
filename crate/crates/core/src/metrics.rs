//! Threshold-sweep confusion-matrix rates and distributional disparity.
//!
//! A thresholded prediction is `ŷ = 1{score ≥ τ}`; a score equal to the
//! threshold counts as positive.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MetricKind, PredictedClass, ScoreDomain, ScoredDataset};
use crate::ot::{self, pow_abs, EmpiricalDistribution};

pub const DEFAULT_GRID_POINTS: usize = 101;

/// Strictly increasing thresholds in original score units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    domain: ScoreDomain,
    points: Vec<f64>,
}

impl ThresholdGrid {
    /// `count` evenly spaced points from `domain.lo` to `domain.hi` inclusive.
    pub fn uniform(domain: ScoreDomain, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidArgument(format!(
                "threshold grid needs at least 2 points, got {count}"
            )));
        }
        let last = (count - 1) as f64;
        let points = (0..count)
            .map(|i| {
                if i == count - 1 {
                    domain.hi
                } else {
                    domain.lo + domain.width() * (i as f64 / last)
                }
            })
            .collect();
        Ok(ThresholdGrid { domain, points })
    }

    pub fn from_points(domain: ScoreDomain, points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument("threshold grid needs at least 2 points".into()));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("thresholds must be strictly increasing".into()));
        }
        if points.iter().any(|&p| !domain.contains(p)) {
            return Err(Error::InvalidArgument("thresholds must lie in the score domain".into()));
        }
        Ok(ThresholdGrid { domain, points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn domain(&self) -> ScoreDomain {
        self.domain
    }

    /// Thresholds mapped onto `[0, 1]`.
    pub fn normalized(&self) -> Vec<f64> {
        self.points.iter().map(|&t| self.domain.normalize(t)).collect()
    }
}

/// A rate evaluated on a threshold grid, one curve per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityCurve {
    pub metric: MetricKind,
    pub grid: ThresholdGrid,
    pub values: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairGap {
    pub group: String,
    pub other: String,
    /// Trapezoid estimate of `E_τ |γ_g(τ) − γ_g'(τ)|^p` over the grid.
    pub expected_gap: f64,
    /// `max_τ |γ_g(τ) − γ_g'(τ)|` over the grid.
    pub max_gap: f64,
    /// `W_p^p` between the conditional score distributions, on the
    /// normalized score scale.
    pub exact_wasserstein: f64,
}

/// Disparity summary. For more than two groups the scalar fields are the
/// worst pair; `mean_expected_gap` averages the pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityReport {
    pub metric: MetricKind,
    pub p: f64,
    pub grid_points: usize,
    pub expected_gap: f64,
    pub mean_expected_gap: f64,
    pub max_gap: f64,
    pub exact_wasserstein: f64,
    pub pairs: Vec<PairGap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityGap {
    pub group: String,
    pub other: String,
    pub gap: f64,
}

/// Rates at each threshold for ascending `sorted` scores.
pub fn rates_from_sorted(sorted: &[f64], thresholds: &[f64], predicted: PredictedClass) -> Vec<f64> {
    let n = sorted.len() as f64;
    thresholds
        .iter()
        .map(|&tau| {
            let positive = (sorted.len() - sorted.partition_point(|&s| s < tau)) as f64 / n;
            match predicted {
                PredictedClass::Positive => positive,
                PredictedClass::Negative => 1.0 - positive,
            }
        })
        .collect()
}

/// Trapezoid rule; `xs` ascending.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

fn sorted_group_scores(ds: &ScoredDataset) -> Vec<Vec<f64>> {
    let mut scores = ds.group_scores();
    for s in &mut scores {
        s.sort_by(f64::total_cmp);
    }
    scores
}

pub fn rate_curve(ds: &ScoredDataset, kind: MetricKind, grid: &ThresholdGrid) -> Result<DisparityCurve> {
    let sub = ds.subset_by_label(kind)?;
    let values = sub
        .groups()
        .iter()
        .cloned()
        .zip(sorted_group_scores(&sub))
        .map(|(g, s)| (g, rates_from_sorted(&s, grid.points(), kind.predicted)))
        .collect();
    Ok(DisparityCurve {
        metric: kind,
        grid: grid.clone(),
        values,
    })
}

/// Label-conditioned, normalized score distribution of every group.
pub fn conditional_distributions(ds: &ScoredDataset, kind: MetricKind) -> Result<Vec<EmpiricalDistribution>> {
    let sub = ds.subset_by_label(kind)?;
    let domain = sub.domain();
    sub.group_scores()
        .into_iter()
        .map(|s| {
            let u: Vec<f64> = s.iter().map(|&x| domain.normalize(x)).collect();
            EmpiricalDistribution::from_samples(&u)
        })
        .collect()
}

pub fn distributional_disparity(
    ds: &ScoredDataset,
    kind: MetricKind,
    p: f64,
    grid: &ThresholdGrid,
) -> Result<DisparityReport> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
    }
    if ds.num_groups() < 2 {
        return Err(Error::TooFewGroups {
            needed: 2,
            found: ds.num_groups(),
        });
    }
    let curve = rate_curve(ds, kind, grid)?;
    let dists = conditional_distributions(ds, kind)?;
    let taus = grid.normalized();
    let span = taus[taus.len() - 1] - taus[0];
    let curves: Vec<(&String, &Vec<f64>)> = curve.values.iter().collect();

    let mut pairs = Vec::new();
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            let diffs: Vec<f64> = curves[i].1.iter().zip(curves[j].1).map(|(a, b)| (a - b).abs()).collect();
            let powered: Vec<f64> = diffs.iter().map(|&d| pow_abs(d, p)).collect();
            pairs.push(PairGap {
                group: curves[i].0.clone(),
                other: curves[j].0.clone(),
                expected_gap: trapezoid(&taus, &powered) / span,
                max_gap: diffs.iter().copied().fold(0.0, f64::max),
                exact_wasserstein: ot::wasserstein(&dists[i], &dists[j], p),
            });
        }
    }
    let worst = |f: fn(&PairGap) -> f64| pairs.iter().map(f).fold(0.0, f64::max);
    Ok(DisparityReport {
        metric: kind,
        p,
        grid_points: grid.count(),
        expected_gap: worst(|g| g.expected_gap),
        mean_expected_gap: pairs.iter().map(|g| g.expected_gap).sum::<f64>() / pairs.len() as f64,
        max_gap: worst(|g| g.max_gap),
        exact_wasserstein: worst(|g| g.exact_wasserstein),
        pairs,
    })
}

/// `E[score | condition, g]` per group, in original units.
pub fn conditional_means(ds: &ScoredDataset, kind: MetricKind) -> Result<Vec<f64>> {
    let sub = ds.subset_by_label(kind)?;
    Ok(sub
        .group_scores()
        .iter()
        .map(|s| s.iter().sum::<f64>() / s.len() as f64)
        .collect())
}

/// Differences of conditional mean scores for every ordered pair of groups.
pub fn probabilistic_parity_gap(ds: &ScoredDataset, kind: MetricKind) -> Result<Vec<ParityGap>> {
    let means = conditional_means(ds, kind)?;
    let groups = ds.groups();
    let mut out = Vec::new();
    for i in 0..groups.len() {
        for j in 0..groups.len() {
            if i != j {
                out.push(ParityGap {
                    group: groups[i].clone(),
                    other: groups[j].clone(),
                    gap: means[i] - means[j],
                });
            }
        }
    }
    Ok(out)
}

/// `L_g = Σ_{j≠g} |m_g − m_j|`.
pub fn pairwise_abs_losses(means: &[f64]) -> Vec<f64> {
    means
        .iter()
        .map(|mi| means.iter().map(|mj| (mi - mj).abs()).sum())
        .collect()
}

pub fn groupwise_lex_loss(ds: &ScoredDataset, kind: MetricKind) -> Result<BTreeMap<String, f64>> {
    if ds.num_groups() < 2 {
        return Err(Error::TooFewGroups {
            needed: 2,
            found: ds.num_groups(),
        });
    }
    let losses = pairwise_abs_losses(&conditional_means(ds, kind)?);
    Ok(ds.groups().iter().cloned().zip(losses).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScoredRow;

    fn dataset(rows: &[(f64, &str, Option<u8>)]) -> ScoredDataset {
        ScoredDataset::validate(
            rows.iter().map(|&(s, g, l)| ScoredRow::new(s, g, l)).collect(),
            ScoreDomain::UNIT,
        )
        .unwrap()
    }

    fn binary_example() -> ScoredDataset {
        let mut rows = Vec::new();
        for s in [0.2, 0.4, 0.6, 0.8] {
            rows.push((s, "A", None));
        }
        for s in [0.1, 0.2, 0.3, 0.4] {
            rows.push((s, "B", None));
        }
        dataset(&rows)
    }

    #[test]
    fn uniform_grid_includes_endpoints() {
        let g = ThresholdGrid::uniform(ScoreDomain::new(0.0, 100.0).unwrap(), 101).unwrap();
        assert_eq!(g.points()[0], 0.0);
        assert_eq!(g.points()[100], 100.0);
        assert_eq!(g.points()[37], 37.0);
        assert!(ThresholdGrid::uniform(ScoreDomain::UNIT, 1).is_err());
        assert!(ThresholdGrid::from_points(ScoreDomain::UNIT, vec![0.1, 0.1]).is_err());
    }

    #[test]
    fn tpr_counts_positives_at_or_above_threshold() {
        let ds = dataset(&[
            (0.2, "A", Some(1)),
            (0.6, "A", Some(1)),
            (0.9, "A", Some(0)),
            (0.95, "A", Some(0)),
            (0.3, "B", Some(1)),
            (0.5, "B", Some(1)),
            (0.1, "B", Some(0)),
            (0.2, "B", Some(0)),
        ]);
        let grid = ThresholdGrid::from_points(ScoreDomain::UNIT, vec![0.0, 0.5, 0.6]).unwrap();
        let c = rate_curve(&ds, MetricKind::TPR, &grid).unwrap();
        assert_eq!(c.values["A"], vec![1.0, 0.5, 0.5]);
        assert_eq!(c.values["B"], vec![1.0, 0.5, 0.0]);

        let pr = rate_curve(&ds, MetricKind::PR, &grid).unwrap();
        assert!(pr.values.values().all(|v| v[0] == 1.0));

        let above = ThresholdGrid::from_points(ScoreDomain::UNIT, vec![0.0, 0.96]).unwrap();
        let tnr = rate_curve(&ds, MetricKind::TNR, &above).unwrap();
        assert!(tnr.values.values().all(|v| v[1] == 1.0));
    }

    #[test]
    fn unlabeled_tpr_fails() {
        let err = rate_curve(
            &binary_example(),
            MetricKind::TPR,
            &ThresholdGrid::uniform(ScoreDomain::UNIT, 11).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingLabels { .. }));
    }

    #[test]
    fn disparity_exact_route_matches_wasserstein_example() {
        let grid = ThresholdGrid::uniform(ScoreDomain::UNIT, 1001).unwrap();
        let r = distributional_disparity(&binary_example(), MetricKind::PR, 1.0, &grid).unwrap();
        assert!((r.exact_wasserstein - 0.25).abs() < 1e-12);
        assert!((r.expected_gap - 0.25).abs() < 5e-3);
        assert_eq!(r.pairs.len(), 1);
        assert!(r.expected_gap <= r.max_gap);
    }

    #[test]
    fn identical_groups_have_no_disparity() {
        let ds = dataset(&[(0.1, "a", None), (0.7, "a", None), (0.1, "b", None), (0.7, "b", None)]);
        let grid = ThresholdGrid::uniform(ScoreDomain::UNIT, 101).unwrap();
        let r = distributional_disparity(&ds, MetricKind::PR, 1.0, &grid).unwrap();
        assert_eq!((r.expected_gap, r.max_gap, r.exact_wasserstein), (0.0, 0.0, 0.0));
        assert!(probabilistic_parity_gap(&ds, MetricKind::PR).unwrap().iter().all(|g| g.gap == 0.0));
    }

    #[test]
    fn three_groups_give_three_pairs() {
        let ds = dataset(&[
            (0.1, "a", None),
            (0.2, "a", None),
            (0.3, "b", None),
            (0.4, "b", None),
            (0.5, "c", None),
            (0.9, "c", None),
        ]);
        let grid = ThresholdGrid::uniform(ScoreDomain::UNIT, 101).unwrap();
        let r = distributional_disparity(&ds, MetricKind::NR, 1.0, &grid).unwrap();
        assert_eq!(r.pairs.len(), 3);
        let one = dataset(&[(0.1, "a", None), (0.2, "a", None)]);
        assert!(matches!(
            distributional_disparity(&one, MetricKind::PR, 1.0, &grid),
            Err(Error::TooFewGroups { .. })
        ));
    }

    #[test]
    fn mean_gap_example() {
        let ds = dataset(&[
            (0.2, "A", Some(1)),
            (0.4, "A", Some(1)),
            (0.5, "B", Some(1)),
            (0.7, "B", Some(1)),
            (0.9, "B", Some(0)),
            (0.1, "A", Some(0)),
        ]);
        let gaps = probabilistic_parity_gap(&ds, MetricKind::FPR).unwrap_err();
        assert!(matches!(gaps, Error::ConditionalGroupTooSmall { .. } | Error::EmptyConditionalGroup { .. }));
        let gaps = probabilistic_parity_gap(&ds, MetricKind::PR).unwrap();
        assert_eq!(gaps.len(), 2);

        let ds = dataset(&[
            (0.2, "A", Some(1)),
            (0.4, "A", Some(1)),
            (0.5, "B", Some(1)),
            (0.7, "B", Some(1)),
        ]);
        let gaps = probabilistic_parity_gap(&ds, MetricKind::TPR).unwrap();
        let ab = gaps.iter().find(|g| g.group == "A").unwrap();
        assert!((ab.gap + 0.3).abs() < 1e-12);
    }

    #[test]
    fn lex_loss_sums_pairwise_gaps() {
        let l = pairwise_abs_losses(&[0.3, 0.6, 0.5]);
        assert!((l[0] - 0.5).abs() < 1e-12);
        assert!((l[1] - 0.4).abs() < 1e-12);
        assert!((l[2] - 0.3).abs() < 1e-12);
        let ds = dataset(&[(0.1, "a", None), (0.7, "a", None), (0.1, "b", None), (0.7, "b", None)]);
        let losses = groupwise_lex_loss(&ds, MetricKind::PR).unwrap();
        assert_eq!(losses.values().copied().collect::<Vec<_>>(), vec![0.0, 0.0]);
    }
}
