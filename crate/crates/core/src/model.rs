//! Core domain types: score domains, scored rows, validated datasets and
//! confusion-matrix metric selectors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval of admissible scores.
///
/// Scores are kept in these units everywhere user-facing; the transport math
/// runs on the affine image of the interval onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDomain {
    pub lo: f64,
    pub hi: f64,
}

impl ScoreDomain {
    pub const UNIT: ScoreDomain = ScoreDomain { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidDomain { lo, hi });
        }
        Ok(ScoreDomain { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn normalize(&self, x: f64) -> f64 {
        ((x - self.lo) / self.width()).clamp(0.0, 1.0)
    }

    pub fn denormalize(&self, u: f64) -> f64 {
        (self.lo + u * self.width()).clamp(self.lo, self.hi)
    }
}

impl FromStr for ScoreDomain {
    type Err = Error;

    /// Parses `lo:hi`.
    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("domain must be lo:hi, got {s:?}")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad domain bound {v:?}")))
        };
        ScoreDomain::new(parse(lo)?, parse(hi)?)
    }
}

/// One scored individual: model output, protected group and (optional) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRow {
    pub score: f64,
    pub group: String,
    pub label: Option<u8>,
}

impl ScoredRow {
    pub fn new(score: f64, group: impl Into<String>, label: Option<u8>) -> Self {
        ScoredRow {
            score,
            group: group.into(),
            label,
        }
    }

    pub fn labeled(score: f64, group: impl Into<String>, label: u8) -> Self {
        Self::new(score, group, Some(label))
    }

    pub fn unlabeled(score: f64, group: impl Into<String>) -> Self {
        Self::new(score, group, None)
    }
}

/// A validated collection of scored rows.
///
/// Groups are discovered from the rows and ordered lexicographically, so
/// group indices (and everything derived from them) are deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDataset {
    rows: Vec<ScoredRow>,
    group_of: Vec<usize>,
    groups: Vec<String>,
    counts: Vec<usize>,
    domain: ScoreDomain,
}

impl ScoredDataset {
    /// Validates rows against `domain`.
    ///
    /// Every group must hold at least two rows: a single atom carries no
    /// quantile information to transport.
    pub fn validate(rows: Vec<ScoredRow>, domain: ScoreDomain) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::NoRows);
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, row) in rows.iter().enumerate() {
            if !row.score.is_finite() {
                return Err(Error::NonFiniteScore { row: i });
            }
            if !domain.contains(row.score) {
                return Err(Error::ScoreOutOfDomain {
                    row: i,
                    score: row.score,
                    lo: domain.lo,
                    hi: domain.hi,
                });
            }
            if let Some(l) = row.label {
                if l > 1 {
                    return Err(Error::NonBinaryLabel {
                        row: i,
                        label: l.to_string(),
                    });
                }
            }
            *counts.entry(row.group.as_str()).or_default() += 1;
        }
        if let Some((g, &c)) = counts.iter().find(|(_, &c)| c < 2) {
            return Err(Error::GroupTooSmall {
                group: g.to_string(),
                count: c,
            });
        }
        let groups: Vec<String> = counts.keys().map(|g| g.to_string()).collect();
        let counts: Vec<usize> = counts.values().copied().collect();
        let group_of = rows
            .iter()
            .map(|r| groups.binary_search(&r.group).expect("group was counted"))
            .collect();
        Ok(ScoredDataset {
            rows,
            group_of,
            groups,
            counts,
            domain,
        })
    }

    pub fn rows(&self) -> &[ScoredRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<ScoredRow> {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn domain(&self) -> ScoreDomain {
        self.domain
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group_index(&self, group: &str) -> Option<usize> {
        self.groups.binary_search_by(|g| g.as_str().cmp(group)).ok()
    }

    /// Group index of row `i`.
    pub fn group_of(&self, i: usize) -> usize {
        self.group_of[i]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Group proportions `p_g`, in group order.
    pub fn proportions(&self) -> Vec<f64> {
        let n = self.rows.len() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// True when every row carries a label.
    pub fn is_labeled(&self) -> bool {
        self.rows.iter().all(|r| r.label.is_some())
    }

    /// Scores of each group, in row order, in original units.
    pub fn group_scores(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.groups.len()];
        for (row, &g) in self.rows.iter().zip(&self.group_of) {
            out[g].push(row.score);
        }
        out
    }

    /// Rows matching the label condition of `kind`.
    ///
    /// Every group must keep at least two rows, otherwise its conditional
    /// distribution is undefined and an error is returned.
    pub fn subset_by_label(&self, kind: MetricKind) -> Result<ScoredDataset> {
        let Some(want) = kind.label_condition.label() else {
            return Ok(self.clone());
        };
        if !self.is_labeled() {
            return Err(Error::MissingLabels {
                condition: kind.label_condition.to_string(),
            });
        }
        let mut counts = vec![0usize; self.groups.len()];
        let mut rows = Vec::new();
        let mut group_of = Vec::new();
        for (row, &g) in self.rows.iter().zip(&self.group_of) {
            if row.label == Some(want) {
                counts[g] += 1;
                rows.push(row.clone());
                group_of.push(g);
            }
        }
        for (g, &c) in counts.iter().enumerate() {
            let condition = kind.label_condition.to_string();
            let group = self.groups[g].clone();
            match c {
                0 => return Err(Error::EmptyConditionalGroup { group, condition }),
                1 => {
                    return Err(Error::ConditionalGroupTooSmall {
                        group,
                        condition,
                        count: c,
                    })
                }
                _ => {}
            }
        }
        Ok(ScoredDataset {
            rows,
            group_of,
            groups: self.groups.clone(),
            counts,
            domain: self.domain,
        })
    }

    /// Replaces scores in place, keeping groups and labels.
    pub(crate) fn with_scores(&self, scores: Vec<f64>) -> ScoredDataset {
        debug_assert_eq!(scores.len(), self.rows.len());
        let rows = self
            .rows
            .iter()
            .zip(scores)
            .map(|(r, s)| ScoredRow {
                score: s,
                group: r.group.clone(),
                label: r.label,
            })
            .collect();
        ScoredDataset {
            rows,
            group_of: self.group_of.clone(),
            groups: self.groups.clone(),
            counts: self.counts.clone(),
            domain: self.domain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelCondition {
    Positive,
    Negative,
    Unconditional,
}

impl LabelCondition {
    pub fn label(self) -> Option<u8> {
        match self {
            LabelCondition::Positive => Some(1),
            LabelCondition::Negative => Some(0),
            LabelCondition::Unconditional => None,
        }
    }
}

impl fmt::Display for LabelCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelCondition::Positive => f.write_str("Y=1"),
            LabelCondition::Negative => f.write_str("Y=0"),
            LabelCondition::Unconditional => f.write_str("unconditional"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictedClass {
    Positive,
    Negative,
}

/// A confusion-matrix rate `Pr[ŷ(τ) = c | Y = y, G = g]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetricKind {
    pub label_condition: LabelCondition,
    pub predicted: PredictedClass,
}

impl MetricKind {
    pub const PR: MetricKind = MetricKind::new(LabelCondition::Unconditional, PredictedClass::Positive);
    pub const NR: MetricKind = MetricKind::new(LabelCondition::Unconditional, PredictedClass::Negative);
    pub const TPR: MetricKind = MetricKind::new(LabelCondition::Positive, PredictedClass::Positive);
    pub const FNR: MetricKind = MetricKind::new(LabelCondition::Positive, PredictedClass::Negative);
    pub const FPR: MetricKind = MetricKind::new(LabelCondition::Negative, PredictedClass::Positive);
    pub const TNR: MetricKind = MetricKind::new(LabelCondition::Negative, PredictedClass::Negative);

    pub const ALL: [MetricKind; 6] = [
        MetricKind::PR,
        MetricKind::NR,
        MetricKind::TPR,
        MetricKind::FNR,
        MetricKind::FPR,
        MetricKind::TNR,
    ];

    pub const fn new(label_condition: LabelCondition, predicted: PredictedClass) -> Self {
        MetricKind {
            label_condition,
            predicted,
        }
    }

    pub fn name(&self) -> &'static str {
        use LabelCondition as L;
        use PredictedClass as C;
        match (self.label_condition, self.predicted) {
            (L::Unconditional, C::Positive) => "pr",
            (L::Unconditional, C::Negative) => "nr",
            (L::Positive, C::Positive) => "tpr",
            (L::Positive, C::Negative) => "fnr",
            (L::Negative, C::Positive) => "fpr",
            (L::Negative, C::Negative) => "tnr",
        }
    }

    pub fn needs_labels(&self) -> bool {
        self.label_condition != LabelCondition::Unconditional
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        MetricKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidMetric(format!("unknown metric {s:?}")))
    }
}

impl Serialize for MetricKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for MetricKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Nonnegative weighted sum of metrics, e.g. equalized odds as `tpr:1,fpr:1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCombo {
    terms: Vec<(MetricKind, f64)>,
}

impl MetricCombo {
    pub fn new(terms: Vec<(MetricKind, f64)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidMetric("empty metric combination".into()));
        }
        if let Some((k, w)) = terms.iter().find(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidMetric(format!("weight {w} for {k} must be >= 0")));
        }
        Ok(MetricCombo { terms })
    }

    pub fn single(kind: MetricKind) -> Self {
        MetricCombo {
            terms: vec![(kind, 1.0)],
        }
    }

    pub fn terms(&self) -> &[(MetricKind, f64)] {
        &self.terms
    }

    pub fn needs_labels(&self) -> bool {
        self.terms.iter().any(|(k, _)| k.needs_labels())
    }

    /// The metric when the combination has exactly one term.
    pub fn as_single(&self) -> Option<MetricKind> {
        match self.terms.as_slice() {
            [(k, _)] => Some(*k),
            _ => None,
        }
    }
}

impl fmt::Display for MetricCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, w)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}:{w}")?;
        }
        Ok(())
    }
}

impl FromStr for MetricCombo {
    type Err = Error;

    /// Parses `tpr`, `tpr:2` or `tpr:1,fpr:1`; a missing weight means 1.
    fn from_str(s: &str) -> Result<Self> {
        let terms = s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| match t.split_once(':') {
                Some((k, w)) => {
                    let w = w
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidMetric(format!("bad weight in {t:?}")))?;
                    Ok((k.parse()?, w))
                }
                None => Ok((t.parse()?, 1.0)),
            })
            .collect::<Result<Vec<_>>>()?;
        MetricCombo::new(terms)
    }
}
