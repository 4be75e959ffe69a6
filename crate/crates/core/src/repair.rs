//! Total and geometric (partial) repair onto the Wasserstein barycenter.
//!
//! A fitted [`RepairPlan`] holds each group's unconditional score
//! distribution, the group proportions used as barycenter weights, and a
//! repair amount `λ_g ∈ [0, 1]` per group. A score `x` of group `g` is
//! repaired to `x + λ_g · t(x, g)`, where `t` moves `x` all the way onto the
//! barycenter. Fitting needs no labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ScoreDomain, ScoredDataset, ScoredRow};
use crate::ot::{Barycenter, EmpiricalDistribution};

pub const PLAN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlanFile", into = "PlanFile")]
pub struct RepairPlan {
    domain: ScoreDomain,
    groups: Vec<String>,
    weights: Vec<f64>,
    fitted: Vec<EmpiricalDistribution>,
    lambdas: Vec<f64>,
}

/// On-disk layout. Fitted atoms are on the normalized `[0, 1]` scale.
#[derive(Serialize, Deserialize)]
struct PlanFile {
    format_version: u32,
    domain: ScoreDomain,
    groups: Vec<String>,
    weights: Vec<f64>,
    fitted: BTreeMap<String, EmpiricalDistribution>,
    lambdas: BTreeMap<String, f64>,
}

impl From<RepairPlan> for PlanFile {
    fn from(plan: RepairPlan) -> Self {
        PlanFile {
            format_version: PLAN_FORMAT_VERSION,
            domain: plan.domain,
            fitted: plan.groups.iter().cloned().zip(plan.fitted).collect(),
            lambdas: plan.groups.iter().cloned().zip(plan.lambdas).collect(),
            groups: plan.groups,
            weights: plan.weights,
        }
    }
}

impl TryFrom<PlanFile> for RepairPlan {
    type Error = Error;

    fn try_from(mut file: PlanFile) -> Result<Self> {
        if file.format_version != PLAN_FORMAT_VERSION {
            return Err(Error::InvalidPlan(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        let mut fitted = Vec::with_capacity(file.groups.len());
        let mut lambdas = Vec::with_capacity(file.groups.len());
        for g in &file.groups {
            fitted.push(
                file.fitted
                    .remove(g)
                    .ok_or_else(|| Error::InvalidPlan(format!("no fitted distribution for {g}")))?,
            );
            lambdas.push(
                *file
                    .lambdas
                    .get(g)
                    .ok_or_else(|| Error::InvalidPlan(format!("no lambda for {g}")))?,
            );
        }
        RepairPlan::from_parts(file.domain, file.groups, file.weights, fitted, lambdas)
    }
}

impl RepairPlan {
    /// Fits per-group distributions and proportions; every `λ` starts at 1.
    pub fn fit(ds: &ScoredDataset) -> Result<Self> {
        if ds.num_groups() < 2 {
            return Err(Error::TooFewGroups {
                needed: 2,
                found: ds.num_groups(),
            });
        }
        let domain = ds.domain();
        let fitted = ds
            .group_scores()
            .iter()
            .map(|s| {
                let u: Vec<f64> = s.iter().map(|&x| domain.normalize(x)).collect();
                EmpiricalDistribution::from_samples(&u)
            })
            .collect::<Result<Vec<_>>>()?;
        let lambdas = vec![1.0; ds.num_groups()];
        Self::from_parts(domain, ds.groups().to_vec(), ds.proportions(), fitted, lambdas)
    }

    fn from_parts(
        domain: ScoreDomain,
        groups: Vec<String>,
        weights: Vec<f64>,
        fitted: Vec<EmpiricalDistribution>,
        lambdas: Vec<f64>,
    ) -> Result<Self> {
        let n = groups.len();
        if n < 2 {
            return Err(Error::TooFewGroups { needed: 2, found: n });
        }
        if weights.len() != n || fitted.len() != n || lambdas.len() != n {
            return Err(Error::InvalidPlan("per-group arrays differ in length".into()));
        }
        if groups.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPlan("groups must be sorted and distinct".into()));
        }
        ScoreDomain::new(domain.lo, domain.hi)?;
        // validates the weight vector
        Barycenter::new(&fitted, &weights)?;
        check_lambdas(&lambdas)?;
        Ok(RepairPlan {
            domain,
            groups,
            weights,
            fitted,
            lambdas,
        })
    }

    pub fn domain(&self) -> ScoreDomain {
        self.domain
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn fitted(&self) -> &[EmpiricalDistribution] {
        &self.fitted
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn group_index(&self, group: &str) -> Result<usize> {
        self.groups
            .binary_search_by(|g| g.as_str().cmp(group))
            .map_err(|_| Error::UnknownGroup(group.to_string()))
    }

    pub fn lambda(&self, group: &str) -> Result<f64> {
        Ok(self.lambdas[self.group_index(group)?])
    }

    pub fn set_lambdas(&mut self, lambdas: Vec<f64>) -> Result<()> {
        if lambdas.len() != self.groups.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} lambdas, got {}",
                self.groups.len(),
                lambdas.len()
            )));
        }
        check_lambdas(&lambdas)?;
        self.lambdas = lambdas;
        Ok(())
    }

    pub fn with_lambdas(mut self, lambdas: Vec<f64>) -> Result<Self> {
        self.set_lambdas(lambdas)?;
        Ok(self)
    }

    pub fn with_uniform_lambda(self, lambda: f64) -> Result<Self> {
        let n = self.groups.len();
        self.with_lambdas(vec![lambda; n])
    }

    pub fn barycenter(&self) -> Barycenter<'_> {
        Barycenter::new(&self.fitted, &self.weights).expect("validated at construction")
    }

    /// `t(u, g)` on the normalized scale.
    pub fn normalized_shift(&self, group: usize, u: f64) -> f64 {
        self.barycenter().transport(group, u) - u
    }

    /// Shifts for many normalized scores of one group.
    pub fn normalized_shifts(&self, group: usize, us: &[f64]) -> Vec<f64> {
        let bary = self.barycenter();
        us.iter().map(|&u| bary.transport(group, u) - u).collect()
    }

    fn check_score(&self, x: f64) -> Result<()> {
        if !(x.is_finite() && self.domain.contains(x)) {
            return Err(Error::ScoreOutOfDomain {
                row: 0,
                score: x,
                lo: self.domain.lo,
                hi: self.domain.hi,
            });
        }
        Ok(())
    }

    /// `t(x, g) = f_β(x, g) − x`, in original units.
    pub fn shift(&self, group: &str, x: f64) -> Result<f64> {
        let g = self.group_index(group)?;
        self.check_score(x)?;
        Ok(self.normalized_shift(g, self.domain.normalize(x)) * self.domain.width())
    }

    /// Score after transport all the way onto the barycenter.
    pub fn total_repair_score(&self, group: &str, x: f64) -> Result<f64> {
        let t = self.shift(group, x)?;
        Ok((x + t).clamp(self.domain.lo, self.domain.hi))
    }

    /// Score after geometric repair with an explicit `λ`.
    pub fn repair_score(&self, group: &str, x: f64, lambda: f64) -> Result<f64> {
        check_lambdas(&[lambda])?;
        let t = self.shift(group, x)?;
        Ok((x + lambda * t).clamp(self.domain.lo, self.domain.hi))
    }

    /// Repairs raw rows with the plan's `λ`s; labels and order are kept.
    pub fn apply_rows(&self, rows: &[ScoredRow]) -> Result<Vec<ScoredRow>> {
        let bary = self.barycenter();
        let width = self.domain.width();
        rows.iter()
            .enumerate()
            .map(|(i, r)| {
                let g = self.group_index(&r.group)?;
                self.check_score(r.score).map_err(|_| Error::ScoreOutOfDomain {
                    row: i,
                    score: r.score,
                    lo: self.domain.lo,
                    hi: self.domain.hi,
                })?;
                let u = self.domain.normalize(r.score);
                let t = (bary.transport(g, u) - u) * width;
                let score = (r.score + self.lambdas[g] * t).clamp(self.domain.lo, self.domain.hi);
                Ok(ScoredRow {
                    score,
                    group: r.group.clone(),
                    label: r.label,
                })
            })
            .collect()
    }

    pub fn apply(&self, ds: &ScoredDataset) -> Result<ScoredDataset> {
        if ds.domain() != self.domain {
            return Err(Error::InvalidArgument(format!(
                "dataset domain [{}, {}] differs from plan domain [{}, {}]",
                ds.domain().lo,
                ds.domain().hi,
                self.domain.lo,
                self.domain.hi
            )));
        }
        let rows = self.apply_rows(ds.rows())?;
        Ok(ds.with_scores(rows.into_iter().map(|r| r.score).collect()))
    }

    /// Fitted distribution of `group` pushed through `u ↦ u + λ t(u)`,
    /// on the normalized scale.
    pub fn repaired_distribution(&self, group: &str, lambda: f64) -> Result<EmpiricalDistribution> {
        check_lambdas(&[lambda])?;
        let g = self.group_index(group)?;
        let bary = self.barycenter();
        self.fitted[g].push_forward(|u| (u + lambda * (bary.transport(g, u) - u)).clamp(0.0, 1.0))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    match lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        Some(l) => Err(Error::InvalidArgument(format!("lambda {l} outside [0, 1]"))),
        None => Ok(()),
    }
}
