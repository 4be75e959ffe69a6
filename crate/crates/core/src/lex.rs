//! Per-group repair amounts for many groups: max-min and lexicographic fairness.
//!
//! Group `g` repaired by `λ_g` has conditional mean score
//! `m_g(λ_g) = a_g + λ_g b_g`, where `a_g` is the unrepaired mean and `b_g`
//! the mean shift toward the barycenter. Its loss is
//! `L_g = Σ_{j≠g} |m_g − m_j|`. Because every `m_g` is affine, each round is
//! an exact linear program.
//!
//! Round `k` minimizes the sum of the `k` largest losses, subject to every
//! subset of `j < k` groups keeping its summed loss within `ε_j + α`, where
//! `ε_j` is the value reached in round `j`. Round 1 alone is max-min
//! fairness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lambda::conditional_mean_shifts;
use crate::lp::{LinearProgram, Relation};
use crate::metrics::pairwise_abs_losses;
use crate::model::{MetricKind, ScoredDataset};
use crate::repair::RepairPlan;

pub const DEFAULT_ALPHA: f64 = 1e-4;
pub const DEFAULT_EPS_STAB: f64 = 1e-6;
pub const MAX_LEX_GROUPS: usize = 12;

#[derive(Debug, Clone)]
pub struct LexProblem {
    plan: RepairPlan,
    kind: MetricKind,
    /// Unrepaired conditional means, normalized scale.
    a: Vec<f64>,
    /// Conditional mean shifts at full repair, normalized scale.
    b: Vec<f64>,
    /// Slack on inherited bounds, normalized scale.
    pub alpha: f64,
    /// Weight of `Σλ` in every round's objective; prefers the smallest repair
    /// among equally fair solutions.
    pub eps_stab: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    /// Groups by decreasing loss at the start of the round, ties by name.
    pub ordering: Vec<String>,
    pub lp_objective: f64,
    pub epsilon: f64,
    pub lambdas: Vec<f64>,
    pub pivots: usize,
}

/// Losses and bounds are in original score units.
#[derive(Debug, Clone, PartialEq)]
pub struct LexSolution {
    pub groups: Vec<String>,
    pub lambdas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub losses: Vec<f64>,
    pub rounds: Vec<RoundTrace>,
}

#[derive(Serialize)]
struct SolutionFile<'a> {
    lambdas: std::collections::BTreeMap<&'a str, f64>,
    epsilons: &'a [f64],
    losses: std::collections::BTreeMap<&'a str, f64>,
    rounds: &'a [RoundTrace],
}

impl Serialize for LexSolution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let names = self.groups.iter().map(String::as_str);
        SolutionFile {
            lambdas: names.clone().zip(self.lambdas.iter().copied()).collect(),
            epsilons: &self.epsilons,
            losses: names.zip(self.losses.iter().copied()).collect(),
            rounds: &self.rounds,
        }
        .serialize(s)
    }
}

impl LexSolution {
    /// Losses sorted in decreasing order.
    pub fn sorted_losses(&self) -> Vec<f64> {
        sorted_desc(&self.losses)
    }
}

pub fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Sum of the `k` largest entries.
pub fn top_k_sum(v: &[f64], k: usize) -> f64 {
    sorted_desc(v).iter().take(k).sum()
}

/// Computes `(a_g, b_g)` for every group from labeled data.
pub fn build_problem(plan: &RepairPlan, ds: &ScoredDataset, kind: MetricKind) -> Result<LexProblem> {
    if ds.num_groups() < 2 {
        return Err(Error::TooFewGroups {
            needed: 2,
            found: ds.num_groups(),
        });
    }
    let ms = conditional_mean_shifts(plan, ds, kind)?;
    LexProblem::new(plan.clone(), kind, ms.iter().map(|m| m.0).collect(), ms.iter().map(|m| m.1).collect())
}

impl LexProblem {
    /// Builds a problem from normalized means `a` and shifts `b`.
    pub fn new(plan: RepairPlan, kind: MetricKind, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let n = plan.groups().len();
        if a.len() != n || b.len() != n {
            return Err(Error::InvalidArgument("one mean and one shift per group required".into()));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("conditional means must be finite".into()));
        }
        Ok(LexProblem {
            plan,
            kind,
            a,
            b,
            alpha: DEFAULT_ALPHA,
            eps_stab: DEFAULT_EPS_STAB,
        })
    }

    pub fn plan(&self) -> &RepairPlan {
        &self.plan
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn groups(&self) -> &[String] {
        self.plan.groups()
    }

    pub fn num_groups(&self) -> usize {
        self.a.len()
    }

    pub fn base_means(&self) -> &[f64] {
        &self.a
    }

    pub fn mean_shifts(&self) -> &[f64] {
        &self.b
    }

    fn scale(&self) -> f64 {
        self.plan.domain().width()
    }

    /// Predicted conditional means in original units.
    pub fn predicted_means(&self, lambdas: &[f64]) -> Vec<f64> {
        let d = self.plan.domain();
        self.normalized_means(lambdas).into_iter().map(|m| d.denormalize(m)).collect()
    }

    fn normalized_means(&self, lambdas: &[f64]) -> Vec<f64> {
        self.a.iter().zip(&self.b).zip(lambdas).map(|((a, b), l)| a + l * b).collect()
    }

    fn normalized_losses(&self, lambdas: &[f64]) -> Vec<f64> {
        pairwise_abs_losses(&self.normalized_means(lambdas))
    }

    /// `L_g(λ⃗)` in original units.
    pub fn losses(&self, lambdas: &[f64]) -> Vec<f64> {
        let s = self.scale();
        self.normalized_losses(lambdas).into_iter().map(|l| l * s).collect()
    }

    fn ordering(&self, losses: &[f64]) -> Vec<String> {
        let mut idx: Vec<usize> = (0..losses.len()).collect();
        // groups are already sorted by name, so a stable sort breaks ties by name
        idx.sort_by(|&i, &j| losses[j].total_cmp(&losses[i]));
        idx.into_iter().map(|i| self.groups()[i].clone()).collect()
    }

    /// Round `k` LP given normalized bounds `eps[j-1]` for `j < k`.
    fn round(&self, k: usize, eps: &[f64]) -> Result<(Vec<f64>, f64, usize)> {
        let n = self.num_groups();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|g| (g + 1..n).map(move |h| (g, h))).collect();
        // variables: λ (n) | u per pair | t | z (n)
        let u0 = n;
        let t = u0 + pairs.len();
        let z0 = t + 1;
        let mut lp = LinearProgram::new(z0 + n);

        let mut c = vec![0.0; z0 + n];
        c[..n].iter_mut().for_each(|v| *v = self.eps_stab);
        c[t] = k as f64;
        c[z0..].iter_mut().for_each(|v| *v = 1.0);
        lp.set_objective(c);

        for g in 0..n {
            lp.add_sparse(&[(g, 1.0)], Relation::Le, 1.0);
        }
        for (p, &(g, h)) in pairs.iter().enumerate() {
            let (bg, bh) = (self.b[g], self.b[h]);
            let d = self.a[g] - self.a[h];
            lp.add_sparse(&[(u0 + p, 1.0), (g, -bg), (h, bh)], Relation::Ge, d);
            lp.add_sparse(&[(u0 + p, 1.0), (g, bg), (h, -bh)], Relation::Ge, -d);
        }
        let loss_terms = |g: usize, coef: f64| -> Vec<(usize, f64)> {
            pairs
                .iter()
                .enumerate()
                .filter(|(_, &(x, y))| x == g || y == g)
                .map(|(p, _)| (u0 + p, coef))
                .collect()
        };
        for g in 0..n {
            let mut terms = loss_terms(g, -1.0);
            terms.push((z0 + g, 1.0));
            terms.push((t, 1.0));
            lp.add_sparse(&terms, Relation::Ge, 0.0);
        }
        for mask in 1u32..(1u32 << n) {
            let j = mask.count_ones() as usize;
            if j >= k {
                continue;
            }
            let terms: Vec<(usize, f64)> = (0..n)
                .filter(|g| mask & (1 << g) != 0)
                .flat_map(|g| loss_terms(g, 1.0))
                .collect();
            lp.add_sparse(&terms, Relation::Le, eps[j - 1] + self.alpha);
        }

        let sol = lp.solve()?;
        let lambdas: Vec<f64> = sol.x[..n].iter().map(|l| l.clamp(0.0, 1.0)).collect();
        let lp_obj = sol.objective - self.eps_stab * lambdas.iter().sum::<f64>();
        Ok((lambdas, lp_obj, sol.pivots))
    }

    fn run(&self, rounds: usize) -> Result<LexSolution> {
        let n = self.num_groups();
        if n > MAX_LEX_GROUPS {
            return Err(Error::InvalidArgument(format!(
                "lexicographic solver supports at most {MAX_LEX_GROUPS} groups, got {n}"
            )));
        }
        let scale = self.scale();
        let mut lambdas = vec![0.0; n];
        let mut eps: Vec<f64> = Vec::with_capacity(rounds);
        let mut trace = Vec::with_capacity(rounds);

        if self.b.iter().all(|b| *b == 0.0) {
            let losses = self.normalized_losses(&lambdas);
            eps = (1..=rounds).map(|k| top_k_sum(&losses, k)).collect();
        } else {
            for k in 1..=rounds {
                let ordering = self.ordering(&self.normalized_losses(&lambdas));
                let (next, lp_obj, pivots) = self.round(k, &eps)?;
                lambdas = next;
                let e = top_k_sum(&self.normalized_losses(&lambdas), k);
                eps.push(e);
                trace.push(RoundTrace {
                    round: k,
                    ordering,
                    lp_objective: lp_obj * scale,
                    epsilon: e * scale,
                    lambdas: lambdas.clone(),
                    pivots,
                });
            }
        }
        Ok(LexSolution {
            groups: self.groups().to_vec(),
            losses: self.losses(&lambdas),
            lambdas,
            epsilons: eps.into_iter().map(|e| e * scale).collect(),
            rounds: trace,
        })
    }
}

/// Minimizes the largest group loss (a single round).
pub fn solve_maxmin(prob: &LexProblem) -> Result<LexSolution> {
    prob.run(1)
}

/// Runs all `n` rounds.
pub fn solve_lexicographic(prob: &LexProblem) -> Result<LexSolution> {
    prob.run(prob.num_groups())
}
