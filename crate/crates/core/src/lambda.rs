//! Choosing the repair amount `λ` for two groups.
//!
//! The objective is `Σⱼ wⱼ · E_τ |γⱼ,g(τ) − γⱼ,g'(τ)|^p` over the repaired
//! label-conditioned scores, with `τ` uniform on the score domain. It is
//! convex in `λ`, which is what the golden-section solver relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{rates_from_sorted, trapezoid, ThresholdGrid};
use crate::model::{MetricCombo, MetricKind, ScoredDataset};
use crate::ot::{pow_abs, wasserstein_sorted_samples};
use crate::repair::RepairPlan;

pub const DEFAULT_GRID_STEPS: usize = 101;
pub const DEFAULT_TOL: f64 = 1e-6;
/// `|E[t|g] − E[t|g']|` at or below this (normalized units) is treated as zero.
pub const DENOMINATOR_EPS: f64 = 1e-12;

/// How each term's expected gap is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveRoute {
    /// `W_p^p` between repaired conditional samples. Equal to the threshold
    /// integral for `p = 1`.
    #[default]
    Exact,
    /// Trapezoid rule over the threshold grid.
    Grid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaObjective {
    pub combo: MetricCombo,
    pub p: f64,
    pub grid: ThresholdGrid,
    pub route: ObjectiveRoute,
}

impl LambdaObjective {
    pub fn new(combo: MetricCombo, p: f64, grid: ThresholdGrid) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
        }
        Ok(LambdaObjective {
            combo,
            p,
            grid,
            route: ObjectiveRoute::Exact,
        })
    }

    pub fn with_route(mut self, route: ObjectiveRoute) -> Self {
        self.route = route;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Grid,
    Exact,
    Probabilistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSolution {
    #[serde(rename = "lambda")]
    pub lambda_star: f64,
    #[serde(rename = "objective")]
    pub objective_value: f64,
    pub method: SolveMethod,
    pub evaluations: usize,
    #[serde(default)]
    pub clamped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_lambda: Option<f64>,
}

/// One conditional sample, kept sorted by normalized score.
struct GroupSample {
    u: Vec<f64>,
    t: Vec<f64>,
}

impl GroupSample {
    fn repaired(&self, lambda: f64, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.u.iter().zip(&self.t).map(|(u, t)| u + lambda * t));
        // the map is monotone, but rounding can swap neighbours by an ulp
        if buf.windows(2).any(|w| w[0] > w[1]) {
            buf.sort_by(f64::total_cmp);
        }
    }
}

struct Term {
    kind: MetricKind,
    weight: f64,
    groups: [GroupSample; 2],
}

/// Precomputed state for evaluating the objective at many `λ`.
pub struct ObjectiveEvaluator {
    terms: Vec<Term>,
    p: f64,
    route: ObjectiveRoute,
    taus: Vec<f64>,
}

fn check_binary(plan: &RepairPlan, ds: &ScoredDataset) -> Result<()> {
    if ds.num_groups() != 2 {
        return Err(Error::NotBinary(ds.num_groups()));
    }
    if plan.groups() != ds.groups() {
        return Err(Error::InvalidArgument(format!(
            "plan groups {:?} do not match dataset groups {:?}",
            plan.groups(),
            ds.groups()
        )));
    }
    if plan.domain() != ds.domain() {
        return Err(Error::InvalidArgument("plan and dataset domains differ".into()));
    }
    Ok(())
}

/// Normalized scores and shifts of each group's rows under `kind`'s label
/// condition, sorted by score.
fn conditional_samples(plan: &RepairPlan, ds: &ScoredDataset, kind: MetricKind) -> Result<Vec<GroupSample>> {
    let sub = ds.subset_by_label(kind)?;
    let domain = ds.domain();
    sub.group_scores()
        .into_iter()
        .enumerate()
        .map(|(g, scores)| {
            let mut u: Vec<f64> = scores.iter().map(|&x| domain.normalize(x)).collect();
            u.sort_by(f64::total_cmp);
            let t = plan.normalized_shifts(g, &u);
            Ok(GroupSample { u, t })
        })
        .collect()
}

impl ObjectiveEvaluator {
    pub fn new(plan: &RepairPlan, ds: &ScoredDataset, obj: &LambdaObjective) -> Result<Self> {
        check_binary(plan, ds)?;
        if obj.grid.domain() != ds.domain() {
            return Err(Error::InvalidArgument("threshold grid domain differs from dataset".into()));
        }
        let terms = obj
            .combo
            .terms()
            .iter()
            .map(|&(kind, weight)| {
                let mut s = conditional_samples(plan, ds, kind)?.into_iter();
                let groups = [s.next().unwrap(), s.next().unwrap()];
                Ok(Term { kind, weight, groups })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ObjectiveEvaluator {
            terms,
            p: obj.p,
            route: obj.route,
            taus: obj.grid.normalized(),
        })
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let mut total = 0.0;
        for term in &self.terms {
            if term.weight == 0.0 {
                continue;
            }
            term.groups[0].repaired(lambda, &mut a);
            term.groups[1].repaired(lambda, &mut b);
            let gap = match self.route {
                ObjectiveRoute::Exact => wasserstein_sorted_samples(&a, &b, self.p),
                ObjectiveRoute::Grid => {
                    let ra = rates_from_sorted(&a, &self.taus, term.kind.predicted);
                    let rb = rates_from_sorted(&b, &self.taus, term.kind.predicted);
                    let d: Vec<f64> = ra.iter().zip(&rb).map(|(x, y)| pow_abs(x - y, self.p)).collect();
                    let span = self.taus[self.taus.len() - 1] - self.taus[0];
                    trapezoid(&self.taus, &d) / span
                }
            };
            total += term.weight * gap;
        }
        total
    }

    fn eval_checked(&self, lambda: f64, count: &mut usize) -> Result<f64> {
        *count += 1;
        let v = self.eval(lambda);
        if !v.is_finite() {
            return Err(Error::Solver(format!("objective is not finite at λ={lambda}")));
        }
        Ok(v)
    }
}

pub fn objective_eval(plan: &RepairPlan, ds: &ScoredDataset, obj: &LambdaObjective, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0, 1]")));
    }
    let ev = ObjectiveEvaluator::new(plan, ds, obj)?;
    ev.eval_checked(lambda, &mut 0)
}

/// Exhaustive search over `{0, 1/(steps−1), …, 1}`; ties go to the smaller `λ`.
pub fn solve_grid(plan: &RepairPlan, ds: &ScoredDataset, obj: &LambdaObjective, steps: usize) -> Result<LambdaSolution> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("grid needs at least 2 steps, got {steps}")));
    }
    let ev = ObjectiveEvaluator::new(plan, ds, obj)?;
    let mut evaluations = 0;
    let mut best = (0.0, f64::INFINITY);
    for i in 0..steps {
        let lambda = i as f64 / (steps - 1) as f64;
        let v = ev.eval_checked(lambda, &mut evaluations)?;
        if v < best.1 {
            best = (lambda, v);
        }
    }
    Ok(LambdaSolution {
        lambda_star: best.0,
        objective_value: best.1,
        method: SolveMethod::Grid,
        evaluations,
        clamped: false,
        raw_lambda: None,
    })
}

/// Golden-section search on `[0, 1]` down to a bracket of width `tol`.
///
/// Equal values shrink the bracket to the left, so flat minima resolve
/// toward the smallest `λ`. The bracket midpoint is returned unless an
/// endpoint of `[0, 1]` is strictly better.
pub fn solve_exact(plan: &RepairPlan, ds: &ScoredDataset, obj: &LambdaObjective, tol: f64) -> Result<LambdaSolution> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let ev = ObjectiveEvaluator::new(plan, ds, obj)?;
    let mut n = 0;
    let (lambda_star, objective_value) = golden_section(|l| ev.eval_checked(l, &mut n), tol)?;
    Ok(LambdaSolution {
        lambda_star,
        objective_value,
        method: SolveMethod::Exact,
        evaluations: n,
        clamped: false,
        raw_lambda: None,
    })
}

/// Minimizes a convex `f` on `[0, 1]`; returns `(argmin, min)`.
pub fn golden_section(mut f: impl FnMut(f64) -> Result<f64>, tol: f64) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (mid, f(mid)?);
    for end in [0.0, 1.0] {
        let v = f(end)?;
        if v < best.1 {
            best = (end, v);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilisticLambda {
    pub raw: f64,
    pub lambda: f64,
    pub clamped: bool,
}

/// `λ = (E[f|g'] − E[f|g]) / (E[t|g] − E[t|g'])`, clamped to `[0, 1]`.
pub fn probabilistic_lambda(mean_g: f64, mean_h: f64, shift_g: f64, shift_h: f64) -> Result<ProbabilisticLambda> {
    let denominator = shift_g - shift_h;
    if !(denominator.abs() > DENOMINATOR_EPS) {
        return Err(Error::ZeroDenominator { denominator });
    }
    let raw = (mean_h - mean_g) / denominator;
    let lambda = raw.clamp(0.0, 1.0);
    Ok(ProbabilisticLambda {
        raw,
        lambda,
        clamped: lambda != raw,
    })
}

/// Per-group `(E[u|condition, g], E[t|condition, g])` on the normalized scale.
pub fn conditional_mean_shifts(plan: &RepairPlan, ds: &ScoredDataset, kind: MetricKind) -> Result<Vec<(f64, f64)>> {
    if plan.domain() != ds.domain() || plan.groups() != ds.groups() {
        return Err(Error::InvalidArgument("plan does not match dataset groups or domain".into()));
    }
    Ok(conditional_samples(plan, ds, kind)?
        .iter()
        .map(|s| {
            let n = s.u.len() as f64;
            (s.u.iter().sum::<f64>() / n, s.t.iter().sum::<f64>() / n)
        })
        .collect())
}

/// Closed-form `λ` that zeroes the gap in conditional mean scores.
///
/// The reported objective is the `p = 1` distributional objective for `kind`
/// evaluated at the returned `λ`.
pub fn solve_probabilistic(plan: &RepairPlan, ds: &ScoredDataset, kind: MetricKind) -> Result<LambdaSolution> {
    check_binary(plan, ds)?;
    let ms = conditional_mean_shifts(plan, ds, kind)?;
    let pl = probabilistic_lambda(ms[0].0, ms[1].0, ms[0].1, ms[1].1)?;
    let obj = LambdaObjective::new(
        MetricCombo::single(kind),
        1.0,
        ThresholdGrid::uniform(ds.domain(), crate::metrics::DEFAULT_GRID_POINTS)?,
    )?;
    let ev = ObjectiveEvaluator::new(plan, ds, &obj)?;
    let mut evaluations = 0;
    let objective_value = ev.eval_checked(pl.lambda, &mut evaluations)?;
    Ok(LambdaSolution {
        lambda_star: pl.lambda,
        objective_value,
        method: SolveMethod::Probabilistic,
        evaluations,
        clamped: pl.clamped,
        raw_lambda: Some(pl.raw),
    })
}
