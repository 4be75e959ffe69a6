use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use georepair::io::{read_dataset, write_curve, write_rows, Columns};
use georepair::lambda::{self, LambdaObjective, ObjectiveEvaluator};
use georepair::lex::{self, MAX_LEX_GROUPS};
use georepair::metrics::{distributional_disparity, rate_curve, ThresholdGrid};
use georepair::repair::RepairPlan;
use georepair::synth::{self, JointSpec};
use georepair::{Error, MetricCombo, MetricKind, ScoredDataset};
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::config::{Options, Solver};

/// Writes through a temp file in the target directory, then renames it.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut File) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    fill(tmp.as_file_mut())?;
    tmp.as_file_mut().flush()?;
    tmp.persist(path).map_err(|e| e.error).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |f| {
        serde_json::to_writer_pretty(&mut *f, value)?;
        writeln!(f)?;
        Ok(())
    })
}

fn load(opts: &Options) -> Result<ScoredDataset> {
    let path = opts.input()?;
    read_dataset(path, opts.domain()?).with_context(|| format!("reading {}", path.display()))
}

fn single_metric(combo: &MetricCombo, solver: &str) -> Result<MetricKind> {
    match combo.as_single() {
        Some(k) => Ok(k),
        None => Err(Error::InvalidArgument(format!("the {solver} solver takes a single metric, got {combo}")).into()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[derive(Serialize)]
struct EvaluateReport {
    input: String,
    rows: usize,
    groups: Vec<String>,
    reports: Vec<georepair::metrics::DisparityReport>,
}

/// One `curve_<metric>.csv` per metric plus `report.json`.
pub fn evaluate(opts: &Options) -> Result<()> {
    let ds = load(opts)?;
    let combo = opts.metric()?;
    let grid = ThresholdGrid::uniform(ds.domain(), opts.grid())?;
    let out = opts.output()?;
    create_dir(out)?;
    let mut reports = Vec::new();
    for &(kind, _) in combo.terms() {
        let curve = rate_curve(&ds, kind, &grid)?;
        write_atomic(&out.join(format!("curve_{}.csv", kind.name())), |f| Ok(write_curve(f, &curve)?))?;
        reports.push(distributional_disparity(&ds, kind, opts.p(), &grid)?);
    }
    write_json(
        &out.join("report.json"),
        &EvaluateReport {
            input: opts.input()?.display().to_string(),
            rows: ds.len(),
            groups: ds.groups().to_vec(),
            reports,
        },
    )
}

#[derive(Serialize)]
struct LambdaSidecar<'a> {
    metric: String,
    p: f64,
    #[serde(flatten)]
    solution: &'a lambda::LambdaSolution,
}

#[derive(Serialize)]
struct LexSidecar<'a> {
    metric: MetricKind,
    solver: &'static str,
    #[serde(flatten)]
    solution: &'a lex::LexSolution,
}

/// `plan.json` → `plan.solution.json`.
pub fn sidecar_path(plan: &Path) -> PathBuf {
    plan.with_extension("solution.json")
}

pub fn fit(opts: &Options) -> Result<()> {
    let ds = load(opts)?;
    let out = opts.output()?;
    let plan = RepairPlan::fit(&ds)?;

    if let Some(l) = opts.lambda {
        if opts.solver.is_some() {
            bail!(Error::InvalidArgument("--lambda and --solver are mutually exclusive".into()));
        }
        let plan = plan.with_uniform_lambda(l)?;
        return write_atomic(out, |f| Ok(f.write_all(plan.to_json()?.as_bytes())?));
    }
    if !ds.is_labeled() {
        bail!(Error::InvalidArgument(
            "labels are required to solve for the repair amount; pass --lambda for a fixed repair".into()
        ));
    }

    let binary = ds.num_groups() == 2;
    let solver = opts.solver.unwrap_or(if binary { Solver::Exact } else { Solver::Lex });
    let combo = opts.metric()?;
    let (plan, sidecar) = match solver {
        Solver::Grid | Solver::Exact | Solver::Probabilistic => {
            if !binary {
                let name = format!("{solver:?}").to_lowercase();
                bail!(Error::InvalidArgument(format!(
                    "{name} solver is binary-only; found {} groups (use --solver maxmin or lex)",
                    ds.num_groups()
                )));
            }
            let sol = match solver {
                Solver::Probabilistic => {
                    let kind = single_metric(&combo, "probabilistic")?;
                    lambda::solve_probabilistic(&plan, &ds, kind).map_err(|e| match e {
                        Error::ZeroDenominator { .. } => anyhow::Error::new(e)
                            .context("both groups move by the same mean amount; use --solver exact or grid instead"),
                        e => e.into(),
                    })?
                }
                _ => {
                    let grid = ThresholdGrid::uniform(ds.domain(), opts.grid())?;
                    let obj = LambdaObjective::new(combo.clone(), opts.p(), grid)?.with_route(opts.route());
                    if solver == Solver::Grid {
                        lambda::solve_grid(&plan, &ds, &obj, opts.steps())?
                    } else {
                        lambda::solve_exact(&plan, &ds, &obj, opts.tol())?
                    }
                }
            };
            let p = if solver == Solver::Probabilistic { 1.0 } else { opts.p() };
            let side = serde_json::to_value(LambdaSidecar {
                metric: combo.to_string(),
                p,
                solution: &sol,
            })?;
            (plan.with_uniform_lambda(sol.lambda_star)?, side)
        }
        Solver::Maxmin | Solver::Lex => {
            let name = if solver == Solver::Lex { "lex" } else { "maxmin" };
            let kind = single_metric(&combo, name)?;
            if ds.num_groups() > MAX_LEX_GROUPS {
                bail!(Error::InvalidArgument(format!(
                    "the {name} solver supports at most {MAX_LEX_GROUPS} groups, found {}",
                    ds.num_groups()
                )));
            }
            let prob = lex::build_problem(&plan, &ds, kind)?;
            let sol = if solver == Solver::Lex {
                lex::solve_lexicographic(&prob)?
            } else {
                lex::solve_maxmin(&prob)?
            };
            let side = serde_json::to_value(LexSidecar {
                metric: kind,
                solver: name,
                solution: &sol,
            })?;
            (plan.with_lambdas(sol.lambdas.clone())?, side)
        }
    };
    write_atomic(out, |f| Ok(f.write_all(plan.to_json()?.as_bytes())?))?;
    write_json(&sidecar_path(out), &sidecar)
}

/// Rewrites the score column in place; every other column and the row order
/// are kept.
pub fn apply(opts: &Options) -> Result<()> {
    let plan_path = opts.plan.as_deref().ok_or_else(|| Error::InvalidArgument("--plan is required".into()))?;
    let text = fs::read_to_string(plan_path).with_context(|| format!("reading plan {}", plan_path.display()))?;
    let plan = RepairPlan::from_json(&text).with_context(|| format!("parsing plan {}", plan_path.display()))?;
    if opts.domain.is_some() && opts.domain()? != plan.domain() {
        let (d, p) = (opts.domain()?, plan.domain());
        bail!(Error::InvalidArgument(format!(
            "domain mismatch: --domain {}:{} but the plan was fit on {}:{}",
            d.lo, d.hi, p.lo, p.hi
        )));
    }

    let input = opts.input()?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(input)
        .with_context(|| format!("reading {}", input.display()))?;
    let header = rdr.headers()?.clone();
    let cols = Columns::locate(&header)?;
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        rows.push(cols.parse(&rec, i)?);
        records.push(rec);
    }
    if rows.is_empty() {
        bail!(Error::NoRows);
    }
    let repaired = plan.apply_rows(&rows)?;

    write_atomic(opts.output()?, |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(&header)?;
        for (rec, row) in records.iter().zip(&repaired) {
            let score = row.score.to_string();
            w.write_record(rec.iter().enumerate().map(|(j, v)| if j == cols.score { score.as_str() } else { v }))?;
        }
        w.flush()?;
        Ok(())
    })
}

/// `lambda,objective,argmin` rows on a uniform grid of repair amounts.
pub fn lambda_sweep(opts: &Options) -> Result<()> {
    let ds = load(opts)?;
    if ds.num_groups() != 2 {
        bail!(Error::NotBinary(ds.num_groups()));
    }
    let steps = opts.steps();
    if steps < 2 {
        bail!(Error::InvalidArgument(format!("--steps must be at least 2, got {steps}")));
    }
    let plan = RepairPlan::fit(&ds)?;
    let grid = ThresholdGrid::uniform(ds.domain(), opts.grid())?;
    let obj = LambdaObjective::new(opts.metric()?, opts.p(), grid)?.with_route(opts.route());
    let ev = ObjectiveEvaluator::new(&plan, &ds, &obj)?;
    let points: Vec<(f64, f64)> = (0..steps)
        .map(|i| {
            let l = i as f64 / (steps - 1) as f64;
            (l, ev.eval(l))
        })
        .collect();
    if let Some((l, _)) = points.iter().find(|(_, v)| !v.is_finite()) {
        bail!(Error::Solver(format!("objective is not finite at lambda {l}")));
    }
    // first minimum on ties
    let best = points
        .iter()
        .enumerate()
        .fold(0, |b, (i, p)| if p.1 < points[b].1 { i } else { b });
    write_atomic(opts.output()?, |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["lambda", "objective", "argmin"])?;
        for (i, (l, v)) in points.iter().enumerate() {
            w.write_record([l.to_string(), v.to_string(), u8::from(i == best).to_string()])?;
        }
        w.flush()?;
        Ok(())
    })
}

#[derive(Serialize)]
struct GenerateMeta {
    #[serde(flatten)]
    sample: synth::SampleMeta,
    spec: String,
    domain: georepair::ScoreDomain,
    split: Option<SplitMeta>,
}

#[derive(Serialize)]
struct SplitMeta {
    fraction: f64,
    seed: u64,
    labeled_rows: usize,
    holdout_rows: usize,
}

/// Seed of the split shuffle, kept apart from the sampling stream.
pub fn split_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Writes `labeled.csv` and `holdout.csv` (or `data.csv` with `--split 0`)
/// plus `meta.json`.
pub fn generate(opts: &Options) -> Result<()> {
    let (spec, spec_name) = match &opts.spec {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading spec {}", path.display()))?;
            (JointSpec::from_json(&text)?, path.display().to_string())
        }
        None => (JointSpec::fico_like(), "bundled:fico_like".to_string()),
    };
    let (rows, seed) = (opts.rows.unwrap_or(8000), opts.seed());
    let fraction = opts.split.unwrap_or(0.5);
    let ds = synth::sample(&spec, rows, seed)?;
    let out = opts.output()?;
    create_dir(out)?;
    let write = |name: &str, part: &ScoredDataset| write_atomic(&out.join(name), |f| Ok(write_rows(f, part.rows())?));
    let split = if fraction == 0.0 {
        write("data.csv", &ds)?;
        None
    } else {
        let s = split_seed(seed);
        let (labeled, holdout) = synth::split(&ds, fraction, s)?;
        write("labeled.csv", &labeled)?;
        write("holdout.csv", &holdout)?;
        Some(SplitMeta {
            fraction,
            seed: s,
            labeled_rows: labeled.len(),
            holdout_rows: holdout.len(),
        })
    };
    write_json(
        &out.join("meta.json"),
        &GenerateMeta {
            sample: synth::sample_meta(rows, seed),
            spec: spec_name,
            domain: spec.domain,
            split,
        },
    )
}
