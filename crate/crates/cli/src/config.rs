//! Option merging: command-line flags win over the JSON config file, which
//! wins over built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use georepair::lambda::{ObjectiveRoute, DEFAULT_GRID_STEPS, DEFAULT_TOL};
use georepair::metrics::DEFAULT_GRID_POINTS;
use georepair::{Error, MetricCombo, ScoreDomain};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Grid,
    Exact,
    Probabilistic,
    Maxmin,
    Lex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Exact,
    Grid,
}

impl From<Route> for ObjectiveRoute {
    fn from(r: Route) -> Self {
        match r {
            Route::Exact => ObjectiveRoute::Exact,
            Route::Grid => ObjectiveRoute::Grid,
        }
    }
}

/// Every tunable setting. The same struct is filled from flags and from the
/// config file, so keys in the file match the long flag names.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Options {
    /// Input CSV with score,group[,label] columns
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Output file, or directory for evaluate and generate
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Metric or weighted combination, e.g. tpr or tpr:1,fpr:1
    #[arg(long, global = true)]
    pub metric: Option<String>,
    /// Number of threshold grid points
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Order of the disparity (p >= 1)
    #[arg(long, global = true)]
    pub p: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub solver: Option<Solver>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Score domain as lo:hi
    #[arg(long, global = true)]
    pub domain: Option<String>,
    /// Tolerance of the golden-section search
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Fit a fixed repair amount instead of solving for it
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Number of points on the repair-amount grid
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// How the objective integrates over thresholds
    #[arg(long, global = true, value_enum)]
    pub route: Option<Route>,
    /// Repair plan JSON (apply)
    #[arg(long, global = true)]
    pub plan: Option<PathBuf>,
    /// Joint distribution JSON; the bundled four-group spec by default
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Rows to generate
    #[arg(long, global = true)]
    pub rows: Option<usize>,
    /// Fraction of generated rows in the labeled part
    #[arg(long, global = true)]
    pub split: Option<f64>,
}

macro_rules! prefer {
    ($a:ident, $b:ident; $($f:ident),*) => {
        Options { $($f: $a.$f.or($b.$f)),* }
    };
}

impl Options {
    pub fn merged(self, config: Option<&Path>) -> Result<Options> {
        let Some(path) = config else { return Ok(self) };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let file: Options = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))?;
        let flags = self;
        Ok(prefer!(flags, file; input, output, metric, grid, p, solver, seed, domain, tol, lambda, steps, route, plan, spec, rows, split))
    }

    pub fn input(&self) -> Result<&Path> {
        self.input.as_deref().ok_or_else(|| missing("--input"))
    }

    pub fn output(&self) -> Result<&Path> {
        self.output.as_deref().ok_or_else(|| missing("--output"))
    }

    pub fn metric(&self) -> Result<MetricCombo> {
        Ok(self.metric.as_deref().unwrap_or("pr").parse()?)
    }

    pub fn grid(&self) -> usize {
        self.grid.unwrap_or(DEFAULT_GRID_POINTS)
    }

    pub fn p(&self) -> f64 {
        self.p.unwrap_or(1.0)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn domain(&self) -> Result<ScoreDomain> {
        Ok(self.domain.as_deref().unwrap_or("0:1").parse()?)
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(DEFAULT_TOL)
    }

    pub fn steps(&self) -> usize {
        self.steps.unwrap_or(DEFAULT_GRID_STEPS)
    }

    pub fn route(&self) -> ObjectiveRoute {
        self.route.map(Into::into).unwrap_or_default()
    }
}

fn missing(flag: &str) -> anyhow::Error {
    Error::InvalidArgument(format!("{flag} is required")).into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn flags_beat_config_beat_defaults() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"metric": "tpr", "grid": 11, "solver": "lex"}}"#).unwrap();
        let flags = Options {
            grid: Some(21),
            ..Default::default()
        };
        let o = flags.merged(Some(f.path())).unwrap();
        assert_eq!(o.grid(), 21);
        assert_eq!(o.metric.as_deref(), Some("tpr"));
        assert_eq!(o.solver, Some(Solver::Lex));
        assert_eq!(o.p(), 1.0);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"metrc": "tpr"}}"#).unwrap();
        assert!(Options::default().merged(Some(f.path())).is_err());
    }
}
