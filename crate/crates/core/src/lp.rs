//! Small dense linear programs: two-phase tableau simplex with Bland's rule.
//!
//! Problems have the form `min cᵀx` subject to row constraints and `x ≥ 0`.
//! Sizes here are a few hundred rows at most, so a dense tableau is fine and
//! Bland's rule keeps degenerate problems from cycling.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn set_objective(&mut self, c: Vec<f64>) {
        assert_eq!(c.len(), self.num_vars, "objective length");
        self.objective = c;
    }

    pub fn add(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.num_vars, "constraint length");
        self.rows.push((coeffs, rel, rhs));
    }

    /// Adds `Σ coef·x_var (rel) rhs` from sparse `(var, coef)` pairs.
    pub fn add_sparse(&mut self, terms: &[(usize, f64)], rel: Relation, rhs: f64) {
        let mut coeffs = vec![0.0; self.num_vars];
        for &(v, c) in terms {
            coeffs[v] += c;
        }
        self.add(coeffs, rel, rhs);
    }

    pub fn solve(&self) -> Result<LpSolution> {
        Tableau::build(self).solve(&self.objective, self.num_vars)
    }
}

struct Tableau {
    /// `m` rows of `width` coefficients followed by the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
    first_artificial: usize,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars;
        let rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .rows
            .iter()
            .map(|(a, rel, b)| {
                if *b < 0.0 {
                    let flipped = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (a.iter().map(|v| -v).collect(), flipped, -b)
                } else {
                    (a.clone(), *rel, *b)
                }
            })
            .collect();
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let first_artificial = n + n_slack;
        let width = first_artificial + n_art;

        let mut t = Vec::with_capacity(rows.len());
        let mut basis = Vec::with_capacity(rows.len());
        let (mut s, mut a) = (n, first_artificial);
        for (coeffs, rel, rhs) in rows {
            let mut row = vec![0.0; width + 1];
            row[..n].copy_from_slice(&coeffs);
            row[width] = rhs;
            match rel {
                Relation::Le => {
                    row[s] = 1.0;
                    basis.push(s);
                    s += 1;
                }
                Relation::Ge => {
                    row[s] = -1.0;
                    s += 1;
                    row[a] = 1.0;
                    basis.push(a);
                    a += 1;
                }
                Relation::Eq => {
                    row[a] = 1.0;
                    basis.push(a);
                    a += 1;
                }
            }
            t.push(row);
        }
        Tableau {
            t,
            basis,
            width,
            first_artificial,
            pivots: 0,
        }
    }

    /// Reduced-cost row for `cost`, with `-objective` in the last slot.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.width + 1];
        d[..cost.len()].copy_from_slice(cost);
        for (row, &b) in self.t.iter().zip(&self.basis) {
            let cb = if b < cost.len() { cost[b] } else { 0.0 };
            if cb != 0.0 {
                for (dj, rj) in d.iter_mut().zip(row) {
                    *dj -= cb * rj;
                }
            }
        }
        d
    }

    fn pivot(&mut self, d: &mut [f64], r: usize, c: usize) {
        let inv = 1.0 / self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v *= inv;
        }
        self.t[r][c] = 1.0;
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                row[c] = 0.0;
            }
        }
        let f = d[c];
        if f != 0.0 {
            for (v, p) in d.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            d[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Runs simplex iterations over columns `< allowed`.
    fn optimize(&mut self, d: &mut [f64], allowed: usize) -> Result<()> {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::Solver("simplex pivot limit reached".into()));
            }
            let Some(c) = (0..allowed).find(|&j| d[j] < -PIVOT_TOL) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[c];
                if a > PIVOT_TOL {
                    let ratio = row[self.width] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                Some((r, _)) => self.pivot(d, r, c),
                None => return Err(Error::Solver("linear program is unbounded".into())),
            }
        }
    }

    fn solve(mut self, cost: &[f64], n: usize) -> Result<LpSolution> {
        if self.first_artificial < self.width {
            let mut phase1 = vec![0.0; self.width];
            phase1[self.first_artificial..].iter_mut().for_each(|c| *c = 1.0);
            let mut d = self.reduced_costs(&phase1);
            self.optimize(&mut d, self.width)?;
            let scale = 1.0 + self.t.iter().map(|r| r[self.width].abs()).fold(0.0, f64::max);
            if -d[self.width] > FEAS_TOL * scale {
                return Err(Error::Solver(format!(
                    "linear program is infeasible (phase-one residual {:e})",
                    -d[self.width]
                )));
            }
            self.drive_out_artificials(&mut d);
        }
        let mut d = self.reduced_costs(cost);
        self.optimize(&mut d, self.first_artificial)?;

        let mut x = vec![0.0; n];
        for (row, &b) in self.t.iter().zip(&self.basis) {
            if b < n {
                x[b] = row[self.width].max(0.0);
            }
        }
        let objective = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            x,
            objective,
            pivots: self.pivots,
        })
    }

    /// Pivots zero-level artificials out of the basis, dropping redundant rows.
    fn drive_out_artificials(&mut self, d: &mut [f64]) {
        let mut i = 0;
        while i < self.t.len() {
            if self.basis[i] >= self.first_artificial {
                let col = (0..self.first_artificial).find(|&j| self.t[i][j].abs() > PIVOT_TOL);
                match col {
                    Some(c) => self.pivot(d, i, c),
                    None => {
                        self.t.remove(i);
                        self.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
}
