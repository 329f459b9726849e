//! Dense tableau simplex for `max cᵀx` subject to `Ax ≤ b`, `x ≥ 0`, `b ≥ 0`.
//!
//! Rows and columns can be added after a solve. New columns keep the basis
//! primal feasible and are handled by primal pivots; new rows keep it dual
//! feasible and are handled by dual pivots. Every row owns a slack column, so
//! the slack block of the tableau is always `B⁻¹`.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-9;
const OPT_EPS: f64 = 1e-10;
const DUAL_EPS: f64 = 1e-7;
const HARRIS_TOL: f64 = 1e-11;
/// Rounding below this is snapped back to feasibility after each pivot.
const CLAMP_TOL: f64 = 1e-9;
/// Degenerate pivots tolerated under Dantzig's rule before switching to Bland's.
const STALL_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotRule {
    /// Smallest-index entering and leaving variables; never cycles.
    Bland,
    /// Largest reduced cost, falling back to Bland's rule while stalled.
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    PivotLimit,
}

#[derive(Debug, Clone)]
pub struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    objective: f64,
    basis: Vec<usize>,
    slack_of_row: Vec<usize>,
    /// Column index → row for slacks, `None` for structural columns.
    slack_row: Vec<Option<usize>>,
    /// Original sparse structural columns and row bounds, for refactoring.
    orig_cols: Vec<Vec<(usize, f64)>>,
    orig_b: Vec<f64>,
    pub pivots: usize,
    pub rebuilds: usize,
}

impl Default for Tableau {
    fn default() -> Self {
        Self::new()
    }
}

impl Tableau {
    pub fn new() -> Self {
        Tableau {
            rows: Vec::new(),
            rhs: Vec::new(),
            cost: Vec::new(),
            reduced: Vec::new(),
            objective: 0.0,
            basis: Vec::new(),
            slack_of_row: Vec::new(),
            slack_row: Vec::new(),
            orig_cols: Vec::new(),
            orig_b: Vec::new(),
            pivots: 0,
            rebuilds: 0,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_columns(&self) -> usize {
        self.cost.len()
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Adds a structural column with entries `(row, coefficient)` over the
    /// original rows and objective coefficient `cost`. Returns its index.
    pub fn add_column(&mut self, entries: &[(usize, f64)], cost: f64) -> usize {
        let m = self.rows.len();
        // Tableau column is B⁻¹a, read off the slack block.
        let mut col = vec![0.0; m];
        for &(r, v) in entries {
            let sc = self.slack_of_row[r];
            for (i, row) in self.rows.iter().enumerate() {
                col[i] += row[sc] * v;
            }
        }
        // Duals y_r = −reduced(slack_r).
        let mut red = cost;
        for &(r, v) in entries {
            red += self.reduced[self.slack_of_row[r]] * v;
        }
        for (row, v) in self.rows.iter_mut().zip(col) {
            row.push(v);
        }
        self.cost.push(cost);
        self.reduced.push(red);
        self.slack_row.push(None);
        self.orig_cols.push(entries.to_vec());
        self.cost.len() - 1
    }

    /// Adds the row `Σ coeff·x_col ≤ b` over structural columns. Returns its index.
    pub fn add_row(&mut self, entries: &[(usize, f64)], b: f64) -> Result<usize> {
        if !(b >= 0.0) {
            return Err(Error::invalid(format!("row bound must be nonnegative, got {b}")));
        }
        if entries.iter().any(|&(c, _)| self.slack_row[c].is_some()) {
            return Err(Error::invalid("row entries must reference structural columns"));
        }
        let r = self.rows.len();
        let slack = self.cost.len();
        for row in &mut self.rows {
            row.push(0.0);
        }
        self.cost.push(0.0);
        self.reduced.push(0.0);
        self.slack_row.push(Some(r));
        self.orig_cols.push(Vec::new());
        self.orig_b.push(b);
        let mut new = vec![0.0; slack + 1];
        for &(c, v) in entries {
            new[c] += v;
            self.orig_cols[c].push((r, v));
        }
        new[slack] = 1.0;
        let mut nb = b;
        // Express in the current basis.
        for i in 0..r {
            let k = self.basis[i];
            let f = new[k];
            if f != 0.0 {
                for (x, y) in new.iter_mut().zip(&self.rows[i]) {
                    *x -= f * y;
                }
                new[k] = 0.0;
                nb -= f * self.rhs[i];
            }
        }
        self.rows.push(new);
        self.rhs.push(nb);
        self.basis.push(slack);
        self.slack_of_row.push(slack);
        Ok(r)
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let p = self.rows[r][q];
        let inv = 1.0 / p;
        for v in &mut self.rows[r] {
            *v *= inv;
        }
        self.rhs[r] *= inv;
        self.rows[r][q] = 1.0;
        let prow = std::mem::take(&mut self.rows[r]);
        let prhs = self.rhs[r];
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[q];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(&prow) {
                    *x -= f * y;
                }
                row[q] = 0.0;
                self.rhs[i] -= f * prhs;
                if self.rhs[i].abs() < 1e-13 {
                    self.rhs[i] = 0.0;
                }
            }
        }
        let f = self.reduced[q];
        if f != 0.0 {
            for (x, y) in self.reduced.iter_mut().zip(&prow) {
                *x -= f * y;
            }
            self.reduced[q] = 0.0;
            self.objective += f * prhs;
        }
        self.rows[r] = prow;
        self.basis[r] = q;
        self.pivots += 1;
    }

    /// Restarts from the all-slack basis, which is primal feasible because
    /// every bound is nonnegative. Discards accumulated rounding.
    pub fn rebuild(&mut self) {
        let m = self.rows.len();
        let ncols = self.cost.len();
        let mut rows = vec![vec![0.0; ncols]; m];
        for (c, entries) in self.orig_cols.iter().enumerate() {
            for &(r, v) in entries {
                rows[r][c] += v;
            }
        }
        for (r, &s) in self.slack_of_row.iter().enumerate() {
            rows[r][s] = 1.0;
        }
        self.rows = rows;
        self.rhs = self.orig_b.clone();
        self.reduced = self.cost.clone();
        self.objective = 0.0;
        self.basis = self.slack_of_row.clone();
        self.rebuilds += 1;
    }

    /// Runs dual pivots until the basis is primal feasible, then primal pivots
    /// until it is optimal. The dual phase only enters columns that are dual
    /// feasible, so rows and columns may both be added between solves.
    /// `max_pivots` bounds this call.
    pub fn solve(&mut self, rule: PivotRule, max_pivots: usize) -> Result<SolveStatus> {
        let start = self.pivots;
        let budget_left = |t: &Tableau| t.pivots - start < max_pivots;
        // Dual phase.
        let mut stalled = 0usize;
        loop {
            let use_bland = rule == PivotRule::Bland || stalled >= STALL_LIMIT;
            let infeasible = (0..self.rhs.len()).filter(|&i| self.rhs[i] < -PIVOT_EPS);
            let leaving = if use_bland {
                infeasible.min_by_key(|&i| self.basis[i])
            } else {
                infeasible.min_by(|&i, &j| self.rhs[i].total_cmp(&self.rhs[j]).then(i.cmp(&j)))
            };
            let Some(r) = leaving else { break };
            if !budget_left(self) {
                return Ok(SolveStatus::PivotLimit);
            }
            let Some(q) = self.dual_ratio_test(r, use_bland) else {
                // Every bound is nonnegative, so x = 0 is feasible; this is rounding.
                self.rebuild();
                break;
            };
            let before = self.objective;
            if self.reduced[q] > 0.0 {
                self.reduced[q] = 0.0;
            }
            self.pivot(r, q);
            for d in &mut self.reduced {
                if *d > 0.0 && *d < CLAMP_TOL {
                    *d = 0.0;
                }
            }
            if self.objective >= before - 1e-12 * before.abs().max(1.0) {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        for v in &mut self.rhs {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        // Primal phase.
        stalled = 0;
        loop {
            let use_bland = rule == PivotRule::Bland || stalled >= STALL_LIMIT;
            let entering = if use_bland {
                (0..self.reduced.len()).find(|&j| self.reduced[j] > OPT_EPS)
            } else {
                let mut best: Option<usize> = None;
                for (j, &d) in self.reduced.iter().enumerate() {
                    if d > OPT_EPS && best.is_none_or(|b| d > self.reduced[b]) {
                        best = Some(j);
                    }
                }
                best
            };
            let Some(q) = entering else {
                return Ok(SolveStatus::Optimal);
            };
            if !budget_left(self) {
                return Ok(SolveStatus::PivotLimit);
            }
            let Some((r, ratio)) = self.primal_ratio_test(q, use_bland) else {
                return Err(Error::Numerical {
                    routine: "simplex",
                    detail: format!("objective unbounded along column {q}"),
                });
            };
            let before = self.objective;
            if self.rhs[r] < 0.0 {
                self.rhs[r] = 0.0;
            }
            self.pivot(r, q);
            for v in &mut self.rhs {
                if *v < 0.0 && *v > -CLAMP_TOL {
                    *v = 0.0;
                }
            }
            if ratio <= 1e-12 || self.objective <= before + 1e-12 * before.abs().max(1.0) {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
    }

    /// Leaving row for entering column `q`. Harris two-pass test: among rows
    /// whose ratio is within tolerance of the minimum, take the largest pivot.
    fn primal_ratio_test(&self, q: usize, bland: bool) -> Option<(usize, f64)> {
        let mut bound = f64::INFINITY;
        for (i, row) in self.rows.iter().enumerate() {
            let a = row[q];
            if a > PIVOT_EPS {
                bound = bound.min((self.rhs[i].max(0.0) + HARRIS_TOL) / a);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            let a = row[q];
            if a > PIVOT_EPS && self.rhs[i].max(0.0) / a <= bound {
                let better = match best {
                    None => true,
                    Some((bi, _)) if bland => self.basis[i] < self.basis[bi],
                    Some((bi, _)) => a > self.rows[bi][q],
                };
                if better {
                    best = Some((i, self.rhs[i].max(0.0) / a));
                }
            }
        }
        best
    }

    /// Entering column for leaving row `r`, keeping reduced costs nonpositive.
    fn dual_ratio_test(&self, r: usize, bland: bool) -> Option<usize> {
        let row = &self.rows[r];
        let mut bound = f64::INFINITY;
        for (j, &a) in row.iter().enumerate() {
            // Columns priced in since the last solve are left to the primal phase.
            if a < -PIVOT_EPS && self.reduced[j] <= DUAL_EPS {
                bound = bound.min((-self.reduced[j].min(0.0) + HARRIS_TOL) / -a);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut best: Option<usize> = None;
        for (j, &a) in row.iter().enumerate() {
            if a < -PIVOT_EPS && self.reduced[j] <= DUAL_EPS && -self.reduced[j].min(0.0) / -a <= bound {
                let better = match best {
                    None => true,
                    Some(_) if bland => false,
                    Some(b) => a < row[b],
                };
                if better {
                    best = Some(j);
                }
            }
        }
        best
    }

    /// Current value of every column (structural and slack).
    pub fn values(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.cost.len()];
        for (i, &k) in self.basis.iter().enumerate() {
            x[k] = self.rhs[i].max(0.0);
        }
        x
    }

    pub fn value(&self, col: usize) -> f64 {
        self.basis.iter().position(|&k| k == col).map_or(0.0, |i| self.rhs[i].max(0.0))
    }

    /// Dual value of every row; nonnegative at optimality.
    pub fn duals(&self) -> Vec<f64> {
        self.slack_of_row.iter().map(|&s| -self.reduced[s]).collect()
    }
}
