//! Dense two-phase tableau simplex for small linear programs
//!
//! ```text
//! minimize c.x  subject to  G x <= h,  E x = e,  lo <= x <= hi
//! ```
//!
//! plus a row-generation driver for programs with many inequality rows of
//! which only a few bind.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-10;
const PHASE1_TOL: f64 = 1e-8;
const HARRIS_TOL: f64 = 1e-9;
/// Pivots below this fraction of the column maximum trigger the two-pass test.
const SMALL_PIVOT: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex numerical failure after {pivots} pivots: {reason}")]
    NumericalFailure { pivots: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }

    /// `a.x - b`.
    pub fn excess(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x) - self.rhs
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lower: f64,
    pub upper: f64,
}

impl Bound {
    pub const FREE: Bound = Bound { lower: f64::NEG_INFINITY, upper: f64::INFINITY };

    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn nonneg() -> Self {
        Self { lower: 0.0, upper: f64::INFINITY }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// Rows `a.x <= b`.
    pub inequalities: Vec<Constraint>,
    pub equalities: Vec<Constraint>,
    /// Per-variable bounds; an empty vector means every variable is free.
    pub bounds: Vec<Bound>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    /// Dual objective rebuilt from the final basis; bounded above by the
    /// primal objective when the duals are feasible.
    pub dual_objective: f64,
    /// Largest negative reduced cost `c - A^T y` over real columns.
    pub dual_infeasibility: f64,
    /// Largest primal violation of the returned `x`, by direct substitution.
    pub primal_residual: f64,
    pub pivots: usize,
}

impl LpSolution {
    fn non_optimal(status: LpStatus, n: usize, pivots: usize) -> Self {
        let objective_value = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        Self {
            status,
            x: vec![f64::NAN; n],
            objective_value,
            dual_objective: f64::NAN,
            dual_infeasibility: f64::NAN,
            primal_residual: f64::NAN,
            pivots,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn bound(&self, j: usize) -> Bound {
        self.bounds.get(j).copied().unwrap_or(Bound::FREE)
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if !self.bounds.is_empty() && self.bounds.len() != n {
            return Err(LpError::Malformed(format!("{} bounds for {n} variables", self.bounds.len())));
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Malformed("non-finite objective coefficient".into()));
        }
        for (kind, rows) in [("inequality", &self.inequalities), ("equality", &self.equalities)] {
            for (r, row) in rows.iter().enumerate() {
                if row.coeffs.len() != n {
                    return Err(LpError::Malformed(format!(
                        "{kind} row {r} has {} coefficients, expected {n}",
                        row.coeffs.len()
                    )));
                }
                if !row.rhs.is_finite() || row.coeffs.iter().any(|v| !v.is_finite()) {
                    return Err(LpError::Malformed(format!("{kind} row {r} is not finite")));
                }
            }
        }
        for (j, b) in self.bounds.iter().enumerate() {
            if b.lower.is_nan() || b.upper.is_nan() || b.lower == f64::INFINITY || b.upper == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("bad bound on variable {j}")));
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.inequalities {
            worst = worst.max(row.excess(x));
        }
        for row in &self.equalities {
            worst = worst.max(row.excess(x).abs());
        }
        for (j, &v) in x.iter().enumerate() {
            let b = self.bound(j);
            worst = worst.max(b.lower - v).max(v - b.upper);
        }
        worst
    }

    /// `||rhs||_inf` over rows and finite bounds.
    pub fn rhs_scale(&self) -> f64 {
        let rows = self.inequalities.iter().chain(&self.equalities).map(|r| r.rhs.abs());
        let bounds = self
            .bounds
            .iter()
            .flat_map(|b| [b.lower, b.upper])
            .filter(|v| v.is_finite())
            .map(f64::abs);
        rows.chain(bounds).fold(0.0, f64::max)
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        solve(self)
    }
}

/// How an original variable is written in the nonnegative standard form:
/// `x_j = offset + sum(sign * x'_col)`.
#[derive(Clone, Debug)]
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

/// `min c.x'  s.t.  A x' = b,  x' >= 0,  b >= 0`.
struct StandardForm {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    /// Columns that are artificial and may never enter in phase 2.
    artificial: Vec<bool>,
    /// Column that starts as the identity column of each row.
    unit_col: Vec<usize>,
    vars: Vec<VarMap>,
    objective_offset: f64,
}

fn standard_form(lp: &LinearProgram) -> StandardForm {
    let n = lp.num_vars();
    let mut vars = Vec::with_capacity(n);
    let mut structural = 0;
    // (structural column, upper limit) rows from two-sided bounds
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let b = lp.bound(j);
        let map = match (b.lower.is_finite(), b.upper.is_finite()) {
            (true, hi) => {
                let col = structural;
                structural += 1;
                if hi {
                    bound_rows.push((col, b.upper - b.lower));
                }
                VarMap { offset: b.lower, cols: vec![(col, 1.0)] }
            }
            (false, true) => {
                let col = structural;
                structural += 1;
                VarMap { offset: b.upper, cols: vec![(col, -1.0)] }
            }
            (false, false) => {
                let col = structural;
                structural += 2;
                VarMap { offset: 0.0, cols: vec![(col, 1.0), (col + 1, -1.0)] }
            }
        };
        vars.push(map);
    }

    let expand = |row: &Constraint| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; structural];
        let mut rhs = row.rhs;
        for (j, &a) in row.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            rhs -= a * vars[j].offset;
            for &(col, sign) in &vars[j].cols {
                out[col] += a * sign;
            }
        }
        (out, rhs)
    };

    // (coefficients, rhs, is_inequality)
    let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    for row in &lp.inequalities {
        let (a, b) = expand(row);
        rows.push((a, b, true));
    }
    for &(col, limit) in &bound_rows {
        let mut a = vec![0.0; structural];
        a[col] = 1.0;
        rows.push((a, limit, true));
    }
    for row in &lp.equalities {
        let (a, b) = expand(row);
        rows.push((a, b, false));
    }

    let m = rows.len();
    let slack_count = rows.iter().filter(|r| r.2).count();
    let needs_artificial: Vec<bool> = rows.iter().map(|(_, b, ineq)| !*ineq || *b < 0.0).collect();
    let art_count = needs_artificial.iter().filter(|&&v| v).count();
    let ncol = structural + slack_count + art_count;

    let mut a = vec![vec![0.0; ncol]; m];
    let mut b = vec![0.0; m];
    let mut artificial = vec![false; ncol];
    let mut unit_col = vec![0; m];
    let mut next_slack = structural;
    let mut next_art = structural + slack_count;
    for (i, (coeffs, rhs, ineq)) in rows.into_iter().enumerate() {
        a[i][..structural].copy_from_slice(&coeffs);
        b[i] = rhs;
        if ineq {
            a[i][next_slack] = 1.0;
            unit_col[i] = next_slack;
            next_slack += 1;
        }
        if b[i] < 0.0 {
            for v in a[i].iter_mut() {
                *v = -*v;
            }
            b[i] = -b[i];
        }
        if needs_artificial[i] {
            a[i][next_art] = 1.0;
            artificial[next_art] = true;
            unit_col[i] = next_art;
            next_art += 1;
        }
    }

    let mut c = vec![0.0; ncol];
    let mut objective_offset = 0.0;
    for (j, &cj) in lp.objective.iter().enumerate() {
        objective_offset += cj * vars[j].offset;
        for &(col, sign) in &vars[j].cols {
            c[col] += cj * sign;
        }
    }
    StandardForm { a, b, c, artificial, unit_col, vars, objective_offset }
}

enum RunOutcome {
    Optimal,
    Unbounded,
}

struct Tableau {
    w: usize,
    rows: Vec<Vec<f64>>,
    /// Reduced costs; the last entry holds minus the objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
    max_pivots: usize,
    bland_after: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.rows[r][self.w - 1]
    }

    fn set_costs(&mut self, c: &[f64]) {
        self.obj.iter_mut().for_each(|v| *v = 0.0);
        self.obj[..c.len()].copy_from_slice(c);
        for r in 0..self.rows.len() {
            let cb = c[self.basis[r]];
            if cb != 0.0 {
                for (o, &v) in self.obj.iter_mut().zip(&self.rows[r]) {
                    *o -= cb * v;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let pv = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= pv;
        }
        self.rows[r][j] = 1.0;
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, &p) in row.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                row[j] = 0.0;
            }
        }
        let f = self.obj[j];
        if f != 0.0 {
            for (v, &p) in self.obj.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            self.obj[j] = 0.0;
        }
        self.basis[r] = j;
        self.pivots += 1;
    }

    /// Two-pass ratio test: bound the step with rows relaxed by a small
    /// feasibility tolerance, then take the largest pivot within the bound.
    fn harris_row(&self, j: usize) -> Option<(usize, f64, f64)> {
        let mut bound = f64::INFINITY;
        for r in 0..self.rows.len() {
            let a = self.rows[r][j];
            if a > PIVOT_TOL {
                let rhs = self.rhs(r).max(0.0);
                bound = bound.min((rhs + HARRIS_TOL * (1.0 + rhs)) / a);
            }
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for r in 0..self.rows.len() {
            let a = self.rows[r][j];
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = self.rhs(r).max(0.0) / a;
            if ratio <= bound && best.is_none_or(|(_, _, ba)| a > ba) {
                best = Some((r, ratio, a));
            }
        }
        best
    }

    fn run(&mut self, allowed: &[bool]) -> Result<RunOutcome, LpError> {
        let ncol = self.w - 1;
        loop {
            if self.pivots >= self.max_pivots {
                return Err(LpError::NumericalFailure {
                    pivots: self.pivots,
                    reason: "pivot limit reached (cycling or ill-conditioning)".into(),
                });
            }
            let bland = self.pivots >= self.bland_after;
            let mut enter = None;
            let mut best = -OPT_TOL;
            for j in 0..ncol {
                if !allowed[j] || self.obj[j] >= best {
                    continue;
                }
                enter = Some(j);
                if bland {
                    break;
                }
                best = self.obj[j];
            }
            let Some(j) = enter else { return Ok(RunOutcome::Optimal) };

            let mut leave: Option<(usize, f64, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][j];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                let better = match leave {
                    None => true,
                    Some((lr, lratio, la)) => {
                        let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                        if tie {
                            if bland {
                                self.basis[r] < self.basis[lr]
                            } else {
                                a > la
                            }
                        } else {
                            ratio < lratio
                        }
                    }
                };
                if better {
                    leave = Some((r, ratio, a));
                }
            }
            let col_max = (0..self.rows.len()).map(|r| self.rows[r][j]).fold(0.0, f64::max);
            if let Some((_, _, la)) = leave {
                if la < SMALL_PIVOT * col_max {
                    leave = self.harris_row(j).or(leave);
                }
            }
            let Some((r, _, _)) = leave else { return Ok(RunOutcome::Unbounded) };
            self.pivot(r, j);
        }
    }
}

/// Solves `B x_B = b` by Gaussian elimination with partial pivoting.
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for k in 0..n {
        let p = (k..n).max_by(|&a, &b| m[a][k].abs().total_cmp(&m[b][k].abs()))?;
        if m[p][k].abs() < 1e-14 {
            return None;
        }
        m.swap(k, p);
        rhs.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            if f != 0.0 {
                for c in k..n {
                    m[i][c] -= f * m[k][c];
                }
                rhs[i] -= f * rhs[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| m[k][c] * x[c]).sum();
        x[k] = (rhs[k] - s) / m[k][k];
    }
    Some(x)
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_vars();
    let sf = standard_form(lp);
    let m = sf.b.len();
    let ncol = sf.c.len();
    let w = ncol + 1;

    let rows: Vec<Vec<f64>> = sf
        .a
        .iter()
        .zip(&sf.b)
        .map(|(a, &b)| {
            let mut row = Vec::with_capacity(w);
            row.extend_from_slice(a);
            row.push(b);
            row
        })
        .collect();
    let size = m + ncol;
    let mut tab = Tableau {
        w,
        rows,
        obj: vec![0.0; w],
        basis: sf.unit_col.clone(),
        pivots: 0,
        max_pivots: 20_000 + 50 * size,
        bland_after: 5 * size + 50,
    };
    // original row index of each tableau row, so deleted rows can be tracked
    let mut row_ids: Vec<usize> = (0..m).collect();

    if sf.artificial.iter().any(|&a| a) {
        let phase1: Vec<f64> = sf.artificial.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
        tab.set_costs(&phase1);
        let allowed = vec![true; ncol];
        tab.run(&allowed)?;
        let infeasibility = -tab.obj[ncol];
        let scale = 1.0 + sf.b.iter().fold(0.0f64, |a, &b| a.max(b));
        if infeasibility > PHASE1_TOL * scale {
            return Ok(LpSolution::non_optimal(LpStatus::Infeasible, n, tab.pivots));
        }
        // drive artificials out of the basis; drop rows that are redundant
        let mut r = 0;
        while r < tab.rows.len() {
            if sf.artificial[tab.basis[r]] {
                let col = (0..ncol)
                    .filter(|&j| !sf.artificial[j])
                    .max_by(|&a, &b| tab.rows[r][a].abs().total_cmp(&tab.rows[r][b].abs()))
                    .filter(|&j| tab.rows[r][j].abs() > PIVOT_TOL);
                match col {
                    Some(j) => tab.pivot(r, j),
                    None => {
                        tab.rows.remove(r);
                        tab.basis.remove(r);
                        row_ids.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    tab.set_costs(&sf.c);
    let allowed: Vec<bool> = sf.artificial.iter().map(|&a| !a).collect();
    if let RunOutcome::Unbounded = tab.run(&allowed)? {
        return Ok(LpSolution::non_optimal(LpStatus::Unbounded, n, tab.pivots));
    }

    // primal values, refined from the original data when the tableau drifted
    let mut xs = vec![0.0; ncol];
    for (r, &j) in tab.basis.iter().enumerate() {
        xs[j] = tab.rhs(r).max(0.0);
    }
    let residual = |xs: &[f64]| {
        sf.a.iter().zip(&sf.b).map(|(a, &b)| (dot(a, xs) - b).abs()).fold(0.0, f64::max)
    };
    let b_scale = 1.0 + sf.b.iter().fold(0.0f64, |a, &b| a.max(b));
    if residual(&xs) > 1e-12 * b_scale {
        let bmat: Vec<Vec<f64>> = row_ids
            .iter()
            .map(|&i| tab.basis.iter().map(|&j| sf.a[i][j]).collect())
            .collect();
        let brhs: Vec<f64> = row_ids.iter().map(|&i| sf.b[i]).collect();
        if let Some(xb) = solve_dense(bmat, brhs) {
            let mut refined = vec![0.0; ncol];
            for (&j, &v) in tab.basis.iter().zip(&xb) {
                refined[j] = v.max(0.0);
            }
            if residual(&refined) < residual(&xs) {
                xs = refined;
            }
        }
    }

    let x: Vec<f64> = sf
        .vars
        .iter()
        .map(|v| v.offset + v.cols.iter().map(|&(c, s)| s * xs[c]).sum::<f64>())
        .collect();
    let objective_value = dot(&lp.objective, &x);

    // duals y_i = -d(unit column of row i); deleted rows get zero
    let mut y = vec![0.0; m];
    for &i in &row_ids {
        y[i] = -tab.obj[sf.unit_col[i]];
    }
    let dual_objective = dot(&y, &sf.b) + sf.objective_offset;
    let mut dual_infeasibility: f64 = 0.0;
    for j in (0..ncol).filter(|&j| !sf.artificial[j]) {
        let d = sf.c[j] - (0..m).map(|i| y[i] * sf.a[i][j]).sum::<f64>();
        dual_infeasibility = dual_infeasibility.max(-d);
    }

    let primal_residual = lp.max_violation(&x);
    let tol = 1e-9 * (1.0 + lp.rhs_scale());
    if primal_residual > tol {
        return Err(LpError::NumericalFailure {
            pivots: tab.pivots,
            reason: format!("returned point violates a row by {primal_residual:e} (tolerance {tol:e})"),
        });
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective_value,
        dual_objective,
        dual_infeasibility,
        primal_residual,
        pivots: tab.pivots,
    })
}

/// A large family of `<=` rows that are added to a base program on demand.
pub trait RowSource: Sync {
    fn row(&self, idx: usize) -> Constraint;

    /// Rows with `a.x - b > tol`, paired with that excess.
    fn violated(&self, x: &[f64], tol: f64) -> Vec<(usize, f64)>;
}

#[derive(Clone, Debug)]
pub struct LazyOutcome {
    pub solution: LpSolution,
    /// Source rows that ended up in the final program.
    pub active: Vec<usize>,
    pub solves: usize,
}

/// Row generation: solve with the active subset, add the most violated
/// source rows, repeat until none is violated. Generated rows that have gone
/// slack are dropped whenever the objective has strictly risen since the last
/// drop, which keeps the working program near the binding set without
/// allowing the same rows to cycle in and out at a fixed objective.
pub fn solve_lazy(
    base: &LinearProgram,
    source: &dyn RowSource,
    initial: &[usize],
    batch: usize,
) -> Result<LazyOutcome, LpError> {
    let mut active: Vec<usize> = Vec::new();
    let mut rows: Vec<Constraint> = Vec::new();
    let mut seen = HashSet::new();
    for &i in initial {
        if seen.insert(i) {
            active.push(i);
            rows.push(source.row(i));
        }
    }
    let base_rows = base.inequalities.len();
    let mut lp = base.clone();
    let mut solves = 0;
    let mut last_drop = f64::NEG_INFINITY;
    loop {
        lp.inequalities.truncate(base_rows);
        lp.inequalities.extend(rows.iter().cloned());
        let solution = solve(&lp)?;
        solves += 1;
        if solution.status != LpStatus::Optimal {
            return Ok(LazyOutcome { solution, active, solves });
        }
        let row_scale = lp.inequalities.iter().chain(&lp.equalities).fold(0.0f64, |a, r| a.max(r.rhs.abs()));
        let tol = 1e-10 * (1.0 + row_scale);
        let mut viol = source.violated(&solution.x, tol);
        viol.retain(|(i, _)| !seen.contains(i));
        if viol.is_empty() {
            return Ok(LazyOutcome { solution, active, solves });
        }
        let f = solution.objective_value;
        if f > last_drop + 1e-9 * (1.0 + f.abs()) {
            last_drop = f;
            let slack_tol = 1e-6 * (1.0 + row_scale);
            let mut keep = 0;
            for j in 0..active.len() {
                if rows[j].excess(&solution.x) >= -slack_tol {
                    active.swap(keep, j);
                    rows.swap(keep, j);
                    keep += 1;
                } else {
                    seen.remove(&active[j]);
                }
            }
            active.truncate(keep);
            rows.truncate(keep);
        }
        viol.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(i, _) in viol.iter().take(batch.max(1)) {
            seen.insert(i);
            active.push(i);
            rows.push(source.row(i));
        }
    }
}
