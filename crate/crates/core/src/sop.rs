//! Scenario program over a sampled task: linear in the tube coefficients for
//! a fixed choice of which side of the tube clears each obstacle sample.
//!
//! Decision vector per dimension `i`: lower-curve coefficients, upper-curve
//! coefficients and a slack `eta_i`; one global `eta` last. Inside the LP the
//! curves use the scaled time `s = t / t_c`, which keeps every row entry in
//! `[0, 1]`; coefficients are converted back to absolute time on output.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, Bound, Constraint, LinearProgram, LpSolution, LpStatus, RowSource};
use crate::sampler::AugmentedSampleSet;
use crate::task::RasTask;
use crate::tube::{BasisSpec, BoundaryCurve, Tube};

/// Rows added per row-generation round.
const ROW_BATCH: usize = 64;
/// A sample row counts as binding when within this distance of its slack.
const BINDING_TOL: f64 = 1e-6;
/// Slack used when auditing a returned tube by direct evaluation.
pub const AUDIT_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// The sample lies below the lower curve.
    L,
    /// The sample lies above the upper curve.
    U,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub dim: usize,
    pub side: Side,
}

impl Literal {
    fn all(n: usize) -> impl Iterator<Item = Literal> {
        (0..n).flat_map(|dim| [Literal { dim, side: Side::L }, Literal { dim, side: Side::U }])
    }

    /// Value that must be `<= eta_dim`: `y - gamma_L` or `gamma_U - y`.
    fn value(&self, y: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
        match self.side {
            Side::L => y[self.dim] - lower[self.dim],
            Side::U => upper[self.dim] - y[self.dim],
        }
    }
}

/// One literal per obstacle sample, in net order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DisjunctAssignment {
    pub literals: Vec<Literal>,
}

impl DisjunctAssignment {
    /// `(dim, side, count)` triples, sorted.
    pub fn histogram(&self, n: usize) -> Vec<(usize, Side, usize)> {
        Literal::all(n)
            .map(|l| (l.dim, l.side, self.literals.iter().filter(|&&m| m == l).count()))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Heuristic,
    ExactBnb,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "heuristic" => Ok(Self::Heuristic),
            "exact" | "exact_bnb" | "exactbnb" | "bnb" => Ok(Self::ExactBnb),
            other => Err(Error::InvalidArgument(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// Cap on LP solves, counting every row-generation round.
    pub max_lp_solves: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self { max_lp_solves: 20_000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisStats {
    pub iterations: usize,
    pub lp_solves: usize,
    pub nodes: usize,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub tube: Tube,
    pub eta_star: f64,
    pub eta_per_dim: Vec<f64>,
    pub assignment: DisjunctAssignment,
    pub strategy: Strategy,
    /// False when the budget ran out (exact search) or for the heuristic.
    pub optimal: bool,
    pub budget_exhausted: bool,
    pub stats: SynthesisStats,
}

pub struct SopInstance<'a> {
    pub task: &'a RasTask,
    pub net: &'a AugmentedSampleSet,
    pub basis: BasisSpec,
    groups: Vec<(f64, usize, usize)>,
    coeff_bound: f64,
}

/// Time rows are indexed `(r * n + i) * 3 + kind` with kind 0 = workspace
/// lower face, 1 = workspace upper face, 2 = width floor. With an assignment,
/// indices past the time rows address obstacle samples.
struct Rows<'a, 'b> {
    inst: &'b SopInstance<'a>,
    assignment: Option<&'b [Literal]>,
}

impl RowSource for Rows<'_, '_> {
    fn row(&self, idx: usize) -> Constraint {
        let inst = self.inst;
        let time_rows = inst.time_row_count();
        if idx < time_rows {
            let n = inst.dim();
            let kind = idx % 3;
            let i = (idx / 3) % n;
            let r = idx / (3 * n);
            inst.time_row(r, i, kind)
        } else {
            let r = idx - time_rows;
            inst.obstacle_row(r, self.assignment.expect("obstacle row without assignment")[r])
        }
    }

    fn violated(&self, x: &[f64], tol: f64) -> Vec<(usize, f64)> {
        let inst = self.inst;
        let n = inst.dim();
        let mut out = Vec::new();
        for (r, &t) in inst.net.time_samples.iter().enumerate() {
            let (lo, hi) = inst.curves_at(x, t);
            for i in 0..n {
                let eta = x[inst.eta_idx(i)];
                let excess = [
                    inst.task.workspace.lower[i] - lo[i] - eta,
                    hi[i] - inst.task.workspace.upper[i] - eta,
                    lo[i] - hi[i] + inst.task.min_width[i] - eta,
                ];
                for (kind, e) in excess.into_iter().enumerate() {
                    if e > tol {
                        out.push(((r * n + i) * 3 + kind, e));
                    }
                }
            }
        }
        if let Some(assign) = self.assignment {
            let base = inst.time_row_count();
            let obstacle: Vec<(usize, f64)> = inst
                .groups
                .par_iter()
                .flat_map_iter(|&(t, start, end)| {
                    let (lo, hi) = inst.curves_at(x, t);
                    (start..end).filter_map(move |r| {
                        let lit = assign[r];
                        let e = lit.value(inst.net.get(r).y, &lo, &hi) - x[inst.eta_idx(lit.dim)];
                        (e > tol).then_some((base + r, e))
                    })
                })
                .collect();
            out.extend(obstacle);
        }
        out
    }
}

impl<'a> SopInstance<'a> {
    pub fn assemble(task: &'a RasTask, net: &'a AugmentedSampleSet, basis: BasisSpec) -> Result<Self> {
        if net.dim != task.dim() && !net.is_empty() {
            return Err(Error::Dimension(format!("net has dimension {} but task has {}", net.dim, task.dim())));
        }
        if basis.len() < 2 {
            let same = task.initial == task.target;
            if !same {
                return Err(Error::InfeasibleEndpoints { coefficients: basis.len() });
            }
        }
        let scale = task
            .workspace
            .lower
            .iter()
            .chain(&task.workspace.upper)
            .fold(1.0f64, |a, v| a.max(v.abs()));
        Ok(Self { task, net, basis, groups: net.time_groups(), coeff_bound: 1e3 * scale })
    }

    pub fn dim(&self) -> usize {
        self.task.dim()
    }

    /// Coefficients per curve.
    pub fn z(&self) -> usize {
        self.basis.len()
    }

    /// `n (2z + 1) + 1`.
    pub fn num_vars(&self) -> usize {
        self.dim() * (2 * self.z() + 1) + 1
    }

    fn lower_idx(&self, i: usize, k: usize) -> usize {
        i * (2 * self.z() + 1) + k
    }

    fn upper_idx(&self, i: usize, k: usize) -> usize {
        i * (2 * self.z() + 1) + self.z() + k
    }

    fn eta_idx(&self, i: usize) -> usize {
        i * (2 * self.z() + 1) + 2 * self.z()
    }

    fn global_eta_idx(&self) -> usize {
        self.num_vars() - 1
    }

    fn time_row_count(&self) -> usize {
        3 * self.dim() * self.net.time_samples.len()
    }

    fn powers(&self, t: f64) -> Vec<f64> {
        let s = t / self.task.horizon;
        let mut p = Vec::with_capacity(self.z());
        let mut v = 1.0;
        for _ in 0..self.z() {
            p.push(v);
            v *= s;
        }
        p
    }

    /// Curve values `(gamma_L, gamma_U)` at absolute time `t` for the LP point `x`.
    pub fn curves_at(&self, x: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        let p = self.powers(t);
        let n = self.dim();
        let eval = |idx: &dyn Fn(usize) -> usize| -> f64 { p.iter().enumerate().map(|(k, pk)| pk * x[idx(k)]).sum() };
        let lo = (0..n).map(|i| eval(&|k| self.lower_idx(i, k))).collect();
        let hi = (0..n).map(|i| eval(&|k| self.upper_idx(i, k))).collect();
        (lo, hi)
    }

    fn curve_row(&self, t: f64, i: usize, side: Side, sign: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.num_vars()];
        for (k, pk) in self.powers(t).into_iter().enumerate() {
            let j = match side {
                Side::L => self.lower_idx(i, k),
                Side::U => self.upper_idx(i, k),
            };
            row[j] = sign * pk;
        }
        row
    }

    fn time_row(&self, r: usize, i: usize, kind: usize) -> Constraint {
        let t = self.net.time_samples[r];
        let ws = &self.task.workspace;
        let mut row;
        let rhs;
        match kind {
            0 => {
                // Y_L - gamma_L <= eta_i
                row = self.curve_row(t, i, Side::L, -1.0);
                rhs = -ws.lower[i];
            }
            1 => {
                // gamma_U - Y_U <= eta_i
                row = self.curve_row(t, i, Side::U, 1.0);
                rhs = ws.upper[i];
            }
            _ => {
                // gamma_L - gamma_U + width <= eta_i
                row = self.curve_row(t, i, Side::L, 1.0);
                for (a, b) in row.iter_mut().zip(self.curve_row(t, i, Side::U, -1.0)) {
                    *a += b;
                }
                rhs = -self.task.min_width[i];
            }
        }
        row[self.eta_idx(i)] = -1.0;
        Constraint::new(row, rhs)
    }

    fn obstacle_row(&self, r: usize, lit: Literal) -> Constraint {
        let s = self.net.get(r);
        let y = s.y[lit.dim];
        let (mut row, rhs) = match lit.side {
            // y - gamma_L <= eta_i
            Side::L => (self.curve_row(s.t, lit.dim, Side::L, -1.0), -y),
            // gamma_U - y <= eta_i
            Side::U => (self.curve_row(s.t, lit.dim, Side::U, 1.0), y),
        };
        row[self.eta_idx(lit.dim)] = -1.0;
        Constraint::new(row, rhs)
    }

    /// Endpoint equalities, `eta_i <= eta`, objective and variable bounds.
    pub fn base_program(&self) -> LinearProgram {
        let nv = self.num_vars();
        let n = self.dim();
        let mut objective = vec![0.0; nv];
        objective[self.global_eta_idx()] = 1.0;
        let mut equalities = Vec::new();
        for i in 0..n {
            for (side, start, end) in [
                (Side::L, self.task.initial.lower[i], self.task.target.lower[i]),
                (Side::U, self.task.initial.upper[i], self.task.target.upper[i]),
            ] {
                let mut at0 = vec![0.0; nv];
                let mut at1 = vec![0.0; nv];
                for k in 0..self.z() {
                    let j = match side {
                        Side::L => self.lower_idx(i, k),
                        Side::U => self.upper_idx(i, k),
                    };
                    if k == 0 {
                        at0[j] = 1.0;
                    }
                    at1[j] = 1.0;
                }
                equalities.push(Constraint::new(at0, start));
                if self.z() >= 2 {
                    equalities.push(Constraint::new(at1, end));
                }
            }
        }
        let mut inequalities = Vec::new();
        for i in 0..n {
            let mut row = vec![0.0; nv];
            row[self.eta_idx(i)] = 1.0;
            row[self.global_eta_idx()] = -1.0;
            inequalities.push(Constraint::new(row, 0.0));
        }
        let b = self.coeff_bound;
        LinearProgram { objective, inequalities, equalities, bounds: vec![Bound::new(-b, b); nv] }
    }

    fn seed_time_rows(&self) -> Vec<usize> {
        let nt = self.net.time_samples.len();
        let n = self.dim();
        let mut rows = Vec::new();
        for r in [0, nt / 2, nt - 1] {
            for i in 0..n {
                for kind in 0..3 {
                    rows.push((r * n + i) * 3 + kind);
                }
            }
        }
        rows.sort_unstable();
        rows.dedup();
        rows
    }

    /// Tube in absolute time from an LP point.
    pub fn tube_from(&self, x: &[f64]) -> Tube {
        let tc = self.task.horizon;
        let curve = |idx: &dyn Fn(usize) -> usize| {
            BoundaryCurve::new((0..self.z()).map(|k| x[idx(k)] / tc.powi(k as i32)).collect())
        };
        let n = self.dim();
        let lower = (0..n).map(|i| curve(&|k| self.lower_idx(i, k))).collect();
        let upper = (0..n).map(|i| curve(&|k| self.upper_idx(i, k))).collect();
        let mut tube = Tube::new_unchecked(lower, upper, tc).expect("positive horizon");
        tube.basis = self.basis;
        tube
    }

    /// Literal with the largest clearance `-(value)` for each sample, against
    /// the given curves; ties go to the lowest dimension, then side L.
    fn best_literals(&self, x: &[f64], eta: Option<&[f64]>) -> Vec<(Literal, f64)> {
        let n = self.dim();
        self.groups
            .par_iter()
            .flat_map_iter(|&(t, start, end)| {
                let (lo, hi) = self.curves_at(x, t);
                (start..end).map(move |r| {
                    let y = self.net.get(r).y;
                    let mut best = (Literal { dim: 0, side: Side::L }, f64::INFINITY);
                    for lit in Literal::all(n) {
                        let v = lit.value(y, &lo, &hi) - eta.map_or(0.0, |e| e[lit.dim]);
                        if v < best.1 {
                            best = (lit, v);
                        }
                    }
                    (best.0, best.1)
                })
            })
            .collect()
    }

    /// Sample whose best literal is furthest above its slack, if any is
    /// above by more than `1e-9`; ties go to the lowest index.
    fn worst_sample(&self, x: &[f64], eta: &[f64]) -> Option<usize> {
        let n = self.dim();
        self.groups
            .par_iter()
            .filter_map(|&(t, start, end)| {
                let (lo, hi) = self.curves_at(x, t);
                let mut worst: Option<(usize, f64)> = None;
                for r in start..end {
                    let y = self.net.get(r).y;
                    let v = Literal::all(n).map(|l| l.value(y, &lo, &hi) - eta[l.dim]).fold(f64::INFINITY, f64::min);
                    if v > 1e-9 && worst.map_or(true, |w| v > w.1) {
                        worst = Some((r, v));
                    }
                }
                worst
            })
            .reduce_with(|a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
            .map(|(r, _)| r)
    }

    /// LP point of the straight tube from the initial box to the target box.
    fn straight_seed(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.num_vars()];
        for i in 0..self.dim() {
            x[self.lower_idx(i, 0)] = self.task.initial.lower[i];
            x[self.upper_idx(i, 0)] = self.task.initial.upper[i];
            if self.z() >= 2 {
                x[self.lower_idx(i, 1)] = self.task.target.lower[i] - self.task.initial.lower[i];
                x[self.upper_idx(i, 1)] = self.task.target.upper[i] - self.task.initial.upper[i];
            }
        }
        x
    }

    fn eta_values(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|i| x[self.eta_idx(i)]).collect()
    }

    fn solve_assigned(&self, assign: &[Literal], initial: &[usize]) -> Result<(lp::LazyOutcome, LpSolution)> {
        let source = Rows { inst: self, assignment: Some(assign) };
        let out = lp::solve_lazy(&self.base_program(), &source, initial, ROW_BATCH)?;
        let sol = out.solution.clone();
        Ok((out, sol))
    }

    /// New literals for samples of `assign` at the LP point `x`, or `None`
    /// when nothing changes. Alternatives are ranked by `value - eta`, since a
    /// per-dimension slack can always be raised to the global one.
    fn relabel(&self, x: &[f64], assign: &[Literal], binding_only: bool) -> Option<Vec<Literal>> {
        let eta_i = self.eta_values(x);
        let eta = x[self.global_eta_idx()];
        let n = self.dim();
        let moves: Vec<Option<Literal>> = self
            .groups
            .par_iter()
            .flat_map_iter(|&(t, start, end)| {
                let (lo, hi) = self.curves_at(x, t);
                let eta_i = &eta_i;
                (start..end).map(move |r| {
                    let y = self.net.get(r).y;
                    let cur = assign[r];
                    let cur_value = cur.value(y, &lo, &hi);
                    if binding_only && cur_value - eta_i[cur.dim] < -BINDING_TOL {
                        return None;
                    }
                    let (best, best_value) = Literal::all(n)
                        .filter(|&l| !binding_only || l != cur)
                        .map(|l| (l, l.value(y, &lo, &hi)))
                        .fold((cur, f64::INFINITY), |a, c| if c.1 < a.1 { c } else { a });
                    (best != cur && (binding_only || best_value < cur_value - BINDING_TOL)).then_some(best)
                })
            })
            .collect();
        let _ = eta;
        if moves.iter().all(Option::is_none) {
            return None;
        }
        Some(assign.iter().zip(moves).map(|(&a, m)| m.unwrap_or(a)).collect())
    }

    /// Solves with the given literal per sample, then keeps moving samples to
    /// other literals while the optimum improves.
    fn improve(
        &self,
        assign: Vec<Literal>,
        budget: Budget,
        stats: &mut SynthesisStats,
    ) -> Result<(LpSolution, Vec<Literal>, bool)> {
        let time_rows = self.time_row_count();
        let (out, sol) = self.solve_assigned(&assign, &self.seed_time_rows())?;
        stats.lp_solves += out.solves;
        if sol.status != LpStatus::Optimal {
            return Err(Error::NoFeasibleAssignment);
        }
        let mut initial: Vec<usize> = out.active.iter().copied().filter(|&i| i < time_rows).collect();
        let mut best = (sol, assign);
        'improve: loop {
            stats.iterations += 1;
            // first move binding samples only, then re-pick every sample
            for binding_only in [true, false] {
                if stats.lp_solves >= budget.max_lp_solves {
                    return Ok((best.0, best.1, true));
                }
                let Some(candidate) = self.relabel(&best.0.x, &best.1, binding_only) else { continue };
                let (out, sol) = self.solve_assigned(&candidate, &initial)?;
                stats.lp_solves += out.solves;
                if sol.status == LpStatus::Optimal && sol.objective_value < best.0.objective_value - 1e-9 {
                    initial = out.active.iter().copied().filter(|&i| i < time_rows).collect();
                    best = (sol, candidate);
                    continue 'improve;
                }
            }
            return Ok((best.0, best.1, false));
        }
    }

    /// Greedy dive: take the most violated sample, solve the program once
    /// per literal for it, keep the literal with the lowest optimum, repeat
    /// until the tube clears every sample. Returns the completed assignment.
    fn dive(&self, budget: Budget, stats: &mut SynthesisStats) -> Result<Option<Vec<Literal>>> {
        let n = self.dim();
        let mut fixed: Vec<(usize, Literal)> = Vec::new();
        let first = self.solve_fixed(&fixed, &self.seed_time_rows())?;
        stats.lp_solves += first.solves;
        let mut current = first;
        loop {
            if current.solution.status != LpStatus::Optimal {
                return Ok(None);
            }
            let x = &current.solution.x;
            let eta = vec![x[self.global_eta_idx()]; n];
            let Some(branch) = self.worst_sample(x, &eta) else {
                let mut assign: Vec<Literal> = self.best_literals(x, Some(&eta)).into_iter().map(|(l, _)| l).collect();
                for &(r, l) in &fixed {
                    assign[r] = l;
                }
                return Ok(Some(assign));
            };
            if stats.lp_solves >= budget.max_lp_solves {
                return Ok(None);
            }
            let rows = current.active.clone();
            let children: Vec<Result<(Literal, lp::LazyOutcome)>> = Literal::all(n)
                .collect::<Vec<_>>()
                .par_iter()
                .map(|&l| {
                    let mut f = fixed.clone();
                    f.push((branch, l));
                    Ok((l, self.solve_fixed(&f, &rows)?))
                })
                .collect();
            let mut pick: Option<(Literal, lp::LazyOutcome)> = None;
            for child in children {
                let (l, out) = child?;
                stats.lp_solves += out.solves;
                if out.solution.status != LpStatus::Optimal {
                    continue;
                }
                if pick.as_ref().map_or(true, |p| out.solution.objective_value < p.1.solution.objective_value - 1e-12) {
                    pick = Some((l, out));
                }
            }
            let Some((l, out)) = pick else { return Ok(None) };
            fixed.push((branch, l));
            current = out;
        }
    }

    fn solve_fixed(&self, fixed: &[(usize, Literal)], initial: &[usize]) -> Result<lp::LazyOutcome> {
        let mut base = self.base_program();
        base.inequalities.extend(fixed.iter().map(|&(r, l)| self.obstacle_row(r, l)));
        Ok(lp::solve_lazy(&base, &Rows { inst: self, assignment: None }, initial, ROW_BATCH)?)
    }

    /// Heuristic: literals seeded from the straight tube between the initial
    /// and target boxes, and separately from a greedy dive; each is refined by
    /// local moves and the better result is kept.
    pub fn solve_heuristic(&self, budget: Budget) -> Result<SynthesisResult> {
        let started = Instant::now();
        let mut stats = SynthesisStats::default();
        let seed = self.straight_seed();
        let straight: Vec<Literal> = self.best_literals(&seed, None).into_iter().map(|(l, _)| l).collect();
        let mut best = self.improve(straight, budget, &mut stats)?;
        if !self.net.is_empty() {
            match self.dive(budget, &mut stats)? {
                Some(assign) => {
                    let other = self.improve(assign, budget, &mut stats)?;
                    if other.0.objective_value < best.0.objective_value - 1e-12 {
                        best = other;
                    } else {
                        best.2 |= other.2;
                    }
                }
                None => best.2 = true,
            }
        }
        stats.wall_ms = started.elapsed().as_secs_f64() * 1e3;
        Ok(self.finish(best.0, best.1, Strategy::Heuristic, false, best.2, stats))
    }

    /// Depth-first branch and bound over literals, seeded with the heuristic
    /// as incumbent. Each node solves the LP with only its assigned samples;
    /// the worst-violated unassigned sample is branched on. Children are
    /// solved in parallel and visited in a fixed order, so the search is
    /// deterministic.
    pub fn solve_exact(&self, budget: Budget) -> Result<SynthesisResult> {
        let started = Instant::now();
        let heuristic = self.solve_heuristic(budget)?;
        let mut stats = heuristic.stats.clone();
        stats.nodes = 0;

        struct Node {
            fixed: Vec<(usize, Literal)>,
            time_rows: Vec<usize>,
            sol: LpSolution,
        }

        let solve_node = |fixed: &[(usize, Literal)], initial: &[usize]| -> Result<(lp::LazyOutcome, usize)> {
            let out = self.solve_fixed(fixed, initial)?;
            let solves = out.solves;
            Ok((out, solves))
        };

        let mut incumbent_eta = heuristic.eta_star;
        let mut incumbent: Option<(LpSolution, Vec<Literal>)> = None;
        let mut exhausted = heuristic.budget_exhausted;

        let (root, solves) = solve_node(&[], &self.seed_time_rows())?;
        stats.lp_solves += solves;
        stats.nodes += 1;
        let mut stack = Vec::new();
        if root.solution.status == LpStatus::Optimal {
            stack.push(Node { fixed: Vec::new(), time_rows: root.active, sol: root.solution });
        }
        let n = self.dim();
        while let Some(node) = stack.pop() {
            if node.sol.objective_value >= incumbent_eta - 1e-9 {
                continue;
            }
            // a per-dimension slack can be raised to the global one for free
            let eta = vec![node.sol.x[self.global_eta_idx()]; n];
            let Some(branch) = self.worst_sample(&node.sol.x, &eta) else {
                let best = self.best_literals(&node.sol.x, Some(&eta));
                // every sample is cleared by some literal: a complete assignment
                let mut sol = node.sol;
                for i in 0..n {
                    sol.x[self.eta_idx(i)] = sol.x[self.global_eta_idx()];
                }
                incumbent_eta = sol.objective_value;
                incumbent = Some((sol, best.into_iter().map(|(l, _)| l).collect()));
                continue;
            };
            if stats.lp_solves >= budget.max_lp_solves {
                exhausted = true;
                break;
            }
            let y = self.net.get(branch).y;
            let (lo, hi) = self.curves_at(&node.sol.x, self.net.get(branch).t);
            let mut lits: Vec<Literal> = Literal::all(n).collect();
            // most promising literal first
            lits.sort_by(|a, b| {
                (a.value(y, &lo, &hi) - eta[a.dim]).total_cmp(&(b.value(y, &lo, &hi) - eta[b.dim]))
            });
            let children: Vec<Result<(Vec<(usize, Literal)>, lp::LazyOutcome, usize)>> = lits
                .par_iter()
                .map(|&l| {
                    let mut fixed = node.fixed.clone();
                    fixed.push((branch, l));
                    let (out, solves) = solve_node(&fixed, &node.time_rows)?;
                    Ok((fixed, out, solves))
                })
                .collect();
            let mut next = Vec::new();
            for child in children {
                let (fixed, out, solves) = child?;
                stats.lp_solves += solves;
                stats.nodes += 1;
                if out.solution.status == LpStatus::Optimal && out.solution.objective_value < incumbent_eta - 1e-9 {
                    next.push(Node { fixed, time_rows: out.active, sol: out.solution });
                }
            }
            // push in reverse so the most promising child is popped first
            stack.extend(next.into_iter().rev());
        }
        stats.iterations += 1;
        stats.wall_ms = started.elapsed().as_secs_f64() * 1e3;
        let result = match incumbent {
            Some((sol, assign)) => self.finish(sol, assign, Strategy::ExactBnb, !exhausted, exhausted, stats),
            None => {
                let mut r = heuristic;
                r.strategy = Strategy::ExactBnb;
                r.optimal = !exhausted;
                r.budget_exhausted = exhausted;
                r.stats = stats;
                r
            }
        };
        Ok(result)
    }

    fn finish(
        &self,
        sol: LpSolution,
        assign: Vec<Literal>,
        strategy: Strategy,
        optimal: bool,
        budget_exhausted: bool,
        stats: SynthesisStats,
    ) -> SynthesisResult {
        SynthesisResult {
            tube: self.tube_from(&sol.x),
            eta_star: sol.x[self.global_eta_idx()],
            eta_per_dim: self.eta_values(&sol.x),
            assignment: DisjunctAssignment { literals: assign },
            strategy,
            optimal,
            budget_exhausted,
            stats,
        }
    }

    pub fn synthesize(&self, strategy: Strategy, budget: Budget) -> Result<SynthesisResult> {
        if budget.max_lp_solves == 0 {
            return Err(Error::BudgetExhausted);
        }
        match strategy {
            Strategy::Heuristic => self.solve_heuristic(budget),
            Strategy::ExactBnb => self.solve_exact(budget),
        }
    }

    /// Re-evaluates every scenario row on the returned tube in absolute time.
    pub fn audit(&self, result: &SynthesisResult) -> ConstraintAudit {
        let tube = &result.tube;
        let task = self.task;
        let eta = &result.eta_per_dim;
        let n = self.dim();
        let mut audit = ConstraintAudit::default();
        let b0 = tube.bounds_at(0.0);
        let bc = tube.bounds_at(task.horizon);
        for i in 0..n {
            for err in [
                b0.lower[i] - task.initial.lower[i],
                b0.upper[i] - task.initial.upper[i],
                bc.lower[i] - task.target.lower[i],
                bc.upper[i] - task.target.upper[i],
            ] {
                audit.endpoint = audit.endpoint.max(err.abs());
            }
            audit.eta_link = audit.eta_link.max(eta[i] - result.eta_star);
        }
        for &t in &self.net.time_samples {
            let b = tube.bounds_at(t);
            for i in 0..n {
                audit.time_rows = audit
                    .time_rows
                    .max(task.workspace.lower[i] - b.lower[i] - eta[i])
                    .max(b.upper[i] - task.workspace.upper[i] - eta[i])
                    .max(b.lower[i] - b.upper[i] + task.min_width[i] - eta[i]);
            }
        }
        let assign = &result.assignment.literals;
        audit.obstacle_rows = self
            .groups
            .par_iter()
            .map(|&(t, start, end)| {
                let b = tube.bounds_at(t);
                (start..end)
                    .map(|r| {
                        let y = self.net.get(r).y;
                        let assigned = assign.get(r).map_or(f64::INFINITY, |l| l.value(y, &b.lower, &b.upper) - eta[l.dim]);
                        let any = Literal::all(n)
                            .map(|l| l.value(y, &b.lower, &b.upper) - eta[l.dim])
                            .fold(f64::INFINITY, f64::min);
                        assigned.max(any)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .reduce(|| f64::NEG_INFINITY, f64::max);
        audit.samples = self.net.len();
        audit
    }
}

/// Largest excess of each row family on a returned tube.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintAudit {
    pub endpoint: f64,
    pub time_rows: f64,
    pub eta_link: f64,
    /// Over samples, `max(assigned literal, best literal) - eta_i`.
    pub obstacle_rows: f64,
    pub samples: usize,
}

impl ConstraintAudit {
    pub fn pass(&self) -> bool {
        let scale = 1.0;
        self.endpoint <= AUDIT_TOL * scale
            && self.time_rows <= AUDIT_TOL
            && self.eta_link <= AUDIT_TOL
            && (self.samples == 0 || self.obstacle_rows <= AUDIT_TOL)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentCount {
    pub dim: usize,
    pub side: Side,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub eta_star: f64,
    pub eta_per_dim: Vec<f64>,
    pub n_samples: usize,
    pub n_time_samples: usize,
    pub n_lp_solves: usize,
    pub n_nodes: usize,
    pub strategy: Strategy,
    pub optimal: bool,
    pub budget_exhausted: bool,
    pub wall_ms: f64,
    pub epsilon: f64,
    pub degree: usize,
    pub dimensions: usize,
    pub curves: usize,
    pub assignment_histogram: Vec<AssignmentCount>,
}

impl SynthesisReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Tube document and synthesis report.
pub fn export_result(result: &SynthesisResult, net: &AugmentedSampleSet) -> Result<(String, SynthesisReport)> {
    let n = result.tube.dim();
    let report = SynthesisReport {
        eta_star: result.eta_star,
        eta_per_dim: result.eta_per_dim.clone(),
        n_samples: net.len(),
        n_time_samples: net.time_samples.len(),
        n_lp_solves: result.stats.lp_solves,
        n_nodes: result.stats.nodes,
        strategy: result.strategy,
        optimal: result.optimal,
        budget_exhausted: result.budget_exhausted,
        wall_ms: result.stats.wall_ms,
        epsilon: net.radius,
        degree: result.tube.basis.degree,
        dimensions: n,
        curves: 2 * n,
        assignment_histogram: result
            .assignment
            .histogram(n)
            .into_iter()
            .map(|(dim, side, count)| AssignmentCount { dim, side, count })
            .collect(),
    };
    Ok((result.tube.to_json()?, report))
}
