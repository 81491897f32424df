//! Brute-force tube checker. Evaluates the tube on a dense time grid and
//! tests every grid point of each active obstacle box against the tube box.
//! It shares no code path with synthesis, so it serves as the independent
//! oracle for synthesized tubes.

use serde::{Deserialize, Serialize};

use crate::task::RasTask;
use crate::tube::Tube;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OracleOptions {
    pub time_step: f64,
    pub space_step: f64,
    /// Slack allowed on the non-strict containments (workspace, start, end,
    /// width floor). Obstacle separation is always checked exactly.
    pub tolerance: f64,
}

impl OracleOptions {
    /// `t_c / 5000` in time and `min obstacle edge / 50` in space.
    pub fn for_task(task: &RasTask) -> Self {
        Self::with_resolution(task, 5000, 50)
    }

    pub fn with_resolution(task: &RasTask, time_points: usize, per_edge: usize) -> Self {
        let min_edge = task
            .unsafe_set
            .pieces
            .iter()
            .flat_map(|p| {
                let b = p.region.at(p.active[0]);
                (0..b.dim()).map(move |i| b.width(i))
            })
            .fold(f64::INFINITY, f64::min);
        let space_step = if min_edge.is_finite() { min_edge / per_edge as f64 } else { 1.0 };
        Self { time_step: task.horizon / time_points as f64, space_step, tolerance: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionKind {
    /// Tube box inside the workspace.
    Workspace,
    /// Tube box at t = 0 inside the initial box.
    Start,
    /// Tube box at t = t_c inside the target box.
    End,
    /// Tube box disjoint from the unsafe set.
    Obstacle,
    /// `gamma_U - gamma_L >= min_width`.
    Width,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ConditionKind,
    pub t: f64,
    pub dim: Option<usize>,
    pub piece: Option<usize>,
    /// Amount by which the condition is missed (0 for touching contacts).
    pub amount: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct OracleReport {
    pub violations: Vec<Violation>,
    pub time_points: usize,
}

impl OracleReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ConditionKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

/// Grid `lo, lo + s, lo + 2s, ...` strictly below `hi`, then `hi` itself.
/// Halving `s` yields a superset of points.
fn grid(lo: f64, hi: f64, s: f64) -> impl Iterator<Item = f64> {
    let count = if hi > lo { ((hi - lo) / s).ceil() as usize } else { 0 };
    (0..count)
        .map(move |k| lo + k as f64 * s)
        .filter(move |&v| v < hi)
        .chain(std::iter::once(hi))
}

pub fn check_stt(tube: &Tube, task: &RasTask, opts: &OracleOptions) -> OracleReport {
    let n = tube.dim();
    let tol = opts.tolerance;
    let mut violations = Vec::new();

    let b0 = tube.bounds_at(0.0);
    let bc = tube.bounds_at(task.horizon);
    for i in 0..n {
        let start = (task.initial.lower[i] - b0.lower[i]).max(b0.upper[i] - task.initial.upper[i]);
        if start > tol {
            violations.push(Violation { kind: ConditionKind::Start, t: 0.0, dim: Some(i), piece: None, amount: start });
        }
        let end = (task.target.lower[i] - bc.lower[i]).max(bc.upper[i] - task.target.upper[i]);
        if end > tol {
            violations.push(Violation {
                kind: ConditionKind::End,
                t: task.horizon,
                dim: Some(i),
                piece: None,
                amount: end,
            });
        }
    }

    let times: Vec<f64> = grid(0.0, task.horizon, opts.time_step).collect();
    for &t in &times {
        let b = tube.bounds_at(t);
        for i in 0..n {
            let out = (task.workspace.lower[i] - b.lower[i]).max(b.upper[i] - task.workspace.upper[i]);
            if out > tol {
                violations.push(Violation { kind: ConditionKind::Workspace, t, dim: Some(i), piece: None, amount: out });
            }
            let short = task.min_width[i] - (b.upper[i] - b.lower[i]);
            if short > tol {
                violations.push(Violation { kind: ConditionKind::Width, t, dim: Some(i), piece: None, amount: short });
            }
        }
        for (k, piece) in task.unsafe_set.pieces.iter().enumerate() {
            let Some(u) = piece.box_at(t) else { continue };
            // A grid point of U lies in the closed tube box iff every axis has
            // a grid coordinate inside the tube interval.
            let mut depth = f64::INFINITY;
            let hit = (0..n).all(|i| {
                let inside = grid(u.lower[i], u.upper[i], opts.space_step)
                    .filter(|&c| c >= b.lower[i] && c <= b.upper[i])
                    .map(|c| (c - b.lower[i]).min(b.upper[i] - c))
                    .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))));
                match inside {
                    Some(d) => {
                        depth = depth.min(d);
                        true
                    }
                    None => false,
                }
            });
            if hit {
                violations.push(Violation {
                    kind: ConditionKind::Obstacle,
                    t,
                    dim: None,
                    piece: Some(k),
                    amount: depth,
                });
            }
        }
    }
    OracleReport { violations, time_points: times.len() }
}
