//! Temporal reach-avoid-stay tasks: workspace, initial and target boxes,
//! and a time-varying unsafe set built from moving axis-aligned boxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;

/// Axis-aligned box `prod_i [lower[i], upper[i]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperbox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Hyperbox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Self { lower, upper };
        let issues = b.issues("box");
        if issues.is_empty() {
            Ok(b)
        } else {
            Err(Error::InvalidTask(issues))
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn contains_point(&self, y: &[f64]) -> bool {
        y.iter()
            .enumerate()
            .all(|(i, &v)| v >= self.lower[i] && v <= self.upper[i])
    }

    pub fn contains_box(&self, other: &Hyperbox) -> bool {
        (0..self.dim()).all(|i| other.lower[i] >= self.lower[i] && other.upper[i] <= self.upper[i])
    }

    /// Closed-set intersection: boxes sharing only a face count as intersecting.
    pub fn intersects(&self, other: &Hyperbox) -> bool {
        (0..self.dim()).all(|i| self.lower[i] <= other.upper[i] && other.lower[i] <= self.upper[i])
    }

    /// Intersection with positive volume.
    pub fn overlaps_interior(&self, other: &Hyperbox) -> bool {
        (0..self.dim()).all(|i| self.lower[i] < other.upper[i] && other.lower[i] < self.upper[i])
    }

    fn issues(&self, name: &str) -> Vec<String> {
        let mut out = Vec::new();
        if self.lower.is_empty() {
            out.push(format!("{name}: dimension must be at least 1"));
        }
        if self.lower.len() != self.upper.len() {
            out.push(format!(
                "{name}: lower has {} entries but upper has {}",
                self.lower.len(),
                self.upper.len()
            ));
            return out;
        }
        for i in 0..self.lower.len() {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if !lo.is_finite() || !hi.is_finite() {
                out.push(format!("{name}: non-finite bound in dimension {i}"));
            } else if lo >= hi {
                out.push(format!("{name}: lower {lo} >= upper {hi} in dimension {i}"));
            }
        }
        out
    }
}

/// Box whose corners follow polynomial trajectories in absolute time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MovingBox {
    /// Per-dimension ascending coefficients of the lower corner.
    pub lower_poly: Vec<Vec<f64>>,
    pub upper_poly: Vec<Vec<f64>>,
}

impl MovingBox {
    pub fn at(&self, t: f64) -> Hyperbox {
        Hyperbox {
            lower: self.lower_poly.iter().map(|c| poly::eval(c, t)).collect(),
            upper: self.upper_poly.iter().map(|c| poly::eval(c, t)).collect(),
        }
    }

    /// Smallest box containing the region over the whole window `[t0, t1]`.
    pub fn swept(&self, t0: f64, t1: f64) -> Hyperbox {
        Hyperbox {
            lower: self.lower_poly.iter().map(|c| poly::range(c, t0, t1).0).collect(),
            upper: self.upper_poly.iter().map(|c| poly::range(c, t0, t1).1).collect(),
        }
    }

    /// Largest corner speed over `[t0, t1]`, per dimension.
    pub fn corner_speed(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.lower_poly
            .iter()
            .zip(&self.upper_poly)
            .map(|(lo, hi)| {
                let a = poly::max_abs(&poly::derivative(lo), t0, t1);
                let b = poly::max_abs(&poly::derivative(hi), t0, t1);
                a.max(b)
            })
            .collect()
    }

    pub fn is_static(&self) -> bool {
        self.lower_poly
            .iter()
            .chain(&self.upper_poly)
            .all(|c| c.iter().skip(1).all(|&v| v == 0.0))
    }
}

/// One obstacle: a moving box that exists only during `active`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedRegion {
    pub active: [f64; 2],
    #[serde(flatten)]
    pub region: MovingBox,
}

impl TimedRegion {
    pub fn fixed(b: &Hyperbox, active: [f64; 2]) -> Self {
        Self {
            active,
            region: MovingBox {
                lower_poly: b.lower.iter().map(|&v| vec![v]).collect(),
                upper_poly: b.upper.iter().map(|&v| vec![v]).collect(),
            },
        }
    }

    /// Cube of edge `width` whose center follows the given polynomials.
    pub fn moving_cube(center: &[Vec<f64>], width: f64, active: [f64; 2]) -> Self {
        let shift = |c: &Vec<f64>, d: f64| {
            let mut out = c.clone();
            if out.is_empty() {
                out.push(0.0);
            }
            out[0] += d;
            out
        };
        Self {
            active,
            region: MovingBox {
                lower_poly: center.iter().map(|c| shift(c, -0.5 * width)).collect(),
                upper_poly: center.iter().map(|c| shift(c, 0.5 * width)).collect(),
            },
        }
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.active[0] && t <= self.active[1]
    }

    pub fn box_at(&self, t: f64) -> Option<Hyperbox> {
        self.is_active(t).then(|| self.region.at(t))
    }

    pub fn dim(&self) -> usize {
        self.region.lower_poly.len()
    }
}

/// Union of timed regions; may be disconnected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnsafeSet {
    pub pieces: Vec<TimedRegion>,
}

impl UnsafeSet {
    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn contains(&self, t: f64, y: &[f64]) -> bool {
        self.pieces
            .iter()
            .any(|p| p.box_at(t).is_some_and(|b| b.contains_point(y)))
    }

    pub fn intersects_box(&self, t: f64, b: &Hyperbox) -> Option<usize> {
        self.pieces
            .iter()
            .position(|p| p.box_at(t).is_some_and(|u| u.intersects(b)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasTask {
    pub workspace: Hyperbox,
    /// Initial box used for the tube's start face.
    pub initial: Hyperbox,
    /// Target box used for the tube's end face.
    pub target: Hyperbox,
    #[serde(rename = "unsafe", default)]
    pub unsafe_set: UnsafeSet,
    pub horizon: f64,
    /// Minimum separation between lower and upper tube curves, per dimension.
    pub min_width: Vec<f64>,
}

impl RasTask {
    pub fn dim(&self) -> usize {
        self.workspace.dim()
    }

    /// Every violated invariant, with the offending dimension or time.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        out.extend(self.workspace.issues("workspace"));
        out.extend(self.initial.issues("initial"));
        out.extend(self.target.issues("target"));
        if !out.is_empty() {
            return out;
        }
        let n = self.dim();
        for (name, b) in [("initial", &self.initial), ("target", &self.target)] {
            if b.dim() != n {
                out.push(format!("{name}: dimension {} differs from workspace dimension {n}", b.dim()));
            }
        }
        if self.min_width.len() != n {
            out.push(format!("min_width: {} entries for dimension {n}", self.min_width.len()));
        }
        if !out.is_empty() {
            return out;
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            out.push(format!("horizon: must be positive, got {}", self.horizon));
        }
        for (i, &w) in self.min_width.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                out.push(format!("min_width: must be positive in dimension {i}, got {w}"));
            }
        }
        for (name, b) in [("initial", &self.initial), ("target", &self.target)] {
            for i in 0..n {
                if b.lower[i] < self.workspace.lower[i] || b.upper[i] > self.workspace.upper[i] {
                    out.push(format!("{name}: not inside workspace in dimension {i}"));
                }
            }
        }
        for (k, piece) in self.unsafe_set.pieces.iter().enumerate() {
            out.extend(piece_issues(k, piece, n, self.horizon));
        }
        if !out.is_empty() {
            return out;
        }
        if let Some(k) = self.unsafe_set.intersects_box(0.0, &self.initial) {
            out.push(format!("initial: intersects unsafe piece {k} at t = 0"));
        }
        if let Some(k) = self.unsafe_set.intersects_box(self.horizon, &self.target) {
            out.push(format!("target: intersects unsafe piece {k} at t = {}", self.horizon));
        }
        out
    }
}

fn piece_issues(k: usize, piece: &TimedRegion, n: usize, horizon: f64) -> Vec<String> {
    let mut out = Vec::new();
    let name = format!("unsafe[{k}]");
    let [ta, tb] = piece.active;
    if !(ta.is_finite() && tb.is_finite() && ta <= tb) {
        out.push(format!("{name}: active window [{ta}, {tb}] is not an interval"));
        return out;
    }
    if ta < 0.0 || tb > horizon {
        out.push(format!("{name}: active window [{ta}, {tb}] leaves [0, {horizon}]"));
    }
    let m = &piece.region;
    if m.lower_poly.len() != n || m.upper_poly.len() != n {
        out.push(format!("{name}: corner polynomials do not have {n} dimensions"));
        return out;
    }
    for i in 0..n {
        let (lo, hi) = (&m.lower_poly[i], &m.upper_poly[i]);
        if lo.iter().chain(hi).any(|v| !v.is_finite()) {
            out.push(format!("{name}: non-finite coefficient in dimension {i}"));
            continue;
        }
        let len = lo.len().max(hi.len());
        let gap: Vec<f64> = (0..len)
            .map(|j| hi.get(j).copied().unwrap_or(0.0) - lo.get(j).copied().unwrap_or(0.0))
            .collect();
        let (min_gap, _) = poly::range(&gap, ta, tb);
        if min_gap <= 0.0 {
            let t_bad = (0..=1000)
                .map(|s| ta + (tb - ta) * s as f64 / 1000.0)
                .find(|&t| poly::eval(&gap, t) <= 0.0)
                .unwrap_or(ta);
            out.push(format!("{name}: lower >= upper in dimension {i} near t = {t_bad}"));
        }
    }
    out
}

pub fn validate_task(task: RasTask) -> Result<RasTask> {
    let issues = task.diagnostics();
    if issues.is_empty() {
        Ok(task)
    } else {
        Err(Error::InvalidTask(issues))
    }
}

#[derive(Clone, Debug)]
pub struct Rectification {
    pub workspace: Hyperbox,
    pub augmentation: Vec<TimedRegion>,
}

/// Replace an arbitrarily shaped workspace by its bounding box and cover the
/// difference with static grid boxes. A grid cell becomes unsafe when its
/// center fails the membership predicate; runs of such cells along the
/// first axis are merged into one box.
pub fn workspace_rectify<F>(
    bounds: &Hyperbox,
    inside: F,
    resolution: f64,
    horizon: f64,
    protected: &[&Hyperbox],
) -> Result<Rectification>
where
    F: Fn(&[f64]) -> bool,
{
    if !(resolution > 0.0) {
        return Err(Error::InvalidArgument(format!("resolution must be positive, got {resolution}")));
    }
    let n = bounds.dim();
    let counts: Vec<usize> = (0..n)
        .map(|i| (bounds.width(i) / resolution).ceil().max(1.0) as usize)
        .collect();
    let edge = |i: usize, k: usize| (bounds.lower[i] + k as f64 * resolution).min(bounds.upper[i]);

    let mut augmentation = Vec::new();
    // Odometer over dimensions 1..n; dimension 0 is scanned as runs.
    let mut idx = vec![0usize; n];
    loop {
        let mut run_start: Option<usize> = None;
        for k0 in 0..=counts[0] {
            let outside = k0 < counts[0] && {
                idx[0] = k0;
                let center: Vec<f64> =
                    (0..n).map(|i| 0.5 * (edge(i, idx[i]) + edge(i, idx[i] + 1))).collect();
                !inside(&center)
            };
            match (outside, run_start) {
                (true, None) => run_start = Some(k0),
                (false, Some(s)) => {
                    let mut lower = Vec::with_capacity(n);
                    let mut upper = Vec::with_capacity(n);
                    for i in 0..n {
                        let (a, b) = if i == 0 { (s, k0) } else { (idx[i], idx[i] + 1) };
                        lower.push(edge(i, a));
                        upper.push(edge(i, b));
                    }
                    let cell = Hyperbox { lower, upper };
                    if let Some(p) = protected.iter().find(|p| p.overlaps_interior(&cell)) {
                        return Err(Error::ResolutionTooCoarse(format!(
                            "cell {:?}..{:?} overlaps protected box {:?}..{:?}",
                            cell.lower, cell.upper, p.lower, p.upper
                        )));
                    }
                    augmentation.push(TimedRegion::fixed(&cell, [0.0, horizon]));
                    run_start = None;
                }
                _ => {}
            }
        }
        // advance odometer over dims 1..n
        let mut d = 1;
        while d < n {
            idx[d] += 1;
            if idx[d] < counts[d] {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d >= n {
            break;
        }
    }
    Ok(Rectification { workspace: bounds.clone(), augmentation })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(lo: &[f64], hi: &[f64]) -> Hyperbox {
        Hyperbox::new(lo.to_vec(), hi.to_vec()).unwrap()
    }

    fn robot_case_one() -> RasTask {
        RasTask {
            workspace: bx(&[0.0, 0.0], &[5.0, 5.0]),
            initial: bx(&[1.0, 2.0], &[1.5, 2.5]),
            target: bx(&[4.5, 4.5], &[5.0, 5.0]),
            unsafe_set: UnsafeSet {
                pieces: vec![
                    TimedRegion::fixed(&bx(&[2.0, 0.0], &[3.0, 2.5]), [0.0, 5.0]),
                    TimedRegion::fixed(&bx(&[0.5, 3.5], &[2.5, 4.5]), [0.0, 5.0]),
                ],
            },
            horizon: 5.0,
            min_width: vec![0.1, 0.1],
        }
    }

    #[test]
    fn robot_task_is_valid() {
        assert!(validate_task(robot_case_one()).is_ok());
    }

    #[test]
    fn stay_only_task_is_valid() {
        let w = bx(&[0.0, 0.0], &[1.0, 1.0]);
        let task = RasTask {
            workspace: w.clone(),
            initial: w.clone(),
            target: w,
            unsafe_set: UnsafeSet::default(),
            horizon: 1.0,
            min_width: vec![0.1, 0.1],
        };
        assert!(validate_task(task).is_ok());
    }

    #[test]
    fn initial_inside_unsafe_is_reported() {
        let mut task = robot_case_one();
        task.workspace = bx(&[0.0, 0.0], &[5.0, 5.0]);
        task.initial = bx(&[0.0, 0.0], &[1.0, 1.0]);
        task.unsafe_set.pieces.push(TimedRegion::fixed(&bx(&[-0.5, -0.5], &[1.5, 1.5]), [0.0, 1.0]));
        match validate_task(task) {
            Err(Error::InvalidTask(d)) => {
                assert!(d.iter().any(|s| s.contains("initial: intersects unsafe piece 2")), "{d:?}")
            }
            other => panic!("expected InvalidTask, got {other:?}"),
        }
    }

    #[test]
    fn diagnostics_collect_every_problem() {
        let mut task = robot_case_one();
        task.horizon = -1.0;
        task.min_width = vec![0.0, 0.1];
        task.target = bx(&[4.5, 4.5], &[5.5, 5.0]);
        let d = task.diagnostics();
        assert!(d.iter().any(|s| s.starts_with("horizon")));
        assert!(d.iter().any(|s| s.contains("min_width") && s.contains("dimension 0")));
        assert!(d.iter().any(|s| s.contains("target: not inside workspace in dimension 0")));
    }

    #[test]
    fn degenerate_moving_box_reported_with_time() {
        let mut task = robot_case_one();
        task.unsafe_set.pieces.push(TimedRegion {
            active: [0.0, 5.0],
            region: MovingBox {
                lower_poly: vec![vec![3.0, 0.0], vec![3.0]],
                upper_poly: vec![vec![4.0, -0.5], vec![3.2]],
            },
        });
        let d = task.diagnostics();
        assert!(d.iter().any(|s| s.contains("unsafe[2]") && s.contains("near t = 2")), "{d:?}");
    }

    #[test]
    fn moving_cube_tracks_center() {
        let cube = TimedRegion::moving_cube(&[vec![2.875, -0.1375], vec![0.125, 0.1375], vec![0.125, 2.0, -0.1]], 0.25, [0.0, 20.0]);
        let b = cube.box_at(10.0).unwrap();
        assert!((b.lower[2] - 10.0).abs() < 1e-12);
        assert!((b.upper[0] - 1.625).abs() < 1e-12);
        assert!(cube.box_at(20.5).is_none());
    }

    #[test]
    fn rectify_box_workspace_adds_nothing() {
        let w = bx(&[0.0, 0.0], &[2.0, 2.0]);
        let r = workspace_rectify(&w, |_| true, 0.5, 1.0, &[]).unwrap();
        assert!(r.augmentation.is_empty());
    }

    #[test]
    fn rectify_l_shape_against_fine_grid() {
        let w = bx(&[0.0, 0.0], &[2.0, 2.0]);
        let inside = |p: &[f64]| !(p[0] > 1.0 && p[1] > 1.0);
        let r = workspace_rectify(&w, inside, 0.5, 1.0, &[]).unwrap();
        // dense membership oracle at a 10x finer grid
        let step = 0.05;
        let mut max_miss: f64 = 0.0;
        for a in 0..=40 {
            for b in 0..=40 {
                let p = [a as f64 * step, b as f64 * step];
                let covered = r.augmentation.iter().any(|g| g.region.at(0.0).contains_point(&p));
                if !inside(&p) && !covered {
                    // distance of an uncovered outside point to the covered set
                    max_miss = max_miss.max((1.0 - p[0].min(p[1])).abs());
                }
                if covered && inside(&p) {
                    // spurious coverage must stay within one cell of the hole
                    assert!(p[0] >= 0.5 && p[1] >= 0.5, "{p:?}");
                }
            }
        }
        assert!(max_miss <= 0.5 + 1e-12);
        let area: f64 = r
            .augmentation
            .iter()
            .map(|g| {
                let b = g.region.at(0.0);
                b.width(0) * b.width(1)
            })
            .sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rectify_circle_area_close_to_complement() {
        let w = bx(&[-1.0, -1.0], &[1.0, 1.0]);
        let r = workspace_rectify(&w, |p| p[0] * p[0] + p[1] * p[1] <= 1.0, 0.1, 1.0, &[]).unwrap();
        let area: f64 = r
            .augmentation
            .iter()
            .map(|g| {
                let b = g.region.at(0.0);
                b.width(0) * b.width(1)
            })
            .sum();
        // Monte-Carlo style oracle on a deterministic lattice
        let m = 400;
        let mut outside = 0usize;
        for a in 0..m {
            for b in 0..m {
                let x = -1.0 + 2.0 * (a as f64 + 0.5) / m as f64;
                let y = -1.0 + 2.0 * (b as f64 + 0.5) / m as f64;
                if x * x + y * y > 1.0 {
                    outside += 1;
                }
            }
        }
        let mc = 4.0 * outside as f64 / (m * m) as f64;
        assert!((mc - (4.0 - std::f64::consts::PI)).abs() < 0.01);
        assert!((area - mc).abs() < 0.1 * mc, "area {area} vs {mc}");
    }

    #[test]
    fn rectify_rejects_overlap_with_initial() {
        let w = bx(&[0.0, 0.0], &[2.0, 2.0]);
        let s = bx(&[0.9, 0.9], &[1.2, 1.2]);
        let inside = |p: &[f64]| !(p[0] > 1.0 && p[1] > 1.0);
        assert!(matches!(
            workspace_rectify(&w, inside, 0.5, 1.0, &[&s]),
            Err(Error::ResolutionTooCoarse(_))
        ));
    }
}
