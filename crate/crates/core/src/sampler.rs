//! Grid epsilon-nets over the augmented unsafe space
//! `W = {(t, y) : y in U(t), t in [0, t_c]}` and over the time axis.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::{Hyperbox, RasTask};

pub const DEFAULT_NET_CAP: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleRef<'a> {
    pub t: f64,
    pub y: &'a [f64],
    pub piece: usize,
}

/// Samples are stored column-flat and sorted by `(t, piece, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedSampleSet {
    pub dim: usize,
    times: Vec<f64>,
    coords: Vec<f64>,
    pieces: Vec<u32>,
    pub time_samples: Vec<f64>,
    /// Net radius in `(t, y)` Euclidean distance.
    pub radius: f64,
    /// Grid pitch `h`, shared by every axis.
    pub spacing: f64,
    /// Grid origin: `t = 0` and the workspace lower corner.
    pub anchor: Vec<f64>,
}

impl AugmentedSampleSet {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn get(&self, r: usize) -> SampleRef<'_> {
        SampleRef { t: self.times[r], y: &self.coords[r * self.dim..(r + 1) * self.dim], piece: self.pieces[r] as usize }
    }

    pub fn iter(&self) -> impl Iterator<Item = SampleRef<'_>> + '_ {
        (0..self.len()).map(move |r| self.get(r))
    }

    /// Consecutive runs of samples sharing one time stamp, as `(t, start, end)`.
    pub fn time_groups(&self) -> Vec<(f64, usize, usize)> {
        let mut groups = Vec::new();
        let mut start = 0;
        for r in 1..=self.len() {
            if r == self.len() || self.times[r] != self.times[start] {
                groups.push((self.times[start], start, r));
                start = r;
            }
        }
        groups
    }

    /// Copy keeping only samples whose index passes `keep`.
    pub fn subset(&self, keep: impl Fn(usize) -> bool) -> Self {
        let mut out = Self { times: Vec::new(), coords: Vec::new(), pieces: Vec::new(), ..self.clone() };
        for r in (0..self.len()).filter(|&r| keep(r)) {
            out.times.push(self.times[r]);
            out.coords.extend_from_slice(self.get(r).y);
            out.pieces.push(self.pieces[r]);
        }
        out
    }

    /// Diagnostic dump with header `t,y_1..y_n,piece_id`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.dim).map(|i| format!("y_{i}")))
            .chain(std::iter::once("piece_id".to_string()))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for s in self.iter() {
            write!(w, "{}", s.t)?;
            for v in s.y {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", s.piece)?;
        }
        Ok(())
    }
}

/// Grid pitch so that every point of `W` is within `epsilon` of the clamped
/// center of its own cell. A box moving with corner speed `v_i` shifts the
/// clamp target by at most `v_i h / 2` inside a slab, which gives
/// `(h/2) sqrt(1 + sum (1 + v_i)^2) <= epsilon`; with static boxes this is the
/// half-diagonal rule `(h/2) sqrt(n + 1) <= epsilon`.
pub fn grid_spacing(task: &RasTask, epsilon: f64) -> f64 {
    let n = task.dim();
    let mut speed = vec![0.0f64; n];
    for p in &task.unsafe_set.pieces {
        for (s, v) in speed.iter_mut().zip(p.region.corner_speed(p.active[0], p.active[1])) {
            *s = s.max(v);
        }
    }
    let norm = 1.0 + speed.iter().map(|v| (1.0 + v) * (1.0 + v)).sum::<f64>();
    2.0 * epsilon / norm.sqrt()
}

/// `ceil(t_c / (2 epsilon))` midpoints, so every `t` in `[0, t_c]` lies
/// within `epsilon` of one.
pub fn time_net(horizon: f64, epsilon: f64) -> Vec<f64> {
    let count = ((horizon / (2.0 * epsilon)).ceil() as usize).max(1);
    let step = horizon / count as f64;
    (0..count).map(|k| (k as f64 + 0.5) * step).collect()
}

struct SlabPlan {
    piece: usize,
    t: f64,
    clamp: Hyperbox,
    cells: Vec<(i64, i64)>,
}

fn plan(task: &RasTask, h: f64, anchor: &[f64]) -> Vec<SlabPlan> {
    let mut slabs = Vec::new();
    for (k, p) in task.unsafe_set.pieces.iter().enumerate() {
        let [ta, tb] = p.active;
        let j_lo = (ta / h).floor() as i64;
        let j_hi = ((tb / h).ceil() as i64 - 1).max(j_lo);
        for j in j_lo..=j_hi {
            let s0 = ta.max(j as f64 * h);
            let s1 = tb.min((j + 1) as f64 * h);
            if s0 > s1 {
                continue;
            }
            let t = ((j as f64 + 0.5) * h).clamp(ta, tb);
            let swept = p.region.swept(s0, s1);
            let cells = (0..swept.dim())
                .map(|i| {
                    let lo = ((swept.lower[i] - anchor[i]) / h).floor() as i64;
                    let hi = ((swept.upper[i] - anchor[i]) / h).floor() as i64;
                    (lo, hi.max(lo))
                })
                .collect();
            slabs.push(SlabPlan { piece: k, t, clamp: p.region.at(t), cells });
        }
    }
    slabs
}

pub fn build_net(task: &RasTask, epsilon: f64) -> Result<AugmentedSampleSet> {
    build_net_with_cap(task, epsilon, DEFAULT_NET_CAP)
}

pub fn build_net_with_cap(task: &RasTask, epsilon: f64, cap: usize) -> Result<AugmentedSampleSet> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("net radius must be positive, got {epsilon}")));
    }
    let n = task.dim();
    let h = grid_spacing(task, epsilon);
    let anchor = task.workspace.lower.clone();
    let slabs = plan(task, h, &anchor);

    let count = slabs.iter().fold(0usize, |acc, s| {
        let cells = s.cells.iter().fold(1usize, |c, &(lo, hi)| c.saturating_mul((hi - lo + 1) as usize));
        acc.saturating_add(cells)
    });
    if count > cap {
        return Err(Error::NetTooLarge { count, cap });
    }

    // each slab is independent; results are concatenated in slab order
    let chunks: Vec<(Vec<f64>, Vec<f64>, Vec<u32>)> = slabs
        .par_iter()
        .map(|s| {
            let mut times = Vec::new();
            let mut coords = Vec::new();
            let mut pieces = Vec::new();
            let mut idx: Vec<i64> = s.cells.iter().map(|c| c.0).collect();
            loop {
                times.push(s.t);
                for i in 0..n {
                    let c = anchor[i] + (idx[i] as f64 + 0.5) * h;
                    coords.push(c.clamp(s.clamp.lower[i], s.clamp.upper[i]));
                }
                pieces.push(s.piece as u32);
                // odometer over the cell ranges, last axis fastest
                let mut axis = n;
                loop {
                    if axis == 0 {
                        return (times, coords, pieces);
                    }
                    axis -= 1;
                    if idx[axis] < s.cells[axis].1 {
                        idx[axis] += 1;
                        break;
                    }
                    idx[axis] = s.cells[axis].0;
                }
            }
        })
        .collect();

    let mut times = Vec::with_capacity(count);
    let mut coords = Vec::with_capacity(count * n);
    let mut pieces = Vec::with_capacity(count);
    for (t, c, p) in chunks {
        times.extend(t);
        coords.extend(c);
        pieces.extend(p);
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.par_sort_unstable_by(|&a, &b| {
        times[a]
            .total_cmp(&times[b])
            .then(pieces[a].cmp(&pieces[b]))
            .then_with(|| {
                let (ya, yb) = (&coords[a * n..(a + 1) * n], &coords[b * n..(b + 1) * n]);
                ya.iter().zip(yb).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
            })
            .then(a.cmp(&b))
    });
    let mut net = AugmentedSampleSet {
        dim: n,
        times: order.iter().map(|&r| times[r]).collect(),
        coords: Vec::with_capacity(coords.len()),
        pieces: order.iter().map(|&r| pieces[r]).collect(),
        time_samples: time_net(task.horizon, epsilon),
        radius: epsilon,
        spacing: h,
        anchor,
    };
    for &r in &order {
        net.coords.extend_from_slice(&coords[r * n..(r + 1) * n]);
    }
    Ok(net)
}

/// Bucket grid over `(t, y)` for nearest-sample queries.
struct Buckets<'a> {
    net: &'a AugmentedSampleSet,
    keys: Vec<(Vec<i64>, u32)>,
}

impl<'a> Buckets<'a> {
    fn new(net: &'a AugmentedSampleSet) -> Self {
        let mut keys: Vec<(Vec<i64>, u32)> = (0..net.len()).map(|r| (Self::cell(net, &Self::point(net, r)), r as u32)).collect();
        keys.par_sort_unstable();
        Self { net, keys }
    }

    fn point(net: &AugmentedSampleSet, r: usize) -> Vec<f64> {
        let s = net.get(r);
        std::iter::once(s.t).chain(s.y.iter().copied()).collect()
    }

    fn cell(net: &AugmentedSampleSet, p: &[f64]) -> Vec<i64> {
        let h = net.spacing;
        p.iter()
            .enumerate()
            .map(|(a, &v)| {
                let origin = if a == 0 { 0.0 } else { net.anchor[a - 1] };
                ((v - origin) / h).floor() as i64
            })
            .collect()
    }

    fn bucket(&self, key: &[i64]) -> &[(Vec<i64>, u32)] {
        let start = self.keys.partition_point(|(k, _)| k.as_slice() < key);
        let end = self.keys.partition_point(|(k, _)| k.as_slice() <= key);
        &self.keys[start..end]
    }

    fn nearest(&self, p: &[f64]) -> f64 {
        if self.keys.is_empty() {
            return f64::INFINITY;
        }
        let h = self.net.spacing;
        let home = Self::cell(self.net, p);
        let d = home.len();
        let mut best = f64::INFINITY;
        for ring in 0i64.. {
            let side = (2 * ring + 1) as usize;
            let total = side.pow(d as u32);
            let mut offset = vec![0i64; d];
            for code in 0..total {
                let mut rem = code;
                for o in offset.iter_mut() {
                    *o = (rem % side) as i64 - ring;
                    rem /= side;
                }
                if offset.iter().all(|o| o.abs() < ring) {
                    continue;
                }
                let key: Vec<i64> = home.iter().zip(&offset).map(|(a, b)| a + b).collect();
                for &(_, r) in self.bucket(&key) {
                    let q = Self::point(self.net, r as usize);
                    let dist = q.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    best = best.min(dist);
                }
            }
            if best <= ring as f64 * h {
                break;
            }
            if ring > 64 {
                // fall back to a full scan for far-away probes
                for r in 0..self.net.len() {
                    let q = Self::point(self.net, r);
                    best = best.min(q.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
                }
                break;
            }
        }
        best
    }
}

/// Draws `probe_count` uniform points of `W` and returns the largest distance
/// to the nearest net sample. Zero when `W` is empty.
pub fn verify_net(net: &AugmentedSampleSet, task: &RasTask, probe_count: usize, seed: u64) -> f64 {
    let pieces = &task.unsafe_set.pieces;
    if pieces.is_empty() || probe_count == 0 {
        return 0.0;
    }
    let weights: Vec<f64> = pieces
        .iter()
        .map(|p| {
            let mid = p.region.at(0.5 * (p.active[0] + p.active[1]));
            let vol: f64 = (0..mid.dim()).map(|i| mid.width(i)).product();
            (p.active[1] - p.active[0]) * vol
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<Vec<f64>> = (0..probe_count)
        .map(|_| {
            let k = if total > 0.0 {
                let mut u = rng.random::<f64>() * total;
                weights.iter().position(|&w| {
                    u -= w;
                    u < 0.0
                })
                .unwrap_or(pieces.len() - 1)
            } else {
                rng.random_range(0..pieces.len())
            };
            let p = &pieces[k];
            let t = p.active[0] + rng.random::<f64>() * (p.active[1] - p.active[0]);
            let b = p.region.at(t);
            std::iter::once(t)
                .chain((0..b.dim()).map(|i| b.lower[i] + rng.random::<f64>() * b.width(i)))
                .collect()
        })
        .collect();
    let buckets = Buckets::new(net);
    probes.par_iter().map(|p| buckets.nearest(p)).reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{TimedRegion, UnsafeSet};

    fn bx(lo: &[f64], hi: &[f64]) -> Hyperbox {
        Hyperbox::new(lo.to_vec(), hi.to_vec()).unwrap()
    }

    fn maglev_task() -> RasTask {
        RasTask {
            workspace: bx(&[0.0], &[5.0]),
            initial: bx(&[0.75], &[1.25]),
            target: bx(&[0.75], &[1.25]),
            unsafe_set: UnsafeSet { pieces: vec![TimedRegion::fixed(&bx(&[0.0], &[3.0]), [1.5, 3.5])] },
            horizon: 5.0,
            min_width: vec![0.1],
        }
    }

    fn moving_task() -> RasTask {
        RasTask {
            workspace: bx(&[0.0, 0.0], &[4.0, 4.0]),
            initial: bx(&[0.1, 0.1], &[0.5, 0.5]),
            target: bx(&[3.5, 3.5], &[3.9, 3.9]),
            unsafe_set: UnsafeSet {
                pieces: vec![
                    TimedRegion::fixed(&bx(&[1.0, 2.5], &[1.5, 3.5]), [0.0, 4.0]),
                    TimedRegion::moving_cube(&[vec![3.0, -0.4], vec![1.0, 0.1, 0.05]], 0.4, [0.5, 3.0]),
                ],
            },
            horizon: 4.0,
            min_width: vec![0.1, 0.1],
        }
    }

    #[test]
    fn empty_unsafe_set_gives_time_net_only() {
        let mut task = maglev_task();
        task.unsafe_set = UnsafeSet::default();
        let net = build_net(&task, 0.1).unwrap();
        assert!(net.is_empty());
        assert_eq!(net.time_samples.len(), 25);
        assert_eq!(verify_net(&net, &task, 10, 0), 0.0);
    }

    #[test]
    fn maglev_samples_stay_in_window() {
        let task = maglev_task();
        let net = build_net(&task, 0.01).unwrap();
        assert!(!net.is_empty());
        for s in net.iter() {
            assert!((1.5..=3.5).contains(&s.t) && (0.0..=3.0).contains(&s.y[0]), "{s:?}");
        }
    }

    #[test]
    fn time_net_covers_horizon() {
        let ts = time_net(5.0, 0.3);
        for k in 0..=5000 {
            let t = 5.0 * k as f64 / 5000.0;
            let gap = ts.iter().map(|s| (s - t).abs()).fold(f64::INFINITY, f64::min);
            assert!(gap <= 0.3 + 1e-12);
        }
    }

    #[test]
    fn net_covers_static_and_moving_obstacles() {
        let task = moving_task();
        let eps = 0.08;
        let net = build_net(&task, eps).unwrap();
        let gap = verify_net(&net, &task, 20_000, 3);
        assert!(gap <= eps, "gap {gap}");
    }

    #[test]
    fn deleting_every_other_sample_is_caught() {
        let task = maglev_task();
        let eps = 0.05;
        let net = build_net(&task, eps).unwrap();
        let thinned = net.subset(|r| r % 2 == 0);
        assert!(verify_net(&thinned, &task, 20_000, 1) > eps);
    }

    #[test]
    fn point_obstacle_is_its_own_sample() {
        let mut task = maglev_task();
        // degenerate box, built directly since validated boxes need lower < upper
        let point = Hyperbox { lower: vec![2.0], upper: vec![2.0] };
        task.unsafe_set = UnsafeSet { pieces: vec![TimedRegion::fixed(&point, [1.0, 1.0])] };
        let net = build_net(&task, 0.1).unwrap();
        assert_eq!(net.len(), 1);
        assert_eq!((net.get(0).t, net.get(0).y[0]), (1.0, 2.0));
        assert_eq!(verify_net(&net, &task, 100, 0), 0.0);
    }

    #[test]
    fn deterministic_and_monotone_in_epsilon() {
        let task = moving_task();
        assert_eq!(build_net(&task, 0.1).unwrap(), build_net(&task, 0.1).unwrap());
        let counts: Vec<usize> = [0.025, 0.05, 0.1, 0.2].iter().map(|&e| build_net(&task, e).unwrap().len()).collect();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    }

    #[test]
    fn cap_is_enforced() {
        let err = build_net_with_cap(&maglev_task(), 0.001, 1000).unwrap_err();
        assert!(matches!(err, Error::NetTooLarge { cap: 1000, .. }));
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let net = build_net(&maglev_task(), 0.2).unwrap();
        let mut buf = Vec::new();
        net.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,y_1,piece_id\n"));
        assert_eq!(text.lines().count(), net.len() + 1);
    }
}
