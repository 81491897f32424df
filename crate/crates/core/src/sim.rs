//! Fixed-step closed-loop simulation and trajectory logs.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funnel::ControllerStack;
use crate::plants::PlantModel;
use crate::task::RasTask;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_DISTURBANCE: f64 = 0.05;

/// Classical fourth-order Runge-Kutta step.
pub fn rk4_step<F>(mut f: F, t: f64, x: &[f64], dt: f64) -> Vec<f64>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    let shift = |k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * dt, &shift(&k1, 0.5 * dt));
    let k3 = f(t + 0.5 * dt, &shift(&k2, 0.5 * dt));
    let k4 = f(t + dt, &shift(&k3, dt));
    (0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub dt: f64,
    /// Half-width of the uniform disturbance, per channel.
    pub disturbance: f64,
    pub seed: u64,
    /// Stops early once the state becomes inadmissible.
    pub horizon: f64,
}

impl SimOptions {
    pub fn new(horizon: f64, seed: u64) -> Self {
        Self { dt: DEFAULT_DT, disturbance: DEFAULT_DISTURBANCE, seed, horizon }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureKind {
    StateLeftDomain,
    NumericalBlowup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimFailure {
    pub kind: FailureKind,
    pub t: f64,
    pub reason: String,
}

impl SimFailure {
    pub fn to_error(&self) -> Error {
        match self.kind {
            FailureKind::StateLeftDomain => Error::StateLeftDomain { t: self.t, reason: self.reason.clone() },
            FailureKind::NumericalBlowup => Error::NumericalBlowup { t: self.t },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub plant: String,
    pub time: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    /// `r_2 ..= r_N` per step.
    pub references: Vec<Vec<Vec<f64>>>,
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    pub contained: Vec<bool>,
    /// The controller clamped an error at this step.
    pub clamped: Vec<bool>,
    pub failure: Option<SimFailure>,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Appends a logged row, evaluating the tube and containment from the
    /// controller's stage-1 tube.
    fn push(&mut self, stack: &ControllerStack, t: f64, x: Vec<f64>, y: Vec<f64>, u: Vec<f64>, refs: Vec<Vec<f64>>, clamped: bool) {
        let b = stack.stage1.tube.bounds_at(t);
        let inside = (0..y.len()).all(|i| b.lower[i] < y[i] && y[i] < b.upper[i]);
        self.time.push(t);
        self.states.push(x);
        self.outputs.push(y);
        self.controls.push(u);
        self.references.push(refs);
        self.lower.push(b.lower);
        self.upper.push(b.upper);
        self.contained.push(inside);
        self.clamped.push(clamped);
    }

    pub fn first_uncontained(&self) -> Option<usize> {
        self.contained.iter().position(|c| !c)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let Some(first) = self.states.first() else { return Ok(()) };
        let (nx, ny, nu) = (first.len(), self.outputs[0].len(), self.controls[0].len());
        let mut head = vec!["t".to_string()];
        head.extend((1..=nx).map(|i| format!("x_{i}")));
        head.extend((1..=ny).map(|i| format!("y_{i}")));
        head.extend((1..=nu).map(|i| format!("u_{i}")));
        head.extend((1..=ny).map(|i| format!("gammaL_{i}")));
        head.extend((1..=ny).map(|i| format!("gammaU_{i}")));
        head.push("contained".into());
        writeln!(w, "{}", head.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![self.time[k].to_string()];
            for v in self.states[k].iter().chain(&self.outputs[k]).chain(&self.controls[k]).chain(&self.lower[k]).chain(&self.upper[k]) {
                row.push(v.to_string());
            }
            row.push(if self.contained[k] { "1".into() } else { "0".into() });
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

const BLOWUP: f64 = 1e12;

/// Integrates the closed loop from `x0` until `opts.horizon`. Domain exits and
/// blow-ups end the run early and are recorded in `failure`.
pub fn simulate(plant: &PlantModel, stack: &ControllerStack, x0: &[f64], opts: &SimOptions) -> Result<TrajectoryLog> {
    if x0.len() != plant.state_dim {
        return Err(Error::Dimension(format!("{} expects {} states, got {}", plant.name, plant.state_dim, x0.len())));
    }
    if stack.dim() != plant.outputs || stack.depth() != plant.stages {
        return Err(Error::Dimension(format!(
            "controller has {} stages of size {}, {} needs {} of size {}",
            stack.depth(),
            stack.dim(),
            plant.name,
            plant.stages,
            plant.outputs
        )));
    }
    if !(opts.dt > 0.0 && opts.horizon > 0.0) {
        return Err(Error::InvalidArgument("dt and horizon must be positive".into()));
    }
    if let Err(reason) = plant.check_domain(x0) {
        return Err(Error::StateLeftDomain { t: 0.0, reason });
    }

    let steps = (opts.horizon / opts.dt).round().max(1.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut log = TrajectoryLog {
        plant: plant.name.clone(),
        time: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        outputs: Vec::with_capacity(steps + 1),
        controls: Vec::with_capacity(steps + 1),
        references: Vec::with_capacity(steps + 1),
        lower: Vec::with_capacity(steps + 1),
        upper: Vec::with_capacity(steps + 1),
        contained: Vec::with_capacity(steps + 1),
        clamped: Vec::with_capacity(steps + 1),
        failure: None,
    };

    let law = |t: f64, x: &[f64]| -> Result<crate::funnel::ControlOutput> {
        let stages = plant.stage_states(x);
        let refs: Vec<&[f64]> = stages.iter().map(Vec::as_slice).collect();
        stack.control(&refs, t)
    };

    let mut x = x0.to_vec();
    for k in 0..=steps {
        let t = if k == steps { opts.horizon } else { k as f64 * opts.dt };
        let out = law(t, &x)?;
        log.push(stack, t, x.clone(), plant.output(&x), out.u.clone(), out.references, out.outside.iter().any(|&o| o));
        if k == steps {
            break;
        }
        let w: Vec<f64> = (0..plant.disturbance_dim)
            .map(|_| if opts.disturbance > 0.0 { rng.random_range(-opts.disturbance..=opts.disturbance) } else { 0.0 })
            .collect();
        let t_next = if k + 1 == steps { opts.horizon } else { (k + 1) as f64 * opts.dt };
        let h = t_next - t;
        let next = rk4_step(
            |s, xs| {
                // control errors cannot occur here: dimensions were checked above
                let u = law(s, xs).map(|o| o.u).unwrap_or_else(|_| vec![f64::NAN; plant.outputs]);
                plant.dynamics(xs, &u, &w)
            },
            t,
            &x,
            h,
        );
        if next.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP) {
            log.failure = Some(SimFailure { kind: FailureKind::NumericalBlowup, t: t_next, reason: "state diverged".into() });
            break;
        }
        if let Err(reason) = plant.check_domain(&next) {
            log.failure = Some(SimFailure { kind: FailureKind::StateLeftDomain, t: t_next, reason });
            break;
        }
        x = next;
    }
    Ok(log)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub reached: bool,
    pub safe: bool,
    pub contained: bool,
    pub first_uncontained: Option<usize>,
    pub diagnostics: Vec<String>,
}

impl Verdict {
    pub fn pass(&self) -> bool {
        self.reached && self.safe && self.contained
    }
}

pub fn evaluate_tras(log: &TrajectoryLog, task: &RasTask) -> Verdict {
    let mut diagnostics = Vec::new();
    let complete = log.time.last().is_some_and(|&t| t >= task.horizon - 1e-9);
    let reached = if !complete {
        diagnostics.push(format!(
            "log ends at t = {} before the horizon {}",
            log.time.last().copied().unwrap_or(0.0),
            task.horizon
        ));
        false
    } else {
        let y = log.outputs.last().map(Vec::as_slice).unwrap_or_default();
        let ok = task.target.contains_point(y);
        if !ok {
            diagnostics.push(format!("y(t_c) = {y:?} is outside the target"));
        }
        ok
    };
    if let Some(f) = &log.failure {
        diagnostics.push(format!("{:?} at t = {}: {}", f.kind, f.t, f.reason));
    }
    let mut safe = true;
    for (k, y) in log.outputs.iter().enumerate() {
        let t = log.time[k];
        if !task.workspace.contains_point(y) {
            diagnostics.push(format!("left the workspace at step {k} (t = {t})"));
            safe = false;
            break;
        }
        if task.unsafe_set.contains(t, y) {
            diagnostics.push(format!("entered the unsafe set at step {k} (t = {t})"));
            safe = false;
            break;
        }
    }
    let first_uncontained = log.first_uncontained();
    if let Some(k) = first_uncontained {
        diagnostics.push(format!("left the tube at step {k} (t = {})", log.time[k]));
    }
    Verdict { reached, safe, contained: first_uncontained.is_none() && !log.is_empty(), first_uncontained, diagnostics }
}
