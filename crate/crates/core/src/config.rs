//! Task documents: a T-RAS task plus optional synthesis, controller and
//! simulation settings, and the bundled benchmark tasks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funnel::{AutoFunnel, ClampOptions, ControllerStack, FunnelSpec, StageOneLaw, XiDenominator};
use crate::plants::PlantModel;
use crate::sim::{DEFAULT_DISTURBANCE, DEFAULT_DT};
use crate::sop::{Budget, Strategy};
use crate::task::{validate_task, Hyperbox, RasTask, TimedRegion, UnsafeSet};
use crate::tube::Tube;

/// Obstacle forms accepted in task files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObstacleSpec {
    /// Corners given as polynomials in time.
    Moving(TimedRegion),
    /// Cube of edge `width` centered on polynomial trajectories.
    Cube { active: [f64; 2], center: Vec<Vec<f64>>, width: f64 },
    /// Static box.
    Fixed { active: [f64; 2], lower: Vec<f64>, upper: Vec<f64> },
}

impl ObstacleSpec {
    fn region(&self) -> Result<TimedRegion> {
        Ok(match self {
            Self::Moving(r) => r.clone(),
            Self::Cube { active, center, width } => TimedRegion::moving_cube(center, *width, *active),
            Self::Fixed { active, lower, upper } => TimedRegion::fixed(&Hyperbox::new(lower.clone(), upper.clone())?, *active),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub epsilon: f64,
    pub degree: usize,
    pub strategy: Strategy,
    pub max_lp_solves: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self { epsilon: 0.05, degree: 2, strategy: Strategy::ExactBnb, max_lp_solves: Budget::default().max_lp_solves }
    }
}

impl SynthesisConfig {
    pub fn budget(&self) -> Budget {
        Budget { max_lp_solves: self.max_lp_solves }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// `kappa_1 ..= kappa_N`; missing entries default to 1.
    pub gains: Vec<f64>,
    pub p_scale: f64,
    pub p_offset: f64,
    pub q_ratio: f64,
    pub mu_rate: f64,
    pub delta: f64,
    pub xi_denominator: XiDenominator,
    /// Explicit funnels for stages `2..=N`; replaces the automatic choice.
    pub funnels: Option<Vec<FunnelSpec>>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let auto = AutoFunnel::default();
        Self {
            gains: Vec::new(),
            p_scale: auto.p_scale,
            p_offset: auto.p_offset,
            q_ratio: auto.q_ratio,
            mu_rate: auto.mu_rate,
            delta: auto.clamp.delta,
            xi_denominator: auto.clamp.denominator,
            funnels: None,
        }
    }
}

impl ControllerConfig {
    pub fn clamp(&self) -> ClampOptions {
        ClampOptions { delta: self.delta, denominator: self.xi_denominator }
    }

    /// Builds the controller for `tube` and the plant's initial state.
    pub fn build(&self, tube: &Tube, plant: &PlantModel, x0: &[f64]) -> Result<ControllerStack> {
        if tube.dim() != plant.outputs {
            return Err(Error::Dimension(format!(
                "tube has {} dimensions, plant {} has {} outputs",
                tube.dim(),
                plant.name,
                plant.outputs
            )));
        }
        if let Some(funnels) = &self.funnels {
            let gain = self.gains.first().copied().unwrap_or(1.0);
            return ControllerStack::new(StageOneLaw { tube: tube.clone(), gain }, funnels.clone(), self.clamp());
        }
        let auto = AutoFunnel {
            gains: self.gains.clone(),
            p_scale: self.p_scale,
            p_offset: self.p_offset,
            q_ratio: self.q_ratio,
            mu_rate: self.mu_rate,
            clamp: self.clamp(),
        };
        ControllerStack::auto(tube, &plant.stage_states(x0), &auto)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub dt: f64,
    /// Per-channel disturbance bound.
    pub disturbance: f64,
    pub seeds: usize,
    /// Initial output; defaults to the center of the initial box.
    pub initial_output: Option<Vec<f64>>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { dt: DEFAULT_DT, disturbance: DEFAULT_DISTURBANCE, seeds: 20, initial_output: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    plant: Option<String>,
    workspace: Hyperbox,
    initial: Hyperbox,
    target: Hyperbox,
    #[serde(rename = "unsafe", default)]
    obstacles: Vec<ObstacleSpec>,
    horizon: f64,
    min_width: Vec<f64>,
    #[serde(default)]
    synthesis: SynthesisConfig,
    #[serde(default)]
    controller: ControllerConfig,
    #[serde(default)]
    simulation: SimulationConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskDocument {
    pub name: Option<String>,
    pub plant: Option<String>,
    pub task: RasTask,
    pub obstacles: Vec<ObstacleSpec>,
    pub synthesis: SynthesisConfig,
    pub controller: ControllerConfig,
    pub simulation: SimulationConfig,
}

impl TaskDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawDocument = serde_json::from_str(text)?;
        let pieces = raw.obstacles.iter().map(ObstacleSpec::region).collect::<Result<Vec<_>>>()?;
        let task = validate_task(RasTask {
            workspace: raw.workspace,
            initial: raw.initial,
            target: raw.target,
            unsafe_set: UnsafeSet { pieces },
            horizon: raw.horizon,
            min_width: raw.min_width,
        })?;
        let doc = Self {
            name: raw.name,
            plant: raw.plant,
            task,
            obstacles: raw.obstacles,
            synthesis: raw.synthesis,
            controller: raw.controller,
            simulation: raw.simulation,
        };
        doc.check_settings()?;
        Ok(doc)
    }

    fn check_settings(&self) -> Result<()> {
        let mut issues = Vec::new();
        if !(self.synthesis.epsilon > 0.0) {
            issues.push(format!("synthesis.epsilon must be positive, got {}", self.synthesis.epsilon));
        }
        if !(self.simulation.dt > 0.0) {
            issues.push(format!("simulation.dt must be positive, got {}", self.simulation.dt));
        }
        if !(self.simulation.disturbance >= 0.0) {
            issues.push("simulation.disturbance must be nonnegative".into());
        }
        if let Some(y0) = &self.simulation.initial_output {
            if y0.len() != self.task.dim() {
                issues.push(format!("simulation.initial_output has {} entries for dimension {}", y0.len(), self.task.dim()));
            }
        }
        if issues.is_empty() { Ok(()) } else { Err(Error::InvalidTask(issues)) }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Loads a file path, or a bundled task by name (`maglev`, `tasks/maglev`).
    pub fn resolve(spec: &str) -> Result<Self> {
        let (_, text) = Self::resolve_source(spec)?;
        Self::from_json(&text)
    }

    /// Where `spec` resolves to (a path or `bundled:<name>`) and the raw text.
    pub fn resolve_source(spec: &str) -> Result<(String, String)> {
        let path = Path::new(spec);
        if path.exists() {
            return Ok((spec.to_string(), std::fs::read_to_string(path)?));
        }
        let name = spec.trim_start_matches("tasks/").trim_end_matches(".json");
        match bundled(name) {
            Some(text) => Ok((format!("bundled:{name}"), text.to_string())),
            None => Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("no task file or bundled task named `{spec}`"),
            ))),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let raw = RawDocument {
            name: self.name.clone(),
            plant: self.plant.clone(),
            workspace: self.task.workspace.clone(),
            initial: self.task.initial.clone(),
            target: self.task.target.clone(),
            obstacles: self.obstacles.clone(),
            horizon: self.task.horizon,
            min_width: self.task.min_width.clone(),
            synthesis: self.synthesis.clone(),
            controller: self.controller.clone(),
            simulation: self.simulation.clone(),
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }

    /// Initial output: configured, or the center of the initial box.
    pub fn initial_output(&self) -> Vec<f64> {
        self.simulation.initial_output.clone().unwrap_or_else(|| {
            let b = &self.task.initial;
            b.lower.iter().zip(&b.upper).map(|(l, u)| 0.5 * (l + u)).collect()
        })
    }
}

pub const BUNDLED_TASKS: [&str; 5] = ["robot1", "robot2", "scara", "maglev", "drone"];

pub fn bundled(name: &str) -> Option<&'static str> {
    Some(match name {
        "robot1" => include_str!("../../../tasks/robot1.json"),
        "robot2" => include_str!("../../../tasks/robot2.json"),
        "scara" => include_str!("../../../tasks/scara.json"),
        "maglev" => include_str!("../../../tasks/maglev.json"),
        "drone" => include_str!("../../../tasks/drone.json"),
        _ => return None,
    })
}
