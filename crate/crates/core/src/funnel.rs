//! Closed-form tube-following control law with exponentially narrowing
//! funnels for the lower stages of a pure-feedback chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tube::Tube;

pub const DEFAULT_CLAMP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XiDenominator {
    /// `1 - e^T e`, shared by every component.
    #[default]
    Scalar,
    /// `1 - e_i^2` per component.
    Componentwise,
}

/// Normalized error, transformed error and the diagonal of `xi` for one stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageErrors {
    pub e: Vec<f64>,
    pub transformed: Vec<f64>,
    pub xi: Vec<f64>,
    /// The raw error left the admissible set and was clamped.
    pub outside: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClampOptions {
    pub delta: f64,
    pub denominator: XiDenominator,
}

impl Default for ClampOptions {
    fn default() -> Self {
        Self { delta: DEFAULT_CLAMP, denominator: XiDenominator::Scalar }
    }
}

/// Shared tail of both stages: `raw_e = (x - center) / half_or_full`,
/// `xi_i = 4 / width_i / denominator`.
fn transform(mut e: Vec<f64>, widths: &[f64], opts: &ClampOptions) -> StageErrors {
    let d = opts.delta;
    let mut outside = false;
    for v in e.iter_mut() {
        let c = v.clamp(-1.0 + d, 1.0 - d);
        // NaN also counts as leaving the set
        if c != *v {
            outside = true;
            *v = if v.is_nan() { 0.0 } else { c };
        }
    }
    let transformed: Vec<f64> = e.iter().map(|v| ((1.0 + v) / (1.0 - v)).ln()).collect();
    let xi = match opts.denominator {
        XiDenominator::Scalar => {
            let sq: f64 = e.iter().map(|v| v * v).sum();
            if sq > 1.0 - d {
                outside = true;
            }
            let den = (1.0 - sq).max(d);
            widths.iter().map(|w| 4.0 / w / den).collect()
        }
        XiDenominator::Componentwise => {
            widths.iter().zip(&e).map(|(w, v)| 4.0 / w / (1.0 - v * v)).collect()
        }
    };
    StageErrors { e, transformed, xi, outside }
}

/// `e_1 = (2 x_1 - (gamma_U + gamma_L)) / (gamma_U - gamma_L)` per component.
pub fn stage1_errors(x1: &[f64], t: f64, tube: &Tube, opts: &ClampOptions) -> StageErrors {
    let b = tube.bounds_at(t);
    let widths: Vec<f64> = b.upper.iter().zip(&b.lower).map(|(u, l)| u - l).collect();
    let e = (0..x1.len())
        .map(|i| (2.0 * x1[i] - (b.upper[i] + b.lower[i])) / widths[i])
        .collect();
    transform(e, &widths, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunnelSpec {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub mu: Vec<f64>,
    pub gain: f64,
}

impl FunnelSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.p.len();
        if self.q.len() != n || self.mu.len() != n {
            return Err(Error::Dimension("funnel p, q, mu lengths differ".into()));
        }
        for i in 0..n {
            if !(self.p[i] > self.q[i] && self.q[i] > 0.0 && self.mu[i] >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "funnel component {i} needs p > q > 0 and mu >= 0, got p={}, q={}, mu={}",
                    self.p[i], self.q[i], self.mu[i]
                )));
            }
        }
        if !(self.gain > 0.0) {
            return Err(Error::InvalidArgument(format!("funnel gain must be positive, got {}", self.gain)));
        }
        Ok(())
    }

    /// `(p - q) e^(-mu t) + q`
    pub fn radius(&self, i: usize, t: f64) -> f64 {
        (self.p[i] - self.q[i]) * (-self.mu[i] * t).exp() + self.q[i]
    }
}

pub fn stagek_errors(xk: &[f64], rk: &[f64], t: f64, spec: &FunnelSpec, opts: &ClampOptions) -> StageErrors {
    let radii: Vec<f64> = (0..xk.len()).map(|i| spec.radius(i, t)).collect();
    let e = (0..xk.len()).map(|i| (xk[i] - rk[i]) / radii[i]).collect();
    transform(e, &radii, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageOneLaw {
    pub tube: Tube,
    pub gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerStack {
    pub stage1: StageOneLaw,
    /// Stages `2..=N`.
    pub stages: Vec<FunnelSpec>,
    pub clamp: ClampOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlOutput {
    pub u: Vec<f64>,
    /// `r_2 ..= r_N`.
    pub references: Vec<Vec<f64>>,
    /// Per stage: the error was clamped.
    pub outside: Vec<bool>,
}

/// Options for [`ControllerStack::auto`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoFunnel {
    /// `kappa_1 ..= kappa_N`; missing entries default to 1.
    pub gains: Vec<f64>,
    pub p_scale: f64,
    pub p_offset: f64,
    pub q_ratio: f64,
    /// `mu = mu_rate / t_c`.
    pub mu_rate: f64,
    pub clamp: ClampOptions,
}

impl Default for AutoFunnel {
    fn default() -> Self {
        Self { gains: Vec::new(), p_scale: 1.1, p_offset: 0.1, q_ratio: 0.05, mu_rate: 3.0, clamp: ClampOptions::default() }
    }
}

fn scaled(gain: f64, e: &StageErrors) -> Vec<f64> {
    e.transformed.iter().zip(&e.xi).map(|(v, x)| -gain * x * v).collect()
}

impl ControllerStack {
    pub fn new(stage1: StageOneLaw, stages: Vec<FunnelSpec>, clamp: ClampOptions) -> Result<Self> {
        if !(stage1.gain > 0.0) {
            return Err(Error::InvalidArgument(format!("stage 1 gain must be positive, got {}", stage1.gain)));
        }
        let n = stage1.tube.dim();
        for s in &stages {
            s.validate()?;
            if s.p.len() != n {
                return Err(Error::Dimension(format!("funnel has {} components, tube has {n}", s.p.len())));
            }
        }
        if !(clamp.delta > 0.0 && clamp.delta < 0.5) {
            return Err(Error::InvalidArgument(format!("clamp delta must lie in (0, 0.5), got {}", clamp.delta)));
        }
        Ok(Self { stage1, stages, clamp })
    }

    /// Number of stages `N`.
    pub fn depth(&self) -> usize {
        self.stages.len() + 1
    }

    pub fn dim(&self) -> usize {
        self.stage1.tube.dim()
    }

    fn gain(&self, k: usize) -> f64 {
        if k == 0 { self.stage1.gain } else { self.stages[k - 1].gain }
    }

    /// Builds funnels from the initial stage states: `p = p_scale |x_k(0) - r_k(0)| + p_offset`,
    /// `q = q_ratio p`, `mu = mu_rate / t_c`. With the scalar denominator the
    /// scale is multiplied by `sqrt(n)` so that `e^T e < 1` at the start.
    pub fn auto(tube: &Tube, initial: &[Vec<f64>], cfg: &AutoFunnel) -> Result<Self> {
        let depth = initial.len();
        if depth == 0 {
            return Err(Error::InvalidArgument("controller needs at least one stage".into()));
        }
        let n = tube.dim();
        if initial.iter().any(|x| x.len() != n) {
            return Err(Error::Dimension(format!("stage states must have {n} components")));
        }
        let gain = |k: usize| cfg.gains.get(k).copied().unwrap_or(1.0);
        let mut stack = Self::new(StageOneLaw { tube: tube.clone(), gain: gain(0) }, Vec::new(), cfg.clamp)?;
        let e1 = stage1_errors(&initial[0], 0.0, tube, &cfg.clamp);
        if e1.outside {
            return Err(Error::InvalidArgument("initial output is not strictly inside the tube".into()));
        }
        let mut r = scaled(gain(0), &e1);
        let p_scale = match cfg.clamp.denominator {
            XiDenominator::Scalar => cfg.p_scale * (n as f64).sqrt(),
            XiDenominator::Componentwise => cfg.p_scale,
        };
        for (k, xk) in initial.iter().enumerate().skip(1) {
            let p: Vec<f64> = (0..n).map(|i| p_scale * (xk[i] - r[i]).abs() + cfg.p_offset).collect();
            let spec = FunnelSpec {
                q: p.iter().map(|v| cfg.q_ratio * v).collect(),
                mu: vec![cfg.mu_rate / tube.horizon; n],
                p,
                gain: gain(k),
            };
            spec.validate()?;
            for i in 0..n {
                if !(spec.p[i] > (xk[i] - r[i]).abs()) {
                    return Err(Error::InvalidArgument(format!("funnel {k} does not contain the initial error")));
                }
            }
            let ek = stagek_errors(xk, &r, 0.0, &spec, &cfg.clamp);
            r = scaled(spec.gain, &ek);
            stack.stages.push(spec);
        }
        Ok(stack)
    }

    /// Evaluates `r_2, ..., r_N` and `u = r_{N+1}` from the stage states.
    pub fn control(&self, states: &[&[f64]], t: f64) -> Result<ControlOutput> {
        if states.len() != self.depth() {
            return Err(Error::Dimension(format!("expected {} stage states, got {}", self.depth(), states.len())));
        }
        let mut outside = Vec::with_capacity(states.len());
        let e1 = stage1_errors(states[0], t, &self.stage1.tube, &self.clamp);
        outside.push(e1.outside);
        let mut r = scaled(self.gain(0), &e1);
        let mut references = Vec::with_capacity(self.stages.len());
        for (k, spec) in self.stages.iter().enumerate() {
            let ek = stagek_errors(states[k + 1], &r, t, spec, &self.clamp);
            outside.push(ek.outside);
            references.push(r);
            r = scaled(self.gain(k + 1), &ek);
        }
        Ok(ControlOutput { u: r, references, outside })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_tube() -> Tube {
        Tube::from_coeffs(vec![vec![0.0]], vec![vec![2.0]], 5.0).unwrap()
    }

    #[test]
    fn centered_state_gives_zero_control() {
        let stack = ControllerStack::new(
            StageOneLaw { tube: unit_tube(), gain: 1.0 },
            vec![FunnelSpec { p: vec![2.0], q: vec![0.1], mu: vec![1.0], gain: 1.0 }],
            ClampOptions::default(),
        )
        .unwrap();
        let out = stack.control(&[&[1.0], &[0.0]], 0.3).unwrap();
        assert_eq!(out.u, vec![0.0]);
        assert_eq!(out.references, vec![vec![0.0]]);
    }

    #[test]
    fn stage_one_scalar_substitution() {
        let e = stage1_errors(&[1.5], 0.0, &unit_tube(), &ClampOptions::default());
        assert!((e.e[0] - 0.5).abs() < 1e-15);
        assert!((e.transformed[0] - 3f64.ln()).abs() < 1e-15);
        let stack = ControllerStack::new(StageOneLaw { tube: unit_tube(), gain: 1.0 }, vec![], ClampOptions::default()).unwrap();
        let u = stack.control(&[&[1.5]], 0.0).unwrap().u[0];
        let expected = -(4.0 / 2.0) / (1.0 - 0.25) * 3f64.ln();
        assert!((u - expected).abs() < 1e-12);
        assert!((u + 2.930).abs() < 1e-3);
    }

    #[test]
    fn stage_k_substitution_and_asymptote() {
        let spec = FunnelSpec { p: vec![2.0], q: vec![0.1], mu: vec![1.0], gain: 1.0 };
        let e = stagek_errors(&[1.0], &[0.0], 0.0, &spec, &ClampOptions::default());
        assert!((e.e[0] - 0.5).abs() < 1e-15);
        assert!((e.transformed[0] - 3f64.ln()).abs() < 1e-15);
        let late = stagek_errors(&[0.05], &[0.0], 60.0, &spec, &ClampOptions::default());
        assert!((late.e[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn clamp_bounds_transformed_error() {
        let opts = ClampOptions::default();
        let e = stage1_errors(&[5.0], 0.0, &unit_tube(), &opts);
        assert!(e.outside);
        let bound = ((2.0 - opts.delta) / opts.delta).ln();
        assert!((e.transformed[0] - bound).abs() < 1e-9);
    }

    #[test]
    fn scalar_denominator_flags_corner_states() {
        let tube = Tube::from_coeffs(vec![vec![0.0], vec![0.0]], vec![vec![2.0], vec![2.0]], 1.0).unwrap();
        // both components at e = 0.8 so e^T e = 1.28
        let opts = ClampOptions::default();
        let e = stage1_errors(&[1.8, 1.8], 0.0, &tube, &opts);
        assert!(e.outside);
        assert!(e.xi.iter().all(|v| v.is_finite() && *v > 0.0));
        let c = stage1_errors(&[1.8, 1.8], 0.0, &tube, &ClampOptions { denominator: XiDenominator::Componentwise, ..opts });
        assert!(!c.outside);
        assert!((c.xi[0] - 2.0 / 0.36).abs() < 1e-12);
    }

    #[test]
    fn control_opposes_boundary_approach() {
        let stack = ControllerStack::new(StageOneLaw { tube: unit_tube(), gain: 2.0 }, vec![], ClampOptions::default()).unwrap();
        for x in [0.1, 0.7, 1.3, 1.95] {
            let u = stack.control(&[&[x]], 1.0).unwrap().u[0];
            assert!(u * (x - 1.0) < 0.0, "x={x} u={u}");
        }
    }

    #[test]
    fn auto_funnel_contains_initial_error() {
        let tube = Tube::from_coeffs(vec![vec![0.0], vec![0.0]], vec![vec![2.0], vec![1.0]], 4.0).unwrap();
        let stack = ControllerStack::auto(&tube, &[vec![1.4, 0.2], vec![0.3, -0.7]], &AutoFunnel::default()).unwrap();
        assert_eq!(stack.depth(), 2);
        let out = stack.control(&[&[1.4, 0.2], &[0.3, -0.7]], 0.0).unwrap();
        assert!(out.outside.iter().all(|o| !o));
        let f = &stack.stages[0];
        assert!((f.mu[0] - 0.75).abs() < 1e-15);
        assert!((f.q[1] - 0.05 * f.p[1]).abs() < 1e-15);
    }

    #[test]
    fn auto_rejects_start_outside_tube() {
        assert!(ControllerStack::auto(&unit_tube(), &[vec![2.5]], &AutoFunnel::default()).is_err());
    }
}
