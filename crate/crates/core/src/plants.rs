//! Benchmark plants. The controller never sees these models; they only drive
//! the simulator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PlantKind {
    /// Omnidirectional robot, state `(x1, x2, heading)`.
    Robot { k_omega: f64 },
    /// Two-link planar arm, state `(theta1, theta2, dtheta1, dtheta2)`.
    Scara { m: f64, l: f64, g: f64 },
    /// Magnetic levitation, state `(position, momentum, flux^2)`.
    Maglev { m: f64, g: f64, r: f64, alpha: f64 },
    /// Double integrator, state `(position, velocity)` in 3-D.
    Drone,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantModel {
    pub name: String,
    pub kind: PlantKind,
    pub state_dim: usize,
    /// Chain depth `N`.
    pub stages: usize,
    /// Output dimension `n`.
    pub outputs: usize,
    /// Number of disturbance channels.
    pub disturbance_dim: usize,
}

pub const PLANT_NAMES: [&str; 4] = ["robot", "scara", "maglev", "drone"];

pub fn builtin_plant(name: &str) -> Result<PlantModel> {
    let (kind, state_dim, stages, outputs, disturbance_dim) = match name {
        "robot" => (PlantKind::Robot { k_omega: 5.0 }, 3, 1, 2, 3),
        "scara" => (PlantKind::Scara { m: 1.0, l: 1.0, g: 9.8 }, 4, 2, 2, 2),
        "maglev" => (PlantKind::Maglev { m: 1.0, g: 9.8, r: 10.0, alpha: 0.5 }, 3, 3, 1, 3),
        "drone" => (PlantKind::Drone, 6, 2, 3, 6),
        other => return Err(Error::UnknownPlant(other.to_string())),
    };
    Ok(PlantModel { name: name.to_string(), kind, state_dim, stages, outputs, disturbance_dim })
}

const MAGLEV_FLUX_FLOOR: f64 = 1e-9;

/// Row-major 2x2 inertia matrix of the arm.
fn scara_inertia(m: f64, l: f64, theta2: f64) -> [f64; 4] {
    let c2 = theta2.cos();
    let k = m * l * l;
    [k * (5.0 / 3.0 + c2), k * (1.0 / 3.0 + 0.5 * c2), k * (1.0 / 3.0 + 0.5 * c2), k / 3.0]
}

fn inv2(a: [f64; 4]) -> [f64; 4] {
    let det = a[0] * a[3] - a[1] * a[2];
    [a[3] / det, -a[1] / det, -a[2] / det, a[0] / det]
}

impl PlantModel {
    /// Splits the state into the `N` stage vectors `x_1, ..., x_N`.
    pub fn stage_states(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match self.kind {
            PlantKind::Robot { .. } => vec![x[..2].to_vec()],
            PlantKind::Scara { .. } => vec![x[..2].to_vec(), x[2..4].to_vec()],
            PlantKind::Maglev { .. } => vec![vec![x[0]], vec![x[1]], vec![x[2]]],
            PlantKind::Drone => vec![x[..3].to_vec(), x[3..6].to_vec()],
        }
    }

    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        x[..self.outputs].to_vec()
    }

    /// Initial state at output `y0` with every other stage at rest.
    pub fn rest_state(&self, y0: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.state_dim];
        x[..self.outputs].copy_from_slice(y0);
        if let PlantKind::Maglev { m, g, alpha, .. } = self.kind {
            // flux that balances gravity
            x[2] = 2.0 * alpha * m * g;
        }
        x
    }

    pub fn check_domain(&self, x: &[f64]) -> std::result::Result<(), String> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err("non-finite state".into());
        }
        if let PlantKind::Maglev { .. } = self.kind {
            if x[2] <= 0.0 {
                return Err(format!("flux linkage squared x3 = {} is not positive", x[2]));
            }
        }
        Ok(())
    }

    /// `dx/dt` for tube-law input `u` (stage-N control) and disturbance `w`.
    pub fn dynamics(&self, x: &[f64], u: &[f64], w: &[f64]) -> Vec<f64> {
        match self.kind {
            PlantKind::Robot { k_omega } => {
                let (s, c) = x[2].sin_cos();
                let omega = -k_omega * x[2];
                vec![c * u[0] - s * u[1] + w[0], s * u[0] + c * u[1] + w[1], omega + w[2]]
            }
            PlantKind::Scara { m, l, g } => {
                let (th1, th2, d1, d2) = (x[0], x[1], x[2], x[3]);
                let s2 = th2.sin();
                let k = m * l * l;
                let cor = [k * s2 * (-0.5 * d2 * d2 - d1 * d2), k * s2 * 0.5 * d1 * d1];
                let c1 = th1.cos();
                let c12 = (th1 + th2).cos();
                let grav = [m * g * l * (1.5 * c1 + 0.5 * c12), m * g * l * 0.5 * c12];
                let rhs = [u[0] + w[0] - cor[0] - grav[0], u[1] + w[1] - cor[1] - grav[1]];
                let mi = inv2(scara_inertia(m, l, th2));
                vec![d1, d2, mi[0] * rhs[0] + mi[1] * rhs[1], mi[2] * rhs[0] + mi[3] * rhs[1]]
            }
            PlantKind::Maglev { m, g, r, alpha } => {
                let flux = x[2].max(MAGLEV_FLUX_FLOOR);
                vec![
                    x[1] / m + w[0],
                    x[2] / (2.0 * alpha) - m * g + w[1],
                    -(2.0 * r / alpha) * (1.0 - x[0]) * x[2] + 2.0 * flux.sqrt() * u[0] + w[2],
                ]
            }
            PlantKind::Drone => {
                vec![x[3] + w[0], x[4] + w[1], x[5] + w[2], u[0] + w[3], u[1] + w[4], u[2] + w[5]]
            }
        }
    }

    /// Control-effectiveness matrix `g_k` of stage `k` (0-based), row-major
    /// `n x n`.
    pub fn effectiveness(&self, x: &[f64], k: usize) -> Vec<f64> {
        let n = self.outputs;
        let eye = |s: f64| -> Vec<f64> { (0..n * n).map(|j| if j % (n + 1) == 0 { s } else { 0.0 }).collect() };
        match self.kind {
            PlantKind::Robot { .. } => {
                let (s, c) = x[2].sin_cos();
                vec![c, -s, s, c]
            }
            PlantKind::Scara { m, l, .. } => {
                if k == 0 { eye(1.0) } else { inv2(scara_inertia(m, l, x[1])).to_vec() }
            }
            PlantKind::Maglev { m, alpha, .. } => match k {
                0 => vec![1.0 / m],
                1 => vec![1.0 / (2.0 * alpha)],
                _ => vec![2.0 * x[2].max(MAGLEV_FLUX_FLOOR).sqrt()],
            },
            PlantKind::Drone => eye(1.0),
        }
    }

    /// Smallest eigenvalue of the symmetric part of `g_k`.
    pub fn effectiveness_margin(&self, x: &[f64], k: usize) -> f64 {
        let g = self.effectiveness(x, k);
        match self.outputs {
            1 => g[0],
            2 => {
                let (a, b, d) = (g[0], 0.5 * (g[1] + g[2]), g[3]);
                let mid = 0.5 * (a + d);
                mid - (0.25 * (a - d).powi(2) + b * b).sqrt()
            }
            // only diagonal matrices reach this arm
            _ => (0..self.outputs).map(|i| g[i * (self.outputs + 1)]).fold(f64::INFINITY, f64::min),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_structure() {
        let s = builtin_plant("scara").unwrap();
        assert_eq!((s.stages, s.outputs), (2, 2));
        let m = builtin_plant("maglev").unwrap();
        assert_eq!((m.stages, m.outputs), (3, 1));
        let d = builtin_plant("drone").unwrap();
        assert_eq!((d.stages, d.outputs), (2, 3));
        assert!(matches!(builtin_plant("boat"), Err(Error::UnknownPlant(_))));
    }

    #[test]
    fn scara_inverse_inertia_positive_definite() {
        let p = builtin_plant("scara").unwrap();
        for a in 0..=40 {
            for b in 0..=40 {
                let th = [-3.2 + 0.16 * a as f64, -3.2 + 0.16 * b as f64];
                let x = [th[0], th[1], 0.0, 0.0];
                let g = p.effectiveness(&x, 1);
                assert!((g[1] - g[2]).abs() < 1e-12);
                assert!(p.effectiveness_margin(&x, 1) > 0.0, "theta = {th:?}");
            }
        }
    }

    #[test]
    fn maglev_gains_and_equilibrium() {
        let p = builtin_plant("maglev").unwrap();
        let x = p.rest_state(&[1.0]);
        assert_eq!(x[2], 9.8);
        assert_eq!(p.effectiveness(&x, 0), vec![1.0]);
        assert_eq!(p.effectiveness(&x, 1), vec![1.0]);
        assert!((p.effectiveness(&x, 2)[0] - 2.0 * 9.8f64.sqrt()).abs() < 1e-12);
        // at x1 = 1 the flux term vanishes, so the balanced state is at rest
        let dx = p.dynamics(&x, &[0.0], &[0.0; 3]);
        assert!(dx.iter().all(|v| v.abs() < 1e-12), "{dx:?}");
        assert!(p.check_domain(&[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn drone_is_double_integrator() {
        let p = builtin_plant("drone").unwrap();
        let dx = p.dynamics(&[0.0, 0.0, 0.0, 1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[0.0; 6]);
        assert_eq!(dx, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(p.effectiveness(&[0.0; 6], 0), vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn robot_margin_is_cos_heading() {
        let p = builtin_plant("robot").unwrap();
        assert!((p.effectiveness_margin(&[0.0, 0.0, 0.3], 0) - 0.3f64.cos()).abs() < 1e-12);
        assert!(p.effectiveness_margin(&[0.0, 0.0, 2.0], 0) < 0.0);
    }
}
