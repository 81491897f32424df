//! Spatiotemporal tubes: per-dimension lower/upper boundary curves expressed
//! in a monomial basis of time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;
use crate::task::Hyperbox;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Monomial,
}

/// Basis `{1, t, ..., t^degree}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub degree: usize,
}

impl BasisSpec {
    pub fn monomial(degree: usize) -> Self {
        Self { kind: BasisKind::Monomial, degree }
    }

    /// Number of coefficients per curve.
    pub fn len(&self) -> usize {
        self.degree + 1
    }
}

/// One boundary curve `gamma(t) = sum_k c_k t^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoundaryCurve {
    pub coeffs: Vec<f64>,
}

impl BoundaryCurve {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn eval(&self, t: f64) -> f64 {
        poly::eval(&self.coeffs, t)
    }

    pub fn eval_derivative(&self, t: f64) -> f64 {
        poly::eval_derivative(&self.coeffs, t)
    }

    /// `max |gamma'(t)|` on `[0, horizon]`, from the derivative's critical
    /// points and the interval endpoints.
    pub fn analytic_lipschitz(&self, horizon: f64) -> f64 {
        poly::max_abs(&poly::derivative(&self.coeffs), 0.0, horizon)
    }

    /// `|gamma(a) - gamma(b)| / |a - b|` without cancellation.
    pub fn secant_slope(&self, a: f64, b: f64) -> f64 {
        poly::divided_difference(&self.coeffs, a, b).abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    pub basis: BasisSpec,
    pub horizon: f64,
    pub lower: Vec<BoundaryCurve>,
    pub upper: Vec<BoundaryCurve>,
}

impl Tube {
    /// Builds a tube and checks `lower < upper` on the whole horizon.
    pub fn new(lower: Vec<BoundaryCurve>, upper: Vec<BoundaryCurve>, horizon: f64) -> Result<Self> {
        let tube = Self::new_unchecked(lower, upper, horizon)?;
        if let Some((i, t)) = tube.first_crossing() {
            return Err(Error::InvalidArgument(format!(
                "tube lower curve meets upper curve in dimension {i} near t = {t}"
            )));
        }
        Ok(tube)
    }

    /// Like [`Tube::new`] but accepts curves that touch or cross; used for
    /// synthesis results with a positive optimum and for parsing, so that the
    /// checker can report the problem instead of the loader.
    pub fn new_unchecked(lower: Vec<BoundaryCurve>, upper: Vec<BoundaryCurve>, horizon: f64) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Dimension(format!(
                "tube has {} lower and {} upper curves",
                lower.len(),
                upper.len()
            )));
        }
        let degree = lower
            .iter()
            .chain(&upper)
            .map(|c| c.coeffs.len().saturating_sub(1))
            .max()
            .unwrap_or(0);
        if lower.iter().chain(&upper).any(|c| c.coeffs.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidArgument("non-finite tube coefficient".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("tube horizon must be positive, got {horizon}")));
        }
        Ok(Self { basis: BasisSpec::monomial(degree), horizon, lower, upper })
    }

    /// True when `lower < upper` holds on the whole horizon.
    pub fn is_proper(&self) -> bool {
        self.first_crossing().is_none()
    }

    pub fn from_coeffs(lower: Vec<Vec<f64>>, upper: Vec<Vec<f64>>, horizon: f64) -> Result<Self> {
        Self::new(
            lower.into_iter().map(BoundaryCurve::new).collect(),
            upper.into_iter().map(BoundaryCurve::new).collect(),
            horizon,
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Smallest `gamma_U - gamma_L` over the horizon, per dimension.
    pub fn min_gap(&self, i: usize) -> f64 {
        poly::range(&self.gap_poly(i), 0.0, self.horizon).0
    }

    fn gap_poly(&self, i: usize) -> Vec<f64> {
        let (lo, hi) = (&self.lower[i].coeffs, &self.upper[i].coeffs);
        let len = lo.len().max(hi.len());
        (0..len)
            .map(|k| hi.get(k).copied().unwrap_or(0.0) - lo.get(k).copied().unwrap_or(0.0))
            .collect()
    }

    fn first_crossing(&self) -> Option<(usize, f64)> {
        (0..self.dim()).find_map(|i| {
            let gap = self.gap_poly(i);
            if poly::range(&gap, 0.0, self.horizon).0 > 0.0 {
                return None;
            }
            let t = (0..=1000)
                .map(|s| self.horizon * s as f64 / 1000.0)
                .find(|&t| poly::eval(&gap, t) <= 0.0)
                .unwrap_or(0.0);
            Some((i, t))
        })
    }

    pub fn bounds_at(&self, t: f64) -> Hyperbox {
        Hyperbox {
            lower: self.lower.iter().map(|c| c.eval(t)).collect(),
            upper: self.upper.iter().map(|c| c.eval(t)).collect(),
        }
    }

    pub fn center_at(&self, t: f64) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l.eval(t) + u.eval(t)))
            .collect()
    }

    /// `(L_L, L_U)`: largest analytic slope bound over the lower and upper curves.
    pub fn analytic_lipschitz(&self) -> (f64, f64) {
        let max_of = |curves: &[BoundaryCurve]| {
            curves
                .iter()
                .map(|c| c.analytic_lipschitz(self.horizon))
                .fold(0.0, f64::max)
        };
        (max_of(&self.lower), max_of(&self.upper))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Tube = serde_json::from_str(text)?;
        let basis = raw.basis;
        let mut tube = Tube::new_unchecked(raw.lower, raw.upper, raw.horizon)?;
        tube.basis = basis;
        Ok(tube)
    }
}
