//! Three-parameter reverse Weibull maximum likelihood fit.
//!
//! Density for `x < mu`: `(k/s) z^(k-1) exp(-z^k)` with `z = (mu - x)/s`.

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct WeibullFit {
    pub location: f64,
    pub scale: f64,
    pub shape: f64,
    pub converged: bool,
}

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

/// Nelder-Mead simplex search. Stops when both the spread of function values
/// and the simplex diameter fall below `tol`.
pub(crate) fn nelder_mead<F>(f: F, x0: &[f64], step: f64, tol: f64, max_iter: usize) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut converged = false;

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        let diameter = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread.abs() <= tol && diameter <= tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |coef: f64| -> Vec<f64> {
            centroid.iter().zip(&pts[n]).map(|(c, w)| c + coef * (w - c)).collect()
        };

        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(-0.5);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = pts[i].iter().zip(&pts[0]).map(|(p, b)| b + 0.5 * (p - b)).collect();
            vals[i] = f(&shrunk);
            pts[i] = shrunk;
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    Minimum { x: pts[best].clone(), value: vals[best], converged }
}

fn neg_log_likelihood(z: &[f64], mu: f64, scale: f64, shape: f64) -> f64 {
    let m = z.len() as f64;
    let mut sum_log = 0.0;
    let mut sum_pow = 0.0;
    for &x in z {
        let d = mu - x;
        if d <= 0.0 {
            return f64::INFINITY;
        }
        let r = d / scale;
        sum_log += r.ln();
        sum_pow += r.powf(shape);
    }
    let ll = m * (shape / scale).ln() + (shape - 1.0) * sum_log - sum_pow;
    if ll.is_finite() { -ll } else { f64::INFINITY }
}

/// Fits the batch maxima. Returns `None` when the data are degenerate
/// (fewer than three points or zero spread).
///
/// The search runs on standardized data with `mu = max + e^a`,
/// `scale = e^b` and `shape = 1 + e^c`. Shapes below one make the likelihood
/// unbounded as `mu` approaches the sample maximum, so they are excluded.
pub(crate) fn fit_reverse_weibull(samples: &[f64]) -> Option<WeibullFit> {
    let m = samples.len();
    if m < 3 || samples.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / m as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 1e-12 * (1.0 + mean.abs())) {
        return None;
    }
    let z: Vec<f64> = samples.iter().map(|v| (v - mean) / sd).collect();
    let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let objective = |p: &[f64]| {
        if p.iter().any(|v| v.abs() > 30.0) {
            return f64::INFINITY;
        }
        neg_log_likelihood(&z, zmax + p[0].exp(), p[1].exp(), 1.0 + p[2].exp())
    };
    // location just above the sample max, unit scale, shape close to one
    let x0 = [(0.1f64).ln(), 0.0, (0.01f64).ln()];
    let first = nelder_mead(objective, &x0, 0.5, 1e-8, 4000);
    // a restart from the optimum guards against premature collapse
    let best = nelder_mead(objective, &first.x, 0.1, 1e-8, 4000);
    if !best.value.is_finite() {
        return None;
    }
    let p = &best.x;
    Some(WeibullFit {
        location: mean + sd * (zmax + p[0].exp()),
        scale: sd * p[1].exp(),
        shape: 1.0 + p[2].exp(),
        converged: best.converged,
    })
}
