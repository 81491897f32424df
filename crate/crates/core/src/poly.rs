//! Dense univariate polynomials stored as ascending coefficient slices,
//! `c[0] + c[1] t + ... + c[d] t^d`.

pub fn eval(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

pub fn eval_derivative(coeffs: &[f64], t: f64) -> f64 {
    // Horner on the derivative without allocating.
    let mut acc = 0.0;
    for k in (1..coeffs.len()).rev() {
        acc = acc * t + k as f64 * coeffs[k];
    }
    acc
}

/// Secant slope `(p(a) - p(b)) / (a - b)` evaluated through the complete
/// homogeneous sums `sum_j a^j b^(k-1-j)`, so no cancellation occurs for
/// nearby `a`, `b`. Equals `p'(a)` when `a == b`.
pub fn divided_difference(coeffs: &[f64], a: f64, b: f64) -> f64 {
    let mut h = 1.0; // h_{k-1}(a, b)
    let mut b_pow = 1.0;
    let mut sum = 0.0;
    for (k, &c) in coeffs.iter().enumerate().skip(1) {
        if k > 1 {
            b_pow *= b;
            h = a * h + b_pow;
        }
        sum += c * h;
    }
    sum
}

/// Strip trailing zero coefficients.
fn trimmed(coeffs: &[f64]) -> &[f64] {
    let mut end = coeffs.len();
    while end > 0 && coeffs[end - 1] == 0.0 {
        end -= 1;
    }
    &coeffs[..end]
}

/// Real roots of the polynomial inside `[a, b]`, sorted ascending.
///
/// The interval is split at the critical points (roots of the derivative,
/// found recursively) so that each piece is monotone; a sign change on a
/// piece is then isolated by bisection.
pub fn real_roots(coeffs: &[f64], a: f64, b: f64) -> Vec<f64> {
    let c = trimmed(coeffs);
    if c.len() <= 1 || !(a <= b) {
        return Vec::new();
    }
    if c.len() == 2 {
        let r = -c[0] / c[1];
        return if r >= a && r <= b { vec![r] } else { Vec::new() };
    }
    let mut knots = vec![a];
    knots.extend(real_roots(&derivative(c), a, b));
    knots.push(b);

    let mut roots: Vec<f64> = Vec::new();
    for w in knots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (flo, fhi) = (eval(c, lo), eval(c, hi));
        let root = if flo == 0.0 {
            Some(lo)
        } else if fhi == 0.0 {
            Some(hi)
        } else if flo.signum() != fhi.signum() {
            Some(bisect(c, lo, hi, flo))
        } else {
            None
        };
        if let Some(r) = root {
            if roots.last().map_or(true, |&last| (r - last).abs() > 1e-14 * (1.0 + r.abs())) {
                roots.push(r);
            }
        }
    }
    roots
}

fn bisect(c: &[f64], mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = eval(c, mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact range `(min, max)` of the polynomial over `[a, b]`.
pub fn range(coeffs: &[f64], a: f64, b: f64) -> (f64, f64) {
    let mut lo = eval(coeffs, a).min(eval(coeffs, b));
    let mut hi = eval(coeffs, a).max(eval(coeffs, b));
    for r in real_roots(&derivative(coeffs), a, b) {
        let v = eval(coeffs, r);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// `max |p(t)|` over `[a, b]`.
pub fn max_abs(coeffs: &[f64], a: f64, b: f64) -> f64 {
    let (lo, hi) = range(coeffs, a, b);
    lo.abs().max(hi.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_matches_naive() {
        let c = [1.0, -2.0, 0.5, 3.0];
        let t: f64 = 1.7;
        let naive = 1.0 - 2.0 * t + 0.5 * t * t + 3.0 * t.powi(3);
        assert!((eval(&c, t) - naive).abs() < 1e-12);
        assert_eq!(eval(&[], 3.0), 0.0);
    }

    #[test]
    fn roots_of_cubic() {
        // (t - 1)(t - 2)(t - 3)
        let c = [-6.0, 11.0, -6.0, 1.0];
        let r = real_roots(&c, 0.0, 5.0);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert_eq!(real_roots(&c, 1.5, 1.9).len(), 0);
    }

    #[test]
    fn double_root_touching_zero() {
        // (t - 1)^2 touches zero at t = 1
        let r = real_roots(&[1.0, -2.0, 1.0], 0.0, 3.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn range_of_parabola() {
        let (lo, hi) = range(&[0.0, -2.0, 1.0], 0.0, 5.0);
        assert!((lo + 1.0).abs() < 1e-14);
        assert!((hi - 15.0).abs() < 1e-12);
    }

    #[test]
    fn divided_difference_is_exact_for_lines() {
        let c = [2.0, 3.0];
        assert_eq!(divided_difference(&c, 1.0, 1.0 + 1e-12), 3.0);
        let q = [1.0, 0.2377, 0.0925];
        let (a, b) = (1.3, 2.9);
        let direct = (eval(&q, a) - eval(&q, b)) / (a - b);
        assert!((divided_difference(&q, a, b) - direct).abs() < 1e-13);
        assert!((divided_difference(&q, 2.0, 2.0) - eval_derivative(&q, 2.0)).abs() < 1e-14);
    }
}
