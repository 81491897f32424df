//! Acceptance checks, one result line per criterion.
//!
//! Runs without the libtest harness so each line is printed as it finishes.
//! Parts that cannot hold because the printed reference numbers are
//! internally inconsistent are reported as `FAIL (known)` and pinned to the
//! values they actually take; anything else that fails exits nonzero.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use stt_core::certify::{
    certify_pipeline, check_certificate, combine_lipschitz, estimate_curve, LipschitzMethod, WeibullParams,
};
use stt_core::config::{TaskDocument, BUNDLED_TASKS};
use stt_core::lp::{Bound, Constraint, LinearProgram, LpStatus};
use stt_core::oracle::OracleOptions;
use stt_core::plants::builtin_plant;
use stt_core::sampler::{build_net, verify_net};
use stt_core::sim::{evaluate_tras, rk4_step, simulate, SimOptions};
use stt_core::sop::{Budget, SopInstance, Strategy};
use stt_core::task::{validate_task, Hyperbox, RasTask, TimedRegion, UnsafeSet};
use stt_core::tube::{BasisSpec, BoundaryCurve};

// criterion 1
const MARGIN_ULPS: f64 = 2.0;
const MARGIN_TOL_2: f64 = 1e-9;
// criterion 3
const FACE_TOL: f64 = 5e-3;
// criterion 4
const MIN_RANDOM_FIELDS: usize = 5;
const FIELD_BUDGET_S: f64 = 300.0;
// criterion 5
const SOUNDNESS_INSTANCES: usize = 50;
// criterion 6
const CLOSED_LOOP_SEEDS: u64 = 20;
const CLOSED_LOOP_DISTURBANCE: f64 = 0.05;
const CLOSED_LOOP_BUDGET_S: f64 = 600.0;
// criterion 7
const WEIBULL_REPS: u64 = 100;
const WEIBULL_WINDOW: (f64, f64) = (2.85, 3.15);
const WEIBULL_MIN_HITS: usize = 95;
const LADDER_REPS: u64 = 25;
// criterion 8
const RANDOM_LPS: usize = 200;
const LP_TOL: f64 = 1e-8;
// criterion 9
const NET_PROBES: usize = 100_000;
// criterion 10
const MIN_ORDER: f64 = 3.7;

struct Outcome {
    pass: bool,
    /// Failure explained by inconsistent reference numbers.
    known: bool,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: String) -> Self {
        Self { pass, known: false, detail }
    }
}

fn bx(lo: &[f64], hi: &[f64]) -> Hyperbox {
    Hyperbox::new(lo.to_vec(), hi.to_vec()).unwrap()
}

fn synth_budget() -> Budget {
    Budget { max_lp_solves: 1500 }
}

// ---------------------------------------------------------------- 1, 2

fn criterion_1() -> Outcome {
    let a = check_certificate(-0.1, 6.1, 0.0005);
    let ulp = f64::EPSILON * 0.09695;
    let first = (a.margin - -0.09695).abs() <= MARGIN_ULPS * ulp && a.pass;
    let b = check_certificate(-0.0001, 2.623, 0.00002);
    let second = (b.margin - -0.0000475).abs() <= MARGIN_TOL_2;
    // -0.0001 + 2.623 * 2e-5 is -4.754e-5; the stated -4.75e-5 drops a digit
    let true_value = (b.margin - -4.754e-5).abs() <= 1e-15 && b.pass;
    let detail = format!("margins {:e} and {:e}", a.margin, b.margin);
    if first && !second && true_value {
        return Outcome {
            pass: false,
            known: true,
            detail: format!("{detail}; second stated as -4.75e-5 but equals -4.754e-5 (off by 4e-8 > {MARGIN_TOL_2:e})"),
        };
    }
    Outcome::check(first && second, detail)
}

fn criterion_2() -> Outcome {
    let a = combine_lipschitz(2.93, 3.17);
    let b = combine_lipschitz(1.408, 1.215);
    Outcome::check(a == 6.1 && b == 2.623, format!("L = {a} and {b}"))
}

// ---------------------------------------------------------------- 3

struct PrintedTube {
    name: &'static str,
    horizon: f64,
    lower: Vec<Vec<f64>>,
    upper: Vec<Vec<f64>>,
    start: Hyperbox,
    end: Hyperbox,
}

fn printed_tubes() -> Vec<PrintedTube> {
    let pi = std::f64::consts::PI;
    vec![
        PrintedTube {
            name: "robot case 1",
            horizon: 5.0,
            lower: vec![vec![1.0, 0.2377, 0.0925], vec![2.0, -1.9782, 0.4956]],
            upper: vec![vec![1.5, -0.0023, 0.1405], vec![2.5, -2.2183, 0.5437]],
            start: bx(&[1.0, 2.0], &[1.5, 2.5]),
            end: bx(&[4.5, 4.5], &[5.0, 5.0]),
        },
        PrintedTube {
            name: "robot case 2",
            horizon: 10.0,
            lower: vec![vec![0.0, 3.9463, -0.9857, 0.0636], vec![0.0, 0.4283, -0.0009, 0.0001]],
            upper: vec![vec![0.5, 3.8711, -0.9928, 0.0651], vec![0.5, 0.1945, 0.0422, -0.0017]],
            start: bx(&[0.0, 0.0], &[0.5, 0.5]),
            end: bx(&[4.5, 4.5], &[5.0, 5.0]),
        },
        // start and target are given as points; the tube is the point +- 0.2
        PrintedTube {
            name: "scara",
            horizon: 5.0,
            lower: vec![vec![0.3236, -0.0893, 0.1016], vec![-0.2002, 1.4496, -0.2899]],
            upper: vec![vec![0.7236, -0.3293, 0.1496], vec![0.2000, 1.2097, -0.2419]],
            start: bx(&[pi / 6.0 - 0.2, -0.2], &[pi / 6.0 + 0.2, 0.2]),
            end: bx(&[5.0 * pi / 6.0 - 0.2, -0.2], &[5.0 * pi / 6.0 + 0.2, 0.2]),
        },
        PrintedTube {
            name: "maglev",
            horizon: 5.0,
            lower: vec![vec![0.75, 2.7167, -0.5433]],
            upper: vec![vec![1.25, 2.6447, -0.5289]],
            start: bx(&[0.75], &[1.25]),
            end: bx(&[0.75], &[1.25]),
        },
        PrintedTube {
            name: "drone",
            horizon: 20.0,
            lower: vec![vec![2.75, -0.0296, -0.0054], vec![2.75, -0.1336, -0.0002], vec![0.0, 1.9175, -0.0959]],
            upper: vec![vec![3.0, -0.0396, -0.0049], vec![3.0, -0.1436, 0.0003], vec![0.25, 1.9075, -0.0954]],
            start: bx(&[2.75, 2.75, 0.0], &[3.0, 3.0, 0.25]),
            end: bx(&[0.0, 0.0, 0.0], &[0.25, 0.25, 0.25]),
        },
    ]
}

/// Faces a tube misses by more than `FACE_TOL`, as `(label, deviation)`.
fn face_misses(p: &PrintedTube) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for (t, faces, when) in [(0.0, &p.start, "0"), (p.horizon, &p.end, "t_c")] {
        for i in 0..faces.dim() {
            for (side, coeffs, face) in [("L", &p.lower[i], faces.lower[i]), ("U", &p.upper[i], faces.upper[i])] {
                let dev = BoundaryCurve::new(coeffs.clone()).eval(t) - face;
                if dev.abs() > FACE_TOL {
                    out.push((format!("{} gamma_{},{}({when})", p.name, i + 1, side), dev));
                }
            }
        }
    }
    out
}

fn criterion_3() -> Outcome {
    let tubes = printed_tubes();
    // worked example: 2 - 9.891 + 12.39 = 4.499
    let example = BoundaryCurve::new(tubes[0].lower[1].clone()).eval(5.0);
    let example_ok = (example - 4.5).abs() <= FACE_TOL;
    let misses: Vec<(String, f64)> = tubes.iter().flat_map(face_misses).collect();
    let checked: usize = tubes.iter().map(|p| 4 * p.start.dim()).sum();
    // robot case 2 at t = 10 and drone z at t = 20 do not land on their faces
    let expected: [(&str, f64); 6] = [
        ("robot case 2 gamma_1,L(t_c)", 4.493 - 4.5),
        ("robot case 2 gamma_1,U(t_c)", 5.031 - 5.0),
        ("robot case 2 gamma_2,L(t_c)", 4.293 - 4.5),
        ("robot case 2 gamma_2,U(t_c)", 4.965 - 5.0),
        ("drone gamma_3,L(t_c)", -0.01),
        ("drone gamma_3,U(t_c)", 0.24 - 0.25),
    ];
    let listed: Vec<String> = misses.iter().map(|(l, d)| format!("{l} off by {d:+.4}")).collect();
    let matches_expected = misses.len() == expected.len()
        && misses.iter().zip(&expected).all(|((l, d), (el, ed))| l == el && (d - ed).abs() < 1e-9);
    let detail = format!("{}/{checked} faces within {FACE_TOL:e}; example gives {example:.4}", checked - misses.len());
    if misses.is_empty() {
        return Outcome::check(example_ok, detail);
    }
    Outcome {
        pass: false,
        known: example_ok && matches_expected,
        detail: format!("{detail}; missed: {}", listed.join(", ")),
    }
}

// ---------------------------------------------------------------- 4, 5

/// Two-dimensional field of one to three boxes between a start in the lower
/// left and a target in the upper right; some boxes exist only for a while.
fn random_field(seed: u64) -> Option<RasTask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = 4.0 + 2.0 * rng.random::<f64>();
    let s: Vec<f64> = (0..2).map(|_| 0.5 + 0.3 * rng.random::<f64>()).collect();
    let g: Vec<f64> = (0..2).map(|_| 3.9 + 0.3 * rng.random::<f64>()).collect();
    let count = rng.random_range(1..=3);
    let pieces = (0..count)
        .map(|_| {
            let c: Vec<f64> = (0..2).map(|_| rng.random_range(1.7..3.3)).collect();
            let w: Vec<f64> = (0..2).map(|_| rng.random_range(0.3..0.9)).collect();
            let lo: Vec<f64> = (0..2).map(|i| c[i] - 0.5 * w[i]).collect();
            let hi: Vec<f64> = (0..2).map(|i| c[i] + 0.5 * w[i]).collect();
            let active = if rng.random::<f64>() < 0.5 {
                [0.0, horizon]
            } else {
                let a = rng.random_range(0.0..0.6 * horizon);
                [a, rng.random_range(a + 0.5..horizon)]
            };
            TimedRegion::fixed(&bx(&lo, &hi), active)
        })
        .collect();
    validate_task(RasTask {
        workspace: bx(&[0.0, 0.0], &[5.0, 5.0]),
        initial: bx(&s, &[s[0] + 0.6, s[1] + 0.6]),
        target: bx(&g, &[g[0] + 0.6, g[1] + 0.6]),
        unsafe_set: UnsafeSet { pieces },
        horizon,
        min_width: vec![0.1, 0.1],
    })
    .ok()
}

/// One-dimensional task with one timed band the tube has to pass.
fn random_band(seed: u64) -> Option<RasTask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = 3.0 + 3.0 * rng.random::<f64>();
    let lo = rng.random_range(0.0..1.5);
    let hi = lo + rng.random_range(0.5..2.0);
    let a = rng.random_range(0.5..0.4 * horizon);
    let b = rng.random_range(a + 0.3..horizon - 0.5);
    validate_task(RasTask {
        workspace: bx(&[0.0], &[5.0]),
        initial: bx(&[0.3], &[1.0]),
        target: bx(&[0.3], &[1.0]),
        unsafe_set: UnsafeSet { pieces: vec![TimedRegion::fixed(&bx(&[lo], &[hi]), [a, b])] },
        horizon,
        min_width: vec![0.1],
    })
    .ok()
}

struct Certified {
    eta_star: f64,
    epsilon: f64,
    /// `eta* + L eps <= 0`, independent of the oracle.
    margin_ok: bool,
    violations: usize,
}

/// Exact synthesis followed by the certificate, halving epsilon while the
/// margin is positive and the slack negative.
fn synthesize_and_certify(task: &RasTask, epsilon: f64, degree: usize, halvings: usize) -> Option<Certified> {
    let mut eps = epsilon;
    for _ in 0..=halvings {
        let net = build_net(task, eps).ok()?;
        let inst = SopInstance::assemble(task, &net, BasisSpec::monomial(degree)).ok()?;
        let res = inst.synthesize(Strategy::ExactBnb, synth_budget()).ok()?;
        if res.eta_star >= 0.0 {
            return Some(Certified { eta_star: res.eta_star, epsilon: eps, margin_ok: false, violations: 0 });
        }
        let out = certify_pipeline(&res.tube, res.eta_star, task, eps, LipschitzMethod::Analytic, 0, &OracleOptions::for_task(task))
            .ok()?;
        let c = Certified {
            eta_star: res.eta_star,
            epsilon: eps,
            margin_ok: out.certificate.pass,
            violations: out.oracle.violations.len(),
        };
        if c.margin_ok {
            return Some(c);
        }
        eps *= 0.5;
    }
    None
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let maglev = TaskDocument::resolve("maglev").unwrap();
    let m = synthesize_and_certify(&maglev.task, maglev.synthesis.epsilon, maglev.synthesis.degree, 0);
    let maglev_ok = m.as_ref().is_some_and(|c| c.eta_star < 0.0 && c.margin_ok && c.violations == 0);

    let mut negative = 0;
    let mut certified = 0;
    let mut failures = Vec::new();
    for seed in 0..20u64 {
        if certified >= MIN_RANDOM_FIELDS + 3 {
            break;
        }
        let Some(task) = random_field(seed) else { continue };
        let Some(c) = synthesize_and_certify(&task, 0.05, 2, 2) else { continue };
        if c.eta_star < 0.0 {
            negative += 1;
            if c.margin_ok && c.violations == 0 {
                certified += 1;
            } else {
                failures.push(format!("seed {seed}: eta* {:.4} eps {} violations {}", c.eta_star, c.epsilon, c.violations));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::check(
        maglev_ok && certified >= MIN_RANDOM_FIELDS && failures.is_empty() && secs < FIELD_BUDGET_S,
        format!(
            "maglev eta* {:.4} {}; {certified}/{negative} random fields with eta* < 0 certified and clean{}; {secs:.1} s",
            m.as_ref().map_or(f64::NAN, |c| c.eta_star),
            if maglev_ok { "certified" } else { "NOT certified" },
            if failures.is_empty() { String::new() } else { format!(" [{}]", failures.join("; ")) },
        ),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut certified = 0;
    let mut violations = 0;
    let mut tried = 0;
    let mut seed = 1000u64;
    while certified < SOUNDNESS_INSTANCES && tried < 400 {
        let batch: Vec<u64> = (seed..seed + 16).collect();
        seed += 16;
        let results: Vec<Option<Certified>> = batch
            .par_iter()
            .map(|&s| {
                let task = if s % 2 == 0 { random_band(s) } else { random_field(s) }?;
                synthesize_and_certify(&task, 0.05, 2, 1)
            })
            .collect();
        tried += batch.len();
        for c in results.into_iter().flatten() {
            if c.margin_ok && certified < SOUNDNESS_INSTANCES {
                certified += 1;
                violations += c.violations;
            }
        }
    }
    Outcome::check(
        certified >= SOUNDNESS_INSTANCES && violations == 0,
        format!("{certified} certified instances from {tried} draws, {violations} oracle violations, {:.1} s", start.elapsed().as_secs_f64()),
    )
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["robot1", "scara", "maglev", "drone"] {
        let doc = TaskDocument::resolve(name).unwrap();
        let task = &doc.task;
        let eps = doc.synthesis.epsilon;
        let net = build_net(task, eps).unwrap();
        let inst = SopInstance::assemble(task, &net, BasisSpec::monomial(doc.synthesis.degree)).unwrap();
        let res = inst.synthesize(doc.synthesis.strategy, doc.synthesis.budget()).unwrap();
        let cert = certify_pipeline(&res.tube, res.eta_star, task, eps, LipschitzMethod::Analytic, 0, &OracleOptions::for_task(task))
            .unwrap();
        let plant = builtin_plant(doc.plant.as_deref().unwrap()).unwrap();
        let x0 = plant.rest_state(&doc.initial_output());
        let stack = doc.controller.build(&res.tube, &plant, &x0).unwrap();
        let passed = (0..CLOSED_LOOP_SEEDS)
            .into_par_iter()
            .filter(|&seed| {
                let opts = SimOptions { dt: doc.simulation.dt, disturbance: CLOSED_LOOP_DISTURBANCE, seed, horizon: task.horizon };
                simulate(&plant, &stack, &x0, &opts).is_ok_and(|log| evaluate_tras(&log, task).pass())
            })
            .count();
        ok &= cert.report.pass && passed as u64 == CLOSED_LOOP_SEEDS;
        parts.push(format!(
            "{} on {name}: {}{passed}/{CLOSED_LOOP_SEEDS}",
            plant.name,
            if cert.report.pass { "" } else { "uncertified, " }
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::check(ok && secs < CLOSED_LOOP_BUDGET_S, format!("{}; {secs:.1} s", parts.join(", ")))
}

// ---------------------------------------------------------------- 7

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Median absolute error over seeded repetitions on each rung, where every
/// rung halves alpha and quadruples the pair count.
fn ladder(curve: &BoundaryCurve, horizon: f64, exact: f64) -> Vec<f64> {
    let mut params = WeibullParams { alpha: 5e-3, n_bar: 500, m: 100 };
    let mut out = Vec::new();
    for _ in 0..3 {
        let errs: Vec<f64> = (0..LADDER_REPS)
            .map(|rep| (estimate_curve(curve, horizon, &params, 500 + rep, 0).location - exact).abs())
            .collect();
        out.push(median(errs));
        params = WeibullParams { alpha: 0.5 * params.alpha, n_bar: 2 * params.n_bar, m: 2 * params.m };
    }
    out
}

fn criterion_7() -> Outcome {
    let line = BoundaryCurve::new(vec![2.0, 3.0]);
    let params = WeibullParams { alpha: 5e-3, n_bar: 500, m: 100 };
    let hits = (0..WEIBULL_REPS)
        .filter(|&rep| {
            let loc = estimate_curve(&line, 5.0, &params, rep, 0).location;
            loc >= WEIBULL_WINDOW.0 && loc <= WEIBULL_WINDOW.1
        })
        .count();
    // every secant of a line has the same slope, so the error sits at
    // rounding level on all rungs; a quadratic shows the actual trend
    let flat = ladder(&line, 5.0, 3.0);
    let bent = BoundaryCurve::new(vec![2.0, 3.0, 0.4]);
    let curved = ladder(&bent, 5.0, bent.analytic_lipschitz(5.0));
    let non_increasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    Outcome::check(
        hits >= WEIBULL_MIN_HITS && non_increasing(&flat) && non_increasing(&curved) && curved[2] < curved[0],
        format!(
            "{hits}/{WEIBULL_REPS} locations in [{}, {}]; median error ladder line {:.1e} {:.1e} {:.1e}, quadratic {:.2e} {:.2e} {:.2e}",
            WEIBULL_WINDOW.0, WEIBULL_WINDOW.1, flat[0], flat[1], flat[2], curved[0], curved[1], curved[2]
        ),
    )
}

// ---------------------------------------------------------------- 8

/// Solves a small square system; `None` when it is singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn choose(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Best objective over all vertices of a bounded program, `None` when no
/// vertex is feasible.
fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let mut rows: Vec<Constraint> = lp.inequalities.clone();
    for j in 0..n {
        let b = lp.bound(j);
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push(Constraint::new(e.clone(), b.upper));
        rows.push(Constraint::new(e.iter().map(|v| -v).collect(), -b.lower));
    }
    let eq = lp.equalities.len();
    let mut best: Option<f64> = None;
    for pick in choose(rows.len(), n - eq) {
        let active: Vec<&Constraint> = lp.equalities.iter().chain(pick.iter().map(|&i| &rows[i])).collect();
        let a = active.iter().map(|r| r.coeffs.clone()).collect();
        let b = active.iter().map(|r| r.rhs).collect();
        let Some(x) = solve_square(a, b) else { continue };
        let feasible = rows.iter().all(|r| r.excess(&x) <= 1e-9) && lp.equalities.iter().all(|r| r.excess(&x).abs() <= 1e-9);
        if feasible {
            let f: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            best = Some(best.map_or(f, |b: f64| b.min(f)));
        }
    }
    best
}

fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.random_range(1..=4);
    let m = rng.random_range(1..=12);
    let coeff = |rng: &mut ChaCha8Rng| (rng.random_range(-5..=5)) as f64 * 0.5 + rng.random_range(-0.1..0.1);
    let objective = (0..n).map(|_| coeff(rng)).collect();
    let inequalities = (0..m)
        .map(|_| Constraint::new((0..n).map(|_| coeff(rng)).collect(), rng.random_range(-1.0..6.0)))
        .collect();
    let equalities = if n > 1 && rng.random::<f64>() < 0.25 {
        vec![Constraint::new((0..n).map(|_| coeff(rng)).collect(), rng.random_range(-1.0..1.0))]
    } else {
        Vec::new()
    };
    let bounds = (0..n).map(|_| Bound::new(-rng.random_range(1.0..10.0), rng.random_range(1.0..10.0))).collect();
    LinearProgram { objective, inequalities, equalities, bounds }
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = Vec::new();
    let mut infeasible = 0;
    let mut worst: f64 = 0.0;
    for k in 0..RANDOM_LPS {
        let lp = random_lp(&mut rng);
        let reference = vertex_enumeration(&lp);
        match (lp.solve(), reference) {
            (Ok(sol), Some(f)) if sol.status == LpStatus::Optimal => {
                let err = (sol.objective_value - f).abs();
                worst = worst.max(err);
                if err > LP_TOL {
                    mismatches.push(format!("#{k}: {} vs {f}", sol.objective_value));
                }
            }
            (Ok(sol), None) if sol.status == LpStatus::Infeasible => infeasible += 1,
            (other, reference) => mismatches.push(format!("#{k}: {other:?} vs {reference:?}")),
        }
    }
    Outcome::check(
        mismatches.is_empty(),
        format!(
            "{}/{RANDOM_LPS} agree ({infeasible} infeasible), worst objective gap {worst:.1e}{}",
            RANDOM_LPS - mismatches.len(),
            if mismatches.is_empty() { String::new() } else { format!(" [{}]", mismatches.join("; ")) }
        ),
    )
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in BUNDLED_TASKS {
        let doc = TaskDocument::resolve(name).unwrap();
        let eps = doc.synthesis.epsilon;
        let net = build_net(&doc.task, eps).unwrap();
        let gap = verify_net(&net, &doc.task, NET_PROBES, 9);
        // drop every sample of the first obstacle within 1.5 eps of the
        // middle of its active interval
        let piece = &doc.task.unsafe_set.pieces[0];
        let mid = 0.5 * (piece.active[0] + piece.active[1]);
        let holed = net.subset(|r| {
            let s = net.get(r);
            s.piece != 0 || (s.t - mid).abs() > 1.5 * eps
        });
        let holed_gap = verify_net(&holed, &doc.task, NET_PROBES, 9);
        let caught = holed_gap > eps;
        ok &= gap <= eps && caught;
        parts.push(format!("{name} {gap:.4}/{eps} (holed {holed_gap:.4})"));
    }
    Outcome::check(ok, format!("max gap / epsilon: {}", parts.join(", ")))
}

// ---------------------------------------------------------------- 10

/// Double integrator driven by `u = cos t` from rest: `x = 1 - cos t`.
fn criterion_10() -> Outcome {
    let horizon = 2.0;
    let error = |steps: usize| {
        let dt = horizon / steps as f64;
        let mut x = vec![0.0, 0.0];
        for k in 0..steps {
            x = rk4_step(|t, s| vec![s[1], t.cos()], k as f64 * dt, &x, dt);
        }
        let exact = [1.0 - horizon.cos(), horizon.sin()];
        (x[0] - exact[0]).abs().max((x[1] - exact[1]).abs())
    };
    let errs: Vec<f64> = [10, 20, 40, 80].iter().map(|&s| error(s)).collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
    Outcome::check(
        min >= MIN_ORDER,
        format!("observed orders {}", orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>().join(", ")),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("certificate arithmetic", criterion_1),
        ("Lipschitz combiner", criterion_2),
        ("printed tube endpoints", criterion_3),
        ("end-to-end synthesis", criterion_4),
        ("soundness sweep", criterion_5),
        ("closed loop", criterion_6),
        ("Lipschitz estimator", criterion_7),
        ("LP against vertex enumeration", criterion_8),
        ("net covering", criterion_9),
        ("integrator order", criterion_10),
    ];
    let only: Vec<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut unexpected = 0;
    let mut known = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(k + 1)) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let verdict = match (out.pass, out.known) {
            (true, _) => "PASS",
            (false, true) => {
                known += 1;
                "FAIL (known)"
            }
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("criterion {:>2} {name}: {verdict} [{:.1} s] {}", k + 1, start.elapsed().as_secs_f64(), out.detail);
    }
    println!("acceptance: {unexpected} unexpected failures, {known} known failures");
    if unexpected > 0 {
        std::process::exit(1);
    }
}
