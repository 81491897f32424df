mod manifest;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use manifest::{sha256_hex, RunKey, RunManifest};
use stt_core::certify::{certify_pipeline, certify_with_estimate, tube_slack, LipschitzEstimate, LipschitzMethod};
use stt_core::config::TaskDocument;
use stt_core::oracle::{check_stt, OracleOptions};
use stt_core::plants::builtin_plant;
use stt_core::sampler::build_net;
use stt_core::sim::{evaluate_tras, simulate, SimOptions, Verdict};
use stt_core::sop::{export_result, Budget, SopInstance, Strategy, SynthesisReport};
use stt_core::tube::{BasisSpec, Tube};
use stt_core::Error;

#[derive(Parser)]
#[command(name = "stt", version, about = "Spatiotemporal tube synthesis, certification and simulation")]
struct Cli {
    /// Master seed for every random draw of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Only errors are printed.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the epsilon-net and solve the scenario program for a tube.
    Synth(SynthArgs),
    /// Check the sampled-to-robust margin and run the tube oracle.
    Certify(CertifyArgs),
    /// Closed-loop runs of a plant under the tube controller.
    Simulate(SimulateArgs),
    /// Timing sweeps.
    Bench(BenchArgs),
    /// Run the tube oracle alone.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Task file or bundled task name.
    task: String,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    degree: Option<usize>,
    /// `heuristic` or `exact_bnb`.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    max_lp_solves: Option<usize>,
    /// Tube file; defaults to `<out-dir>/tube.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 5000)]
    time_points: usize,
    /// Spatial probes per shortest obstacle edge.
    #[arg(long, default_value_t = 50)]
    per_edge: usize,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    tube: PathBuf,
    #[arg(long)]
    task: String,
    /// Synthesis report supplying `eta_star` and `epsilon`.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    eta_star: Option<f64>,
    /// `analytic` or `weibull`.
    #[arg(long, default_value = "analytic")]
    method: String,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Use these Lipschitz constants instead of estimating them.
    #[arg(long, requires = "l_upper")]
    l_lower: Option<f64>,
    #[arg(long, requires = "l_lower")]
    l_upper: Option<f64>,
    #[command(flatten)]
    oracle: OracleArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    tube: PathBuf,
    #[arg(long)]
    task: String,
    /// Defaults to the plant named in the task file.
    #[arg(long)]
    plant: Option<String>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    disturbance: Option<f64>,
    /// Also write SVG figures.
    #[arg(long)]
    plot: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Complexity,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    suite: Suite,
    #[arg(long, default_value = "maglev")]
    task: String,
    #[arg(long, default_value_t = 2)]
    min_degree: usize,
    #[arg(long, default_value_t = 8)]
    max_degree: usize,
    /// Number of epsilon halvings after the task's own epsilon.
    #[arg(long, default_value_t = 3)]
    halvings: usize,
    #[arg(long, default_value = "heuristic")]
    strategy: String,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    tube: PathBuf,
    #[arg(long)]
    task: String,
    #[command(flatten)]
    oracle: OracleArgs,
}

struct Ctx {
    seed: u64,
    out_dir: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { code: 1, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: 1, message: e.to_string() }
    }
}

type Outcome = Result<u8, Failure>;

struct LoadedTask {
    origin: String,
    sha256: String,
    doc: TaskDocument,
}

fn load_task(spec: &str) -> Result<LoadedTask, Failure> {
    let (origin, text) = TaskDocument::resolve_source(spec)?;
    let doc = TaskDocument::from_json(&text).map_err(|e| Failure { code: 1, message: format!("{origin}: {e}") })?;
    Ok(LoadedTask { origin, sha256: sha256_hex(text.as_bytes()), doc })
}

/// Reads a tube document, ignoring the manifest field added on output.
fn load_tube(path: &Path) -> Result<(Tube, String), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure { code: 1, message: format!("{}: {e}", path.display()) })?;
    let tube = Tube::from_json(&text).map_err(|e| Failure { code: 1, message: format!("{}: {e}", path.display()) })?;
    Ok((tube, sha256_hex(text.as_bytes())))
}

fn base_key(command: &str, task: &LoadedTask, ctx: &Ctx) -> RunKey {
    RunKey {
        command: command.into(),
        task: task.origin.clone(),
        task_sha256: task.sha256.clone(),
        seed: ctx.seed,
        ..Default::default()
    }
}

fn cmd_synth(args: &SynthArgs, ctx: &Ctx) -> Outcome {
    let task = load_task(&args.task)?;
    let doc = &task.doc;
    let epsilon = args.epsilon.unwrap_or(doc.synthesis.epsilon);
    let degree = args.degree.unwrap_or(doc.synthesis.degree);
    let strategy: Strategy = match &args.strategy {
        Some(s) => s.parse()?,
        None => doc.synthesis.strategy,
    };
    let budget = Budget { max_lp_solves: args.max_lp_solves.unwrap_or(doc.synthesis.max_lp_solves) };
    let mut key = base_key("synth", &task, ctx);
    key.epsilon = Some(epsilon);
    key.degree = Some(degree);
    key.strategy = Some(format!("{strategy:?}"));
    key.options.insert("max_lp_solves".into(), budget.max_lp_solves.to_string());
    let mut manifest = RunManifest::new(key);

    let net = manifest.time("sample", || build_net(&doc.task, epsilon))?;
    let inst = SopInstance::assemble(&doc.task, &net, BasisSpec::monomial(degree))?;
    let result = manifest.time("solve", || inst.synthesize(strategy, budget)).map_err(|e| match e {
        Error::NoFeasibleAssignment => Failure { code: 3, message: e.to_string() },
        other => other.into(),
    })?;
    let (_, report) = export_result(&result, &net)?;
    let (dir, name) = match &args.out {
        Some(p) => (
            p.parent().filter(|d| !d.as_os_str().is_empty()).map(Path::to_path_buf).unwrap_or_else(|| ".".into()),
            p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_else(|| "tube.json".into()),
        ),
        None => (ctx.out_dir.clone(), "tube.json".into()),
    };
    let tube_path = manifest.write_json(&dir, &name, &result.tube)?;
    manifest.write_json(&ctx.out_dir, "synth_report.json", &report)?;
    manifest.finish(&ctx.out_dir)?;
    ctx.say(format!(
        "eta* = {:.6e} ({:?}, {} samples, {} LP solves{}{})",
        result.eta_star,
        result.strategy,
        net.len(),
        result.stats.lp_solves,
        if result.optimal { ", optimal" } else { "" },
        if result.budget_exhausted { ", budget exhausted" } else { "" },
    ));
    ctx.say(format!("tube written to {}", tube_path.display()));
    Ok(0)
}

fn cmd_certify(args: &CertifyArgs, ctx: &Ctx) -> Outcome {
    let task = load_task(&args.task)?;
    let (tube, tube_sha) = load_tube(&args.tube)?;
    let report = match &args.report {
        Some(p) => Some(SynthesisReport::from_json(&std::fs::read_to_string(p)?)?),
        None => None,
    };
    let epsilon = args.epsilon.or(report.as_ref().map(|r| r.epsilon)).unwrap_or(task.doc.synthesis.epsilon);
    let method: LipschitzMethod = args.method.parse()?;
    let mut key = base_key("certify", &task, ctx);
    key.inputs.insert("tube".into(), tube_sha);
    key.epsilon = Some(epsilon);
    key.options.insert("method".into(), args.method.clone());
    if let Some(eta) = args.eta_star {
        key.options.insert("eta_star".into(), eta.to_string());
    }
    if let (Some(a), Some(b)) = (args.l_lower, args.l_upper) {
        key.options.insert("lipschitz".into(), format!("{a},{b}"));
    }
    key.options.insert("oracle".into(), format!("{}x{}", args.oracle.time_points, args.oracle.per_edge));
    let mut manifest = RunManifest::new(key);

    let eta_star = match (args.eta_star, &report) {
        (Some(eta), _) => eta,
        (None, Some(r)) => r.eta_star,
        (None, None) => {
            let net = manifest.time("sample", || build_net(&task.doc.task, epsilon))?;
            manifest.time("slack", || tube_slack(&tube, &task.doc.task, &net))
        }
    };
    let opts = OracleOptions::with_resolution(&task.doc.task, args.oracle.time_points, args.oracle.per_edge);
    let outcome = manifest.time("certify", || match (args.l_lower, args.l_upper) {
        (Some(a), Some(b)) => certify_with_estimate(&tube, eta_star, &task.doc.task, epsilon, LipschitzEstimate::supplied(a, b)?, &opts),
        _ => certify_pipeline(&tube, eta_star, &task.doc.task, epsilon, method, ctx.seed, &opts),
    })?;
    let r = &outcome.report;
    manifest.write_json(&ctx.out_dir, "certificate.json", r)?;
    manifest.finish(&ctx.out_dir)?;
    ctx.say(format!(
        "eta* = {:.6e}, L_L = {:.6}, L_U = {:.6}, L = {:.6}, epsilon = {}",
        r.eta_star, r.l_lower, r.l_upper, r.l, r.epsilon
    ));
    ctx.say(format!("margin = {:.6e} ({})", r.margin, if r.certificate_pass { "certificate holds" } else { "certificate fails" }));
    ctx.say(format!("oracle violations: {}", r.oracle_violations));
    if r.fit_failed {
        return Err(Failure { code: 1, message: "reverse Weibull fit failed for at least one curve".into() });
    }
    ctx.say(if r.pass { "PASS" } else { "FAIL" });
    Ok(if r.pass { 0 } else { 2 })
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    pass: bool,
    verdict: Verdict,
}

fn cmd_simulate(args: &SimulateArgs, ctx: &Ctx) -> Outcome {
    let task = load_task(&args.task)?;
    let (tube, tube_sha) = load_tube(&args.tube)?;
    let doc = &task.doc;
    let plant_name = args
        .plant
        .clone()
        .or_else(|| doc.plant.clone())
        .ok_or_else(|| Failure { code: 1, message: "no plant given and the task names none".into() })?;
    let plant = builtin_plant(&plant_name)?;
    let seeds = args.seeds.unwrap_or(doc.simulation.seeds);
    let dt = args.dt.unwrap_or(doc.simulation.dt);
    let disturbance = args.disturbance.unwrap_or(doc.simulation.disturbance);
    let mut key = base_key("simulate", &task, ctx);
    key.inputs.insert("tube".into(), tube_sha);
    key.seeds = Some(seeds);
    key.options.insert("plant".into(), plant_name.clone());
    key.options.insert("dt".into(), dt.to_string());
    key.options.insert("disturbance".into(), disturbance.to_string());
    let mut manifest = RunManifest::new(key);

    if tube.dim() != doc.task.dim() {
        return Err(Failure {
            code: 1,
            message: format!("tube has {} dimensions, task has {}", tube.dim(), doc.task.dim()),
        });
    }
    if plant.outputs != doc.task.dim() {
        return Err(Failure {
            code: 1,
            message: format!("plant {plant_name} has {} outputs, task has {}", plant.outputs, doc.task.dim()),
        });
    }
    let x0 = plant.rest_state(&doc.initial_output());
    plant.check_domain(&x0).map_err(|m| Failure { code: 1, message: m })?;
    let stack = doc.controller.build(&tube, &plant, &x0)?;
    let runs = manifest.time("simulate", || {
        (0..seeds as u64)
            .into_par_iter()
            .map(|k| {
                let seed = ctx.seed.wrapping_add(k);
                let opts = SimOptions { dt, disturbance, seed, horizon: doc.task.horizon };
                let log = simulate(&plant, &stack, &x0, &opts)?;
                let verdict = evaluate_tras(&log, &doc.task);
                Ok((seed, log, verdict))
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;
    let mut summary = Vec::new();
    for (seed, log, verdict) in &runs {
        let mut csv = Vec::new();
        log.write_csv(&mut csv)?;
        manifest.write_csv(&ctx.out_dir, &format!("traj_seed{seed}.csv"), &csv)?;
        ctx.say(format!(
            "seed {seed}: {}{}",
            if verdict.pass() { "pass" } else { "FAIL" },
            if verdict.diagnostics.is_empty() { String::new() } else { format!(" ({})", verdict.diagnostics.join("; ")) }
        ));
        summary.push(SeedSummary { seed: *seed, pass: verdict.pass(), verdict: verdict.clone() });
    }
    manifest.write_json(&ctx.out_dir, "simulate_summary.json", &summary)?;
    if args.plot {
        let logs: Vec<_> = runs.iter().map(|(_, log, _)| log.clone()).collect();
        let plots: Result<(), Box<dyn std::error::Error>> = manifest.time("plot", || {
            std::fs::create_dir_all(&ctx.out_dir)?;
            plot::draw_bands(&ctx.out_dir.join("bands.svg"), &tube, &logs)?;
            plot::draw_paths(&ctx.out_dir.join("paths.svg"), &tube, &doc.task, &logs)?;
            Ok(())
        });
        plots.map_err(|e| Failure { code: 1, message: format!("plotting failed: {e}") })?;
        manifest.artifacts.push("bands.svg".into());
        if doc.task.dim() > 1 {
            manifest.artifacts.push("paths.svg".into());
        }
    }
    manifest.finish(&ctx.out_dir)?;
    let passed = summary.iter().filter(|s| s.pass).count();
    ctx.say(format!("{passed}/{seeds} seeds pass ({plant_name}, dt = {dt}, disturbance = {disturbance})"));
    Ok(if passed == seeds { 0 } else { 2 })
}

fn cmd_bench(args: &BenchArgs, ctx: &Ctx) -> Outcome {
    let Suite::Complexity = args.suite;
    let task = load_task(&args.task)?;
    let doc = &task.doc;
    let strategy: Strategy = args.strategy.parse()?;
    if args.min_degree > args.max_degree {
        return Err(Failure { code: 1, message: "min-degree exceeds max-degree".into() });
    }
    let mut key = base_key("bench", &task, ctx);
    key.strategy = Some(format!("{strategy:?}"));
    key.options.insert("degrees".into(), format!("{}..={}", args.min_degree, args.max_degree));
    key.options.insert("halvings".into(), args.halvings.to_string());
    let mut manifest = RunManifest::new(key);
    let budget = doc.synthesis.budget();
    let mut points: Vec<(&str, usize, f64)> =
        (args.min_degree..=args.max_degree).map(|d| ("degree", d, doc.synthesis.epsilon)).collect();
    points.extend((0..=args.halvings).map(|h| ("epsilon", doc.synthesis.degree, doc.synthesis.epsilon / 2f64.powi(h as i32))));
    let mut csv = String::from("sweep,degree,epsilon,samples,time_samples,variables,constraints,lp_solves,nodes,eta_star,wall_ms\n");
    for (sweep, degree, epsilon) in points {
        let start = std::time::Instant::now();
        let net = build_net(&doc.task, epsilon)?;
        let inst = SopInstance::assemble(&doc.task, &net, BasisSpec::monomial(degree))?;
        let res = inst.synthesize(strategy, budget)?;
        let wall = start.elapsed().as_secs_f64() * 1e3;
        let constraints = net.len() + 3 * doc.task.dim() * net.time_samples.len();
        csv.push_str(&format!(
            "{sweep},{degree},{epsilon},{},{},{},{constraints},{},{},{},{wall:.3}\n",
            net.len(),
            net.time_samples.len(),
            inst.num_vars(),
            res.stats.lp_solves,
            res.stats.nodes,
            res.eta_star
        ));
        ctx.say(format!("{sweep}: degree {degree}, epsilon {epsilon}: {} samples, {wall:.1} ms", net.len()));
    }
    manifest.write_csv(&ctx.out_dir, "bench_complexity.csv", csv.as_bytes())?;
    manifest.finish(&ctx.out_dir)?;
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs, ctx: &Ctx) -> Outcome {
    let task = load_task(&args.task)?;
    let (tube, tube_sha) = load_tube(&args.tube)?;
    let mut key = base_key("verify", &task, ctx);
    key.inputs.insert("tube".into(), tube_sha);
    key.options.insert("oracle".into(), format!("{}x{}", args.oracle.time_points, args.oracle.per_edge));
    let mut manifest = RunManifest::new(key);
    if tube.dim() != task.doc.task.dim() {
        return Err(Failure {
            code: 1,
            message: format!("tube has {} dimensions, task has {}", tube.dim(), task.doc.task.dim()),
        });
    }
    let opts = OracleOptions::with_resolution(&task.doc.task, args.oracle.time_points, args.oracle.per_edge);
    let report = manifest.time("oracle", || check_stt(&tube, &task.doc.task, &opts));
    manifest.write_json(&ctx.out_dir, "verify_report.json", &report)?;
    manifest.finish(&ctx.out_dir)?;
    for v in report.violations.iter().take(10) {
        ctx.say(format!("{:?} at t = {} (dim {:?}, piece {:?}, by {:e})", v.kind, v.t, v.dim, v.piece, v.amount));
    }
    ctx.say(format!("{} violations over {} time points", report.violations.len(), report.time_points));
    Ok(if report.pass() { 0 } else { 2 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx { seed: cli.seed, out_dir: cli.out_dir, quiet: cli.quiet };
    let outcome = match &cli.command {
        Command::Synth(a) => cmd_synth(a, &ctx),
        Command::Certify(a) => cmd_certify(a, &ctx),
        Command::Simulate(a) => cmd_simulate(a, &ctx),
        Command::Bench(a) => cmd_bench(a, &ctx),
        Command::Verify(a) => cmd_verify(a, &ctx),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
