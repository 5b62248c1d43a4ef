mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edpa::kernel::{
    kernel_k, kernel_k_equilibrium, kernel_k_homogeneous, kernel_k_infinite, relaxation_distance, relaxation_grid, KernelForm,
    KernelQuery, LOG_TERM_CUT,
};
use edpa::process::{
    h_a, km_determinant, single_particle_density, transition_density, Configuration, Evaluation, KmForm, ProcessParams,
};
use edpa::sde::{dmr_estimate, run_ensemble, HistogramSpec, Model, Observable, PathState, SimConfig};
use edpa::verify::{run_suite, Check, Suite};
use edpa::EdpaError;
use output::{emit, num, write_manifest, Csv};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "edpa", version, about = "Elliptic determinantal process of type A")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the invariant suites and print a JSON report.
    Verify(VerifyArgs),
    /// Evaluate one quantity and print JSON.
    Eval(EvalArgs),
    /// Correlation kernel at one space-time pair (CSV).
    Kernel(KernelArgs),
    /// Equal-time particle density on a grid (CSV).
    Density(DensityArgs),
    /// Distance of the homogeneous kernel from equilibrium (CSV).
    Relax(RelaxArgs),
    /// Euler–Maruyama ensemble histogram at t_end (CSV).
    Simulate(SimulateArgs),
    /// Determinantal-martingale estimate of an observable (JSON).
    Dmr(DmrArgs),
}

#[derive(Args, Serialize, Clone, Copy)]
struct CircleArgs {
    #[arg(long = "N", default_value_t = 3)]
    #[serde(rename = "N")]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 4.0)]
    tstar: f64,
}

impl CircleArgs {
    fn params(&self) -> Result<ProcessParams, Failure> {
        Ok(ProcessParams::new(self.n, self.r, self.tstar)?)
    }
}

#[derive(ValueEnum, Serialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum SuiteArg {
    Theta,
    Lemmas,
    Kernels,
    All,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    suite: SuiteArg,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Seeded instances per lemma and size.
    #[arg(long, default_value_t = 200)]
    seeds: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Serialize, Clone, Copy, Debug)]
#[serde(rename_all = "lowercase")]
enum What {
    Kernel,
    H,
    Qkm,
    Tpd,
    Single,
}

#[derive(ValueEnum, Serialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum KmFormArg {
    Closed,
    Determinant,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long, value_enum)]
    what: What,
    #[command(flatten)]
    #[serde(flatten)]
    circle: CircleArgs,
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    y: Option<f64>,
    /// Comma-separated configuration y (h, qkm, tpd).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    points: Vec<f64>,
    /// Comma-separated start configuration x (tpd; default equidistant).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    from: Vec<f64>,
    /// Center offset δ of `points` (default -πr(N-2)).
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Center offset δ of `from` (default -πr(N-2)).
    #[arg(long, allow_hyphen_values = true)]
    from_delta: Option<f64>,
    #[arg(long, value_enum, default_value_t = KmFormArg::Closed)]
    form: KmFormArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Serialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum FormArg {
    Series,
    Martingale,
    Both,
}

#[derive(Args, Serialize)]
struct KernelArgs {
    #[command(flatten)]
    #[serde(flatten)]
    circle: CircleArgs,
    #[arg(long)]
    s: f64,
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long)]
    t: f64,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    #[arg(long, value_enum, default_value_t = FormArg::Series)]
    form: FormArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Serialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Family {
    Finite,
    Homogeneous,
    Equilibrium,
    Infinite,
}

#[derive(Args, Serialize)]
struct DensityArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long = "N", default_value_t = 3)]
    #[serde(rename = "N")]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Horizon t*; finite defaults to 4, infinite to none (homogeneous limit).
    #[arg(long)]
    tstar: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    t: f64,
    /// Particle density of the infinite system.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Window [0, span) for the infinite system.
    #[arg(long, default_value_t = 10.0)]
    span: f64,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct RelaxArgs {
    #[arg(long = "N", default_value_t = 3)]
    #[serde(rename = "N")]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 5.0, 20.0])]
    times: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Serialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum ModelArg {
    Elliptic,
    Trig,
    Hyper,
    Dyson,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Elliptic)]
    model: ModelArg,
    #[command(flatten)]
    #[serde(flatten)]
    circle: CircleArgs,
    /// t*/α for the hyperbolic model.
    #[arg(long, default_value_t = 2.0)]
    a: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1000)]
    paths: usize,
    #[arg(long, default_value_t = 1.0)]
    tend: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    bins: usize,
    /// Histogram range; defaults to the circle, or the start ± 4√t_end + 1 on the line.
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    guard_frac: f64,
    #[arg(long, default_value_t = 20)]
    max_halvings: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Serialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum ObservableArg {
    One,
    Bump,
    Pattern,
}

#[derive(Args, Serialize)]
struct DmrArgs {
    #[command(flatten)]
    #[serde(flatten)]
    circle: CircleArgs,
    /// Observation time T.
    #[arg(long = "T", default_value_t = 0.5)]
    #[serde(rename = "T")]
    big_t: f64,
    #[arg(long, value_enum, default_value_t = ObservableArg::One)]
    observable: ObservableArg,
    /// Bump center c.
    #[arg(long, default_value_t = 1.0)]
    center: f64,
    /// Bump concentration κ.
    #[arg(long, default_value_t = 2.0)]
    kappa: f64,
    /// Minimal-gap threshold of the pattern observable.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value_t = 10000)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Edpa(EdpaError),
    Io(std::io::Error),
    Checks(Vec<Value>),
}

impl From<EdpaError> for Failure {
    fn from(e: EdpaError) -> Self {
        Failure::Edpa(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

type Run = Result<(), Failure>;

fn need(v: Option<f64>, flag: &str, what: What) -> Result<f64, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("--{flag} is required for --what {what:?}").to_lowercase()))
}

fn check_record(c: &Check, tol: f64) -> Value {
    let mut v = if c.suite == Suite::Lemmas {
        json!({"lemma": c.name, "N": c.n, "seed": c.seed, "residual": c.residual, "condition_flag": c.condition_flag})
    } else {
        let mut v = json!({"suite": c.suite, "check": c.name, "residual": c.residual, "floor": c.floor});
        if let Some(n) = c.n {
            v["N"] = json!(n);
        }
        v
    };
    v["pass"] = json!(c.passes(tol));
    if let Some(e) = &c.error {
        v["error"] = json!(e);
    }
    v
}

fn verify(a: &VerifyArgs) -> Run {
    let started = Instant::now();
    let suites: Vec<Suite> = match a.suite {
        SuiteArg::Theta => vec![Suite::Theta],
        SuiteArg::Lemmas => vec![Suite::Lemmas],
        SuiteArg::Kernels => vec![Suite::Kernels],
        SuiteArg::All => Suite::ALL.to_vec(),
    };
    let checks: Vec<Check> = suites.iter().flat_map(|&s| run_suite(s, a.seeds)).collect();
    let records: Vec<Value> = checks.iter().map(|c| check_record(c, a.tol)).collect();
    let failing: Vec<Value> = checks.iter().zip(&records).filter(|(c, _)| !c.passes(a.tol)).map(|(_, r)| r.clone()).collect();
    let report = json!({
        "suite": a.suite,
        "tol": a.tol,
        "seeds": a.seeds,
        "pass": failing.is_empty(),
        "checks": records,
    });
    emit(a.out.as_deref(), &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    write_manifest(a.out.as_deref(), "verify", a, None, started)?;
    if failing.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failing))
    }
}

fn configuration(points: &[f64], delta: Option<f64>, p: &ProcessParams) -> Result<Configuration, Failure> {
    Ok(Configuration::new(points.to_vec(), delta.unwrap_or(p.delta0()), p.r)?)
}

fn eval(a: &EvalArgs) -> Run {
    let started = Instant::now();
    let p = a.circle.params()?;
    let km_form = match a.form {
        KmFormArg::Closed => KmForm::Closed,
        KmFormArg::Determinant => KmForm::Determinant,
    };
    let (value, method, ev): (Value, &str, Evaluation) = match a.what {
        What::Kernel => {
            let q = KernelQuery::new(
                need(a.s, "s", a.what)?,
                need(a.x, "x", a.what)?,
                need(a.t, "t", a.what)?,
                need(a.y, "y", a.what)?,
            );
            let k = kernel_k(&q, &p, KernelForm::Series)?;
            let ev = Evaluation { value: k.re, flags: vec![] };
            (json!({"re": k.re, "im": k.im}), "series", ev)
        }
        What::H => {
            let t = need(a.t, "t", a.what)?;
            let ev = h_a(&p, p.t_star - t, &a.points, a.delta.unwrap_or(p.delta0()))?;
            (json!(ev.value), "theta_product", ev)
        }
        What::Qkm => {
            let t = need(a.t, "t", a.what)?;
            let ev = km_determinant(&p, t, &a.points, km_form)?;
            let method = match km_form {
                KmForm::Closed => "closed",
                KmForm::Determinant => "determinant",
            };
            (json!(ev.value), method, ev)
        }
        What::Tpd => {
            let (s, t) = (need(a.s, "s", a.what)?, need(a.t, "t", a.what)?);
            let y = configuration(&a.points, a.delta, &p)?;
            let x = if a.from.is_empty() {
                p.equidistant()
            } else {
                configuration(&a.from, a.from_delta, &p)?
            };
            let ev = transition_density(&p, s, &x, t, &y)?;
            (json!(ev.value), "h_transform", ev)
        }
        What::Single => {
            let v = single_particle_density(
                p.r,
                p.t_star,
                need(a.s, "s", a.what)?,
                need(a.x, "x", a.what)?,
                need(a.t, "t", a.what)?,
                need(a.y, "y", a.what)?,
            )?;
            (json!(v), "theta_ratio", Evaluation { value: v, flags: vec![] })
        }
    };
    let body = json!({"inputs": a, "value": value, "method": method, "flags": ev.flags});
    emit(a.out.as_deref(), &(serde_json::to_string_pretty(&body).expect("report serializes") + "\n"))?;
    write_manifest(a.out.as_deref(), "eval", a, None, started)?;
    Ok(())
}

fn kernel(a: &KernelArgs) -> Run {
    let started = Instant::now();
    let p = a.circle.params()?;
    let q = KernelQuery::new(a.s, a.x, a.t, a.y);
    let forms: &[(KernelForm, &str)] = match a.form {
        FormArg::Series => &[(KernelForm::Series, "series")],
        FormArg::Martingale => &[(KernelForm::MartingaleSum, "martingale")],
        FormArg::Both => &[(KernelForm::Series, "series"), (KernelForm::MartingaleSum, "martingale")],
    };
    let mut csv = Csv::new(&["s", "x", "t", "y", "re", "im", "form", "budget"]);
    for &(form, name) in forms {
        let k = kernel_k(&q, &p, form)?;
        csv.row(&[num(a.s), num(a.x), num(a.t), num(a.y), num(k.re), num(k.im), name.into(), num(LOG_TERM_CUT.exp())]);
    }
    emit(a.out.as_deref(), &csv.into_string())?;
    write_manifest(a.out.as_deref(), "kernel", a, None, started)?;
    Ok(())
}

fn density(a: &DensityArgs) -> Run {
    let started = Instant::now();
    if a.grid == 0 {
        return Err(Failure::Usage("--grid must be positive".into()));
    }
    let len = match a.family {
        Family::Infinite => a.span,
        _ => 2.0 * PI * a.r,
    };
    let xs: Vec<f64> = (0..a.grid).map(|i| len * i as f64 / a.grid as f64).collect();
    let diag = |x: f64| -> Result<f64, EdpaError> {
        let q = KernelQuery::new(a.t, x, a.t, x);
        Ok(match a.family {
            Family::Finite => kernel_k(&q, &ProcessParams::new(a.n, a.r, a.tstar.unwrap_or(4.0))?, KernelForm::Series)?.re,
            Family::Homogeneous => kernel_k_homogeneous(&q, a.n, a.r)?.re,
            Family::Equilibrium => kernel_k_equilibrium(0.0, 0.0, a.n, a.r).re,
            Family::Infinite => kernel_k_infinite(&q, a.rho, a.tstar)?.re,
        })
    };
    let rho: Vec<f64> = xs.par_iter().map(|&x| diag(x)).collect::<Result<_, _>>()?;
    let mut csv = Csv::new(&["x", "rho"]);
    for (x, v) in xs.iter().zip(&rho) {
        csv.row(&[num(*x), num(*v)]);
    }
    emit(a.out.as_deref(), &csv.into_string())?;
    write_manifest(a.out.as_deref(), "density", a, None, started)?;
    Ok(())
}

fn relax(a: &RelaxArgs) -> Run {
    let started = Instant::now();
    let grid = relaxation_grid(a.r);
    let d: Vec<f64> = a.times.par_iter().map(|&t| relaxation_distance(a.n, a.r, t, &grid)).collect::<Result<_, _>>()?;
    let mut csv = Csv::new(&["T", "d"]);
    for (t, v) in a.times.iter().zip(&d) {
        csv.row(&[num(*t), num(*v)]);
    }
    emit(a.out.as_deref(), &csv.into_string())?;
    write_manifest(a.out.as_deref(), "relax", a, None, started)?;
    Ok(())
}

/// Model and start: equidistant on the circle, j - (N+1)/2 for Dyson, j for the hyperbolic model.
fn model_and_start(a: &SimulateArgs) -> Result<(Model, PathState), Failure> {
    let c = a.circle;
    let line = |x: Vec<f64>| PathState { x, delta: 0.0, t: 0.0 };
    Ok(match a.model {
        ModelArg::Elliptic => {
            let p = c.params()?;
            (Model::Elliptic(p), PathState::from_configuration(&p.equidistant()))
        }
        ModelArg::Trig => {
            let p = ProcessParams::new(c.n, c.r, 1.0)?;
            (Model::Trig { n: c.n, r: c.r }, PathState::from_configuration(&p.equidistant()))
        }
        ModelArg::Hyper => (Model::Hyper { n: c.n, a: a.a }, line((1..=c.n).map(|j| j as f64).collect())),
        ModelArg::Dyson => {
            let mid = (c.n as f64 + 1.0) / 2.0;
            (Model::Dyson { n: c.n }, line((1..=c.n).map(|j| j as f64 - mid).collect()))
        }
    })
}

fn simulate(a: &SimulateArgs) -> Run {
    let started = Instant::now();
    if a.bins == 0 {
        return Err(Failure::Usage("--bins must be positive".into()));
    }
    let (model, init) = model_and_start(a)?;
    let (lo, hi) = match model.period() {
        Some(l) => (a.lo.unwrap_or(0.0), a.hi.unwrap_or(l)),
        None => {
            let pad = 4.0 * a.tend.max(0.0).sqrt() + 1.0;
            (a.lo.unwrap_or(init.x[0] - pad), a.hi.unwrap_or(init.x[init.x.len() - 1] + pad))
        }
    };
    if !(lo < hi) {
        return Err(Failure::Usage("--lo must be below --hi".into()));
    }
    let cfg = SimConfig { dt: a.dt, guard_frac: a.guard_frac, max_halvings: a.max_halvings, seed: a.seed, paths: a.paths };
    let spec = HistogramSpec { lo, hi, bins: a.bins };
    let stats = run_ensemble(&model, &init, &cfg, a.tend, spec)?;
    if stats.failures > 0 {
        eprintln!("{}", json!({"warning": "dropped paths after repeated step halving", "count": stats.failures}));
    }
    let (dens, se) = (stats.density(), stats.stderr());
    let mut csv = Csv::new(&["bin_left", "bin_right", "count", "density", "stderr"]);
    for i in 0..a.bins {
        csv.row(&[num(spec.left(i)), num(spec.left(i + 1)), format!("{}", stats.sum[i]), num(dens[i]), num(se[i])]);
    }
    emit(a.out.as_deref(), &csv.into_string())?;
    write_manifest(a.out.as_deref(), "simulate", a, Some(a.seed), started)?;
    Ok(())
}

fn dmr(a: &DmrArgs) -> Run {
    let started = Instant::now();
    let p = a.circle.params()?;
    let obs = match a.observable {
        ObservableArg::One => Observable::One,
        ObservableArg::Bump => Observable::Bump { center: a.center, kappa: a.kappa },
        ObservableArg::Pattern => Observable::Pattern { threshold: a.threshold },
    };
    let cfg = SimConfig { seed: a.seed, paths: a.paths, ..SimConfig::default() };
    let r = dmr_estimate(&obs, a.big_t, &p, &cfg)?;
    let body = json!({
        "observable": a.observable,
        "T": a.big_t,
        "estimate": r.estimate,
        "stderr": r.stderr,
        "weight_mean": r.weight_mean,
        "weight_stderr": r.weight_stderr,
        "variance_blowup": r.variance_blowup,
    });
    emit(a.out.as_deref(), &(serde_json::to_string_pretty(&body).expect("report serializes") + "\n"))?;
    write_manifest(a.out.as_deref(), "dmr", a, Some(a.seed), started)?;
    Ok(())
}

fn error_kind(e: &EdpaError) -> &'static str {
    match e {
        EdpaError::Domain(_) => "domain",
        EdpaError::Pole { .. } => "pole",
        EdpaError::Accuracy { .. } => "accuracy",
        EdpaError::Unsupported(_) => "unsupported",
        EdpaError::Budget(_) => "budget",
        EdpaError::StepFailure { .. } => "step_failure",
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("EDPA_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("EDPA_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = init_threads().and_then(|_| match &cli.cmd {
        Cmd::Verify(a) => verify(a),
        Cmd::Eval(a) => eval(a),
        Cmd::Kernel(a) => kernel(a),
        Cmd::Density(a) => density(a),
        Cmd::Relax(a) => relax(a),
        Cmd::Simulate(a) => simulate(a),
        Cmd::Dmr(a) => dmr(a),
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Edpa(e)) => {
            eprintln!("{}", json!({"error": error_kind(&e), "message": e.to_string()}));
            ExitCode::from(1)
        }
        Err(Failure::Io(e)) => {
            eprintln!("{}", json!({"error": "io", "message": e.to_string()}));
            ExitCode::from(1)
        }
        Err(Failure::Checks(records)) => {
            for r in records {
                eprintln!("{r}");
            }
            ExitCode::from(1)
        }
    }
}
