//! Euler–Maruyama simulation of the particle systems, ensemble histograms and the
//! determinantal-martingale (DMR) estimator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::drift::{drift, drift_hyper, drift_rational, drift_trig, DriftParams};
use crate::error::{domain, EdpaError, Result};
use crate::kernel::det_martingale;
use crate::process::{Configuration, ProcessParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub guard_frac: f64,
    pub max_halvings: u32,
    pub seed: u64,
    pub paths: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: 1e-3, guard_frac: 0.05, max_halvings: 20, seed: 0, paths: 1000 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.guard_frac > 0.0 && self.guard_frac < 0.5) || self.paths == 0 {
            return domain("need dt > 0, 0 < guard_frac < 0.5 and paths >= 1");
        }
        Ok(())
    }
}

/// Interacting systems on the circle (or line, for `Hyper` and `Dyson`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Elliptic(ProcessParams),
    Trig { n: usize, r: f64 },
    Hyper { n: usize, a: f64 },
    Dyson { n: usize },
}

impl Model {
    pub fn n(&self) -> usize {
        match *self {
            Model::Elliptic(p) => p.n,
            Model::Trig { n, .. } | Model::Hyper { n, .. } | Model::Dyson { n } => n,
        }
    }

    /// Circumference for the circle models.
    pub fn period(&self) -> Option<f64> {
        match *self {
            Model::Elliptic(p) => Some(p.circumference()),
            Model::Trig { r, .. } => Some(2.0 * PI * r),
            _ => None,
        }
    }

    fn has_center(&self) -> bool {
        !matches!(self, Model::Dyson { .. })
    }

    fn pair(&self, t: f64, x: f64) -> Result<f64> {
        match *self {
            Model::Elliptic(p) => drift(&DriftParams::new(p.n, p.circumference(), p.t_star - t)?, x),
            Model::Trig { r, .. } => drift_trig(r, x),
            Model::Hyper { n, a } => drift_hyper(n, a, x),
            Model::Dyson { .. } => drift_rational(x),
        }
    }
}

/// Unwrapped labeled positions, the center offset δ and the current time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathState {
    pub x: Vec<f64>,
    pub delta: f64,
    pub t: f64,
}

impl PathState {
    pub fn from_configuration(c: &Configuration) -> Self {
        Self { x: c.points().to_vec(), delta: c.delta(), t: 0.0 }
    }

    /// X̄_δ = δ + Σ x̌_j.
    pub fn center(&self) -> f64 {
        self.delta + self.x.iter().sum::<f64>()
    }

    /// Positions mod the period.
    pub fn wrapped(&self, period: f64) -> Vec<f64> {
        self.x.iter().map(|v| v.rem_euclid(period)).collect()
    }

    /// Smallest consecutive gap (including the wrap-around gap on the circle).
    pub fn min_gap(&self, period: Option<f64>) -> f64 {
        let mut g = self.x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if let (Some(l), Some(first), Some(last)) = (period, self.x.first(), self.x.last()) {
            if self.x.len() > 1 {
                g = g.min(first + l - last);
            }
        }
        g
    }

    /// Checks the alcove ordering and the center range.
    pub fn is_valid(&self, model: &Model) -> bool {
        let n = self.x.len();
        if n == 0 || self.x.iter().any(|v| !v.is_finite()) || self.x.windows(2).any(|w| w[0] >= w[1]) {
            return false;
        }
        if let Some(l) = model.period() {
            if n > 1 && self.x[n - 1] >= self.x[0] + l {
                return false;
            }
            let c = self.center();
            return c > 0.0 && c < l;
        }
        match model {
            Model::Hyper { .. } => self.center() > 0.0,
            _ => true,
        }
    }
}

/// b_j = Σ_{k≠j} A(x_j - x_k) + A(X̄_δ).
pub fn drift_vector(model: &Model, state: &PathState) -> Result<Vec<f64>> {
    let n = state.x.len();
    if n != model.n() {
        return domain("state size differs from the model's N");
    }
    let t = state.t;
    if let Model::Elliptic(p) = model {
        if t >= p.t_star {
            return domain(format!("time {t} is past t* = {}", p.t_star));
        }
    }
    let center = if model.has_center() { model.pair(t, state.center())? } else { 0.0 };
    let mut b = vec![center; n];
    for j in 0..n {
        for k in j + 1..n {
            let a = model.pair(t, state.x[j] - state.x[k])?;
            b[j] += a;
            b[k] -= a;
        }
    }
    Ok(b)
}

// Distances that must stay positive, with their guard scales.
fn guarded_distances(model: &Model, s: &PathState) -> Vec<(f64, f64)> {
    let n = s.x.len();
    let period = model.period();
    let spacing = period.map(|l| l / n as f64).unwrap_or(f64::INFINITY);
    let mut out = Vec::with_capacity(n + 2);
    for w in s.x.windows(2) {
        out.push((w[1] - w[0], spacing));
    }
    if let Some(l) = period {
        if n > 1 {
            out.push((s.x[0] + l - s.x[n - 1], spacing));
        }
        let c = s.center();
        out.push((c, l / 2.0));
        out.push((l - c, l / 2.0));
    } else if let Model::Hyper { .. } = model {
        out.push((s.center(), f64::INFINITY));
    }
    out
}

fn accept(model: &Model, old: &PathState, new: &PathState, guard: f64) -> std::result::Result<(), f64> {
    let before = guarded_distances(model, old);
    let after = guarded_distances(model, new);
    let mut worst = f64::INFINITY;
    let mut ok = new.x.iter().all(|v| v.is_finite());
    for ((d0, scale), (d1, _)) in before.iter().zip(&after) {
        worst = worst.min(*d1);
        if !(*d1 >= guard * d0.min(*scale)) {
            ok = false;
        }
    }
    if ok {
        Ok(())
    } else {
        Err(worst)
    }
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// One explicit step driven by the given Wiener increments; no guard.
pub fn euler_step(model: &Model, state: &PathState, dt: f64, dw: &[f64]) -> Result<PathState> {
    let b = drift_vector(model, state)?;
    let x = state.x.iter().zip(&b).zip(dw).map(|((x, b), w)| x + b * dt + w).collect();
    Ok(PathState { x, delta: state.delta, t: state.t + dt })
}

fn guarded_step(
    model: &Model,
    state: &PathState,
    dt: f64,
    dw: &[f64],
    cfg: &SimConfig,
    depth: u32,
    rng: &mut ChaCha8Rng,
) -> Result<PathState> {
    let prop = euler_step(model, state, dt, dw)?;
    let worst = match accept(model, state, &prop, cfg.guard_frac) {
        Ok(()) => return Ok(prop),
        Err(w) => w,
    };
    if depth >= cfg.max_halvings {
        return Err(EdpaError::StepFailure { time: state.t, gap: worst });
    }
    // Brownian bridge midpoint
    let z = normals(rng, dw.len());
    let sd = (dt / 4.0).sqrt();
    let dw1: Vec<f64> = dw.iter().zip(&z).map(|(w, z)| w / 2.0 + sd * z).collect();
    let dw2: Vec<f64> = dw.iter().zip(&dw1).map(|(w, a)| w - a).collect();
    let mid = guarded_step(model, state, dt / 2.0, &dw1, cfg, depth + 1, rng)?;
    guarded_step(model, &mid, dt / 2.0, &dw2, cfg, depth + 1, rng)
}

/// One guarded Euler–Maruyama step of size `cfg.dt`.
pub fn step(model: &Model, state: &PathState, cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<PathState> {
    step_by(model, state, cfg.dt, cfg, rng)
}

fn step_by(model: &Model, state: &PathState, dt: f64, cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<PathState> {
    if let Model::Elliptic(p) = model {
        if state.t + dt >= p.t_star {
            return domain(format!("step would reach t* = {}", p.t_star));
        }
    }
    let sd = dt.sqrt();
    let dw: Vec<f64> = normals(rng, state.x.len()).into_iter().map(|z| sd * z).collect();
    guarded_step(model, state, dt, &dw, cfg, 0, rng)
}

/// RNG for path `index` of a run seeded with `seed`.
pub fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs one path to `t_end`.
pub fn run_path(model: &Model, init: &PathState, cfg: &SimConfig, t_end: f64, rng: &mut ChaCha8Rng) -> Result<PathState> {
    if let Model::Elliptic(p) = model {
        if t_end >= p.t_star {
            return domain("t_end must be below t*");
        }
    }
    let mut s = init.clone();
    while s.t < t_end - 1e-12 * t_end.max(1.0) {
        let h = cfg.dt.min(t_end - s.t);
        s = step_by(model, &s, h, cfg, rng)?;
    }
    Ok(s)
}

/// Uniform bins on [lo, hi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl HistogramSpec {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn index(&self, x: f64) -> Option<usize> {
        if x < self.lo || x >= self.hi {
            return None;
        }
        Some((((x - self.lo) / self.width()) as usize).min(self.bins - 1))
    }

    pub fn left(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.width()
    }
}

/// Per-bin sums over paths of the (weighted) particle counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub spec: HistogramSpec,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
    pub paths: usize,
    pub failures: usize,
}

impl EnsembleStats {
    fn new(spec: HistogramSpec) -> Self {
        Self { spec, sum: vec![0.0; spec.bins], sum_sq: vec![0.0; spec.bins], paths: 0, failures: 0 }
    }

    fn add(&mut self, counts: &[f64]) {
        for (i, c) in counts.iter().enumerate() {
            self.sum[i] += c;
            self.sum_sq[i] += c * c;
        }
        self.paths += 1;
    }

    /// Particle density per unit length in each bin.
    pub fn density(&self) -> Vec<f64> {
        let w = self.spec.width() * self.paths as f64;
        self.sum.iter().map(|s| s / w).collect()
    }

    /// Standard error of `density`.
    pub fn stderr(&self) -> Vec<f64> {
        let n = self.paths as f64;
        let w = self.spec.width();
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| {
                let m = s / n;
                let var = (q / n - m * m).max(0.0) * n / (n - 1.0).max(1.0);
                (var / n).sqrt() / w
            })
            .collect()
    }
}

fn bin_counts(spec: &HistogramSpec, xs: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; spec.bins];
    for &x in xs {
        if let Some(i) = spec.index(x) {
            c[i] += 1.0;
        }
    }
    c
}

fn check_failures(failures: usize, paths: usize, first: Option<EdpaError>) -> Result<()> {
    if failures as f64 > 1e-3 * paths as f64 {
        let detail = first.map(|e| e.to_string()).unwrap_or_default();
        return Err(EdpaError::Budget(format!("{failures} of {paths} paths failed ({detail})")));
    }
    Ok(())
}

/// Final states of `cfg.paths` independent paths; failed paths are dropped.
pub fn run_final_states(model: &Model, init: &PathState, cfg: &SimConfig, t_end: f64) -> Result<(Vec<PathState>, usize)> {
    cfg.validate()?;
    if !init.is_valid(model) {
        return domain("initial state violates the alcove or center constraints");
    }
    let results: Vec<Result<PathState>> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| run_path(model, init, cfg, t_end, &mut path_rng(cfg.seed, i)))
        .collect();
    let mut states = Vec::with_capacity(results.len());
    let mut failures = 0;
    let mut first = None;
    for r in results {
        match r {
            Ok(s) => states.push(s),
            Err(e @ EdpaError::StepFailure { .. }) => {
                failures += 1;
                first.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    check_failures(failures, cfg.paths, first)?;
    Ok((states, failures))
}

/// Histogram of positions at `t_end` (wrapped for the circle models).
pub fn run_ensemble(model: &Model, init: &PathState, cfg: &SimConfig, t_end: f64, spec: HistogramSpec) -> Result<EnsembleStats> {
    let (states, failures) = run_final_states(model, init, cfg, t_end)?;
    let mut stats = EnsembleStats::new(spec);
    for s in &states {
        let xs = match model.period() {
            Some(l) => s.wrapped(l),
            None => s.x.clone(),
        };
        stats.add(&bin_counts(&spec, &xs));
    }
    stats.failures = failures;
    Ok(stats)
}

/// Mean and standard error of a statistic of the final states.
pub fn ensemble_mean<F: Fn(&PathState) -> f64>(states: &[PathState], f: F) -> (f64, f64) {
    mean_stderr(&states.iter().map(f).collect::<Vec<_>>())
}

pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Symmetric functions of the wrapped configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Observable {
    One,
    /// Σ_j exp(κ(cos((x_j - c)/r) - 1)).
    Bump { center: f64, kappa: f64 },
    /// 1 if the smallest circular gap exceeds the threshold.
    Pattern { threshold: f64 },
}

impl Observable {
    pub fn eval(&self, xs: &[f64], r: f64) -> f64 {
        match *self {
            Observable::One => 1.0,
            Observable::Bump { center, kappa } => xs.iter().map(|x| (kappa * (((x - center) / r).cos() - 1.0)).exp()).sum(),
            Observable::Pattern { threshold } => {
                let l = 2.0 * PI * r;
                let mut w: Vec<f64> = xs.iter().map(|x| x.rem_euclid(l)).collect();
                w.sort_by(f64::total_cmp);
                let mut g = w.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
                if let (Some(a), Some(b)) = (w.first(), w.last()) {
                    if w.len() > 1 {
                        g = g.min(a + l - b);
                    }
                }
                if g > threshold {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmrResult {
    pub estimate: f64,
    pub stderr: f64,
    pub weight_mean: f64,
    pub weight_stderr: f64,
    pub variance_blowup: bool,
}

/// Samples of (F(W(T))·weight, weight) with W independent wrapped motions from the
/// equidistant start, weighted by the winding sign and det[M_k(T, W_j(T))].
pub fn dmr_samples(obs: &Observable, big_t: f64, p: &ProcessParams, cfg: &SimConfig) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    if !(big_t > 0.0 && big_t < p.t_star) {
        return domain("DMR time must lie in (0, t*)");
    }
    let eta = p.equidistant();
    let l = p.circumference();
    let sd = big_t.sqrt();
    (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let mut sign = 1.0;
            let mut w = Vec::with_capacity(p.n);
            for &v in eta.points() {
                let z: f64 = StandardNormal.sample(&mut rng);
                let y = v + sd * z;
                let wind = (y / l).floor();
                if p.n % 2 == 1 && (wind as i64).rem_euclid(2) == 1 {
                    sign = -sign;
                }
                w.push(y - wind * l);
            }
            let weight = sign * det_martingale(&eta, big_t, &w, p)?;
            Ok((obs.eval(&w, p.r) * weight, weight))
        })
        .collect()
}

/// E[F(Ξ(T))] through the determinantal-martingale representation.
pub fn dmr_estimate(obs: &Observable, big_t: f64, p: &ProcessParams, cfg: &SimConfig) -> Result<DmrResult> {
    let s = dmr_samples(obs, big_t, p, cfg)?;
    let (estimate, stderr) = mean_stderr(&s.iter().map(|v| v.0).collect::<Vec<_>>());
    let (weight_mean, weight_stderr) = mean_stderr(&s.iter().map(|v| v.1).collect::<Vec<_>>());
    Ok(DmrResult {
        estimate,
        stderr,
        weight_mean,
        weight_stderr,
        variance_blowup: stderr > estimate.abs(),
    })
}

/// One-particle reductions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SingleModel {
    Ebes { r: f64, t_star: f64 },
    Cot { r: f64 },
    Bes3,
}

impl SingleModel {
    fn wall(&self) -> Option<f64> {
        match *self {
            SingleModel::Ebes { r, .. } | SingleModel::Cot { r } => Some(2.0 * PI * r),
            SingleModel::Bes3 => None,
        }
    }

    pub fn drift(&self, t: f64, x: f64) -> Result<f64> {
        match *self {
            SingleModel::Ebes { r, t_star } => {
                if t >= t_star {
                    return domain("time is past t*");
                }
                drift(&DriftParams::new(1, 2.0 * PI * r, t_star - t)?, x)
            }
            SingleModel::Cot { r } => drift_trig(r, x),
            SingleModel::Bes3 => drift_rational(x),
        }
    }

    fn dist(&self, x: f64) -> (f64, f64) {
        match self.wall() {
            Some(l) => (x.min(l - x), l / 2.0),
            None => (x, f64::INFINITY),
        }
    }
}

fn single_step(m: &SingleModel, t: f64, x: f64, dt: f64, dw: f64, cfg: &SimConfig, depth: u32, rng: &mut ChaCha8Rng) -> Result<f64> {
    let y = x + m.drift(t, x)? * dt + dw;
    let (d0, scale) = m.dist(x);
    let (d1, _) = m.dist(y);
    if y.is_finite() && d1 >= cfg.guard_frac * d0.min(scale) {
        return Ok(y);
    }
    if depth >= cfg.max_halvings {
        return Err(EdpaError::StepFailure { time: t, gap: d1 });
    }
    let z: f64 = StandardNormal.sample(rng);
    let dw1 = dw / 2.0 + (dt / 4.0).sqrt() * z;
    let mid = single_step(m, t, x, dt / 2.0, dw1, cfg, depth + 1, rng)?;
    single_step(m, t + dt / 2.0, mid, dt / 2.0, dw - dw1, cfg, depth + 1, rng)
}

/// One path of the single-particle SDE, sampled at every base step.
pub fn simulate_single(m: &SingleModel, x0: f64, cfg: &SimConfig, t_end: f64, rng: &mut ChaCha8Rng) -> Result<Vec<(f64, f64)>> {
    match m.wall() {
        Some(l) if !(x0 > 0.0 && x0 < l) => return domain("x0 must lie in (0, 2πr)"),
        None if !(x0 > 0.0) => return domain("x0 must be positive"),
        _ => {}
    }
    if let SingleModel::Ebes { t_star, .. } = m {
        if t_end >= *t_star {
            return domain("t_end must be below t*");
        }
    }
    let mut path = vec![(0.0, x0)];
    let (mut t, mut x) = (0.0, x0);
    while t < t_end - 1e-12 * t_end.max(1.0) {
        let h = cfg.dt.min(t_end - t);
        let z: f64 = StandardNormal.sample(rng);
        x = single_step(m, t, x, h, h.sqrt() * z, cfg, 0, rng)?;
        t += h;
        path.push((t, x));
    }
    Ok(path)
}

/// Histogram of the single-particle marginal at `t_end`.
pub fn single_ensemble(m: &SingleModel, x0: f64, cfg: &SimConfig, t_end: f64, spec: HistogramSpec) -> Result<EnsembleStats> {
    cfg.validate()?;
    let results: Vec<Result<f64>> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let path = simulate_single(m, x0, cfg, t_end, &mut path_rng(cfg.seed, i))?;
            Ok(path.last().map(|p| p.1).unwrap_or(x0))
        })
        .collect();
    let mut stats = EnsembleStats::new(spec);
    let mut first = None;
    for r in results {
        match r {
            Ok(x) => stats.add(&bin_counts(&spec, &[x])),
            Err(e @ EdpaError::StepFailure { .. }) => {
                stats.failures += 1;
                first.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    check_failures(stats.failures, cfg.paths, first)?;
    Ok(stats)
}
