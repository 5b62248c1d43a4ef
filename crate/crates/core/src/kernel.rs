//! Determinantal-martingale functions Φ, M, the martingale D, and correlation kernels.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{domain, EdpaError, Result};
use crate::linalg::det;
use crate::process::{p_bm, sigma, wrapped_kernel, Configuration, KernelMethod, ProcessParams};
use crate::quad::{gauss_hermite, integrate_c};
use crate::special::theta::{theta1_prime_zero, theta_ln, ModularNome, Theta};

pub type InitialMeasure = Configuration;

/// Series terms with log-size below this (relative to O(1) terms) are dropped.
pub const LOG_TERM_CUT: f64 = -70.0;
const CUT: f64 = LOG_TERM_CUT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelQuery {
    pub s: f64,
    pub x: f64,
    pub t: f64,
    pub y: f64,
}

impl KernelQuery {
    pub fn new(s: f64, x: f64, t: f64, y: f64) -> Self {
        Self { s, x, t, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum MMethod {
    Quadrature,
    #[default]
    Series,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum KernelForm {
    MartingaleSum,
    #[default]
    Series,
}

fn tau_phi(p: &ProcessParams) -> f64 {
    p.n as f64 * p.t_star / (2.0 * PI * p.r * p.r)
}

/// θ₁'(0; iT)·e^{πT/4}.
fn theta1_prime_reduced(t: f64) -> Result<f64> {
    if t >= 1.0 {
        let mut s = 0.0;
        for j in 1..64 {
            let a = j as f64 - 0.5;
            let term = (2 * j - 1) as f64 * (-PI * t * (a * a - 0.25)).exp();
            s += if j % 2 == 1 { term } else { -term };
            if term < 1e-18 * s.abs() {
                break;
            }
        }
        Ok(2.0 * PI * s)
    } else {
        Ok(theta1_prime_zero(&ModularNome::from_tau_im(t)?)? * (PI * t / 4.0).exp())
    }
}

fn ln_th(kind: Theta, v: C, nome: &ModularNome) -> Result<C> {
    theta_ln(kind, v, nome)
}

fn ln_phi(xi: &InitialMeasure, k: usize, z: C, p: &ProcessParams) -> Result<C> {
    let u = xi.points();
    let n = u.len();
    if k >= n {
        return domain(format!("atom index {k} out of range"));
    }
    let l = p.circumference();
    let nome = ModularNome::from_tau_im(tau_phi(p))?;
    let ubar = xi.center();
    let mut acc = ln_th(Theta::One, (ubar + z - u[k]) / l, &nome)? - ln_th(Theta::One, C::new(ubar / l, 0.0), &nome)?;
    for m in (0..n).filter(|&m| m != k) {
        acc += ln_th(Theta::One, (z - u[m]) / l, &nome)? - ln_th(Theta::One, C::new((u[k] - u[m]) / l, 0.0), &nome)?;
    }
    Ok(acc)
}

/// Φ_{ξ,u_k}(z), k zero-based.
pub fn phi(xi: &InitialMeasure, k: usize, z: C, p: &ProcessParams) -> Result<C> {
    if xi.len() != p.n {
        return domain("initial measure size differs from N");
    }
    Ok(ln_phi(xi, k, z, p)?.exp())
}

/// Closed form of Φ for the equidistant start.
pub fn phi_equidistant(p: &ProcessParams, k: usize, z: C) -> Result<C> {
    let nf = p.n as f64;
    let nome = ModularNome::from_tau_im(tau_phi(p))?;
    let nome_n = nome.scaled(nf)?;
    let w = z / p.circumference() - k as f64 / nf;
    let a = ln_th(Theta::One, w * nf, &nome_n)? + ln_th(Theta::One, w + 0.5, &nome)?
        - ln_th(Theta::One, w, &nome)?
        - ln_th(Theta::One, C::new(0.5, 0.0), &nome)?;
    let c = theta1_prime_zero(&nome)? / (nf * theta1_prime_zero(&nome_n)?);
    Ok(a.exp() * c)
}

fn hermite_rule(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut g = cache.lock().unwrap();
    g.entry(n).or_insert_with(|| Arc::new(gauss_hermite(n))).clone()
}

fn check_time(p: &ProcessParams, t: f64) -> Result<()> {
    if !(t >= 0.0 && t <= p.t_star * (1.0 - 1e-6)) {
        return domain(format!("time {t} outside [0, t*(1-1e-6)]"));
    }
    Ok(())
}

/// M by Gauss–Hermite averaging of Φ(x + iW̃(t)).
pub fn mart_m_quadrature(xi: &InitialMeasure, k: usize, t: f64, x: f64, p: &ProcessParams) -> Result<f64> {
    check_time(p, t)?;
    if t == 0.0 {
        return Ok(phi(xi, k, C::new(x, 0.0), p)?.re);
    }
    let s_eff = 1.0 / (1.0 / t - 1.0 / p.t_star);
    let scale = (2.0 * s_eff).sqrt();
    let norm = scale / (2.0 * PI * t).sqrt();
    let eval = |nodes: usize| -> Result<f64> {
        let rule = hermite_rule(nodes);
        let mut s = 0.0;
        for (u, w) in rule.0.iter().zip(&rule.1) {
            if !(*w > 0.0 && u.is_finite()) {
                continue;
            }
            let ww = scale * u;
            let lg = ln_phi(xi, k, C::new(x, ww), p)? - ww * ww / (2.0 * p.t_star);
            s += w * lg.exp().re;
        }
        Ok(s * norm)
    };
    let mut nodes = 64;
    let mut prev = eval(nodes)?;
    while nodes < 256 {
        nodes *= 2;
        let cur = eval(nodes)?;
        if (cur - prev).abs() <= 1e-10 * prev.abs().max(1.0) {
            return Ok(cur);
        }
        prev = cur;
    }
    let half = (2.0 * s_eff * 50.0).sqrt();
    let f = |w: f64| {
        ln_phi(xi, k, C::new(x, w), p)
            .map(|lg| (lg - w * w / (2.0 * t)).exp())
            .unwrap_or(C::new(f64::NAN, 0.0))
    };
    let v = integrate_c(f, -half, half, 1e-13)?.re / (2.0 * PI * t).sqrt();
    if !v.is_finite() {
        return Err(EdpaError::Accuracy { residual: f64::NAN, terms: nodes });
    }
    Ok(v)
}

/// M_{η,v_k}(t, x) from its Gaussian-integrated series; k zero-based.
pub fn mart_m_series(p: &ProcessParams, k: usize, t: f64, x: f64) -> Result<f64> {
    check_time(p, t)?;
    if k >= p.n {
        return domain(format!("atom index {k} out of range"));
    }
    let (nf, r, ts) = (p.n as f64, p.r, p.t_star);
    let c2 = 1.0 / (2.0 * r * r);
    let l0 = nf * nf * ts / (8.0 * r * r);
    let pref = 2.0 * PI / (nf * theta1_prime_reduced(nf * nf * ts / (2.0 * PI * r * r))?);
    let th = x / (2.0 * r) - k as f64 * PI / nf;
    let alt = |n: i64| if (n - 1).rem_euclid(2) == 0 { 1.0 } else { -1.0 };

    let mut s1 = 0.0;
    for n in 1..10_000i64 {
        let a = n as f64 - 0.5;
        let e = -a * a * nf * nf * (ts - t) * c2 + l0;
        if e < CUT {
            break;
        }
        s1 += alt(n) * e.exp() * ((2 * n - 1) as f64 * nf * th).cos();
    }

    let mut s2 = 0.0;
    for n in 1..10_000i64 {
        let a = n as f64 - 0.5;
        let lim = ((2 * n - 1) as f64 * nf - 2.0) / 2.0;
        let outer = -a * a * nf * nf * ts * c2 + l0;
        if outer + lim.max(0.0).powi(2) * t * c2 < CUT {
            break;
        }
        let mm = lim.ceil() as i64 + 1;
        let mut inner = 0.0;
        for m in -mm..=mm {
            let sg = sigma(p.n - 1, m);
            if sg.abs() <= lim + 1e-12 {
                inner += (outer + sg * sg * t * c2).exp() * (2.0 * sg * th).cos();
            }
        }
        s2 += alt(n) * inner;
    }

    let mut s3 = 0.0;
    let mut dropped = f64::NEG_INFINITY;
    {
        let turn = if t > 0.0 { 2.0 * nf * ts / t } else { f64::INFINITY };
        let a_peak = t / (nf * (ts - t));
        for dir in [1i64, -1] {
            let mut n = if dir == 1 { 1 } else { 0 };
            loop {
                let a = n as f64 - 0.5;
                let outer = -a * a * nf * nf * (ts - t) * c2 + l0;
                let e1 = outer - nf * ts / (r * r) + (1.0 + (2 * n - 1) as f64 * nf) * t * c2;
                let past = if dir == 1 { a > a_peak } else { true };
                if e1 < CUT && past {
                    break;
                }
                let mut l = 1i64;
                loop {
                    let mode = (2 * n - 1) as f64 * nf + 2.0 * l as f64;
                    if mode > turn {
                        let lf = l as f64;
                        dropped = dropped.max(outer - lf * nf * ts / (r * r) + lf * (lf + (2 * n - 1) as f64 * nf) * t * c2);
                        break;
                    }
                    let lf = l as f64;
                    let e = outer - lf * nf * ts / (r * r) + lf * (lf + (2 * n - 1) as f64 * nf) * t * c2;
                    if e < CUT {
                        break;
                    }
                    let g = 1.0 / (1.0 + (-lf * nf * ts / (r * r)).exp());
                    s3 += alt(n) * 2.0 * g * e.exp() * (mode * th).cos();
                    l += 1;
                }
                n += dir;
                if n.abs() > 100_000 {
                    return Err(EdpaError::Budget("M series outer sum did not terminate".into()));
                }
            }
        }
    }
    check_dropped(dropped)?;
    Ok(pref * (s1 + s2 + s3))
}

// The ℓ-sums are asymptotic once t > t*/2; refuse when the first omitted term is visible.
fn check_dropped(dropped: f64) -> Result<()> {
    if dropped > -12.0 {
        return Err(EdpaError::Accuracy { residual: dropped.exp(), terms: 0 });
    }
    Ok(())
}

/// M for the equidistant start: series when it is accurate, quadrature otherwise.
pub fn mart_m_equidistant(p: &ProcessParams, k: usize, t: f64, x: f64) -> Result<f64> {
    match mart_m_series(p, k, t, x) {
        Err(EdpaError::Accuracy { .. }) => mart_m_quadrature(&p.equidistant(), k, t, x, p),
        other => other,
    }
}

fn is_equidistant(xi: &InitialMeasure, p: &ProcessParams) -> bool {
    let v = p.equidistant();
    xi.len() == p.n
        && (xi.delta() - v.delta()).abs() < 1e-12 * p.r.max(1.0)
        && xi.points().iter().zip(v.points()).all(|(a, b)| (a - b).abs() < 1e-12 * p.r.max(1.0))
}

pub fn mart_m(xi: &InitialMeasure, k: usize, t: f64, x: f64, p: &ProcessParams, method: MMethod) -> Result<f64> {
    match method {
        MMethod::Quadrature => mart_m_quadrature(xi, k, t, x, p),
        MMethod::Series => {
            if !is_equidistant(xi, p) {
                return Err(EdpaError::Unsupported("series form of M needs the equidistant start".into()));
            }
            mart_m_series(p, k, t, x)
        }
    }
}

/// D(t, w) = det[M_k(t, w_j)].
pub fn det_martingale(xi: &InitialMeasure, t: f64, w: &[f64], p: &ProcessParams) -> Result<f64> {
    if w.len() != p.n {
        return domain("need N positions");
    }
    let eq = is_equidistant(xi, p);
    let mut m = vec![vec![C::new(0.0, 0.0); p.n]; p.n];
    for (j, &wj) in w.iter().enumerate() {
        for k in 0..p.n {
            let v = if t == 0.0 {
                phi(xi, k, C::new(wj, 0.0), p)?.re
            } else if eq {
                mart_m_equidistant(p, k, t, wj)?
            } else {
                mart_m_quadrature(xi, k, t, wj, p)?
            };
            m[j][k] = C::new(v, 0.0);
        }
    }
    Ok(det(&m).re)
}

fn check_query(q: &KernelQuery, t_max: f64) -> Result<()> {
    if !(q.s > 0.0 && q.s < t_max && q.t >= 0.0 && q.t < t_max) {
        return domain("kernel needs 0 < s < t* and 0 <= t < t*");
    }
    if !(q.x.is_finite() && q.y.is_finite()) {
        return domain("non-finite kernel position");
    }
    Ok(())
}

fn propagator_term(n: usize, r: f64, q: &KernelQuery) -> Result<f64> {
    if q.s > q.t {
        wrapped_kernel(n, r, q.s - q.t, q.y, q.x, KernelMethod::ThetaForm)
    } else {
        Ok(0.0)
    }
}

/// K_η(s, x; t, y) of the finite system.
pub fn kernel_k(q: &KernelQuery, p: &ProcessParams, form: KernelForm) -> Result<C> {
    check_query(q, p.t_star * (1.0 - 1e-6))?;
    let g = match form {
        KernelForm::MartingaleSum => {
            let v = p.equidistant();
            let mut s = 0.0;
            for k in 0..p.n {
                let pk = wrapped_kernel(p.n, p.r, q.s, v.points()[k], q.x, KernelMethod::ThetaForm)?;
                let mk = if q.t == 0.0 {
                    phi(&v, k, C::new(q.y, 0.0), p)?.re
                } else {
                    mart_m_equidistant(p, k, q.t, q.y)?
                };
                s += pk * mk;
            }
            C::new(s, 0.0)
        }
        KernelForm::Series => match g_series(q, p) {
            Err(EdpaError::Accuracy { .. }) => return kernel_k(q, p, KernelForm::MartingaleSum),
            other => other?,
        },
    };
    Ok(g - propagator_term(p.n, p.r, q)?)
}

// Σ_k e^{-πTk²+2πikv}-type sum: ½Σ_± e^{±iA} θ₃(ν ∓ iβ; iT) scaled by e^{base}.
fn cos_theta3(base: f64, a: f64, nu: f64, beta: f64, nome: &ModularNome) -> Result<C> {
    let mut acc = C::new(0.0, 0.0);
    for sgn in [1.0, -1.0] {
        let lg = ln_th(Theta::Three, C::new(nu, -sgn * beta), nome)?;
        acc += (lg + base + C::new(0.0, sgn * a)).exp();
    }
    Ok(acc * 0.5)
}

// The triple series for G_η.
fn g_series(q: &KernelQuery, p: &ProcessParams) -> Result<C> {
    let (s, x, t, y) = (q.s, q.x, q.t, q.y);
    let (nf, r, ts) = (p.n as f64, p.r, p.t_star);
    let c2 = 1.0 / (2.0 * r * r);
    let l0 = nf * nf * ts / (8.0 * r * r);
    let pref = 1.0 / (theta1_prime_reduced(nf * nf * ts / (2.0 * PI * r * r))? * r);
    let l = p.circumference();
    let alt = |n: i64| if (n - 1).rem_euclid(2) == 0 { 1.0 } else { -1.0 };

    // θ₂ factor times the first M-series sum
    let nome_b = ModularNome::from_tau_im(nf * nf * s / (2.0 * PI * r * r))?;
    let mut s1 = 0.0;
    for n in 1..10_000i64 {
        let a = n as f64 - 0.5;
        let e = -a * a * nf * nf * (ts - t) * c2 + l0;
        if e < CUT {
            break;
        }
        s1 += alt(n) * e.exp() * ((2 * n - 1) as f64 * nf * y / (2.0 * r)).cos();
    }
    let term_a = ln_th(Theta::Two, C::new(nf * x / l, 0.0), &nome_b)?.exp() * s1;

    // finite σ sums with θ₃
    let mut term_b = C::new(0.0, 0.0);
    for n in 1..10_000i64 {
        let a = n as f64 - 0.5;
        let lim = ((2 * n - 1) as f64 * nf - 2.0) / 2.0;
        let outer = -a * a * nf * nf * ts * c2 + l0;
        if outer + lim.max(0.0).powi(2) * t.max(s) * c2 < CUT {
            break;
        }
        let mm = lim.ceil() as i64 + 1;
        for m in -mm..=mm {
            let sg = sigma(p.n - 1, m);
            if sg.abs() > lim + 1e-12 {
                continue;
            }
            let arg = C::new(nf * x / l, -nf * sg * s / (2.0 * PI * r * r));
            let lg = ln_th(Theta::Three, arg, &nome_b)? + (outer + sg * sg * (t - s) * c2) + C::new(0.0, sg * (y - x) / r);
            term_b += alt(n) * lg.exp();
        }
    }

    // (n, ℓ) modes, k-sum collapsed into θ₃
    let mut term_c = C::new(0.0, 0.0);
    let mut dropped = f64::NEG_INFINITY;
    {
        let turn = if t > 0.0 { 2.0 * nf * ts / t } else { f64::INFINITY };
        let a_peak = t / (nf * (ts - t));
        for dir in [1i64, -1] {
            let mut n = if dir == 1 { 1 } else { 0 };
            loop {
                let a = n as f64 - 0.5;
                let e1 = -a * a * nf * nf * (ts - t) * c2 + l0 - nf * ts / (r * r)
                    + (1.0 + (2 * n - 1) as f64 * nf) * t * c2;
                let past = if dir == 1 { a > a_peak } else { true };
                if e1 < CUT && past {
                    break;
                }
                let mut ll = 1i64;
                loop {
                    let mode = (2 * n - 1) as f64 * nf + 2.0 * ll as f64;
                    let lf = ll as f64;
                    let peak = -a * a * nf * nf * ts * c2 + l0 - lf * nf * ts / (r * r) + mode * mode * t * c2 / 4.0;
                    if mode > turn {
                        dropped = dropped.max(peak);
                        break;
                    }
                    if peak < CUT {
                        break;
                    }
                    let g = 1.0 / (1.0 + (-lf * nf * ts / (r * r)).exp());
                    let base = -a * a * nf * nf * ts * c2 + l0 - lf * nf * ts / (r * r)
                        + mode * mode * (t - s) * c2 / 4.0;
                    let beta = mode * nf * s / (4.0 * PI * r * r);
                    let v = cos_theta3(base, mode * (y - x) / (2.0 * r), nf * x / l, beta, &nome_b)?;
                    term_c += alt(n) * g * v;
                    ll += 1;
                }
                n += dir;
                if n.abs() > 100_000 {
                    return Err(EdpaError::Budget("kernel outer sum did not terminate".into()));
                }
            }
        }
    }
    check_dropped(dropped)?;
    Ok(pref * (term_a + term_b + 2.0 * term_c))
}

/// K̂_η of the t* → ∞ (trigonometric) system.
pub fn kernel_k_homogeneous(q: &KernelQuery, n: usize, r: f64) -> Result<C> {
    if !(q.s > 0.0 && q.t >= 0.0) {
        return domain("homogeneous kernel needs s > 0 and t >= 0");
    }
    let nf = n as f64;
    let c2 = 1.0 / (2.0 * r * r);
    let l = 2.0 * PI * r;
    let (s, x, t, y) = (q.s, q.x, q.t, q.y);
    let nome = ModularNome::from_tau_im(nf * nf * s / (2.0 * PI * r * r))?;
    let mut g = cos_theta3(
        nf * nf * (t - s) / (8.0 * r * r),
        nf * (y - x) / (2.0 * r),
        nf * x / l,
        nf * nf * s / (4.0 * PI * r * r),
        &nome,
    )? / l;
    let lim = (nf - 2.0) / 2.0;
    let mm = lim.ceil() as i64 + 1;
    for m in -mm..=mm {
        let sg = sigma(n - 1, m);
        if sg.abs() > lim + 1e-12 {
            continue;
        }
        let arg = C::new(nf * x / l, -nf * sg * s / (2.0 * PI * r * r));
        let lg = ln_th(Theta::Three, arg, &nome)? + sg * sg * (t - s) * c2 + C::new(0.0, sg * (y - x) / r);
        g += lg.exp() / l;
    }
    Ok(g - propagator_term(n, r, q)?)
}

/// K̂_eq(t - s, y - x) of the equilibrium process.
pub fn kernel_k_equilibrium(dt: f64, dx: f64, n: usize, r: f64) -> C {
    let nf = n as f64;
    let l = 2.0 * PI * r;
    let c2 = 1.0 / (2.0 * r * r);
    let ka = (nf * dx / (2.0 * r)).cos() / l;
    let lim = (nf - 2.0) / 2.0;
    let low = |dtt: f64| -> f64 {
        let mm = lim.ceil() as i64 + 1;
        (-mm..=mm)
            .map(|m| sigma(n - 1, m))
            .filter(|sg| sg.abs() <= lim + 1e-12)
            .map(|sg| (sg * sg * dtt * c2).exp() * (sg * dx / r).cos())
            .sum::<f64>()
    };
    let v = if dt > 0.0 {
        low(dt) / l + (nf * nf * dt / (8.0 * r * r)).exp() * ka
    } else if dt == 0.0 {
        low(0.0) / l + ka
    } else {
        let mut hi = 0.0;
        let mut m = 0i64;
        loop {
            let mut added = 0.0;
            for mm in if m == 0 { vec![0] } else { vec![m, -m] } {
                let sg = sigma(n - 1, mm);
                if sg.abs() > lim + 1e-12 {
                    let e = (sg * sg * dt * c2).exp();
                    hi += e * (sg * dx / r).cos();
                    added += e;
                }
            }
            if m as f64 > lim + 1.0 && added < 1e-18 {
                break;
            }
            m += 1;
        }
        -hi / l + (nf * nf * dt / (8.0 * r * r)).exp() * ka
    };
    C::new(v, 0.0)
}

/// Extended sine kernel with density ρ.
pub fn extended_sine(dt: f64, dx: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return domain("density must be positive");
    }
    let f = |v: f64| C::new((PI * PI * v * v * dt / 2.0).exp() * (PI * v * dx).cos(), 0.0);
    if dt > 0.0 {
        Ok(integrate_c(f, 0.0, rho, 1e-13)?.re)
    } else if dt == 0.0 {
        Ok(if dx == 0.0 { rho } else { (PI * rho * dx).sin() / (PI * dx) })
    } else {
        // -∫_ρ^∞ = ∫_0^ρ - ∫_0^∞, the latter a Gaussian Fourier integral
        let a = PI * PI * -dt / 2.0;
        let full = 0.5 * (PI / a).sqrt() * (-(PI * dx).powi(2) / (4.0 * a)).exp();
        Ok(integrate_c(f, 0.0, rho, 1e-13)?.re - full)
    }
}

// ½∫_{|v|≤b} e^{π²v²(t-s)/2+iπv(y-x)} θ₃(ρx - iπvρs; 2πiρ²s) dv, theta expanded termwise
fn sine_theta_integral(q: &KernelQuery, rho: f64, b: f64) -> Result<C> {
    let (s, x, t, y) = (q.s, q.x, q.t, q.y);
    let width = (2.0 * -CUT / (PI * PI * s)).sqrt() / (2.0 * rho);
    let f = |v: f64| {
        let c = v / (2.0 * rho);
        let mut acc = C::new(0.0, 0.0);
        for k in (c - width).floor() as i64 - 1..=(c + width).ceil() as i64 + 1 {
            let kf = k as f64;
            let e = -2.0 * PI * PI * rho * s * kf * (kf * rho - v) + PI * PI * v * v * (t - s) / 2.0;
            acc += C::new(e, PI * v * (y - x) + 2.0 * PI * kf * rho * x).exp();
        }
        acc
    };
    let mut base = vec![-b];
    let mut m = (-b / rho).ceil() as i64;
    while (m as f64) * rho < b {
        if (m as f64 * rho) > -b {
            base.push(m as f64 * rho);
        }
        m += 1;
    }
    base.push(b);
    let breaks = refine_breaks(&base, 1.0 / (PI * PI * rho * s));
    let mut v = C::new(0.0, 0.0);
    for w in breaks.windows(2) {
        v += integrate_c(f, w[0], w[1], 1e-13)?;
    }
    Ok(0.5 * v)
}

// Add points p ± δ·4^j around each break so that layers of width δ are resolved.
fn refine_breaks(base: &[f64], delta: f64) -> Vec<f64> {
    let mut out = base.to_vec();
    for (i, &p) in base.iter().enumerate() {
        let lo = if i > 0 { base[i - 1] } else { p };
        let hi = if i + 1 < base.len() { base[i + 1] } else { p };
        let mut d = delta;
        while d < 0.5 * (p - lo).max(hi - p) {
            if p - d > lo {
                out.push(p - d);
            }
            if p + d < hi {
                out.push(p + d);
            }
            d *= 4.0;
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup();
    out
}

/// Kernel of the infinite-particle limit at density ρ; `t_star = None` is the homogeneous case.
pub fn kernel_k_infinite(q: &KernelQuery, rho: f64, t_star: Option<f64>) -> Result<C> {
    if !(rho > 0.0) {
        return domain("density must be positive");
    }
    if !(q.s > 0.0 && q.t >= 0.0) {
        return domain("infinite kernel needs s > 0 and t >= 0");
    }
    let nome = ModularNome::from_tau_im(2.0 * PI * rho * rho * q.s)?;
    let prop = if q.s > q.t { p_bm(q.s - q.t, q.x, q.y) } else { 0.0 };
    let ts = match t_star {
        None => return Ok(sine_theta_integral(q, rho, rho)? - prop),
        Some(ts) => ts,
    };
    if !(q.s < ts && q.t < ts * (1.0 - 1e-6)) {
        return domain("times must lie in [0, t*)");
    }
    let (s, x, t, y) = (q.s, q.x, q.t, q.y);
    let big_t = 2.0 * PI * rho * rho * ts;
    let l0 = PI * big_t / 4.0;
    let tp = theta1_prime_reduced(big_t)?;
    let alt = |n: i64| if (n - 1).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let mut first = C::new(0.0, 0.0);
    for n in 1..10_000i64 {
        let a = n as f64 - 0.5;
        let e = -2.0 * PI * PI * a * a * rho * rho * ts + l0;
        let b = (2 * n - 1) as f64 * rho;
        if e + PI * PI * b * b * t.max(s) / 2.0 < CUT {
            break;
        }
        first += alt(n) * e.exp() * 2.0 * sine_theta_integral(q, rho, b)?;
    }
    first *= PI / tp;

    let mut second = C::new(0.0, 0.0);
    if t > 0.0 {
        let wmax = 2.0 * rho * ts / t;
        for dir in [1i64, -1] {
            let mut n = if dir == 1 { 1 } else { 0 };
            loop {
                let a = n as f64 - 0.5;
                let w0 = (2 * n - 1) as f64 * rho;
                let outer = -2.0 * PI * PI * a * a * rho * rho * ts + l0;
                let bound = outer + PI * PI * w0 * w0 * t / 2.0;
                if bound < CUT || w0 > wmax {
                    break;
                }
                let vmax = wmax - w0;
                if vmax > 0.0 {
                    let f = |v: f64| {
                        let w = w0 + v;
                        let g = 1.0 / (1.0 + (-2.0 * PI * PI * v * rho * ts).exp());
                        let base = outer - 2.0 * PI * PI * v * rho * ts + PI * PI * w * w * (t - s) / 2.0;
                        cos_theta3(base, PI * w * (y - x), rho * x, PI * rho * s * w, &nome)
                            .map(|c| c * g)
                            .unwrap_or(C::new(f64::NAN, 0.0))
                    };
                    let mut lo = 0.0;
                    let mut hi = (1.0 / (2.0 * PI * PI * rho * ts)).min(vmax);
                    loop {
                        second += alt(n) * integrate_c(f, lo, hi, 1e-14)?;
                        if hi >= vmax {
                            break;
                        }
                        lo = hi;
                        hi = (hi * 4.0).min(vmax);
                    }
                }
                n += dir;
                if n.abs() > 10_000 {
                    return Err(EdpaError::Budget("infinite kernel outer sum did not terminate".into()));
                }
            }
        }
        second *= 2.0 * PI / tp;
    }
    Ok(first + second - prop)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelChoice {
    Finite(ProcessParams),
    Homogeneous { n: usize, r: f64 },
    Equilibrium { n: usize, r: f64 },
    Infinite { rho: f64, t_star: Option<f64> },
}

impl KernelChoice {
    pub fn eval(&self, q: &KernelQuery) -> Result<C> {
        match *self {
            KernelChoice::Finite(p) => kernel_k(q, &p, KernelForm::Series),
            KernelChoice::Homogeneous { n, r } => kernel_k_homogeneous(q, n, r),
            KernelChoice::Equilibrium { n, r } => Ok(kernel_k_equilibrium(q.t - q.s, q.y - q.x, n, r)),
            KernelChoice::Infinite { rho, t_star } => kernel_k_infinite(q, rho, t_star),
        }
    }
}

/// ρ((t₁,x₁),…,(t_m,x_m)) = det[K(t_i, x_i; t_j, x_j)].
pub fn correlation_rho(points: &[(f64, f64)], choice: &KernelChoice) -> Result<f64> {
    if points.len() > 6 {
        return Err(EdpaError::Budget(format!("{} points exceed the desk-scale limit of 6", points.len())));
    }
    let n = points.len();
    let mut m = vec![vec![C::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for j in 0..n {
            let (s, x) = points[i];
            let (t, y) = points[j];
            m[i][j] = choice.eval(&KernelQuery::new(s, x, t, y))?;
        }
    }
    let d = det(&m);
    if d.im.abs() > 1e-8 * d.norm().max(1.0) {
        return Err(EdpaError::Accuracy { residual: d.im.abs(), terms: n });
    }
    Ok(d.re)
}

/// The fixed 3×3 query grid used by the relaxation study.
pub fn relaxation_grid(r: f64) -> Vec<KernelQuery> {
    let mut g = Vec::new();
    for &x in &[0.3, 2.1, 4.4] {
        for &y in &[0.9, 3.2, 5.0] {
            g.push(KernelQuery::new(0.2, x * r, 0.5, y * r));
        }
    }
    g
}

/// d(T) = max over the grid of |K̂_η(s+T, x; t+T, y) - K̂_eq(t-s, y-x)|.
pub fn relaxation_distance(n: usize, r: f64, big_t: f64, grid: &[KernelQuery]) -> Result<f64> {
    let mut d: f64 = 0.0;
    for q in grid {
        let shifted = KernelQuery::new(q.s + big_t, q.x, q.t + big_t, q.y);
        let a = kernel_k_homogeneous(&shifted, n, r)?;
        let b = kernel_k_equilibrium(q.t - q.s, q.y - q.x, n, r);
        d = d.max((a - b).norm());
    }
    Ok(d)
}
