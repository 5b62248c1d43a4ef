//! Circle parameters, configurations, wrapped heat kernels, the Karlin–McGregor
//! determinant, h_N^A and the transition densities built from them.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, EdpaError, Result};
use crate::linalg::det_with_condition;
use crate::special::products::dedekind_eta;
use crate::special::theta::{theta, theta_ln, ModularNome, Theta};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    pub n: usize,
    pub r: f64,
    pub t_star: f64,
}

impl ProcessParams {
    pub fn new(n: usize, r: f64, t_star: f64) -> Result<Self> {
        if n < 1 || !(r > 0.0 && r.is_finite()) || !(t_star > 0.0) {
            return domain(format!("invalid process parameters N={n}, r={r}, t*={t_star}"));
        }
        Ok(Self { n, r, t_star })
    }

    pub fn circumference(&self) -> f64 {
        2.0 * PI * self.r
    }

    /// δ = -πr(N-2) of the equidistant start.
    pub fn delta0(&self) -> f64 {
        -PI * self.r * (self.n as f64 - 2.0)
    }

    pub fn equidistant(&self) -> Configuration {
        let l = self.circumference();
        Configuration {
            points: (0..self.n).map(|j| l * j as f64 / self.n as f64).collect(),
            delta: self.delta0(),
        }
    }
}

/// Ordered points in [0, 2πr) with the center index δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    points: Vec<f64>,
    delta: f64,
}

impl Configuration {
    pub fn new(points: Vec<f64>, delta: f64, r: f64) -> Result<Self> {
        let c = Self { points, delta };
        if !c.in_alcove(r) {
            return domain("points must satisfy 0 <= x_1 < ... < x_N < 2πr");
        }
        let k = delta / (PI * r);
        if (k - k.round()).abs() > 1e-9 {
            return domain("delta must lie in πrℤ");
        }
        let cen = c.center();
        if !(cen > 0.0 && cen < 2.0 * PI * r) {
            return domain(format!("center {cen} outside (0, 2πr)"));
        }
        Ok(c)
    }

    /// Pick δ in the class of `delta_class` mod 2πr so that the center lies in (0, 2πr).
    pub fn with_center_class(points: Vec<f64>, delta_class: f64, r: f64) -> Result<Self> {
        let l = 2.0 * PI * r;
        let s: f64 = points.iter().sum();
        let m = ((delta_class + s) / l).floor();
        Self::new(points, delta_class - m * l, r)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// x̄_δ = δ + Σ x_j.
    pub fn center(&self) -> f64 {
        self.delta + self.points.iter().sum::<f64>()
    }

    pub fn in_alcove(&self, r: f64) -> bool {
        let p = &self.points;
        !p.is_empty() && p[0] >= 0.0 && *p.last().unwrap() < 2.0 * PI * r && p.windows(2).all(|w| w[0] < w[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flag {
    OutOfAlcove,
    Boundary,
    UnprovenRepresentation,
    IllConditioned,
}

/// A value together with the caveats attached to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    pub flags: Vec<Flag>,
}

/// σ_M(m): m for M odd, m - 1/2 for M even.
pub fn sigma(m_big: usize, m: i64) -> f64 {
    if m_big % 2 == 1 {
        m as f64
    } else {
        m as f64 - 0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum KernelMethod {
    ImageSum,
    #[default]
    ThetaForm,
    Spectral,
}

fn gauss(t: f64, d: f64) -> f64 {
    (-d * d / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// p_BM(t, y|x).
pub fn p_bm(t: f64, y: f64, x: f64) -> f64 {
    gauss(t, y - x)
}

/// Wrapped kernel p^r_{A_{N-1}}(t, y|x); signed for N odd.
pub fn wrapped_kernel(n: usize, r: f64, t: f64, x: f64, y: f64, method: KernelMethod) -> Result<f64> {
    if !(t > 0.0) {
        return domain("wrapped kernel needs t > 0");
    }
    let l = 2.0 * PI * r;
    let odd = n % 2 == 1;
    match method {
        KernelMethod::ImageSum => {
            let d = y - x;
            let c = -(d / l).round() as i64;
            let mut s = 0.0;
            let mut k = 0i64;
            loop {
                let mut added = 0.0;
                for &ll in if k == 0 { &[0i64][..] } else { &[1i64, -1][..] } {
                    let idx = c + ll * k;
                    let sg = if odd && idx.rem_euclid(2) == 1 { -1.0 } else { 1.0 };
                    let v = sg * gauss(t, d + l * idx as f64);
                    s += v;
                    added += v.abs();
                }
                if k > 0 && added < 1e-17 * s.abs().max(1e-300) || k > 1_000_000 {
                    break;
                }
                k += 1;
            }
            Ok(s)
        }
        KernelMethod::ThetaForm => {
            let nome = ModularNome::from_tau_im(t / (2.0 * PI * r * r))?;
            let kind = if odd { Theta::Two } else { Theta::Three };
            Ok(theta(kind, C::new((y - x) / l, 0.0), &nome)?.re / l)
        }
        KernelMethod::Spectral => {
            let u = (y - x) / r;
            let mut s = 0.0;
            let mut m = 0i64;
            loop {
                let mut added = 0.0;
                for idx in if m == 0 { vec![0] } else { vec![m, -m] } {
                    let sgm = sigma_for(n, idx);
                    let v = (-sgm * sgm * t / (2.0 * r * r)).exp() * (sgm * u).cos();
                    s += v;
                    added += v.abs();
                }
                if m > 0 && added < 1e-18 || m > 10_000_000 {
                    break;
                }
                m += 1;
            }
            Ok(s / l)
        }
    }
}

// σ_{N-1}(m); N-1 = 0 behaves as even.
fn sigma_for(n: usize, m: i64) -> f64 {
    if n % 2 == 0 {
        m as f64
    } else {
        m as f64 - 0.5
    }
}

/// Absorbing Brownian kernel on [0, L].
pub fn q_abs(t: f64, y: f64, x: f64, len: f64) -> f64 {
    if t > 0.1 * len * len {
        let mut s = 0.0;
        for n in 1..100_000 {
            let k = n as f64 * PI / len;
            let e = (-k * k * t / 2.0).exp();
            s += e * (k * x).sin() * (k * y).sin();
            if e < 1e-18 {
                break;
            }
        }
        2.0 / len * s
    } else {
        let mut s = 0.0;
        let mut k = 0i64;
        loop {
            let mut added = 0.0;
            for idx in if k == 0 { vec![0] } else { vec![k, -k] } {
                let sh = 2.0 * len * idx as f64;
                let v = gauss(t, y - x + sh) - gauss(t, y + x + sh);
                s += v;
                added += gauss(t, y - x + sh).abs() + gauss(t, y + x + sh).abs();
            }
            if k > 0 && added < 1e-18 || k > 1_000_000 {
                break;
            }
            k += 1;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum KmForm {
    #[default]
    Determinant,
    Closed,
}

fn km_raw_det(n: usize, r: f64, t: f64, y: &[f64], x: &[f64]) -> Result<(f64, bool)> {
    let mut m = vec![vec![C::new(0.0, 0.0); n]; n];
    for j in 0..n {
        for k in 0..n {
            m[j][k] = C::new(wrapped_kernel(n, r, t, x[k], y[j], KernelMethod::ThetaForm)?, 0.0);
        }
    }
    let d = det_with_condition(&m);
    Ok((d.det.re, d.ill_conditioned()))
}

// Closed form for the equidistant start, with the center taken at δ₀.
fn km_closed(p: &ProcessParams, t: f64, y: &[f64]) -> Result<f64> {
    let (n, r) = (p.n, p.r);
    let nf = n as f64;
    let l = p.circumference();
    let nome = ModularNome::from_tau_im(nf * t / (2.0 * PI * r * r))?;
    let eta = dedekind_eta((-nf * t / (r * r)).exp())?;
    let mut lg = C::new(nf * (nf.sqrt() / l).ln() - (nf - 1.0) * (nf - 2.0) / 2.0 * eta.ln(), 0.0);
    let ybar = p.delta0() + y.iter().sum::<f64>();
    lg += theta_ln(Theta::One, C::new(ybar / l, 0.0), &nome)?;
    for j in 0..n {
        for k in j + 1..n {
            lg += theta_ln(Theta::One, C::new((y[k] - y[j]) / l, 0.0), &nome)?;
        }
    }
    Ok(lg.exp().re)
}

fn check_points(p: &ProcessParams, y: &[f64]) -> Result<()> {
    if y.len() != p.n || y.iter().any(|v| !v.is_finite()) {
        return domain(format!("expected {} finite positions", p.n));
    }
    Ok(())
}

/// q_N^A(t, y|v) from the equidistant start v.
pub fn km_determinant(p: &ProcessParams, t: f64, y: &[f64], form: KmForm) -> Result<Evaluation> {
    check_points(p, y)?;
    if !(t > 0.0) {
        return domain("km_determinant needs t > 0");
    }
    let mut flags = Vec::new();
    let l = p.circumference();
    let ybar = p.delta0() + y.iter().sum::<f64>();
    let alcove = Configuration { points: y.to_vec(), delta: p.delta0() }.in_alcove(p.r);
    if !alcove || !(ybar > 0.0 && ybar < l) {
        flags.push(Flag::OutOfAlcove);
    }
    let value = match form {
        KmForm::Closed => km_closed(p, t, y)?,
        KmForm::Determinant => {
            let v = p.equidistant();
            let (d, ill) = km_raw_det(p.n, p.r, t, y, v.points())?;
            if ill {
                flags.push(Flag::IllConditioned);
            }
            d
        }
    };
    Ok(Evaluation { value, flags })
}

/// Karlin–McGregor determinant from an arbitrary start; not a proven density.
pub fn km_determinant_from(p: &ProcessParams, t: f64, y: &[f64], x: &[f64], form: KmForm) -> Result<Evaluation> {
    check_points(p, y)?;
    check_points(p, x)?;
    if form == KmForm::Closed {
        return Err(EdpaError::Unsupported("closed form exists only for the equidistant start".into()));
    }
    let (d, ill) = km_raw_det(p.n, p.r, t, y, x)?;
    let mut flags = vec![Flag::UnprovenRepresentation];
    if ill {
        flags.push(Flag::IllConditioned);
    }
    Ok(Evaluation { value: d, flags })
}

// Number of cyclic shifts relating the center classes of two configurations.
fn center_shift(y: &Configuration, delta_ref: f64, l: f64) -> Result<i64> {
    let m = (y.delta - delta_ref) / l;
    if (m - m.round()).abs() > 1e-9 {
        return domain("center index not reachable from the reference class (δ differs by an odd multiple of πr)");
    }
    Ok(m.round() as i64)
}

/// Lift of y to the labeling whose center is measured with δ_ref.
fn lift(y: &Configuration, delta_ref: f64, l: f64) -> Result<Vec<f64>> {
    let m = center_shift(y, delta_ref, l)?;
    let mut pts = y.points.clone();
    for _ in 0..m.abs() {
        if m > 0 {
            let first = pts.remove(0);
            pts.push(first + l);
        } else {
            let last = pts.pop().unwrap();
            pts.insert(0, last - l);
        }
    }
    Ok(pts)
}

/// q_N^A(t, y|v) for a configuration in any reachable center class (positive in the interior).
pub fn q_equidistant(p: &ProcessParams, t: f64, y: &Configuration, form: KmForm) -> Result<f64> {
    let pts = lift(y, p.delta0(), p.circumference())?;
    Ok(km_determinant(p, t, &pts, form)?.value)
}

/// h_N^A(t*-t, x) with x̄ measured by `delta`.
pub fn h_a(p: &ProcessParams, s_remaining: f64, x: &[f64], delta: f64) -> Result<Evaluation> {
    check_points(p, x)?;
    if !(s_remaining > 0.0) {
        return domain("h needs t* - t > 0");
    }
    let (n, r) = (p.n, p.r);
    let nf = n as f64;
    let l = p.circumference();
    let cfg = Configuration { points: x.to_vec(), delta };
    let cen = cfg.center();
    let mut flags = Vec::new();
    if !cfg.in_alcove(r) || !(cen > 0.0 && cen < l) {
        flags.push(Flag::OutOfAlcove);
    }
    let boundary = cen.abs() < 1e-14 * l
        || (cen - l).abs() < 1e-14 * l
        || x.windows(2).any(|w| (w[1] - w[0]).abs() < 1e-14 * l)
        || (x[0] + l - x[n - 1]).abs() < 1e-14 * l;
    if boundary {
        flags.push(Flag::Boundary);
        return Ok(Evaluation { value: 0.0, flags });
    }
    let nome = ModularNome::from_tau_im(nf * s_remaining / (2.0 * PI * r * r))?;
    let ex = (nf - 1.0) * (nf - 2.0) / 2.0;
    let mut lg = C::new(-nf * (nf - 1.0) * (nf - 2.0) * p.t_star / (48.0 * r * r), 0.0);
    if ex > 0.0 {
        lg -= ex * dedekind_eta((-nf * s_remaining / (r * r)).exp())?.ln();
    }
    lg += theta_ln(Theta::One, C::new(cen / l, 0.0), &nome)?;
    for j in 0..n {
        for k in j + 1..n {
            lg += theta_ln(Theta::One, C::new((x[k] - x[j]) / l, 0.0), &nome)?;
        }
    }
    Ok(Evaluation { value: lg.exp().re, flags })
}

fn is_equidistant(p: &ProcessParams, x: &Configuration) -> bool {
    let v = p.equidistant();
    (x.delta - v.delta).abs() < 1e-12 * p.r.max(1.0)
        && x.points.iter().zip(v.points()).all(|(a, b)| (a - b).abs() < 1e-12 * p.r.max(1.0))
}

/// Exact killed-BM density for N = 2 in center/relative coordinates.
pub fn q2_exact(r: f64, t: f64, y: &Configuration, x: &Configuration) -> Result<f64> {
    if y.len() != 2 || x.len() != 2 {
        return domain("q2_exact is for two particles");
    }
    let l = 2.0 * PI * r;
    let yl = lift(y, x.delta, l)?;
    let (rho_y, c_y) = (yl[1] - yl[0], x.delta + yl[0] + yl[1]);
    let (rho_x, c_x) = (x.points[1] - x.points[0], x.center());
    Ok(2.0 * q_abs(2.0 * t, rho_y, rho_x, l) * q_abs(2.0 * t, c_y, c_x, l))
}

/// p_N^A(t, y|s, x).
pub fn transition_density(p: &ProcessParams, s: f64, x: &Configuration, t: f64, y: &Configuration) -> Result<Evaluation> {
    if !(0.0 <= s && s < t && t < p.t_star) {
        return domain("need 0 <= s < t < t*");
    }
    if x.len() != p.n || y.len() != p.n {
        return domain("configuration size differs from N");
    }
    let ratio = h_a(p, p.t_star - t, y.points(), y.delta)?.value / h_a(p, p.t_star - s, x.points(), x.delta)?.value;
    let mut flags = Vec::new();
    let q = if is_equidistant(p, x) {
        q_equidistant(p, t - s, y, KmForm::Closed)?
    } else if p.n == 2 {
        q2_exact(p.r, t - s, y, x)?
    } else {
        let yl = lift(y, x.delta, p.circumference())?;
        flags.push(Flag::UnprovenRepresentation);
        km_raw_det(p.n, p.r, t - s, &yl, x.points())?.0
    };
    Ok(Evaluation { value: ratio * q, flags })
}

/// Density of the single-particle elliptic BES(3) process.
pub fn single_particle_density(r: f64, t_star: f64, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
    let l = 2.0 * PI * r;
    if !(x > 0.0 && x < l && y > 0.0 && y < l) {
        return domain("positions must lie in (0, 2πr)");
    }
    if !(0.0 <= s && s < t && t < t_star) {
        return domain("need 0 <= s < t < t*");
    }
    let nt = ModularNome::from_tau_im((t_star - t) / (2.0 * PI * r * r))?;
    let ns = ModularNome::from_tau_im((t_star - s) / (2.0 * PI * r * r))?;
    let num = theta_ln(Theta::One, C::new(y / l, 0.0), &nt)?;
    let den = theta_ln(Theta::One, C::new(x / l, 0.0), &ns)?;
    Ok(q_abs(t - s, y, x, l) * (num - den).exp().re)
}
