//! Jacobi theta functions θ₀..θ₃ for purely imaginary τ = iT.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, EdpaError, Result};

/// Nome above which the imaginary transformation is applied first.
pub const Q_SWITCH: f64 = 0.043_213_918_263_772_25; // e^{-π}

/// Real nome q = e^{-πT} with its truncation policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModularNome {
    q: f64,
    tau_im: f64,
    pub tol: f64,
    pub max_terms: usize,
}

impl ModularNome {
    pub fn new(q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return domain(format!("nome q = {q} outside (0,1)"));
        }
        Ok(Self { q, tau_im: -q.ln() / PI, tol: 1e-15, max_terms: 64 })
    }

    /// Build from T = Im τ directly, which keeps full precision when q is close to 1.
    pub fn from_tau_im(t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return domain(format!("Im tau = {t} must be positive"));
        }
        Ok(Self { q: (-PI * t).exp(), tau_im: t, tol: 1e-15, max_terms: 64 })
    }

    pub fn with_policy(mut self, tol: f64, max_terms: usize) -> Result<Self> {
        if !(tol > 0.0) || max_terms < 8 {
            return domain("tol must be positive and max_terms >= 8");
        }
        self.tol = tol;
        self.max_terms = max_terms;
        Ok(self)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn tau_im(&self) -> f64 {
        self.tau_im
    }

    pub fn tau(&self) -> C {
        C::new(0.0, self.tau_im)
    }

    /// The same policy at nome parameter n·τ.
    pub fn scaled(&self, n: f64) -> Result<Self> {
        Self::from_tau_im(self.tau_im * n)?.with_policy(self.tol, self.max_terms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theta {
    Zero,
    One,
    Two,
    Three,
}

impl Theta {
    pub fn from_index(mu: u8) -> Result<Self> {
        match mu {
            0 => Ok(Theta::Zero),
            1 => Ok(Theta::One),
            2 => Ok(Theta::Two),
            3 => Ok(Theta::Three),
            _ => domain(format!("theta index {mu} not in 0..=3")),
        }
    }

    // θ(v + τ) = sign · e^{-πi(2v+τ)} θ(v)
    fn tau_shift_sign(self) -> f64 {
        match self {
            Theta::Zero | Theta::One => -1.0,
            Theta::Two | Theta::Three => 1.0,
        }
    }

    // partner under τ → -1/τ
    fn dual(self) -> Self {
        match self {
            Theta::Zero => Theta::Two,
            Theta::Two => Theta::Zero,
            k => k,
        }
    }
}

struct Parts {
    pre: C,
    expo: C,
    s: C,
    ds: C,
}

fn parts(kind: Theta, v: C, nome: &ModularNome) -> Result<Parts> {
    if !(v.re.is_finite() && v.im.is_finite()) {
        return domain("non-finite theta argument");
    }
    let t = nome.tau_im;
    let zero = C::new(0.0, 0.0);
    let (mut pre, mut e_a, mut de_a, mut dw) = (C::new(1.0, 0.0), zero, zero, C::new(1.0, 0.0));
    let (mut k, mut w, mut tt) = (kind, v, t);
    if t < 1.0 {
        // θ(v; iT) = c T^{-1/2} e^{-πv²/T} θ'(-iv/T; i/T)
        pre = C::new(t.powf(-0.5), 0.0);
        if kind == Theta::One {
            pre *= C::new(0.0, 1.0);
        }
        e_a = -PI * v * v / t;
        de_a = -2.0 * PI * v / t;
        dw = C::new(0.0, -1.0 / t);
        w = C::new(0.0, -1.0) * v / t;
        tt = 1.0 / t;
        k = kind.dual();
    }
    let m = (w.im / tt).round();
    let mut w0 = w - C::new(0.0, m * tt);
    let e_b = C::new(0.0, -2.0 * PI * m) * w0 + PI * m * m * tt;
    if (m as i64) % 2 != 0 {
        pre *= k.tau_shift_sign();
    }
    w0.re -= 2.0 * (w0.re / 2.0).round();
    let (s, ds) = series(k, w0, tt, nome.tol, nome.max_terms)?;
    // the half-integer series come back divided by e^{π|Im w| - πT/4}
    let e_c = if matches!(k, Theta::One | Theta::Two) { PI * (w0.im.abs() - tt / 4.0) } else { 0.0 };
    Ok(Parts { pre, expo: e_a + e_b + e_c, s, ds: de_a * s + dw * (ds - C::new(0.0, 2.0 * PI * m) * s) })
}

/// θ_kind(v; iT) and ∂θ/∂v.
pub fn theta_with_dv(kind: Theta, v: C, nome: &ModularNome) -> Result<(C, C)> {
    let p = parts(kind, v, nome)?;
    let f = p.pre * p.expo.exp();
    Ok((f * p.s, f * p.ds))
}

/// ∂_v log θ_kind(v; iT), free of the overflow-prone multiplier.
pub fn theta_log_deriv(kind: Theta, v: C, nome: &ModularNome) -> Result<C> {
    let p = parts(kind, v, nome)?;
    if p.s.norm() == 0.0 {
        return Err(EdpaError::Pole { location: v.re });
    }
    Ok(p.ds / p.s)
}

/// log θ_kind(v; iT) (principal branch of the reduced factor).
pub fn theta_ln(kind: Theta, v: C, nome: &ModularNome) -> Result<C> {
    let p = parts(kind, v, nome)?;
    Ok(p.pre.ln() + p.expo + p.s.ln())
}

// Direct series for small nome (T >= 1) and |Im w| <= T/2; θ₁, θ₂ scaled by e^{πT/4 - π|Im w|}.
fn series(kind: Theta, w: C, t: f64, tol: f64, max_terms: usize) -> Result<(C, C)> {
    let b = w.im.abs();
    let half = matches!(kind, Theta::One | Theta::Two);
    let mut sum = match kind {
        Theta::Zero | Theta::Three => C::new(1.0, 0.0),
        _ => C::new(0.0, 0.0),
    };
    let mut dsum = C::new(0.0, 0.0);
    let mut scale: f64 = sum.norm();
    let mut dscale: f64 = 0.0;
    let shift = if half { 0.25 } else { 0.0 };
    // the k = 1/2 term dominates the half-integer series; keep it O(1)
    let lift = if half { PI * b } else { 0.0 };
    for n in 1..=max_terms {
        let kk = if half { n as f64 - 0.5 } else { n as f64 };
        let env = 2.0 * (-PI * t * (kk * kk - shift) + 2.0 * PI * kk * b - lift).exp();
        let denv = env * 2.0 * PI * kk;
        scale = scale.max(env);
        dscale = dscale.max(denv);
        if n > 1 && env <= tol * scale && denv <= tol * dscale {
            return Ok((sum, dsum));
        }
        let g = C::new(0.0, 2.0 * PI * kk) * w;
        let base = -PI * t * (kk * kk - shift) - lift;
        let (ep, em) = ((g + base).exp(), (-g + base).exp());
        let (cs, sn) = (ep + em, C::new(0.0, -1.0) * (ep - em));
        let alt = if n % 2 == 0 { -1.0 } else { 1.0 };
        let dk = 2.0 * PI * kk;
        let (term, dterm) = match kind {
            Theta::One => (alt * sn, alt * dk * cs),
            Theta::Two | Theta::Three => (cs, -dk * sn),
            Theta::Zero => (-alt * cs, alt * dk * sn),
        };
        sum += term;
        dsum += dterm;
        scale = scale.max(sum.norm());
    }
    let kk = max_terms as f64 + 1.0;
    let resid = 2.0 * (-PI * t * (kk * kk - shift) + 2.0 * PI * kk * b - lift).exp() / scale.max(f64::MIN_POSITIVE);
    Err(EdpaError::Accuracy { residual: resid, terms: max_terms })
}

pub fn theta(kind: Theta, v: C, nome: &ModularNome) -> Result<C> {
    theta_with_dv(kind, v, nome).map(|r| r.0)
}

pub fn theta1(v: C, nome: &ModularNome) -> Result<C> {
    theta(Theta::One, v, nome)
}

/// θ_μ for μ ∈ {0,2,3}.
pub fn theta_mu(mu: u8, v: C, nome: &ModularNome) -> Result<C> {
    if mu == 1 {
        return domain("theta_mu takes mu in {0,2,3}; use theta1");
    }
    theta(Theta::from_index(mu)?, v, nome)
}

pub fn theta1_dv(v: C, nome: &ModularNome) -> Result<C> {
    theta_with_dv(Theta::One, v, nome).map(|r| r.1)
}

/// θ₁'(0; τ).
pub fn theta1_prime_zero(nome: &ModularNome) -> Result<f64> {
    Ok(theta1_dv(C::new(0.0, 0.0), nome)?.re)
}

/// Real-argument evaluation; the imaginary residue is rounding only.
pub fn theta_real(kind: Theta, v: f64, nome: &ModularNome) -> Result<f64> {
    Ok(theta(kind, C::new(v, 0.0), nome)?.re)
}

/// Returns the real part when the imaginary part is negligible.
pub fn as_real(z: C) -> Option<f64> {
    if z.im.abs() <= 1e-13 * z.norm() {
        Some(z.re)
    } else {
        None
    }
}
