//! The drift A_N^α(t*-t, x) and its trigonometric, hyperbolic and rational limits.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, EdpaError, Result};
use crate::special::theta::{theta_log_deriv, ModularNome, Theta};
use crate::special::weierstrass::{weierstrass_zeta_centered, HalfPeriods};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    pub n: usize,
    pub alpha: f64,
    pub s_remaining: f64,
}

impl DriftParams {
    pub fn new(n: usize, alpha: f64, s_remaining: f64) -> Result<Self> {
        if n < 1 || !(alpha > 0.0) || !(s_remaining > 0.0) {
            return domain(format!("invalid drift parameters N={n}, alpha={alpha}, s={s_remaining}"));
        }
        Ok(Self { n, alpha, s_remaining })
    }

    /// τ = 2πiN(t*-t)/α², as Im τ.
    pub fn tau_im(&self) -> f64 {
        2.0 * PI * self.n as f64 * self.s_remaining / (self.alpha * self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DriftMethod {
    ThetaLogDeriv,
    ZetaCentered,
    #[default]
    Fourier,
}

/// Reduce into (-α/2, α/2] and reject poles.
fn reduce(x: f64, alpha: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain("non-finite drift argument");
    }
    let k = (x / alpha).round();
    let y = x - k * alpha;
    if y.abs() < 1e-12 * alpha {
        return Err(EdpaError::Pole { location: k * alpha });
    }
    Ok(y)
}

pub fn drift_a(p: &DriftParams, x: f64, method: DriftMethod) -> Result<f64> {
    let y = reduce(x, p.alpha)?;
    match method {
        DriftMethod::Fourier => Ok(fourier(p, y)),
        DriftMethod::ThetaLogDeriv => {
            let nome = ModularNome::from_tau_im(p.tau_im())?;
            Ok(theta_log_deriv(Theta::One, C::new(y / p.alpha, 0.0), &nome)?.re / p.alpha)
        }
        DriftMethod::ZetaCentered => {
            let hp = HalfPeriods::rectangular(p.alpha / 2.0, PI * p.n as f64 * p.s_remaining / p.alpha)?;
            weierstrass_zeta_centered(y, &hp)
        }
    }
}

/// Default (Fourier) evaluation.
pub fn drift(p: &DriftParams, x: f64) -> Result<f64> {
    drift_a(p, x, DriftMethod::Fourier)
}

// (π/α)cot(πx/α) + (4π/α) Σ Qⁿ/(1-Qⁿ) sin(2πnx/α), Q = e^{-4π²Ns/α²}
fn fourier(p: &DriftParams, y: f64) -> f64 {
    let a = p.alpha;
    let lq = -4.0 * PI * PI * p.n as f64 * p.s_remaining / (a * a);
    let head = PI / a / (PI * y / a).tan();
    let cap = (64.0 + 42.0 / -lq).min(5.0e7) as usize;
    let ang = 2.0 * PI * y / a;
    let (s1, c1) = ang.sin_cos();
    let (mut sn, mut cn) = (0.0f64, 1.0f64);
    let mut sum = 0.0;
    for n in 1..=cap {
        let qn = (lq * n as f64).exp();
        let g = qn / -(lq * n as f64).exp_m1();
        // sin(nθ) by rotation
        let s_new = sn * c1 + cn * s1;
        cn = cn * c1 - sn * s1;
        sn = s_new;
        sum += g * sn;
        if g < 1e-18 * (1.0 + sum.abs()) {
            break;
        }
    }
    head + 4.0 * PI / a * sum
}

/// (1/2r) cot(x/2r).
pub fn drift_trig(r: f64, x: f64) -> Result<f64> {
    let a = 2.0 * PI * r;
    let y = reduce(x, a)?;
    Ok(0.5 / r / (y / (2.0 * r)).tan())
}

/// (1/2Na) coth(x/2Na).
pub fn drift_hyper(n: usize, a: f64, x: f64) -> Result<f64> {
    let c = 2.0 * n as f64 * a;
    if x == 0.0 {
        return Err(EdpaError::Pole { location: 0.0 });
    }
    Ok(1.0 / c / (x / c).tanh())
}

/// 1/x.
pub fn drift_rational(x: f64) -> Result<f64> {
    if x == 0.0 {
        return Err(EdpaError::Pole { location: 0.0 });
    }
    Ok(1.0 / x)
}
