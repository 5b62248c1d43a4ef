//! Weierstrass ζ and ℘ through their q-expansions.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, EdpaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPeriods {
    omega1: C,
    omega3: C,
}

impl HalfPeriods {
    pub fn new(omega1: C, omega3: C) -> Result<Self> {
        if omega1.norm() == 0.0 {
            return domain("omega1 must be nonzero");
        }
        if !((omega3 / omega1).im > 0.0) {
            return domain("Im(omega3/omega1) must be positive");
        }
        Ok(Self { omega1, omega3 })
    }

    /// Rectangular lattice with real ω₁ and ω₃ = i·w3.
    pub fn rectangular(omega1: f64, w3: f64) -> Result<Self> {
        Self::new(C::new(omega1, 0.0), C::new(0.0, w3))
    }

    pub fn omega1(&self) -> C {
        self.omega1
    }

    pub fn omega3(&self) -> C {
        self.omega3
    }

    pub fn tau(&self) -> C {
        self.omega3 / self.omega1
    }

    /// q = e^{πiτ}
    pub fn nome(&self) -> C {
        (C::new(0.0, PI) * self.tau()).exp()
    }

    fn is_rectangular(&self) -> bool {
        self.omega1.im == 0.0 && self.omega3.re == 0.0
    }
}

fn term_cap(q2: f64) -> usize {
    // enough terms for n²q²ⁿ to drop below 1e-18
    let per = -q2.ln();
    (64.0 + (42.0 + 2.0 * (1.0 + 60.0 / per).ln()) / per).min(2.0e7) as usize
}

/// Σ_{n≥1} q^{2n}/(1-q^{2n}) f(n) with f bounded by growthⁿ.
fn lambert<F: FnMut(usize) -> C>(q: C, growth: f64, tol: f64, mut f: F) -> Result<C> {
    let q2 = q * q;
    let r = q2.norm();
    if r * growth >= 1.0 {
        return domain("argument outside the strip of convergence");
    }
    let cap = term_cap(r * growth);
    let mut sum = C::new(0.0, 0.0);
    let mut q2n = C::new(1.0, 0.0);
    let mut scale: f64 = 1e-300;
    let mut gn = 1.0;
    for n in 1..=cap {
        q2n *= q2;
        gn *= growth;
        let c = q2n / (C::new(1.0, 0.0) - q2n);
        let term = c * f(n);
        sum += term;
        scale = scale.max(sum.norm()).max(term.norm());
        let env = c.norm() * gn * n as f64 * n as f64;
        if env < tol * scale.max(1.0) {
            return Ok(sum);
        }
    }
    Err(EdpaError::Accuracy { residual: (r * growth).powi(cap as i32), terms: cap })
}

fn pole_check(z: C, hp: &HalfPeriods) -> Result<()> {
    let u = z / (2.0 * hp.omega1);
    let k = u.re.round();
    if (u - C::new(k, 0.0)).norm() < 1e-13 {
        return Err(EdpaError::Pole { location: (2.0 * hp.omega1 * k).re });
    }
    Ok(())
}

/// η₁ = ζ(ω₁).
pub fn eta1(hp: &HalfPeriods) -> Result<C> {
    let q = hp.nome();
    let s = lambert(q, 1.0, 1e-17, |n| C::new(n as f64, 0.0))?;
    Ok(PI * PI / hp.omega1 * (1.0 / 12.0 - 2.0 * s))
}

/// ζ(z) - η₁z/ω₁.
pub fn zeta_centered_c(z: C, hp: &HalfPeriods) -> Result<C> {
    pole_check(z, hp)?;
    let w1 = hp.omega1;
    let a = PI * z / w1;
    let growth = a.im.abs().exp();
    let s = lambert(hp.nome(), growth, 1e-17, |n| (a * n as f64).sin())?;
    let h = a / 2.0;
    Ok(PI / (2.0 * w1) * h.cos() / h.sin() + 2.0 * PI / w1 * s)
}

/// ℘(z).
pub fn weierstrass_p_c(z: C, hp: &HalfPeriods) -> Result<C> {
    pole_check(z, hp)?;
    let w1 = hp.omega1;
    let a = PI * z / w1;
    let growth = a.im.abs().exp();
    let s = lambert(hp.nome(), growth, 1e-17, |n| n as f64 * (a * n as f64).cos())?;
    let c = PI / (2.0 * w1);
    let sh = (a / 2.0).sin();
    Ok(c * c / (sh * sh) - 2.0 * PI * PI / (w1 * w1) * s - eta1(hp)? / w1)
}

/// Full ζ(z).
pub fn weierstrass_zeta_c(z: C, hp: &HalfPeriods) -> Result<C> {
    Ok(zeta_centered_c(z, hp)? + eta1(hp)? * z / hp.omega1)
}

fn real_only(hp: &HalfPeriods) -> Result<()> {
    if hp.is_rectangular() {
        Ok(())
    } else {
        domain("real-valued Weierstrass functions need a rectangular lattice")
    }
}

pub fn weierstrass_zeta_centered(x: f64, hp: &HalfPeriods) -> Result<f64> {
    real_only(hp)?;
    Ok(zeta_centered_c(C::new(x, 0.0), hp)?.re)
}

pub fn weierstrass_p(x: f64, hp: &HalfPeriods) -> Result<f64> {
    real_only(hp)?;
    Ok(weierstrass_p_c(C::new(x, 0.0), hp)?.re)
}

pub fn weierstrass_zeta(x: f64, hp: &HalfPeriods) -> Result<f64> {
    real_only(hp)?;
    Ok(weierstrass_zeta_c(C::new(x, 0.0), hp)?.re)
}
