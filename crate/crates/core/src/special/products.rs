//! q-Pochhammer products, the multiplicative theta E(s;p) and Dedekind η.

use num_complex::Complex64 as C;

use crate::error::{domain, EdpaError, Result};
use crate::special::theta::ModularNome;

const MAX_FACTORS: usize = 20_000_000;

fn ln_one_minus(x: C) -> C {
    if x.norm() < 1e-4 {
        let x2 = x * x;
        -(x + x2 / 2.0 + x2 * x / 3.0 + x2 * x2 / 4.0)
    } else {
        (C::new(1.0, 0.0) - x).ln()
    }
}

/// log of (a; p)_∞, or None when a factor vanishes exactly.
pub fn ln_qpochhammer(a: C, p: f64) -> Result<Option<C>> {
    if !(p >= 0.0 && p < 1.0) {
        return domain(format!("base p = {p} outside [0,1)"));
    }
    let mut acc = C::new(0.0, 0.0);
    let mut x = a;
    for _ in 0..MAX_FACTORS {
        if x.norm() < 1e-18 {
            return Ok(Some(acc));
        }
        let f = C::new(1.0, 0.0) - x;
        if f.norm() == 0.0 {
            return Ok(None);
        }
        acc += ln_one_minus(x);
        x *= p;
    }
    Err(EdpaError::Accuracy { residual: x.norm(), terms: MAX_FACTORS })
}

/// (a; p)_∞.
pub fn qpochhammer(a: C, p: f64) -> Result<C> {
    if p <= 0.9 {
        if !(p >= 0.0) {
            return domain(format!("base p = {p} outside [0,1)"));
        }
        let mut acc = C::new(1.0, 0.0);
        let mut x = a;
        for _ in 0..MAX_FACTORS {
            if x.norm() < 1e-18 {
                return Ok(acc);
            }
            acc *= C::new(1.0, 0.0) - x;
            x *= p;
        }
        return Err(EdpaError::Accuracy { residual: x.norm(), terms: MAX_FACTORS });
    }
    Ok(ln_qpochhammer(a, p)?.map(|l| l.exp()).unwrap_or(C::new(0.0, 0.0)))
}

/// E(s; p) = (s, p/s; p)_∞.
pub fn theta_e(s: C, p: f64) -> Result<C> {
    if s.norm() == 0.0 {
        return domain("E(s;p) needs s != 0");
    }
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("nome p = {p} outside (0,1)"));
    }
    Ok(qpochhammer(s, p)? * qpochhammer(p / s, p)?)
}

/// η(x) = x^{1/24} ∏(1 - xⁿ).
pub fn dedekind_eta(x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return domain(format!("dedekind_eta needs x in (0,1), got {x}"));
    }
    Ok(x.powf(1.0 / 24.0) * qpochhammer(C::new(x, 0.0), x)?.re)
}

/// q₀(τ) = ∏(1 - q²ⁿ).
pub fn q0(nome: &ModularNome) -> Result<f64> {
    let q2 = (-2.0 * std::f64::consts::PI * nome.tau_im()).exp();
    Ok(qpochhammer(C::new(q2, 0.0), q2)?.re)
}
