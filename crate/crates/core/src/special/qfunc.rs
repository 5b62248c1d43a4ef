//! Gosper's q-sine and the q-gamma function.

use num_complex::Complex64 as C;
use std::f64::consts::PI;

use crate::error::{domain, EdpaError, Result};
use crate::special::products::ln_qpochhammer;

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        domain(format!("q = {q} outside (0,1)"))
    }
}

/// sin_q(w) = q^{(z-1/2)²} (q^{2z}; q²)(q^{2-2z}; q²) / (q; q²)², z = w/π.
pub fn q_sine(w: C, q: f64) -> Result<C> {
    check_q(q)?;
    let lq = q.ln();
    let z = w / PI;
    let q2 = q * q;
    let a = (2.0 * z * lq).exp();
    let b = ((2.0 - 2.0 * z) * lq).exp();
    let (la, lb) = match (ln_qpochhammer(a, q2)?, ln_qpochhammer(b, q2)?) {
        (Some(la), Some(lb)) => (la, lb),
        _ => return Ok(C::new(0.0, 0.0)),
    };
    let lc = ln_qpochhammer(C::new(q, 0.0), q2)?.expect("(q;q²) has no zero factor");
    let half = z - 0.5;
    Ok((half * half * lq + la + lb - 2.0 * lc).exp())
}

/// Γ_q(z) = (1-q)^{1-z} (q;q)_∞ / (q^z;q)_∞.
pub fn q_gamma(z: C, q: f64) -> Result<C> {
    check_q(q)?;
    let lq = q.ln();
    // poles where q^{z+n} = 1
    let mut x = (z * lq).exp();
    let mut n = 0usize;
    while x.norm() > 1e-3 && n < 10_000_000 {
        if (C::new(1.0, 0.0) - x).norm() < 1e-13 {
            return Err(EdpaError::Pole { location: -(n as f64) });
        }
        x *= q;
        n += 1;
    }
    let num = ln_qpochhammer(C::new(q, 0.0), q)?.expect("(q;q) has no zero factor");
    let den = ln_qpochhammer((z * lq).exp(), q)?.ok_or(EdpaError::Pole { location: z.re })?;
    Ok(((1.0 - z) * (1.0 - q).ln() + num - den).exp())
}
