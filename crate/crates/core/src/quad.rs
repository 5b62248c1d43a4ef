//! Gauss–Legendre (fixed and adaptive) and Gauss–Hermite quadrature.

use num_complex::Complex64 as C;
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{EdpaError, Result};

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Nodes and weights of the n-point Gauss–Hermite rule for the weight e^{-x²}.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    let pim4 = PI.powf(-0.25);
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[n - 1],
            3 => 1.91 * z - 0.91 * x[n - 2],
            _ => 2.0 * z - x[n - i + 1],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j + 1) as f64).sqrt() * p2 - (j as f64 / (j + 1) as f64).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[n - 1 - i] = z;
        x[i] = -z;
        w[i] = if pp.is_finite() && pp != 0.0 { 2.0 / (pp * pp) } else { 0.0 };
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const PANEL: usize = 20;

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL))
}

fn panel<F: FnMut(f64) -> C>(f: &mut F, a: f64, b: f64) -> C {
    let (x, w) = panel_rule();
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = C::new(0.0, 0.0);
    for (xi, wi) in x.iter().zip(w) {
        s += *wi * f(c + h * xi);
    }
    s * h
}

/// Adaptive Gauss–Legendre on [a, b] with bisection until panels agree to `tol` (absolute).
pub fn integrate_c<F: FnMut(f64) -> C>(mut f: F, a: f64, b: f64, tol: f64) -> Result<C> {
    let mut stack = vec![(a, b, panel(&mut f, a, b), 0u32)];
    let mut total = C::new(0.0, 0.0);
    let mut evals = 0usize;
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(&mut f, lo, mid);
        let right = panel(&mut f, mid, hi);
        evals += 2 * PANEL;
        let err = (left + right - whole).norm();
        let local_tol = tol * (hi - lo) / (b - a);
        if err <= local_tol.max(1e-15 * (left + right).norm()) || depth >= 48 {
            total += left + right;
        } else if evals > 4_000_000 {
            return Err(EdpaError::Budget(format!("quadrature did not converge (error {err:e})")));
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    Ok(total)
}

pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    Ok(integrate_c(|x| C::new(f(x), 0.0), a, b, tol)?.re)
}

/// Integral over [a, b] split at interior breakpoints.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], tol: f64) -> Result<f64> {
    let mut s = 0.0;
    for w in breaks.windows(2) {
        s += integrate(&mut f, w[0], w[1], tol / (breaks.len() as f64))?;
    }
    Ok(s)
}
