//! Both sides of the elliptic determinant evaluations and the ζ addition identity.

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::linalg::det_with_condition;
use crate::special::products::{dedekind_eta, q0, qpochhammer, theta_e};
use crate::special::theta::{theta, ModularNome, Theta};
use crate::special::weierstrass::{weierstrass_p, weierstrass_zeta, HalfPeriods};

/// Outcome of an identity check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Residual {
    pub residual: f64,
    pub lhs: (f64, f64),
    pub rhs: (f64, f64),
    pub condition_flag: bool,
}

impl Residual {
    fn new(lhs: C, rhs: C, condition_flag: bool) -> Self {
        let scale = 1f64.max(lhs.norm()).max(rhs.norm());
        Self { residual: (lhs - rhs).norm() / scale, lhs: (lhs.re, lhs.im), rhs: (rhs.re, rhs.im), condition_flag }
    }
}

/// W_{A_{N-1}}(s; p) = ∏_{j<k} s_k E(s_j/s_k; p).
pub fn macdonald_denominator(s: &[C], p: f64) -> Result<C> {
    if s.iter().any(|z| z.norm() == 0.0) {
        return domain("Macdonald denominator needs nonzero entries");
    }
    let mut w = C::new(1.0, 0.0);
    for j in 0..s.len() {
        for k in j + 1..s.len() {
            w *= s[k] * theta_e(s[j] / s[k], p)?;
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticDetInput {
    pub r_vec: Vec<C>,
    pub s_vec: Vec<C>,
    pub kappa: C,
    pub p: f64,
}

// distance of ln z from ln p · ℤ + 2πiℤ
fn near_p_power(z: C, p: f64) -> bool {
    let l = z.ln();
    let lp = p.ln();
    let k = (l.re / lp).round();
    (l.re - k * lp).abs() < 1e-10 && (l.im - 2.0 * PI * (l.im / (2.0 * PI)).round()).abs() < 1e-10
}

impl EllipticDetInput {
    pub fn new(r_vec: Vec<C>, s_vec: Vec<C>, kappa: C, p: f64) -> Result<Self> {
        let n = r_vec.len();
        if n < 2 || s_vec.len() != n {
            return domain("need N >= 2 and matching r, s lengths");
        }
        if !(p > 0.0 && p < 1.0) {
            return domain("nome p outside (0,1)");
        }
        if r_vec.iter().chain(&s_vec).any(|z| z.norm() == 0.0) {
            return domain("r and s entries must be nonzero");
        }
        Ok(Self { r_vec, s_vec, kappa, p })
    }

    pub fn n(&self) -> usize {
        self.r_vec.len()
    }

    /// True when the genericity assumptions hold to within 1e-10 in log space.
    pub fn generic(&self) -> bool {
        let n = self.n();
        for j in 0..n {
            for k in 0..n {
                if j != k && near_p_power(self.r_vec[j] / self.r_vec[k], self.p) {
                    return false;
                }
            }
        }
        let prod: C = self.r_vec.iter().product();
        !near_p_power(self.kappa * prod, self.p)
    }
}

pub fn check_elliptic_cauchy(inp: &EllipticDetInput) -> Result<Residual> {
    let (n, p, r, s, kappa) = (inp.n(), inp.p, &inp.r_vec, &inp.s_vec, inp.kappa);
    let prod_r: C = r.iter().product();
    let prod_s: C = s.iter().product();
    let e_r = theta_e(kappa * prod_r, p)?;
    let mut m = vec![vec![C::new(0.0, 0.0); n]; n];
    for j in 0..n {
        for k in 0..n {
            let others: C = (0..n).filter(|&l| l != k).map(|l| r[l]).product();
            let mut v = theta_e(kappa * s[j] * others, p)? / e_r;
            for l in (0..n).filter(|&l| l != k) {
                v *= theta_e(s[j] / r[l], p)? / theta_e(r[k] / r[l], p)?;
            }
            m[j][k] = v;
        }
    }
    let d = det_with_condition(&m);
    let rhs = theta_e(kappa * prod_s, p)? * macdonald_denominator(s, p)? / (e_r * macdonald_denominator(r, p)?);
    Ok(Residual::new(d.det, rhs, d.ill_conditioned() || !inp.generic()))
}

pub fn check_denominator_expansion(s: &[C], kappa: C, p: f64) -> Result<Residual> {
    let n = s.len();
    if !(p > 0.0 && p < 1.0) {
        return domain("nome p outside (0,1)");
    }
    let prod: C = s.iter().product();
    let lhs = theta_e(kappa * prod, p)? * macdonald_denominator(s, p)?;
    let pn = p.powi(n as i32);
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    let mut m = vec![vec![C::new(0.0, 0.0); n]; n];
    for j in 0..n {
        for k in 0..n {
            m[j][k] = s[j].powi(k as i32) * theta_e(sign * p.powi(k as i32) * kappa * s[j].powi(n as i32), pn)?;
        }
    }
    let d = det_with_condition(&m);
    let w = (qpochhammer(C::new(pn, 0.0), pn)? / qpochhammer(C::new(p, 0.0), p)?).powi(n as i32);
    Ok(Residual::new(lhs, w * d.det, d.ill_conditioned()))
}

fn th1(v: C, nome: &ModularNome) -> Result<C> {
    theta(Theta::One, v, nome)
}

fn check_alcove(u: &[f64], delta: f64, r: f64) -> Result<()> {
    let l = 2.0 * PI * r;
    let ordered = u.windows(2).all(|w| w[0] < w[1]);
    if !ordered || u[0] < 0.0 || *u.last().unwrap() >= l {
        return domain("configuration outside the alcove");
    }
    let c = delta + u.iter().sum::<f64>();
    if !(c > 0.0 && c < l) {
        return domain("center outside (0, 2πr)");
    }
    Ok(())
}

pub fn check_theta_cauchy(u: &[f64], x: &[f64], delta: f64, r: f64, tau_im: f64) -> Result<Residual> {
    let n = u.len();
    if x.len() != n || n < 1 {
        return domain("u and x must have the same length");
    }
    check_alcove(u, delta, r)?;
    let nome = ModularNome::from_tau_im(tau_im)?;
    let l = 2.0 * PI * r;
    let f = |a: f64| th1(C::new(a / l, 0.0), &nome);
    let ubar = delta + u.iter().sum::<f64>();
    let xbar = delta + x.iter().sum::<f64>();
    let t_u = f(ubar)?;
    let mut m = vec![vec![C::new(0.0, 0.0); n]; n];
    for j in 0..n {
        for k in 0..n {
            let mut v = f(ubar + x[j] - u[k])? / t_u;
            for l2 in (0..n).filter(|&l2| l2 != k) {
                v *= f(x[j] - u[l2])? / f(u[k] - u[l2])?;
            }
            m[j][k] = v;
        }
    }
    let d = det_with_condition(&m);
    let mut rhs = f(xbar)? / t_u;
    for j in 0..n {
        for k in j + 1..n {
            rhs *= f(x[j] - x[k])? / f(u[j] - u[k])?;
        }
    }
    Ok(Residual::new(d.det, rhs, d.ill_conditioned()))
}

/// C_N^A(τ; r, δ).
pub fn rs_constant(n: usize, tau_im: f64, r: f64, delta: f64) -> Result<C> {
    let nome = ModularNome::from_tau_im(tau_im)?;
    let nf = n as f64;
    let expo = (nf - 1.0)
        * ((3.0 * nf - 2.0) / 8.0 * C::new(0.0, tau_im) + delta / (2.0 * PI * r) + (3.0 * nf - 2.0) / 4.0);
    Ok(q0(&nome)?.powf((nf - 1.0) * (nf - 2.0) / 2.0) * (C::new(0.0, PI) * expo).exp())
}

pub fn check_rs_determinant(x: &[f64], delta: f64, r: f64, tau_im: f64) -> Result<Residual> {
    let n = x.len();
    if n < 1 {
        return domain("empty configuration");
    }
    let nome = ModularNome::from_tau_im(tau_im)?;
    let nome_n = nome.scaled(n as f64)?;
    let l = 2.0 * PI * r;
    let xbar = delta + x.iter().sum::<f64>();
    let mut lhs = th1(C::new(xbar / l, 0.0), &nome)?;
    for j in 0..n {
        for k in j + 1..n {
            lhs *= th1(C::new((x[j] - x[k]) / l, 0.0), &nome)?;
        }
    }
    let tau = C::new(0.0, tau_im);
    let mut m = vec![vec![C::new(0.0, 0.0); n]; n];
    for j in 0..n {
        for k in 0..n {
            let kf = k as f64;
            let arg = (n as f64 - 1.0) / 2.0 + kf * tau + (delta + n as f64 * x[j]) / l;
            m[j][k] = C::new(0.0, kf * x[j] / r).exp() * th1(arg, &nome_n)?;
        }
    }
    let d = det_with_condition(&m);
    Ok(Residual::new(lhs, rs_constant(n, tau_im, r, delta)? * d.det, d.ill_conditioned()))
}

pub fn check_forrester(x: &[f64], alpha: C, tau_im: f64) -> Result<Residual> {
    let n = x.len();
    if n < 2 {
        return domain("Forrester evaluation needs N >= 2");
    }
    let nf = n as f64;
    let nome = ModularNome::from_tau_im(tau_im)?;
    let nome_n = nome.scaled(nf)?;
    let (entry, center) = if n % 2 == 1 { (Theta::Three, Theta::Three) } else { (Theta::One, Theta::Zero) };
    let mut m = vec![vec![C::new(0.0, 0.0); n]; n];
    for j in 0..n {
        for k in 0..n {
            m[j][k] = theta(entry, x[j] + alpha - (k as f64 + 1.0) / nf, &nome)?;
        }
    }
    let d = det_with_condition(&m);
    let sum: C = x.iter().map(|&xj| xj + alpha).sum();
    let eta = dedekind_eta((-2.0 * PI * nf * tau_im).exp())?;
    let mut rhs = nf.powf(nf / 2.0) * eta.powf(-(nf - 1.0) * (nf - 2.0) / 2.0) * theta(center, sum, &nome_n)?;
    for j in 0..n {
        for k in j + 1..n {
            rhs *= th1(C::new(x[k] - x[j], 0.0), &nome_n)?;
        }
    }
    Ok(Residual::new(d.det, rhs, d.ill_conditioned()))
}

pub fn check_zeta_addition(a: f64, b: f64, c: f64, hp: &HalfPeriods) -> Result<Residual> {
    let z = |x: f64| weierstrass_zeta(x, hp);
    let wp = |x: f64| weierstrass_p(x, hp);
    let (zab, zac, zbc) = (z(a - b)?, z(a - c)?, z(b - c)?);
    let lhs = zab * zac + (-zab) * zbc + (-zac) * (-zbc);
    let rhs = 0.5 * (zab * zab + zbc * zbc + zac * zac) - 0.5 * (wp(a - b)? + wp(b - c)? + wp(a - c)?);
    Ok(Residual::new(C::new(lhs, 0.0), C::new(rhs, 0.0), false))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lemma {
    EllipticCauchy,
    DenominatorExpansion,
    ThetaCauchy,
    RsDeterminant,
    Forrester,
    ZetaAddition,
}

impl Lemma {
    pub const ALL: [Lemma; 6] = [
        Lemma::EllipticCauchy,
        Lemma::DenominatorExpansion,
        Lemma::ThetaCauchy,
        Lemma::RsDeterminant,
        Lemma::Forrester,
        Lemma::ZetaAddition,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Lemma::EllipticCauchy => "elliptic_cauchy",
            Lemma::DenominatorExpansion => "denominator_expansion",
            Lemma::ThetaCauchy => "theta_cauchy",
            Lemma::RsDeterminant => "rs_determinant",
            Lemma::Forrester => "forrester",
            Lemma::ZetaAddition => "zeta_addition",
        }
    }

    /// Sizes exercised by the verification suite.
    pub fn sizes(&self) -> &'static [usize] {
        match self {
            Lemma::RsDeterminant => &[2, 3],
            Lemma::ZetaAddition => &[3],
            _ => &[2, 3, 4],
        }
    }
}

fn unit(rng: &mut ChaCha8Rng) -> C {
    C::from_polar(1.0, rng.gen_range(0.0..2.0 * PI))
}

/// Points on the unit circle with pairwise angular separation at least `sep`.
fn spread_units(rng: &mut ChaCha8Rng, n: usize, sep: f64) -> Vec<C> {
    loop {
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        let ok = (0..n).all(|j| {
            (j + 1..n).all(|k| {
                let d = (a[j] - a[k]).rem_euclid(2.0 * PI);
                d.min(2.0 * PI - d) >= sep
            })
        });
        if ok {
            return a.into_iter().map(|t| C::from_polar(1.0, t)).collect();
        }
    }
}

/// A random alcove configuration with its center index, for radius r. Circular
/// gaps are at least l/2N and the center stays l/20 away from the walls.
pub fn random_alcove(rng: &mut impl Rng, n: usize, r: f64) -> (Vec<f64>, f64) {
    let l = 2.0 * PI * r;
    loop {
        let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..l)).collect();
        u.sort_by(f64::total_cmp);
        let s: f64 = u.iter().sum();
        let k = (s / (PI * r)).floor();
        let delta = -k * PI * r;
        let c = delta + s;
        let gap = l / (2.0 * n as f64);
        let gaps_ok = u.windows(2).all(|w| w[1] - w[0] > gap) && u[0] + l - u[n - 1] > gap;
        if gaps_ok && c > l / 20.0 && c < l * (1.0 - 1.0 / 20.0) {
            return (u, delta);
        }
    }
}

/// Evaluate a lemma on the random instance determined by (n, seed).
pub fn run_lemma(lemma: Lemma, n: usize, seed: u64) -> Result<Residual> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((n as u64) << 40) ^ ((lemma as u64) << 56));
    match lemma {
        Lemma::EllipticCauchy => {
            let p = rng.gen_range(0.05..0.5);
            let r = spread_units(&mut rng, n, PI / n as f64);
            let s = spread_units(&mut rng, n, PI / n as f64);
            check_elliptic_cauchy(&EllipticDetInput::new(r, s, unit(&mut rng), p)?)
        }
        Lemma::DenominatorExpansion => {
            let p = rng.gen_range(0.05..0.5);
            let s = spread_units(&mut rng, n, PI / n as f64);
            check_denominator_expansion(&s, unit(&mut rng), p)
        }
        Lemma::ThetaCauchy => {
            let r = rng.gen_range(0.5..2.0);
            let tau_im = -rng.gen_range(0.05f64..0.5).ln() / (2.0 * PI);
            let (u, delta) = random_alcove(&mut rng, n, r);
            let x: Vec<f64> = spread_units(&mut rng, n, PI / n as f64).iter().map(|z| z.arg() * r).collect();
            check_theta_cauchy(&u, &x, delta, r, tau_im)
        }
        Lemma::RsDeterminant => {
            let r = rng.gen_range(0.5..2.0);
            let tau_im = -rng.gen_range(0.05f64..0.5).ln() / (2.0 * PI);
            let delta = PI * r * rng.gen_range(-3i32..=3) as f64;
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0 * PI * r)).collect();
            check_rs_determinant(&x, delta, r, tau_im)
        }
        Lemma::Forrester => {
            let tau_im = -rng.gen_range(0.05f64..0.5).ln() / (2.0 * PI);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let alpha = C::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.2..0.2));
            check_forrester(&x, alpha, tau_im)
        }
        Lemma::ZetaAddition => {
            let hp = HalfPeriods::rectangular(rng.gen_range(0.3..2.0), rng.gen_range(0.3..2.0))?;
            let w = 2.0 * hp.omega1().re;
            let mut pts = [0.0; 3];
            loop {
                for p in pts.iter_mut() {
                    *p = rng.gen_range(0.0..w);
                }
                let ok = (0..3).all(|i| {
                    let d = (pts[i] - pts[(i + 1) % 3]).abs();
                    d > 1e-2 * w && d < 0.99 * w
                });
                if ok {
                    break;
                }
            }
            check_zeta_addition(pts[0], pts[1], pts[2], &hp)
        }
    }
}
