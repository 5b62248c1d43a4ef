use edpa::oracles::random_alcove;
use edpa::process::*;
use edpa::quad::integrate;
use edpa::EdpaError;
use num_complex::Complex64 as C;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

const METHODS: [KernelMethod; 3] = [KernelMethod::ImageSum, KernelMethod::ThetaForm, KernelMethod::Spectral];

fn mass(n: usize, r: f64, t: f64, x: f64, m: KernelMethod) -> f64 {
    integrate(|y| wrapped_kernel(n, r, t, x, y, m).unwrap(), 0.0, 2.0 * PI * r, 1e-13).unwrap()
}

#[test]
fn sigma_values() {
    assert_eq!(sigma(3, 2), 2.0);
    assert_eq!(sigma(2, 1), 0.5);
    let x: f64 = 0.7;
    let m_big = 4;
    let mut s = C::new(0.0, 0.0);
    for m in -4..=4 {
        let sg = sigma(m_big, m);
        if sg.abs() <= (m_big as f64 - 1.0) / 2.0 {
            s += (C::i() * 2.0 * sg * x).exp();
        }
    }
    assert!((s.re - (4.0 * x).sin() / x.sin()).abs() < 1e-12 && s.im.abs() < 1e-12);
}

#[test]
fn wrapped_kernel_methods_agree() {
    for n in [2, 3] {
        for r in [0.5, 1.0, 2.0] {
            for t in [1e-3, 0.1, 1.0, 10.0] {
                for (x, y) in [(0.1, 0.2), (0.3, 2.9), (1.0, 0.05)] {
                    let v: Vec<f64> = METHODS.iter().map(|&m| wrapped_kernel(n, r, t, x * r, y * r, m).unwrap()).collect();
                    let scale = v[1].abs().max(1.0 / r);
                    assert!((v[0] - v[1]).abs() < 1e-10 * scale && (v[2] - v[1]).abs() < 1e-10 * scale, "{n} {r} {t}: {v:?}");
                }
            }
        }
    }
    assert!(matches!(wrapped_kernel(2, 1.0, 0.0, 0.1, 0.2, KernelMethod::ThetaForm), Err(EdpaError::Domain(_))));
}

/// ∫₀^{2πr} of the sign-alternating kernel: Σ_m e^{-(m-½)²t/2r²} sin((m-½)x/r) / (π(m-½)).
fn odd_mass(r: f64, t: f64, x: f64) -> f64 {
    (1..200)
        .map(|m| {
            let k = m as f64 - 0.5;
            2.0 * (-k * k * t / (2.0 * r * r)).exp() * (k * x / r).sin() / (PI * k)
        })
        .sum()
}

#[test]
fn wrapped_kernel_mass() {
    for m in METHODS {
        for t in [0.05, 0.7, 3.0] {
            assert!((mass(4, 1.0, t, 1.3, m) - 1.0).abs() < 1e-10);
            assert!((mass(3, 1.0, t, 1.3, m) - odd_mass(1.0, t, 1.3)).abs() < 1e-10);
            let double = integrate(|y| wrapped_kernel(3, 1.0, t, 1.3, y, m).unwrap(), 0.0, 4.0 * PI, 1e-13).unwrap();
            assert!(double.abs() < 1e-10);
        }
    }
}

#[test]
fn wrapped_kernel_concentrates() {
    let r = 1.0;
    let t = 1e-6 * r * r;
    let x = 2.0;
    let far = integrate(|y| wrapped_kernel(2, r, t, x, y, KernelMethod::ThetaForm).unwrap().abs(), x + 0.01 * r, x - 0.01 * r + 2.0 * PI * r, 1e-14)
        .unwrap();
    assert!(far < 1e-8);
}

#[test]
fn km_determinant_matches_closed_form() {
    let p = ProcessParams::new(3, 1.0, 4.0).unwrap();
    let y = [0.3, 2.0, 4.2];
    let d = km_determinant(&p, 0.1, &y, KmForm::Determinant).unwrap().value;
    let c = km_determinant(&p, 0.1, &y, KmForm::Closed).unwrap().value;
    assert!(d > 0.0 && (d - c).abs() < 1e-8 * c, "{d} vs {c}");

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [2, 3, 4] {
        for r in [0.7, 1.0, 1.6] {
            let p = ProcessParams::new(n, r, 4.0).unwrap();
            for t in [0.05, 0.3, 1.5] {
                for _ in 0..5 {
                    let (u, _) = random_alcove(&mut rng, n, r);
                    let d = km_determinant(&p, t, &u, KmForm::Determinant).unwrap().value;
                    let c = km_determinant(&p, t, &u, KmForm::Closed).unwrap().value;
                    assert!((d - c).abs() < 1e-8 * c.abs().max(d.abs()) + 1e-300, "N={n} r={r} t={t}: {d} vs {c}");
                }
            }
        }
    }
}

#[test]
fn km_determinant_vanishes_on_walls() {
    for n in [2, 3, 4] {
        let p = ProcessParams::new(n, 1.0, 4.0).unwrap();
        let mut y: Vec<f64> = (0..n).map(|j| 0.4 + 1.3 * j as f64).collect();
        y[1] = y[0];
        for form in [KmForm::Determinant, KmForm::Closed] {
            assert!(km_determinant(&p, 0.2, &y, form).unwrap().value.abs() < 1e-10);
        }
        // centre at 0 and at 2πr
        let l = p.circumference();
        for target in [0.0, l] {
            let mut y: Vec<f64> = (0..n).map(|j| 0.3 + 1.1 * j as f64).collect();
            let shift = (target - p.delta0() - y.iter().sum::<f64>()) / n as f64;
            y.iter_mut().for_each(|v| *v += shift);
            for form in [KmForm::Determinant, KmForm::Closed] {
                let e = km_determinant(&p, 0.2, &y, form).unwrap();
                assert!(e.value.abs() < 1e-10, "N={n} {form:?}: {}", e.value);
            }
        }
    }
}

#[test]
fn km_flags() {
    let p = ProcessParams::new(3, 1.0, 4.0).unwrap();
    let e = km_determinant(&p, 0.2, &[2.0, 1.0, 4.0], KmForm::Determinant).unwrap();
    assert!(e.flags.contains(&Flag::OutOfAlcove));
    let g = km_determinant_from(&p, 0.2, &[0.5, 2.0, 4.0], &[0.4, 1.0, 3.0], KmForm::Determinant).unwrap();
    assert!(g.flags.contains(&Flag::UnprovenRepresentation));
    assert!(matches!(
        km_determinant_from(&p, 0.2, &[0.5, 2.0, 4.0], &[0.4, 1.0, 3.0], KmForm::Closed),
        Err(EdpaError::Unsupported(_))
    ));
}

#[test]
fn h_function() {
    let p = ProcessParams::new(3, 1.0, 4.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let (u, delta) = random_alcove(&mut rng, 3, 1.0);
        let h = h_a(&p, 2.5, &u, delta).unwrap();
        assert!(h.value > 0.0 && h.value.is_finite() && h.flags.is_empty());
    }
    let near = h_a(&p, 2.5, &[0.5, 0.5 + 1e-9, 3.0], -PI).unwrap().value;
    let mid = h_a(&p, 2.5, &[0.5, 1.5, 3.0], -PI).unwrap().value;
    assert!(near < 1e-6 * mid);
    let b = h_a(&p, 2.5, &[0.5, 0.5, 3.0], -PI).unwrap();
    assert_eq!(b.value, 0.0);
    assert!(b.flags.contains(&Flag::Boundary));
    // centre -2π + Σx = 1e-9
    let x = [0.2, 1.0, 2.0 * PI - 1.2 + 1e-9];
    let small = h_a(&p, 2.5, &x, -2.0 * PI).unwrap().value;
    assert!(small < 1e-6 * mid);
}

fn alcove_integral<F: Fn(&Configuration) -> f64>(r: f64, f: F) -> f64 {
    let l = 2.0 * PI * r;
    let inner = |y1: f64| {
        let g = |y2: f64| match Configuration::with_center_class(vec![y1, y2], 0.0, r) {
            Ok(c) => f(&c),
            Err(_) => 0.0,
        };
        let split = (l - y1).max(y1);
        integrate(&g, y1, split, 1e-9).unwrap() + integrate(&g, split, l, 1e-9).unwrap()
    };
    integrate(inner, 0.0, l, 1e-8).unwrap()
}

#[test]
fn transition_density_normalized() {
    let p = ProcessParams::new(2, 1.0, 2.0).unwrap();
    let v = p.equidistant();
    let total = alcove_integral(1.0, |y| transition_density(&p, 0.0, &v, 0.4, y).unwrap().value);
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}

#[test]
fn chapman_kolmogorov_two_particles() {
    let p = ProcessParams::new(2, 1.0, 2.0).unwrap();
    let x = Configuration::with_center_class(vec![0.7, 3.0], 0.0, 1.0).unwrap();
    let z = Configuration::with_center_class(vec![1.5, 4.6], 0.0, 1.0).unwrap();
    let (s, t, u) = (0.1, 0.4, 0.8);
    let lhs = alcove_integral(1.0, |y| {
        transition_density(&p, s, &x, t, y).unwrap().value * transition_density(&p, t, y, u, &z).unwrap().value
    });
    let rhs = transition_density(&p, s, &x, u, &z).unwrap().value;
    assert!((lhs - rhs).abs() < 1e-4, "{lhs} vs {rhs}");
}

#[test]
fn h_factors_telescope() {
    let p = ProcessParams::new(2, 1.0, 3.0).unwrap();
    let v = p.equidistant();
    let x = Configuration::with_center_class(vec![0.9, 3.3], 0.0, 1.0).unwrap();
    let y = Configuration::with_center_class(vec![2.0, 5.0], 0.0, 1.0).unwrap();
    let (s, t) = (0.5, 1.2);
    let a = transition_density(&p, s, &x, t, &y).unwrap().value * transition_density(&p, 0.0, &v, s, &x).unwrap().value;
    let h_t = h_a(&p, p.t_star - t, y.points(), y.delta()).unwrap().value;
    let h_0 = h_a(&p, p.t_star, v.points(), v.delta()).unwrap().value;
    let b = h_t / h_0 * q2_exact(1.0, t - s, &y, &x).unwrap() * q_equidistant(&p, s, &x, KmForm::Closed).unwrap();
    assert!((a - b).abs() < 1e-12 * b);
}

#[test]
fn transition_density_errors() {
    let p = ProcessParams::new(2, 1.0, 2.0).unwrap();
    let v = p.equidistant();
    assert!(transition_density(&p, 0.5, &v, 0.4, &v).is_err());
    assert!(transition_density(&p, 0.0, &v, 2.0, &v).is_err());
    assert!(Configuration::new(vec![0.5, 0.2], 0.0, 1.0).is_err());
    assert!(Configuration::new(vec![0.2, 0.5], 0.3, 1.0).is_err());
    assert!(ProcessParams::new(0, 1.0, 1.0).is_err());
}

#[test]
fn single_particle_density_properties() {
    let (r, ts) = (1.0, 3.0);
    let l = 2.0 * PI * r;
    let f = |y: f64| single_particle_density(r, ts, 0.2, 1.1, 1.0, y).unwrap();
    for y in [0.1, 1.0, 3.0, 5.5, 6.2] {
        assert!(f(y) > 0.0);
    }
    assert!(f(1e-9) < 1e-7 && f(l - 1e-9) < 1e-7);
    let total = integrate(f, 0.0, l, 1e-12).unwrap();
    assert!((total - 1.0).abs() < 1e-9, "{total}");
    assert!(single_particle_density(r, ts, 0.2, 0.0, 1.0, 1.0).is_err());
    assert!(single_particle_density(r, ts, 1.2, 1.0, 1.0, 1.0).is_err());
}

#[test]
fn single_particle_large_tstar() {
    let r = 1.0;
    let (s, x, t) = (0.0, 1.3, 0.5);
    for y in [0.4, 2.5, 5.0] {
        let v = single_particle_density(r, 1e4, s, x, t, y).unwrap();
        let lambda = 1.0 / (8.0 * r * r);
        let doob = (y / (2.0 * r)).sin() / (x / (2.0 * r)).sin() * (lambda * (t - s)).exp() * q_abs(t - s, y, x, 2.0 * PI * r);
        assert!((v - doob).abs() < 1e-6 * doob.max(1.0), "{v} vs {doob}");
    }
}

proptest! {
    #[test]
    fn wrapped_kernel_symmetric(n in 2usize..6, t in 0.01f64..5.0, x in 0.0f64..6.28, y in 0.0f64..6.28) {
        let a = wrapped_kernel(n, 1.0, t, x, y, KernelMethod::ThetaForm).unwrap();
        let b = wrapped_kernel(n, 1.0, t, y, x, KernelMethod::ThetaForm).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn km_forms_agree(seed in 0u64..10_000, n in 2usize..5, t in 0.02f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u, _) = random_alcove(&mut rng, n, 1.0);
        let p = ProcessParams::new(n, 1.0, 4.0).unwrap();
        let d = km_determinant(&p, t, &u, KmForm::Determinant).unwrap().value;
        let c = km_determinant(&p, t, &u, KmForm::Closed).unwrap().value;
        prop_assert!((d - c).abs() <= 1e-8 * c.abs().max(d.abs()), "{} vs {}", d, c);
    }
}
