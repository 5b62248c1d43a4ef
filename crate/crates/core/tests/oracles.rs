use edpa::oracles::*;
use edpa::special::products::theta_e;
use edpa::special::weierstrass::HalfPeriods;
use edpa::EdpaError;
use num_complex::Complex64 as C;
use proptest::prelude::*;
use std::f64::consts::PI;

fn unit(a: f64) -> C {
    C::from_polar(1.0, a)
}

#[test]
fn denominator_small_cases() {
    assert_eq!(macdonald_denominator(&[C::new(0.4, 0.1)], 0.3).unwrap(), C::new(1.0, 0.0));

    let p: f64 = 0.1;
    let s = [C::new(1.0, 0.0), C::new(2.0, 0.0)];
    let direct: C = {
        let mut e = C::new(1.0, 0.0);
        for k in 0..200 {
            let pk = p.powi(k);
            e *= (1.0 - pk * 0.5) * (1.0 - pk * p * 2.0);
        }
        2.0 * e
    };
    let w = macdonald_denominator(&s, p).unwrap();
    assert!((w - direct).norm() < 1e-14 * direct.norm());

    // W(s₂, s₁) = s₁ E(s₂/s₁) = -s₂ E(s₁/s₂)
    let s = [unit(0.4), unit(2.1)];
    let w12 = macdonald_denominator(&s, 0.2).unwrap();
    let w21 = macdonald_denominator(&[s[1], s[0]], 0.2).unwrap();
    let via_inversion = -s[1] * theta_e(s[0] / s[1], 0.2).unwrap();
    assert!((w21 - via_inversion).norm() < 1e-13);
    assert!((w12 - s[1] * theta_e(s[0] / s[1], 0.2).unwrap()).norm() < 1e-13);

    assert!(macdonald_denominator(&[C::new(0.0, 0.0), unit(1.0)], 0.2).is_err());
}

#[test]
fn elliptic_cauchy_examples() {
    let inp = EllipticDetInput::new(vec![unit(0.3), unit(2.0)], vec![unit(1.1), unit(4.0)], unit(0.3), 0.2).unwrap();
    assert!(inp.generic());
    assert!(check_elliptic_cauchy(&inp).unwrap().residual < 1e-10);

    let r = vec![unit(0.2), unit(1.9), unit(4.4)];
    let same = EllipticDetInput::new(r.clone(), r, unit(0.7), 0.3).unwrap();
    let res = check_elliptic_cauchy(&same).unwrap();
    assert!((res.lhs.0 - 1.0).abs() < 1e-12 && res.lhs.1.abs() < 1e-12);
    assert!(res.residual < 1e-12);

    let r4 = vec![unit(0.1), unit(1.7), unit(3.3), unit(4.9)];
    let s4 = vec![unit(0.6), unit(2.2), unit(3.0), unit(5.5)];
    assert!(check_elliptic_cauchy(&EllipticDetInput::new(r4, s4, unit(1.3), 0.4).unwrap()).unwrap().residual < 1e-8);

    assert!(EllipticDetInput::new(vec![unit(0.1)], vec![unit(0.2)], unit(0.0), 0.3).is_err());
    assert!(EllipticDetInput::new(vec![unit(0.1), unit(0.2)], vec![unit(0.2), unit(0.3)], unit(0.0), 1.3).is_err());
    let degenerate = EllipticDetInput::new(vec![unit(0.1), unit(0.1)], vec![unit(0.2), unit(0.3)], unit(0.0), 0.3).unwrap();
    assert!(!degenerate.generic());
}

#[test]
fn denominator_expansion_examples() {
    let s2 = [unit(0.5), unit(2.6)];
    assert!(check_denominator_expansion(&s2, unit(0.9), 0.25).unwrap().residual < 1e-10);
    let s3 = [unit(0.5), unit(2.6), unit(4.0)];
    assert!(check_denominator_expansion(&s3, unit(0.9), 0.25).unwrap().residual < 1e-10);
    let equal = [unit(0.5), unit(0.5)];
    let r = check_denominator_expansion(&equal, unit(0.9), 0.25).unwrap();
    assert!(C::new(r.lhs.0, r.lhs.1).norm() < 1e-14 && C::new(r.rhs.0, r.rhs.1).norm() < 1e-12);
}

#[test]
fn theta_cauchy_examples() {
    let r = 1.0;
    let l = 2.0 * PI * r;
    let u = [0.3, 2.2, 4.0];
    let delta = -PI * r * ((u.iter().sum::<f64>()) / (PI * r)).floor();
    let same = check_theta_cauchy(&u, &u, delta, r, 0.4).unwrap();
    assert!((same.lhs.0 - 1.0).abs() < 1e-12 && same.residual < 1e-12);

    let eq: Vec<f64> = (0..3).map(|j| l * (j as f64 + 0.25) / 3.0).collect();
    let d = -PI * r * ((eq.iter().sum::<f64>()) / (PI * r)).floor();
    assert!(check_theta_cauchy(&eq, &[0.9, 3.1, 5.7], d, r, 0.3).unwrap().residual < 1e-9);

    assert!(check_theta_cauchy(&[0.5, 3.9], &[1.2, 2.2], 0.0, r, 0.5).unwrap().residual < 1e-10);
    // not in the alcove
    assert!(check_theta_cauchy(&[3.9, 0.5], &[1.2, 2.2], 0.0, r, 0.5).is_err());
}

#[test]
fn rs_determinant_examples() {
    assert!(check_rs_determinant(&[0.4, 2.9], 0.0, 1.0, 0.5).unwrap().residual < 1e-10);
    assert!(check_rs_determinant(&[0.4, 2.9, 5.1], PI, 1.0, 0.5).unwrap().residual < 1e-9);
    let r = check_rs_determinant(&[0.4, 0.4, 5.1], PI, 1.0, 0.5).unwrap();
    assert!(C::new(r.lhs.0, r.lhs.1).norm() < 1e-12 && C::new(r.rhs.0, r.rhs.1).norm() < 1e-12);
}

#[test]
fn forrester_examples() {
    let a = C::new(0.13, -0.05);
    assert!(check_forrester(&[0.2, 0.7], a, 0.4).unwrap().residual < 1e-9);
    assert!(check_forrester(&[0.2, 0.5, 0.8], a, 0.4).unwrap().residual < 1e-9);
    for n in [2, 3, 4] {
        let r = check_forrester(&vec![0.37; n], a, 0.4).unwrap();
        assert!(C::new(r.lhs.0, r.lhs.1).norm() < 1e-12 && C::new(r.rhs.0, r.rhs.1).norm() < 1e-12);
    }
}

#[test]
fn zeta_addition_examples() {
    let hp = HalfPeriods::rectangular(0.7, 1.1).unwrap();
    let r = check_zeta_addition(0.1, 0.45, 1.2, &hp).unwrap();
    assert!(r.residual < 1e-10);
    let rot = check_zeta_addition(0.45, 1.2, 0.1, &hp).unwrap();
    assert!((r.lhs.0 - rot.lhs.0).abs() < 1e-10 && (r.rhs.0 - rot.rhs.0).abs() < 1e-10);
    assert!(matches!(check_zeta_addition(0.3, 0.3, 1.0, &hp), Err(EdpaError::Pole { .. })));
}

#[test]
fn seeded_lemma_sweep() {
    for lemma in Lemma::ALL {
        for &n in lemma.sizes() {
            for seed in 0..200 {
                let r = run_lemma(lemma, n, seed).unwrap();
                assert!(r.residual < 1e-8, "{} N={n} seed={seed}: {}", lemma.name(), r.residual);
            }
        }
    }
}

#[test]
fn lemma_instances_are_reproducible() {
    let a = run_lemma(Lemma::ThetaCauchy, 3, 17).unwrap();
    let b = run_lemma(Lemma::ThetaCauchy, 3, 17).unwrap();
    assert_eq!(a.residual.to_bits(), b.residual.to_bits());
    assert_eq!(a.lhs.0.to_bits(), b.lhs.0.to_bits());
}

proptest! {
    #[test]
    fn elliptic_cauchy_random(
        offsets in (0.0f64..2.0 * PI, 0.0f64..2.0 * PI),
        jitter in proptest::collection::vec(-PI / 6.0..PI / 6.0, 6),
        k in 0.0f64..2.0 * PI,
        p in 0.05f64..0.5,
    ) {
        // jittered equidistant angles, pairwise at least π/3 apart
        let ring = |off: f64, j: &[f64]| -> Vec<C> {
            (0..3).map(|i| unit(off + 2.0 * PI * i as f64 / 3.0 + j[i])).collect()
        };
        let r = ring(offsets.0, &jitter[..3]);
        let s = ring(offsets.1, &jitter[3..]);
        let res = check_elliptic_cauchy(&EllipticDetInput::new(r, s, unit(k), p).unwrap()).unwrap();
        prop_assert!(res.residual < 1e-8);
    }

    #[test]
    fn zeta_addition_random(a in 0.0f64..1.4, b in 0.0f64..1.4, c in 0.0f64..1.4, w3 in 0.3f64..2.0) {
        let hp = HalfPeriods::rectangular(0.7, w3).unwrap();
        let ok = [(a, b), (b, c), (c, a)].iter().all(|(x, y)| {
            let d = (x - y).abs();
            d > 0.02 && d < 1.38
        });
        prop_assume!(ok);
        prop_assert!(check_zeta_addition(a, b, c, &hp).unwrap().residual < 1e-10);
    }
}
