use edpa::drift::drift_trig;
use edpa::kernel::{kernel_k, KernelForm, KernelQuery};
use edpa::process::{single_particle_density, Configuration, ProcessParams};
use edpa::quad::integrate;
use edpa::sde::*;
use std::f64::consts::PI;

fn elliptic() -> (Model, PathState, ProcessParams) {
    let p = ProcessParams::new(3, 1.0, 4.0).unwrap();
    (Model::Elliptic(p), PathState::from_configuration(&p.equidistant()), p)
}

fn cfg(paths: usize, seed: u64) -> SimConfig {
    SimConfig { dt: 2e-3, paths, seed, ..SimConfig::default() }
}

#[test]
fn drift_vector_structure() {
    let (model, init, _) = elliptic();
    let b = drift_vector(&model, &init).unwrap();
    // pair forces cancel in the sum, leaving N copies of the center force
    let center = edpa::drift::drift(&edpa::drift::DriftParams::new(3, 2.0 * PI, 4.0).unwrap(), init.center()).unwrap();
    assert!((b.iter().sum::<f64>() - 3.0 * center).abs() < 1e-12);

    let trig = Model::Trig { n: 2, r: 1.0 };
    let s = PathState { x: vec![0.5, 2.0], delta: 0.0, t: 0.0 };
    let b = drift_vector(&trig, &s).unwrap();
    let pair = drift_trig(1.0, -1.5).unwrap();
    let c = drift_trig(1.0, 2.5).unwrap();
    assert!((b[0] - (pair + c)).abs() < 1e-14 && (b[1] - (c - pair)).abs() < 1e-14);

    let dyson = Model::Dyson { n: 2 };
    let b = drift_vector(&dyson, &PathState { x: vec![-0.5, 0.5], delta: 0.0, t: 0.0 }).unwrap();
    assert_eq!(b, vec![-1.0, 1.0]);
    assert!(drift_vector(&dyson, &PathState { x: vec![0.0], delta: 0.0, t: 0.0 }).is_err());
}

#[test]
fn euler_step_is_explicit() {
    let model = Model::Dyson { n: 2 };
    let s = PathState { x: vec![-0.5, 0.5], delta: 0.0, t: 0.0 };
    let next = euler_step(&model, &s, 0.01, &[0.1, -0.2]).unwrap();
    assert!((next.x[0] - (-0.5 - 0.01 + 0.1)).abs() < 1e-15);
    assert!((next.x[1] - (0.5 + 0.01 - 0.2)).abs() < 1e-15);
    assert_eq!(next.t, 0.01);
}

#[test]
fn guarded_paths_stay_in_alcove() {
    let (model, _, p) = elliptic();
    // a tight start near a collision and near the center wall
    let tight = PathState { x: vec![0.0, 0.02, 3.5], delta: p.delta0(), t: 0.0 };
    assert!(tight.is_valid(&model));
    let c = SimConfig { dt: 1e-2, ..cfg(1, 3) };
    for seed in 0..20 {
        let mut rng = path_rng(seed, 0);
        let mut s = tight.clone();
        for _ in 0..50 {
            s = step(&model, &s, &c, &mut rng).unwrap();
            assert!(s.is_valid(&model), "seed {seed}: {:?}", s.x);
        }
    }
    let bad = PathState { x: vec![1.0, 0.5, 3.0], delta: p.delta0(), t: 0.0 };
    assert!(!bad.is_valid(&model));
    assert!(run_final_states(&model, &bad, &c, 0.1).is_err());
}

#[test]
fn step_failure_is_reported() {
    let model = Model::Dyson { n: 2 };
    let s = PathState { x: vec![0.0, 1.0], delta: 0.0, t: 0.0 };
    let fails = |halvings: u32| {
        let c = SimConfig { dt: 1.0, max_halvings: halvings, ..cfg(1, 0) };
        (0..200).filter(|&i| step(&model, &s, &c, &mut path_rng(1, i)).is_err()).count()
    };
    // unhalved unit steps overshoot the guard now and then
    assert!(fails(0) > 0);
    assert_eq!(fails(20), 0);
}

#[test]
fn same_statistics_for_any_thread_count() {
    let (model, init, _) = elliptic();
    let spec = HistogramSpec { lo: 0.0, hi: 2.0 * PI, bins: 16 };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ensemble(&model, &init, &cfg(64, 11), 0.2, spec).unwrap())
    };
    let (a, b) = (run(1), run(8));
    assert_eq!(a, b);
    let c = run_ensemble(&model, &init, &cfg(64, 12), 0.2, spec).unwrap();
    assert_ne!(a.sum, c.sum);
    assert_eq!(a.sum.iter().sum::<f64>(), 3.0 * 64.0);
}

#[test]
fn ensemble_density_follows_kernel_diagonal() {
    let (model, init, p) = elliptic();
    let spec = HistogramSpec { lo: 0.0, hi: 2.0 * PI, bins: 8 };
    let stats = run_ensemble(&model, &init, &cfg(3000, 5), 0.5, spec).unwrap();
    let (dens, se) = (stats.density(), stats.stderr());
    for i in 0..spec.bins {
        let (a, b) = (spec.left(i), spec.left(i + 1));
        let want = integrate(|x| kernel_k(&KernelQuery::new(0.5, x, 0.5, x), &p, KernelForm::Series).unwrap().re, a, b, 1e-10).unwrap()
            / (b - a);
        assert!((dens[i] - want).abs() < 4.0 * se[i] + 0.01, "bin {i}: {} vs {want} ± {}", dens[i], se[i]);
    }
}

#[test]
fn dmr_unit_observable() {
    let p = ProcessParams::new(3, 1.0, 4.0).unwrap();
    for t in [0.4, 0.8] {
        let r = dmr_estimate(&Observable::One, t, &p, &cfg(4000, 2)).unwrap();
        assert!((r.estimate - 1.0).abs() < 4.0 * r.stderr, "T={t}: {} ± {}", r.estimate, r.stderr);
        assert_eq!(r.estimate, r.weight_mean);
    }
}

#[test]
fn dmr_bump_matches_kernel() {
    let p = ProcessParams::new(2, 1.0, 4.0).unwrap();
    let obs = Observable::Bump { center: 1.0, kappa: 2.0 };
    let t = 0.5;
    let want = integrate(
        |x| obs.eval(&[x], 1.0) * kernel_k(&KernelQuery::new(t, x, t, x), &p, KernelForm::Series).unwrap().re,
        0.0,
        2.0 * PI,
        1e-10,
    )
    .unwrap();
    let r = dmr_estimate(&obs, t, &p, &cfg(8000, 9)).unwrap();
    assert!((r.estimate - want).abs() < 4.0 * r.stderr, "{} ± {} vs {want}", r.estimate, r.stderr);
    assert!(!r.variance_blowup);
}

#[test]
fn dmr_inputs_are_checked() {
    let p = ProcessParams::new(2, 1.0, 4.0).unwrap();
    assert!(dmr_estimate(&Observable::One, 4.0, &p, &cfg(10, 0)).is_err());
    assert!(dmr_estimate(&Observable::One, 0.5, &p, &SimConfig { paths: 0, ..cfg(10, 0) }).is_err());
}

#[test]
fn observables() {
    let xs = [0.1, 2.0, 4.0];
    assert_eq!(Observable::One.eval(&xs, 1.0), 1.0);
    assert!((Observable::Bump { center: 0.1, kappa: 3.0 }.eval(&[0.1], 1.0) - 1.0).abs() < 1e-15);
    assert_eq!(Observable::Pattern { threshold: 1.5 }.eval(&xs, 1.0), 1.0);
    assert_eq!(Observable::Pattern { threshold: 2.0 }.eval(&xs, 1.0), 0.0);
    // the wrap-around gap counts
    assert_eq!(Observable::Pattern { threshold: 1.0 }.eval(&[0.2, 6.0], 1.0), 0.0);
}

#[test]
fn single_particle_marginal() {
    let (r, ts, x0, t) = (1.0, 3.0, 1.0, 0.5);
    let m = SingleModel::Ebes { r, t_star: ts };
    let spec = HistogramSpec { lo: 0.0, hi: 2.0 * PI, bins: 12 };
    let stats = single_ensemble(&m, x0, &SimConfig { dt: 1e-3, ..cfg(4000, 21) }, t, spec).unwrap();
    let (dens, se) = (stats.density(), stats.stderr());
    for i in 0..spec.bins {
        let (a, b) = (spec.left(i), spec.left(i + 1));
        let want = integrate(|y| single_particle_density(r, ts, 0.0, x0, t, y).unwrap_or(0.0), a.max(1e-12), b, 1e-10).unwrap() / (b - a);
        assert!((dens[i] - want).abs() < 4.0 * se[i] + 0.01, "bin {i}: {} vs {want} ± {}", dens[i], se[i]);
    }
    assert!(simulate_single(&m, 7.0, &cfg(1, 0), 0.1, &mut path_rng(0, 0)).is_err());
    assert!(simulate_single(&m, 1.0, &cfg(1, 0), ts, &mut path_rng(0, 0)).is_err());
    assert!(simulate_single(&SingleModel::Bes3, -1.0, &cfg(1, 0), 0.1, &mut path_rng(0, 0)).is_err());
}

#[test]
fn single_models_respect_walls() {
    for m in [SingleModel::Cot { r: 1.0 }, SingleModel::Bes3] {
        let path = simulate_single(&m, 0.05, &SimConfig { dt: 1e-2, ..cfg(1, 0) }, 1.0, &mut path_rng(4, 0)).unwrap();
        assert_eq!(path.len(), 101);
        assert!(path.iter().all(|&(_, x)| x > 0.0));
    }
}

#[test]
fn line_models_run() {
    let dyson = Model::Dyson { n: 3 };
    let init = PathState { x: vec![-1.0, 0.0, 1.0], delta: 0.0, t: 0.0 };
    let (states, failures) = run_final_states(&dyson, &init, &cfg(50, 1), 0.5).unwrap();
    assert_eq!((states.len(), failures), (50, 0));
    assert!(states.iter().all(|s| s.is_valid(&dyson)));
    // the center of mass is a Brownian motion with variance t/N
    let (mean, se) = ensemble_mean(&states, |s| s.x.iter().sum::<f64>() / 3.0);
    assert!(mean.abs() < 4.0 * se);

    let hyper = Model::Hyper { n: 3, a: 2.0 };
    let init = PathState { x: vec![1.0, 2.0, 3.0], delta: 0.0, t: 0.0 };
    let (states, _) = run_final_states(&hyper, &init, &cfg(50, 1), 0.5).unwrap();
    assert!(states.iter().all(|s| s.is_valid(&hyper)));
    assert!(Configuration::new(vec![0.5, 0.4], 0.0, 1.0).is_err());
}

#[test]
fn config_validation() {
    assert!(SimConfig::default().validate().is_ok());
    assert!(SimConfig { dt: 0.0, ..SimConfig::default() }.validate().is_err());
    assert!(SimConfig { guard_frac: 0.6, ..SimConfig::default() }.validate().is_err());
    let (model, init, _) = elliptic();
    assert!(run_path(&model, &init, &cfg(1, 0), 4.0, &mut path_rng(0, 0)).is_err());
    let h = HistogramSpec { lo: 0.0, hi: 1.0, bins: 4 };
    assert_eq!(h.index(0.99), Some(3));
    assert_eq!(h.index(1.0), None);
    assert_eq!(h.left(2), 0.5);
}
