mod common;

use common::{disk_h, m2, m3};
use szbf::rng::{path_stream, standard_normal};
use szbf::simulate::{simulate_path_indexed, wilson_interval};
use szbf::{estimate_invariance, exit_time, simulate_path, InitialCondition, Point, SdeModel};

fn pt(c: &[f64]) -> Point<f64> {
    Point::new(c.to_vec()).unwrap()
}

/// Root-mean-square endpoint error of Euler–Maruyama for geometric Brownian
/// motion against the exact solution driven by the same increments.
fn gbm_rms_error(dt: f64, paths: u64, seed: u64) -> f64 {
    let (mu, sigma, horizon) = (0.5, 0.3, 1.0);
    let model = SdeModel::from_strs("gbm", &[&format!("{mu} * x1")], &[&[&format!("{sigma} * x1")]]).unwrap();
    let steps = (horizon / dt).round() as usize;
    let mut sq = 0.0;
    for i in 0..paths {
        let path = simulate_path_indexed(&model, &pt(&[1.0]), dt, horizon, seed, i).unwrap();
        let mut rng = path_stream(seed, i);
        let w: f64 = (0..steps).map(|_| dt.sqrt() * standard_normal::<f64>(&mut rng)).sum();
        let exact = ((mu - 0.5 * sigma * sigma) * horizon + sigma * w).exp();
        let em = path.states.last().unwrap()[0];
        sq += (em - exact).powi(2);
    }
    (sq / paths as f64).sqrt()
}

#[test]
fn euler_maruyama_strong_order_one_half() {
    let coarse = gbm_rms_error(1.0 / 64.0, 2000, 1);
    let fine = gbm_rms_error(1.0 / 256.0, 2000, 1);
    let ratio = coarse / fine;
    assert!((1.7..=2.3).contains(&ratio), "error ratio {ratio} ({coarse} / {fine})");
}

#[test]
fn noise_free_paths_ignore_the_seed() {
    let model = SdeModel::from_strs("det", &["-x1 + x2", "-x1 * x2"], &[&["0", "0"]]).unwrap();
    let a = simulate_path(&model, &pt(&[0.4, -0.2]), 1e-3, 2.0, 1).unwrap();
    let b = simulate_path(&model, &pt(&[0.4, -0.2]), 1e-3, 2.0, 987_654).unwrap();
    assert_eq!(a.states, b.states);
}

#[test]
fn paths_are_reproducible_and_well_formed() {
    let a = simulate_path(&m2(), &pt(&[0.5, 0.0]), 1e-3, 1.0, 42).unwrap();
    let b = simulate_path(&m2(), &pt(&[0.5, 0.0]), 1e-3, 1.0, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.times.len(), a.states.len());
    assert_eq!(a.times.len(), 1001);
    assert_eq!(a.states[0], pt(&[0.5, 0.0]));
    let c = simulate_path(&m2(), &pt(&[0.5, 0.0]), 1e-3, 1.0, 43).unwrap();
    assert_ne!(a.states, c.states);
}

#[test]
fn m2_radius_follows_deterministic_decay() {
    // d|x|^2 = -|x|^2 dt for M2; Euler–Maruyama keeps this up to O(dt)
    let path = simulate_path(&m2(), &pt(&[0.5, 0.0]), 1e-4, 2.0, 3).unwrap();
    let end = path.states.last().unwrap();
    let r2 = end[0] * end[0] + end[1] * end[1];
    let oracle = 0.25 * (-2.0f64).exp();
    assert!((r2 - oracle).abs() <= 0.02 * oracle, "{r2} vs {oracle}");
}

#[test]
fn exit_time_converges_under_refinement() {
    let dt = 1e-2;
    let oracle = (1.0f64 / 0.81).ln() / 3.0;
    for i in 0..20 {
        let coarse = simulate_path_indexed(&m3(), &pt(&[0.9, 0.0]), dt, 0.5, 5, i).unwrap();
        let fine = simulate_path_indexed(&m3(), &pt(&[0.9, 0.0]), dt / 10.0, 0.5, 5, i).unwrap();
        let tc = exit_time(&coarse, &disk_h()).unwrap().unwrap().time;
        let tf = exit_time(&fine, &disk_h()).unwrap().unwrap().time;
        assert!((tc - tf).abs() <= 5.0 * dt, "path {i}: {tc} vs {tf}");
        assert!((tf - oracle).abs() <= 5.0 * dt);
    }
}

#[test]
fn m2_uniform_start_never_exits() {
    let init = InitialCondition::Uniform(szbf::Region::Superlevel {
        g: szbf::parse("0.9801 - x1^2 - x2^2", 2).unwrap(),
        bounds: szbf::BoxRegion::symmetric(2, 1.0).unwrap(),
    });
    let s = estimate_invariance(&m2(), &disk_h(), &init, 500, 1e-3, 10.0, 0).unwrap();
    assert_eq!(s.n_exited, 0);
    assert_eq!(s.n_paths, 500);
    assert!(s.exit_times.is_none());
    assert!(s.evidence.contains("finite-horizon evidence, not proof of invariance"));
    assert_eq!(s.wilson_ci_95.0, 0.0);
    assert!(s.wilson_ci_95.1 > 0.0 && s.wilson_ci_95.1 < 0.01);
}

#[test]
fn m3_exits_from_near_boundary() {
    let s = estimate_invariance(&m3(), &disk_h(), &InitialCondition::Fixed(pt(&[0.9, 0.0])), 50, 1e-4, 1.0, 0).unwrap();
    assert_eq!(s.n_exited, 50);
    let summary = s.exit_times.unwrap();
    let oracle = (1.0f64 / 0.81).ln() / 3.0;
    assert!((summary.median - oracle).abs() < 5e-3);
    let (lo, hi) = s.wilson_ci_95;
    assert!(lo <= s.empirical_exit_prob && s.empirical_exit_prob <= hi && hi <= 1.0);
}

#[test]
fn wilson_interval_brackets_estimate() {
    for n in [1usize, 7, 100, 10_000] {
        for k in [0, n / 3, n / 2, n] {
            let (lo, hi) = wilson_interval(k, n);
            let p = k as f64 / n as f64;
            assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0, "{k}/{n}: ({lo}, {hi})");
        }
    }
}
