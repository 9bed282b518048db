//! Acceptance criteria, one line each. Runs without the libtest harness so
//! every verdict is printed; exits non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::{disk_h, independent_generator, m2, m3, ou, central_difference, random_expr, seeded, square, well_conditioned};
use rand::Rng;
use szbf::rng::{path_stream, standard_normal};
use szbf::simulate::simulate_path_indexed;
use szbf::{
    apply_generator, check_lemma1, check_lyapunov_conditions, check_szbf, estimate_generator_mc,
    estimate_invariance, exit_time, parse, BoxRegion, CheckOptions, ClassKeFn, Expr, InitialCondition, Point,
    Region, Restriction, SamplingPlan, SdeModel, VerificationReport64,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn pt(c: &[f64]) -> Point<f64> {
    Point::new(c.to_vec()).unwrap()
}

fn within(limit: Duration, elapsed: Duration) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!("runtime {:.1?} exceeds {:?}", elapsed, limit))
    }
}

fn c1_generator() -> Outcome {
    let start = Instant::now();
    let (model, h, p) = (ou(), parse("x1^2", 1).unwrap(), pt(&[1.0]));
    let lh = apply_generator(&model, &h, &p).unwrap();
    if (lh + 1.75).abs() > 1e-12 {
        return Err(format!("apply_generator = {lh}, expected -1.75"));
    }
    let mc = estimate_generator_mc(&model, &h, &p, 1e-3, 100_000, 1e-5, 0).unwrap();
    let bound = 3.0 * mc.std_error + 0.02;
    let gap = (mc.estimate - lh).abs();
    within(Duration::from_secs(30), start.elapsed())?;
    let detail = format!("Lh = {lh}, MC = {:.5} (se {:.5}), |gap| {gap:.5} <= {bound:.5}", mc.estimate, mc.std_error);
    if gap <= bound {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c2_m2_certified() -> Outcome {
    let start = Instant::now();
    let r: VerificationReport64 =
        check_szbf(&m2(), &disk_h(), &ClassKeFn::linear(1.0), &square(1.3), &SamplingPlan::grid(101), &CheckOptions::default())
            .unwrap();
    within(Duration::from_secs(5), start.elapsed())?;
    let worst_margin = r.records.iter().map(|x| (x.margin - 1.0).abs()).fold(0.0, f64::max);
    let worst_coupling = r.records.iter().flat_map(|x| x.couplings.iter()).map(|c| c.abs()).fold(0.0, f64::max);
    let detail = format!(
        "{} on {} points, max |margin - 1| = {worst_margin:.1e}, max |coupling| = {worst_coupling:.1e}",
        r.conclusion, r.points_checked
    );
    if r.is_certified() && r.points_checked == 101 * 101 && worst_margin <= 1e-9 && worst_coupling <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c3_m3_refuted() -> Outcome {
    let (model, h) = (m3(), disk_h());
    let r: VerificationReport64 =
        check_szbf(&model, &h, &ClassKeFn::linear(1.0), &square(1.3), &SamplingPlan::grid(101), &CheckOptions::default())
            .unwrap();
    let w = r.witness.as_ref().ok_or("no witness")?;
    let x = w.point.coords();
    let oracle = 1.0 - 4.0 * (x[0] * x[0] + x[1] * x[1]);
    if !r.is_refuted() || (w.value - oracle).abs() > 1e-9 {
        return Err(format!("{} with witness margin {} vs oracle {oracle}", r.conclusion, w.value));
    }
    let paths = 100;
    let mut times = Vec::with_capacity(paths);
    for i in 0..paths as u64 {
        let path = simulate_path_indexed(&model, &pt(&[0.9, 0.0]), 1e-5, 0.2, 0, i).unwrap();
        let t = exit_time(&path, &h).unwrap().map_or(f64::NAN, |e| e.time);
        times.push(t);
    }
    let inside = times.iter().filter(|t| (0.0700..=0.0706).contains(*t)).count();
    let (lo, hi) = times.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    let detail = format!(
        "witness margin {:.6} matches 1 - 4|x|^2; exit times in [0.0700, 0.0706] on {inside}/{paths} paths (range [{lo:.5}, {hi:.5}], closed form {:.5})",
        w.value,
        (1.0f64 / 0.81).ln() / 3.0
    );
    if inside == paths {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c4_m2_invariance() -> Outcome {
    let init = InitialCondition::Uniform(Region::Superlevel {
        g: parse("0.9801 - x1^2 - x2^2", 2).unwrap(),
        bounds: BoxRegion::symmetric(2, 1.0).unwrap(),
    });
    let s = estimate_invariance(&m2(), &disk_h(), &init, 10_000, 1e-3, 10.0, 0).unwrap();
    let detail = format!("{} exits of {} paths; \"{}\"", s.n_exited, s.n_paths, s.evidence);
    if s.n_exited == 0 && s.evidence.contains("finite-horizon evidence") {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c5_lemma1() -> Outcome {
    let model = SdeModel::from_strs("const", &["0", "1"], &[&["1", "0"]]).unwrap();
    let h = parse("x2", 2).unwrap();
    let r = check_lemma1::<f64>(&model, &h, &ClassKeFn::linear(1.0), &square(2.0), &SamplingPlan::grid(101), &CheckOptions::default())
        .unwrap();
    let gap = r
        .szbf
        .records
        .iter()
        .zip(&r.drift_only.records)
        .map(|(a, b)| (a.margin - b.margin).abs())
        .fold(0.0, f64::max);
    let detail = format!(
        "Lemma 1 (i) {}, (ii) {}, max margin gap {gap:.1e} over {} points",
        r.condition_i.holds, r.condition_ii.holds, r.points_checked
    );
    if r.condition_i.holds && r.condition_ii.holds && gap <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c6_sign_chain() -> Outcome {
    let alpha = ClassKeFn::linear(1.0);
    let plan = SamplingPlan::grid(2).with_random(10_000, 0).restricted(Restriction::DomainMinusC);
    let domain = square(1.3);
    let h = disk_h();
    let ok = check_lyapunov_conditions::<f64>(&m2(), &h, &alpha, &domain, &plan, 1e-9).unwrap();
    // fresh per-point evaluation of the chain
    let mut fresh_violations = 0;
    let points = plan.points::<f64>(&domain, &h).unwrap();
    for p in &points {
        let hv = h.eval(p).unwrap();
        let lh = independent_generator(&m2(), &h, p);
        let a = alpha.eval(hv).unwrap();
        if !(-lh <= a + 1e-9 * (1.0 + lh.abs() + a.abs()) && a <= 0.0) {
            fresh_violations += 1;
        }
    }
    let bad = check_lyapunov_conditions::<f64>(&m3(), &h, &alpha, &domain, &plan, 1e-9).unwrap();
    let detail = format!(
        "M2: {} points off C, {} violations (fresh: {fresh_violations}); M3: {} violations, witness {:?}",
        ok.decrease_off_c.points,
        ok.decrease_off_c.violations,
        bad.decrease_off_c.violations,
        bad.decrease_off_c.witness.as_ref().map(|w| w.to_f64())
    );
    if ok.decrease_off_c.holds
        && ok.decrease_off_c.points >= 10_000
        && fresh_violations == 0
        && !bad.decrease_off_c.holds
        && bad.decrease_off_c.witness.is_some()
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gbm_rms_error(dt: f64, paths: u64) -> f64 {
    let (mu, sigma) = (0.5, 0.3);
    let model = SdeModel::from_strs("gbm", &["0.5 * x1"], &[&["0.3 * x1"]]).unwrap();
    let steps = (1.0 / dt).round() as usize;
    let mut sq = 0.0;
    for i in 0..paths {
        let path = simulate_path_indexed(&model, &pt(&[1.0]), dt, 1.0, 0, i).unwrap();
        let mut rng = path_stream(0, i);
        let w: f64 = (0..steps).map(|_| dt.sqrt() * standard_normal::<f64>(&mut rng)).sum();
        let exact = ((mu - 0.5 * sigma * sigma) + sigma * w).exp();
        sq += (path.states.last().unwrap()[0] - exact).powi(2);
    }
    (sq / paths as f64).sqrt()
}

fn c7_strong_order() -> Outcome {
    let start = Instant::now();
    let coarse = gbm_rms_error(1.0 / 64.0, 2000);
    let fine = gbm_rms_error(1.0 / 256.0, 2000);
    within(Duration::from_secs(60), start.elapsed())?;
    let ratio = coarse / fine;
    let detail = format!("RMS error {coarse:.5} at dt = 1/64, {fine:.5} at dt = 1/256, ratio {ratio:.3} (2000 paths)");
    if (1.7..=2.3).contains(&ratio) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c8_derivatives() -> Outcome {
    let mut rng = seeded(2024);
    let (dim, step) = (3, 1e-5);
    let (mut exprs, mut worst) = (0, 0.0f64);
    while exprs < 100 {
        let e = random_expr(&mut rng, 5, dim);
        if e.max_var().is_none() {
            continue;
        }
        let grad: Vec<Expr> = (0..dim).map(|i| e.derivative(i)).collect();
        let mut pts = Vec::new();
        for _ in 0..200 {
            let p: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
            if well_conditioned(&e, &grad, &p, step) {
                pts.push(p);
                if pts.len() == 10 {
                    break;
                }
            }
        }
        if pts.len() < 10 {
            continue;
        }
        exprs += 1;
        for p in &pts {
            let g = e.eval_grad(p).unwrap();
            for (i, &gi) in g.iter().enumerate() {
                let fd = central_difference(&e, p, i, step).unwrap();
                worst = worst.max((gi - fd).abs() / (1.0 + gi.abs()));
                for j in 0..dim {
                    let a = e.derivative(i).derivative(j).eval(p);
                    let b = e.derivative(j).derivative(i).eval(p);
                    if let (Ok(a), Ok(b)) = (a, b) {
                        if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                            return Err(format!("Hessian asymmetry {a} vs {b} for {e} at {p:?}"));
                        }
                    }
                }
            }
        }
    }
    let detail = format!("{exprs} expressions x 10 points, worst relative gradient error {worst:.2e}, Hessian symmetric");
    if worst <= 1e-5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c9_reproducible() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_szbf");
    let models = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models");
    let m2 = format!("{models}/m2.model");
    let m3 = format!("{models}/m3.model");
    let lemma = format!("{models}/const_diffusion.model");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = dir.path().join("out.csv").display().to_string();
    let runs: Vec<Vec<&str>> = vec![
        vec!["check", "--model", &m2, "--grid", "51", "--samples", "500", "--seed", "7"],
        vec!["check", "--model", &m3, "--grid", "51", "--samples", "500", "--seed", "7", "--format", "csv", "--out", &csv],
        vec!["lemma1", "--model", &lemma, "--grid", "31", "--samples", "100", "--seed", "3"],
        vec!["simulate", "--model", &m2, "--paths", "20", "--horizon", "1", "--seed", "5", "--format", "csv", "--out", &csv],
        vec!["exit-prob", "--model", &m3, "--paths", "50", "--horizon", "0.5", "--seed", "5"],
        vec!["stability", "--model", &m2, "--grid", "31", "--paths", "30", "--horizon", "1", "--seed", "9", "--format", "csv", "--out", &csv],
    ];
    for args in &runs {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let o = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
            let side = std::fs::read(&csv).unwrap_or_default();
            outputs.push((o.status.code(), o.stdout, side));
        }
        if outputs[0] != outputs[1] {
            return Err(format!("outputs differ for {args:?}"));
        }
        if !matches!(outputs[0].0, Some(0..=2)) || outputs[0].1.is_empty() {
            return Err(format!("unexpected run {args:?}: {:?}", outputs[0].0));
        }
    }
    Ok(format!("{} invocations, each run twice, byte-identical JSON and CSV", runs.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 generator correctness (OU)", c1_generator),
        ("2 SZBF certification (M2)", c2_m2_certified),
        ("3 refutation and exit time (M3)", c3_m3_refuted),
        ("4 empirical invariance (M2)", c4_m2_invariance),
        ("5 Lemma 1 consistency", c5_lemma1),
        ("6 Lyapunov sign chain", c6_sign_chain),
        ("7 Euler-Maruyama strong order", c7_strong_order),
        ("8 derivative engine", c8_derivatives),
        ("9 CLI reproducibility", c9_reproducible),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({secs:.1}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({secs:.1}s) {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
