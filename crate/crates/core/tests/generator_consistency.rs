mod common;

use common::{disk_h, independent_generator, m2, m3, ou};
use szbf::{apply_generator, estimate_generator_mc, ito_decomposition, parse, Expr, Point, SdeModel};

fn pt(c: &[f64]) -> Point<f64> {
    Point::new(c.to_vec()).unwrap()
}

fn fixtures() -> Vec<(SdeModel, Expr, Point<f64>, usize)> {
    vec![
        (ou(), parse("x1^2", 1).unwrap(), pt(&[1.0]), 100_000),
        (m2(), disk_h(), pt(&[1.0, 0.0]), 2_000),
        (m2(), disk_h(), pt(&[0.3, -0.4]), 2_000),
        (m3(), disk_h(), pt(&[0.5, 0.2]), 2_000),
        (
            SdeModel::from_strs("mixed", &["-x1 + x2", "-x2"], &[&["0.3", "0"], &["0.1 * x1", "0.2"]]).unwrap(),
            parse("1 - x1^2 - 2 * x2^2 + x1 * x2", 2).unwrap(),
            pt(&[0.4, 0.1]),
            20_000,
        ),
    ]
}

#[test]
fn monte_carlo_generator_agrees_with_symbolic() {
    let t = 1e-3;
    for (model, h, p, paths) in fixtures() {
        let lh = apply_generator(&model, &h, &p).unwrap();
        let mc = estimate_generator_mc(&model, &h, &p, t, paths, 1e-5, 11).unwrap();
        let bound = 3.0 * mc.std_error + 10.0 * t * (1.0 + lh.abs());
        assert!(
            (lh - mc.estimate).abs() <= bound,
            "{} at {:?}: Lh {} vs MC {} ± {}",
            model.name(),
            p,
            lh,
            mc.estimate,
            mc.std_error
        );
    }
}

#[test]
fn generator_is_linear_in_h() {
    let model = SdeModel::from_strs("mixed", &["-x1 + x2", "sin(x1)"], &[&["0.3", "x2"], &["0.1 * x1", "0.2"]]).unwrap();
    let h1 = disk_h();
    let h2 = parse("sin(x1) * x2 + exp(0.5 * x2)", 2).unwrap();
    for (a, b) in [(2.0, -3.0), (0.5, 0.25), (-1.0, 7.0)] {
        let combo = Expr::add(Expr::mul(Expr::Const(a), h1.clone()), Expr::mul(Expr::Const(b), h2.clone()));
        for c in [[0.1, 0.2], [-0.7, 0.9], [1.3, -1.1], [0.0, 0.0]] {
            let p = pt(&c);
            let lhs = apply_generator(&model, &combo, &p).unwrap();
            let rhs = a * apply_generator(&model, &h1, &p).unwrap() + b * apply_generator(&model, &h2, &p).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1.0), "{lhs} vs {rhs}");
        }
    }
}

#[test]
fn ito_drift_term_matches_generator_and_independent_assembly() {
    let cases = [
        (m2(), disk_h()),
        (m3(), disk_h()),
        (
            SdeModel::from_strs("mixed", &["-x1 + x2", "sin(x1)"], &[&["0.3", "x2"], &["0.1 * x1", "0.2"]]).unwrap(),
            parse("cos(x1) * x2^2 - log(2 + x1^2)", 2).unwrap(),
        ),
    ];
    for (model, h) in cases {
        for c in [[0.1, 0.2], [-0.7, 0.9], [1.3, -1.1]] {
            let p = pt(&c);
            let d = ito_decomposition(&model, &h, &p).unwrap();
            assert_eq!(d.drift_term.to_bits(), apply_generator(&model, &h, &p).unwrap().to_bits());
            assert_eq!(d.noise_coeffs.len(), model.noise_dim());
            let oracle = independent_generator(&model, &h, &c);
            assert!(
                (d.drift_term - oracle).abs() <= 1e-12 * oracle.abs().max(1.0),
                "{} vs {}",
                d.drift_term,
                oracle
            );
        }
    }
}

#[test]
fn single_precision_agrees_with_double() {
    let (model, h) = (m2(), disk_h());
    let p32 = szbf::Point32::new(vec![0.3f32, -0.4]).unwrap();
    let lh32 = apply_generator(&model, &h, &p32).unwrap();
    assert!((lh32 - 0.25).abs() < 1e-6);
    let path = szbf::simulate_path(&model, &p32, 1e-2f32, 1.0, 0).unwrap();
    let path64 = szbf::simulate_path(&model, &pt(&[0.3, -0.4]), 1e-2, 1.0, 0).unwrap();
    let (a, b) = (path.states.last().unwrap(), path64.states.last().unwrap());
    assert!((a[0] as f64 - b[0]).abs() < 1e-4 && (a[1] as f64 - b[1]).abs() < 1e-4);
}
