use std::f64::consts::PI;

use uniformize_core::mesh::*;
use uniformize_core::solver::*;
use uniformize_core::tuner::*;

fn annulus(t: f64, n_theta: usize) -> (TriMesh, BackgroundMetric) {
    let n_s = ((t * n_theta as f64 / (2.0 * PI)).ceil() as usize).max(4);
    let m = generate_flat_annulus(t, n_s, n_theta).unwrap();
    let bg = build_background(&m).unwrap();
    (m, bg)
}

fn pants() -> (TriMesh, BackgroundMetric) {
    let m = generate_pants_domain_with(&PantsParams {
        outer_radius: 3.0,
        hole_radii: [0.8, 0.6],
        hole_offset: 1.4,
        resolution: 40,
    })
    .unwrap();
    let bg = build_background(&m).unwrap();
    (m, bg)
}

#[test]
fn initial_guess_is_close_on_cylinders() {
    for t in [PI / 2.0, PI, 4.0 * PI, 8.0 * PI] {
        let (m, bg) = annulus(t, 24);
        for d in [0.5, 1.0, 2.0] {
            let target = MomentumTarget::new(d).unwrap();
            let (guess, _) = initial_guess(&m, &bg, target, &SolverConfig::default()).unwrap();
            let r = tune_d(&m, &bg, target, &TunerConfig::default(), None).unwrap();
            for (g, c) in guess.iter().zip(r.c.values()) {
                assert!((g / c - 1.0).abs() < 0.25, "T = {t}, d = {d}: guess {g} vs {c}");
            }
        }
    }
}

#[test]
fn initial_guess_has_the_right_scale_on_pants() {
    let (m, bg) = pants();
    for d in [0.5, 1.0, 2.0] {
        let target = MomentumTarget::new(d).unwrap();
        let (guess, _) = initial_guess(&m, &bg, target, &SolverConfig::default()).unwrap();
        let r = tune_d(&m, &bg, target, &TunerConfig::default(), None).unwrap();
        for (g, c) in guess.iter().zip(r.c.values()) {
            // the geodesic-length guess ignores how boundaries interact; only the scale is right
            assert!(g / c > 0.5 && g / c < 2.0, "d = {d}: guess {g} vs {c}");
        }
    }
}

#[test]
fn tuned_curvatures_do_not_depend_on_start() {
    let (m, bg) = pants();
    let d = MomentumTarget::new(0.8).unwrap();
    let cfg = TunerConfig::default();
    let a = tune_d(&m, &bg, d, &cfg, Some(&[0.05, 0.6, 0.05])).unwrap();
    let b = tune_d(&m, &bg, d, &cfg, Some(&[0.5, 0.1, 0.4])).unwrap();
    for (x, y) in a.c.values().iter().zip(b.c.values()) {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }
}

#[test]
fn small_momentum_approaches_geodesic_boundary() {
    let (m, bg) = pants();
    let (_, geo) = solve_u(
        &m,
        &bg,
        &CurvatureSpec::uniform(3, 0.0).unwrap(),
        &SolverConfig::default(),
        None,
    )
    .unwrap();
    let mut prev = f64::INFINITY;
    for d in [0.1, 0.01] {
        let r = tune_d(&m, &bg, MomentumTarget::new(d).unwrap(), &TunerConfig::default(), None).unwrap();
        let gap = r
            .report
            .lengths
            .iter()
            .zip(&geo.lengths)
            .map(|(l, g)| (l - g).abs())
            .fold(0.0, f64::max);
        assert!(gap < prev, "d = {d}: gap {gap}");
        assert!(gap < 2.0 * d, "d = {d}: gap {gap}");
        prev = gap;
    }
}

#[test]
fn momentum_increases_along_the_diagonal() {
    let (m, bg) = pants();
    let cfg = SolverConfig::default();
    let mut prev = vec![0.0; 3];
    let mut warm = None;
    for i in 1..=8 {
        let c = CurvatureSpec::uniform(3, 0.1 * i as f64).unwrap();
        let (f, u, _) = momentum_map(&m, &bg, &c, &cfg, warm.as_ref()).unwrap();
        for (a, b) in f.iter().zip(&prev) {
            assert!(a > b, "c = {}: {f:?} after {prev:?}", 0.1 * i as f64);
        }
        prev = f;
        warm = Some(u);
    }
}

#[test]
fn jacobian_is_nonsingular() {
    let (m, bg) = pants();
    let cfg = SolverConfig::default();
    for c in [[0.1, 0.1, 0.1], [0.5, 0.2, 0.7], [0.9, 0.9, 0.9]] {
        let spec = CurvatureSpec::new(c.to_vec()).unwrap();
        let (u, _) = solve_u(&m, &bg, &spec, &cfg, None).unwrap();
        let j = jacobian(&m, &bg, &u, &spec).unwrap();
        let scale = j.iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(j.determinant().abs() > 1e-6 * scale.powi(3), "c = {c:?}");
    }
}

#[test]
fn solution_scales_with_the_background() {
    // rescaling the background metric by λ shifts u by −ln λ
    let (m, bg) = pants();
    let lambda = 2.5;
    let ms = m.scaled(lambda);
    let bgs = build_background(&ms).unwrap();
    let c = CurvatureSpec::new(vec![0.2, 0.4, 0.3]).unwrap();
    let cfg = SolverConfig::default();
    let (u, r) = solve_u(&m, &bg, &c, &cfg, None).unwrap();
    let (us, rs) = solve_u(&ms, &bgs, &c, &cfg, None).unwrap();
    for (a, b) in u.u.iter().zip(&us.u) {
        assert!((a - lambda.ln() - b).abs() < 1e-8);
    }
    for (a, b) in r.lengths.iter().zip(&rs.lengths) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn invalid_targets_are_rejected() {
    assert!(MomentumTarget::new(0.0).is_err());
    assert!(MomentumTarget::new(-1.0).is_err());
    assert!(MomentumTarget::new(f64::INFINITY).is_err());
}
