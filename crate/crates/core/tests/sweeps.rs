use uniformize_core::mesh::PantsParams;
use uniformize_core::tuner::{MomentumTarget, TunerConfig};
use uniformize_core::verify::*;

fn run(threads: usize, family: &SweepFamily, mode: SweepMode) -> String {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| degeneration_sweep(family, mode, &TunerConfig::default()).to_csv())
}

#[test]
fn sweep_output_is_independent_of_thread_count() {
    let family = SweepFamily::Annulus {
        moduli: vec![1.0, 2.0, 4.0],
        n_theta: 16,
    };
    let mode = SweepMode::Momentum(MomentumTarget::new(1.0).unwrap());
    assert_eq!(run(1, &family, mode), run(3, &family, mode));
}

#[test]
fn pinched_pants_keep_boundary_above_momentum() {
    let family = SweepFamily::PantsPinch {
        base: PantsParams {
            outer_radius: 3.0,
            hole_radii: [0.8, 0.8],
            hole_offset: 1.4,
            resolution: 32,
        },
        radii: vec![0.4, 0.1, 0.025],
    };
    let d = 0.7;
    let table = degeneration_sweep(
        &family,
        SweepMode::Momentum(MomentumTarget::new(d).unwrap()),
        &TunerConfig::default(),
    );
    assert_eq!(table.successes().count(), 3);
    let mut prev = f64::INFINITY;
    for (_, m) in table.successes() {
        assert!(m.lengths[1] > d);
        assert!(m.lengths[1] < prev);
        prev = m.lengths[1];
        assert!((m.area / m.area_expected - 1.0).abs() < 1e-6);
        for (x, xb) in m.collar_halfwidth.iter().zip(&m.xbar) {
            assert!(x.is_finite() && xb.is_finite());
        }
    }
}
