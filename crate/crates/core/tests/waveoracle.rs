use raylength_core::waveoracle::{
    filtered_kernel, filtered_kernel_with, locate_peaks, min_order, sphere_amplitude, validate_sphere, validate_sphere_with, AmplitudeGrid,
    Window, TRUNCATION_TOL,
};
use raylength_core::{Error, Vec3};

fn direction(c: f64) -> Vec3 {
    Vec3::new((1.0 - c * c).sqrt(), 0.0, -c)
}

#[test]
fn truncation_self_test() {
    for lambda in [5.0, 12.5, 20.0, 30.0] {
        for r in [0.5, 1.0] {
            for c in [-1.0, -0.5, 0.3, 0.9] {
                let l = min_order(lambda, r);
                let a = sphere_amplitude(r, c, lambda, l).unwrap();
                let b = sphere_amplitude(r, c, lambda, 2 * l).unwrap();
                assert!((a - b).norm() / b.norm() < TRUNCATION_TOL, "{lambda} {r} {c}");
            }
        }
    }
}

#[test]
fn grid_invariants_hold_at_high_frequency() {
    let grid = AmplitudeGrid::compute(2.0, -0.5, 60.0, 90.0, 8).unwrap();
    let step = grid.lambdas[1] - grid.lambdas[0];
    assert!(grid.lambdas.windows(2).all(|w| ((w[1] - w[0]) - step).abs() < 1e-12));
    for (&lambda, v) in grid.lambdas.iter().zip(&grid.values) {
        let doubled = sphere_amplitude(2.0, -0.5, lambda, 2 * grid.l_max).unwrap();
        assert!((doubled - v).norm() / v.norm() < TRUNCATION_TOL);
    }
}

#[test]
fn kernel_satisfies_parseval() {
    let grid = AmplitudeGrid::compute(1.0, -1.0, 20.0, 60.0, 128).unwrap();
    for window in [Window::default_for(20.0, 60.0), Window::Hann { lo: 20.0, hi: 60.0 }] {
        let k = filtered_kernel_with(&grid, window).unwrap();
        assert!(k.parseval_defect() < 1e-8, "{}", k.parseval_defect());
        let dt = k.ts[1] - k.ts[0];
        assert!(dt < k.resolution / 2.0);
    }
}

#[test]
fn peaks_are_stable_under_the_window() {
    for c in [-1.0, -0.5, 0.3] {
        let omega = Vec3::new(0.0, 0.0, -1.0);
        let gauss = validate_sphere([1.0, 2.0], direction(c), omega, (20.0, 60.0)).unwrap();
        let hann = validate_sphere_with([1.0, 2.0], direction(c), omega, (20.0, 60.0), Some(Window::Hann { lo: 20.0, hi: 60.0 })).unwrap();
        for (g, h) in gauss.radii.iter().zip(&hann.radii) {
            assert!((g.t_peak - h.t_peak).abs() < gauss.resolution);
            assert!(g.peak_time_error < gauss.resolution);
            assert_eq!(g.spectrum_entries, 1);
            assert_eq!(g.dominant_peaks, 1);
        }
    }
}

#[test]
fn magnitude_ratio_follows_the_coefficients() {
    let v = validate_sphere([1.0, 2.0], direction(-1.0), Vec3::new(0.0, 0.0, -1.0), (20.0, 60.0)).unwrap();
    assert!((v.predicted_ratio - 2.0).abs() < 1e-10);
    assert!(v.ratio_error < 0.1);
}

#[test]
fn equal_directions_are_rejected() {
    let w = Vec3::new(0.0, 0.0, -1.0);
    assert_eq!(validate_sphere([1.0, 2.0], w, w, (20.0, 60.0)), Err(Error::ThetaEqualsOmega));
}

#[test]
fn narrow_band_is_rejected() {
    let grid = AmplitudeGrid::compute(1.0, -1.0, 20.0, 21.0, 32).unwrap();
    assert_eq!(filtered_kernel(&grid, 0.2), Err(Error::BandTooNarrow(32)));
    let wide = AmplitudeGrid::compute(1.0, -1.0, 20.0, 60.0, 64).unwrap();
    assert!(!locate_peaks(&filtered_kernel(&wide, 40.0 / 6.0).unwrap(), 0.3).is_empty());
}
