mod common;

use common::*;
use proptest::prelude::*;
use raylength_core::trapscan::fibonacci_sphere;
use raylength_core::{escape_time, reflect, scenes, trace, PhasePoint, TraceStatus, Vec3};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100_000))]

    #[test]
    fn reflection_preserves_norm_and_flips_normal_component(a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64, e in 0.0..1.0f64) {
        let d = unit_from(a, b);
        let nu = unit_from(c, e);
        let r = reflect(d, nu);
        prop_assert!((r.norm() - 1.0).abs() < 1e-14);
        prop_assert!((r.dot(nu) + d.dot(nu)).abs() < 1e-14);
        // The tangential component is unchanged.
        prop_assert!(((r - nu * r.dot(nu)) - (d - nu * d.dot(nu))).norm() < 1e-14);
    }
}

#[test]
fn trajectories_are_unit_speed_and_specular() {
    let mut r = rng(3);
    for scene in [scenes::two_spheres(), two_ellipsoids()] {
        for _ in 0..500 {
            let x = unit_vector(&mut r) * scene.a();
            let d = (unit_vector(&mut r) * 0.7 - x.normalized()).normalized();
            let tr = trace(&scene, PhasePoint::new(x, d), 1000);
            let mut pts = vec![x];
            pts.extend(tr.hits.iter().map(|h| h.x));
            if let Some(exit) = tr.exit {
                pts.push(exit.x);
                assert!((exit.x.norm() - scene.a()).abs() < 1e-9);
                assert!((exit.xi - tr.final_direction()).norm() == 0.0);
            }
            let total: f64 = pts.windows(2).map(|w| w[0].distance(w[1])).sum();
            assert!((total - tr.path_length).abs() < 1e-9 * total.max(1.0));
            if tr.status != TraceStatus::Escaped {
                continue;
            }
            for (k, h) in tr.hits.iter().enumerate() {
                let (din, dout) = ((pts[k + 1] - pts[k]).normalized(), (pts[k + 2] - pts[k + 1]).normalized());
                assert!((reflect(din, h.nu) - dout).norm() < 1e-10);
                assert!(h.nu.dot(din) < 0.0);
            }
        }
    }
}

#[test]
fn escape_time_is_monotone_in_the_budget() {
    let scene = scenes::two_spheres();
    let dirs = fibonacci_sphere(40);
    for (i, p) in dirs.iter().enumerate() {
        let x = *p * scene.a();
        for q in dirs.iter().skip(i % 7).step_by(7) {
            if q.dot(x) >= 0.0 {
                continue;
            }
            let z = PhasePoint::new(x, *q);
            let mut last: Option<f64> = None;
            for budget in [5.0, 10.0, 20.0, 40.0, 80.0] {
                let e = escape_time(&scene, z, budget);
                if e.censored {
                    assert_eq!(e.time, budget);
                    assert!(last.is_none());
                } else if let Some(t) = last {
                    assert_eq!(e.time, t);
                } else {
                    last = Some(e.time);
                }
            }
        }
    }
}

#[test]
fn axis_orbit_never_escapes() {
    let scene = scenes::two_spheres();
    for budget in [10.0, 1e3, 1e5] {
        let e = escape_time(&scene, PhasePoint::new(Vec3::ZERO, Vec3::X), budget);
        assert!(e.censored);
        assert_eq!(e.time, budget);
    }
    let tr = trace(&scene, PhasePoint::new(Vec3::ZERO, -Vec3::X), 10_000);
    assert_eq!(tr.status, TraceStatus::BudgetExhausted);
    assert!(tr.hits.iter().all(|h| h.x.y == 0.0 && h.x.z == 0.0 && h.x.x.abs() == 1.0));
}

#[test]
fn single_sphere_never_traps() {
    let scene = scenes::unit_sphere();
    let dirs = fibonacci_sphere(200);
    for p in &dirs {
        for q in &dirs {
            if q.dot(*p) < 0.0 {
                let e = escape_time(&scene, PhasePoint::new(*p * scene.a(), *q), 500.0);
                assert!(!e.censored && e.reflections <= 1);
            }
        }
    }
}
