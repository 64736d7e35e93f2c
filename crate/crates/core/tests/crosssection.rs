mod common;

use common::*;
use raylength_core::crosssection::{
    is_nondegenerate, jacobian_fd, jacobian_fd_in, jacobian_linearized, jacobian_linearized_in, majda_det, shooting_map, Frames,
    DEFAULT_FD_STEP, NONDEGENERACY_TOL,
};
use raylength_core::{find_rays, scenes, Error, ReflectingRay, Scene, Vec3};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn rays_by_reflections(scene: &Scene, seed: u64, per_m: usize, m_max: usize) -> Vec<ReflectingRay> {
    let mut r = rng(seed);
    let mut buckets: Vec<Vec<ReflectingRay>> = vec![Vec::new(); m_max + 1];
    let mut tries = 0;
    while buckets[1..].iter().any(|b| b.len() < per_m) && tries < 2000 {
        tries += 1;
        let (w, t) = direction_pair(&mut r);
        for ray in find_rays(scene, w, t, m_max, 8).unwrap() {
            let b = &mut buckets[ray.m()];
            if b.len() < per_m {
                b.push(ray);
            }
        }
    }
    buckets.concat()
}

#[test]
fn majda_closed_form_on_spheres_and_ellipsoids() {
    let mut r = rng(20);
    for radius in [1.0, 2.0, 3.0] {
        let scene = scenes::sphere(radius);
        for _ in 0..100 {
            let (w, t) = direction_pair(&mut r);
            let ray = &find_rays(&scene, w, t, 1, 8).unwrap()[0];
            let m = majda_det(&scene, ray).unwrap();
            assert!((m - 4.0 / (radius * radius)).abs() < 1e-12);
            assert!(rel(jacobian_linearized(&scene, ray).unwrap().abs_det(), m) < 1e-5);
            assert!(rel(jacobian_fd(&scene, ray, DEFAULT_FD_STEP).unwrap().abs_det(), m) < 1e-5);
        }
    }
    let scene = ellipsoid_scene();
    for _ in 0..100 {
        let (w, t) = direction_pair(&mut r);
        let ray = &find_rays(&scene, w, t, 1, 8).unwrap()[0];
        let m = majda_det(&scene, ray).unwrap();
        assert!(rel(jacobian_linearized(&scene, ray).unwrap().abs_det(), m) < 1e-5);
        assert!(rel(jacobian_fd(&scene, ray, DEFAULT_FD_STEP).unwrap().abs_det(), m) < 1e-5);
    }
    let two = scenes::two_spheres();
    let ray = &find_rays(&two, -Vec3::Z, Vec3::Z, 1, 8).unwrap()[0];
    assert!(matches!(majda_det(&two, ray), Err(Error::NotApplicable(_))));
}

#[test]
fn finite_differences_agree_with_the_linearized_map() {
    for (scene, seed, m_max) in [(scenes::two_spheres(), 21, 6), (scenes::unit_sphere(), 22, 1), (two_ellipsoids(), 23, 4)] {
        let rays = rays_by_reflections(&scene, seed, 8, m_max);
        assert!(rays.iter().any(|r| r.m() == m_max));
        for ray in &rays {
            let lin = jacobian_linearized(&scene, ray).unwrap();
            let fd = jacobian_fd(&scene, ray, DEFAULT_FD_STEP).unwrap_or_else(|e| panic!("{e:?} {ray:?} {:?}", ray.surface_points(&scene).iter().zip(ray.directions()).map(|(s, d)| s.nu.dot(d)).collect::<Vec<_>>()));
            assert!(rel(fd.det, lin.det) < 1e-5, "m = {}: {} vs {}", ray.m(), fd.det, lin.det);
            assert!((lin.log_abs_det - lin.det.abs().ln()).abs() < 1e-12);
        }
    }
}

#[test]
fn determinant_is_frame_invariant() {
    let scene = scenes::two_spheres();
    let mut r = rng(24);
    for ray in rays_by_reflections(&scene, 25, 4, 4) {
        let base = jacobian_linearized(&scene, &ray).unwrap();
        for _ in 0..5 {
            let frames = Frames::standard(ray.omega, ray.theta).rotated(6.3 * uniform(&mut r), 6.3 * uniform(&mut r));
            for f in [frames.incoming, frames.outgoing] {
                assert!((f[0].norm() - 1.0).abs() < 1e-12 && (f[1].norm() - 1.0).abs() < 1e-12 && f[0].dot(f[1]).abs() < 1e-12);
            }
            assert!((frames.incoming[0].cross(frames.incoming[1]) - ray.omega).norm() < 1e-12);
            let lin = jacobian_linearized_in(&scene, &ray, frames).unwrap();
            assert!(rel(lin.abs_det(), base.abs_det()) < 1e-10);
            if ray.m() <= 2 {
                let fd = jacobian_fd_in(&scene, &ray, DEFAULT_FD_STEP, frames).unwrap();
                assert!(rel(fd.abs_det(), base.abs_det()) < 1e-5);
            }
        }
    }
}

#[test]
fn determinant_grows_with_windings() {
    let scene = scenes::two_spheres();
    let rays = find_rays(&scene, -Vec3::Z, Vec3::Z, 10, 16).unwrap();
    let mut prev = 0.0;
    for m in 2..=10 {
        let ray = rays.iter().filter(|r| r.m() == m).min_by(|a, b| a.sojourn.total_cmp(&b.sojourn)).expect("ray with m reflections");
        let d = jacobian_linearized(&scene, ray).unwrap().log_abs_det;
        assert!(d > prev, "m = {m}");
        prev = d;
    }
}

#[test]
fn shooting_map_counts_reflections() {
    let scene = scenes::unit_sphere();
    assert!((shooting_map(&scene, -Vec3::Z, [0.0, 0.0], 1).unwrap() - Vec3::Z).norm() < 1e-15);
    assert!(matches!(shooting_map(&scene, -Vec3::Z, [1.5, 0.0], 1), Err(Error::WrongReflectionCount { expected: 1, found: 0 })));
    let ray = &find_rays(&scene, -Vec3::Z, Vec3::X, 1, 8).unwrap()[0];
    let rec = jacobian_linearized(&scene, ray).unwrap();
    assert!(is_nondegenerate(&rec, NONDEGENERACY_TOL));
    assert!(jacobian_fd(&scene, ray, 0.0).is_err());
}
