//! Reference scenes used by the examples, tests and the CLI.

use alloc::vec;

use crate::geometry::{Body, Scene};
use crate::vector::Vec3;

/// Unit sphere at the origin, `rho = 1`, reference ball of radius 2.
pub fn unit_sphere() -> Scene {
    sphere(1.0)
}

/// Sphere of radius `r` at the origin with `rho = r` and `a = 2r`.
pub fn sphere(r: f64) -> Scene {
    Scene::new(vec![Body::sphere(Vec3::ZERO, r).expect("positive radius")], r, 2.0 * r).expect("valid scene")
}

/// Two unit spheres centred at `(+-2, 0, 0)`, `rho = 3`, reference ball of radius 4.
pub fn two_spheres() -> Scene {
    Scene::new(
        vec![
            Body::sphere(Vec3::new(-2.0, 0.0, 0.0), 1.0).expect("positive radius"),
            Body::sphere(Vec3::new(2.0, 0.0, 0.0), 1.0).expect("positive radius"),
        ],
        3.0,
        4.0,
    )
    .expect("valid scene")
}
