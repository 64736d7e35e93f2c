#![allow(dead_code)]

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use raylength_core::{Body, Scene, Vec3};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

pub fn unit_vector(rng: &mut ChaCha8Rng) -> Vec3 {
    let z = 2.0 * uniform(rng) - 1.0;
    let phi = 2.0 * std::f64::consts::PI * uniform(rng);
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

/// Unit vector from two coordinates in `[0, 1)`.
pub fn unit_from(u: f64, v: f64) -> Vec3 {
    let z = 2.0 * u - 1.0;
    let phi = 2.0 * std::f64::consts::PI * v;
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

/// Direction pair with `|theta - omega|` bounded away from zero.
pub fn direction_pair(rng: &mut ChaCha8Rng) -> (Vec3, Vec3) {
    loop {
        let w = unit_vector(rng);
        let t = unit_vector(rng);
        if (t - w).norm() > 0.1 {
            return (w, t);
        }
    }
}

pub fn ellipsoid_scene() -> Scene {
    Scene::new(vec![Body::ellipsoid(Vec3::new(0.2, -0.1, 0.3), [1.0, 1.5, 0.7]).unwrap()], 2.0, 3.0).unwrap()
}

pub fn two_ellipsoids() -> Scene {
    Scene::new(
        vec![
            Body::ellipsoid(Vec3::new(-2.0, 0.0, 0.0), [1.0, 0.8, 1.2]).unwrap(),
            Body::ellipsoid(Vec3::new(2.0, 0.0, 0.0), [0.9, 1.1, 1.0]).unwrap(),
        ],
        3.5,
        4.0,
    )
    .unwrap()
}
