//! Exterior billiard flow: specular reflection, trajectories and escape times.

use alloc::vec::Vec;

use crate::geometry::{Scene, SurfacePoint};
use crate::vector::Vec3;

pub mod precise;

/// Default escape-time budget in length units.
pub const DEFAULT_BUDGET: f64 = 1e3;

/// Position and unit direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub x: Vec3,
    pub xi: Vec3,
}

impl PhasePoint {
    pub fn new(x: Vec3, xi: Vec3) -> Self {
        PhasePoint { x, xi }
    }

    /// Same point with the direction reversed.
    pub fn reversed(&self) -> Self {
        PhasePoint { x: self.x, xi: -self.xi }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceStatus {
    Escaped,
    BudgetExhausted,
    Tangency,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub start: PhasePoint,
    pub hits: Vec<SurfacePoint>,
    pub exit: Option<PhasePoint>,
    pub path_length: f64,
    pub status: TraceStatus,
}

impl Trajectory {
    pub fn reflections(&self) -> usize {
        self.hits.len()
    }

    /// Outgoing direction after the last event.
    pub fn final_direction(&self) -> Vec3 {
        match &self.exit {
            Some(e) => e.xi,
            None => self.start.xi,
        }
    }
}

/// Specular reflection of `d` in the plane with unit normal `nu`.
#[inline]
pub fn reflect(d: Vec3, nu: Vec3) -> Vec3 {
    d - nu * (2.0 * d.dot(nu))
}

/// Follow the flow from `z` until it leaves the reference ball, grazes a
/// boundary, or would need more than `max_reflections` reflections.
pub fn trace(scene: &Scene, z: PhasePoint, max_reflections: usize) -> Trajectory {
    let mut x = z.x;
    let mut d = z.xi;
    let mut leaving = None;
    let mut hits = Vec::new();
    let mut length = 0.0;
    loop {
        match scene.first_hit_from(x, d, leaving) {
            None => {
                let t = scene.exit_parameter(x, d);
                length += t;
                return Trajectory {
                    start: z,
                    hits,
                    exit: Some(PhasePoint::new(x + d * t, d)),
                    path_length: length,
                    status: TraceStatus::Escaped,
                };
            }
            Some(h) => {
                if hits.len() == max_reflections {
                    return Trajectory { start: z, hits, exit: None, path_length: length, status: TraceStatus::BudgetExhausted };
                }
                length += h.travel;
                hits.push(h.point);
                if h.tangency {
                    return Trajectory { start: z, hits, exit: None, path_length: length, status: TraceStatus::Tangency };
                }
                x = h.point.x;
                d = reflect(d, h.point.nu);
                leaving = Some(h.point.body_index);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EscapeTime {
    /// Path length until the first exit from the reference ball, or the budget.
    pub time: f64,
    /// True when the budget ran out first (stand-in for an infinite escape time).
    pub censored: bool,
    pub reflections: usize,
}

/// Escape time of a phase point on the reference sphere.
///
/// Tangential contacts with the convex pieces do not deflect the ray, so they
/// are passed through rather than terminating the flow.
pub fn escape_time(scene: &Scene, z: PhasePoint, budget: f64) -> EscapeTime {
    let mut x = z.x;
    let mut d = z.xi;
    let mut leaving = None;
    let mut length = 0.0;
    let mut reflections = 0;
    loop {
        match scene.first_hit_from(x, d, leaving) {
            None => {
                length += scene.exit_parameter(x, d);
                return if length >= budget {
                    EscapeTime { time: budget, censored: true, reflections }
                } else {
                    EscapeTime { time: length, censored: false, reflections }
                };
            }
            Some(h) => {
                length += h.travel;
                if length >= budget {
                    return EscapeTime { time: budget, censored: true, reflections };
                }
                reflections += 1;
                x = h.point.x;
                d = reflect(d, h.point.nu);
                leaving = Some(h.point.body_index);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Body;
    use crate::scenes;

    #[test]
    fn reflect_examples() {
        assert_eq!(reflect(-Vec3::Z, Vec3::Z), Vec3::Z);
        assert_eq!(reflect(Vec3::X, Vec3::Y), Vec3::X);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let r = reflect(Vec3::new(s, 0.0, -s), Vec3::Z);
        assert!((r - Vec3::new(s, 0.0, s)).norm() < 1e-16);
    }

    #[test]
    fn trace_single_sphere() {
        let scene = scenes::unit_sphere();
        let t = trace(&scene, PhasePoint::new(Vec3::new(0.0, 0.0, 5.0), -Vec3::Z), 10);
        assert_eq!(t.status, TraceStatus::Escaped);
        assert_eq!(t.hits.len(), 1);
        assert_eq!(t.hits[0].x, Vec3::Z);
        assert_eq!(t.exit.unwrap().xi, Vec3::Z);
        assert_eq!(t.exit.unwrap().x, Vec3::new(0.0, 0.0, 2.0));
        assert_eq!(t.path_length, 5.0);
    }

    #[test]
    fn trace_grazing() {
        let scene = scenes::unit_sphere();
        let t = trace(&scene, PhasePoint::new(Vec3::new(1.0, 0.0, 5.0), -Vec3::Z), 10);
        assert_eq!(t.status, TraceStatus::Tangency);
        assert!(t.hits[0].x.distance(Vec3::X) < 1e-12);
    }

    #[test]
    fn trace_bouncing_ball() {
        let scene = scenes::two_spheres();
        let t = trace(&scene, PhasePoint::new(Vec3::ZERO, Vec3::X), 50);
        assert_eq!(t.status, TraceStatus::BudgetExhausted);
        assert_eq!(t.hits.len(), 50);
        for (i, h) in t.hits.iter().enumerate() {
            let expect = if i % 2 == 0 { Vec3::X } else { -Vec3::X };
            assert_eq!(h.x, expect);
        }
        assert_eq!(t.path_length, 1.0 + 49.0 * 2.0);
    }

    #[test]
    fn escape_time_examples() {
        let single = scenes::unit_sphere();
        let a = single.a();
        let e = escape_time(&single, PhasePoint::new(Vec3::new(0.0, 0.0, a), -Vec3::Z), 100.0);
        assert!(!e.censored);
        assert!(e.time <= 2.0 * a);
        assert_eq!(e.time, 2.0 * (a - 1.0));

        let two = scenes::two_spheres();
        let a = two.a();
        let h = libm::sqrt(a * a - 0.01);
        let chord = 2.0 * h;
        let z = PhasePoint::new(Vec3::new(0.1, 0.0, h), -Vec3::Z);
        let free = escape_time(&two, z, 1000.0);
        assert!(!free.censored);
        assert!((free.time - chord).abs() < 1e-12);
        let x = Vec3::new(0.0, 0.0, a);
        let xi = (Vec3::new(1.2, 0.0, 0.1) - x).normalized();
        let bent = escape_time(&two, PhasePoint::new(x, xi), 1000.0);
        assert!(!bent.censored && bent.reflections >= 1);
        let traced = trace(&two, PhasePoint::new(x, xi), 1000);
        assert!((bent.time - traced.path_length).abs() < 1e-12);
    }

    #[test]
    fn monotone_censoring() {
        let two = scenes::two_spheres();
        let a = two.a();
        for k in 0..20 {
            let x = Vec3::new(0.0, 0.0, a);
            let xi = (Vec3::new(1.0 + 0.01 * k as f64, 0.0, 0.05) - x).normalized();
            let z = PhasePoint::new(x, xi);
            let small = escape_time(&two, z, 8.0);
            let big = escape_time(&two, z, 50.0);
            if !small.censored {
                assert_eq!(small.time, big.time);
            }
            assert!(big.time >= small.time);
        }
    }

    #[test]
    fn ellipsoid_scene_traces() {
        let e = Body::ellipsoid(Vec3::ZERO, [2.0, 1.0, 1.0]).unwrap();
        let scene = Scene::new(alloc::vec![e], 2.0, 3.0).unwrap();
        let t = trace(&scene, PhasePoint::new(Vec3::new(5.0, 0.0, 0.0), -Vec3::X), 5);
        assert_eq!(t.hits.len(), 1);
        assert_eq!(t.hits[0].x, Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(t.final_direction(), Vec3::X);
    }
}
