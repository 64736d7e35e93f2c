//! The billiard flow in arbitrary-precision binary floating point.
//!
//! Near a hyperbolic trapped orbit the escape time grows only like the
//! logarithm of the distance to its stable manifold, so long escape times
//! are reachable from the reference sphere only with initial data resolved
//! far below double precision. This tracer mirrors [`super::escape_time`]
//! with every quantity carried at a fixed binary precision.

use alloc::vec::Vec;

use dashu_float::round::mode::HalfEven;
use dashu_float::ops::SquareRoot;
use dashu_float::FBig;

use super::{EscapeTime, PhasePoint};
use crate::geometry::Scene;
use crate::vector::Vec3;

pub type Real = FBig<HalfEven, 2>;

pub fn real(v: f64, precision: usize) -> Real {
    Real::try_from(v).expect("finite value").with_precision(precision).value()
}

pub fn to_f64(v: &Real) -> f64 {
    v.to_f64().value()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PVec3 {
    pub x: Real,
    pub y: Real,
    pub z: Real,
}

impl PVec3 {
    pub fn from_vec3(v: Vec3, precision: usize) -> Self {
        PVec3 { x: real(v.x, precision), y: real(v.y, precision), z: real(v.z, precision) }
    }

    pub fn to_vec3(&self) -> Vec3 {
        Vec3::new(to_f64(&self.x), to_f64(&self.y), to_f64(&self.z))
    }

    pub fn dot(&self, o: &PVec3) -> Real {
        &self.x * &o.x + &self.y * &o.y + &self.z * &o.z
    }

    pub fn add(&self, o: &PVec3) -> PVec3 {
        PVec3 { x: &self.x + &o.x, y: &self.y + &o.y, z: &self.z + &o.z }
    }

    pub fn sub(&self, o: &PVec3) -> PVec3 {
        PVec3 { x: &self.x - &o.x, y: &self.y - &o.y, z: &self.z - &o.z }
    }

    pub fn scale(&self, s: &Real) -> PVec3 {
        PVec3 { x: &self.x * s, y: &self.y * s, z: &self.z * s }
    }

    pub fn mul_elem(&self, o: &PVec3) -> PVec3 {
        PVec3 { x: &self.x * &o.x, y: &self.y * &o.y, z: &self.z * &o.z }
    }

    pub fn neg(&self) -> PVec3 {
        PVec3 { x: -&self.x, y: -&self.y, z: -&self.z }
    }

    pub fn norm(&self) -> Real {
        self.dot(self).sqrt()
    }

    pub fn normalized(&self) -> PVec3 {
        let n = self.norm();
        PVec3 { x: &self.x / &n, y: &self.y / &n, z: &self.z / &n }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrecisePhasePoint {
    pub x: PVec3,
    pub xi: PVec3,
}

impl PrecisePhasePoint {
    pub fn from_phase_point(z: &PhasePoint, precision: usize) -> Self {
        PrecisePhasePoint { x: PVec3::from_vec3(z.x, precision), xi: PVec3::from_vec3(z.xi, precision) }
    }

    pub fn to_phase_point(&self) -> PhasePoint {
        PhasePoint::new(self.x.to_vec3(), self.xi.to_vec3())
    }

    pub fn reversed(&self) -> Self {
        PrecisePhasePoint { x: self.x.clone(), xi: self.xi.neg() }
    }

    /// Working precision in bits (of the position's first coordinate).
    pub fn precision(&self) -> usize {
        self.x.x.precision()
    }
}

struct PBody {
    center: PVec3,
    inv_r: PVec3,
    inv_r2: PVec3,
}

/// A scene converted to a fixed binary precision.
pub struct PreciseScene {
    bodies: Vec<PBody>,
    a2: Real,
    precision: usize,
}

/// Trajectory of the precise flow, rounded to double precision on output.
#[derive(Clone, Debug)]
pub struct PreciseTrajectory {
    /// `(body index, reflection point)` in order.
    pub hits: Vec<(usize, Vec3)>,
    pub reflections: usize,
    /// Body of the last reflection.
    pub last_body: Option<usize>,
    pub exit: Option<PrecisePhasePoint>,
    pub path_length: f64,
    pub censored: bool,
}

impl PreciseTrajectory {
    pub fn escape(&self) -> EscapeTime {
        EscapeTime { time: self.path_length, censored: self.censored, reflections: self.reflections }
    }
}

impl PreciseScene {
    pub fn new(scene: &Scene, precision: usize) -> Self {
        let one = real(1.0, precision);
        let bodies = scene
            .bodies()
            .iter()
            .map(|b| {
                let r = PVec3::from_vec3(b.radii(), precision);
                let inv_r = PVec3 { x: &one / &r.x, y: &one / &r.y, z: &one / &r.z };
                let inv_r2 = inv_r.mul_elem(&inv_r);
                PBody { center: PVec3::from_vec3(b.center(), precision), inv_r, inv_r2 }
            })
            .collect();
        let a = real(scene.a(), precision);
        PreciseScene { bodies, a2: &a * &a, precision }
    }

    pub fn precision(&self) -> usize {
        self.precision
    }

    pub fn phase_point(&self, z: &PhasePoint) -> PrecisePhasePoint {
        PrecisePhasePoint::from_phase_point(z, self.precision)
    }

    fn first_hit(&self, x: &PVec3, d: &PVec3, leaving: Option<usize>) -> Option<(usize, Real)> {
        let zero = Real::ZERO;
        let mut best: Option<(usize, Real)> = None;
        for (i, b) in self.bodies.iter().enumerate() {
            if Some(i) == leaving {
                continue;
            }
            let y = x.sub(&b.center).mul_elem(&b.inv_r);
            let dy = d.mul_elem(&b.inv_r);
            let qa = dy.dot(&dy);
            let qb = y.dot(&dy);
            if qb >= zero {
                // Moving away from the body's center: no forward hit from outside.
                continue;
            }
            let qc = y.dot(&y) - Real::ONE;
            let disc = &qb * &qb - &qa * &qc;
            if disc < zero {
                continue;
            }
            // qb < 0, so the stable form of the nearer root is c / (-b + sqrt(disc)).
            let q = disc.sqrt() - &qb;
            let t = &qc / &q;
            if t <= zero {
                continue;
            }
            if best.as_ref().map_or(true, |(_, tb)| &t < tb) {
                best = Some((i, t));
            }
        }
        best
    }

    fn exit_parameter(&self, x: &PVec3, d: &PVec3) -> Real {
        let b = x.dot(d);
        let c = x.dot(x) - &self.a2;
        let disc = &b * &b - &c;
        if disc <= Real::ZERO {
            return Real::ZERO;
        }
        let t = disc.sqrt() - &b;
        if t < Real::ZERO {
            Real::ZERO
        } else {
            t
        }
    }

    /// Runs the flow until exit or until the path length reaches `budget`.
    pub fn trace(&self, z: &PrecisePhasePoint, budget: f64, record: bool) -> PreciseTrajectory {
        let mut x = z.x.clone();
        let mut d = z.xi.clone();
        let mut leaving = None;
        let mut length = 0.0;
        let mut hits = Vec::new();
        let mut reflections = 0;
        let mut last_body = None;
        let two = Real::from(2);
        loop {
            match self.first_hit(&x, &d, leaving) {
                None => {
                    let t = self.exit_parameter(&x, &d);
                    length += to_f64(&t);
                    let censored = length >= budget;
                    let exit = PrecisePhasePoint { x: x.add(&d.scale(&t)), xi: d };
                    return PreciseTrajectory {
                        hits,
                        reflections,
                        last_body,
                        exit: if censored { None } else { Some(exit) },
                        path_length: if censored { budget } else { length },
                        censored,
                    };
                }
                Some((i, t)) => {
                    length += to_f64(&t);
                    if length >= budget {
                        return PreciseTrajectory { hits, reflections, last_body, exit: None, path_length: budget, censored: true };
                    }
                    let b = &self.bodies[i];
                    x = x.add(&d.scale(&t));
                    let nu = x.sub(&b.center).mul_elem(&b.inv_r2).normalized();
                    let dn = d.dot(&nu) * &two;
                    d = d.sub(&nu.scale(&dn));
                    leaving = Some(i);
                    reflections += 1;
                    last_body = Some(i);
                    if record {
                        hits.push((i, x.to_vec3()));
                    }
                }
            }
        }
    }

    pub fn escape_time(&self, z: &PrecisePhasePoint, budget: f64) -> EscapeTime {
        self.trace(z, budget, false).escape()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::billiard::escape_time;
    use crate::scenes;

    #[test]
    fn agrees_with_double_precision_flow() {
        let scene = scenes::two_spheres();
        let ps = PreciseScene::new(&scene, 200);
        let a = scene.a();
        for k in 0..25 {
            let x = Vec3::new(0.0, 0.0, a);
            let target = Vec3::new(-1.5 + 0.13 * k as f64, 0.2, 0.3);
            let z = PhasePoint::new(x, (target - x).normalized());
            let lo = escape_time(&scene, z, 200.0);
            let hi = ps.trace(&ps.phase_point(&z), 200.0, true);
            assert_eq!(lo.censored, hi.censored);
            assert_eq!(lo.reflections, hi.hits.len());
            assert!((lo.time - hi.path_length).abs() < 1e-9, "{} vs {}", lo.time, hi.path_length);
        }
    }

    #[test]
    fn axis_orbit_is_trapped() {
        let scene = scenes::two_spheres();
        let ps = PreciseScene::new(&scene, 128);
        let z = ps.phase_point(&PhasePoint::new(Vec3::ZERO, Vec3::X));
        let e = ps.escape_time(&z, 500.0);
        assert!(e.censored);
        assert_eq!(e.time, 500.0);
    }
}
