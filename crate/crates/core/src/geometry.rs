//! Implicit convex bodies, their differential geometry, and ray intersection.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::vector::{orthonormal_basis, Mat2, Mat3, Vec3};

/// Implicit value below which a point counts as lying on a surface.
pub const SURFACE_TOL: f64 = 1e-9;
/// Default threshold on `|<d, nu>|` below which a hit is tangential.
pub const TANGENCY_TOL: f64 = 1e-7;
/// Rays ignore roots closer than this to their origin.
pub const HIT_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BodyKind {
    Sphere,
    Ellipsoid,
}

/// Axis-aligned ellipsoid `sum ((x_i - c_i) / r_i)^2 = 1`; a sphere when the
/// radii agree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Body {
    kind: BodyKind,
    center: Vec3,
    radii: Vec3,
}

fn check_radius(r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("radius must be positive and finite, got {r}")))
    }
}

/// Value, gradient and Hessian of a body's defining function.
#[derive(Clone, Copy, Debug)]
pub struct ImplicitValue {
    pub value: f64,
    pub gradient: Vec3,
    pub hessian: Mat3,
}

/// Local second-order geometry at a boundary point.
#[derive(Clone, Copy, Debug)]
pub struct SurfacePoint {
    pub body_index: usize,
    pub x: Vec3,
    /// Outward unit normal, pointing into the exterior domain.
    pub nu: Vec3,
    /// Orthonormal tangent frame with `t1 x t2 = nu`.
    pub tangents: [Vec3; 2],
    /// Second fundamental form in the tangent frame; positive definite here.
    pub shape: Mat2,
}

impl SurfacePoint {
    pub fn gauss_curvature(&self) -> f64 {
        self.shape.det()
    }
}

impl Body {
    pub fn sphere(center: Vec3, radius: f64) -> Result<Body> {
        check_radius(radius)?;
        Ok(Body { kind: BodyKind::Sphere, center, radii: Vec3::new(radius, radius, radius) })
    }

    pub fn ellipsoid(center: Vec3, radii: [f64; 3]) -> Result<Body> {
        for r in radii {
            check_radius(r)?;
        }
        Ok(Body { kind: BodyKind::Ellipsoid, center, radii: Vec3::from_array(radii) })
    }

    pub fn kind(&self) -> BodyKind {
        self.kind
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn radii(&self) -> Vec3 {
        self.radii
    }

    /// Radius of a sphere; `None` for ellipsoids.
    pub fn radius(&self) -> Option<f64> {
        match self.kind {
            BodyKind::Sphere => Some(self.radii.x),
            BodyKind::Ellipsoid => None,
        }
    }

    pub fn max_radius(&self) -> f64 {
        self.radii.max_abs()
    }

    /// Same body scaled about the origin by `s > 0`.
    pub fn scaled(&self, s: f64) -> Body {
        Body { kind: self.kind, center: self.center * s, radii: self.radii * s }
    }

    fn inv_r2(&self) -> Vec3 {
        let r = self.radii;
        Vec3::new(1.0 / (r.x * r.x), 1.0 / (r.y * r.y), 1.0 / (r.z * r.z))
    }

    pub fn implicit_value(&self, x: Vec3) -> f64 {
        let y = (x - self.center).div_elem(self.radii);
        y.norm_squared() - 1.0
    }

    pub fn implicit_eval(&self, x: Vec3) -> ImplicitValue {
        let w = self.inv_r2();
        let y = x - self.center;
        ImplicitValue {
            value: self.implicit_value(x),
            gradient: y.mul_elem(w) * 2.0,
            hessian: Mat3::diagonal(w * 2.0),
        }
    }

    fn check_on_surface(&self, x: Vec3, index: usize) -> Result<()> {
        let v = self.implicit_value(x);
        if libm::fabs(v) < SURFACE_TOL {
            Ok(())
        } else {
            Err(Error::NotOnSurface { body: index, value: v })
        }
    }

    fn normal_unchecked(&self, x: Vec3) -> Vec3 {
        (x - self.center).mul_elem(self.inv_r2()).normalized()
    }

    pub fn unit_normal(&self, x: Vec3) -> Result<Vec3> {
        self.check_on_surface(x, 0)?;
        Ok(self.normal_unchecked(x))
    }

    /// Normal, tangent frame and second fundamental form at a surface point.
    pub fn surface_point(&self, x: Vec3, body_index: usize) -> Result<SurfacePoint> {
        self.check_on_surface(x, body_index)?;
        Ok(self.surface_point_unchecked(x, body_index))
    }

    pub(crate) fn surface_point_unchecked(&self, x: Vec3, body_index: usize) -> SurfacePoint {
        let iv = self.implicit_eval(x);
        let g = iv.gradient.norm();
        let nu = iv.gradient / g;
        let (t1, t2) = orthonormal_basis(nu);
        let h = &iv.hessian;
        let s11 = h.form(t1, t1) / g;
        let s12 = h.form(t1, t2) / g;
        let s22 = h.form(t2, t2) / g;
        SurfacePoint { body_index, x, nu, tangents: [t1, t2], shape: Mat2::new(s11, s12, s12, s22) }
    }

    pub fn gauss_curvature(&self, x: Vec3) -> Result<f64> {
        Ok(self.surface_point(x, 0)?.gauss_curvature())
    }

    /// Parameters `t` where the line `x + t d` meets the surface, ascending.
    pub fn line_roots(&self, x: Vec3, d: Vec3) -> Option<(f64, f64)> {
        // Affine rescaling to the unit sphere keeps the parametrization in t.
        let y = (x - self.center).div_elem(self.radii);
        let dy = d.div_elem(self.radii);
        let a = dy.norm_squared();
        let b = y.dot(dy);
        let c = y.norm_squared() - 1.0;
        let disc = b * b - a * c;
        if disc < 0.0 || a == 0.0 {
            return None;
        }
        let q = -(b + libm::copysign(libm::sqrt(disc), b));
        if q == 0.0 {
            return Some((0.0, 0.0));
        }
        let (t0, t1) = (q / a, c / q);
        Some(if t0 <= t1 { (t0, t1) } else { (t1, t0) })
    }

    /// Moves `x` onto the surface along `dir` (closest root), falling back to
    /// radial projection when the line misses.
    pub fn project_along(&self, x: Vec3, dir: Vec3) -> Vec3 {
        if let Some((t0, t1)) = self.line_roots(x, dir) {
            let t = if libm::fabs(t0) <= libm::fabs(t1) { t0 } else { t1 };
            return x + dir * t;
        }
        self.project_radial(x)
    }

    pub fn project_radial(&self, x: Vec3) -> Vec3 {
        let y = x - self.center;
        let q = y.div_elem(self.radii).norm();
        if q == 0.0 {
            return self.center + Vec3::new(self.radii.x, 0.0, 0.0);
        }
        self.center + y / q
    }

    /// The unique surface point whose outward normal is `n`.
    pub fn point_with_normal(&self, n: Vec3) -> Vec3 {
        let r2 = self.radii.mul_elem(self.radii);
        let w = r2.mul_elem(n);
        self.center + w / n.mul_elem(self.radii).norm()
    }

    /// Closest point of the surface to `p` (p outside or inside).
    pub fn closest_point(&self, p: Vec3) -> Vec3 {
        if let BodyKind::Sphere = self.kind {
            let d = p - self.center;
            let n = d.norm();
            if n == 0.0 {
                return self.center + Vec3::new(self.radii.x, 0.0, 0.0);
            }
            return self.center + d * (self.radii.x / n);
        }
        // Newton on the Lagrange multiplier: x_i = r_i^2 y_i / (r_i^2 + s).
        let y = p - self.center;
        let r2 = self.radii.mul_elem(self.radii);
        let g = |s: f64| -> f64 {
            let mut acc = 0.0;
            for i in 0..3 {
                let q = self.radii[i] * y[i] / (r2[i] + s);
                acc += q * q;
            }
            acc - 1.0
        };
        let rmin2 = r2.x.min(r2.y).min(r2.z);
        let (mut lo, mut hi) = if g(0.0) > 0.0 {
            let mut hi = y.norm() * self.max_radius() + 1.0;
            while g(hi) > 0.0 {
                hi *= 2.0;
            }
            (0.0, hi)
        } else {
            (-rmin2, 0.0)
        };
        // g is decreasing on (-rmin2, inf).
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = 0.5 * (lo + hi);
        let x = Vec3::new(r2.x * y.x / (r2.x + s), r2.y * y.y / (r2.y + s), r2.z * y.z / (r2.z + s));
        self.project_radial(self.center + x)
    }
}

/// A hit of a ray against the scene.
#[derive(Clone, Copy, Debug)]
pub struct Hit {
    pub point: SurfacePoint,
    pub travel: f64,
    pub tangency: bool,
}

/// Finite union of disjoint convex bodies inside the ball of radius `rho`,
/// with the reference ball of radius `a >= rho`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    bodies: Vec<Body>,
    rho: f64,
    a: f64,
    tangency_tol: f64,
}

impl Scene {
    pub fn new(bodies: Vec<Body>, rho: f64, a: f64) -> Result<Scene> {
        if bodies.is_empty() {
            return Err(Error::Validation("scene has no bodies".into()));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::Validation(format!("rho must be positive, got {rho}")));
        }
        if !(a.is_finite() && a >= rho) {
            return Err(Error::Validation(format!("reference radius a = {a} is smaller than rho = {rho}")));
        }
        for (i, b) in bodies.iter().enumerate() {
            if !bounded_by(b, rho) {
                return Err(Error::Validation(format!("body {i} is not contained in the ball of radius rho")));
            }
        }
        for i in 0..bodies.len() {
            for j in i + 1..bodies.len() {
                if body_gap(&bodies[i], &bodies[j]) <= 0.0 {
                    return Err(Error::Validation(format!("bodies overlap ({i} and {j})")));
                }
            }
        }
        Ok(Scene { bodies, rho, a, tangency_tol: TANGENCY_TOL })
    }

    pub fn with_tangency_tol(mut self, tol: f64) -> Scene {
        self.tangency_tol = tol;
        self
    }

    /// Same obstacle with another reference ball.
    pub fn with_reference_radius(&self, a: f64) -> Result<Scene> {
        Scene::new(self.bodies.clone(), self.rho, a).map(|s| s.with_tangency_tol(self.tangency_tol))
    }

    /// The obstacle scaled about the origin by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Scene> {
        let bodies = self.bodies.iter().map(|b| b.scaled(s)).collect();
        Scene::new(bodies, self.rho * s, self.a * s).map(|sc| sc.with_tangency_tol(self.tangency_tol))
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    pub fn body(&self, i: usize) -> &Body {
        &self.bodies[i]
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn tangency_tol(&self) -> f64 {
        self.tangency_tol
    }

    pub fn surface_point(&self, body: usize, x: Vec3) -> Result<SurfacePoint> {
        self.bodies
            .get(body)
            .ok_or_else(|| Error::InvalidArgument(format!("no body with index {body}")))?
            .surface_point(x, body)
    }

    /// Nearest boundary intersection along `x + t d`, `t > HIT_EPS`.
    pub fn first_hit(&self, x: Vec3, d: Vec3) -> Option<Hit> {
        self.first_hit_from(x, d, None)
    }

    /// As [`Scene::first_hit`], ignoring the convex body the ray is leaving.
    pub fn first_hit_from(&self, x: Vec3, d: Vec3, leaving: Option<usize>) -> Option<Hit> {
        let mut best: Option<(usize, f64)> = None;
        for (i, b) in self.bodies.iter().enumerate() {
            if Some(i) == leaving {
                continue;
            }
            if let Some((t0, t1)) = b.line_roots(x, d) {
                let t = if t0 > HIT_EPS {
                    t0
                } else if t1 > HIT_EPS && b.implicit_value(x) < 0.0 {
                    // Starting inside: only reachable for invalid input, report the exit.
                    t1
                } else {
                    continue;
                };
                if best.map_or(true, |(_, tb)| t < tb) {
                    best = Some((i, t));
                }
            }
        }
        best.map(|(i, t)| {
            let p = x + d * t;
            let point = self.bodies[i].surface_point_unchecked(p, i);
            let tangency = libm::fabs(d.dot(point.nu)) < self.tangency_tol;
            Hit { point, travel: t, tangency }
        })
    }

    /// Index of the body whose surface is closest (in implicit value) to `x`.
    pub fn nearest_body(&self, x: Vec3) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, b) in self.bodies.iter().enumerate() {
            let v = libm::fabs(b.implicit_value(x));
            if v < best.1 {
                best = (i, v);
            }
        }
        best.0
    }

    /// Parameter at which `x + t d` leaves the reference ball (0 if it never
    /// is inside ahead of `x`).
    pub fn exit_parameter(&self, x: Vec3, d: Vec3) -> f64 {
        let b = x.dot(d);
        let c = x.norm_squared() - self.a * self.a;
        let disc = b * b - c;
        if disc <= 0.0 {
            return 0.0;
        }
        libm::fmax(-b + libm::sqrt(disc), 0.0)
    }
}

fn bounded_by(b: &Body, rho: f64) -> bool {
    b.center().norm() + b.max_radius() <= rho * (1.0 + 1e-12)
}

/// Euclidean distance between two bodies; non-positive when they intersect.
pub fn body_gap(p: &Body, q: &Body) -> f64 {
    if let (Some(r1), Some(r2)) = (p.radius(), q.radius()) {
        return p.center().distance(q.center()) - r1 - r2;
    }
    let coarse = p.center().distance(q.center()) - p.max_radius() - q.max_radius();
    if coarse > 0.0 {
        return coarse;
    }
    // Alternating projections between the two convex bodies.
    let inside = |b: &Body, x: Vec3| b.implicit_value(x) <= 0.0;
    if inside(q, p.center()) || inside(p, q.center()) {
        return -1.0;
    }
    let mut x = p.closest_point(q.center());
    let mut y = q.closest_point(x);
    for _ in 0..2000 {
        if inside(q, x) || inside(p, y) {
            return -x.distance(y);
        }
        let nx = p.closest_point(y);
        let ny = q.closest_point(nx);
        let moved = nx.distance(x) + ny.distance(y);
        x = nx;
        y = ny;
        if moved < 1e-14 {
            break;
        }
    }
    x.distance(y)
}
