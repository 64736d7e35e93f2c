//! The shooting map from the incoming hyperplane to outgoing directions and
//! its Jacobian (the differential cross section).

use alloc::string::ToString;

use crate::billiard::{trace, PhasePoint, TraceStatus};
use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::rayfinder::ReflectingRay;
use crate::vector::{orthonormal_basis, Mat2, Vec3};

/// Default threshold on `|det dJ|` for non-degeneracy.
pub const NONDEGENERACY_TOL: f64 = 1e-8;
/// Default finite-difference step relative to the reference radius.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JacobianMethod {
    FiniteDifference,
    LinearizedMap,
}

/// Orthonormal frames on the incoming hyperplane and on the tangent plane of
/// the sphere at the outgoing direction. Both are right handed with respect
/// to their normals `omega` and `theta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frames {
    pub incoming: [Vec3; 2],
    pub outgoing: [Vec3; 2],
}

impl Frames {
    pub fn standard(omega: Vec3, theta: Vec3) -> Frames {
        let (e1, e2) = orthonormal_basis(omega);
        let (f1, f2) = orthonormal_basis(theta);
        Frames { incoming: [e1, e2], outgoing: [f1, f2] }
    }

    /// Both frames rotated about their normals.
    pub fn rotated(&self, incoming_angle: f64, outgoing_angle: f64) -> Frames {
        let rot = |f: [Vec3; 2], t: f64| {
            let (c, s) = (libm::cos(t), libm::sin(t));
            [f[0] * c + f[1] * s, f[1] * c - f[0] * s]
        };
        Frames { incoming: rot(self.incoming, incoming_angle), outgoing: rot(self.outgoing, outgoing_angle) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossSectionRecord {
    pub ray: ReflectingRay,
    /// Launch point of the ray in the incoming frame.
    pub u_gamma: [f64; 2],
    pub dj: Mat2,
    /// Determinant of `dj`; infinite when it overflows, see `log_abs_det`.
    pub det: f64,
    pub log_abs_det: f64,
    pub method: JacobianMethod,
    pub frames: Frames,
}

impl CrossSectionRecord {
    pub fn abs_det(&self) -> f64 {
        libm::exp(self.log_abs_det)
    }
}

/// Exit direction of the trajectory launched from the hyperplane point with
/// frame coordinates `u`, required to make exactly `m_expected` reflections.
pub fn shooting_map(scene: &Scene, omega: Vec3, u: [f64; 2], m_expected: usize) -> Result<Vec3> {
    let (e1, e2) = orthonormal_basis(omega);
    shoot(scene, omega, [e1, e2], u, m_expected)
}

fn shoot(scene: &Scene, omega: Vec3, frame: [Vec3; 2], u: [f64; 2], m_expected: usize) -> Result<Vec3> {
    let x = omega * (-scene.a()) + frame[0] * u[0] + frame[1] * u[1];
    let tr = trace(scene, PhasePoint::new(x, omega), m_expected + 64);
    match tr.status {
        TraceStatus::Tangency => Err(Error::TangencyEncountered(tr.hits.len() - 1)),
        TraceStatus::BudgetExhausted => Err(Error::WrongReflectionCount { expected: m_expected, found: tr.hits.len() }),
        TraceStatus::Escaped if tr.hits.len() != m_expected => {
            Err(Error::WrongReflectionCount { expected: m_expected, found: tr.hits.len() })
        }
        TraceStatus::Escaped => Ok(tr.final_direction()),
    }
}

fn launch_coordinates(ray: &ReflectingRay, frame: &[Vec3; 2]) -> [f64; 2] {
    [ray.points[0].dot(frame[0]), ray.points[0].dot(frame[1])]
}

fn record(ray: &ReflectingRay, frames: Frames, dj: Mat2, log_abs_det: f64, method: JacobianMethod) -> CrossSectionRecord {
    let det = dj.det();
    CrossSectionRecord { ray: ray.clone(), u_gamma: launch_coordinates(ray, &frames.incoming), dj, det, log_abs_det, method, frames }
}

/// Geometric growth bound of the linearized flow along the ray, used to
/// scale the finite-difference step for multi-bounce rays.
fn stretch(scene: &Scene, ray: &ReflectingRay) -> f64 {
    let d = ray.directions();
    let mut s = 1.0;
    for i in 1..ray.m() {
        let sp = scene.body(ray.body_indices[i - 1]).surface_point_unchecked(ray.points[i - 1], ray.body_indices[i - 1]);
        let curv = sp.shape.symmetric_eigenvalues()[1];
        let cos = libm::fabs(d[i].dot(sp.nu)).max(1e-3);
        s *= 1.0 + 2.0 * ray.points[i - 1].distance(ray.points[i]) * curv / cos;
    }
    s
}

/// Central-difference Jacobian of the shooting map. `h` is the step, relative
/// to the reference radius, for a single reflection; multi-bounce rays use a
/// step reduced by the growth bound of the flow. Differences at `h` and `h/2`
/// are combined by Richardson extrapolation and compared with the same
/// estimate at `h/2`, `h/4`; when their determinants differ by more than
/// `1e-6` relative the step is shrunk tenfold, up to three times, keeping the
/// most consistent estimate. Steps whose perturbed rays change their
/// reflection count are shrunk as well.
pub fn jacobian_fd(scene: &Scene, ray: &ReflectingRay, h: f64) -> Result<CrossSectionRecord> {
    jacobian_fd_in(scene, ray, h, Frames::standard(ray.omega, ray.theta))
}

pub fn jacobian_fd_in(scene: &Scene, ray: &ReflectingRay, h: f64, frames: Frames) -> Result<CrossSectionRecord> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".to_string()));
    }
    let u = launch_coordinates(ray, &frames.incoming);
    let m = ray.m();
    let central = |step: f64| -> Result<Mat2> {
        let mut cols = [[0.0; 2]; 2];
        for (j, col) in cols.iter_mut().enumerate() {
            let mut up = u;
            let mut dn = u;
            up[j] += step;
            dn[j] -= step;
            let tp = shoot(scene, ray.omega, frames.incoming, up, m)?;
            let tm = shoot(scene, ray.omega, frames.incoming, dn, m)?;
            let dt = (tp - tm) / (2.0 * step);
            *col = [dt.dot(frames.outgoing[0]), dt.dot(frames.outgoing[1])];
        }
        Ok(Mat2::new(cols[0][0], cols[1][0], cols[0][1], cols[1][1]))
    };
    let mut step = h * scene.a() / stretch(scene, ray);
    let mut best: Option<(f64, Mat2)> = None;
    let mut last_err = None;
    let mut consistent_tries = 0;
    // Steps that cross to another reflection sequence near grazing hits are
    // retried with a smaller step.
    for _ in 0..10 {
        let estimate = (|| -> Result<(Mat2, Mat2, Mat2)> { Ok((central(step)?, central(0.5 * step)?, central(0.25 * step)?)) })();
        let (coarse, d2, d4) = match estimate {
            Ok(v) => v,
            Err(e @ (Error::WrongReflectionCount { .. } | Error::TangencyEncountered(_))) => {
                last_err = Some(e);
                step *= 0.1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let r1 = d2.scale(4.0 / 3.0).sub(&coarse.scale(1.0 / 3.0));
        let r2 = d4.scale(4.0 / 3.0).sub(&d2.scale(1.0 / 3.0));
        let change = libm::fabs(r2.det() - r1.det()) / libm::fabs(r2.det()).max(f64::MIN_POSITIVE);
        if best.map_or(true, |(c, _)| change < c) {
            best = Some((change, r2));
        }
        consistent_tries += 1;
        if change < 1e-6 || consistent_tries == 4 {
            break;
        }
        step *= 0.1;
    }
    let Some((_, dj)) = best else {
        return Err(last_err.expect("a failed attempt"));
    };
    Ok(record(ray, frames, dj, libm::log(libm::fabs(dj.det())), JacobianMethod::FiniteDifference))
}

/// Jacobian of the shooting map by chaining the exact derivatives of the hit
/// equation and of the reflection law along the ray.
pub fn jacobian_linearized(scene: &Scene, ray: &ReflectingRay) -> Result<CrossSectionRecord> {
    jacobian_linearized_in(scene, ray, Frames::standard(ray.omega, ray.theta))
}

pub fn jacobian_linearized_in(scene: &Scene, ray: &ReflectingRay, frames: Frames) -> Result<CrossSectionRecord> {
    let dirs = ray.directions();
    let launch = ray.launch_point(scene.a());
    let mut cols = [[0.0; 2]; 2];
    let mut logs = [0.0; 2];
    for j in 0..2 {
        let mut dx = frames.incoming[j];
        let mut dd = Vec3::ZERO;
        let mut x = launch;
        for (i, (&p, &b)) in ray.points.iter().zip(&ray.body_indices).enumerate() {
            let d = dirs[i];
            let t = (p - x).dot(d);
            let iv = scene.body(b).implicit_eval(p);
            let gn = iv.gradient.norm();
            let nu = iv.gradient / gn;
            let dn = iv.gradient.dot(d);
            if libm::fabs(dn) < scene.tangency_tol() * gn {
                return Err(Error::SingularHit(i));
            }
            let w = dx + dd * t;
            let dt = -iv.gradient.dot(w) / dn;
            let dp = w + d * dt;
            let hdp = iv.hessian.mul_vec(dp) / gn;
            let dnu = hdp - nu * hdp.dot(nu);
            let cos = d.dot(nu);
            dd = dd - nu * (2.0 * (dd.dot(nu) + d.dot(dnu))) - dnu * (2.0 * cos);
            dx = dp;
            x = p;
            // Keep the variation representable along very long rays.
            let size = dx.max_abs().max(dd.max_abs());
            if size > 1e64 {
                dx = dx / size;
                dd = dd / size;
                logs[j] += libm::log(size);
            }
        }
        let v = [dd.dot(frames.outgoing[0]), dd.dot(frames.outgoing[1])];
        let n = libm::sqrt(v[0] * v[0] + v[1] * v[1]);
        cols[j] = [v[0] / n, v[1] / n];
        logs[j] += libm::log(n);
    }
    let unit = Mat2::new(cols[0][0], cols[1][0], cols[0][1], cols[1][1]);
    let log_abs_det = logs[0] + logs[1] + libm::log(libm::fabs(unit.det()));
    let s0 = libm::exp(logs[0]);
    let s1 = libm::exp(logs[1]);
    let dj = Mat2::new(unit.0[0][0] * s0, unit.0[0][1] * s1, unit.0[1][0] * s0, unit.0[1][1] * s1);
    let mut rec = record(ray, frames, dj, log_abs_det, JacobianMethod::LinearizedMap);
    if !rec.det.is_finite() {
        rec.det = libm::copysign(f64::INFINITY, unit.det());
    }
    Ok(rec)
}

/// `4 K(x_+)`, the closed form of `|det dJ|` for a single reflection off a
/// single convex body in three dimensions.
pub fn majda_det(scene: &Scene, ray: &ReflectingRay) -> Result<f64> {
    if scene.bodies().len() != 1 {
        return Err(Error::NotApplicable("scene has more than one body".to_string()));
    }
    if ray.m() != 1 {
        return Err(Error::NotApplicable("ray has more than one reflection".to_string()));
    }
    Ok(4.0 * scene.body(0).surface_point_unchecked(ray.points[0], 0).gauss_curvature())
}

pub fn is_nondegenerate(record: &CrossSectionRecord, tol: f64) -> bool {
    libm::fabs(record.det) > tol
}
