//! Reflecting rays with prescribed incoming and outgoing directions, found as
//! critical points of the broken-path length on products of the boundary.

use alloc::vec;
use alloc::vec::Vec;

use crate::billiard::{reflect, trace, PhasePoint, TraceStatus};
use crate::error::{Error, Result};
use crate::geometry::{Scene, SurfacePoint};
use crate::linalg::BlockTridiagonal;
use crate::vector::{orthonormal_basis, Mat2, Vec3};

/// Newton iteration cap.
pub const MAX_ITERATIONS: usize = 100;
/// Default convergence tolerance on the tangential gradient.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Rays whose reflection points differ by less than this are merged.
pub const MERGE_TOL: f64 = 1e-6;

/// An ordinary reflecting ray: incoming direction `omega`, outgoing direction
/// `theta`, transversal reflections at `points`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectingRay {
    pub omega: Vec3,
    pub theta: Vec3,
    pub points: Vec<Vec3>,
    pub body_indices: Vec<usize>,
    /// Sojourn time, the broken-path length functional at the critical point.
    pub sojourn: f64,
    /// Largest reflection-law defect `|d_i - reflect(d_{i-1}, nu_i)|`.
    pub residual: f64,
}

impl ReflectingRay {
    /// Number of reflections.
    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn surface_points(&self, scene: &Scene) -> Vec<SurfacePoint> {
        self.points
            .iter()
            .zip(&self.body_indices)
            .map(|(x, &b)| scene.body(b).surface_point_unchecked(*x, b))
            .collect()
    }

    /// Directions `d_0 = omega, d_1, .., d_m = theta` of the segments.
    pub fn directions(&self) -> Vec<Vec3> {
        directions(self.omega, self.theta, &self.points).expect("refined rays have distinct points")
    }

    /// Foot of the incoming line on the hyperplane `<x, omega> = -a`.
    pub fn launch_point(&self, a: f64) -> Vec3 {
        let x1 = self.points[0];
        x1 - self.omega * (x1.dot(self.omega) + a)
    }

    /// Coordinates of [`ReflectingRay::launch_point`] in the frame
    /// `orthonormal_basis(omega)`.
    pub fn launch_coordinates(&self) -> [f64; 2] {
        let (e1, e2) = orthonormal_basis(self.omega);
        [self.points[0].dot(e1), self.points[0].dot(e2)]
    }
}

fn directions(omega: Vec3, theta: Vec3, points: &[Vec3]) -> Result<Vec<Vec3>> {
    let mut d = Vec::with_capacity(points.len() + 1);
    d.push(omega);
    for i in 0..points.len().saturating_sub(1) {
        let v = points[i + 1] - points[i];
        let l = v.norm();
        if l <= 1e-14 * (1.0 + points[i].norm()) {
            return Err(Error::DegenerateSegment(i, i + 1));
        }
        d.push(v / l);
    }
    d.push(theta);
    Ok(d)
}

/// `<x_1, omega> + sum |x_i - x_{i+1}| - <x_m, theta>`.
pub fn fermat_value(omega: Vec3, theta: Vec3, points: &[Vec3]) -> Result<f64> {
    let (first, last) = match (points.first(), points.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::InvalidArgument("no reflection points".into())),
    };
    let mut t = first.dot(omega);
    for i in 0..points.len() - 1 {
        let l = points[i].distance(points[i + 1]);
        if l <= 1e-14 * (1.0 + points[i].norm()) {
            return Err(Error::DegenerateSegment(i, i + 1));
        }
        t += l;
    }
    Ok(t - last.dot(theta))
}

/// Tangential gradient of [`fermat_value`] with respect to each reflection
/// point; `bodies[i]` is the body carrying `points[i]`.
pub fn fermat_gradient(
    scene: &Scene,
    omega: Vec3,
    theta: Vec3,
    points: &[Vec3],
    bodies: &[usize],
) -> Result<Vec<Vec3>> {
    if points.len() != bodies.len() || points.is_empty() {
        return Err(Error::InvalidArgument("points and body indices must be nonempty and match".into()));
    }
    let d = directions(omega, theta, points)?;
    let mut out = Vec::with_capacity(points.len());
    for (i, (&x, &b)) in points.iter().zip(bodies).enumerate() {
        let nu = scene.surface_point(b, x)?.nu;
        let g = d[i] - d[i + 1];
        out.push(g - nu * g.dot(nu));
    }
    Ok(out)
}

struct Linearization {
    sp: Vec<SurfacePoint>,
    d: Vec<Vec3>,
    lengths: Vec<f64>,
    grad: Vec<[f64; 2]>,
}

impl Linearization {
    fn new(scene: &Scene, omega: Vec3, theta: Vec3, points: &[Vec3], bodies: &[usize]) -> Result<Self> {
        let sp: Vec<SurfacePoint> =
            points.iter().zip(bodies).map(|(x, &b)| scene.body(b).surface_point_unchecked(*x, b)).collect();
        let d = directions(omega, theta, points)?;
        let lengths = (0..points.len().saturating_sub(1)).map(|i| points[i].distance(points[i + 1])).collect();
        let grad = sp
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let g = d[i] - d[i + 1];
                [g.dot(p.tangents[0]), g.dot(p.tangents[1])]
            })
            .collect();
        Ok(Linearization { sp, d, lengths, grad })
    }

    fn merit(&self) -> f64 {
        self.grad.iter().map(|g| g[0] * g[0] + g[1] * g[1]).sum()
    }

    fn max_grad(&self) -> f64 {
        self.grad.iter().map(|g| libm::sqrt(g[0] * g[0] + g[1] * g[1])).fold(0.0, f64::max)
    }

    /// Hessian of the length functional in the tangent charts.
    fn hessian(&self) -> BlockTridiagonal {
        let m = self.sp.len();
        let mut h = BlockTridiagonal::new(m);
        let proj_form = |d: Vec3, a: Vec3, b: Vec3| a.dot(b) - a.dot(d) * b.dot(d);
        for i in 0..m {
            let t = &self.sp[i].tangents;
            let g = self.d[i] - self.d[i + 1];
            let mut blk = self.sp[i].shape.scale(-g.dot(self.sp[i].nu));
            // Chord `l` joins points l and l+1 and has direction d[l+1].
            for l in [i.wrapping_sub(1), i] {
                if l >= m - 1 {
                    continue;
                }
                let dl = self.d[l + 1];
                let inv = 1.0 / self.lengths[l];
                let e = Mat2::new(
                    proj_form(dl, t[0], t[0]) * inv,
                    proj_form(dl, t[0], t[1]) * inv,
                    proj_form(dl, t[1], t[0]) * inv,
                    proj_form(dl, t[1], t[1]) * inv,
                );
                blk = blk.add(&e);
            }
            h.diag[i] = blk;
            if i + 1 < m {
                let s = &self.sp[i + 1].tangents;
                let dl = self.d[i + 1];
                let inv = -1.0 / self.lengths[i];
                h.upper[i] = Mat2::new(
                    proj_form(dl, t[0], s[0]) * inv,
                    proj_form(dl, t[0], s[1]) * inv,
                    proj_form(dl, t[1], s[0]) * inv,
                    proj_form(dl, t[1], s[1]) * inv,
                );
            }
        }
        h
    }
}

/// Tangential Hessian of the length functional at the reflection points of
/// `ray`, in the tangent frames of [`ReflectingRay::surface_points`].
pub fn fermat_hessian(scene: &Scene, ray: &ReflectingRay) -> Result<BlockTridiagonal> {
    Ok(Linearization::new(scene, ray.omega, ray.theta, &ray.points, &ray.body_indices)?.hessian())
}

fn check_directions(omega: Vec3, theta: Vec3) -> Result<()> {
    if (theta - omega).norm() < 1e-12 {
        return Err(Error::ThetaEqualsOmega);
    }
    Ok(())
}

/// Refine approximate reflection points to an ordinary reflecting ray.
/// Each initial point is assigned to the nearest body and projected onto it.
pub fn refine_ray(scene: &Scene, omega: Vec3, theta: Vec3, initial_points: &[Vec3], tol: f64) -> Result<ReflectingRay> {
    let bodies: Vec<usize> = initial_points.iter().map(|p| scene.nearest_body(*p)).collect();
    refine_ray_on(scene, omega, theta, &bodies, initial_points, tol)
}

/// As [`refine_ray`] with an explicit body sequence.
pub fn refine_ray_on(
    scene: &Scene,
    omega: Vec3,
    theta: Vec3,
    bodies: &[usize],
    initial_points: &[Vec3],
    tol: f64,
) -> Result<ReflectingRay> {
    check_directions(omega, theta)?;
    if initial_points.is_empty() || bodies.len() != initial_points.len() {
        return Err(Error::InvalidArgument("need one body index per initial point".into()));
    }
    if bodies.iter().any(|&b| b >= scene.bodies().len()) {
        return Err(Error::InvalidArgument("body index out of range".into()));
    }
    let omega = omega.normalized();
    let theta = theta.normalized();
    let mut x: Vec<Vec3> = initial_points.iter().zip(bodies).map(|(p, &b)| scene.body(b).closest_point(*p)).collect();
    let m = x.len();
    let mut lin = Linearization::new(scene, omega, theta, &x, bodies)?;
    let mut phi = lin.merit();
    let mut iterations = 0;
    while lin.max_grad() > tol {
        if iterations == MAX_ITERATIONS {
            return Err(Error::NoConvergence { iterations, residual: lin.max_grad() });
        }
        iterations += 1;
        let rhs: Vec<[f64; 2]> = lin.grad.iter().map(|g| [-g[0], -g[1]]).collect();
        let mut step = lin.hessian().solve(&rhs).unwrap_or(rhs);
        for (i, s) in step.iter_mut().enumerate() {
            let cap = 0.5 * scene.body(bodies[i]).radii().x.min(scene.body(bodies[i]).radii().y).min(scene.body(bodies[i]).radii().z);
            let n = libm::sqrt(s[0] * s[0] + s[1] * s[1]);
            if n > cap {
                s[0] *= cap / n;
                s[1] *= cap / n;
            }
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<Vec3> = (0..m)
                .map(|i| {
                    let sp = &lin.sp[i];
                    let moved = x[i] + (sp.tangents[0] * step[i][0] + sp.tangents[1] * step[i][1]) * alpha;
                    scene.body(bodies[i]).project_along(moved, sp.nu)
                })
                .collect();
            if let Ok(l) = Linearization::new(scene, omega, theta, &trial, bodies) {
                let p = l.merit();
                if p <= (1.0 - 1e-4 * alpha) * phi {
                    accepted = Some((trial, l, p));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((t, l, p)) => {
                x = t;
                lin = l;
                phi = p;
            }
            None => {
                if lin.max_grad() < 1e-9 * 1e-2 {
                    break;
                }
                return Err(Error::NoConvergence { iterations, residual: lin.max_grad() });
            }
        }
    }
    validate(scene, omega, theta, &x, bodies, &lin)?;
    let residual = (0..m)
        .map(|i| (lin.d[i + 1] - reflect(lin.d[i], lin.sp[i].nu)).norm())
        .fold(0.0, f64::max);
    Ok(ReflectingRay {
        omega,
        theta,
        sojourn: fermat_value(omega, theta, &x)?,
        points: x,
        body_indices: bodies.to_vec(),
        residual,
    })
}

/// Segment `k` is the incoming line for `k = 0`, the chord from point `k - 1`
/// to point `k` for `0 < k < m`, and the outgoing line for `k = m`.
fn validate(scene: &Scene, omega: Vec3, theta: Vec3, x: &[Vec3], bodies: &[usize], lin: &Linearization) -> Result<()> {
    let m = x.len();
    let tol = scene.tangency_tol();
    for i in 0..m {
        let cin = lin.d[i].dot(lin.sp[i].nu);
        let cout = lin.d[i + 1].dot(lin.sp[i].nu);
        if libm::fabs(cin) < tol || libm::fabs(cout) < tol {
            return Err(Error::TangentRay { segment: if libm::fabs(cin) < tol { i } else { i + 1 } });
        }
        // The ray must arrive from outside and leave outwards.
        if cin > 0.0 {
            return Err(Error::ObstructedPath { segment: i });
        }
        if cout < 0.0 {
            return Err(Error::ObstructedPath { segment: i + 1 });
        }
    }
    if scene.first_hit_from(x[0], -omega, Some(bodies[0])).is_some() {
        return Err(Error::ObstructedPath { segment: 0 });
    }
    for i in 0..m - 1 {
        let len = lin.lengths[i];
        match scene.first_hit_from(x[i], lin.d[i + 1], Some(bodies[i])) {
            Some(h) if h.point.body_index == bodies[i + 1] && libm::fabs(h.travel - len) <= 1e-8 * (1.0 + len) => {}
            _ => return Err(Error::ObstructedPath { segment: i + 1 }),
        }
    }
    if scene.first_hit_from(x[m - 1], theta, Some(bodies[m - 1])).is_some() {
        return Err(Error::ObstructedPath { segment: m });
    }
    Ok(())
}

/// Sojourn time from the distances to the hyperplanes `<x, omega> = -a` and
/// `<x, theta> = a`, with `a` the scene's reference radius.
pub fn sojourn_hyperplane(scene: &Scene, ray: &ReflectingRay) -> f64 {
    let a = scene.a();
    let first = ray.points[0];
    let last = ray.points[ray.m() - 1];
    let mut t = first.dot(ray.omega) + a;
    for w in ray.points.windows(2) {
        t += w[0].distance(w[1]);
    }
    t += a - last.dot(ray.theta);
    t - 2.0 * a
}

/// Outcome of a ray search with coverage statistics.
#[derive(Clone, Debug, Default)]
pub struct RaySearch {
    pub rays: Vec<ReflectingRay>,
    /// Number of seeds handed to the Newton refinement.
    pub seeds: usize,
    /// Seeds whose refinement failed or produced an obstructed or grazing ray.
    pub discarded: usize,
    /// Seeds that converged to an already known ray.
    pub duplicates: usize,
}

/// Every ordinary reflecting `(omega, theta)`-ray with at most `m_max`
/// reflections that the seeding finds, sorted by sojourn time.
pub fn find_rays(scene: &Scene, omega: Vec3, theta: Vec3, m_max: usize, grid_density: usize) -> Result<Vec<ReflectingRay>> {
    Ok(search_rays(scene, omega, theta, m_max, grid_density)?.rays)
}

/// Seeds from a shooting grid on the incoming hyperplane and from body
/// sequences, refined and merged.
pub fn search_rays(scene: &Scene, omega: Vec3, theta: Vec3, m_max: usize, grid_density: usize) -> Result<RaySearch> {
    check_directions(omega, theta)?;
    let omega = omega.normalized();
    let theta = theta.normalized();
    let mut out = RaySearch::default();
    if m_max == 0 {
        return Ok(out);
    }
    let mut seeds: Vec<(Vec<usize>, Vec<Vec3>)> = Vec::new();
    seeds.extend(sequence_seeds(scene, omega, theta, m_max));
    seeds.extend(shooting_seeds(scene, omega, theta, m_max, grid_density));
    for (bodies, pts) in seeds {
        out.seeds += 1;
        match refine_ray_on(scene, omega, theta, &bodies, &pts, DEFAULT_TOL * 10.0) {
            Ok(ray) if ray.residual < 1e-9 => {
                if out.rays.iter().any(|r| same_ray(r, &ray)) {
                    out.duplicates += 1;
                } else {
                    out.rays.push(ray);
                }
            }
            _ => out.discarded += 1,
        }
    }
    out.rays.sort_by(|a, b| a.sojourn.total_cmp(&b.sojourn));
    Ok(out)
}

fn same_ray(a: &ReflectingRay, b: &ReflectingRay) -> bool {
    a.body_indices == b.body_indices && a.points.iter().zip(&b.points).all(|(p, q)| p.distance(*q) < MERGE_TOL)
}

const MAX_SEQUENCE_SEEDS: usize = 20_000;

/// One seed per admissible body sequence: each point sits where the normal
/// bisects the directions towards its neighbours (body centres, or the
/// asymptotic directions at the ends).
fn sequence_seeds(scene: &Scene, omega: Vec3, theta: Vec3, m_max: usize) -> Vec<(Vec<usize>, Vec<Vec3>)> {
    let n = scene.bodies().len();
    let mut out = Vec::new();
    let mut seq: Vec<usize> = Vec::new();
    fn rec(
        scene: &Scene,
        omega: Vec3,
        theta: Vec3,
        n: usize,
        m_max: usize,
        seq: &mut Vec<usize>,
        out: &mut Vec<(Vec<usize>, Vec<Vec3>)>,
    ) {
        if out.len() >= MAX_SEQUENCE_SEEDS {
            return;
        }
        if !seq.is_empty() {
            if let Some(p) = bisector_points(scene, omega, theta, seq) {
                out.push((seq.clone(), p));
            }
        }
        if seq.len() == m_max {
            return;
        }
        for b in 0..n {
            if seq.last() == Some(&b) {
                continue;
            }
            seq.push(b);
            rec(scene, omega, theta, n, m_max, seq, out);
            seq.pop();
        }
    }
    rec(scene, omega, theta, n, m_max, &mut seq, &mut out);
    out
}

fn bisector_points(scene: &Scene, omega: Vec3, theta: Vec3, seq: &[usize]) -> Option<Vec<Vec3>> {
    let c: Vec<Vec3> = seq.iter().map(|&b| scene.body(b).center()).collect();
    let m = seq.len();
    let mut pts = Vec::with_capacity(m);
    for i in 0..m {
        let prev = if i == 0 { -omega } else { (c[i - 1] - c[i]).normalized() };
        let next = if i + 1 == m { theta } else { (c[i + 1] - c[i]).normalized() };
        let n = prev + next;
        if n.norm() < 1e-6 {
            return None;
        }
        pts.push(scene.body(seq[i]).point_with_normal(n.normalized()));
    }
    Some(pts)
}

/// Best few grid launches per body sequence, ranked by the exit-direction error.
fn shooting_seeds(scene: &Scene, omega: Vec3, theta: Vec3, m_max: usize, density: usize) -> Vec<(Vec<usize>, Vec<Vec3>)> {
    const PER_SEQUENCE: usize = 4;
    if density == 0 {
        return Vec::new();
    }
    let (e1, e2) = orthonormal_basis(omega);
    let r = scene.rho();
    let mut found: Vec<(Vec<usize>, Vec<(f64, Vec<Vec3>)>)> = Vec::new();
    for i in 0..density {
        for j in 0..density {
            let s1 = -r + (2.0 * i as f64 + 1.0) * r / density as f64;
            let s2 = -r + (2.0 * j as f64 + 1.0) * r / density as f64;
            if s1 * s1 + s2 * s2 > r * r {
                continue;
            }
            let u = omega * (-scene.a()) + e1 * s1 + e2 * s2;
            let tr = trace(scene, PhasePoint::new(u, omega), m_max);
            if tr.status != TraceStatus::Escaped || tr.hits.is_empty() {
                continue;
            }
            let err = (tr.final_direction() - theta).norm();
            let seq: Vec<usize> = tr.hits.iter().map(|h| h.body_index).collect();
            let pts: Vec<Vec3> = tr.hits.iter().map(|h| h.x).collect();
            match found.iter_mut().find(|(s, _)| *s == seq) {
                Some((_, list)) => list.push((err, pts)),
                None => found.push((seq, vec![(err, pts)])),
            }
        }
    }
    let mut out = Vec::new();
    for (seq, mut list) in found {
        list.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, pts) in list.into_iter().take(PER_SEQUENCE) {
            out.push((seq.clone(), pts));
        }
    }
    out
}
