//! Trapping: escape-time scans of the reference sphere, the bisection towards
//! the boundary of the trapped set, the reflecting rays it produces, and a
//! Monte Carlo estimate of the weak non-degeneracy measure.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::PI;

use dashu_float::ops::SquareRoot;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::billiard::precise::{real, PVec3, PrecisePhasePoint, PreciseScene, Real};
use crate::billiard::{escape_time, trace, PhasePoint, TraceStatus};
use crate::crosssection::jacobian_linearized;
use crate::error::{Error, Result};
use crate::geometry::{BodyKind, Scene};
use crate::rayfinder::{refine_ray_on, ReflectingRay};
use crate::vector::{orthonormal_basis, rotate, Mat2, Vec3};

/// Golden angle used by the Fibonacci lattices.
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

#[derive(Clone, Debug, PartialEq)]
pub struct EscapeSample {
    pub z: PhasePoint,
    pub time: f64,
    pub censored: bool,
    /// Evaluated with the arbitrary-precision flow.
    pub precise: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EscapeField {
    pub samples: Vec<EscapeSample>,
    pub budget: f64,
}

impl EscapeField {
    pub fn censored_count(&self) -> usize {
        self.samples.iter().filter(|s| s.censored).count()
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored_count() as f64 / self.samples.len().max(1) as f64
    }
}

/// Quasi-uniform points on the unit sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
            let r = libm::sqrt((1.0 - z * z).max(0.0));
            let phi = k as f64 * GOLDEN_ANGLE;
            Vec3::new(r * libm::cos(phi), r * libm::sin(phi), z)
        })
        .collect()
}

/// Quasi-uniform unit vectors `v` with `<v, axis> > 0`.
pub fn fibonacci_hemisphere(axis: Vec3, n: usize) -> Vec<Vec3> {
    let (b1, b2) = orthonormal_basis(axis);
    (0..n)
        .map(|k| {
            let c = (k as f64 + 0.5) / n as f64;
            let s = libm::sqrt(1.0 - c * c);
            let phi = k as f64 * GOLDEN_ANGLE;
            axis * c + b1 * (s * libm::cos(phi)) + b2 * (s * libm::sin(phi))
        })
        .collect()
}

/// Escape times over `density` positions on the reference sphere times
/// `density` inward directions at each of them.
pub fn escape_scan(scene: &Scene, direction_grid_density: usize, budget: f64) -> EscapeField {
    escape_scan_with_seeds(scene, direction_grid_density, budget, &[])
}

/// As [`escape_scan`], with additional phase points evaluated by the
/// arbitrary-precision flow at their own precision.
pub fn escape_scan_with_seeds(scene: &Scene, density: usize, budget: f64, seeds: &[PrecisePhasePoint]) -> EscapeField {
    let a = scene.a();
    let mut samples = Vec::with_capacity(density * density + seeds.len());
    for p in fibonacci_sphere(density) {
        let x = p * a;
        for xi in fibonacci_hemisphere(-p, density) {
            let z = PhasePoint::new(x, xi);
            let e = escape_time(scene, z, budget);
            samples.push(EscapeSample { z, time: e.time, censored: e.censored, precise: false });
        }
    }
    for seed in seeds {
        let ps = PreciseScene::new(scene, seed.precision());
        let e = ps.escape_time(seed, budget);
        samples.push(EscapeSample { z: seed.to_phase_point(), time: e.time, censored: e.censored, precise: true });
    }
    EscapeField { samples, budget }
}

/// Working precision adequate for escape times up to `max_time` near a
/// bouncing-ball orbit of two unit spheres at distance four.
pub fn precision_for(max_time: f64) -> usize {
    (1.7 * max_time) as usize + 64
}

/// A phase point on the reference sphere whose forward orbit converges to the
/// bouncing-ball orbit between spheres `i` and `j`. It is built at `precision`
/// bits by starting slightly off the orbit along its stable direction and
/// running the flow backwards until it leaves the reference ball.
pub fn bouncing_ball_seed(scene: &Scene, i: usize, j: usize, precision: usize) -> Result<PrecisePhasePoint> {
    let n = scene.bodies().len();
    if i >= n || j >= n || i == j {
        return Err(Error::InvalidArgument("need two distinct body indices".to_string()));
    }
    let (bi, bj) = (scene.body(i), scene.body(j));
    if bi.kind() != BodyKind::Sphere || bj.kind() != BodyKind::Sphere {
        return Err(Error::NotApplicable("bouncing-ball seeds are built for spheres only".to_string()));
    }
    let (ri, rj) = (real(bi.radii().x, precision), real(bj.radii().x, precision));
    let ci = PVec3::from_vec3(bi.center(), precision);
    let cj = PVec3::from_vec3(bj.center(), precision);
    let axis = cj.sub(&ci);
    let dist = axis.norm();
    let e = axis.normalized();
    let gap = &dist - &ri - &rj;
    let two = real(2.0, precision);
    let half = &gap / &two;
    // Midpoint of the free segment of the orbit.
    let mid = ci.add(&e.scale(&(&ri + &half)));
    // Transverse unit vector, orthogonalized at full precision.
    let (t0, _) = orthonormal_basis(e.to_vec3());
    let t = PVec3::from_vec3(t0, precision);
    let t = t.sub(&e.scale(&t.dot(&e))).normalized();
    // Paraxial return map (offset, slope) over one period from the midpoint:
    // drift, reflection at j, drift, reflection at i, drift.
    let one = real(1.0, precision);
    let zero = real(0.0, precision);
    let drift = |l: &Real| [[one.clone(), l.clone()], [zero.clone(), one.clone()]];
    let mirror = |r: &Real| [[one.clone(), zero.clone()], [&two / r, one.clone()]];
    let mul = |a: &[[Real; 2]; 2], b: &[[Real; 2]; 2]| {
        let mut c = [[zero.clone(), zero.clone()], [zero.clone(), zero.clone()]];
        for r in 0..2 {
            for k in 0..2 {
                c[r][k] = &a[r][0] * &b[0][k] + &a[r][1] * &b[1][k];
            }
        }
        c
    };
    let mut m = drift(&half);
    m = mul(&mirror(&rj), &m);
    m = mul(&drift(&gap), &m);
    m = mul(&mirror(&ri), &m);
    m = mul(&drift(&half), &m);
    let tr = &m[0][0] + &m[1][1];
    let disc = &tr * &tr - real(4.0, precision);
    let stable = (&tr - disc.sqrt()) / &two;
    // (m00 - s) q + m01 p = 0.
    let slope = (&stable - &m[0][0]) / &m[0][1];
    let eps = Real::from_parts(1.into(), -((precision / 2) as isize)).with_precision(precision).value();
    let x = mid.add(&t.scale(&eps));
    let xi = e.add(&t.scale(&(&eps * &slope))).normalized();
    let ps = PreciseScene::new(scene, precision);
    let back = ps.trace(&PrecisePhasePoint { x, xi: xi.neg() }, 1e6, false);
    match back.exit {
        Some(exit) => Ok(exit.reversed()),
        None => Err(Error::RefinementFailed("backward orbit did not leave the reference ball".to_string())),
    }
}

/// A nearby non-trapped phase point: `z` rotated by `angle` within the plane
/// through the origin spanned by its position and direction.
pub fn in_plane_free_seed(z: &PhasePoint, angle: f64) -> PhasePoint {
    rotated_phase_point(z, z.x.cross(z.xi).normalized(), angle)
}

/// The in-plane rotation of `z` by the smallest angle in steps of `step`
/// (either sign, up to a quarter turn) whose escape time is below `budget`.
pub fn free_seed(scene: &Scene, z: &PhasePoint, budget: f64, step: f64) -> Result<PhasePoint> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("angle step must be positive".to_string()));
    }
    let mut k = 1;
    while k as f64 * step <= 0.5 * PI {
        for sign in [1.0, -1.0] {
            let cand = in_plane_free_seed(z, sign * k as f64 * step);
            let e = escape_time(scene, cand, budget);
            if !e.censored && e.time < budget {
                return Ok(cand);
            }
        }
        k += 1;
    }
    Err(Error::SeedNotFree(budget))
}

/// The phase point rotated about `axis` (through the origin) by `angle`; stays
/// on the reference sphere.
pub fn rotated_phase_point(z: &PhasePoint, axis: Vec3, angle: f64) -> PhasePoint {
    PhasePoint::new(rotate(z.x, axis, angle), rotate(z.xi, axis, angle))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageReport {
    pub budget: f64,
    /// Escape time of the selected initial condition, in `[budget, 2 budget)`.
    pub escape_time: f64,
    pub reflections: usize,
    pub bisection_steps: usize,
    /// `log2` of the bracket width on the chord when the stage bisection ended.
    pub bracket_log2: f64,
    /// The exit direction matches the alignment reference.
    pub exit_aligned: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrappedApproxSequence {
    pub rays: Vec<ReflectingRay>,
    /// `(omega, theta)` of every ray.
    pub directions: Vec<(Vec3, Vec3)>,
    /// Successive sojourn differences.
    pub gaps: Vec<f64>,
    /// Successive sojourn differences divided by the difference in reflection counts.
    pub per_reflection_gaps: Vec<f64>,
    pub stages: Vec<StageReport>,
    /// Budgets for which no ray was produced, with the reason.
    pub failures: Vec<(f64, Error)>,
}

impl TrappedApproxSequence {
    fn from_rays(rays: Vec<ReflectingRay>, stages: Vec<StageReport>, failures: Vec<(f64, Error)>) -> Self {
        let directions = rays.iter().map(|r| (r.omega, r.theta)).collect();
        let gaps: Vec<f64> = rays.windows(2).map(|w| w[1].sojourn - w[0].sojourn).collect();
        let per_reflection_gaps = rays
            .windows(2)
            .zip(&gaps)
            .map(|(w, g)| g / (w[1].m() as f64 - w[0].m() as f64))
            .collect();
        TrappedApproxSequence { rays, directions, gaps, per_reflection_gaps, stages, failures }
    }
}

/// Tolerance on the tangential gradient when refining extracted rays.
const EXTRACT_TOL: f64 = 1e-11;

/// How the initial condition is chosen among those with escape time in the
/// stage window `[B, 2B)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExitAlignment {
    /// The first point the bisection lands on.
    Natural,
    /// A point whose exit direction has the same angle in the plane of the
    /// trapped seed's motion as the given direction.
    Reference(Vec3),
    /// As `Reference`, with the natural exit direction of the given stage
    /// (index into the budgets) as the reference.
    FromStage(usize),
}

/// Bisection along the chord of initial conditions from `z_free` to
/// `z_trapped`: for every budget `B` a point with escape time in `[B, 2B)` is
/// located and its trajectory refined into a reflecting ray with the
/// trajectory's incoming and exit directions. Budgets must increase; the free
/// end of each stage is the point selected in the previous one. Within each
/// window the point whose exit direction matches that of the second stage is
/// preferred, so that successive rays differ only by additional windings
/// around the trapped orbit.
pub fn boundary_bisection(
    scene: &Scene,
    z_trapped: &PrecisePhasePoint,
    z_free: &PhasePoint,
    budgets: &[f64],
) -> Result<TrappedApproxSequence> {
    boundary_bisection_with(scene, z_trapped, z_free, budgets, ExitAlignment::FromStage(1))
}

struct Chord<'a> {
    ps: &'a PreciseScene,
    a: Real,
    free: PrecisePhasePoint,
    trapped: &'a PrecisePhasePoint,
    plane: [Vec3; 2],
}

impl Chord<'_> {
    fn point(&self, s: &Real) -> PrecisePhasePoint {
        let x = self.free.x.add(&self.trapped.x.sub(&self.free.x).scale(s)).normalized().scale(&self.a);
        let xi = self.free.xi.add(&self.trapped.xi.sub(&self.free.xi).scale(s)).normalized();
        PrecisePhasePoint { x, xi }
    }

    fn angle(&self, v: Vec3) -> f64 {
        libm::atan2(v.dot(self.plane[1]), v.dot(self.plane[0]))
    }

    /// Escape time and exit angle relative to the reference, or `None` if
    /// censored or if the last reflection is not off the reference body.
    fn exit(&self, s: &Real, budget: f64, reference: (f64, Option<usize>)) -> Option<(f64, f64)> {
        let (phi_ref, body) = reference;
        let tr = self.ps.trace(&self.point(s), 2.0 * budget, false);
        if body.is_some() && tr.last_body != body {
            return None;
        }
        let exit = tr.exit?;
        let mut g = self.angle(exit.xi.to_vec3()) - phi_ref;
        while g > PI {
            g -= 2.0 * PI;
        }
        while g <= -PI {
            g += 2.0 * PI;
        }
        Some((tr.path_length, g))
    }

    /// A chord parameter with escape time in `[budget, 2 budget)` and exit
    /// angle `phi_ref`, searched from `start` in logarithmic steps towards
    /// and away from `trap_end`.
    fn align(&self, start: &Real, trap_end: &Real, budget: f64, reference: (f64, Option<usize>)) -> Option<Real> {
        const STEP: f64 = 0.25;
        const SPAN: f64 = 12.0;
        let precision = self.ps.precision();
        let d = trap_end - start;
        let at = |tau: f64| trap_end - &d * &real(libm::exp2(-tau), precision);
        let in_window = |t: f64| t >= budget && t < 2.0 * budget;
        for dir in [1.0, -1.0] {
            let mut prev: Option<(Real, f64)> = None;
            let mut tau = 0.0;
            while libm::fabs(tau) <= SPAN {
                let s = at(tau);
                let tr = self.ps.trace(&self.point(&s), 2.0 * budget, false);
                if tr.censored || !in_window(tr.path_length) {
                    break;
                }
                let Some((_, g)) = self.exit(&s, budget, reference) else {
                    prev = None;
                    tau += dir * STEP;
                    continue;
                };
                if let Some((ps, pg)) = &prev {
                    if pg.signum() != g.signum() && libm::fabs(pg - g) < 1.0 {
                        if let Some(root) = self.bisect_angle(ps.clone(), *pg, s.clone(), budget, reference) {
                            return Some(root);
                        }
                    }
                }
                prev = Some((s, g));
                tau += dir * STEP;
            }
        }
        None
    }

    fn bisect_angle(&self, mut a: Real, ga: f64, mut b: Real, budget: f64, reference: (f64, Option<usize>)) -> Option<Real> {
        let half = real(0.5, self.ps.precision());
        for _ in 0..200 {
            let mid = (&a + &b) * &half;
            let (t, g) = self.exit(&mid, budget, reference)?;
            if t < budget || t >= 2.0 * budget {
                return None;
            }
            if libm::fabs(g) < 1e-15 {
                return Some(mid);
            }
            if g.signum() == ga.signum() {
                a = mid;
            } else {
                b = mid;
            }
        }
        let (_, g) = self.exit(&a, budget, reference)?;
        (libm::fabs(g) < 1e-12).then_some(a)
    }
}

/// As [`boundary_bisection`] with an explicit choice of the point selected in
/// each stage window.
pub fn boundary_bisection_with(
    scene: &Scene,
    z_trapped: &PrecisePhasePoint,
    z_free: &PhasePoint,
    budgets: &[f64],
    alignment: ExitAlignment,
) -> Result<TrappedApproxSequence> {
    if budgets.is_empty() || budgets.windows(2).any(|w| !(w[1] > w[0])) || !(budgets[0] > 0.0) {
        return Err(Error::InvalidArgument("budgets must be positive and increasing".to_string()));
    }
    let precision = z_trapped.precision();
    let ps = PreciseScene::new(scene, precision);
    let max_budget = 2.0 * budgets[budgets.len() - 1];
    let seed = ps.escape_time(z_trapped, max_budget);
    if !seed.censored {
        return Err(Error::SeedNotTrapped(seed.time));
    }
    let free = ps.phase_point(z_free);
    let fe = ps.escape_time(&free, budgets[0]);
    if fe.censored || fe.time >= budgets[0] {
        return Err(Error::SeedNotFree(budgets[0]));
    }
    let zt = z_trapped.to_phase_point();
    let normal = zt.x.cross(zt.xi);
    let normal = if normal.norm() > 1e-12 { normal.normalized() } else { orthonormal_basis(zt.xi).0 };
    let (p1, p2) = orthonormal_basis(normal);
    let chord = Chord { ps: &ps, a: real(scene.a(), precision), free, trapped: z_trapped, plane: [p1, p2] };
    let mut phi_ref = match alignment {
        ExitAlignment::Reference(v) => Some((chord.angle(v), None)),
        _ => None,
    };
    let half = real(0.5, precision);
    let mut s_free = real(0.0, precision);
    let mut rays: Vec<ReflectingRay> = Vec::new();
    let mut stages = Vec::new();
    let mut failures = Vec::new();
    for (k, &budget) in budgets.iter().enumerate() {
        let mut lo = s_free.clone();
        let mut hi = real(1.0, precision);
        let mut steps = 0;
        let mut found = None;
        while steps < precision {
            let mid = (&lo + &hi) * &half;
            steps += 1;
            let e = ps.escape_time(&chord.point(&mid), 2.0 * budget);
            if e.censored {
                hi = mid;
            } else if e.time < budget {
                lo = mid;
            } else {
                found = Some(mid);
                break;
            }
        }
        let width = crate::billiard::precise::to_f64(&(&hi - &lo).ln()) / core::f64::consts::LN_2;
        let Some(natural) = found else {
            failures.push((budget, Error::RefinementFailed(format!("bisection exhausted {precision} bits"))));
            continue;
        };
        let mut aligned = false;
        let mut s = natural.clone();
        if let Some(reference) = phi_ref {
            if let Some(root) = chord.align(&natural, &hi, budget, reference) {
                s = root;
                aligned = true;
            }
        }
        s_free = natural.clone().max(s.clone());
        let z = chord.point(&s);
        let tr = ps.trace(&z, 2.0 * budget, true);
        let exit = tr.exit.as_ref().expect("escaping trajectory").to_phase_point();
        if alignment == ExitAlignment::FromStage(k) {
            phi_ref = Some((chord.angle(exit.xi), tr.hits.last().map(|h| h.0)));
            aligned = true;
        }
        let omega = z.xi.to_vec3().normalized();
        let bodies: Vec<usize> = tr.hits.iter().map(|h| h.0).collect();
        let points: Vec<Vec3> = tr.hits.iter().map(|h| h.1).collect();
        match refine_ray_on(scene, omega, exit.xi.normalized(), &bodies, &points, EXTRACT_TOL) {
            Ok(ray) => {
                if rays.last().map_or(false, |r| ray.sojourn <= r.sojourn) {
                    failures.push((budget, Error::RefinementFailed("sojourn time did not increase".to_string())));
                } else {
                    stages.push(StageReport {
                        budget,
                        escape_time: tr.path_length,
                        reflections: ray.m(),
                        bisection_steps: steps,
                        bracket_log2: width,
                        exit_aligned: aligned,
                    });
                    rays.push(ray);
                }
            }
            Err(err) => failures.push((budget, err)),
        }
    }
    Ok(TrappedApproxSequence::from_rays(rays, stages, failures))
}

/// Outcome of [`nondegenerate_filter`] per input ray.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct FilterReport {
    pub retained: Vec<usize>,
    /// Indices whose directions were perturbed to reach a non-degenerate ray.
    pub repaired: Vec<usize>,
    pub dropped: Vec<usize>,
}

/// Keeps rays with `|det dJ| > tol`; degenerate ones are re-refined for
/// `(omega, theta)` perturbed by angles up to `radius` and replaced when a
/// non-degenerate ray with sojourn time within 1% is found, else dropped.
pub fn nondegenerate_filter(
    scene: &Scene,
    sequence: &TrappedApproxSequence,
    tol: f64,
    radius: f64,
) -> (TrappedApproxSequence, FilterReport) {
    let mut report = FilterReport::default();
    if !(tol > 0.0) {
        report.retained = (0..sequence.rays.len()).collect();
        return (sequence.clone(), report);
    }
    let log_tol = libm::log(tol);
    let good = |ray: &ReflectingRay| jacobian_linearized(scene, ray).map_or(false, |r| r.log_abs_det > log_tol);
    let mut rays = Vec::new();
    let mut stages = Vec::new();
    for (k, ray) in sequence.rays.iter().enumerate() {
        let stage = sequence.stages.get(k).cloned();
        if good(ray) {
            report.retained.push(k);
            rays.push(ray.clone());
            stages.extend(stage);
            continue;
        }
        let mut repaired = None;
        'search: for r in [radius, 0.5 * radius, 0.25 * radius] {
            for q in 0..8 {
                let phi = q as f64 * PI / 4.0;
                let (b1, b2) = orthonormal_basis(ray.theta);
                let axis = b1 * libm::cos(phi) + b2 * libm::sin(phi);
                let theta = rotate(ray.theta, axis, r);
                let (c1, c2) = orthonormal_basis(ray.omega);
                let omega = rotate(ray.omega, c1 * libm::cos(phi) + c2 * libm::sin(phi), r);
                for (w, t) in [(ray.omega, theta), (omega, ray.theta)] {
                    if let Ok(cand) = refine_ray_on(scene, w, t, &ray.body_indices, &ray.points, EXTRACT_TOL) {
                        if libm::fabs(cand.sojourn - ray.sojourn) <= 0.01 * libm::fabs(ray.sojourn) && good(&cand) {
                            repaired = Some(cand);
                            break 'search;
                        }
                    }
                }
            }
        }
        match repaired {
            Some(c) => {
                report.repaired.push(k);
                rays.push(c);
                stages.extend(stage);
            }
            None => report.dropped.push(k),
        }
    }
    (TrappedApproxSequence::from_rays(rays, stages, sequence.failures.clone()), report)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakNondegeneracyEstimate {
    pub fraction: f64,
    /// 95% Wilson score interval for the fraction.
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: usize,
    pub samples: usize,
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform sample from the spherical cap of angular radius `alpha` about `c`.
fn cap_sample(rng: &mut ChaCha8Rng, c: Vec3, alpha: f64) -> Vec3 {
    let cos_min = libm::cos(alpha);
    let ct = 1.0 - uniform(rng) * (1.0 - cos_min);
    let st = libm::sqrt((1.0 - ct * ct).max(0.0));
    let phi = 2.0 * PI * uniform(rng);
    let (b1, b2) = orthonormal_basis(c);
    c * ct + b1 * (st * libm::cos(phi)) + b2 * (st * libm::sin(phi))
}

/// 95% Wilson score interval for `hits` successes out of `n` trials.
pub fn wilson_interval(hits: usize, n: usize) -> (f64, f64) {
    const Z: f64 = 1.959_963_984_540_054;
    let n = n as f64;
    let p = hits as f64 / n;
    let denom = 1.0 + Z * Z / n;
    let center = (p + Z * Z / (2.0 * n)) / denom;
    let half = Z * libm::sqrt(p * (1.0 - p) / n + Z * Z / (4.0 * n * n)) / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Reflection cap for the Monte Carlo trajectories.
const MC_REFLECTIONS: usize = 100_000;

/// Fraction of initial conditions `(x, omega)` with `x` on the reference
/// sphere within distance `radius` of `y_eta.x` and `omega` within distance
/// `radius` of `y_eta.xi` whose trajectory is an ordinary reflecting ray
/// (at least one reflection, no tangency, escapes).
pub fn weak_nondegeneracy_estimate(
    scene: &Scene,
    y_eta: &PhasePoint,
    radius: f64,
    n_samples: usize,
    seed: u64,
) -> Result<WeakNondegeneracyEstimate> {
    if n_samples < 100 {
        return Err(Error::InvalidArgument("at least 100 samples are required".to_string()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".to_string()));
    }
    let a = scene.a();
    let cx = y_eta.x.normalized();
    let cw = y_eta.xi.normalized();
    // Chordal distance `radius` corresponds to the angle 2 asin(radius / 2R).
    let alpha_x = 2.0 * libm::asin((radius / (2.0 * a)).min(1.0));
    let alpha_w = 2.0 * libm::asin((radius / 2.0).min(1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for _ in 0..n_samples {
        let x = cap_sample(&mut rng, cx, alpha_x) * a;
        let w = cap_sample(&mut rng, cw, alpha_w);
        if w.dot(x) >= 0.0 {
            continue;
        }
        let tr = trace(scene, PhasePoint::new(x, w), MC_REFLECTIONS);
        if tr.status == TraceStatus::Escaped && !tr.hits.is_empty() {
            hits += 1;
        }
    }
    let p = hits as f64 / n_samples as f64;
    let (ci_low, ci_high) = wilson_interval(hits, n_samples);
    Ok(WeakNondegeneracyEstimate {
        fraction: p,
        ci_low,
        ci_high,
        hits,
        samples: n_samples,
    })
}

/// Paraxial growth factor per reflection of the bouncing-ball orbit between
/// two spheres of radii `r1`, `r2` whose surfaces are `gap` apart.
pub fn bouncing_ball_multiplier(r1: f64, r2: f64, gap: f64) -> f64 {
    let drift = |l: f64| Mat2::new(1.0, l, 0.0, 1.0);
    let mirror = |r: f64| Mat2::new(1.0, 0.0, 2.0 / r, 1.0);
    let m = drift(0.5 * gap).matmul(&mirror(r1)).matmul(&drift(gap)).matmul(&mirror(r2)).matmul(&drift(0.5 * gap));
    let tr = m.trace();
    let lambda = 0.5 * (tr + libm::sqrt(tr * tr - 4.0));
    libm::sqrt(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenes;

    #[test]
    fn lattices_are_on_the_sphere() {
        for v in fibonacci_sphere(50) {
            assert!((v.norm() - 1.0).abs() < 1e-14);
        }
        let axis = Vec3::new(1.0, 2.0, -0.5).normalized();
        assert!(fibonacci_hemisphere(axis, 50).iter().all(|v| v.dot(axis) > 0.0 && (v.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn multiplier_of_unit_spheres() {
        let l = bouncing_ball_multiplier(1.0, 1.0, 2.0);
        assert!((l - (3.0 + libm::sqrt(8.0))).abs() < 1e-12);
    }

    #[test]
    fn sphere_scan_has_no_trapping() {
        let f = escape_scan(&scenes::unit_sphere(), 20, 500.0);
        assert_eq!(f.samples.len(), 400);
        assert_eq!(f.censored_count(), 0);
        assert!(f.samples.iter().all(|s| (s.z.x.norm() - 2.0).abs() < 1e-12 && s.z.xi.dot(s.z.x) < 0.0));
    }

    #[test]
    fn seed_is_trapped_and_rotation_frees_it() {
        let scene = scenes::two_spheres();
        let seed = bouncing_ball_seed(&scene, 0, 1, 400).unwrap();
        let ps = PreciseScene::new(&scene, 400);
        assert!(ps.escape_time(&seed, 200.0).censored);
        let free = in_plane_free_seed(&seed.to_phase_point(), 0.05);
        assert!(escape_time(&scene, free, 200.0).time < 20.0);
        assert!(matches!(bouncing_ball_seed(&scene, 0, 0, 100), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn bisection_guards() {
        let scene = scenes::two_spheres();
        let seed = bouncing_ball_seed(&scene, 0, 1, 200).unwrap();
        let free = in_plane_free_seed(&seed.to_phase_point(), 0.05);
        let free_precise = PreciseScene::new(&scene, 200).phase_point(&free);
        assert!(matches!(boundary_bisection(&scene, &free_precise, &free, &[10.0]), Err(Error::SeedNotTrapped(_))));
        assert!(matches!(
            boundary_bisection(&scene, &seed, &seed.to_phase_point(), &[1.0]),
            Err(Error::SeedNotFree(_))
        ));
    }

    #[test]
    fn weak_estimate_guards_and_determinism() {
        let scene = scenes::unit_sphere();
        let z = PhasePoint::new(Vec3::new(0.0, 0.0, 2.0), -Vec3::Z);
        assert!(weak_nondegeneracy_estimate(&scene, &z, 0.05, 0, 1).is_err());
        let a = weak_nondegeneracy_estimate(&scene, &z, 0.05, 500, 7).unwrap();
        let b = weak_nondegeneracy_estimate(&scene, &z, 0.05, 500, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.fraction > 0.99);
    }
}
