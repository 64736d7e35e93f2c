//! Scattering length spectrum: sojourn times of the reflecting rays for a
//! direction pair with the magnitudes of the leading singularity coefficients.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::crosssection::{jacobian_linearized, CrossSectionRecord, NONDEGENERACY_TOL};
use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::rayfinder::{fermat_hessian, search_rays, ReflectingRay};

/// Default tolerance below which two singular times count as coincident.
pub const GAP_TOL: f64 = 1e-6;
/// Default shooting-grid density for the ray search.
pub const DEFAULT_GRID: usize = 16;
/// Eigenvalue magnitude below which the length Hessian counts as singular.
pub const HESSIAN_TOL: f64 = 1e-10;

/// `(2 pi)^{-1} |det dJ <nu(x_1), omega> / <nu(x_m), theta>|^{-1/2}`.
pub fn singularity_coefficient(scene: &Scene, record: &CrossSectionRecord) -> Result<f64> {
    Ok(libm::exp(log_singularity_coefficient(scene, record)?))
}

/// Natural logarithm of [`singularity_coefficient`]; finite also for long
/// rays whose determinant overflows.
pub fn log_singularity_coefficient(scene: &Scene, record: &CrossSectionRecord) -> Result<f64> {
    let ray = &record.ray;
    if !(record.log_abs_det > libm::log(NONDEGENERACY_TOL)) {
        return Err(Error::DegenerateRay(record.det));
    }
    let sp = ray.surface_points(scene);
    let first = libm::fabs(sp[0].nu.dot(ray.omega));
    let last = libm::fabs(sp[ray.m() - 1].nu.dot(ray.theta));
    if last < scene.tangency_tol() {
        return Err(Error::GrazingExit);
    }
    let log_inner = record.log_abs_det + libm::log(first) - libm::log(last);
    Ok(-libm::log(2.0 * PI) - 0.5 * log_inner)
}

/// Number of negative eigenvalues of the length Hessian at the ray, from the
/// inertia of its block factorization.
pub fn morse_index(scene: &Scene, ray: &ReflectingRay) -> Result<usize> {
    let h = fermat_hessian(scene, ray)?;
    match h.inertia() {
        Some((neg, smallest)) if smallest * max_diag(&h) >= HESSIAN_TOL => Ok(neg),
        Some((_, smallest)) => Err(Error::SingularHessian(smallest * max_diag(&h))),
        None => Err(Error::SingularHessian(0.0)),
    }
}

fn max_diag(h: &crate::linalg::BlockTridiagonal) -> f64 {
    h.diag.iter().fold(0.0f64, |m, d| m.max(libm::fabs(d.0[0][0])).max(libm::fabs(d.0[1][1])))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryStatus {
    Ok,
    Degenerate,
    GrazingExit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumEntry {
    pub ray_id: usize,
    /// `-T` of the ray: the time at which it produces a singularity.
    pub t_singular: f64,
    pub det_dj: f64,
    pub log_abs_det: f64,
    pub coeff_magnitude: Option<f64>,
    pub m_gamma: usize,
    pub beta_experimental: Option<usize>,
    /// Distance to the nearest other singular time in the computed set.
    pub min_gap: f64,
    /// Separation from all other singular times of the computed set; rays
    /// outside the set are not accounted for.
    pub separated_within_found_set: bool,
    pub status: EntryStatus,
    pub ray: ReflectingRay,
}

/// Spectrum entry for one ray; `separated_within_found_set` and `min_gap`
/// are left for [`mark_separation`].
pub fn spectrum_entry(scene: &Scene, ray: &ReflectingRay, ray_id: usize) -> Result<SpectrumEntry> {
    let rec = jacobian_linearized(scene, ray)?;
    let (coeff, status) = match singularity_coefficient(scene, &rec) {
        Ok(c) => (Some(c), EntryStatus::Ok),
        Err(Error::DegenerateRay(_)) => (None, EntryStatus::Degenerate),
        Err(Error::GrazingExit) => (None, EntryStatus::GrazingExit),
        Err(e) => return Err(e),
    };
    Ok(SpectrumEntry {
        ray_id,
        t_singular: -ray.sojourn,
        det_dj: rec.det,
        log_abs_det: rec.log_abs_det,
        coeff_magnitude: coeff,
        m_gamma: ray.m(),
        beta_experimental: morse_index(scene, ray).ok(),
        min_gap: f64::INFINITY,
        separated_within_found_set: true,
        status,
        ray: ray.clone(),
    })
}

/// Sets `min_gap` and the separation flag of every entry.
pub fn mark_separation(entries: &mut [SpectrumEntry], gap_tol: f64) {
    let ts: Vec<f64> = entries.iter().map(|e| e.t_singular).collect();
    for (i, e) in entries.iter_mut().enumerate() {
        e.min_gap = ts
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, t)| libm::fabs(t - e.t_singular))
            .fold(f64::INFINITY, f64::min);
        e.separated_within_found_set = e.min_gap > gap_tol;
    }
}

/// Spectrum for `(omega, theta)` from every ray with at most `m_max`
/// reflections, sorted by singular time.
pub fn length_spectrum(scene: &Scene, omega: crate::Vec3, theta: crate::Vec3, m_max: usize) -> Result<Vec<SpectrumEntry>> {
    length_spectrum_with(scene, omega, theta, m_max, DEFAULT_GRID, GAP_TOL)
}

pub fn length_spectrum_with(
    scene: &Scene,
    omega: crate::Vec3,
    theta: crate::Vec3,
    m_max: usize,
    grid_density: usize,
    gap_tol: f64,
) -> Result<Vec<SpectrumEntry>> {
    let search = search_rays(scene, omega, theta, m_max, grid_density)?;
    let mut entries = Vec::with_capacity(search.rays.len());
    for ray in &search.rays {
        entries.push(spectrum_entry(scene, ray, 0)?);
    }
    entries.sort_by(|a, b| a.t_singular.total_cmp(&b.t_singular));
    for (i, e) in entries.iter_mut().enumerate() {
        e.ray_id = i;
    }
    mark_separation(&mut entries, gap_tol);
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rayfinder::{refine_ray, DEFAULT_TOL};
    use crate::scenes;
    use crate::Vec3;

    #[test]
    fn sphere_backscatter_coefficients() {
        for (r, inner) in [(1.0, 0.5), (2.0, 1.0)] {
            let scene = scenes::sphere(r);
            let ray = refine_ray(&scene, -Vec3::Z, Vec3::Z, &[Vec3::new(0.0, 0.0, r)], DEFAULT_TOL).unwrap();
            let rec = jacobian_linearized(&scene, &ray).unwrap();
            let c = singularity_coefficient(&scene, &rec).unwrap();
            assert!((c - inner / (2.0 * PI)).abs() < 1e-12);
            assert_eq!(morse_index(&scene, &ray).unwrap(), 0);
        }
    }

    #[test]
    fn degenerate_record_is_rejected() {
        let scene = scenes::unit_sphere();
        let ray = refine_ray(&scene, -Vec3::Z, Vec3::Z, &[Vec3::Z], DEFAULT_TOL).unwrap();
        let mut rec = jacobian_linearized(&scene, &ray).unwrap();
        rec.det = 0.0;
        rec.log_abs_det = f64::NEG_INFINITY;
        assert_eq!(singularity_coefficient(&scene, &rec), Err(Error::DegenerateRay(0.0)));
    }

    #[test]
    fn sphere_spectrum_single_entry() {
        let scene = scenes::unit_sphere();
        let w = Vec3::new(0.3, -0.4, -1.0).normalized();
        let t = Vec3::new(-0.2, 0.9, 0.1).normalized();
        let s = length_spectrum(&scene, w, t, 4).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].t_singular - (t - w).norm()).abs() < 1e-12);
        assert!(s[0].separated_within_found_set);
        assert!(length_spectrum(&scene, w, t, 0).unwrap().is_empty());
    }

    #[test]
    fn two_sphere_spectrum() {
        let scene = scenes::two_spheres();
        let w = Vec3::new(0.0, -1.0, 0.0);
        let t = Vec3::new(0.3, 0.2, 1.0).normalized();
        let s = length_spectrum(&scene, w, t, 6).unwrap();
        assert!(s.len() >= 4);
        assert!(s.iter().all(|e| e.separated_within_found_set && e.coeff_magnitude.unwrap() > 0.0));
        let two = length_spectrum(&scene, -Vec3::Z, Vec3::Z, 2).unwrap();
        let idx: Vec<Option<usize>> = two.iter().filter(|e| e.m_gamma == 2).map(|e| e.beta_experimental).collect();
        assert_eq!(idx.len(), 2);
        // Symmetric pairs share their singular time and are flagged on both sides.
        assert!(two.iter().all(|e| !e.separated_within_found_set));
    }
}
