//! Exact scattering amplitude of a sphere with Dirichlet boundary condition
//! and the band-limited scattering kernel synthesized from it.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectrum::length_spectrum;
use crate::vector::Vec3;

/// Relative change allowed when the series truncation is doubled.
pub const TRUNCATION_TOL: f64 = 1e-10;
/// Fewest frequency samples accepted by [`filtered_kernel`].
pub const MIN_BAND_SAMPLES: usize = 64;

/// Smallest truncation order accepted for `lambda * r`.
pub fn min_order(lambda: f64, r: f64) -> usize {
    libm::ceil(lambda * r) as usize + 20
}

/// `j_l(x)` for `l = 0..=l_max` by downward recurrence, normalized against the
/// closed forms of `j_0` and `j_1`.
pub fn spherical_bessel_j(l_max: usize, x: f64) -> Vec<f64> {
    let start = l_max.max(libm::ceil(x) as usize) + 40 + libm::sqrt(40.0 * (l_max as f64 + x)) as usize;
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-300;
    for l in (1..=start).rev() {
        j[l - 1] = (2 * l + 1) as f64 / x * j[l] - j[l + 1];
        if libm::fabs(j[l - 1]) > 1e250 {
            for v in j[l - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let (s, c) = (libm::sin(x), libm::cos(x));
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    let scale = if libm::fabs(j0) >= libm::fabs(j1) { j0 / j[0] } else { j1 / j[1] };
    j.truncate(l_max + 1);
    for v in j.iter_mut() {
        *v *= scale;
    }
    j
}

/// `y_l(x)` for `l = 0..=l_max` by upward recurrence.
pub fn spherical_bessel_y(l_max: usize, x: f64) -> Result<Vec<f64>> {
    let (s, c) = (libm::sin(x), libm::cos(x));
    let mut y = Vec::with_capacity(l_max + 1);
    y.push(-c / x);
    if l_max >= 1 {
        y.push(-c / (x * x) - s / x);
    }
    for l in 1..l_max {
        let next = (2 * l + 1) as f64 / x * y[l] - y[l - 1];
        if !next.is_finite() {
            return Err(Error::RecurrenceOverflow(l + 1));
        }
        y.push(next);
    }
    Ok(y)
}

fn series(r: f64, cos_angle: f64, lambda: f64, l_max: usize) -> Result<Complex64> {
    let x = lambda * r;
    let j = spherical_bessel_j(l_max, x);
    let mut sum = Complex64::new(0.0, 0.0);
    let (mut p_prev, mut p) = (1.0, cos_angle);
    let (s, c) = (libm::sin(x), libm::cos(x));
    let (mut y_prev, mut y) = (-c / x, -c / (x * x) - s / x);
    for l in 0..=l_max {
        let pl = if l == 0 { 1.0 } else { p };
        let yl = if l == 0 { y_prev } else { y };
        if !yl.is_finite() {
            return Err(Error::RecurrenceOverflow(l));
        }
        // Past this size of y_l the remaining terms are below 1e-300 relative.
        if libm::fabs(yl) > 1e150 {
            break;
        }
        let h = Complex64::new(j[l], yl);
        sum += -(j[l] / h) * ((2 * l + 1) as f64 * pl);
        if l >= 1 {
            let next = ((2 * l + 1) as f64 * cos_angle * p - l as f64 * p_prev) / (l + 1) as f64;
            p_prev = p;
            p = next;
            let y_next = (2 * l + 1) as f64 / x * y - y_prev;
            y_prev = y;
            y = y_next;
        }
    }
    // Far-field amplitude of the scattered wave for incidence along omega.
    Ok(sum / Complex64::new(0.0, lambda))
}

/// Scattering amplitude `a(lambda, theta, omega)` of the sphere of radius `r`
/// at the origin, a function of `cos_angle = <theta, omega>` only. The
/// high-frequency backscattering magnitude tends to `r / 2`.
pub fn sphere_amplitude(r: f64, cos_angle: f64, lambda: f64, l_max: usize) -> Result<Complex64> {
    if !(lambda > 0.0) || !(r > 0.0) {
        return Err(Error::InvalidArgument("frequency and radius must be positive".to_string()));
    }
    if !(-1.0..=1.0).contains(&cos_angle) {
        return Err(Error::InvalidArgument("cosine outside [-1, 1]".to_string()));
    }
    if l_max < min_order(lambda, r) {
        return Err(Error::InvalidArgument("truncation order below lambda * r + 20".to_string()));
    }
    Ok(series(r, cos_angle, lambda, l_max)?.conj())
}

/// Amplitude at the smallest order, starting from [`min_order`] and growing
/// by half, whose doubling changes the value by less than [`TRUNCATION_TOL`].
fn converged_amplitude(r: f64, cos_angle: f64, lambda: f64) -> Result<(Complex64, usize)> {
    let mut l = min_order(lambda, r);
    let mut change = f64::INFINITY;
    for _ in 0..6 {
        let a = sphere_amplitude(r, cos_angle, lambda, l)?;
        let b = sphere_amplitude(r, cos_angle, lambda, 2 * l)?;
        change = (a - b).norm() / b.norm().max(f64::MIN_POSITIVE);
        if change < TRUNCATION_TOL {
            return Ok((a, l));
        }
        l += l / 2;
    }
    Err(Error::TruncationNotConverged { l_max: l, change })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeGrid {
    pub r: f64,
    pub cos_angle: f64,
    pub lambdas: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Largest truncation order used; doubling it changes no value by more
    /// than [`TRUNCATION_TOL`].
    pub l_max: usize,
}

impl AmplitudeGrid {
    /// `n` uniformly spaced frequencies covering `[lambda_min, lambda_max]`.
    pub fn compute(r: f64, cos_angle: f64, lambda_min: f64, lambda_max: f64, n: usize) -> Result<AmplitudeGrid> {
        if !(lambda_min > 0.0 && lambda_max > lambda_min) || n < 2 {
            return Err(Error::InvalidArgument("need 0 < lambda_min < lambda_max and two samples".to_string()));
        }
        let step = (lambda_max - lambda_min) / (n - 1) as f64;
        let lambdas: Vec<f64> = (0..n).map(|k| lambda_min + step * k as f64).collect();
        let mut values = Vec::with_capacity(n);
        let mut l_max = 0;
        for &l in &lambdas {
            let (v, order) = converged_amplitude(r, cos_angle, l)?;
            values.push(v);
            l_max = l_max.max(order);
        }
        Ok(AmplitudeGrid { r, cos_angle, lambdas, values, l_max })
    }

    pub fn band(&self) -> (f64, f64) {
        (self.lambdas[0], self.lambdas[self.lambdas.len() - 1])
    }

    /// `|theta - omega|` for unit vectors with the grid's cosine.
    pub fn direction_distance(&self) -> f64 {
        libm::sqrt((2.0 - 2.0 * self.cos_angle).max(0.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Window {
    /// `exp(-(lambda - center)^2 / (2 width^2))`.
    Gaussian { center: f64, width: f64 },
    /// Raised cosine vanishing at the band edges.
    Hann { lo: f64, hi: f64 },
}

impl Window {
    /// Gaussian centred mid-band with width a sixth of the band.
    pub fn default_for(lo: f64, hi: f64) -> Window {
        Window::Gaussian { center: 0.5 * (lo + hi), width: (hi - lo) / 6.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Window::Gaussian { .. } => "gaussian",
            Window::Hann { .. } => "hann",
        }
    }

    pub fn weight(&self, lambda: f64) -> f64 {
        match *self {
            Window::Gaussian { center, width } => {
                let u = (lambda - center) / width;
                libm::exp(-0.5 * u * u)
            }
            Window::Hann { lo, hi } => {
                let u = (lambda - lo) / (hi - lo);
                if (0.0..=1.0).contains(&u) {
                    0.5 - 0.5 * libm::cos(2.0 * PI * u)
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilteredKernel {
    pub ts: Vec<f64>,
    pub values: Vec<Complex64>,
    pub window: Window,
    pub band: (f64, f64),
    /// `2 pi / (lambda_max - lambda_min)`.
    pub resolution: f64,
    /// `sum |g_k|^2` of the weighted, windowed band samples.
    pub band_energy: f64,
    /// The same energy recovered from the full period of the synthesis.
    pub time_energy: f64,
}

impl FilteredKernel {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Relative mismatch of the discrete Parseval identity.
    pub fn parseval_defect(&self) -> f64 {
        libm::fabs(self.time_energy - self.band_energy) / self.band_energy.max(f64::MIN_POSITIVE)
    }
}

/// Band-limited scattering kernel
/// `s(t) = (1/2pi) sum_k e^{i t lambda_k} (i lambda_k / 2pi) conj(a_k) w(lambda_k) dlambda`
/// on a time grid of four points per frequency sample over one period,
/// reported on `[-T, T]` with `T = 4 r max(1, |theta - omega|)`.
pub fn filtered_kernel(grid: &AmplitudeGrid, window_width: f64) -> Result<FilteredKernel> {
    let (lo, hi) = grid.band();
    filtered_kernel_with(grid, Window::Gaussian { center: 0.5 * (lo + hi), width: window_width })
}

pub fn filtered_kernel_with(grid: &AmplitudeGrid, window: Window) -> Result<FilteredKernel> {
    let n = grid.lambdas.len();
    if n < MIN_BAND_SAMPLES {
        return Err(Error::BandTooNarrow(n));
    }
    let (lo, hi) = grid.band();
    let dl = (hi - lo) / (n - 1) as f64;
    let g: Vec<Complex64> = grid
        .lambdas
        .iter()
        .zip(&grid.values)
        .map(|(&l, a)| Complex64::new(0.0, l / (2.0 * PI)) * a.conj() * window.weight(l))
        .collect();
    let band_energy: f64 = g.iter().map(|v| v.norm_sqr()).sum();
    let m = 4 * n;
    let dt = 2.0 * PI / (m as f64 * dl);
    let half = 4.0 * grid.r * grid.direction_distance().max(1.0);
    let norm = dl / (2.0 * PI);
    let mut ts = Vec::new();
    let mut values = Vec::new();
    let mut time_energy = 0.0;
    for jj in 0..m {
        let j = jj as i64 - (m / 2) as i64;
        let t = j as f64 * dt;
        // Phasor recurrence over the uniform frequency grid.
        let step = Complex64::from_polar(1.0, t * dl);
        let mut ph = Complex64::from_polar(1.0, t * lo);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, gk) in g.iter().enumerate() {
            if k % 64 == 0 {
                ph = Complex64::from_polar(1.0, t * grid.lambdas[k]);
            }
            acc += gk * ph;
            ph *= step;
        }
        let s = acc * norm;
        time_energy += s.norm_sqr();
        if libm::fabs(t) <= half {
            ts.push(t);
            values.push(s);
        }
    }
    // sum_j |s_j|^2 = m norm^2 sum_k |g_k|^2 over one full period.
    time_energy /= m as f64 * norm * norm;
    Ok(FilteredKernel { ts, values, window, band: (lo, hi), resolution: 2.0 * PI / (hi - lo), band_energy, time_energy })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub t: f64,
    pub magnitude: f64,
}

/// Local maxima of `|s|` above `threshold_ratio` times the largest sample,
/// refined by a parabola through the neighbouring samples; sorted by
/// decreasing magnitude.
pub fn locate_peaks(kernel: &FilteredKernel, threshold_ratio: f64) -> Vec<Peak> {
    let mag = kernel.magnitudes();
    let max = mag.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    for i in 0..mag.len() {
        let left = if i > 0 { mag[i - 1] } else { f64::NEG_INFINITY };
        let right = if i + 1 < mag.len() { mag[i + 1] } else { f64::NEG_INFINITY };
        if mag[i] < threshold_ratio * max || mag[i] < left || mag[i] <= right {
            continue;
        }
        let mut peak = Peak { t: kernel.ts[i], magnitude: mag[i] };
        if left.is_finite() && right.is_finite() {
            let denom = left - 2.0 * mag[i] + right;
            if denom < 0.0 {
                let d = 0.5 * (left - right) / denom;
                let dt = kernel.ts[i + 1] - kernel.ts[i];
                peak = Peak { t: kernel.ts[i] + d * dt, magnitude: mag[i] - 0.25 * (left - right) * d };
            }
        }
        peaks.push(peak);
    }
    peaks.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
    peaks
}

/// Number of frequency samples used by [`validate_sphere`].
pub const VALIDATION_SAMPLES: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusReport {
    pub r: f64,
    pub t_singular: f64,
    pub coeff_magnitude: f64,
    pub spectrum_entries: usize,
    pub t_peak: f64,
    pub peak_magnitude: f64,
    pub peak_time_error: f64,
    /// Peaks above 30% of the maximum.
    pub dominant_peaks: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SphereValidation {
    pub band: (f64, f64),
    pub resolution: f64,
    pub radii: [RadiusReport; 2],
    pub measured_ratio: f64,
    pub predicted_ratio: f64,
    pub ratio_error: f64,
}

/// Compares the geometric spectrum of spheres of two radii with the peaks of
/// their band-limited wave kernels under the same band and window.
pub fn validate_sphere(radii: [f64; 2], theta: Vec3, omega: Vec3, band: (f64, f64)) -> Result<SphereValidation> {
    validate_sphere_with(radii, theta, omega, band, None)
}

pub fn validate_sphere_with(
    radii: [f64; 2],
    theta: Vec3,
    omega: Vec3,
    band: (f64, f64),
    window: Option<Window>,
) -> Result<SphereValidation> {
    let (theta, omega) = (theta.normalized(), omega.normalized());
    if (theta - omega).norm() < 1e-12 {
        return Err(Error::ThetaEqualsOmega);
    }
    let window = window.unwrap_or(Window::default_for(band.0, band.1));
    let report = |r: f64| -> Result<RadiusReport> {
        let scene = crate::scenes::sphere(r);
        let spectrum = length_spectrum(&scene, omega, theta, 1)?;
        let entry = spectrum.first().ok_or(Error::RefinementFailed("no reflecting ray".to_string()))?;
        let coeff = entry.coeff_magnitude.ok_or(Error::DegenerateRay(entry.det_dj))?;
        let grid = AmplitudeGrid::compute(r, theta.dot(omega).clamp(-1.0, 1.0), band.0, band.1, VALIDATION_SAMPLES)?;
        let kernel = filtered_kernel_with(&grid, window)?;
        let peaks = locate_peaks(&kernel, 0.3);
        let top = peaks[0];
        Ok(RadiusReport {
            r,
            t_singular: entry.t_singular,
            coeff_magnitude: coeff,
            spectrum_entries: spectrum.len(),
            t_peak: top.t,
            peak_magnitude: top.magnitude,
            peak_time_error: libm::fabs(top.t - entry.t_singular),
            dominant_peaks: peaks.len(),
        })
    };
    let r0 = report(radii[0])?;
    let r1 = report(radii[1])?;
    let measured_ratio = r1.peak_magnitude / r0.peak_magnitude;
    let predicted_ratio = r1.coeff_magnitude / r0.coeff_magnitude;
    Ok(SphereValidation {
        band,
        resolution: 2.0 * PI / (band.1 - band.0),
        ratio_error: libm::fabs(measured_ratio / predicted_ratio - 1.0),
        radii: [r0, r1],
        measured_ratio,
        predicted_ratio,
    })
}
