//! Execution of the CLI commands.

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use raylength_core::billiard::PhasePoint;
use raylength_core::crosssection::{jacobian_fd, jacobian_linearized};
use raylength_core::spectrum::length_spectrum_with;
use raylength_core::trapscan::{
    boundary_bisection, bouncing_ball_seed, escape_scan_with_seeds, free_seed, nondegenerate_filter, precision_for,
    weak_nondegeneracy_estimate,
};
use raylength_core::waveoracle::{filtered_kernel_with, validate_sphere, AmplitudeGrid, Window, VALIDATION_SAMPLES};
use raylength_core::{find_rays, BodyKind, Scene};
use serde_json::json;

use crate::config::{CommandKind, RunConfig};
use crate::error::{Result, ShellError};
use crate::report::{num, vec3, write_csv, write_manifest, Manifest};
use crate::scenefile::{emit_scene, load_scene};

/// Files written by a run and its summary.
#[derive(Debug)]
pub struct RunReport {
    pub outputs: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

pub const SPECTRUM_COLUMNS: [&str; 6] = ["ray_id", "m", "t_singular", "det_dJ", "coeff_magnitude", "separated"];
pub const SEQUENCE_COLUMNS: [&str; 5] = ["stage", "omega", "theta", "sojourn", "det_dJ"];

/// Runs `config.command`, writing CSV tables and `manifest.json` into
/// `config.out`.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let scene = load_scene(&config.scene_path)?;
    std::fs::create_dir_all(&config.out).map_err(|e| ShellError::io(&config.out, e))?;
    let (mut outputs, summary) = match config.command {
        CommandKind::Spectrum => spectrum(&scene, config)?,
        CommandKind::CrossCheck => cross_check(&scene, config)?,
        CommandKind::Trapscan => trapscan(&scene, config)?,
        CommandKind::ValidateSphere => validate(&scene, config)?,
        CommandKind::Weakndg => weakndg(&scene, config)?,
    };
    let manifest = Manifest {
        tool: "raylength",
        version: env!("CARGO_PKG_VERSION"),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        config,
        scene: emit_scene(&scene),
        outputs: outputs.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect(),
        summary: summary.clone(),
    };
    outputs.push(write_manifest(&config.out, &manifest)?);
    Ok(RunReport { outputs, summary })
}

type Outcome = (Vec<PathBuf>, serde_json::Value);

fn spectrum(scene: &Scene, c: &RunConfig) -> Result<Outcome> {
    let entries = length_spectrum_with(scene, c.omega(), c.theta(), c.m_max, c.grid, c.gap_tol)?;
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| {
            vec![
                e.ray_id.to_string(),
                e.m_gamma.to_string(),
                num(e.t_singular),
                num(e.det_dj),
                e.coeff_magnitude.map_or_else(String::new, num),
                e.separated_within_found_set.to_string(),
            ]
        })
        .collect();
    let path = write_csv(&c.out, "spectrum.csv", c, &SPECTRUM_COLUMNS, &rows)?;
    let summary = json!({
        "rays": entries.len(),
        "degenerate": entries.iter().filter(|e| e.coeff_magnitude.is_none()).count(),
        "unseparated": entries.iter().filter(|e| !e.separated_within_found_set).count(),
    });
    Ok((vec![path], summary))
}

fn cross_check(scene: &Scene, c: &RunConfig) -> Result<Outcome> {
    let rays = find_rays(scene, c.omega(), c.theta(), c.m_max, c.grid)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (i, ray) in rays.iter().enumerate() {
        let lin = jacobian_linearized(scene, ray)?;
        let (fd, rel) = match jacobian_fd(scene, ray, c.fd_step) {
            Ok(fd) => {
                let rel = (fd.det - lin.det).abs() / lin.det.abs();
                worst = worst.max(rel);
                (num(fd.det), num(rel))
            }
            Err(_) => (String::new(), String::new()),
        };
        rows.push(vec![i.to_string(), ray.m().to_string(), num(-ray.sojourn), fd, num(lin.det), rel]);
    }
    let path = write_csv(&c.out, "cross_check.csv", c, &["ray_id", "m", "t_singular", "det_fd", "det_lin", "rel_diff"], &rows)?;
    Ok((vec![path], json!({ "rays": rays.len(), "max_rel_diff": worst })))
}

/// Index pair of the first two spherical bodies.
fn sphere_pair(scene: &Scene) -> Option<(usize, usize)> {
    let mut it = scene.bodies().iter().enumerate().filter(|(_, b)| b.kind() == BodyKind::Sphere).map(|(i, _)| i);
    Some((it.next()?, it.next()?))
}

fn trapscan(scene: &Scene, c: &RunConfig) -> Result<Outcome> {
    let budgets = c.stage_budgets();
    let seed = match sphere_pair(scene) {
        Some((i, j)) => Some(bouncing_ball_seed(scene, i, j, precision_for(2.0 * budgets[budgets.len() - 1]))?),
        None => None,
    };
    let field = escape_scan_with_seeds(scene, c.grid, c.budget, seed.as_slice());
    let rows: Vec<Vec<String>> = field
        .samples
        .iter()
        .map(|s| vec![vec3(s.z.x), vec3(s.z.xi), num(s.time), s.censored.to_string(), s.precise.to_string()])
        .collect();
    let mut outputs = vec![write_csv(&c.out, "escape_field.csv", c, &["x", "xi", "time", "censored", "precise"], &rows)?];
    let mut summary = json!({
        "samples": field.samples.len(),
        "censored": field.censored_count(),
        "censored_fraction": field.censored_fraction(),
        "budget": field.budget,
    });
    let mut seq_rows = Vec::new();
    if let Some(seed) = seed {
        let z = seed.to_phase_point();
        let free = free_seed(scene, &z, budgets[0], 0.01)?;
        let raw = boundary_bisection(scene, &seed, &free, &budgets)?;
        let (seq, report) = nondegenerate_filter(scene, &raw, c.nondegeneracy_tol, 1e-3);
        for (k, ray) in seq.rays.iter().enumerate() {
            let det = jacobian_linearized(scene, ray)?.det;
            seq_rows.push(vec![k.to_string(), vec3(ray.omega), vec3(ray.theta), num(ray.sojourn), num(det)]);
        }
        summary["sequence"] = json!({
            "budgets": budgets,
            "reflections": seq.rays.iter().map(|r| r.m()).collect::<Vec<_>>(),
            "gaps": seq.gaps,
            "per_reflection_gaps": seq.per_reflection_gaps,
            "failures": raw.failures.iter().map(|(b, e)| json!({"budget": b, "reason": e.to_string()})).collect::<Vec<_>>(),
            "repaired": report.repaired,
            "dropped": report.dropped,
        });
    } else {
        summary["sequence"] = json!(null);
    }
    outputs.push(write_csv(&c.out, "sequence.csv", c, &SEQUENCE_COLUMNS, &seq_rows)?);
    Ok((outputs, summary))
}

fn validate(scene: &Scene, c: &RunConfig) -> Result<Outcome> {
    let r = match scene.bodies() {
        [b] if b.kind() == BodyKind::Sphere && b.center().norm() == 0.0 => b.radii().x,
        _ => return Err(ShellError::Config("validate-sphere needs a scene with one sphere centred at the origin".into())),
    };
    let band = (c.band[0], c.band[1]);
    let v = validate_sphere([r, 2.0 * r], c.theta(), c.omega(), band)?;
    let rows: Vec<Vec<String>> = v
        .radii
        .iter()
        .map(|x| {
            vec![
                num(x.r),
                num(x.t_singular),
                num(x.t_peak),
                num(x.peak_time_error),
                num(v.resolution),
                num(x.coeff_magnitude),
                num(x.peak_magnitude),
                x.dominant_peaks.to_string(),
                x.spectrum_entries.to_string(),
            ]
        })
        .collect();
    let columns = [
        "radius",
        "t_singular",
        "t_peak",
        "peak_time_error",
        "resolution",
        "coeff_magnitude",
        "peak_magnitude",
        "dominant_peaks",
        "spectrum_entries",
    ];
    let mut outputs = vec![write_csv(&c.out, "validate_sphere.csv", c, &columns, &rows)?];
    let cos = c.theta().dot(c.omega()).clamp(-1.0, 1.0);
    let grid = AmplitudeGrid::compute(r, cos, band.0, band.1, VALIDATION_SAMPLES)?;
    let amp_rows: Vec<Vec<String>> = grid.lambdas.iter().zip(&grid.values).map(|(l, a)| vec![num(*l), num(a.re), num(a.im)]).collect();
    outputs.push(write_csv(&c.out, "amplitude.csv", c, &["lambda", "re", "im"], &amp_rows)?);
    let kernel = filtered_kernel_with(&grid, Window::default_for(band.0, band.1))?;
    let k_rows: Vec<Vec<String>> =
        kernel.ts.iter().zip(&kernel.values).map(|(t, s)| vec![num(*t), num(s.re), num(s.im), num(s.norm())]).collect();
    outputs.push(write_csv(&c.out, "kernel.csv", c, &["t", "re", "im", "abs"], &k_rows)?);
    let summary = json!({
        "resolution": v.resolution,
        "measured_ratio": v.measured_ratio,
        "predicted_ratio": v.predicted_ratio,
        "ratio_error": v.ratio_error,
        "parseval_defect": kernel.parseval_defect(),
        "l_max": grid.l_max,
    });
    Ok((outputs, summary))
}

fn weakndg(scene: &Scene, c: &RunConfig) -> Result<Outcome> {
    let (y, source) = match sphere_pair(scene) {
        Some((i, j)) => (bouncing_ball_seed(scene, i, j, precision_for(100.0))?.to_phase_point(), "bouncing-ball seed"),
        None => (PhasePoint::new(c.omega() * -scene.a(), c.omega()), "omega"),
    };
    let est = weak_nondegeneracy_estimate(scene, &y, c.radius, c.samples, c.seed)?;
    let row = vec![
        num(c.radius),
        est.samples.to_string(),
        est.hits.to_string(),
        num(est.fraction),
        num(est.ci_low),
        num(est.ci_high),
        c.seed.to_string(),
    ];
    let path = write_csv(&c.out, "weakndg.csv", c, &["radius", "samples", "hits", "fraction", "ci_low", "ci_high", "seed"], &[row])?;
    let summary = json!({
        "y_eta": { "x": y.x.to_array(), "xi": y.xi.to_array(), "source": source },
        "fraction": est.fraction,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "hits": est.hits,
    });
    Ok((vec![path], summary))
}
