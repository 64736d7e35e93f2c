//! Plain-text scene files.
//!
//! ```text
//! # two unit spheres
//! rho = 3.0
//! a = 4.0
//! body sphere {
//!     center = -2.0, 0.0, 0.0
//!     radius = 1.0
//! }
//! body ellipsoid {
//!     center = 2.0, 0.0, 0.0
//!     radii = 1.0, 0.8, 1.2
//! }
//! ```
//!
//! `tangency_tol` is optional. Lines starting with `#` are comments.

use std::fmt::Write as _;

use raylength_core::geometry::TANGENCY_TOL;
use raylength_core::{Body, BodyKind, Scene, Vec3};

use crate::error::{Result, ShellError};

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> ShellError {
    ShellError::Parse { line, column, message: message.into() }
}

/// A `key = value` line split into its parts with 1-based columns.
struct Assignment<'a> {
    key: &'a str,
    value: &'a str,
    value_column: usize,
}

fn split_assignment(line: usize, raw: &str) -> Result<Assignment<'_>> {
    let indent = raw.len() - raw.trim_start().len();
    let Some(eq) = raw.find('=') else {
        return Err(parse_err(line, indent + 1, "expected `key = value`"));
    };
    let key = raw[..eq].trim();
    if key.is_empty() {
        return Err(parse_err(line, indent + 1, "missing key before `=`"));
    }
    let after = &raw[eq + 1..];
    let value = after.trim();
    let value_column = eq + 2 + (after.len() - after.trim_start().len());
    Ok(Assignment { key, value, value_column })
}

fn parse_numbers(line: usize, a: &Assignment, count: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut offset = 0;
    for part in a.value.split(',') {
        let lead = part.len() - part.trim_start().len();
        let token = part.trim();
        let column = a.value_column + offset + lead;
        let v: f64 = token.parse().map_err(|_| parse_err(line, column, format!("`{token}` is not a number")))?;
        if !v.is_finite() {
            return Err(parse_err(line, column, format!("`{token}` is not finite")));
        }
        out.push(v);
        offset += part.len() + 1;
    }
    if out.len() != count {
        return Err(parse_err(line, a.value_column, format!("`{}` expects {count} numbers, found {}", a.key, out.len())));
    }
    Ok(out)
}

struct BodyBlock {
    kind: BodyKind,
    line: usize,
    center: Option<Vec3>,
    radii: Option<[f64; 3]>,
}

fn set_once<T>(slot: &mut Option<T>, value: T, line: usize, key: &str) -> Result<()> {
    if slot.is_some() {
        return Err(parse_err(line, 1, format!("duplicate key `{key}`")));
    }
    *slot = Some(value);
    Ok(())
}

/// Parses and validates a scene file.
pub fn parse_scene(text: &str) -> Result<Scene> {
    let mut rho = None;
    let mut a = None;
    let mut tangency = None;
    let mut bodies: Vec<Body> = Vec::new();
    let mut open: Option<BodyBlock> = None;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let body_text = raw.split('#').next().unwrap_or("");
        let trimmed = body_text.trim();
        if trimmed.is_empty() {
            continue;
        }
        let column = body_text.len() - body_text.trim_start().len() + 1;
        if let Some(block) = open.as_mut() {
            if trimmed == "}" {
                let block = open.take().expect("open block");
                let center = block.center.ok_or_else(|| parse_err(block.line, 1, "body without `center`"))?;
                let radii = block.radii.ok_or_else(|| parse_err(block.line, 1, "body without radius"))?;
                let body = match block.kind {
                    BodyKind::Sphere => Body::sphere(center, radii[0]),
                    BodyKind::Ellipsoid => Body::ellipsoid(center, radii),
                }
                .map_err(|e| ShellError::Validation(format!("body {}: {e}", bodies.len())))?;
                bodies.push(body);
                continue;
            }
            let asg = split_assignment(line, body_text)?;
            match (asg.key, block.kind) {
                ("center", _) => {
                    let v = parse_numbers(line, &asg, 3)?;
                    set_once(&mut block.center, Vec3::new(v[0], v[1], v[2]), line, "center")?;
                }
                ("radius", BodyKind::Sphere) => {
                    let v = parse_numbers(line, &asg, 1)?;
                    set_once(&mut block.radii, [v[0]; 3], line, "radius")?;
                }
                ("radii", BodyKind::Ellipsoid) => {
                    let v = parse_numbers(line, &asg, 3)?;
                    set_once(&mut block.radii, [v[0], v[1], v[2]], line, "radii")?;
                }
                (key, _) => return Err(parse_err(line, column, format!("unexpected key `{key}` in body block"))),
            }
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("body") {
            let rest = rest.trim();
            let Some(kind) = rest.strip_suffix('{') else {
                return Err(parse_err(line, column, "expected `body <sphere|ellipsoid> {`"));
            };
            let kind = match kind.trim() {
                "sphere" => BodyKind::Sphere,
                "ellipsoid" => BodyKind::Ellipsoid,
                other => return Err(parse_err(line, column + 5, format!("unknown body kind `{other}`"))),
            };
            open = Some(BodyBlock { kind, line, center: None, radii: None });
            continue;
        }
        let asg = split_assignment(line, body_text)?;
        let v = parse_numbers(line, &asg, 1)?[0];
        match asg.key {
            "rho" => set_once(&mut rho, v, line, "rho")?,
            "a" => set_once(&mut a, v, line, "a")?,
            "tangency_tol" => set_once(&mut tangency, v, line, "tangency_tol")?,
            key => return Err(parse_err(line, column, format!("unknown key `{key}`"))),
        }
    }
    if let Some(block) = open {
        return Err(parse_err(block.line, 1, "unterminated body block"));
    }
    let rho = rho.ok_or_else(|| parse_err(last_line.max(1), 1, "missing `rho`"))?;
    let a = a.ok_or_else(|| parse_err(last_line.max(1), 1, "missing `a`"))?;
    let tangency = tangency.unwrap_or(TANGENCY_TOL);
    if !(tangency > 0.0) {
        return Err(ShellError::Validation("tangency_tol must be positive".into()));
    }
    let scene = Scene::new(bodies, rho, a).map_err(|e| match e {
        raylength_core::Error::Validation(msg) => ShellError::Validation(msg),
        other => ShellError::Validation(other.to_string()),
    })?;
    Ok(scene.with_tangency_tol(tangency))
}

/// Scene file text that [`parse_scene`] reads back bit-exactly.
pub fn emit_scene(scene: &Scene) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "rho = {:?}", scene.rho());
    let _ = writeln!(s, "a = {:?}", scene.a());
    let _ = writeln!(s, "tangency_tol = {:?}", scene.tangency_tol());
    for b in scene.bodies() {
        let c = b.center();
        let r = b.radii();
        match b.kind() {
            BodyKind::Sphere => {
                let _ = writeln!(s, "body sphere {{\n    center = {:?}, {:?}, {:?}\n    radius = {:?}\n}}", c.x, c.y, c.z, r.x);
            }
            BodyKind::Ellipsoid => {
                let _ = writeln!(
                    s,
                    "body ellipsoid {{\n    center = {:?}, {:?}, {:?}\n    radii = {:?}, {:?}, {:?}\n}}",
                    c.x, c.y, c.z, r.x, r.y, r.z
                );
            }
        }
    }
    s
}

pub fn load_scene(path: &std::path::Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path).map_err(|e| ShellError::io(path, e))?;
    parse_scene(&text)
}
