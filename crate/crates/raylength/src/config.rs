//! Command-line arguments and the resolved run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use raylength_core::Vec3;
use serde::Serialize;

use crate::error::{Result, ShellError};

#[derive(Debug, Parser)]
#[command(name = "raylength", version, about = "Scattering length spectrum of convex obstacles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Spectrum,
    Trapscan,
    ValidateSphere,
    CrossCheck,
    Weakndg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reflecting rays, singular times and coefficients for one direction pair.
    Spectrum(RunArgs),
    /// Escape-time scan and a sequence of rays approaching a trapped orbit.
    Trapscan(RunArgs),
    /// Sphere spectrum against the band-limited wave kernel.
    ValidateSphere(RunArgs),
    /// Finite-difference against linearized Jacobian determinants.
    CrossCheck(RunArgs),
    /// Monte Carlo estimate of weak non-degeneracy near a trapped condition.
    Weakndg(RunArgs),
}

impl Command {
    pub fn split(self) -> (CommandKind, RunArgs) {
        match self {
            Command::Spectrum(a) => (CommandKind::Spectrum, a),
            Command::Trapscan(a) => (CommandKind::Trapscan, a),
            Command::ValidateSphere(a) => (CommandKind::ValidateSphere, a),
            Command::CrossCheck(a) => (CommandKind::CrossCheck, a),
            Command::Weakndg(a) => (CommandKind::Weakndg, a),
        }
    }
}

fn parse_list(s: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let v: std::result::Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
    match v {
        Ok(v) if v.len() == n && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(format!("expected {n} comma-separated finite numbers")),
    }
}

fn parse_vec3(s: &str) -> std::result::Result<[f64; 3], String> {
    parse_list(s, 3).map(|v| [v[0], v[1], v[2]])
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    parse_list(s, 2).map(|v| [v[0], v[1]])
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scene file.
    #[arg(long)]
    pub scene: PathBuf,
    /// Incoming direction `x,y,z` (normalized).
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub omega: Option<[f64; 3]>,
    /// Outgoing direction `x,y,z` (normalized).
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub theta: Option<[f64; 3]>,
    /// Escape-time budget of the scan.
    #[arg(long, default_value_t = 500.0)]
    pub budget: f64,
    /// Frequency band `min,max`.
    #[arg(long, value_parser = parse_pair, default_value = "20,60")]
    pub band: [f64; 2],
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Largest number of reflections searched.
    #[arg(long, default_value_t = 4)]
    pub m_max: usize,
    /// Grid density: shooting grid for ray searches, positions and
    /// directions per position for escape scans.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Number of bisection stages, with budgets 10, 20, 40, ...
    #[arg(long, default_value_t = 6)]
    pub stages: usize,
    /// Neighbourhood radius of the weak non-degeneracy estimate.
    #[arg(long, default_value_t = 0.05)]
    pub radius: f64,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Tolerance for coincident singular times.
    #[arg(long, default_value_t = raylength_core::spectrum::GAP_TOL)]
    pub gap_tol: f64,
    /// Finite-difference step relative to the reference radius.
    #[arg(long, default_value_t = raylength_core::crosssection::DEFAULT_FD_STEP)]
    pub fd_step: f64,
    /// Threshold on |det dJ| for non-degenerate rays.
    #[arg(long, default_value_t = raylength_core::crosssection::NONDEGENERACY_TOL)]
    pub nondegeneracy_tol: f64,
}

/// Fully resolved parameters of one run, recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub scene_path: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub omega: [f64; 3],
    pub theta: [f64; 3],
    pub budget: f64,
    pub band: [f64; 2],
    pub m_max: usize,
    pub grid: usize,
    pub stages: usize,
    pub radius: f64,
    pub samples: usize,
    pub gap_tol: f64,
    pub fd_step: f64,
    pub nondegeneracy_tol: f64,
}

fn unit(v: [f64; 3], name: &str) -> Result<[f64; 3]> {
    let n = Vec3::from_array(v).norm();
    if !(n > 0.0) {
        return Err(ShellError::Config(format!("{name} must be a nonzero vector")));
    }
    Ok(Vec3::from_array(v).normalized().to_array())
}

impl RunConfig {
    pub fn resolve(command: CommandKind, args: RunArgs) -> Result<RunConfig> {
        let default_grid = match command {
            CommandKind::Trapscan => 100,
            _ => raylength_core::spectrum::DEFAULT_GRID,
        };
        let cfg = RunConfig {
            command,
            scene_path: args.scene,
            out: args.out,
            seed: args.seed,
            omega: unit(args.omega.unwrap_or([0.0, 0.0, -1.0]), "omega")?,
            theta: unit(args.theta.unwrap_or([0.0, 0.0, 1.0]), "theta")?,
            budget: args.budget,
            band: args.band,
            m_max: args.m_max,
            grid: args.grid.unwrap_or(default_grid),
            stages: args.stages,
            radius: args.radius,
            samples: args.samples,
            gap_tol: args.gap_tol,
            fd_step: args.fd_step,
            nondegeneracy_tol: args.nondegeneracy_tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("budget", self.budget),
            ("radius", self.radius),
            ("gap_tol", self.gap_tol),
            ("fd_step", self.fd_step),
            ("nondegeneracy_tol", self.nondegeneracy_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ShellError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.band[0] > 0.0 && self.band[1] > self.band[0]) {
            return Err(ShellError::Config("band must satisfy 0 < min < max".into()));
        }
        if self.grid == 0 || self.m_max == 0 || self.stages == 0 {
            return Err(ShellError::Config("grid, m-max and stages must be positive".into()));
        }
        let uses_pair = matches!(self.command, CommandKind::Spectrum | CommandKind::CrossCheck | CommandKind::ValidateSphere);
        if uses_pair && Vec3::from_array(self.omega).distance(Vec3::from_array(self.theta)) < 1e-12 {
            return Err(ShellError::Core(raylength_core::Error::ThetaEqualsOmega));
        }
        Ok(())
    }

    pub fn omega(&self) -> Vec3 {
        Vec3::from_array(self.omega)
    }

    pub fn theta(&self) -> Vec3 {
        Vec3::from_array(self.theta)
    }

    /// Stage budgets `10 * 2^k`.
    pub fn stage_budgets(&self) -> Vec<f64> {
        (0..self.stages).map(|k| 10.0 * f64::powi(2.0, k as i32)).collect()
    }
}
