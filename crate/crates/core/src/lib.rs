//! Scattering length spectrum of smooth convex obstacles in three dimensions.
//!
//! The crate traces the exterior billiard flow of a finite union of disjoint
//! spheres and ellipsoids, finds reflecting rays with prescribed incoming and
//! outgoing directions as critical points of the broken-path length, and
//! evaluates their sojourn times and differential cross sections. On top of
//! that it assembles the leading singularities of the scattering kernel,
//! scans escape times to locate trapped trajectories, and compares the
//! geometric predictions with the exact partial-wave scattering amplitude of
//! a sphere.
//!
//! Everything here is pure computation and builds without `std`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod billiard;
pub mod crosssection;
mod error;
pub mod geometry;
pub mod linalg;
pub mod rayfinder;
pub mod scenes;
pub mod spectrum;
pub mod trapscan;
pub mod vector;
pub mod waveoracle;

pub use billiard::{escape_time, reflect, trace, EscapeTime, PhasePoint, TraceStatus, Trajectory};
pub use crosssection::{CrossSectionRecord, JacobianMethod};
pub use error::{Error, Result};
pub use geometry::{Body, BodyKind, Scene, SurfacePoint};
pub use rayfinder::{find_rays, refine_ray, ReflectingRay};
pub use spectrum::{length_spectrum, SpectrumEntry};
pub use vector::{Mat2, Vec3};
