use alloc::string::String;

/// Errors raised by the geometric, dynamical and wave computations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("scene validation failed: {0}")]
    Validation(String),
    #[error("point is not on the surface of body {body} (implicit value {value:e})")]
    NotOnSurface { body: usize, value: f64 },
    #[error("consecutive reflection points {0} and {1} coincide")]
    DegenerateSegment(usize, usize),
    #[error("incoming and outgoing directions coincide")]
    ThetaEqualsOmega,
    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("segment {segment} of the ray crosses a body")]
    ObstructedPath { segment: usize },
    #[error("segment {segment} of the ray is tangent to the boundary")]
    TangentRay { segment: usize },
    #[error("expected {expected} reflections, trajectory made {found}")]
    WrongReflectionCount { expected: usize, found: usize },
    #[error("trajectory hit a boundary tangentially at reflection {0}")]
    TangencyEncountered(usize),
    #[error("linearization is singular at hit {0} (grazing incidence)")]
    SingularHit(usize),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("degenerate ray: |det dJ| = {0:e}")]
    DegenerateRay(f64),
    #[error("outgoing direction grazes the last reflection point")]
    GrazingExit,
    #[error("Fermat Hessian is singular (eigenvalue {0:e})")]
    SingularHessian(f64),
    #[error("trapped seed escapes after {0} length units")]
    SeedNotTrapped(f64),
    #[error("free seed did not escape within {0} length units")]
    SeedNotFree(f64),
    #[error("ray refinement failed: {0}")]
    RefinementFailed(String),
    #[error("partial-wave series not converged at l_max = {l_max} (relative change {change:e})")]
    TruncationNotConverged { l_max: usize, change: f64 },
    #[error("spherical Bessel recurrence overflowed at order {0}")]
    RecurrenceOverflow(usize),
    #[error("frequency band has {0} samples, at least 64 required")]
    BandTooNarrow(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
