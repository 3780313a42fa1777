//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An element collapsed below the scale-relative area threshold.
    #[error("degenerate element {element}")]
    DegenerateElement { element: usize },

    /// A metric tensor failed its SPD factorization.
    #[error("metric tensor is not symmetric positive definite")]
    NonSpdMetric,

    /// Metric evaluation failed at a specific mesh vertex.
    #[error("metric evaluation failed at vertex {vertex}")]
    MetricAtVertex {
        vertex: usize,
        #[source]
        source: Box<Error>,
    },

    /// `‖∇Φ‖` fell below threshold, so no surface normal exists.
    #[error("vanishing surface gradient{}", match .vertex {
        Some(i) => format!(" at vertex {i}"),
        None => String::new(),
    })]
    VanishingGradient { vertex: Option<usize> },

    /// A sliding constraint whose gradient is parallel to the surface normal.
    #[error("ill-posed boundary constraint at vertex {vertex}: constraint gradient is parallel to the surface normal")]
    IllPosedConstraint { vertex: usize },

    /// Nonsingularity bounds require the coercive parameter range.
    #[error("nonsingularity bounds need balance parameter in (0, 1/2] and exponent > 1 (got theta = {theta}, p = {p})")]
    UnsupportedCoercivity { theta: f64, p: f64 },

    #[error("unknown surface {name:?}; available: {available}")]
    UnknownSurface { name: String, available: String },

    /// Mesh generator cannot produce the requested element count.
    #[error("unsupported element count {n} for {surface}: expected {expected}")]
    IncompatibleMeshSize {
        surface: String,
        n: usize,
        expected: String,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    /// A vertex violated the on-surface precondition of the integrator.
    #[error("vertex {vertex} is off the surface: |phi| = {residual:.3e}")]
    OffSurfaceVertex { vertex: usize, residual: f64 },

    /// Time integration aborted because an element degenerated.
    #[error("element {element} degenerated at t = {time:.6}")]
    ElementDegenerated { element: usize, time: f64 },

    #[error("step size underflow at t = {time:.6} (h = {step:.3e})")]
    StepSizeUnderflow { time: f64, step: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    InvalidArgument(String),
}
