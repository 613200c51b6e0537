use thiserror::Error;

use crate::linsolve::SolveError;

#[derive(Debug, Error)]
pub enum SemError {
    #[error("invalid order for {what}: {value}")]
    InvalidOrder { what: &'static str, value: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate box: lo >= hi along axis {axis}")]
    DegenerateBox { axis: usize },

    #[error("inconsistent corners in transfinite element: {0}")]
    InconsistentCorners(String),

    #[error("tangled element {element}: det J = {det:e} at node {node}")]
    TangledElement { element: usize, node: usize, det: f64 },

    #[error("degenerate geometry on element {element} face {face}: zero tangent")]
    DegenerateGeometry { element: usize, face: usize },

    #[error("metrics are stale: built for geometry version {metrics}, mesh is at {mesh}")]
    StaleMetrics { metrics: u64, mesh: u64 },

    #[error("incompatible boundary data: net boundary flux {flux:e}")]
    IncompatibleData { flux: f64 },

    #[error("mesh inversion at t = {t}: {detail}")]
    MeshInversion { t: f64, detail: String },

    #[error(transparent)]
    Solver(#[from] SolveError),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl SemError {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            SemError::Config(_) => 1,
            SemError::MeshInversion { .. } | SemError::TangledElement { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, SemError>;
