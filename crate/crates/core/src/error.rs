use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FemError>;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("r must exceed 2d/(d+2) = {bound} (got r = {r}, d = {d})")]
    InadmissibleExponent { r: f64, d: usize, bound: f64 },

    #[error("unsupported spatial dimension {0}; only d = 2 and d = 3 are defined")]
    UnsupportedDimension(usize),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("non-conforming mesh: {0}")]
    NonConforming(String),

    #[error("macro facet {facet} has no fine node in its interior")]
    MissingFacetNode { facet: usize },

    #[error(
        "viscosity is not finite on element {element} (|∇u| = {grad_norm}); \
         use a positive epsilon_reg when r < 2"
    )]
    DegenerateViscosity { element: usize, grad_norm: f64 },

    #[error("forcing is not finite at ({x}, {y})")]
    NonFiniteForcing { x: f64, y: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error(
        "Picard iteration did not converge in {iterations} iterations \
         (last residual {last_residual:e}, tolerance {tolerance:e})"
    )]
    NotConverged {
        iterations: usize,
        last_residual: f64,
        tolerance: f64,
        /// Scaled residual after each iteration.
        history: Vec<f64>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl FemError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FemError::Io {
            path: path.into(),
            source,
        }
    }
}
